#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fbmpv/fbm_model.hpp"

namespace fbmpv {

// Uniform grid s_i = i T / n on [0, T] with the weights of the discrete
// ds^{2H} measure, w_i = s_{i+1}^{2H} - s_i^{2H}, i = 0..n-1.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps, const HurstIndex& h);

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
  double hurst() const noexcept { return hurst_; }
  double node(std::size_t i) const noexcept { return nodes_[i]; }

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> ds2h_weights() const noexcept { return weights_; }

  // Plain step weights are all dt.
  double plain_weight() const noexcept { return dt(); }

 private:
  double horizon_;
  std::size_t steps_;
  double hurst_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace fbmpv
