#include "fbmpv/time_grid.hpp"

#include <cmath>

#include "fbmpv/error.hpp"

namespace fbmpv {

TimeGrid::TimeGrid(double horizon, std::size_t steps, const HurstIndex& h)
    : horizon_(horizon), steps_(steps), hurst_(h.value()) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(Errc::InvalidArgument, "time grid horizon must be positive");
  }
  if (steps == 0) throw Error(Errc::InvalidArgument, "time grid needs at least one step");
  nodes_.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    nodes_[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
  }
  nodes_[steps] = horizon;

  const double p = h.two_h();
  weights_.resize(steps);
  double prev = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double next = pow_nonneg(nodes_[i + 1], p);
    weights_[i] = next - prev;
    prev = next;
  }
}

}  // namespace fbmpv
