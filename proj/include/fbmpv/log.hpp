#pragma once

#include <functional>
#include <string>

namespace fbmpv {

// Non-fatal diagnostics (coverage, support). Default handler writes to stderr.
using WarningHandler = std::function<void(const std::string&)>;

void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace fbmpv
