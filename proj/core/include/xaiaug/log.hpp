#pragma once

#include <functional>
#include <string>

namespace xaiaug {

/// Receives non-fatal diagnostics (degenerate but legal configurations).
/// Defaults to writing "warning: <msg>" to stderr.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace xaiaug
