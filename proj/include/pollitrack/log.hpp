#pragma once

#include <functional>
#include <string_view>

namespace pollitrack {

using WarningSink = std::function<void(std::string_view)>;

/// Routes warnings to the sink (stderr by default). Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void log_warning(std::string_view message);

}  // namespace pollitrack
