#pragma once

#include <functional>
#include <string>

namespace depthedge {

using WarningSink = std::function<void(const std::string&)>;

/// Route library warnings (default: stderr). Pass nullptr to restore the default.
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace depthedge
