#pragma once

#include <string_view>

#include "linked/core/serialization.hpp"

namespace linked::util {

// One JSON object per line on stderr: {"stage":..., "event":..., ...fields}.
void log_event(std::string_view stage, std::string_view event, const Json& fields = Json::object());

void set_logging(bool enabled);
bool logging_enabled();

}  // namespace linked::util
