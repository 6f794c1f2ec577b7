#pragma once

#include <json.hpp>

namespace loom {

using json = nlohmann::json;

} // namespace loom
