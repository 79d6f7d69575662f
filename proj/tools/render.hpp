#pragma once

#include <string>

#include <json.hpp>

namespace nephro::render {

// Aligned plain-text summary of a stage report for the terminal.
std::string text(const nlohmann::json& report);

}  // namespace nephro::render
