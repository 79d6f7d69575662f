#pragma once

#include <string>
#include <vector>

namespace nephro::plots {

// Minimal standalone SVG charts for headless runs; the UI renders the data documents itself.
std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                       const std::vector<double>& y);

void write_text(const std::string& path, const std::string& text);

}  // namespace nephro::plots
