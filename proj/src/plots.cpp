#include "nephro/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nephro/common.hpp"

namespace nephro::plots {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 110, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& s, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  std::ostringstream s;
  header(s, title);
  const double lo = std::min(0.0, values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()));
  double hi = std::max(0.0, values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()));
  if (hi == lo) hi = lo + 1;
  const double plot_w = kWidth - kLeft - kRight;
  const double band = (kHeight - kTop - kBottom) / std::max<std::size_t>(1, values.size());
  auto xpos = [&](double v) { return kLeft + (v - lo) / (hi - lo) * plot_w; };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double y = kTop + band * static_cast<double>(i);
    const double x0 = xpos(0), x1 = xpos(values[i]);
    s << "<rect x=\"" << num(std::min(x0, x1)) << "\" y=\"" << num(y + band * 0.15) << "\" width=\""
      << num(std::abs(x1 - x0)) << "\" height=\"" << num(band * 0.7) << "\" fill=\""
      << (values[i] >= 0 ? "#c0392b" : "#2e86c1") << "\"/>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + band * 0.6) << "\" text-anchor=\"end\">"
      << escape(i < labels.size() ? labels[i] : "") << "</text>\n";
    s << "<text x=\"" << num(std::max(x0, x1) + 4) << "\" y=\"" << num(y + band * 0.6) << "\">" << num(values[i])
      << "</text>\n";
  }
  s << "<line x1=\"" << num(xpos(0)) << "\" y1=\"" << kTop << "\" x2=\"" << num(xpos(0)) << "\" y2=\""
    << kHeight - kBottom << "\" stroke=\"black\"/>\n</svg>\n";
  return s.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                       const std::vector<double>& y) {
  std::ostringstream s;
  header(s, title);
  const std::size_t n = std::min(x.size(), y.size());
  if (n == 0) {
    s << "</svg>\n";
    return s.str();
  }
  double x0 = *std::min_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  double x1 = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  double y0 = *std::min_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  double y1 = *std::max_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return kTop + (1 - (v - y0) / (y1 - y0)) * ph; };
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#888\"/>\n<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < n; ++i) s << num(px(x[i])) << ',' << num(py(y[i])) << ' ';
  s << "\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"" << kHeight - kBottom + 16 << "\">" << num(x0) << "</text>\n";
  s << "<text x=\"" << kWidth - kRight << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"end\">" << num(x1)
    << "</text>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
    << "</text>\n";
  s << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">" << num(y1) << "</text>\n";
  s << "<text x=\"" << kLeft - 6 << "\" y=\"" << kHeight - kBottom << "\" text-anchor=\"end\">" << num(y0)
    << "</text>\n</svg>\n";
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

}  // namespace nephro::plots
