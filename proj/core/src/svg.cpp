#include <array>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "transpol/errors.hpp"
#include "transpol/eval.hpp"

namespace transpol {

namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 20.0;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Frame {
  double x_max;
  [[nodiscard]] double px(double x) const { return kMargin + (x + x_max) / (2.0 * x_max) * (kSize - 2 * kMargin); }
  [[nodiscard]] double py(double y) const { return kSize - px(y); }
};

}  // namespace

void write_trajectory_svg(const std::filesystem::path& path, const EvalReport& report, double x_max) {
  const Frame f{x_max};
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize + 30
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize + 30 << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kSize << "\" height=\"" << kSize + 30 << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize - 2 * kMargin << "\" height=\""
      << kSize - 2 * kMargin << "\" fill=\"none\" stroke=\"#999\"/>\n";

  for (std::size_t k = 0; k < report.episodes.size(); ++k) {
    const auto& ep = report.episodes[k];
    const char* color = kColors[k % kColors.size()];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-dasharray=\"4 3\" stroke-opacity=\"0.6\" points=\"";
    for (const auto& s : ep.steps) svg << f.px(s.target[0]) << ',' << f.py(s.target[1]) << ' ';
    svg << "\"/>\n";
    if (!ep.steps.empty()) {
      const auto& last = ep.steps.back().target;
      svg << "<circle cx=\"" << f.px(last[0]) << "\" cy=\"" << f.py(last[1]) << "\" r=\"6\" fill=\"" << color
          << "\" fill-opacity=\"0.4\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& x : ep.states) svg << f.px(x[0]) << ',' << f.py(x[1]) << ' ';
    svg << "\"/>\n";
  }
  if (!report.episodes.empty() && !report.episodes.front().states.empty()) {
    const auto& s = report.episodes.front().states.front();
    svg << "<rect x=\"" << f.px(s[0]) - 4 << "\" y=\"" << f.py(s[1]) - 4
        << "\" width=\"8\" height=\"8\" fill=\"black\"/>\n";
  }
  svg << "<text x=\"" << kMargin << "\" y=\"" << kSize + 18 << "\" font-family=\"monospace\" font-size=\"13\">"
      << report.controller << ' ' << to_string(report.variant) << " gamma=" << std::setprecision(1)
      << report.gamma * 180.0 / std::numbers::pi << " deg  J=" << std::setprecision(4) << report.total_J
      << "</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write SVG: " + path.string());
  out << svg.str();
}

}  // namespace transpol
