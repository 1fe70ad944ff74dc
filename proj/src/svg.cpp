#include "prosospeak/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace prosospeak {
namespace {

constexpr int kW = 640;
constexpr int kH = 480;
constexpr int kMargin = 56;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::ofstream open_svg(const std::filesystem::path& path, const std::string& title) {
  std::ofstream out(path);
  if (!out) fail("cannot write SVG: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << title << "</text>\n";
  return out;
}

}  // namespace

void svg_roc_plot(const std::filesystem::path& path, const RocCurve& curve,
                  const std::string& title) {
  std::ofstream out = open_svg(path, title);
  const double px = kW - 2 * kMargin, py = kH - 2 * kMargin;
  auto x_of = [&](double fpr) { return kMargin + fpr * px; };
  auto y_of = [&](double tpr) { return kH - kMargin - tpr * py; };

  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << px
      << "\" height=\"" << py << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<line x1=\"" << x_of(0) << "\" y1=\"" << y_of(0) << "\" x2=\"" << x_of(1)
      << "\" y2=\"" << y_of(1) << "\" stroke=\"#bbb\" stroke-dasharray=\"4,4\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve.points) out << num(x_of(p.fpr)) << "," << num(y_of(p.tpr)) << " ";
  out << "\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">false positive "
         "rate</text>\n";
  out << "<text x=\"16\" y=\"" << kH / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 "
         "16 "
      << kH / 2 << ")\">true positive rate</text>\n";
  out << "</svg>\n";
}

void svg_heatmap(const std::filesystem::path& path, const MatD& values,
                 const std::string& title) {
  require(!values.empty(), "svg_heatmap: empty matrix");
  std::ofstream out = open_svg(path, title);
  const double px = kW - 2 * kMargin, py = kH - 2 * kMargin;
  const double cw = px / static_cast<double>(values.cols());
  const double ch = py / static_cast<double>(values.rows());

  double lo = values.data()[0], hi = values.data()[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    lo = std::min(lo, values.data()[i]);
    hi = std::max(hi, values.data()[i]);
  }
  const double span = hi - lo > 1e-12 ? hi - lo : 1.0;

  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double t = (values(r, c) - lo) / span;
      const int red = static_cast<int>(255 * t);
      const int blue = static_cast<int>(255 * (1.0 - t));
      out << "<rect x=\"" << num(kMargin + c * cw) << "\" y=\"" << num(kMargin + r * ch)
          << "\" width=\"" << num(cw + 0.5) << "\" height=\"" << num(ch + 0.5)
          << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n";
    }
  }
  out << "</svg>\n";
}

void svg_bar_plot(const std::filesystem::path& path,
                  const std::vector<AttributionRow>& rows, const std::string& title) {
  require(!rows.empty(), "svg_bar_plot: no rows");
  std::ofstream out = open_svg(path, title);
  const double px = kW - 2 * kMargin, py = kH - 2 * kMargin;
  const double bw = px / static_cast<double>(rows.size());

  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << px
      << "\" height=\"" << py << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double h = rows[i].rate * py;
    const char* color = rows[i].truth == Label::REAL ? "#2a9d5c" : "#c24a3a";
    out << "<rect x=\"" << num(kMargin + i * bw + bw * 0.15) << "\" y=\""
        << num(kH - kMargin - h) << "\" width=\"" << num(bw * 0.7) << "\" height=\"" << num(h)
        << "\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << num(kMargin + (i + 0.5) * bw) << "\" y=\"" << kH - kMargin + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << rows[i].system_id << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace prosospeak
