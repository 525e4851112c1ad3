#include "spinsight/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace spinsight::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

// Rounds a tick spacing to 1, 2 or 5 times a power of ten.
double nice_step(double span, int target) {
  const double raw = span / std::max(target, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const PlotOptions& o) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!std::isnan(o.x_min)) x0 = o.x_min;
  if (!std::isnan(o.x_max)) x1 = o.x_max;
  if (!std::isnan(o.y_min)) y0 = o.y_min;
  if (!std::isnan(o.y_max)) y1 = o.y_max;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  const double left = 70, right = 20, top = 40, bottom = 50;
  double pw = o.width - left - right;
  double ph = o.height - top - bottom;
  double sx = pw / (x1 - x0);
  double sy = ph / (y1 - y0);
  if (o.equal_aspect) {
    const double s = std::min(sx, sy);
    sx = sy = s;
  }
  auto px = [&](double x) { return left + (x - x0) * sx; };
  auto py = [&](double y) { return o.flip_y ? top + (y - y0) * sy : top + ph - (y - y0) * sy; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\""
     << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << o.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(o.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double xs = nice_step(x1 - x0, 6);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
    const double x = px(t);
    if (x > left + pw + 0.5) break;
    os << "<line x1=\"" << num(x) << "\" y1=\"" << top + ph << "\" x2=\"" << num(x) << "\" y2=\""
       << top << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << num(x) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << num(std::abs(t) < 1e-12 ? 0.0 : t) << "</text>\n";
  }
  const double ys = nice_step(y1 - y0, 6);
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
    const double y = py(t);
    if (y < top - 0.5 || y > top + ph + 0.5) continue;
    os << "<line x1=\"" << left << "\" y1=\"" << num(y) << "\" x2=\"" << left + pw << "\" y2=\""
       << num(y) << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
       << num(std::abs(t) < 1e-12 ? 0.0 : t) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << o.height - 12
     << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string color = s.color.empty() ? kPalette[i % 6] : s.color;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      os << num(px(s.x[k])) << ',' << num(py(s.y[k])) << ' ';
    }
    os << "\"/>\n";
    if (s.markers) {
      for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
        os << "<circle cx=\"" << num(px(s.x[k])) << "\" cy=\"" << num(py(s.y[k]))
           << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = top + 16 + 16.0 * static_cast<double>(i);
    os << "<line x1=\"" << left + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + 30 << "\" y2=\""
       << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + 36 << "\" y=\"" << ly + 4 << "\">" << escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string roc_plot(const std::vector<RocPoint>& curve, double auc) {
  Series s{"ROC (AUC " + num(auc) + ")", {}, {}, "", true};
  for (const auto& p : curve) {
    s.x.push_back(p.fpr);
    s.y.push_back(p.tpr);
  }
  Series chance{"chance", {0, 1}, {0, 1}, "#999"};
  PlotOptions o;
  o.title = "Spin-sign ROC (topspin positive)";
  o.x_label = "false positive rate";
  o.y_label = "true positive rate";
  o.x_min = 0, o.x_max = 1, o.y_min = 0, o.y_max = 1;
  o.width = o.height = 520;
  std::string out = line_plot({s, chance}, o);
  // Annotate the thresholds nearest to zero.
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (std::isfinite(curve[i].threshold)) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(curve[a].threshold) < std::abs(curve[b].threshold);
  });
  std::ostringstream notes;
  const double left = 70, top = 40, pw = 430, ph = 430;
  for (std::size_t k = 0; k < std::min<std::size_t>(2, idx.size()); ++k) {
    const auto& p = curve[idx[k]];
    notes << "<text x=\"" << num(left + p.fpr * pw + 6) << "\" y=\""
          << num(top + ph - p.tpr * ph + 14 + 14.0 * static_cast<double>(k))
          << "\" fill=\"#d62728\">" << num(p.threshold) << " Hz</text>\n";
  }
  out.insert(out.rfind("</svg>"), notes.str());
  return out;
}

std::string confusion_plot(const Confusion& m) {
  const char* names[] = {"backspin", "topspin"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"320\" "
        "font-family=\"sans-serif\" font-size=\"13\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"180\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">Spin-sign confusion</text>\n";
  std::int64_t total = 0, peak = 1;
  for (const auto& r : m) {
    for (auto c : r) total += c, peak = std::max(peak, c);
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double shade = static_cast<double>(m[r][c]) / static_cast<double>(peak);
      const int g = static_cast<int>(255 - 180 * shade);
      os << "<rect x=\"" << 110 + 110 * c << "\" y=\"" << 60 + 110 * r
         << "\" width=\"110\" height=\"110\" fill=\"rgb(" << g << ',' << g << ",255)\" stroke=\"#444\"/>\n";
      os << "<text x=\"" << 165 + 110 * c << "\" y=\"" << 120 + 110 * r
         << "\" text-anchor=\"middle\" font-size=\"18\">" << m[r][c] << "</text>\n";
    }
    os << "<text x=\"104\" y=\"" << 120 + 110 * r << "\" text-anchor=\"end\">" << names[r]
       << "</text>\n";
    os << "<text x=\"" << 165 + 110 * r << "\" y=\"52\" text-anchor=\"middle\">" << names[r]
       << "</text>\n";
  }
  os << "<text x=\"220\" y=\"300\" text-anchor=\"middle\">predicted (cols), annotated (rows), N="
     << total << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string reprojection_overlay(const ImageSize& img, const std::vector<Pixel>& observed,
                                 const std::vector<Pixel>& projected,
                                 const std::vector<Pixel>& keypoints, const std::string& title) {
  auto series = [](const std::vector<Pixel>& px, std::string label, std::string color, bool m) {
    Series s{std::move(label), {}, {}, std::move(color), m};
    for (const auto& p : px) {
      s.x.push_back(p.u);
      s.y.push_back(p.v);
    }
    return s;
  };
  PlotOptions o;
  o.title = title;
  o.x_label = "u (px)";
  o.y_label = "v (px)";
  o.width = 800;
  o.height = 500;
  o.flip_y = true;
  o.equal_aspect = true;
  o.x_min = 0, o.x_max = img.width, o.y_min = 0, o.y_max = img.height;
  std::vector<Series> all{series(observed, "observed ball", "#1f77b4", true),
                          series(projected, "projected prediction", "#d62728", true)};
  // Keypoints as markers only: draw the table outline through the corners.
  if (keypoints.size() >= 4) {
    Series outline{"table outline", {}, {}, "#2ca02c", false};
    for (int k : {0, 1, 2, 3, 0}) {
      outline.x.push_back(keypoints[k].u);
      outline.y.push_back(keypoints[k].v);
    }
    all.push_back(outline);
  }
  std::string out = line_plot(all, o);
  std::ostringstream marks;
  const double left = 70, top = 40;
  const double s = std::min((o.width - 90.0) / img.width, (o.height - 90.0) / img.height);
  for (const auto& p : keypoints) {
    marks << "<circle cx=\"" << num(left + p.u * s) << "\" cy=\"" << num(top + p.v * s)
          << "\" r=\"3\" fill=\"#2ca02c\"/>\n";
  }
  out.insert(out.rfind("</svg>"), marks.str());
  return out;
}

}  // namespace spinsight::svg
