#include "binsd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace binsd {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string PhaseTimings::to_csv() const {
  std::ostringstream out;
  out << "phase,seconds\n";
  for (const auto& [phase, seconds] : rows_) out << phase << ',' << fmt(seconds) << '\n';
  return out.str();
}

void PhaseTimings::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_csv();
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::pair<double, double>> roc_points(const PairScoreSet& pairs) {
  long n_pos = 0, n_neg = 0;
  for (const auto& [score, label] : pairs.items) (label > 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw DataError("pair score set needs both labels");

  auto sorted = pairs.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    // Whole tie group enters together so ties trace a diagonal segment.
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second > 0 ? tp : fp) += 1;
      ++j;
    }
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return pts;
}

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kMarginL = 64, kMarginR = 24, kMarginT = 40, kMarginB = 48;

const char* kSeriesColors[] = {"#1f6fb2", "#c23b22", "#2e8b57", "#8a2be2", "#b8860b", "#444444"};

struct Scale {
  double x_min, x_max, y_min, y_max;
  double px(double x) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return kMarginL + (x - x_min) / span * (kWidth - kMarginL - kMarginR);
  }
  double py(double y) const {
    const double span = y_max > y_min ? y_max - y_min : 1.0;
    return kHeight - kMarginB - (y - y_min) / span * (kHeight - kMarginT - kMarginB);
  }
};

void svg_header(std::ostream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

void svg_axes(std::ostream& out, const Scale& sc, const std::string& x_label,
              const std::string& y_label) {
  out << "<line x1=\"" << sc.px(sc.x_min) << "\" y1=\"" << sc.py(sc.y_min) << "\" x2=\""
      << sc.px(sc.x_max) << "\" y2=\"" << sc.py(sc.y_min) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << sc.px(sc.x_min) << "\" y1=\"" << sc.py(sc.y_min) << "\" x2=\""
      << sc.px(sc.x_min) << "\" y2=\"" << sc.py(sc.y_max) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = sc.x_min + (sc.x_max - sc.x_min) * i / 4.0;
    const double fy = sc.y_min + (sc.y_max - sc.y_min) * i / 4.0;
    out << "<text x=\"" << sc.px(fx) << "\" y=\"" << kHeight - kMarginB + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt_short(fx) << "</text>\n";
    out << "<text x=\"" << kMarginL - 8 << "\" y=\"" << sc.py(fy) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_short(fy)
        << "</text>\n";
  }
  out << "<text x=\"" << (kMarginL + kWidth - kMarginR) / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
      << "</text>\n"
      << "<text x=\"16\" y=\"" << (kMarginT + kHeight - kMarginB) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << (kMarginT + kHeight - kMarginB) / 2 << ")\">" << y_label
      << "</text>\n";
}

void svg_polyline(std::ostream& out, const Scale& sc,
                  const std::vector<std::pair<double, double>>& pts, const char* color) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) out << fmt_short(sc.px(x)) << ',' << fmt_short(sc.py(y)) << ' ';
  out << "\"/>\n";
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  if (series.empty()) throw DataError("chart needs at least one series");
  Scale sc{1e300, -1e300, 1e300, -1e300};
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      sc.x_min = std::min(sc.x_min, x);
      sc.x_max = std::max(sc.x_max, x);
      sc.y_min = std::min(sc.y_min, y);
      sc.y_max = std::max(sc.y_max, y);
    }
  }
  if (sc.x_min > sc.x_max) throw DataError("chart has no points");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  svg_header(out, title);
  svg_axes(out, sc, x_label, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kSeriesColors[i % (sizeof(kSeriesColors) / sizeof(kSeriesColors[0]))];
    svg_polyline(out, sc, series[i].points, color);
    out << "<text x=\"" << kWidth - kMarginR - 8 << "\" y=\"" << kMarginT + 16 * (i + 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
        << "\">" << series[i].name << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed: " + path);
}

void write_roc_svg(const std::string& path, const PairScoreSet& pairs) {
  ChartSeries roc{"ROC", roc_points(pairs)};
  ChartSeries chance{"chance", {{0.0, 0.0}, {1.0, 1.0}}};
  write_line_chart_svg(path, "ROC curve", "false positive rate", "true positive rate",
                       {roc, chance});
}

std::string config_hash(const std::string& resolved_config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : resolved_config) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string run_manifest(std::uint64_t seed, const std::string& resolved_config) {
  std::ostringstream out;
  out << "run-manifest seed=" << seed << " config_hash=" << config_hash(resolved_config)
      << " tool=binsd/1.0.0 formats=corpus:" << kCorpusFormatVersion
      << ",index:" << kIndexFormatVersion << ",checkpoint:" << kCheckpointFormatVersion;
  return out.str();
}

}  // namespace binsd
