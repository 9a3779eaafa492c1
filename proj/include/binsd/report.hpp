#ifndef BINSD_REPORT_HPP
#define BINSD_REPORT_HPP

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "binsd/metrics.hpp"

namespace binsd {

/// Wall-clock phase timings, CSV "phase,seconds".
class PhaseTimings {
 public:
  void record(const std::string& phase, double seconds) { rows_.emplace_back(phase, seconds); }
  const std::vector<std::pair<std::string, double>>& rows() const { return rows_; }
  void write_csv(const std::string& path) const;
  std::string to_csv() const;

 private:
  std::vector<std::pair<std::string, double>> rows_;
};

/// RAII stopwatch appending to a PhaseTimings on destruction.
class ScopedTimer {
 public:
  ScopedTimer(PhaseTimings& sink, std::string phase)
      : sink_(sink), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
  ~ScopedTimer() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    sink_.record(phase_, std::chrono::duration<double>(elapsed).count());
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  PhaseTimings& sink_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

/// One line chart series: name plus (x, y) points in data coordinates.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Standalone static SVG line chart, no external dependencies.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series);

/// ROC curve of a scored pair set (TPR over FPR, thresholds descending).
void write_roc_svg(const std::string& path, const PairScoreSet& pairs);
std::vector<std::pair<double, double>> roc_points(const PairScoreSet& pairs);

/// FNV-1a 64 over the resolved configuration text; hex string.
std::string config_hash(const std::string& resolved_config);

/// Deterministic provenance line: seed, config hash, tool and format
/// versions. Carries no timestamps.
std::string run_manifest(std::uint64_t seed, const std::string& resolved_config);

}  // namespace binsd

#endif  // BINSD_REPORT_HPP
