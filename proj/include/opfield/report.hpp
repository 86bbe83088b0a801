#ifndef OPFIELD_REPORT_HPP
#define OPFIELD_REPORT_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace opfield {

enum class CheckStatus { Pass, Fail, Degenerate };

const char* to_string(CheckStatus status);

struct Residual {
  std::string name;
  double value = 0.0;
  /// Overrides the report tolerance for this residual.
  std::optional<double> tolerance;
};

/// Result of one verification. Residuals are compared against the tolerance;
/// metrics, series and notes are informational and never affect the status.
struct CheckReport {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double tolerance = 0.0;
  double wall_ms = 0.0;
  std::vector<Residual> residuals;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  std::vector<std::pair<std::string, std::string>> notes;
  bool degenerate = false;

  void add_residual(std::string key, double value, std::optional<double> own_tolerance = std::nullopt) {
    residuals.push_back(Residual{std::move(key), value, own_tolerance});
  }
  void add_metric(std::string key, double value) { metrics.emplace_back(std::move(key), value); }
  void add_series(std::string key, std::vector<double> values) { series.emplace_back(std::move(key), std::move(values)); }
  void add_note(std::string key, std::string value) { notes.emplace_back(std::move(key), std::move(value)); }

  /// Largest residual, 0 when there are none.
  double max_residual() const;
  /// Looks up a residual or metric by key; throws std::out_of_range.
  double value(const std::string& key) const;

  double tolerance_for(const Residual& r) const { return r.tolerance.value_or(tolerance); }

  /// Sets status: degenerate when flagged, otherwise pass iff every residual
  /// is within its tolerance (NaN residuals fail).
  void finalize();

  bool passed() const { return status == CheckStatus::Pass; }
};

}  // namespace opfield

#endif  // OPFIELD_REPORT_HPP
