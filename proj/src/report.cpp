#include "opfield/report.hpp"

#include <algorithm>
#include <stdexcept>

namespace opfield {

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Degenerate: return "degenerate";
  }
  return "unknown";
}

double CheckReport::max_residual() const {
  double m = 0.0;
  for (const auto& r : residuals) m = std::max(m, r.value);
  return m;
}

double CheckReport::value(const std::string& key) const {
  for (const auto& r : residuals)
    if (r.name == key) return r.value;
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw std::out_of_range("report '" + name + "' has no value '" + key + "'");
}

void CheckReport::finalize() {
  if (degenerate) {
    status = CheckStatus::Degenerate;
    return;
  }
  const bool ok = std::all_of(residuals.begin(), residuals.end(),
                              [this](const Residual& r) { return r.value <= tolerance_for(r); });
  status = ok ? CheckStatus::Pass : CheckStatus::Fail;
}

}  // namespace opfield
