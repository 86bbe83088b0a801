#ifndef OPFIELD_SCENARIO_HPP
#define OPFIELD_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfield/field.hpp"
#include "opfield/report.hpp"
#include "opfield/spaces.hpp"

namespace opfield::scenario {

inline constexpr int SCHEMA_VERSION = 1;

/// Schema or configuration problem; `key` is the dotted path at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "'" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SpaceDecl {
  std::string label;
  FactorKind kind = FactorKind::Fock;
  Flavor flavor = Flavor::Real;
  Index dim = 0;
  GridSpec grid;
};

struct EnergyShift {
  std::size_t mode = 0;
  double E_re = 0.0;
  double E_im = 0.0;
};

struct FieldDecl {
  std::size_t components = 1;
  std::vector<Index> fock_dims;
  std::vector<Vec3> k_re;
  std::vector<Vec3> kappa;
  Pairing pairing = Pairing::Conjugate;
  std::vector<double> weights;
  /// Applied to the stored energy labels after the table is built.
  std::vector<EnergyShift> perturb;
};

struct CheckDecl {
  std::string type;
  std::optional<double> tolerance;
  nlohmann::json params = nlohmann::json::object();
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  GlobalConstants constants;
  std::vector<SpaceDecl> spaces;
  std::optional<FieldDecl> field;
  std::vector<CheckDecl> checks;
};

/// Reads and parses a scenario file; syntax errors become ConfigError.
nlohmann::json load_json_file(const std::string& path);

/// Applies dotted-path overrides of the form key=value. Values parse as JSON
/// when possible and fall back to strings.
void apply_overrides(nlohmann::json& doc, std::span<const std::string> overrides);

/// Validates against the schema and builds the typed scenario.
Scenario parse_scenario(const nlohmann::json& doc);

/// Executes checks in declared order. Library errors raised while setting up
/// a check are rethrown as ConfigError naming the check.
std::vector<CheckReport> run_scenario(const Scenario& sc);

/// 0 when every non-degenerate check passed, 1 otherwise.
int exit_code(std::span<const CheckReport> reports);

/// Report document. wall_ms is null unless timing is requested, so reports
/// are byte-identical across runs.
nlohmann::ordered_json report_json(const Scenario& sc, std::span<const CheckReport> reports, bool timing);
std::string report_csv(const Scenario& sc, std::span<const CheckReport> reports, bool timing);

struct CheckInfo {
  std::string name;
  std::string summary;
  std::string params;
};

/// Every check type, alphabetized.
const std::vector<CheckInfo>& available_checks();
std::string list_checks();

}  // namespace opfield::scenario

#endif  // OPFIELD_SCENARIO_HPP
