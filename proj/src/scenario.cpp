#include "opfield/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "opfield/checks.hpp"
#include "opfield/random.hpp"

namespace opfield::scenario {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string join(const std::string& path, std::size_t i) { return join(path, std::to_string(i)); }

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "missing required key");
  return *it;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_number(*it, join(path, key));
}

Index as_index(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<Index>(i);
}

Index index_or(const json& obj, const std::string& key, Index fallback, const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_index(*it, join(path, key));
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

std::string string_or(const json& obj, const std::string& key, const std::string& fallback, const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_string(*it, join(path, key));
}

bool bool_or(const json& obj, const std::string& key, bool fallback, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError(join(path, key), "expected a boolean");
  return it->get<bool>();
}

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  return v;
}

Vec3 as_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected a 3-vector");
  return Vec3(as_number(v[0], join(path, 0)), as_number(v[1], join(path, 1)), as_number(v[2], join(path, 2)));
}

std::vector<Vec3> as_vec3_list(const json& v, const std::string& path) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < as_array(v, path).size(); ++i) out.push_back(as_vec3(v[i], join(path, i)));
  if (out.empty()) throw ConfigError(path, "expected at least one momentum");
  return out;
}

Scalar as_complex(const json& v, const std::string& path) {
  if (v.is_number()) return Scalar(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2) return Scalar(as_number(v[0], join(path, 0)), as_number(v[1], join(path, 1)));
  throw ConfigError(path, "expected a number or [re, im]");
}

Flavor parse_flavor(const std::string& s, const std::string& path) {
  if (s == "real") return Flavor::Real;
  if (s == "imaginary") return Flavor::Imaginary;
  throw ConfigError(path, "flavor must be 'real' or 'imaginary'");
}

GridSpec parse_grid(const json& obj, const std::string& path, const GridSpec& defaults = {}) {
  GridSpec g;
  g.n_points = index_or(obj, "n_points", defaults.n_points, path);
  g.extent = number_or(obj, "extent", defaults.extent, path);
  g.periodic = bool_or(obj, "periodic", defaults.periodic, path);
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  return g;
}

GlobalConstants parse_constants(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(v, {"hbar", "c", "mass"}, path);
  GlobalConstants k;
  k.hbar = number_or(v, "hbar", k.hbar, path);
  k.c = number_or(v, "c", k.c, path);
  k.mass = number_or(v, "mass", k.mass, path);
  if (!(k.hbar > 0.0)) throw ConfigError(join(path, "hbar"), "must be positive");
  if (!(k.c > 0.0)) throw ConfigError(join(path, "c"), "must be positive");
  if (!(k.mass >= 0.0)) throw ConfigError(join(path, "mass"), "must be nonnegative");
  return k;
}

SpaceDecl parse_space(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(v, {"label", "kind", "dim", "n_points", "extent", "periodic", "flavor"}, path);
  SpaceDecl s;
  s.label = as_string(require(v, "label", path), join(path, "label"));
  if (s.label.empty()) throw ConfigError(join(path, "label"), "must not be empty");
  const std::string kind = as_string(require(v, "kind", path), join(path, "kind"));
  s.flavor = parse_flavor(string_or(v, "flavor", "real", path), join(path, "flavor"));
  if (kind == "fock") {
    s.kind = FactorKind::Fock;
    s.dim = as_index(require(v, "dim", path), join(path, "dim"));
    if (s.dim < 2) throw ConfigError(join(path, "dim"), "Fock dimension must be at least 2");
  } else if (kind == "grid") {
    s.kind = FactorKind::Grid;
    s.grid = parse_grid(v, path);
  } else {
    throw ConfigError(join(path, "kind"), "kind must be 'fock' or 'grid'");
  }
  return s;
}

FieldDecl parse_field(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(v, {"components", "fock_dims", "k_re", "kappa", "pairing", "weights", "perturb"}, path);
  FieldDecl f;
  f.components = static_cast<std::size_t>(index_or(v, "components", 1, path));
  if (f.components == 0) throw ConfigError(join(path, "components"), "must be at least 1");
  const json& dims = require(v, "fock_dims", path);
  if (dims.is_number()) {
    f.fock_dims.assign(f.components, as_index(dims, join(path, "fock_dims")));
  } else {
    for (std::size_t i = 0; i < as_array(dims, join(path, "fock_dims")).size(); ++i)
      f.fock_dims.push_back(as_index(dims[i], join(join(path, "fock_dims"), i)));
    if (f.fock_dims.size() != f.components)
      throw ConfigError(join(path, "fock_dims"), "expected one dimension per component");
  }
  for (Index d : f.fock_dims)
    if (d < 2) throw ConfigError(join(path, "fock_dims"), "Fock dimension must be at least 2");

  const std::string pairing = string_or(v, "pairing", "conjugate", path);
  if (pairing == "conjugate") f.pairing = Pairing::Conjugate;
  else if (pairing == "independent") f.pairing = Pairing::Independent;
  else throw ConfigError(join(path, "pairing"), "pairing must be 'conjugate' or 'independent'");

  f.k_re = as_vec3_list(require(v, "k_re", path), join(path, "k_re"));
  if (v.contains("kappa")) f.kappa = as_vec3_list(v["kappa"], join(path, "kappa"));
  else if (f.pairing == Pairing::Conjugate) f.kappa = f.k_re;
  else throw ConfigError(join(path, "kappa"), "missing required key");

  if (v.contains("weights")) {
    const std::string wp = join(path, "weights");
    for (std::size_t i = 0; i < as_array(v["weights"], wp).size(); ++i)
      f.weights.push_back(as_number(v["weights"][i], join(wp, i)));
  }
  if (v.contains("perturb")) {
    const std::string pp = join(path, "perturb");
    for (std::size_t i = 0; i < as_array(v["perturb"], pp).size(); ++i) {
      const json& p = v["perturb"][i];
      const std::string ip = join(pp, i);
      if (!p.is_object()) throw ConfigError(ip, "expected an object");
      reject_unknown(p, {"mode", "E_re", "E_im"}, ip);
      EnergyShift s;
      s.mode = static_cast<std::size_t>(as_index(require(p, "mode", ip), join(ip, "mode")));
      s.E_re = number_or(p, "E_re", 0.0, ip);
      s.E_im = number_or(p, "E_im", 0.0, ip);
      f.perturb.push_back(s);
    }
  }
  return f;
}

const std::set<std::string>& check_names() {
  static const std::set<std::string> names = [] {
    std::set<std::string> s;
    for (const auto& c : available_checks()) s.insert(c.name);
    return s;
  }();
  return names;
}

CheckDecl parse_check(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(v, {"type", "tolerance", "params"}, path);
  CheckDecl c;
  c.type = as_string(require(v, "type", path), join(path, "type"));
  if (!check_names().count(c.type)) throw ConfigError(join(path, "type"), "unknown check type '" + c.type + "'");
  if (v.contains("tolerance")) {
    const double t = as_number(v["tolerance"], join(path, "tolerance"));
    if (!(t >= 0.0)) throw ConfigError(join(path, "tolerance"), "must be nonnegative");
    c.tolerance = t;
  }
  if (v.contains("params")) {
    if (!v["params"].is_object()) throw ConfigError(join(path, "params"), "expected an object");
    c.params = v["params"];
  }
  return c;
}

// Running ----------------------------------------------------------------

struct Context {
  const Scenario& sc;
  std::optional<FieldDescriptor> field;

  const SpaceDecl& space(const json& params, const std::string& path) const {
    const std::string label = as_string(require(params, "space", path), join(path, "space"));
    for (const auto& s : sc.spaces)
      if (s.label == label) return s;
    throw ConfigError(join(path, "space"), "no space labelled '" + label + "'");
  }

  const FieldDescriptor& require_field(const std::string& path) {
    if (!sc.field) throw ConfigError("field", "check at '" + path + "' needs a field declaration");
    if (!field) field = build_descriptor(*sc.field);
    return *field;
  }

  FieldDescriptor build_descriptor(const FieldDecl& f) const {
    ModeTable table;
    try {
      table = build_mode_table(f.k_re, f.kappa, sc.constants, f.pairing);
    } catch (const std::exception& e) {
      throw ConfigError("field", e.what());
    }
    if (!f.weights.empty()) {
      if (f.weights.size() != table.size())
        throw ConfigError("field.weights", "expected one weight per mode (" + std::to_string(table.size()) + ")");
      table.weights = f.weights;
    }
    for (std::size_t i = 0; i < f.perturb.size(); ++i) {
      const auto& s = f.perturb[i];
      if (s.mode >= table.size()) throw ConfigError(join(join("field.perturb", i), "mode"), "mode out of range");
      table.modes[s.mode].E_re += s.E_re;
      table.modes[s.mode].E_im += s.E_im;
    }
    try {
      if (f.components == 4)
        return make_em_field_descriptor(std::move(table), sc.constants,
                                        {f.fock_dims[0], f.fock_dims[1], f.fock_dims[2], f.fock_dims[3]});
      return make_field_descriptor(std::move(table), sc.constants, f.fock_dims);
    } catch (const std::exception& e) {
      throw ConfigError("field", e.what());
    }
  }
};

std::vector<ModeExcitation> parse_excitations(const json& v, const FieldDescriptor& desc, const std::string& path) {
  std::vector<ModeExcitation> out;
  for (std::size_t i = 0; i < as_array(v, path).size(); ++i) {
    const json& e = v[i];
    const std::string ep = join(path, i);
    if (!e.is_object()) throw ConfigError(ep, "expected an object");
    reject_unknown(e, {"mode", "occupation", "coeff"}, ep);
    ModeExcitation x;
    x.mode = static_cast<std::size_t>(index_or(e, "mode", 0, ep));
    if (e.contains("occupation")) {
      const json& occ = as_array(e["occupation"], join(ep, "occupation"));
      for (std::size_t c = 0; c < occ.size(); ++c) x.occupation.push_back(as_index(occ[c], join(join(ep, "occupation"), c)));
    } else {
      x.occupation.assign(desc.n_components(), 0);
    }
    if (e.contains("coeff")) x.coeff = as_complex(e["coeff"], join(ep, "coeff"));
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<ModeExcitation> vacuum_excitations(const FieldDescriptor& desc) {
  std::vector<ModeExcitation> out;
  for (std::size_t m = 0; m < desc.table.size(); ++m)
    out.push_back(ModeExcitation{m, std::vector<Index>(desc.n_components(), 0), Scalar(1.0)});
  return out;
}

std::vector<ModeExcitation> random_excitations(const FieldDescriptor& desc, Rng& rng) {
  const Index n_terms = 1 + rng.index(static_cast<Index>(desc.table.size()));
  std::vector<ModeExcitation> ex;
  for (Index j = 0; j < n_terms; ++j) {
    ModeExcitation e;
    e.mode = static_cast<std::size_t>(rng.index(static_cast<Index>(desc.table.size())));
    for (const auto& amp : desc.amplitudes) e.occupation.push_back(rng.index(amp.space.dim()));
    e.coeff = rng.complex_normal();
    ex.push_back(std::move(e));
  }
  return ex;
}

SpectrumClaim parse_claim(const std::string& s, const std::string& path) {
  if (s == "nonpositive") return SpectrumClaim::Nonpositive;
  if (s == "nonnegative") return SpectrumClaim::Nonnegative;
  if (s == "purely_imaginary") return SpectrumClaim::PurelyImaginary;
  if (s == "real") return SpectrumClaim::Real;
  throw ConfigError(path, "claim must be one of nonpositive, nonnegative, purely_imaginary, real");
}

LocalOperator fock_operator(const FockOperators& f, const std::string& name, const std::string& path) {
  if (name == "a") return f.a;
  if (name == "a_dag") return f.a_dag;
  if (name == "n") return f.n;
  if (name == "q") return f.q;
  if (name == "p") return f.p;
  throw ConfigError(path, "Fock operator must be one of a, a_dag, n, q, p");
}

LocalOperator grid_operator(const SpaceDecl& s, const GlobalConstants& k, const std::string& name,
                            const std::string& path) {
  const PositionGrid g = make_position_grid(s.grid, s.flavor, s.label);
  if (name == "r") return g.r;
  if (name == "k") return make_momentum_operator(g.space, k);
  if (name == "kinetic") {
    if (!(k.mass > 0.0)) throw ConfigError("constants.mass", "kinetic operator needs a positive mass");
    return s.flavor == Flavor::Imaginary ? imaginary_kinetic_hamiltonian(s.grid, k) : real_kinetic_hamiltonian(s.grid, k);
  }
  throw ConfigError(path, "grid operator must be one of r, k, kinetic");
}

CheckReport run_one(Context& ctx, const CheckDecl& decl, std::size_t index) {
  const Scenario& sc = ctx.sc;
  const std::string path = join("checks", index);
  const std::string pp = join(path, "params");
  const json& p = decl.params;
  const std::uint64_t seed = sc.seed + index;

  if (decl.type == "ccr") {
    const SpaceDecl& s = ctx.space(p, pp);
    if (s.kind == FactorKind::Fock) return check_truncated_ccr(s.dim, sc.constants);
    return check_weak_ccr(s.grid, sc.constants, number_or(p, "points_per_sigma", 6.0, pp));
  }
  if (decl.type == "anti_selfadjoint") {
    const SpaceDecl& s = ctx.space(p, pp);
    if (s.kind != FactorKind::Grid) throw ConfigError(join(pp, "space"), "anti_selfadjoint needs a grid space");
    return check_anti_selfadjoint(s.grid, sc.constants);
  }
  if (decl.type == "spectrum") {
    const SpaceDecl& s = ctx.space(p, pp);
    const std::string op_name = as_string(require(p, "operator", pp), join(pp, "operator"));
    const SpectrumClaim claim = parse_claim(as_string(require(p, "claim", pp), join(pp, "claim")), join(pp, "claim"));
    const LocalOperator op = s.kind == FactorKind::Fock
                                 ? fock_operator(make_fock(s.dim, s.label, sc.constants), op_name, join(pp, "operator"))
                                 : grid_operator(s, sc.constants, op_name, join(pp, "operator"));
    CheckReport r = check_spectrum(op, claim);
    r.add_note("operator", op_name);
    return r;
  }
  if (decl.type == "dispersion") {
    const FieldDescriptor& desc = ctx.require_field(path);
    ResidualOptions opts;
    opts.probes = static_cast<int>(index_or(p, "probes", 0, pp));
    opts.seed = seed;
    return check_dispersion(desc, static_cast<std::size_t>(index_or(p, "component", 0, pp)), opts);
  }
  if (decl.type == "gauge") {
    const FieldDescriptor& desc = ctx.require_field(path);
    const Flavor flavor = parse_flavor(string_or(p, "flavor", "real", pp), join(pp, "flavor"));
    const GaugeConstraint gc = build_gauge_constraint(desc, MINKOWSKI_SIGNATURE, flavor);
    const std::vector<ModeExcitation> ex =
        p.contains("state") ? parse_excitations(p["state"], desc, join(pp, "state")) : vacuum_excitations(desc);
    return check_physical_state(gc, build_field_state(desc, ex));
  }
  if (decl.type == "null_space") {
    const FieldDescriptor& desc = ctx.require_field(path);
    const Flavor flavor = parse_flavor(string_or(p, "flavor", "real", pp), join(pp, "flavor"));
    const GaugeConstraint gc = build_gauge_constraint(desc, MINKOWSKI_SIGNATURE, flavor);
    const std::size_t mode = static_cast<std::size_t>(index_or(p, "mode", 0, pp));
    if (mode >= desc.table.size()) throw ConfigError(join(pp, "mode"), "mode out of range");
    return null_space_report(gc, mode);
  }
  if (decl.type == "zero_energy") {
    const FieldDescriptor& desc = ctx.require_field(path);
    return check_zero_energy(desc, static_cast<int>(index_or(p, "states", 50, pp)), seed);
  }
  if (decl.type == "correspondence") {
    const FieldDescriptor& desc = ctx.require_field(path);
    const GridSpec r_spec = parse_grid(p.value("r_grid", json::object()), join(pp, "r_grid"), GridSpec{16, 1.0, true});
    const GridSpec t_spec = parse_grid(p.value("t_grid", json::object()), join(pp, "t_grid"), GridSpec{16, 1.0, true});
    const Vec3 axis = p.contains("axis") ? as_vec3(p["axis"], join(pp, "axis")) : Vec3::UnitX();
    const SpacetimeGrid grid = SpacetimeGrid::uniform(r_spec, t_spec, axis);
    const std::vector<ModeExcitation> ex = [&] {
      if (p.contains("state")) return parse_excitations(p["state"], desc, join(pp, "state"));
      Rng rng(seed);
      return random_excitations(desc, rng);
    }();
    const FieldState state = build_field_state(desc, ex);
    const std::vector<ClassicalModeAmplitude> amps = amplitudes_from_state(desc, state);
    return correspondence_check(desc, state, amps, grid);
  }
  if (decl.type == "qm_constraint") {
    const SpaceDecl& s = ctx.space(p, pp);
    if (s.kind != FactorKind::Grid || s.flavor != Flavor::Real)
      throw ConfigError(join(pp, "space"), "qm_constraint needs a real-flavor grid space");
    if (!(sc.constants.mass > 0.0)) throw ConfigError("constants.mass", "qm_constraint needs a positive mass");
    const LocalOperator H = real_kinetic_hamiltonian(s.grid, sc.constants);
    const PositionGrid pos = make_position_grid(s.grid, Flavor::Real, "x");
    double E = 0.0;
    if (p.contains("E")) {
      E = as_number(p["E"], join(pp, "E"));
    } else {
      const Index level = index_or(p, "level", 1, pp);
      Eigen::SelfAdjointEigenSolver<MatrixXc> es(MatrixXc(H.matrix()), Eigen::EigenvaluesOnly);
      if (level >= es.eigenvalues().size()) throw ConfigError(join(pp, "level"), "level out of range");
      E = es.eigenvalues()(level);
    }
    E *= 1.0 + number_or(p, "mismatch", 0.0, pp);
    QmConstraintOptions opts;
    opts.time_points = index_or(p, "time_points", opts.time_points, pp);
    return qm_constraint_residual(pos.space, H, E, sc.constants, opts);
  }
  if (decl.type == "localization") {
    const GridSpec t_spec = parse_grid(p, pp);
    return check_localization(t_spec, index_or(p, "t0_index", 0, pp));
  }
  if (decl.type == "symmetrization") {
    const SpaceDecl& s = ctx.space(p, pp);
    if (s.kind != FactorKind::Fock) throw ConfigError(join(pp, "space"), "symmetrization needs a Fock space");
    const FockOperators f = make_fock(s.dim, s.label, sc.constants);
    SpacePtr space = make_space({f.space});
    const std::string op_path = join(pp, "operators");
    const json& names = as_array(require(p, "operators", pp), op_path);
    if (names.empty() || names.size() > DEFAULT_SYMMETRIZATION_CAP)
      throw ConfigError(op_path, "expected between 1 and " + std::to_string(DEFAULT_SYMMETRIZATION_CAP) + " operators");
    std::vector<OperatorExpr> ops;
    for (std::size_t i = 0; i < names.size(); ++i)
      ops.push_back(OperatorExpr::local(space, fock_operator(f, as_string(names[i], join(op_path, i)), join(op_path, i))));
    return check_symmetrization(ops);
  }
  throw ConfigError(join(path, "type"), "unknown check type '" + decl.type + "'");
}

void apply_tolerance_override(CheckReport& r, double tolerance) {
  r.tolerance = tolerance;
  for (auto& res : r.residuals) res.tolerance.reset();
  r.finalize();
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open scenario file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed scenario file: ") + e.what());
  }
}

void apply_overrides(json& doc, std::span<const std::string> overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(ov, "override must have the form key=value");
    const std::string key = ov.substr(0, eq);
    json* node = &doc;
    std::stringstream ss(key);
    std::string seg;
    std::vector<std::string> segs;
    while (std::getline(ss, seg, '.')) {
      if (seg.empty()) throw ConfigError(key, "empty path segment");
      segs.push_back(seg);
    }
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const bool last = i + 1 == segs.size();
      if (node->is_array()) {
        if (!std::all_of(segs[i].begin(), segs[i].end(), ::isdigit))
          throw ConfigError(key, "segment '" + segs[i] + "' must index an array");
        const std::size_t idx = std::stoul(segs[i]);
        if (idx >= node->size()) throw ConfigError(key, "array index out of range");
        node = &(*node)[idx];
      } else if (node->is_object() || node->is_null()) {
        node = &(*node)[segs[i]];
      } else {
        throw ConfigError(key, "cannot descend into a scalar");
      }
      if (last) *node = parse_value(ov.substr(eq + 1));
    }
  }
}

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "scenario must be an object");
  reject_unknown(doc, {"schema_version", "name", "seed", "constants", "spaces", "field", "checks"}, "");
  const json& version = require(doc, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != SCHEMA_VERSION)
    throw ConfigError("schema_version", "unsupported schema version (expected " + std::to_string(SCHEMA_VERSION) + ")");

  Scenario sc;
  sc.name = as_string(require(doc, "name", ""), "name");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    sc.seed = doc["seed"].get<std::uint64_t>();
  }
  sc.constants = parse_constants(require(doc, "constants", ""), "constants");

  if (doc.contains("spaces")) {
    std::set<std::string> labels;
    for (std::size_t i = 0; i < as_array(doc["spaces"], "spaces").size(); ++i) {
      SpaceDecl s = parse_space(doc["spaces"][i], join("spaces", i));
      if (!labels.insert(s.label).second) throw ConfigError(join(join("spaces", i), "label"), "duplicate label");
      sc.spaces.push_back(std::move(s));
    }
  }
  if (doc.contains("field")) sc.field = parse_field(doc["field"], "field");

  const json& checks = as_array(require(doc, "checks", ""), "checks");
  for (std::size_t i = 0; i < checks.size(); ++i) sc.checks.push_back(parse_check(checks[i], join("checks", i)));
  return sc;
}

std::vector<CheckReport> run_scenario(const Scenario& sc) {
  Context ctx{sc, std::nullopt};
  std::vector<CheckReport> reports;
  for (std::size_t i = 0; i < sc.checks.size(); ++i) {
    const CheckDecl& decl = sc.checks[i];
    CheckReport r;
    try {
      r = run_one(ctx, decl, i);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(join("checks", i), e.what());
    }
    if (decl.tolerance) apply_tolerance_override(r, *decl.tolerance);
    reports.push_back(std::move(r));
  }
  return reports;
}

int exit_code(std::span<const CheckReport> reports) {
  for (const auto& r : reports)
    if (r.status == CheckStatus::Fail) return 1;
  return 0;
}

ojson report_json(const Scenario& sc, std::span<const CheckReport> reports, bool timing) {
  ojson doc;
  doc["schema_version"] = SCHEMA_VERSION;
  doc["scenario_name"] = sc.name;
  doc["seed"] = sc.seed;
  doc["constants"] = {{"hbar", sc.constants.hbar}, {"c", sc.constants.c}, {"mass", sc.constants.mass}};
  ojson checks = ojson::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CheckReport& r = reports[i];
    ojson c;
    c["name"] = r.name;
    c["type"] = sc.checks[i].type;
    c["params"] = ojson::parse(sc.checks[i].params.dump());
    c["status"] = to_string(r.status);
    ojson res = ojson::object();
    ojson own = ojson::object();
    for (const auto& x : r.residuals) {
      res[x.name] = number_or_null(x.value);
      if (x.tolerance) own[x.name] = *x.tolerance;
    }
    c["residuals"] = res;
    c["tolerance"] = r.tolerance;
    if (!own.empty()) c["residual_tolerances"] = own;
    c["wall_ms"] = timing ? ojson(r.wall_ms) : ojson(nullptr);
    ojson metrics = ojson::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = number_or_null(v);
    c["metrics"] = metrics;
    if (!r.series.empty()) {
      ojson series = ojson::object();
      for (const auto& [k, v] : r.series) {
        ojson arr = ojson::array();
        for (double x : v) arr.push_back(number_or_null(x));
        series[k] = arr;
      }
      c["series"] = series;
    }
    ojson notes = ojson::object();
    for (const auto& [k, v] : r.notes) notes[k] = v;
    c["notes"] = notes;
    checks.push_back(c);
  }
  doc["checks"] = checks;
  doc["exit_code"] = exit_code(reports);
  return doc;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string report_csv(const Scenario& sc, std::span<const CheckReport> reports, bool timing) {
  std::ostringstream os;
  os << "scenario_name,index,name,status,tolerance,max_residual,wall_ms,residuals\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CheckReport& r = reports[i];
    std::string res;
    for (const auto& x : r.residuals) {
      if (!res.empty()) res += ';';
      res += x.name + "=" + format_double(x.value);
    }
    os << csv_field(sc.name) << ',' << i << ',' << csv_field(r.name) << ',' << to_string(r.status) << ','
       << format_double(r.tolerance) << ',' << format_double(r.max_residual()) << ','
       << (timing ? format_double(r.wall_ms) : std::string()) << ',' << csv_field(res) << '\n';
  }
  return os.str();
}

const std::vector<CheckInfo>& available_checks() {
  static const std::vector<CheckInfo> checks = [] {
    std::vector<CheckInfo> v{
        {"anti_selfadjoint", "imaginary-flavor r and k are anti-Hermitian with imaginary spectra", "space"},
        {"ccr", "truncated ladder algebra on a Fock space, or weak [t, s] on a grid", "space, points_per_sigma"},
        {"correspondence", "quantum field of a paired state matches the classical real field",
         "r_grid, t_grid, axis, state"},
        {"dispersion", "(S - H) applied to the field operator vanishes", "component, probes"},
        {"gauge", "constraint operator annihilates the given state (default: vacua)", "flavor, state"},
        {"localization", "time localization is an idempotent projection", "n_points, extent, periodic, t0_index"},
        {"null_space", "null space of the gauge constraint on one mode's amplitude sector", "mode, flavor"},
        {"qm_constraint", "separable eigenstate satisfies (s - H) psi = 0", "space, E | level, mismatch, time_points"},
        {"spectrum", "sign or reality of a local operator's spectrum", "space, operator, claim"},
        {"symmetrization", "symmetrized product is order independent and Hermitian", "space, operators"},
        {"zero_energy", "<S> vanishes on paired-mode states", "states"},
    };
    std::sort(v.begin(), v.end(), [](const CheckInfo& a, const CheckInfo& b) { return a.name < b.name; });
    return v;
  }();
  return checks;
}

std::string list_checks() {
  std::ostringstream os;
  for (const auto& c : available_checks()) os << c.name << "\t" << c.summary << "\tparams: " << c.params << "\n";
  return os.str();
}

}  // namespace opfield::scenario
