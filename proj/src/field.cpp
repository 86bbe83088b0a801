#include "opfield/field.hpp"

#include <chrono>
#include <cmath>

namespace opfield {

namespace {

constexpr double kDedupTolerance = 1e-12;

Index find_or_append(std::vector<Vec3>& points, const Vec3& p) {
  for (std::size_t i = 0; i < points.size(); ++i)
    if ((points[i] - p).cwiseAbs().maxCoeff() <= kDedupTolerance) return static_cast<Index>(i);
  points.push_back(p);
  return static_cast<Index>(points.size() - 1);
}

Index find_or_append(std::vector<double>& values, double v) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::abs(values[i] - v) <= kDedupTolerance) return static_cast<Index>(i);
  values.push_back(v);
  return static_cast<Index>(values.size() - 1);
}

}  // namespace

double positive_branch_energy(const Vec3& k_re, const GlobalConstants& constants) {
  const double c2 = constants.c * constants.c;
  const double m = constants.mass;
  return std::sqrt(k_re.squaredNorm() * c2 + m * m * (c2 * c2));
}

double negative_branch_energy(const Vec3& kappa, const GlobalConstants& constants) {
  const Scalar c_im = constants.c_im();
  const Scalar c_im2 = c_im * c_im;
  Scalar k_im2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Scalar k_im{0.0, kappa(i)};
    k_im2 += k_im * k_im;
  }
  const double m = constants.mass;
  const Scalar radicand = k_im2 * c_im2 + m * m * (c_im2 * c_im2);
  return -std::sqrt(radicand).real();
}

ModePoint make_mode(const Vec3& k_re, const Vec3& kappa, const GlobalConstants& constants) {
  return ModePoint{k_re, kappa, positive_branch_energy(k_re, constants), negative_branch_energy(kappa, constants)};
}

double ModeTable::max_energy_defect(const GlobalConstants& constants) const {
  double worst = 0.0;
  for (const auto& m : modes) {
    worst = std::max(worst, std::abs(m.E_re - positive_branch_energy(m.k_re, constants)));
    worst = std::max(worst, std::abs(m.E_im - negative_branch_energy(m.kappa, constants)));
  }
  return worst;
}

ModeTable build_mode_table(std::span<const Vec3> k_re_points, std::span<const Vec3> kappa_points,
                           const GlobalConstants& constants, Pairing pairing) {
  constants.validate();
  if (k_re_points.empty() || kappa_points.empty()) throw DomainError("mode table needs nonempty momentum lists");
  ModeTable table;
  if (pairing == Pairing::Conjugate) {
    if (k_re_points.size() != kappa_points.size())
      throw DomainError("conjugate pairing needs equally long momentum lists");
    for (std::size_t j = 0; j < k_re_points.size(); ++j) {
      if ((k_re_points[j] - kappa_points[j]).cwiseAbs().maxCoeff() > kDedupTolerance)
        throw DomainError("conjugate pairing needs kappa_j = k_re_j (mismatch at index " + std::to_string(j) + ")");
      table.modes.push_back(make_mode(k_re_points[j], kappa_points[j], constants));
    }
  } else {
    for (const auto& k : k_re_points)
      for (const auto& kappa : kappa_points) table.modes.push_back(make_mode(k, kappa, constants));
  }
  table.weights.assign(table.modes.size(), 1.0);
  return table;
}

FieldDescriptor make_field_descriptor(ModeTable table, const GlobalConstants& constants,
                                      const std::vector<Index>& fock_dims, std::vector<std::string> amplitude_labels) {
  constants.validate();
  if (fock_dims.empty()) throw DomainError("field needs at least one amplitude component");
  if (table.modes.empty()) throw DomainError("field needs a nonempty mode table");
  if (table.weights.empty()) table.weights.assign(table.modes.size(), 1.0);
  if (table.weights.size() != table.modes.size()) throw DomainError("mode weights and modes differ in length");
  for (double w : table.weights)
    if (!(w > 0.0)) throw DomainError("mode weights must be positive");
  if (amplitude_labels.empty())
    for (std::size_t c = 0; c < fock_dims.size(); ++c) amplitude_labels.push_back("amp" + std::to_string(c));
  if (amplitude_labels.size() != fock_dims.size()) throw DomainError("one amplitude label per component required");

  FieldDescriptor desc;
  desc.constants = constants;
  for (std::size_t c = 0; c < fock_dims.size(); ++c)
    desc.amplitudes.push_back(make_fock(fock_dims[c], amplitude_labels[c], constants));

  std::vector<double> e_re_values;
  std::vector<double> e_im_values;
  for (const auto& m : table.modes) {
    ModeIndex idx;
    idx.k_re = find_or_append(desc.k_re_points, m.k_re);
    idx.E_re = find_or_append(e_re_values, m.E_re);
    idx.k_im = find_or_append(desc.kappa_points, m.kappa);
    idx.E_im = find_or_append(e_im_values, m.E_im);
    desc.mode_index.push_back(idx);
  }

  std::vector<FactorSpace> factors;
  for (const auto& amp : desc.amplitudes) factors.push_back(amp.space);

  VectorXc k_re_values(static_cast<Index>(desc.k_re_points.size()));
  for (std::size_t i = 0; i < desc.k_re_points.size(); ++i) k_re_values(static_cast<Index>(i)) = desc.k_re_points[i].norm();
  VectorXc k_im_values(static_cast<Index>(desc.kappa_points.size()));
  for (std::size_t i = 0; i < desc.kappa_points.size(); ++i)
    k_im_values(static_cast<Index>(i)) = Scalar(0.0, desc.kappa_points[i].norm());
  const auto to_vec = [](const std::vector<double>& v) {
    VectorXc out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
    return out;
  };

  factors.emplace_back(K_RE_LABEL, FactorKind::Grid, Flavor::Real, k_re_values);
  factors.emplace_back(E_RE_LABEL, FactorKind::Grid, Flavor::Real, to_vec(e_re_values));
  factors.emplace_back(K_IM_LABEL, FactorKind::Grid, Flavor::Imaginary, k_im_values);
  factors.emplace_back(E_IM_LABEL, FactorKind::Grid, Flavor::Real, to_vec(e_im_values));

  desc.space = make_space(std::move(factors));
  desc.table = std::move(table);
  return desc;
}

namespace {

std::vector<LocalOperator> mode_dyads(const FieldDescriptor& desc, std::size_t mode) {
  const ProductSpace& space = *desc.space;
  const ModeIndex& idx = desc.mode_index.at(mode);
  const auto dim = [&](const std::string& label) { return space.factor(space.index_of(label)).dim(); };
  return {
      LocalOperator::dyad(K_RE_LABEL, dim(K_RE_LABEL), idx.k_re),
      LocalOperator::dyad(E_RE_LABEL, dim(E_RE_LABEL), idx.E_re),
      LocalOperator::dyad(K_IM_LABEL, dim(K_IM_LABEL), idx.k_im),
      LocalOperator::dyad(E_IM_LABEL, dim(E_IM_LABEL), idx.E_im),
  };
}

}  // namespace

OperatorExpr build_field_operator(const FieldDescriptor& desc, std::size_t component) {
  if (component >= desc.n_components())
    throw StructuralError("component " + std::to_string(component) + " out of range for a " +
                          std::to_string(desc.n_components()) + "-component field");
  if (desc.mode_index.size() != desc.table.size()) throw StructuralError("mode table is not resolved to basis indices");
  OperatorExpr phi(desc.space);
  for (std::size_t m = 0; m < desc.table.size(); ++m) {
    std::vector<LocalOperator> ops{desc.amplitudes[component].n};
    for (auto& d : mode_dyads(desc, m)) ops.push_back(std::move(d));
    phi.add_term(desc.table.weights[m], ops);
  }
  return phi;
}

OperatorExpr build_hamiltonian(const FieldDescriptor& desc) {
  VectorXc h_re(static_cast<Index>(desc.k_re_points.size()));
  for (std::size_t i = 0; i < desc.k_re_points.size(); ++i)
    h_re(static_cast<Index>(i)) = positive_branch_energy(desc.k_re_points[i], desc.constants);
  VectorXc h_im(static_cast<Index>(desc.kappa_points.size()));
  for (std::size_t i = 0; i < desc.kappa_points.size(); ++i)
    h_im(static_cast<Index>(i)) = negative_branch_energy(desc.kappa_points[i], desc.constants);

  OperatorExpr h = OperatorExpr::local(desc.space, LocalOperator::diagonal(K_RE_LABEL, h_re, kHermitian));
  h += OperatorExpr::local(desc.space, LocalOperator::diagonal(K_IM_LABEL, h_im, kHermitian));
  return h;
}

OperatorExpr build_S_operator(const FieldDescriptor& desc) {
  const ProductSpace& space = *desc.space;
  const FactorSpace& e_re = space.factor(space.index_of(E_RE_LABEL));
  const FactorSpace& e_im = space.factor(space.index_of(E_IM_LABEL));
  OperatorExpr s = OperatorExpr::local(desc.space, LocalOperator::diagonal(E_RE_LABEL, e_re.basis_values(), kHermitian));
  s += OperatorExpr::local(desc.space, LocalOperator::diagonal(E_IM_LABEL, e_im.basis_values(), kHermitian));
  return s;
}

CheckReport check_dispersion(const FieldDescriptor& desc, std::size_t component, const ResidualOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport report;
  report.name = "dispersion";
  report.tolerance = DISPERSION_TOLERANCE;

  const OperatorExpr phi = build_field_operator(desc, component);
  const OperatorExpr h_phi = compose(build_hamiltonian(desc), phi);
  const OperatorExpr s_phi = compose(build_S_operator(desc), phi);
  const ResidualResult r = op_norm_residual(h_phi, s_phi, options);

  report.add_residual("dispersion_residual", r.value);
  report.add_metric("mode_count", static_cast<double>(desc.table.size()));
  report.add_metric("total_dim", static_cast<double>(desc.space->total_dim()));
  report.add_metric("energy_label_defect", desc.table.max_energy_defect(desc.constants));
  report.add_note("residual_path", to_string(r.path));
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  report.finalize();
  return report;
}

FieldState build_field_state(const FieldDescriptor& desc, std::span<const ModeExcitation> excitations) {
  const ProductSpace& space = *desc.space;
  FieldState::SumOfProducts terms;
  for (const auto& ex : excitations) {
    if (ex.mode >= desc.table.size()) throw StructuralError("mode index " + std::to_string(ex.mode) + " out of range");
    if (ex.occupation.size() != desc.n_components())
      throw StructuralError("excitation needs one occupation per component");
    std::vector<Index> multi;
    for (std::size_t c = 0; c < desc.n_components(); ++c) {
      const Index dim = desc.amplitudes[c].space.dim();
      if (ex.occupation[c] < 0 || ex.occupation[c] >= dim)
        throw DomainError("occupation " + std::to_string(ex.occupation[c]) + " overflows Fock truncation " +
                          std::to_string(dim) + " of component " + std::to_string(c));
      multi.push_back(ex.occupation[c]);
    }
    const ModeIndex& idx = desc.mode_index[ex.mode];
    multi.insert(multi.end(), {idx.k_re, idx.E_re, idx.k_im, idx.E_im});
    std::vector<VectorXc> factors;
    for (std::size_t f = 0; f < multi.size(); ++f) {
      VectorXc e = VectorXc::Zero(space.factor(f).dim());
      e(multi[f]) = 1.0;
      factors.push_back(std::move(e));
    }
    terms.push_back(ProductTerm{ex.coeff, std::move(factors)});
  }
  return FieldState::sum_of_products(desc.space, std::move(terms));
}

FieldState uniform_field_state(const FieldDescriptor& desc, const std::vector<Index>& occupation) {
  std::vector<ModeExcitation> ex;
  for (std::size_t m = 0; m < desc.table.size(); ++m) ex.push_back(ModeExcitation{m, occupation, 1.0});
  return build_field_state(desc, ex);
}

}  // namespace opfield
