#include "opfield/correspondence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace opfield {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

CheckReport qm_constraint_residual(const FactorSpace& position, const LocalOperator& hamiltonian, double E,
                                   const GlobalConstants& constants, const QmConstraintOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  constants.validate();
  if (hamiltonian.label() != position.label() || hamiltonian.dim() != position.dim())
    throw StructuralError("Hamiltonian does not act on position factor '" + position.label() + "'");
  const std::string time_label = position.label() == "t" ? "t_qm" : "t";

  CheckReport report;
  report.name = "qm_constraint";
  report.tolerance = options.tolerance;

  const MatrixXc h = hamiltonian.dense();
  VectorXc eigenvalues;
  MatrixXc eigenvectors;
  if (hermitian_defect(h) <= 1e-12) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> solver(h);
    eigenvalues = solver.eigenvalues().cast<Scalar>();
    eigenvectors = solver.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<MatrixXc> solver(h);
    eigenvalues = solver.eigenvalues();
    eigenvectors = solver.eigenvectors();
  }
  const double band_min = eigenvalues.real().minCoeff();
  const double band_max = eigenvalues.real().maxCoeff();
  report.add_metric("band_min", band_min);
  report.add_metric("band_max", band_max);
  report.add_metric("E", E);

  const double slack = 1e-12 * std::max({1.0, std::abs(band_min), std::abs(band_max)});
  if (E < band_min - slack || E > band_max + slack) {
    report.add_residual("band_excess", E < band_min ? band_min - E : E - band_max);
    report.add_note("error", "E outside the Hamiltonian's spectral band");
    report.wall_ms = elapsed_ms(start);
    report.finalize();
    return report;
  }

  Index nearest = 0;
  for (Index i = 1; i < eigenvalues.size(); ++i)
    if (std::abs(eigenvalues(i) - E) < std::abs(eigenvalues(nearest) - E)) nearest = i;
  const VectorXc phi = eigenvectors.col(nearest);
  report.add_metric("eigenvalue", eigenvalues(nearest).real());
  report.add_metric("mismatch", std::abs(eigenvalues(nearest) - E));

  // One period of exp(E t / (i hbar)) so that E sits on the spectral lattice.
  const double extent = E == 0.0 ? 1.0 : std::numbers::pi * constants.hbar / std::abs(E);
  const GridSpec time_spec{options.time_points, extent, true};
  const TimeEnergy te = make_time_energy(time_spec, {time_label, time_label + "_E"}, constants);
  VectorXc time_vec(te.time.dim());
  for (Index i = 0; i < te.time.dim(); ++i)
    time_vec(i) = std::exp(E * te.time.basis_values()(i).real() / (I_UNIT * constants.hbar));

  SpacePtr space = make_space({te.time, position});
  const OperatorExpr constraint = OperatorExpr::local(space, te.s) - OperatorExpr::local(space, hamiltonian);
  const FieldState psi = FieldState::product(space, {time_vec, phi});
  report.add_residual("qm_residual", image_norm(constraint, psi) / norm(psi));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

SpacetimeGrid SpacetimeGrid::uniform(const GridSpec& r_spec, const GridSpec& t_spec, const Vec3& axis) {
  SpacetimeGrid g;
  const Eigen::VectorXd r = r_spec.points();
  for (Index i = 0; i < r.size(); ++i) g.r_points.push_back(r(i) * axis);
  const Eigen::VectorXd t = t_spec.points();
  g.t_points.assign(t.data(), t.data() + t.size());
  return g;
}

void SpacetimeGrid::validate() const {
  if (r_points.empty() || t_points.empty()) throw DomainError("spacetime grid needs positions and times");
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 2; i < r_points.size(); ++i) {
      const double d0 = r_points[1](axis) - r_points[0](axis);
      const double di = r_points[i](axis) - r_points[i - 1](axis);
      if (std::abs(di - d0) > 1e-9 * std::max(1.0, std::abs(d0)))
        throw DomainError("spacetime grid positions are not uniformly spaced");
    }
  }
  for (std::size_t i = 2; i < t_points.size(); ++i) {
    const double d0 = t_points[1] - t_points[0];
    if (std::abs((t_points[i] - t_points[i - 1]) - d0) > 1e-9 * std::max(1.0, std::abs(d0)))
      throw DomainError("spacetime grid times are not uniformly spaced");
  }
}

MatrixXc classical_field_eval(std::span<const ClassicalModeAmplitude> amps, const SpacetimeGrid& grid,
                              const GlobalConstants& constants) {
  grid.validate();
  const Scalar ih = I_UNIT * constants.hbar;
  MatrixXc out = MatrixXc::Zero(static_cast<Index>(grid.r_points.size()), static_cast<Index>(grid.t_points.size()));
  for (const auto& amp : amps) {
    const Vec3& k = amp.mode.k_re;
    const double E = amp.mode.E_re;
    for (std::size_t i = 0; i < grid.r_points.size(); ++i) {
      const double kr = k.dot(grid.r_points[i]);
      for (std::size_t j = 0; j < grid.t_points.size(); ++j) {
        const double t = grid.t_points[j];
        out(static_cast<Index>(i), static_cast<Index>(j)) +=
            amp.A * std::exp(-kr / ih) * std::exp(+E * t / ih) +
            std::conj(amp.A) * std::exp(+kr / ih) * std::exp(-E * t / ih);
      }
    }
  }
  return out;
}

namespace {

struct DecodedTerm {
  Scalar A;
  std::size_t k_re;
  std::size_t kappa;
  double E_re;
  double E_im;
};

/// Index and entry of a vector that is a multiple of one basis vector.
std::pair<Index, Scalar> single_basis_entry(const VectorXc& v, const std::string& label) {
  Index found = -1;
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) == Scalar(0.0)) continue;
    if (found >= 0) throw StructuralError("factor '" + label + "' vector is not a single basis vector");
    found = i;
  }
  if (found < 0) return {0, Scalar(0.0)};
  return {found, v(found)};
}

std::vector<DecodedTerm> decode_terms(const FieldDescriptor& desc, const FieldState& state) {
  require_same_space(desc.space, state.space(), "correspondence");
  const ProductSpace& space = *desc.space;
  const std::size_t f_kre = space.index_of(K_RE_LABEL);
  const std::size_t f_ere = space.index_of(E_RE_LABEL);
  const std::size_t f_kim = space.index_of(K_IM_LABEL);
  const std::size_t f_eim = space.index_of(E_IM_LABEL);

  std::vector<DecodedTerm> out;
  for (const auto& term : state.terms()) {
    Scalar A = term.coeff;
    for (std::size_t c = 0; c < desc.n_components(); ++c) A *= single_basis_entry(term.factors[c], space.factor(c).label()).second;
    const auto [kre, v1] = single_basis_entry(term.factors[f_kre], K_RE_LABEL);
    const auto [ere, v2] = single_basis_entry(term.factors[f_ere], E_RE_LABEL);
    const auto [kim, v3] = single_basis_entry(term.factors[f_kim], K_IM_LABEL);
    const auto [eim, v4] = single_basis_entry(term.factors[f_eim], E_IM_LABEL);
    A *= v1 * v2 * v3 * v4;
    DecodedTerm d{A, static_cast<std::size_t>(kre), static_cast<std::size_t>(kim),
                  space.factor(f_ere).basis_values()(ere).real(), space.factor(f_eim).basis_values()(eim).real()};
    const Vec3& k = desc.k_re_points[d.k_re];
    const Vec3& kappa = desc.kappa_points[d.kappa];
    if (A != Scalar(0.0) &&
        ((k - kappa).cwiseAbs().maxCoeff() > 1e-12 || std::abs(d.E_re + d.E_im) > 1e-12 * std::max(1.0, d.E_re)))
      throw StructuralError("state term is not supported on a conjugate-paired mode");
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<ClassicalModeAmplitude> amplitudes_from_state(const FieldDescriptor& desc, const FieldState& state) {
  std::vector<ClassicalModeAmplitude> amps;
  for (const auto& d : decode_terms(desc, state)) {
    const Vec3& k = desc.k_re_points[d.k_re];
    amps.push_back(ClassicalModeAmplitude{make_mode(k, k, desc.constants), d.A});
  }
  return amps;
}

MatrixXc quantum_field_eval(const FieldDescriptor& desc, const FieldState& state, const SpacetimeGrid& grid) {
  grid.validate();
  const std::vector<DecodedTerm> terms = decode_terms(desc, state);
  const Scalar ih = I_UNIT * desc.constants.hbar;
  MatrixXc out = MatrixXc::Zero(static_cast<Index>(grid.r_points.size()), static_cast<Index>(grid.t_points.size()));
  for (const auto& d : terms) {
    const Vec3& k = desc.k_re_points[d.k_re];
    const Vec3& kappa = desc.kappa_points[d.kappa];
    for (std::size_t i = 0; i < grid.r_points.size(); ++i) {
      const Vec3& r = grid.r_points[i];
      // <r|k_re> and <i r|i kappa>, the latter with imaginary momentum and coordinate.
      const Scalar mode_re = std::exp(-k.dot(r) / ih);
      Scalar k_im_dot_r_im = 0.0;
      for (int a = 0; a < 3; ++a) k_im_dot_r_im += Scalar(0.0, kappa(a)) * Scalar(0.0, r(a));
      const Scalar mode_im = std::exp(-k_im_dot_r_im / ih);
      for (std::size_t j = 0; j < grid.t_points.size(); ++j) {
        const double t = grid.t_points[j];
        out(static_cast<Index>(i), static_cast<Index>(j)) +=
            d.A * mode_re * std::exp(d.E_re * t / ih) + std::conj(d.A) * mode_im * std::exp(d.E_im * t / ih);
      }
    }
  }
  return out;
}

CheckReport correspondence_check(const FieldDescriptor& desc, const FieldState& state,
                                 std::span<const ClassicalModeAmplitude> amps, const SpacetimeGrid& grid) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport report;
  report.name = "correspondence";
  report.tolerance = CORRESPONDENCE_TOLERANCE;
  const MatrixXc quantum = quantum_field_eval(desc, state, grid);
  const MatrixXc classical = classical_field_eval(amps, grid, desc.constants);
  report.add_residual("max_deviation", max_abs_entry(quantum - classical));
  report.add_residual("classical_imag_residue", max_abs_entry(classical.imag()));
  report.add_metric("term_count", static_cast<double>(state.term_count()));
  report.add_metric("grid_points", static_cast<double>(classical.size()));
  report.add_metric("classical_max_abs", max_abs_entry(classical));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

FieldState to_time_representation(const FieldState& state, const std::string& energy_label, const GridSpec& time_spec,
                                  const std::string& time_label, const GlobalConstants& constants) {
  const ProductSpace& space = *state.space();
  const FactorSpace& energy = space.factor(space.index_of(energy_label));
  const Eigen::VectorXd energies = energy.basis_values().real();
  const PositionGrid time = make_position_grid(time_spec, Flavor::Real, time_label);
  const MatrixXc map = energy_to_time_map(time.space, energies, constants);
  return change_factor(state, energy_label, time.space, map);
}

FieldState localize_at_time(const FieldState& state, double t0, std::span<const std::string> labels) {
  const ProductSpace& space = *state.space();
  std::vector<LocalOperator> projectors;
  for (const auto& label : labels) {
    const FactorSpace& f = space.factor(space.index_of(label));
    if (f.kind() != FactorKind::Grid || f.flavor() != Flavor::Real)
      throw StructuralError("factor '" + label + "' is not a real time grid");
    const auto idx = f.find_value(t0, 1e-12 * std::max(1.0, std::abs(t0)));
    if (!idx) throw DomainError("t0 = " + std::to_string(t0) + " is not a grid point of '" + label + "'");
    projectors.push_back(LocalOperator::dyad(label, f.dim(), *idx));
  }
  return apply(OperatorExpr::product(state.space(), projectors), state);
}

OperatorExpr symmetrized_product(std::span<const OperatorExpr> ops, std::size_t max_factors) {
  if (ops.empty()) throw DomainError("symmetrized product needs at least one operator");
  if (ops.size() > max_factors)
    throw CapacityError("symmetrized product of " + std::to_string(ops.size()) + " operators exceeds cap " +
                        std::to_string(max_factors));
  for (const auto& op : ops) require_same_space(ops[0].space(), op.space(), "symmetrized_product");

  std::vector<std::size_t> order(ops.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double count = 0.0;
  OperatorExpr sum(ops[0].space());
  do {
    OperatorExpr chain = ops[order[0]];
    for (std::size_t i = 1; i < order.size(); ++i) chain = compose(chain, ops[order[i]]);
    sum += chain;
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  return Scalar(1.0 / count) * std::move(sum);
}

}  // namespace opfield
