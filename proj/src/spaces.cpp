#include "opfield/spaces.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

namespace opfield {

void GlobalConstants::validate() const {
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw DomainError("hbar must be positive");
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("c must be positive");
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw DomainError("mass must be nonnegative");
}

FockOperators make_fock(Index dim, const std::string& label, const GlobalConstants& constants) {
  if (dim < 2) throw DomainError("Fock dimension must be at least 2, got " + std::to_string(dim));
  constants.validate();

  SparseMatrixXc a(dim, dim);
  VectorXc occupation(dim);
  for (Index n = 0; n < dim; ++n) occupation(n) = static_cast<double>(n);
  for (Index n = 1; n < dim; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
  a.makeCompressed();
  SparseMatrixXc a_dag = a.adjoint();

  const double scale = std::sqrt(constants.hbar / 2.0);
  SparseMatrixXc q = (a + a_dag) * Scalar(scale);
  SparseMatrixXc p = (a - a_dag) * (Scalar(scale) / I_UNIT);

  return FockOperators{
      FactorSpace::fock(label, dim),
      LocalOperator(label, a),
      LocalOperator(label, a_dag),
      LocalOperator::diagonal(label, occupation, kHermitian),
      LocalOperator(label, std::move(q), kHermitian),
      LocalOperator(label, std::move(p), kHermitian),
  };
}

PositionGrid make_position_grid(const GridSpec& spec, Flavor flavor, const std::string& label) {
  spec.validate();
  const Eigen::VectorXd u = spec.points();
  VectorXc values(u.size());
  for (Index j = 0; j < u.size(); ++j) values(j) = flavor == Flavor::Real ? Scalar(u(j), 0.0) : Scalar(0.0, u(j));
  FactorSpace space(label, FactorKind::Grid, flavor, values, spec);
  const unsigned flags = flavor == Flavor::Real ? kHermitian : kAntiHermitian;
  return PositionGrid{std::move(space), LocalOperator::diagonal(label, values, flags)};
}

Eigen::MatrixXd differentiation_matrix(const GridSpec& spec) {
  spec.validate();
  const Index n = spec.n_points;
  const double h = spec.spacing();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  if (spec.periodic) {
    const double period = static_cast<double>(n) * h;
    const double scale = 2.0 * std::numbers::pi / period;
    const bool even = n % 2 == 0;
    // Entry depends on the offset only; c[n - m] = -c[m] is imposed exactly and the
    // even-n Nyquist offset is exactly zero.
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    for (Index m = 1; 2 * m < n; ++m) {
      const double x = static_cast<double>(m) * std::numbers::pi / static_cast<double>(n);
      const double sign = m % 2 == 0 ? 1.0 : -1.0;
      c[static_cast<std::size_t>(m)] = 0.5 * sign * (even ? 1.0 / std::tan(x) : 1.0 / std::sin(x)) * scale;
      c[static_cast<std::size_t>(n - m)] = -c[static_cast<std::size_t>(m)];
    }
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) d(j, k) = c[static_cast<std::size_t>((j - k + n) % n)];
  } else {
    const double v = 1.0 / (2.0 * h);
    for (Index j = 0; j + 1 < n; ++j) {
      d(j, j + 1) = v;
      d(j + 1, j) = -v;
    }
  }
  return d;
}

LocalOperator make_momentum_operator(const FactorSpace& grid_factor, const GlobalConstants& constants) {
  if (grid_factor.kind() != FactorKind::Grid || !grid_factor.grid())
    throw StructuralError("momentum operator needs a position-grid factor, got '" + grid_factor.label() + "'");
  constants.validate();
  const Eigen::MatrixXd d = differentiation_matrix(*grid_factor.grid());
  if (grid_factor.flavor() == Flavor::Real) {
    const MatrixXc k = (-I_UNIT * constants.hbar) * d.cast<Scalar>();
    return LocalOperator(grid_factor.label(), k, kHermitian);
  }
  // -i hbar d/d(r_im) with d/d(r_im) = (1/i) d/du.
  const MatrixXc k = ((-I_UNIT * constants.hbar) / I_UNIT) * d.cast<Scalar>();
  return LocalOperator(grid_factor.label(), k, kAntiHermitian);
}

Eigen::VectorXd resolvable_energies(const GridSpec& time_spec, const GlobalConstants& constants) {
  time_spec.validate();
  constants.validate();
  const Index n = time_spec.n_points;
  const double period = static_cast<double>(n) * time_spec.spacing();
  // Exclude the Nyquist frequency, which the antisymmetric spectral matrix maps to zero.
  const Index m_max = n % 2 == 0 ? n / 2 - 1 : (n - 1) / 2;
  Eigen::VectorXd e(2 * m_max + 1);
  for (Index m = -m_max; m <= m_max; ++m)
    e(m + m_max) = constants.hbar * 2.0 * std::numbers::pi * static_cast<double>(m) / period;
  return e;
}

TimeEnergy make_time_energy(const GridSpec& spec, const std::pair<std::string, std::string>& labels,
                            const GlobalConstants& constants) {
  PositionGrid tg = make_position_grid(spec, Flavor::Real, labels.first);
  const Eigen::MatrixXd d = differentiation_matrix(spec);
  const MatrixXc s = (I_UNIT * constants.hbar) * d.cast<Scalar>();

  const Eigen::VectorXd energies = resolvable_energies(spec, constants);
  const VectorXc e_values = energies.cast<Scalar>();
  FactorSpace energy(labels.second, FactorKind::Grid, Flavor::Real, e_values);
  LocalOperator s_diag = LocalOperator::diagonal(labels.second, e_values, kHermitian);

  return TimeEnergy{std::move(tg.space), std::move(tg.r), LocalOperator(labels.first, s, kHermitian),
                    std::move(energy), std::move(s_diag)};
}

MatrixXc energy_to_time_map(const FactorSpace& time, const Eigen::VectorXd& energies,
                            const GlobalConstants& constants) {
  if (time.kind() != FactorKind::Grid || time.flavor() != Flavor::Real)
    throw StructuralError("energy_to_time_map needs a real time grid");
  const Index nt = time.dim();
  MatrixXc map(nt, energies.size());
  const double norm = 1.0 / std::sqrt(static_cast<double>(nt));
  for (Index j = 0; j < energies.size(); ++j)
    for (Index i = 0; i < nt; ++i)
      map(i, j) = norm * std::exp(energies(j) * time.basis_values()(i).real() / (I_UNIT * constants.hbar));
  return map;
}

SpectrumBounds spectrum_bounds(const LocalOperator& op) {
  if (op.dim() > SPECTRUM_CAP)
    throw CapacityError("spectrum_bounds: dimension " + std::to_string(op.dim()) + " exceeds cap " +
                        std::to_string(SPECTRUM_CAP));
  const MatrixXc m = op.dense();
  SpectrumBounds b;
  if (hermitian_defect(m) <= 1e-12) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> solver(m, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = solver.eigenvalues();
    b.min_real = ev.minCoeff();
    b.max_real = ev.maxCoeff();
    b.max_abs_imag = 0.0;
    return b;
  }
  Eigen::ComplexEigenSolver<MatrixXc> solver(m, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver did not converge");
  const VectorXc& ev = solver.eigenvalues();
  b.min_real = ev.real().minCoeff();
  b.max_real = ev.real().maxCoeff();
  b.max_abs_imag = ev.imag().cwiseAbs().maxCoeff();
  return b;
}

}  // namespace opfield
