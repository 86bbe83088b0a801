#include "opfield/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "opfield/random.hpp"

namespace opfield {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

/// c * sqrt(r) with r squarefree.
struct Surd {
  std::int64_t c = 0;
  std::int64_t r = 1;
};

/// Sum of surds keyed by radicand.
using SurdSum = std::map<std::int64_t, std::int64_t>;

Surd surd_sqrt(std::int64_t n) {
  std::int64_t s = 1, r = 1;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    while (n % (p * p) == 0) {
      n /= p * p;
      s *= p;
    }
  }
  r = n;
  return {s, r};
}

std::optional<Surd> to_surd(Scalar x) {
  if (x.imag() != 0.0) return std::nullopt;
  const double v = x.real();
  if (v == 0.0) return Surd{0, 1};
  const double sq = v * v;
  if (!(sq < 9.0e15)) return std::nullopt;
  const auto n = static_cast<std::int64_t>(std::llround(sq));
  if (n <= 0 || std::sqrt(static_cast<double>(n)) != std::abs(v)) return std::nullopt;
  Surd s = surd_sqrt(n);
  if (v < 0.0) s.c = -s.c;
  return s;
}

Surd multiply(const Surd& a, const Surd& b) {
  const std::int64_t g = std::gcd(a.r, b.r);
  return {a.c * b.c * g, (a.r / g) * (b.r / g)};
}

using SurdMatrix = std::vector<std::vector<Surd>>;

std::optional<SurdMatrix> to_surd_matrix(const LocalOperator& op) {
  const MatrixXc m = op.dense();
  SurdMatrix out(static_cast<std::size_t>(m.rows()), std::vector<Surd>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const auto s = to_surd(m(i, j));
      if (!s) return std::nullopt;
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = *s;
    }
  return out;
}

SurdSum product_entry(const SurdMatrix& a, const SurdMatrix& b, std::size_t i, std::size_t j) {
  SurdSum sum;
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (a[i][k].c == 0 || b[k][j].c == 0) continue;
    const Surd p = multiply(a[i][k], b[k][j]);
    sum[p.r] += p.c;
  }
  return sum;
}

}  // namespace

std::optional<Eigen::MatrixX<std::int64_t>> exact_integer_commutator(const LocalOperator& a, const LocalOperator& b) {
  if (a.label() != b.label() || a.dim() != b.dim()) throw StructuralError("exact commutator needs operators on one factor");
  const auto sa = to_surd_matrix(a);
  const auto sb = to_surd_matrix(b);
  if (!sa || !sb) return std::nullopt;
  const auto n = static_cast<std::size_t>(a.dim());
  Eigen::MatrixX<std::int64_t> out(a.dim(), a.dim());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      SurdSum c = product_entry(*sa, *sb, i, j);
      for (const auto& [r, v] : product_entry(*sb, *sa, i, j)) c[r] -= v;
      for (const auto& [r, v] : c)
        if (r != 1 && v != 0) return std::nullopt;
      out(static_cast<Index>(i), static_cast<Index>(j)) = c.count(1) ? c[1] : 0;
    }
  return out;
}

CheckReport check_truncated_ccr(Index dim, const GlobalConstants& constants) {
  const auto start = std::chrono::steady_clock::now();
  const FockOperators f = make_fock(dim, "n", constants);
  SpacePtr space = make_space({f.space});

  VectorXc corner = VectorXc::Ones(dim);
  corner(dim - 1) = 1.0 - static_cast<double>(dim);
  const OperatorExpr expected = OperatorExpr::local(space, LocalOperator::diagonal("n", corner));

  CheckReport report;
  report.name = "ccr";
  report.tolerance = 1e-12;
  const auto exact = exact_integer_commutator(f.a, f.a_dag);
  if (exact) {
    Eigen::MatrixX<std::int64_t> target = Eigen::MatrixX<std::int64_t>::Identity(dim, dim);
    target(dim - 1, dim - 1) = 1 - dim;
    report.add_residual("ladder_exact_defect", static_cast<double>((*exact - target).cwiseAbs().maxCoeff()), 0.0);
  } else {
    report.add_residual("ladder_exact_defect", std::numeric_limits<double>::infinity(), 0.0);
    report.add_note("ladder_exact", "commutator is not integer-valued");
  }
  const OperatorExpr a = OperatorExpr::local(space, f.a);
  const OperatorExpr a_dag = OperatorExpr::local(space, f.a_dag);
  report.add_residual("ladder_residual", op_norm_residual(commutator(a, a_dag), expected).value);
  const OperatorExpr q = OperatorExpr::local(space, f.q);
  const OperatorExpr p = OperatorExpr::local(space, f.p);
  report.add_residual("quadrature_residual",
                      op_norm_residual(commutator(q, p), (I_UNIT * constants.hbar) * expected).value /
                          constants.hbar);
  report.add_metric("dim", static_cast<double>(dim));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

CheckReport check_weak_ccr(const GridSpec& time_spec, const GlobalConstants& constants, double points_per_sigma,
                           double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const TimeEnergy te = make_time_energy(time_spec, {"t", "E"}, constants);
  SpacePtr space = make_space({te.time});
  const OperatorExpr t = OperatorExpr::local(space, te.t);
  const OperatorExpr s = OperatorExpr::local(space, te.s);

  const double sigma = points_per_sigma * time_spec.spacing();
  VectorXc psi(te.time.dim());
  for (Index i = 0; i < psi.size(); ++i) {
    const double x = te.time.basis_values()(i).real();
    psi(i) = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  psi.normalize();
  const Scalar value = expectation(commutator(t, s), FieldState::dense(space, psi));

  CheckReport report;
  report.name = "ccr";
  report.tolerance = tolerance;
  report.add_residual("weak_ccr_residual", std::abs(value + I_UNIT * constants.hbar) / constants.hbar);
  report.add_metric("expectation_re", value.real());
  report.add_metric("expectation_im", value.imag());
  report.add_metric("sigma", sigma);
  report.add_metric("points", static_cast<double>(time_spec.n_points));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

CheckReport check_anti_selfadjoint(const GridSpec& spec, const GlobalConstants& constants) {
  const auto start = std::chrono::steady_clock::now();
  const PositionGrid grid = make_position_grid(spec, Flavor::Imaginary, "r_im");
  const LocalOperator k = make_momentum_operator(grid.space, constants);
  const SpectrumBounds rb = spectrum_bounds(grid.r);
  const SpectrumBounds kb = spectrum_bounds(k);

  CheckReport report;
  report.name = "anti_selfadjoint";
  report.tolerance = 1e-12;
  report.add_residual("r_anti_hermitian_defect", anti_hermitian_defect(grid.r.matrix()));
  report.add_residual("k_anti_hermitian_defect", anti_hermitian_defect(k.matrix()));
  const double real_part = std::max({std::abs(rb.min_real), std::abs(rb.max_real), std::abs(kb.min_real),
                                     std::abs(kb.max_real)});
  report.add_residual("eigen_real_part", real_part, 1e-10);
  report.add_metric("r_max_abs_imag", rb.max_abs_imag);
  report.add_metric("k_max_abs_imag", kb.max_abs_imag);
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

LocalOperator imaginary_kinetic_hamiltonian(const GridSpec& spec, const GlobalConstants& constants) {
  if (!(constants.mass > 0.0)) throw DomainError("kinetic Hamiltonian needs a positive mass");
  const PositionGrid grid = make_position_grid(spec, Flavor::Imaginary, "r_im");
  const LocalOperator k = make_momentum_operator(grid.space, constants);
  return Scalar(1.0 / (2.0 * constants.mass)) * (k * k);
}

LocalOperator real_kinetic_hamiltonian(const GridSpec& spec, const GlobalConstants& constants) {
  if (!(constants.mass > 0.0)) throw DomainError("kinetic Hamiltonian needs a positive mass");
  const PositionGrid grid = make_position_grid(spec, Flavor::Real, "x");
  const LocalOperator k = make_momentum_operator(grid.space, constants);
  return Scalar(1.0 / (2.0 * constants.mass)) * (k * k);
}

CheckReport check_spectrum(const LocalOperator& op, SpectrumClaim claim, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const SpectrumBounds b = spectrum_bounds(op);
  CheckReport report;
  report.name = "spectrum";
  report.tolerance = tolerance;
  switch (claim) {
    case SpectrumClaim::Nonpositive:
      report.add_residual("positive_excess", std::max(0.0, b.max_real));
      report.add_note("claim", "nonpositive");
      break;
    case SpectrumClaim::Nonnegative:
      report.add_residual("negative_excess", std::max(0.0, -b.min_real));
      report.add_note("claim", "nonnegative");
      break;
    case SpectrumClaim::PurelyImaginary:
      report.add_residual("real_part", std::max(std::abs(b.min_real), std::abs(b.max_real)));
      report.add_note("claim", "purely_imaginary");
      break;
    case SpectrumClaim::Real:
      report.add_residual("imag_part", b.max_abs_imag);
      report.add_note("claim", "real");
      break;
  }
  report.add_metric("min_real", b.min_real);
  report.add_metric("max_real", b.max_real);
  report.add_metric("max_abs_imag", b.max_abs_imag);
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

CheckReport check_zero_energy(const FieldDescriptor& desc, int n_states, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const OperatorExpr s = build_S_operator(desc);
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < n_states; ++k) {
    const Index n_terms = 1 + rng.index(static_cast<Index>(desc.table.size()));
    std::vector<ModeExcitation> ex;
    for (Index j = 0; j < n_terms; ++j) {
      ModeExcitation e;
      e.mode = static_cast<std::size_t>(rng.index(static_cast<Index>(desc.table.size())));
      for (const auto& amp : desc.amplitudes) e.occupation.push_back(rng.index(amp.space.dim()));
      e.coeff = rng.complex_normal();
      ex.push_back(std::move(e));
    }
    const FieldState psi = build_field_state(desc, ex);
    const double n2 = inner(psi, psi).real();
    if (n2 == 0.0) continue;
    worst = std::max(worst, std::abs(expectation(s, psi)) / n2);
  }
  CheckReport report;
  report.name = "zero_energy";
  report.tolerance = tolerance;
  report.add_residual("max_abs_S_expectation", worst);
  report.add_metric("states", static_cast<double>(n_states));
  report.add_metric("energy_pair_defect", [&] {
    double d = 0.0;
    for (const auto& m : desc.table.modes) d = std::max(d, std::abs(m.E_re + m.E_im));
    return d;
  }());
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

CheckReport check_localization(const GridSpec& time_spec, Index t0_index, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const PositionGrid tg = make_position_grid(time_spec, Flavor::Real, "t");
  const Index T = tg.space.dim();
  if (t0_index < 0 || t0_index >= T) throw DomainError("t0 index out of range");
  SpacePtr space = make_space({tg.space});
  const FieldState uniform =
      FieldState::product(space, {VectorXc::Constant(T, Scalar(1.0 / std::sqrt(static_cast<double>(T))))});
  const double t0 = tg.space.basis_values()(t0_index).real();
  const std::vector<std::string> labels{"t"};
  const FieldState once = localize_at_time(uniform, t0, labels);
  const FieldState twice = localize_at_time(once, t0, labels);

  const VectorXc v = once.to_dense();
  double off_support = 0.0;
  for (Index i = 0; i < T; ++i)
    if (i != t0_index) off_support = std::max(off_support, std::abs(v(i)));

  CheckReport report;
  report.name = "localization";
  report.tolerance = tolerance;
  report.add_residual("idempotence", max_abs_difference(once, twice));
  report.add_residual("off_support", off_support);
  report.add_residual("norm_ratio_error", std::abs(norm(once) / norm(uniform) - 1.0 / std::sqrt(static_cast<double>(T))));
  report.add_metric("t0", t0);
  report.add_metric("points", static_cast<double>(T));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

CheckReport check_symmetrization(const std::vector<OperatorExpr>& ops, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  const OperatorExpr sym = symmetrized_product(ops);
  std::vector<OperatorExpr> reversed(ops.rbegin(), ops.rend());
  const OperatorExpr sym_rev = symmetrized_product(reversed);

  CheckReport report;
  report.name = "symmetrization";
  report.tolerance = tolerance;
  report.add_residual("permutation_invariance", op_norm_residual(sym, sym_rev).value);
  const bool all_hermitian = std::all_of(ops.begin(), ops.end(), [](const OperatorExpr& op) {
    return hermitian_defect(to_dense(op)) <= 1e-12;
  });
  if (all_hermitian) report.add_residual("hermiticity", hermitian_defect(to_dense(sym)));
  report.add_metric("factors", static_cast<double>(ops.size()));
  report.add_metric("terms", static_cast<double>(sym.term_count()));
  report.wall_ms = elapsed_ms(start);
  report.finalize();
  return report;
}

}  // namespace opfield
