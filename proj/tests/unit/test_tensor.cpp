#include <doctest.h>

#include <cmath>

#include "../support/oracle.hpp"
#include "opfield/spaces.hpp"

using namespace opfield;
using opfield::testing::oracle_dense;

namespace {

SpacePtr fock_space(Index dim, const std::string& label = "n") { return make_space({FactorSpace::fock(label, dim)}); }

VectorXc basis_vec(Index dim, Index i) {
  VectorXc v = VectorXc::Zero(dim);
  v(i) = 1.0;
  return v;
}

}  // namespace

TEST_CASE("factor space invariants") {
  const FactorSpace f = FactorSpace::fock("n", 4);
  CHECK(f.dim() == 4);
  CHECK(f.basis_values()(3) == Scalar(3.0));
  CHECK_THROWS_AS(FactorSpace::fock("n", 0), DomainError);
  CHECK_THROWS_AS(FactorSpace("", FactorKind::Fock, Flavor::Real, VectorXc::Ones(2)), DomainError);

  VectorXc imaginary(2);
  imaginary << Scalar(0, 1), Scalar(0, -1);
  CHECK_THROWS_AS(FactorSpace("x", FactorKind::Grid, Flavor::Real, imaginary), DomainError);
  CHECK_NOTHROW(FactorSpace("x", FactorKind::Grid, Flavor::Imaginary, imaginary));
  CHECK_THROWS_AS(FactorSpace("x", FactorKind::Grid, Flavor::Imaginary, VectorXc::Ones(2)), DomainError);
}

TEST_CASE("product space enumeration is row-major") {
  const ProductSpace s({FactorSpace::fock("a", 2), FactorSpace::fock("b", 3), FactorSpace::fock("c", 4)});
  CHECK(s.total_dim() == 24);
  const std::vector<Index> multi{1, 2, 3};
  CHECK(s.flat_index(multi) == 1 * 12 + 2 * 4 + 3);
  CHECK(s.multi_index(23) == multi);
  for (Index i = 0; i < s.total_dim(); ++i) CHECK(s.flat_index(s.multi_index(i)) == i);
  CHECK_THROWS_AS(ProductSpace({FactorSpace::fock("a", 2), FactorSpace::fock("a", 3)}), StructuralError);
  CHECK_THROWS_AS(s.index_of("missing"), StructuralError);
}

TEST_CASE("apply: identity returns the state") {
  Rng rng(1);
  const SpacePtr space = opfield::testing::random_space(rng, 256);
  const FieldState psi = opfield::testing::random_state(rng, space);
  const FieldState out = apply(OperatorExpr::identity(space), psi);
  CHECK(max_abs_difference(out, psi) <= 1e-15);
}

TEST_CASE("apply: annihilation on |3> in dim 5") {
  const FockOperators f = make_fock(5, "n");
  const SpacePtr space = make_space({f.space});
  const std::vector<Index> three{3};
  const FieldState out = apply(OperatorExpr::local(space, f.a), FieldState::basis(space, three));
  const VectorXc v = out.to_dense();
  VectorXc want = VectorXc::Zero(5);
  want(2) = std::sqrt(3.0);
  CHECK((v - want).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("apply: number operator times dyad") {
  const FockOperators f = make_fock(4, "n");
  const FactorSpace k("k", FactorKind::Grid, Flavor::Real, Eigen::VectorXd::LinSpaced(5, -2, 2).cast<Scalar>());
  const SpacePtr space = make_space({f.space, k});
  const OperatorExpr op = OperatorExpr::product(space, {f.n, LocalOperator::dyad("k", 5, 1)});

  const std::vector<Index> on{2, 1};
  const FieldState psi = FieldState::basis(space, on);
  CHECK(max_abs_difference(apply(op, psi), Scalar(2.0) * psi) <= 1e-15);

  const std::vector<Index> off{2, 3};
  CHECK(apply(op, FieldState::basis(space, off)).to_dense().cwiseAbs().maxCoeff() == 0.0);
  CHECK((to_dense(op) - oracle_dense(op)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("apply errors") {
  const SpacePtr a = fock_space(3, "n");
  const SpacePtr b = fock_space(4, "n");
  const FieldState psi = FieldState::product(b, {basis_vec(4, 0)});
  CHECK_THROWS_AS(apply(OperatorExpr::identity(a), psi), StructuralError);

  Rng rng(3);
  const SpacePtr s = make_space({FactorSpace::fock("x", 3), FactorSpace::fock("y", 3)});
  const OperatorExpr op = opfield::testing::random_expr(rng, s, 4) + opfield::testing::random_expr(rng, s, 4);
  const FieldState many = opfield::testing::random_state(rng, s, 3) + opfield::testing::random_state(rng, s, 3);
  ApplyOptions tight;
  tight.term_cap = 1;
  try {
    apply(op, many, tight);
    FAIL("expected a capacity error");
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("cap is 1") != std::string::npos);
  }
  CHECK_THROWS_AS(OperatorExpr::local(s, LocalOperator::identity("z", 3)), StructuralError);
  CHECK_THROWS_AS(OperatorExpr::local(s, LocalOperator::identity("x", 4)), StructuralError);
}

TEST_CASE("compose examples") {
  const FockOperators f = make_fock(4, "n");
  const SpacePtr space = make_space({f.space});
  const MatrixXc n = to_dense(compose(OperatorExpr::local(space, f.a_dag), OperatorExpr::local(space, f.a)));
  Eigen::VectorXd diag(4);
  diag << 0, 1, 2, 3;
  CHECK((n - MatrixXc(diag.cast<Scalar>().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-15);

  Rng rng(5);
  const OperatorExpr x = opfield::testing::random_expr(rng, space);
  CHECK(same_terms(compose(x, OperatorExpr::identity(space)), x));

  const OperatorExpr d1 = OperatorExpr::local(space, LocalOperator::dyad("n", 4, 1));
  const OperatorExpr d2 = OperatorExpr::local(space, LocalOperator::dyad("n", 4, 2));
  CHECK(to_dense(compose(d1, d2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(compose(x, x, 0), CapacityError);
}

TEST_CASE("adjoint examples") {
  const FockOperators f = make_fock(5, "n");
  const SpacePtr space = make_space({f.space});
  CHECK((to_dense(adjoint(OperatorExpr::local(space, f.a))) - f.a_dag.dense()).cwiseAbs().maxCoeff() == 0.0);
  const MatrixXc ii = to_dense(adjoint(OperatorExpr::identity(space, I_UNIT)));
  CHECK((ii + I_UNIT * MatrixXc::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);

  const PositionGrid g = make_position_grid(GridSpec{16, 2.0, true}, Flavor::Imaginary, "r");
  const SpacePtr gs = make_space({g.space});
  const OperatorExpr r = OperatorExpr::local(gs, g.r);
  CHECK((to_dense(adjoint(r)) + to_dense(r)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("commutator examples") {
  const FockOperators f = make_fock(4, "n");
  const SpacePtr space = make_space({f.space});
  const MatrixXc c = to_dense(commutator(OperatorExpr::local(space, f.a), OperatorExpr::local(space, f.a_dag)));
  Eigen::VectorXd diag(4);
  diag << 1, 1, 1, -3;
  CHECK((c - MatrixXc(diag.cast<Scalar>().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-15);

  for (Index N = 1; N <= 7; ++N) {
    const FockOperators g = make_fock(N + 1, "m");
    const SpacePtr s = make_space({g.space});
    const MatrixXc qp = to_dense(commutator(OperatorExpr::local(s, g.q), OperatorExpr::local(s, g.p)));
    MatrixXc want = I_UNIT * MatrixXc::Identity(N + 1, N + 1);
    want(N, N) = I_UNIT * (1.0 - static_cast<double>(N + 1));
    CHECK((qp - want).cwiseAbs().maxCoeff() <= 1e-14);
  }

  const OperatorExpr d = OperatorExpr::local(space, LocalOperator::dyad("n", 4, 2));
  CHECK(to_dense(commutator(d, d)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("op_norm_residual paths") {
  const FockOperators f = make_fock(2, "n");
  const SpacePtr space = make_space({f.space});
  const OperatorExpr a = OperatorExpr::local(space, f.a);
  const ResidualResult same = op_norm_residual(a, a);
  CHECK(same.value == 0.0);
  CHECK(same.path == ResidualPath::Dense);
  CHECK(op_norm_residual(a, OperatorExpr::local(space, f.a_dag)).value == doctest::Approx(1.0).epsilon(1e-15));

  // Above the dense cap: diagonal differences stay exact, others need probes.
  const SpacePtr big = make_space({FactorSpace::fock("x", 64), FactorSpace::fock("y", 128)});
  const FockOperators fx = make_fock(64, "x");
  const OperatorExpr nx = OperatorExpr::local(big, fx.n);
  const ResidualResult diag = op_norm_residual(nx, OperatorExpr::zero(big));
  CHECK(diag.path == ResidualPath::Diagonal);
  CHECK(diag.value == 63.0);

  const OperatorExpr ax = OperatorExpr::local(big, fx.a);
  CHECK_THROWS_AS(op_norm_residual(ax, OperatorExpr::zero(big)), CapacityError);
  ResidualOptions opts;
  opts.probes = 4;
  const ResidualResult st = op_norm_residual(ax, ax, opts);
  CHECK(st.path == ResidualPath::Stochastic);
  CHECK(st.probes == 4);
  CHECK(st.value == 0.0);
  const ResidualResult st2 = op_norm_residual(ax, OperatorExpr::zero(big), opts);
  CHECK(st2.value > 0.0);
  CHECK(st2.value <= std::sqrt(63.0) + 1e-9);
  CHECK(op_norm_residual(ax, OperatorExpr::zero(big), opts).value == st2.value);
}

TEST_CASE("dense round trip of sum-of-products states") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const SpacePtr space = opfield::testing::random_space(rng, 4096);
    const FieldState psi = opfield::testing::random_state(rng, space);
    const VectorXc dense = psi.to_dense();
    CHECK(opfield::testing::rel_err(dense, oracle_dense(psi)) <= 1e-14);
    const FieldState back = FieldState::dense(space, dense);
    CHECK(max_abs_difference(back, psi) <= 1e-12);
    CHECK(std::abs(norm(back) - dense.norm()) <= 1e-12 * dense.norm());
  }
}

TEST_CASE("property: oracle equivalence, involution, antisymmetry, associativity") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const SpacePtr space = opfield::testing::random_space(rng, 512);
    const OperatorExpr a = opfield::testing::random_expr(rng, space, 3);
    const OperatorExpr b = opfield::testing::random_expr(rng, space, 3);
    const OperatorExpr c = opfield::testing::random_expr(rng, space, 2);
    const FieldState psi = opfield::testing::random_state(rng, space);

    const MatrixXc A = oracle_dense(a);
    CHECK(opfield::testing::rel_err(to_dense(a), A) <= 1e-12);
    const VectorXc want = A * oracle_dense(psi);
    CHECK(opfield::testing::rel_err(apply(a, psi).to_dense(), want) <= 1e-12);
    ApplyOptions dense;
    dense.dense_result = true;
    CHECK(opfield::testing::rel_err(apply(a, psi, dense).to_dense(), want) <= 1e-12);
    CHECK(opfield::testing::rel_err(apply(a, psi.as_dense()).to_dense(), want) <= 1e-12);

    CHECK((to_dense(adjoint(adjoint(a))).array() == to_dense(a).array()).all());
    CHECK(opfield::testing::rel_err(to_dense(adjoint(a)), MatrixXc(A.adjoint())) <= 1e-15);
    // Commutators can vanish, so compare against the scale of the product.
    const MatrixXc B = oracle_dense(b);
    const double scale = A.norm() * B.norm();
    const MatrixXc ab = to_dense(commutator(a, b));
    const MatrixXc ba = to_dense(commutator(b, a));
    CHECK((ab + ba).norm() <= 1e-12 * scale);
    CHECK((ab - (A * B - B * A)).norm() <= 1e-12 * scale);
    const MatrixXc abc = to_dense(compose(compose(a, b), c));
    CHECK((abc - to_dense(compose(a, compose(b, c)))).norm() <= 1e-12 * scale * oracle_dense(c).norm());
  }
}

TEST_CASE("property: determinism across runs and thread counts") {
  Rng rng(99);
  const SpacePtr space = opfield::testing::random_space(rng, 4096);
  const OperatorExpr a = opfield::testing::random_expr(rng, space, 4);
  const OperatorExpr b = opfield::testing::random_expr(rng, space, 4);
  const FieldState psi = opfield::testing::random_state(rng, space);

  const int saved = thread_count();
  set_thread_count(1);
  const OperatorExpr c1 = commutator(a, b);
  const MatrixXc d1 = to_dense(c1);
  const VectorXc v1 = apply(c1, psi.as_dense()).vector();
  set_thread_count(4);
  const OperatorExpr c2 = commutator(a, b);
  const MatrixXc d2 = to_dense(c2);
  const VectorXc v2 = apply(c2, psi.as_dense()).vector();
  set_thread_count(saved);

  CHECK(same_terms(c1, c2));
  CHECK((d1.array() == d2.array()).all());
  CHECK((v1.array() == v2.array()).all());
}

TEST_CASE("local operator flags are verified on demand") {
  const FockOperators f = make_fock(5, "n");
  CHECK(f.n.has(kHermitian));
  CHECK(f.n.verify_flags());
  CHECK(f.q.verify_flags());
  CHECK(f.p.verify_flags());
  const LocalOperator lying("n", f.a.dense(), kHermitian);
  CHECK_FALSE(lying.verify_flags());
  CHECK_THROWS_AS(LocalOperator("n", MatrixXc::Zero(2, 3)), StructuralError);
}
