#include <doctest.h>

#include <cmath>

#include "../support/oracle.hpp"
#include "opfield/checks.hpp"
#include "opfield/field.hpp"

using namespace opfield;
using opfield::testing::kron_all;

namespace {

GlobalConstants with_mass(double m, double c = 1.0) {
  GlobalConstants k;
  k.mass = m;
  k.c = c;
  return k;
}

std::vector<Vec3> collinear(std::initializer_list<double> ks) {
  std::vector<Vec3> out;
  for (double k : ks) out.emplace_back(k, 0.0, 0.0);
  return out;
}

FieldDescriptor scalar_field(const std::vector<Vec3>& ks, const GlobalConstants& k, Index dim = 3) {
  return make_field_descriptor(build_mode_table(ks, ks, k, Pairing::Conjugate), k, {dim});
}

/// Random conjugate table of up to max_modes distinct 3-vectors.
std::vector<Vec3> random_momenta(Rng& rng, int max_modes) {
  const int n = 1 + static_cast<int>(rng.index(max_modes));
  std::vector<Vec3> ks;
  for (int i = 0; i < n; ++i) ks.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  return ks;
}

/// The field operator written out from its definition with Eigen's Kronecker product.
MatrixXc field_operator_oracle(const FieldDescriptor& desc, std::size_t component) {
  const ProductSpace& space = *desc.space;
  const Index n = space.total_dim();
  MatrixXc out = MatrixXc::Zero(n, n);
  for (std::size_t m = 0; m < desc.table.size(); ++m) {
    std::vector<MatrixXc> mats;
    for (std::size_t c = 0; c < desc.n_components(); ++c) {
      const Index d = desc.amplitudes[c].space.dim();
      mats.push_back(c == component ? desc.amplitudes[c].n.dense() : MatrixXc::Identity(d, d));
    }
    const ModeIndex& mi = desc.mode_index[m];
    const Index idx[4] = {mi.k_re, mi.E_re, mi.k_im, mi.E_im};
    for (int f = 0; f < 4; ++f) {
      const Index d = space.factor(desc.n_components() + static_cast<std::size_t>(f)).dim();
      MatrixXc dy = MatrixXc::Zero(d, d);
      dy(idx[f], idx[f]) = 1.0;
      mats.push_back(dy);
    }
    out += desc.table.weights[m] * kron_all(mats);
  }
  return out;
}

}  // namespace

TEST_CASE("dispersion branches") {
  CHECK(positive_branch_energy(Vec3(2, 0, 0), with_mass(0.0)) == 2.0);
  CHECK(negative_branch_energy(Vec3(4, 0, 0), with_mass(3.0)) == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK(positive_branch_energy(Vec3(0, 0, 0), with_mass(1.5, 2.0)) == doctest::Approx(6.0));
  CHECK(negative_branch_energy(Vec3(0, 3, 4), with_mass(0.0, 0.5)) == doctest::Approx(-2.5));

  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const GlobalConstants k = with_mass(rng.uniform(0, 2), rng.uniform(0.2, 3));
    const Vec3 a(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const double rest = k.mass * k.c * k.c;
    CHECK(positive_branch_energy(a, k) >= rest);
    CHECK(negative_branch_energy(a, k) <= -rest);
    CHECK(positive_branch_energy(a, k) == doctest::Approx(-negative_branch_energy(a, k)).epsilon(1e-14));
    // Strictly increasing in |k|.
    CHECK(positive_branch_energy(1.01 * a, k) > positive_branch_energy(a, k));
  }
}

TEST_CASE("mode table construction") {
  const GlobalConstants k = with_mass(0.7);
  const auto ks = collinear({0.5, 1.0, 2.0});
  const ModeTable conj = build_mode_table(ks, ks, k, Pairing::Conjugate);
  REQUIRE(conj.size() == 3);
  for (const auto& m : conj.modes) CHECK(m.E_re + m.E_im == 0.0);
  CHECK(conj.weights == std::vector<double>(3, 1.0));
  CHECK(conj.max_energy_defect(k) <= 1e-12);

  const auto kappa = collinear({0.1, 0.2});
  const ModeTable indep = build_mode_table(ks, kappa, k, Pairing::Independent);
  CHECK(indep.size() == 6);

  CHECK_THROWS_AS(build_mode_table(ks, kappa, k, Pairing::Conjugate), DomainError);
  const auto shifted = collinear({0.5, 1.0, 2.5});
  CHECK_THROWS_AS(build_mode_table(ks, shifted, k, Pairing::Conjugate), DomainError);
  const std::vector<Vec3> none;
  CHECK_THROWS_AS(build_mode_table(none, none, k, Pairing::Independent), DomainError);
}

TEST_CASE("field descriptor layout") {
  const GlobalConstants k = with_mass(0.0);
  // Two momenta of equal length share one energy basis vector.
  const std::vector<Vec3> ks{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 2)};
  const FieldDescriptor d = scalar_field(ks, k);
  const ProductSpace& s = *d.space;
  REQUIRE(s.factor_count() == 5);
  CHECK(s.factor(0).label() == "amp0");
  CHECK(s.factor(1).label() == K_RE_LABEL);
  CHECK(s.factor(2).label() == E_RE_LABEL);
  CHECK(s.factor(3).label() == K_IM_LABEL);
  CHECK(s.factor(4).label() == E_IM_LABEL);
  CHECK(s.factor(1).dim() == 3);
  CHECK(s.factor(2).dim() == 2);
  CHECK(s.factor(3).flavor() == Flavor::Imaginary);
  CHECK(s.factor(4).flavor() == Flavor::Real);
  CHECK(d.mode_index[0].E_re == d.mode_index[1].E_re);
  CHECK(d.mode_index[0].k_re != d.mode_index[1].k_re);

  CHECK_THROWS_AS(make_field_descriptor(d.table, k, {}), DomainError);
  CHECK_THROWS_AS(make_field_descriptor(d.table, k, {2, 2}, {"a"}), DomainError);
  ModeTable bad = d.table;
  bad.weights[0] = 0.0;
  CHECK_THROWS_AS(make_field_descriptor(bad, k, {2}), DomainError);
}

TEST_CASE("field operator") {
  const GlobalConstants k = with_mass(0.5);
  const FieldDescriptor one = scalar_field(collinear({1.0}), k, 3);
  const OperatorExpr phi = build_field_operator(one, 0);
  CHECK(phi.term_count() == 1);
  const ModeIndex& mi = one.mode_index[0];
  const std::vector<Index> on{2, mi.k_re, mi.E_re, mi.k_im, mi.E_im};
  CHECK(expectation(phi, FieldState::basis(one.space, on)) == Scalar(2.0));

  const FieldDescriptor two = scalar_field(collinear({1.0, 2.0}), k, 3);
  const OperatorExpr phi2 = build_field_operator(two, 0);
  const ModeIndex& m0 = two.mode_index[0];
  const ModeIndex& m1 = two.mode_index[1];
  const std::vector<Index> off{2, m1.k_re, m0.E_re, m0.k_im, m0.E_im};
  CHECK(expectation(phi2, FieldState::basis(two.space, off)) == Scalar(0.0));

  const MatrixXc dense = to_dense(phi2);
  CHECK((dense - field_operator_oracle(two, 0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(hermitian_defect(dense) == 0.0);
  CHECK(phi2.is_diagonal());
  CHECK_THROWS_AS(build_field_operator(two, 1), StructuralError);

  // Weighted, multi-component field against the oracle.
  ModeTable t = build_mode_table(collinear({0.3, 0.6, 0.9}), collinear({0.3, 0.6, 0.9}), k, Pairing::Conjugate);
  t.weights = {0.5, 2.0, 1.25};
  const FieldDescriptor multi = make_field_descriptor(t, k, {2, 3});
  for (std::size_t c = 0; c < 2; ++c)
    CHECK((to_dense(build_field_operator(multi, c)) - field_operator_oracle(multi, c)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hamiltonian") {
  const GlobalConstants massless = with_mass(0.0, 1.7);
  const auto kr = collinear({0.5, 1.5});
  const auto kap = collinear({0.25, 2.0, 3.0});
  const FieldDescriptor d =
      make_field_descriptor(build_mode_table(kr, kap, massless, Pairing::Independent), massless, {2});
  const VectorXc h = product_diagonal(build_hamiltonian(d));
  const ProductSpace& s = *d.space;
  for (std::size_t i = 0; i < d.k_re_points.size(); ++i)
    for (std::size_t j = 0; j < d.kappa_points.size(); ++j) {
      const std::vector<Index> multi{1, static_cast<Index>(i), 0, static_cast<Index>(j), 0};
      const double want = massless.c * (d.k_re_points[i].norm() - d.kappa_points[j].norm());
      CHECK(h(s.flat_index(multi)).real() == doctest::Approx(want).epsilon(1e-14));
    }

  const GlobalConstants massive = with_mass(1.0);
  const std::vector<Vec3> zero{Vec3::Zero()};
  const FieldDescriptor rest = make_field_descriptor(build_mode_table(zero, zero, massive, Pairing::Conjugate), massive, {2});
  CHECK(product_diagonal(build_hamiltonian(rest)).cwiseAbs().maxCoeff() == 0.0);

  // Conjugate pairing: H vanishes on the paired (k_re, k_im) basis points.
  const FieldDescriptor paired = scalar_field(collinear({0.4, 0.8, 1.2}), with_mass(0.5), 2);
  const VectorXc hp = product_diagonal(build_hamiltonian(paired));
  for (std::size_t m = 0; m < paired.table.size(); ++m)
    for (Index n = 0; n < 2; ++n)
      for (Index e = 0; e < paired.space->factor(2).dim(); ++e)
        for (Index f = 0; f < paired.space->factor(4).dim(); ++f) {
          const std::vector<Index> multi{n, paired.mode_index[m].k_re, e, paired.mode_index[m].k_im, f};
          CHECK(std::abs(hp(paired.space->flat_index(multi))) <= 1e-15);
        }
}

TEST_CASE("S operator") {
  // m = 3: k = 4 gives E_re = 5, kappa = 0 gives E_im = -3.
  const GlobalConstants k = with_mass(3.0);
  const std::vector<Vec3> kr{Vec3(4, 0, 0), Vec3(0, 0, 0)};
  const std::vector<Vec3> kap{Vec3(0, 0, 0), Vec3(4, 0, 0)};
  const FieldDescriptor d = make_field_descriptor(build_mode_table(kr, kap, k, Pairing::Independent), k, {2});
  const OperatorExpr S = build_S_operator(d);
  const MatrixXc dense = to_dense(S);
  CHECK(hermitian_defect(dense) == 0.0);
  CHECK((dense - MatrixXc(dense.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

  const ProductSpace& s = *d.space;
  const Index e5 = *s.factor(2).find_value(5.0);
  const Index e3 = *s.factor(2).find_value(3.0);
  const Index em3 = *s.factor(4).find_value(-3.0);
  const Index em5 = *s.factor(4).find_value(-5.0);
  const std::vector<Index> a{0, 0, e5, 0, em3};
  const std::vector<Index> b{0, 0, e5, 0, em5};
  const std::vector<Index> c{1, 1, e3, 1, em3};
  CHECK(expectation(S, FieldState::basis(d.space, a)).real() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(expectation(S, FieldState::basis(d.space, b)).real() == 0.0);
  CHECK(expectation(S, FieldState::basis(d.space, c)).real() == 0.0);
}

TEST_CASE("dispersion check and its negative control") {
  const GlobalConstants k = with_mass(0.5);
  const auto ks = collinear({0.5, 1.0, 1.7});
  const FieldDescriptor good = scalar_field(ks, k, 3);
  const CheckReport pass = check_dispersion(good, 0);
  CHECK(pass.passed());
  CHECK(pass.value("dispersion_residual") <= 1e-12);

  for (double w : {1.0, 2.5}) {
    ModeTable t = build_mode_table(ks, ks, k, Pairing::Conjugate);
    t.weights[1] = w;
    t.modes[1].E_re += 0.1;
    const FieldDescriptor bad = make_field_descriptor(t, k, {3});
    const CheckReport fail = check_dispersion(bad, 0);
    CHECK_FALSE(fail.passed());
    CHECK(fail.value("dispersion_residual") >= 0.099);
    // delta * weight * max occupation
    CHECK(fail.value("dispersion_residual") == doctest::Approx(0.1 * w * 2.0).epsilon(1e-12));
  }

  // Dim-2 amplitude with only the vacuum occupied is still consistent.
  const FieldDescriptor small = scalar_field(collinear({1.0}), k, 2);
  CHECK(check_dispersion(small, 0).passed());
}

TEST_CASE("field states") {
  const GlobalConstants k = with_mass(0.25);
  const FieldDescriptor d = scalar_field(collinear({0.5, 1.5}), k, 3);
  const std::vector<ModeExcitation> vac{{0, {0}, 1.0}};
  const FieldState v = build_field_state(d, vac);
  CHECK(v.term_count() == 1);
  CHECK(norm(apply(build_field_operator(d, 0), v)) == 0.0);

  const FieldState u = uniform_field_state(d, {1});
  CHECK(u.term_count() == 2);
  CHECK(inner(u, u).real() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(expectation(build_S_operator(d), u)) <= 1e-12);

  const std::vector<ModeExcitation> overflow{{0, {3}, 1.0}};
  CHECK_THROWS_AS(build_field_state(d, overflow), DomainError);
  const std::vector<ModeExcitation> wrong_mode{{5, {0}, 1.0}};
  CHECK_THROWS_AS(build_field_state(d, wrong_mode), StructuralError);
  const std::vector<ModeExcitation> wrong_arity{{0, {0, 0}, 1.0}};
  CHECK_THROWS_AS(build_field_state(d, wrong_arity), StructuralError);
}

TEST_CASE("property: randomized tables") {
  Rng rng(31337);
  const double masses[] = {0.0, 0.5, 1.0};
  for (int trial = 0; trial < 30; ++trial) {
    const GlobalConstants k = with_mass(masses[rng.index(3)], rng.uniform(0.5, 2.0));
    const auto ks = random_momenta(rng, 5);
    ModeTable t = build_mode_table(ks, ks, k, Pairing::Conjugate);
    for (auto& w : t.weights) w = rng.uniform(0.5, 2.0);
    const Index dim = 2 + rng.index(3);
    const FieldDescriptor d = make_field_descriptor(t, k, {dim});

    CHECK(check_dispersion(d, 0).value("dispersion_residual") <= 1e-12);
    for (const auto& m : d.table.modes) {
      CHECK(m.E_re >= k.mass * k.c * k.c);
      CHECK(m.E_im <= -k.mass * k.c * k.c);
    }

    const OperatorExpr phi = build_field_operator(d, 0);
    const OperatorExpr H = build_hamiltonian(d);
    CHECK(op_norm_residual(commutator(phi, H), OperatorExpr::zero(d.space)).value <= 1e-12);

    const CheckReport z = check_zero_energy(d, 10, 1000 + static_cast<std::uint64_t>(trial));
    CHECK(z.passed());
  }
}

TEST_CASE("property: independent tables keep the dispersion residual") {
  Rng rng(4242);
  for (int trial = 0; trial < 10; ++trial) {
    const GlobalConstants k = with_mass(rng.uniform(0, 1));
    const auto kr = random_momenta(rng, 3);
    const auto kap = random_momenta(rng, 3);
    const FieldDescriptor d = make_field_descriptor(build_mode_table(kr, kap, k, Pairing::Independent), k, {2});
    CHECK(check_dispersion(d, 0).passed());
  }
}
