#include <doctest.h>

#include <cmath>

#include "../support/oracle.hpp"
#include "opfield/gauge.hpp"

using namespace opfield;
using opfield::testing::kron_all;

namespace {

GlobalConstants massless(double c = 1.0) {
  GlobalConstants k;
  k.mass = 0.0;
  k.c = c;
  return k;
}

/// One photon mode along z, k_mu = (k, 0, 0, k).
FieldDescriptor z_mode(double k, const std::array<Index, 4>& dims, double c = 1.0) {
  const std::vector<Vec3> ks{Vec3(0, 0, k)};
  const GlobalConstants kc = massless(c);
  return make_em_field_descriptor(build_mode_table(ks, ks, kc, Pairing::Conjugate), kc, dims);
}

FieldState number_state(const FieldDescriptor& d, std::vector<Index> occ) {
  const std::vector<ModeExcitation> ex{{0, std::move(occ), 1.0}};
  return build_field_state(d, ex);
}

double residual(const GaugeConstraint& gc, const FieldState& s) {
  return check_physical_state(gc, s).value("gauge_residual");
}

MatrixXc lowering(Index d) {
  MatrixXc a = MatrixXc::Zero(d, d);
  for (Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

}  // namespace

TEST_CASE("quadri-vector operators") {
  const std::vector<Vec3> ks{Vec3(1, 2, 2), Vec3(0, 0, 1)};
  const GlobalConstants k = massless(2.0);
  const FieldDescriptor d = make_em_field_descriptor(build_mode_table(ks, ks, k, Pairing::Conjugate), k, {2, 2, 2, 2});
  for (Flavor f : {Flavor::Real, Flavor::Imaginary}) {
    const QuadriVectorOps q = build_quadri_vector(d, f);
    CHECK(q.time_component.is_diagonal());
    for (const auto& s : q.spatial_components) CHECK(s.is_diagonal());
    const MatrixXc t = to_dense(q.time_component);
    if (f == Flavor::Real) {
      CHECK(t.imag().cwiseAbs().maxCoeff() == 0.0);
      CHECK(hermitian_defect(t) == 0.0);
    } else {
      CHECK(t.real().cwiseAbs().maxCoeff() == 0.0);
      CHECK(t.imag().cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("gauge constraint restricted to one mode") {
  for (double k : {1.0, 0.5, 3.0}) {
    const FieldDescriptor d = z_mode(k, {3, 2, 2, 4});
    const GaugeConstraint gc = build_gauge_constraint(d);
    // Single mode: the dyadic factors are one-dimensional.
    const MatrixXc I2 = MatrixXc::Identity(2, 2);
    const MatrixXc want = k * (kron_all(std::vector<MatrixXc>{lowering(3), I2, I2, MatrixXc::Identity(4, 4)}) -
                               kron_all(std::vector<MatrixXc>{MatrixXc::Identity(3, 3), I2, I2, lowering(4)}));
    CHECK((to_dense(gc.op) - want).cwiseAbs().maxCoeff() <= 1e-15);
  }
  const std::vector<Vec3> ks{Vec3(0, 0, 1)};
  const FieldDescriptor scalar = make_field_descriptor(build_mode_table(ks, ks, massless(), Pairing::Conjugate), massless(), {2});
  CHECK_THROWS_AS(build_gauge_constraint(scalar), StructuralError);
}

TEST_CASE("physical state examples") {
  const FieldDescriptor d = z_mode(1.0, {3, 4, 4, 3});
  const GaugeConstraint gc = build_gauge_constraint(d);

  const CheckReport vac = check_physical_state(gc, number_state(d, {0, 0, 0, 0}));
  CHECK(vac.passed());
  CHECK(vac.value("gauge_residual") == 0.0);

  CHECK(residual(gc, number_state(d, {1, 0, 0, 0})) == doctest::Approx(1.0).epsilon(1e-15));
  const CheckReport two = check_physical_state(gc, number_state(d, {2, 0, 0, 0}));
  CHECK_FALSE(two.passed());
  CHECK(two.value("gauge_residual") == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  // Transverse occupation leaves every residual unchanged.
  CHECK(residual(gc, number_state(d, {0, 3, 0, 0})) == 0.0);
  CHECK(residual(gc, number_state(d, {2, 3, 1, 0})) == residual(gc, number_state(d, {2, 0, 0, 0})));

  const double h = 1.0 / std::sqrt(2.0);
  const std::vector<ModeExcitation> sym{{0, {1, 0, 0, 0}, h}, {0, {0, 0, 0, 1}, h}};
  const CheckReport ent = check_physical_state(gc, build_field_state(d, sym));
  CHECK(ent.passed());
  CHECK(ent.value("gauge_residual") <= 1e-12);
  const std::vector<ModeExcitation> anti{{0, {1, 0, 0, 0}, h}, {0, {0, 0, 0, 1}, -h}};
  CHECK_FALSE(check_physical_state(gc, build_field_state(d, anti)).passed());

  const FieldDescriptor other = z_mode(1.0, {2, 2, 2, 2});
  CHECK_THROWS_AS(check_physical_state(gc, number_state(other, {0, 0, 0, 0})), StructuralError);
}

TEST_CASE("null space") {
  const FieldDescriptor d2 = z_mode(1.0, {2, 2, 2, 2});
  const NullSpaceResult n2 = gauge_null_space(build_gauge_constraint(d2), 0);
  CHECK_FALSE(n2.degenerate);
  CHECK(n2.active_labels == std::vector<std::string>{"amp_s", "amp_l"});
  CHECK(n2.null_dim == 2);
  REQUIRE(n2.null_number_states.size() == 1);
  CHECK(n2.null_number_states[0] == std::vector<Index>{0, 0});
  CHECK((n2.null_basis.adjoint() * n2.null_basis - MatrixXc::Identity(2, 2)).norm() <= 1e-12);
  CHECK((n2.sector_matrix * n2.null_basis).norm() <= 1e-12);

  // Hand check of the 4x4 sector: a (x) I - I (x) a on |s,l>.
  MatrixXc hand = MatrixXc::Zero(4, 4);
  hand(0, 2) = 1.0;   // |1,0> -> |0,0>
  hand(0, 1) = -1.0;  // |0,1> -> -|0,0>
  hand(1, 3) = 1.0;   // |1,1> -> |0,1>
  hand(2, 3) = -1.0;  // |1,1> -> -|1,0>
  CHECK((n2.sector_matrix - hand).cwiseAbs().maxCoeff() <= 1e-15);

  const NullSpaceResult n3 = gauge_null_space(build_gauge_constraint(z_mode(1.0, {3, 2, 2, 3})), 0);
  CHECK(n3.spectator_dim == 4);
  CHECK(n3.full_null_dim == 4 * n3.null_dim);
  bool has00 = false, has11 = false;
  for (const auto& s : n3.null_number_states) {
    has00 = has00 || s == std::vector<Index>{0, 0};
    has11 = has11 || s == std::vector<Index>{1, 1};
  }
  CHECK(has00);
  CHECK_FALSE(has11);

  const FieldDescriptor zero = z_mode(0.0, {2, 2, 2, 2});
  const NullSpaceResult nz = gauge_null_space(build_gauge_constraint(zero), 0);
  CHECK(nz.degenerate);
  CHECK(nz.full_null_dim == zero.space->total_dim());
  CHECK(null_space_report(build_gauge_constraint(zero), 0).status == CheckStatus::Degenerate);

  CHECK(null_space_report(build_gauge_constraint(d2), 0).passed());
}

TEST_CASE("exhaustive product number state scan") {
  for (Index ds = 2; ds <= 6; ++ds)
    for (Index dl = 2; dl <= 6; ++dl) {
      const FieldDescriptor d = z_mode(1.0, {ds, 6, 6, dl});
      const GaugeConstraint gc = build_gauge_constraint(d);
      for (Index s = 0; s < ds; ++s)
        for (Index l = 0; l < dl; ++l) {
          const double base = residual(gc, number_state(d, {s, 0, 0, l}));
          CHECK((base == 0.0) == (s == 0 && l == 0));
          // Expected norm of sqrt(s)|s-1,l> - sqrt(l)|s,l-1>.
          CHECK(base == doctest::Approx(std::sqrt(static_cast<double>(s + l))).epsilon(1e-14));
          for (Index t1 = 0; t1 < 6; t1 += 5)
            for (Index t2 = 0; t2 < 6; ++t2) CHECK(residual(gc, number_state(d, {s, t1, t2, l})) == base);
        }
    }
}

TEST_CASE("null space dimension matches truncation") {
  // Recorded observation for d x d: null dimension equals d.
  for (Index dim = 2; dim <= 6; ++dim) {
    const NullSpaceResult ns = gauge_null_space(build_gauge_constraint(z_mode(1.0, {dim, 2, 2, dim})), 0);
    CHECK(ns.null_dim == dim);
    CHECK(ns.null_number_states.size() == 1);
  }
}
