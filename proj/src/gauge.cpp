#include "opfield/gauge.hpp"

#include <chrono>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

namespace opfield {

namespace {

VectorXc momentum_component(const std::vector<Vec3>& points, int axis, Scalar scale) {
  VectorXc v(static_cast<Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) v(static_cast<Index>(i)) = scale * points[i](axis);
  return v;
}

MatrixXc kron(const MatrixXc& a, const MatrixXc& b) {
  MatrixXc out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

FieldDescriptor make_em_field_descriptor(ModeTable table, const GlobalConstants& constants,
                                         const std::array<Index, 4>& fock_dims) {
  return make_field_descriptor(std::move(table), constants, {fock_dims.begin(), fock_dims.end()},
                               {EM_COMPONENT_LABELS.begin(), EM_COMPONENT_LABELS.end()});
}

QuadriVectorOps build_quadri_vector(const FieldDescriptor& desc, Flavor flavor) {
  const ProductSpace& space = *desc.space;
  const bool real = flavor == Flavor::Real;
  const std::string& e_label = real ? E_RE_LABEL : E_IM_LABEL;
  const std::string& k_label = real ? K_RE_LABEL : K_IM_LABEL;
  const Scalar c_flavor = real ? Scalar(desc.constants.c) : desc.constants.c_im();

  const VectorXc energies = space.factor(space.index_of(e_label)).basis_values();
  const VectorXc k0 = energies / c_flavor;
  const unsigned time_flags = real ? kHermitian : kAntiHermitian;

  QuadriVectorOps q{flavor, OperatorExpr::local(desc.space, LocalOperator::diagonal(e_label, k0, time_flags)),
                    {OperatorExpr(desc.space), OperatorExpr(desc.space), OperatorExpr(desc.space)}};
  for (int axis = 0; axis < 3; ++axis) {
    const VectorXc comp = real ? momentum_component(desc.k_re_points, axis, 1.0)
                               : momentum_component(desc.kappa_points, axis, I_UNIT);
    q.spatial_components[static_cast<std::size_t>(axis)] =
        OperatorExpr::local(desc.space, LocalOperator::diagonal(k_label, comp, time_flags));
  }
  return q;
}

GaugeConstraint build_gauge_constraint(const FieldDescriptor& desc, const MetricSignature& signature, Flavor flavor) {
  if (desc.n_components() != 4)
    throw StructuralError("gauge constraint needs a 4-component field, got " + std::to_string(desc.n_components()));
  if (desc.table.size() == 0) throw DomainError("gauge constraint needs a nonempty mode table");

  const QuadriVectorOps k = build_quadri_vector(desc, flavor);
  OperatorExpr op(desc.space);
  for (std::size_t mu = 0; mu < 4; ++mu) {
    const OperatorExpr& k_mu = mu == 0 ? k.time_component : k.spatial_components[mu - 1];
    const OperatorExpr a_mu = OperatorExpr::local(desc.space, desc.amplitudes[mu].a);
    op += signature[mu] * compose(k_mu, a_mu);
  }
  return GaugeConstraint{desc, signature, flavor, std::move(op)};
}

CheckReport check_physical_state(const GaugeConstraint& gc, const FieldState& state) {
  const auto start = std::chrono::steady_clock::now();
  require_same_space(gc.op.space(), state.space(), "check_physical_state");
  CheckReport report;
  report.name = "gauge";
  report.tolerance = GAUGE_TOLERANCE;
  const double state_norm = norm(state);
  const double residual = image_norm(gc.op, state);
  report.add_residual("gauge_residual", residual / std::max(state_norm, std::numeric_limits<double>::min()));
  report.add_metric("state_norm", state_norm);
  report.add_note("flavor", gc.flavor == Flavor::Real ? "real" : "imaginary");
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  report.finalize();
  return report;
}

NullSpaceResult gauge_null_space(const GaugeConstraint& gc, std::size_t mode, Index cap) {
  const FieldDescriptor& desc = gc.desc;
  if (mode >= desc.mode_index.size()) throw StructuralError("mode " + std::to_string(mode) + " out of range");
  const ProductSpace& space = *desc.space;
  const std::size_t n_amp = desc.n_components();
  const ModeIndex& mi = desc.mode_index[mode];
  const std::array<std::pair<std::size_t, Index>, 4> sector{{
      {space.index_of(K_RE_LABEL), mi.k_re},
      {space.index_of(E_RE_LABEL), mi.E_re},
      {space.index_of(K_IM_LABEL), mi.k_im},
      {space.index_of(E_IM_LABEL), mi.E_im},
  }};

  struct Restricted {
    Scalar weight;
    const OperatorTerm* term;
  };
  std::vector<Restricted> restricted;
  std::vector<bool> active(n_amp, false);
  for (const auto& term : gc.op.terms()) {
    Scalar w = term.coeff;
    for (const auto& [f, idx] : sector) {
      auto it = term.factors.find(f);
      if (it == term.factors.end()) continue;
      if (!it->second.is_structurally_diagonal())
        throw StructuralError("constraint is not diagonal on dyadic factor '" + it->second.label() + "'");
      w *= it->second.matrix().coeff(idx, idx);
    }
    if (w == Scalar(0.0)) continue;
    restricted.push_back({w, &term});
    for (const auto& [f, op] : term.factors)
      if (f < n_amp) active[f] = true;
  }

  NullSpaceResult res;
  res.degenerate = restricted.empty();
  if (res.degenerate) active.assign(n_amp, true);

  Index active_dim = 1;
  for (std::size_t f = 0; f < n_amp; ++f) {
    const FactorSpace& fs = space.factor(f);
    if (active[f]) {
      res.active_labels.push_back(fs.label());
      res.active_dims.push_back(fs.dim());
      active_dim *= fs.dim();
    } else {
      res.spectator_labels.push_back(fs.label());
      res.spectator_dim *= fs.dim();
    }
  }
  if (active_dim > cap)
    throw CapacityError("mode amplitude sector of dimension " + std::to_string(active_dim) + " exceeds cap " +
                        std::to_string(cap));

  res.sector_matrix = MatrixXc::Zero(active_dim, active_dim);
  for (const auto& r : restricted) {
    MatrixXc m = MatrixXc::Identity(1, 1);
    for (std::size_t f = 0; f < n_amp; ++f) {
      if (!active[f]) continue;
      auto it = r.term->factors.find(f);
      m = kron(m, it == r.term->factors.end() ? MatrixXc(MatrixXc::Identity(space.factor(f).dim(), space.factor(f).dim()))
                                              : it->second.dense());
    }
    res.sector_matrix += r.weight * m;
  }

  Eigen::JacobiSVD<MatrixXc> svd(res.sector_matrix, Eigen::ComputeFullV);
  res.singular_values = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < res.singular_values.size(); ++i)
    if (res.singular_values(i) > NULL_SPACE_SV_TOLERANCE) ++rank;
  res.null_dim = active_dim - rank;
  res.null_basis = svd.matrixV().rightCols(res.null_dim);
  res.full_null_dim = res.null_dim * res.spectator_dim;

  // A number state e_j lies in the null space iff its projection onto the
  // null basis has unit norm.
  for (Index j = 0; j < active_dim; ++j) {
    const double proj = res.null_basis.row(j).norm();
    if (std::abs(proj - 1.0) <= NULL_SPACE_SV_TOLERANCE) {
      std::vector<Index> occ(res.active_dims.size());
      Index rem = j;
      for (std::size_t f = res.active_dims.size(); f-- > 0;) {
        occ[f] = rem % res.active_dims[f];
        rem /= res.active_dims[f];
      }
      res.null_number_states.push_back(std::move(occ));
    }
  }
  return res;
}

CheckReport null_space_report(const GaugeConstraint& gc, std::size_t mode) {
  const auto start = std::chrono::steady_clock::now();
  const NullSpaceResult ns = gauge_null_space(gc, mode);
  CheckReport report;
  report.name = "null_space";
  report.tolerance = NULL_SPACE_SV_TOLERANCE;
  const double basis_residual = ns.null_dim == 0 ? 0.0 : max_abs_entry(ns.sector_matrix * ns.null_basis);
  report.add_residual("null_basis_residual", basis_residual);
  report.add_metric("mode", static_cast<double>(mode));
  report.add_metric("null_dim", static_cast<double>(ns.null_dim));
  report.add_metric("full_null_dim", static_cast<double>(ns.full_null_dim));
  report.add_metric("null_number_state_count", static_cast<double>(ns.null_number_states.size()));
  report.add_series("singular_values", std::vector<double>(ns.singular_values.data(),
                                                           ns.singular_values.data() + ns.singular_values.size()));
  std::ostringstream active;
  for (std::size_t i = 0; i < ns.active_labels.size(); ++i)
    active << (i ? "," : "") << ns.active_labels[i] << ":" << ns.active_dims[i];
  report.add_note("active_factors", active.str());
  std::ostringstream states;
  for (std::size_t i = 0; i < ns.null_number_states.size(); ++i) {
    states << (i ? ";" : "") << "|";
    for (std::size_t f = 0; f < ns.null_number_states[i].size(); ++f)
      states << (f ? "," : "") << ns.null_number_states[i][f];
    states << ">";
  }
  report.add_note("null_number_states", states.str());
  report.degenerate = ns.degenerate;
  if (ns.degenerate) report.add_note("degeneracy", "constraint vanishes in this mode sector");
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  report.finalize();
  return report;
}

}  // namespace opfield
