#ifndef OPFIELD_GAUGE_HPP
#define OPFIELD_GAUGE_HPP

#include <array>
#include <string>
#include <vector>

#include "opfield/field.hpp"
#include "opfield/report.hpp"

namespace opfield {

/// (s / c_flavor, k_x, k_y, k_z) as operators on the shared dyadic factors.
/// Real flavor uses s_re and c; imaginary flavor uses s_im, c_im = i*c and
/// the imaginary momenta i*kappa.
struct QuadriVectorOps {
  Flavor flavor = Flavor::Real;
  OperatorExpr time_component;
  std::array<OperatorExpr, 3> spatial_components;
};

QuadriVectorOps build_quadri_vector(const FieldDescriptor& desc, Flavor flavor);

using MetricSignature = std::array<double, 4>;

inline constexpr MetricSignature MINKOWSKI_SIGNATURE{+1.0, -1.0, -1.0, -1.0};

/// Component order of the electromagnetic amplitude factors.
inline const std::array<std::string, 4> EM_COMPONENT_LABELS{"amp_s", "amp_t1", "amp_t2", "amp_l"};

/// Four-component field with amplitude factors labeled per EM_COMPONENT_LABELS.
FieldDescriptor make_em_field_descriptor(ModeTable table, const GlobalConstants& constants,
                                         const std::array<Index, 4>& fock_dims);

struct GaugeConstraint {
  FieldDescriptor desc;
  MetricSignature signature = MINKOWSKI_SIGNATURE;
  Flavor flavor = Flavor::Real;
  /// sum_mu signature_mu * K_mu (x) a^mu, each a^mu acting on one amplitude factor.
  OperatorExpr op;
};

/// Requires a four-component field. With the default signature and a mode
/// k = (0, 0, k), E_re = k c, the constraint restricted to that mode reads
/// k (a^s - a^l).
GaugeConstraint build_gauge_constraint(const FieldDescriptor& desc, const MetricSignature& signature = MINKOWSKI_SIGNATURE,
                                       Flavor flavor = Flavor::Real);

inline constexpr double GAUGE_TOLERANCE = 1e-12;

/// ||C psi|| / max(||psi||, eps); passes iff within 1e-12.
CheckReport check_physical_state(const GaugeConstraint& gc, const FieldState& state);

inline constexpr double NULL_SPACE_SV_TOLERANCE = 1e-10;

struct NullSpaceResult {
  /// Amplitude factors on which the mode-restricted constraint acts.
  std::vector<std::string> active_labels;
  std::vector<Index> active_dims;
  /// Amplitude factors on which it acts as the identity.
  std::vector<std::string> spectator_labels;
  Index spectator_dim = 1;

  MatrixXc sector_matrix;
  Eigen::VectorXd singular_values;
  /// Orthonormal columns spanning the null space of sector_matrix.
  MatrixXc null_basis;
  Index null_dim = 0;
  /// null_dim times the spectator dimension.
  Index full_null_dim = 0;
  /// Product number states of the active factors lying in the null space,
  /// one occupation per active factor.
  std::vector<std::vector<Index>> null_number_states;
  /// Zero constraint in this sector (e.g. k = 0).
  bool degenerate = false;
};

/// Restricts the constraint to one mode's dyadic sector and computes its null
/// space by SVD, singular values <= 1e-10 counted as zero.
NullSpaceResult gauge_null_space(const GaugeConstraint& gc, std::size_t mode, Index cap = DEFAULT_DENSE_CAP);

/// Report form of gauge_null_space: the residual is max ||A v|| over the null
/// basis; the classification is recorded as metrics and notes.
CheckReport null_space_report(const GaugeConstraint& gc, std::size_t mode);

}  // namespace opfield

#endif  // OPFIELD_GAUGE_HPP
