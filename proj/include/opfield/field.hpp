#ifndef OPFIELD_FIELD_HPP
#define OPFIELD_FIELD_HPP

#include <span>
#include <string>
#include <vector>

#include "opfield/report.hpp"
#include "opfield/spaces.hpp"
#include "opfield/tensor.hpp"

namespace opfield {

using Vec3 = Eigen::Vector3d;

enum class Pairing {
  /// Every real momentum combined with every imaginary momentum.
  Independent,
  /// kappa_j = k_re_j pointwise, so k_im = i * k_re.
  Conjugate,
};

/// Positive branch +sqrt(|k|^2 c^2 + m^2 c^4).
double positive_branch_energy(const Vec3& k_re, const GlobalConstants& constants);

/// Negative branch -sqrt(k_im^2 c_im^2 + m^2 c_im^4) evaluated with
/// k_im = i*kappa and c_im = i*c; the radicand is real and nonnegative.
double negative_branch_energy(const Vec3& kappa, const GlobalConstants& constants);

/// One field mode. The imaginary momentum is i*kappa.
struct ModePoint {
  Vec3 k_re = Vec3::Zero();
  Vec3 kappa = Vec3::Zero();
  double E_re = 0.0;
  double E_im = 0.0;
};

ModePoint make_mode(const Vec3& k_re, const Vec3& kappa, const GlobalConstants& constants);

struct ModeTable {
  std::vector<ModePoint> modes;
  std::vector<double> weights;

  std::size_t size() const { return modes.size(); }
  /// Largest deviation of any stored energy from its dispersion branch.
  double max_energy_defect(const GlobalConstants& constants) const;
};

ModeTable build_mode_table(std::span<const Vec3> k_re_points, std::span<const Vec3> kappa_points,
                           const GlobalConstants& constants, Pairing pairing);

/// Basis indices of one mode in the four dyadic factors.
struct ModeIndex {
  Index k_re = 0;
  Index E_re = 0;
  Index k_im = 0;
  Index E_im = 0;
};

/// Product space of C amplitude factors followed by the shared dyadic
/// factors k_re, E_re, k_im, E_im, together with the mode table that
/// labels them.
struct FieldDescriptor {
  SpacePtr space;
  ModeTable table;
  GlobalConstants constants;
  std::vector<FockOperators> amplitudes;
  /// Distinct momenta, one per basis vector of the k_re / k_im factors.
  std::vector<Vec3> k_re_points;
  std::vector<Vec3> kappa_points;
  std::vector<ModeIndex> mode_index;

  std::size_t n_components() const { return amplitudes.size(); }
  const std::string& amplitude_label(std::size_t component) const { return amplitudes.at(component).space.label(); }
};

inline const std::string K_RE_LABEL = "k_re";
inline const std::string E_RE_LABEL = "E_re";
inline const std::string K_IM_LABEL = "k_im";
inline const std::string E_IM_LABEL = "E_im";

/// Builds the field's product space. Momentum factors hold one basis vector
/// per distinct momentum (basis value |k|, or i|kappa| for k_im); energy
/// factors hold one basis vector per distinct stored energy, deduplicated at
/// 1e-12. Amplitude labels default to amp0, amp1, ...
FieldDescriptor make_field_descriptor(ModeTable table, const GlobalConstants& constants,
                                      const std::vector<Index>& fock_dims,
                                      std::vector<std::string> amplitude_labels = {});

/// Sum over modes of weight * n_component (x) |k_re><k_re| (x) |E_re><E_re|
/// (x) |k_im><k_im| (x) |E_im><E_im|, one term per mode.
OperatorExpr build_field_operator(const FieldDescriptor& desc, std::size_t component);

/// Diagonal on the momentum factors: E(k) on k_re plus the negative branch on
/// k_im, both computed from the momenta themselves.
OperatorExpr build_hamiltonian(const FieldDescriptor& desc);

/// s_re + s_im: diag of the energy factors' basis values.
OperatorExpr build_S_operator(const FieldDescriptor& desc);

inline constexpr double DISPERSION_TOLERANCE = 1e-12;

/// Residual between H*phi and S*phi; passes iff within 1e-12.
CheckReport check_dispersion(const FieldDescriptor& desc, std::size_t component,
                             const ResidualOptions& options = {});

struct ModeExcitation {
  std::size_t mode = 0;
  /// Occupation per component.
  std::vector<Index> occupation;
  Scalar coeff{1.0, 0.0};
};

/// Sum of coeff * |n_1 .. n_C> (x) |k_re> (x) |E_re> (x) |k_im> (x) |E_im>.
FieldState build_field_state(const FieldDescriptor& desc, std::span<const ModeExcitation> excitations);

/// Unit-coefficient superposition of every mode at the given occupation.
FieldState uniform_field_state(const FieldDescriptor& desc, const std::vector<Index>& occupation);

}  // namespace opfield

#endif  // OPFIELD_FIELD_HPP
