#ifndef OPFIELD_CORRESPONDENCE_HPP
#define OPFIELD_CORRESPONDENCE_HPP

#include <span>
#include <string>
#include <vector>

#include "opfield/field.hpp"
#include "opfield/report.hpp"

namespace opfield {

// Quantum-mechanical constraint ---------------------------------------------

struct QmConstraintOptions {
  Index time_points = 64;
  double tolerance = 1e-8;
};

/// Builds psi(x, t) = phi(x) exp(E t / (i hbar)) with phi the eigenvector of
/// `hamiltonian` whose eigenvalue is nearest E, then evaluates
/// ||(s (x) I - I (x) H) psi|| / ||psi|| on the time (x) position product.
/// The time grid spans one period of exp(E t / (i hbar)), so E is exactly
/// resolvable. An E outside the Hamiltonian's spectral band fails with a
/// band_excess residual.
CheckReport qm_constraint_residual(const FactorSpace& position, const LocalOperator& hamiltonian, double E,
                                   const GlobalConstants& constants, const QmConstraintOptions& options = {});

// Classical correspondence --------------------------------------------------

struct ClassicalModeAmplitude {
  ModePoint mode;
  Scalar A{0.0, 0.0};
};

struct SpacetimeGrid {
  std::vector<Vec3> r_points;
  std::vector<double> t_points;

  /// Collinear positions along `axis` times a time grid.
  static SpacetimeGrid uniform(const GridSpec& r_spec, const GridSpec& t_spec, const Vec3& axis = Vec3::UnitX());
  void validate() const;
};

/// sum over modes of A e^{-k.r/(i hbar)} e^{+E t/(i hbar)} + A* e^{+k.r/(i hbar)} e^{-E t/(i hbar)},
/// indexed (r, t).
MatrixXc classical_field_eval(std::span<const ClassicalModeAmplitude> amps, const SpacetimeGrid& grid,
                              const GlobalConstants& constants);

/// Maps each term of a conjugate-paired field state through the mode-vector
/// dictionary and evaluates it on the grid, indexed (r, t):
///   amplitude factors  -> A (the term coefficient times the basis entries)
///   |k_re>  -> e^{-k.r/(i hbar)},      |E_re> -> e^{E_re t/(i hbar)}
///   |i kappa> -> e^{-(i kappa).(i r)/(i hbar)}, |E_im> -> e^{E_im t/(i hbar)}, carrying A*.
/// Every factor vector must be a multiple of a single basis vector.
MatrixXc quantum_field_eval(const FieldDescriptor& desc, const FieldState& state, const SpacetimeGrid& grid);

/// Amplitudes read off a field state's terms, in term order.
std::vector<ClassicalModeAmplitude> amplitudes_from_state(const FieldDescriptor& desc, const FieldState& state);

inline constexpr double CORRESPONDENCE_TOLERANCE = 1e-10;

/// Max-norm deviation between quantum_field_eval(state) and
/// classical_field_eval(amps); also records the classical imaginary residue.
CheckReport correspondence_check(const FieldDescriptor& desc, const FieldState& state,
                                 std::span<const ClassicalModeAmplitude> amps, const SpacetimeGrid& grid);

// Time localization ---------------------------------------------------------

/// Re-expresses a spectral energy factor on a time grid through
/// exp(E t / (i hbar)) / sqrt(T). The new factor is labeled `time_label`.
FieldState to_time_representation(const FieldState& state, const std::string& energy_label, const GridSpec& time_spec,
                                  const std::string& time_label, const GlobalConstants& constants);

/// Applies |t0><t0| on every listed time-grid factor.
FieldState localize_at_time(const FieldState& state, double t0, std::span<const std::string> labels);

// Symmetrized products ------------------------------------------------------

inline constexpr std::size_t DEFAULT_SYMMETRIZATION_CAP = 5;

/// (1/n!) sum over permutations of the composed chain.
OperatorExpr symmetrized_product(std::span<const OperatorExpr> ops, std::size_t max_factors = DEFAULT_SYMMETRIZATION_CAP);

}  // namespace opfield

#endif  // OPFIELD_CORRESPONDENCE_HPP
