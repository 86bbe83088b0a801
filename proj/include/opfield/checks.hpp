#ifndef OPFIELD_CHECKS_HPP
#define OPFIELD_CHECKS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opfield/correspondence.hpp"
#include "opfield/field.hpp"
#include "opfield/gauge.hpp"
#include "opfield/report.hpp"
#include "opfield/spaces.hpp"

namespace opfield {

/// Commutator [a, b] evaluated exactly, reading every nonzero entry as
/// +-sqrt(n) for the integer n it is the correctly rounded square root of.
/// Empty when an entry is not of that form or the result is not integer.
std::optional<Eigen::MatrixX<std::int64_t>> exact_integer_commutator(const LocalOperator& a, const LocalOperator& b);

/// Exact truncated ladder algebra: [a, a^dag] = I - dim |dim-1><dim-1| and
/// [q, p] = i hbar (I - dim |dim-1><dim-1|).
CheckReport check_truncated_ccr(Index dim, const GlobalConstants& constants);

/// |<[t, s]> + i hbar| / hbar for a normalized Gaussian centred on the time
/// grid with the given number of grid points per standard deviation.
CheckReport check_weak_ccr(const GridSpec& time_spec, const GlobalConstants& constants, double points_per_sigma = 6.0,
                           double tolerance = 1e-6);

/// Imaginary-flavor r and k on the grid: anti-Hermitian defects (<= 1e-12)
/// and the largest eigenvalue real part (<= 1e-10).
CheckReport check_anti_selfadjoint(const GridSpec& spec, const GlobalConstants& constants);

/// k_im^2 / (2m) on an imaginary-flavor grid.
LocalOperator imaginary_kinetic_hamiltonian(const GridSpec& spec, const GlobalConstants& constants);

/// k^2 / (2m) on a real-flavor grid.
LocalOperator real_kinetic_hamiltonian(const GridSpec& spec, const GlobalConstants& constants);

enum class SpectrumClaim { Nonpositive, Nonnegative, PurelyImaginary, Real };

/// Checks a sign or reality claim on the spectrum of a local operator.
CheckReport check_spectrum(const LocalOperator& op, SpectrumClaim claim, double tolerance = 1e-10);

/// max |<psi|S|psi>| over seeded random superpositions of the table's modes
/// with random in-range occupations.
CheckReport check_zero_energy(const FieldDescriptor& desc, int n_states, std::uint64_t seed, double tolerance = 1e-12);

/// Uniform superposition over the time grid localized at grid index t0:
/// idempotence, support, and the 1/sqrt(T) norm ratio.
CheckReport check_localization(const GridSpec& time_spec, Index t0_index, double tolerance = 1e-12);

/// Hermiticity of sym(ops) when every input is Hermitian, and invariance
/// under reversing the input order; dense comparisons.
CheckReport check_symmetrization(const std::vector<OperatorExpr>& ops, double tolerance = 1e-12);

}  // namespace opfield

#endif  // OPFIELD_CHECKS_HPP
