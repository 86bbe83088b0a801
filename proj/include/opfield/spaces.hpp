#ifndef OPFIELD_SPACES_HPP
#define OPFIELD_SPACES_HPP

#include <string>
#include <utility>

#include "opfield/tensor.hpp"

namespace opfield {

/// hbar and c default to 1; mass is per field.
struct GlobalConstants {
  double hbar = 1.0;
  double c = 1.0;
  double mass = 0.0;

  /// Speed of light in the imaginary sector, i*c.
  Scalar c_im() const { return I_UNIT * c; }
  void validate() const;
};

/// Truncated amplitude space with its ladder, number, and quadrature operators.
struct FockOperators {
  FactorSpace space;
  LocalOperator a;
  LocalOperator a_dag;
  LocalOperator n;
  LocalOperator q;
  LocalOperator p;
};

/// a|n> = sqrt(n)|n-1>, a^dag|n> = sqrt(n+1)|n+1> truncated at dim-1,
/// q = (a + a^dag) sqrt(hbar/2), p = (a - a^dag) sqrt(hbar/2) / i.
FockOperators make_fock(Index dim, const std::string& label, const GlobalConstants& constants = {});

struct PositionGrid {
  FactorSpace space;
  LocalOperator r;
};

/// Real flavor: basis values are the grid points. Imaginary flavor: basis
/// values are i*u for grid coordinates u. r is diagonal in either case.
PositionGrid make_position_grid(const GridSpec& spec, Flavor flavor, const std::string& label);

/// Real antisymmetric first-derivative matrix on a grid: Fourier spectral for
/// periodic grids, central differences otherwise.
Eigen::MatrixXd differentiation_matrix(const GridSpec& spec);

/// Real flavor: k = -i hbar D. Imaginary flavor: with r_im = i u the
/// derivative picks up 1/i, giving the real antisymmetric k_im = -hbar D_u.
LocalOperator make_momentum_operator(const FactorSpace& grid_factor, const GlobalConstants& constants = {});

struct TimeEnergy {
  FactorSpace time;
  LocalOperator t;
  /// Energy operator +i hbar d/dt on the time factor.
  LocalOperator s;
  /// Spectral energy factor: one basis value per resolvable energy.
  FactorSpace energy;
  /// diag(E) on the energy factor.
  LocalOperator s_diag;
};

/// Energies resolvable on a periodic time grid, ascending. The vector
/// exp(E t / (i hbar)) is an eigenvector of +i hbar D_t with eigenvalue E.
Eigen::VectorXd resolvable_energies(const GridSpec& time_spec, const GlobalConstants& constants);

TimeEnergy make_time_energy(const GridSpec& spec, const std::pair<std::string, std::string>& labels,
                            const GlobalConstants& constants = {});

/// Change of representation from spectral energy labels to the time grid:
/// column j holds exp(E_j t / (i hbar)) / sqrt(T) sampled at the time points.
MatrixXc energy_to_time_map(const FactorSpace& time, const Eigen::VectorXd& energies,
                            const GlobalConstants& constants = {});

struct SpectrumBounds {
  double min_real = 0.0;
  double max_real = 0.0;
  double max_abs_imag = 0.0;
};

inline constexpr Index SPECTRUM_CAP = 2048;

/// Eigenvalue summary of the dense matrix. Hermitian input goes through the
/// self-adjoint solver, anything else through the general complex one.
SpectrumBounds spectrum_bounds(const LocalOperator& op);

}  // namespace opfield

#endif  // OPFIELD_SPACES_HPP
