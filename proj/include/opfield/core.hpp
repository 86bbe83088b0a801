#ifndef OPFIELD_CORE_HPP
#define OPFIELD_CORE_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace opfield {

using Scalar = std::complex<double>;
using Index = Eigen::Index;

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;
using SparseMatrixXc = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

inline constexpr Scalar I_UNIT{0.0, 1.0};

/// Raised on label or dimension mismatches between spaces, operators and states.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a result would exceed a configured size cap (term count, dense dimension).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on invalid construction parameters (grid specs, constants, mode tables).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Largest product dimension for which dense forms may be materialized.
inline constexpr Index DEFAULT_DENSE_CAP = 4096;

/// Default cap on the number of product terms an operation may produce.
/// Largest state vector materialized to evaluate a residual norm exactly.
inline constexpr Index DEFAULT_VECTOR_CAP = Index{1} << 22;

inline constexpr std::size_t DEFAULT_TERM_CAP = std::size_t{1} << 20;

/// Worker threads used for internal parallel loops. Reductions are always
/// performed in canonical order, so results do not depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

template <typename Derived>
double max_abs_entry(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

/// max |M - M^dagger| entry.
template <typename Derived>
double hermitian_defect(const Eigen::MatrixBase<Derived>& m) {
  return max_abs_entry(m - m.adjoint());
}

/// max |M + M^dagger| entry.
template <typename Derived>
double anti_hermitian_defect(const Eigen::MatrixBase<Derived>& m) {
  return max_abs_entry(m + m.adjoint());
}

inline double hermitian_defect(const SparseMatrixXc& m) {
  return hermitian_defect(MatrixXc(m));
}

inline double anti_hermitian_defect(const SparseMatrixXc& m) {
  return anti_hermitian_defect(MatrixXc(m));
}

}  // namespace opfield

#endif  // OPFIELD_CORE_HPP
