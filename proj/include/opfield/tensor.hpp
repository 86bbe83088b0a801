#ifndef OPFIELD_TENSOR_HPP
#define OPFIELD_TENSOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "opfield/core.hpp"

namespace opfield {

enum class FactorKind { Fock, Grid };
enum class Flavor { Real, Imaginary };

/// Uniform grid symmetric about zero: n_points with spacing 2*extent/n_points.
struct GridSpec {
  Index n_points = 64;
  double extent = 1.0;
  bool periodic = true;

  double spacing() const { return 2.0 * extent / static_cast<double>(n_points); }
  /// Real grid coordinates, ascending.
  Eigen::VectorXd points() const;
  void validate() const;
};

/// One discretized factor of a product space.
class FactorSpace {
 public:
  FactorSpace(std::string label, FactorKind kind, Flavor flavor, VectorXc basis_values,
              std::optional<GridSpec> grid = std::nullopt);

  /// Fock factor with occupation numbers 0..dim-1 as basis values.
  static FactorSpace fock(std::string label, Index dim);

  const std::string& label() const { return label_; }
  FactorKind kind() const { return kind_; }
  Flavor flavor() const { return flavor_; }
  Index dim() const { return basis_values_.size(); }
  const VectorXc& basis_values() const { return basis_values_; }
  /// Present when the factor was built from a GridSpec (position or time grid).
  const std::optional<GridSpec>& grid() const { return grid_; }

  /// Basis index whose value lies within tol of v.
  std::optional<Index> find_value(Scalar v, double tol = 1e-12) const;

  bool operator==(const FactorSpace& other) const;

 private:
  std::string label_;
  FactorKind kind_;
  Flavor flavor_;
  VectorXc basis_values_;
  std::optional<GridSpec> grid_;
};

/// Ordered direct product of factors. Basis enumeration is row-major over the
/// factor list: the last factor varies fastest.
class ProductSpace {
 public:
  explicit ProductSpace(std::vector<FactorSpace> factors);

  std::size_t factor_count() const { return factors_.size(); }
  const FactorSpace& factor(std::size_t i) const { return factors_[i]; }
  const std::vector<FactorSpace>& factors() const { return factors_; }
  Index total_dim() const { return total_dim_; }
  Index stride(std::size_t i) const { return strides_[i]; }

  std::optional<std::size_t> find(const std::string& label) const;
  /// Throws StructuralError when the label is unknown.
  std::size_t index_of(const std::string& label) const;

  Index flat_index(std::span<const Index> multi) const;
  std::vector<Index> multi_index(Index flat) const;

  bool operator==(const ProductSpace& other) const;

 private:
  std::vector<FactorSpace> factors_;
  std::vector<Index> strides_;
  Index total_dim_ = 1;
};

using SpacePtr = std::shared_ptr<const ProductSpace>;

SpacePtr make_space(std::vector<FactorSpace> factors);

/// Throws StructuralError unless a and b describe the same product space.
void require_same_space(const SpacePtr& a, const SpacePtr& b, const char* what);

enum OpFlag : unsigned {
  kNoFlags = 0,
  kHermitian = 1u << 0,
  kAntiHermitian = 1u << 1,
  kDiagonal = 1u << 2,
  kUnitary = 1u << 3,
};

/// Matrix acting on a single labeled factor. Flags are advisory.
class LocalOperator {
 public:
  LocalOperator(std::string label, SparseMatrixXc matrix, unsigned flags = kNoFlags);
  LocalOperator(std::string label, const MatrixXc& matrix, unsigned flags = kNoFlags);

  static LocalOperator diagonal(std::string label, const VectorXc& values, unsigned flags = kNoFlags);
  /// Rank-1 projector |index><index| on a factor of the given dimension.
  static LocalOperator dyad(std::string label, Index dim, Index index);
  static LocalOperator identity(std::string label, Index dim);

  const std::string& label() const { return label_; }
  const SparseMatrixXc& matrix() const { return matrix_; }
  Index dim() const { return matrix_.rows(); }
  unsigned flags() const { return flags_; }
  bool has(OpFlag f) const { return (flags_ & f) != 0; }

  MatrixXc dense() const { return MatrixXc(matrix_); }
  /// True when every stored entry sits on the diagonal.
  bool is_structurally_diagonal() const;
  /// Checks every advisory flag against the matrix at the given tolerance.
  bool verify_flags(double tol = 1e-12) const;

  bool operator==(const LocalOperator& other) const;

 private:
  std::string label_;
  SparseMatrixXc matrix_;
  unsigned flags_;
};

LocalOperator adjoint(const LocalOperator& op);
LocalOperator operator*(const LocalOperator& a, const LocalOperator& b);
LocalOperator operator*(Scalar c, const LocalOperator& op);
LocalOperator operator+(const LocalOperator& a, const LocalOperator& b);
LocalOperator operator-(const LocalOperator& a, const LocalOperator& b);

/// One Kronecker-factored term: coeff times the product of the local
/// operators, identity on every factor not present in the map.
struct OperatorTerm {
  Scalar coeff{1.0, 0.0};
  std::map<std::size_t, LocalOperator> factors;

  bool operator==(const OperatorTerm& other) const;
};

/// Sum of Kronecker-factored terms over a product space. An empty term list
/// is the zero operator.
class OperatorExpr {
 public:
  explicit OperatorExpr(SpacePtr space);

  static OperatorExpr zero(SpacePtr space) { return OperatorExpr(std::move(space)); }
  static OperatorExpr identity(SpacePtr space, Scalar coeff = 1.0);
  /// coeff * (product of ops), each op resolved by its label. Repeated labels
  /// multiply in list order.
  static OperatorExpr product(SpacePtr space, const std::vector<LocalOperator>& ops, Scalar coeff = 1.0);
  static OperatorExpr local(SpacePtr space, const LocalOperator& op, Scalar coeff = 1.0);

  void add_term(Scalar coeff, const std::vector<LocalOperator>& ops);
  void add_term(OperatorTerm term);

  const SpacePtr& space() const { return space_; }
  const std::vector<OperatorTerm>& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }

  /// True when every local matrix of every term is structurally diagonal.
  bool is_diagonal() const;

  OperatorExpr& operator+=(const OperatorExpr& other);
  OperatorExpr& operator-=(const OperatorExpr& other);
  OperatorExpr& operator*=(Scalar c);

 private:
  SpacePtr space_;
  std::vector<OperatorTerm> terms_;
};

OperatorExpr operator+(OperatorExpr a, const OperatorExpr& b);
OperatorExpr operator-(OperatorExpr a, const OperatorExpr& b);
OperatorExpr operator-(OperatorExpr a);
OperatorExpr operator*(Scalar c, OperatorExpr a);

/// Term-wise product, a-major then b.
OperatorExpr compose(const OperatorExpr& a, const OperatorExpr& b, std::size_t term_cap = DEFAULT_TERM_CAP);
OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b);

OperatorExpr adjoint(const OperatorExpr& op);

/// compose(a,b) - compose(b,a); terms of ab first, then the negated terms of ba.
OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b, std::size_t term_cap = DEFAULT_TERM_CAP);

/// Bitwise comparison of term lists (coefficients, factor indices, matrices).
bool same_terms(const OperatorExpr& a, const OperatorExpr& b);

/// Dense matrix in the row-major product basis. Throws CapacityError above dense_cap.
MatrixXc to_dense(const OperatorExpr& op, Index dense_cap = DEFAULT_DENSE_CAP);

/// Product-basis diagonal of an operator whose local matrices are all diagonal.
VectorXc product_diagonal(const OperatorExpr& op, Index cap = Index{1} << 26);

/// One product term of a state: coeff times the Kronecker product of the
/// per-factor vectors.
struct ProductTerm {
  Scalar coeff{1.0, 0.0};
  std::vector<VectorXc> factors;
};

class FieldState {
 public:
  using SumOfProducts = std::vector<ProductTerm>;

  static FieldState zero(SpacePtr space);
  static FieldState product(SpacePtr space, std::vector<VectorXc> factors, Scalar coeff = 1.0);
  /// Product basis state from one index per factor.
  static FieldState basis(SpacePtr space, std::span<const Index> multi, Scalar coeff = 1.0);
  static FieldState sum_of_products(SpacePtr space, SumOfProducts terms);
  static FieldState dense(SpacePtr space, VectorXc vector);

  const SpacePtr& space() const { return space_; }
  bool is_dense() const { return std::holds_alternative<VectorXc>(data_); }
  const SumOfProducts& terms() const;
  const VectorXc& vector() const;
  std::size_t term_count() const;

  /// Explicit vector over the product basis. Throws CapacityError above dense_cap.
  VectorXc to_dense(Index dense_cap = DEFAULT_DENSE_CAP) const;
  FieldState as_dense(Index dense_cap = DEFAULT_DENSE_CAP) const;

  FieldState& operator+=(const FieldState& other);
  FieldState& operator*=(Scalar c);

 private:
  FieldState(SpacePtr space, std::variant<SumOfProducts, VectorXc> data);
  void validate() const;

  SpacePtr space_;
  std::variant<SumOfProducts, VectorXc> data_;
};

FieldState operator+(FieldState a, const FieldState& b);
FieldState operator*(Scalar c, FieldState a);

/// <a|b>, antilinear in a.
Scalar inner(const FieldState& a, const FieldState& b);
/// Sum-of-products norms go through the Gram expansion and cannot resolve
/// values much below sqrt(epsilon) times the term norms; densify first for residuals.
double norm(const FieldState& s);

/// ||op psi||, through a dense image when the space fits DEFAULT_VECTOR_CAP.
double image_norm(const OperatorExpr& op, const FieldState& psi);
/// Max-norm difference of the dense forms.
double max_abs_difference(const FieldState& a, const FieldState& b, Index dense_cap = DEFAULT_DENSE_CAP);

struct ApplyOptions {
  bool dense_result = false;
  std::size_t term_cap = DEFAULT_TERM_CAP;
  Index dense_cap = DEFAULT_DENSE_CAP;
};

/// Sum over operator terms of coeff times the per-factor matrix-vector
/// products. Sum-of-products input stays sum-of-products (operator-term
/// major) unless dense_result is requested; dense input gives dense output.
FieldState apply(const OperatorExpr& op, const FieldState& state, const ApplyOptions& options = {});

Scalar expectation(const OperatorExpr& op, const FieldState& state);

/// Replaces one factor by another of possibly different dimension, mapping
/// that factor's vectors through `map` (new_dim x old_dim).
FieldState change_factor(const FieldState& state, const std::string& label, FactorSpace replacement,
                         const MatrixXc& map);

enum class ResidualPath { Dense, Diagonal, Stochastic };

const char* to_string(ResidualPath path);

struct ResidualOptions {
  Index dense_cap = DEFAULT_DENSE_CAP;
  /// Number of random probe states for the stochastic path; 0 disables it.
  int probes = 0;
  std::uint64_t seed = 0x5eed;
};

struct ResidualResult {
  double value = 0.0;
  ResidualPath path = ResidualPath::Dense;
  int probes = 0;
};

/// Dense path: max entry of the dense form of a - b. Above the dense cap,
/// diagonal differences are evaluated exactly on the product diagonal; any
/// other difference requires a probe budget.
ResidualResult op_norm_residual(const OperatorExpr& a, const OperatorExpr& b, const ResidualOptions& options = {});

}  // namespace opfield

#endif  // OPFIELD_TENSOR_HPP
