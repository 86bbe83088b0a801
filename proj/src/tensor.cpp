#include "opfield/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "opfield/detail/parallel.hpp"
#include "opfield/random.hpp"

namespace opfield {

// ---------------------------------------------------------------------------
// Spaces

Eigen::VectorXd GridSpec::points() const {
  validate();
  const double h = spacing();
  Eigen::VectorXd x(n_points);
  const double centre = 0.5 * static_cast<double>(n_points - 1);
  for (Index j = 0; j < n_points; ++j) x(j) = (static_cast<double>(j) - centre) * h;
  return x;
}

void GridSpec::validate() const {
  if (n_points < 2) throw DomainError("grid needs at least 2 points, got " + std::to_string(n_points));
  if (!(extent > 0.0) || !std::isfinite(extent)) throw DomainError("grid extent must be positive and finite");
}

FactorSpace::FactorSpace(std::string label, FactorKind kind, Flavor flavor, VectorXc basis_values,
                         std::optional<GridSpec> grid)
    : label_(std::move(label)),
      kind_(kind),
      flavor_(flavor),
      basis_values_(std::move(basis_values)),
      grid_(std::move(grid)) {
  if (label_.empty()) throw DomainError("factor label must be nonempty");
  if (basis_values_.size() < 1) throw DomainError("factor '" + label_ + "' needs dim >= 1");
  for (Index i = 0; i < basis_values_.size(); ++i) {
    const Scalar v = basis_values_(i);
    if (flavor_ == Flavor::Real && v.imag() != 0.0)
      throw DomainError("real-flavor factor '" + label_ + "' has a basis value with nonzero imaginary part");
    if (flavor_ == Flavor::Imaginary && v.real() != 0.0)
      throw DomainError("imaginary-flavor factor '" + label_ + "' has a basis value with nonzero real part");
  }
  if (grid_ && grid_->n_points != basis_values_.size())
    throw DomainError("factor '" + label_ + "' grid size does not match its basis");
}

FactorSpace FactorSpace::fock(std::string label, Index dim) {
  if (dim < 1) throw DomainError("Fock dimension must be positive");
  VectorXc values(dim);
  for (Index n = 0; n < dim; ++n) values(n) = static_cast<double>(n);
  return FactorSpace(std::move(label), FactorKind::Fock, Flavor::Real, std::move(values));
}

std::optional<Index> FactorSpace::find_value(Scalar v, double tol) const {
  for (Index i = 0; i < basis_values_.size(); ++i)
    if (std::abs(basis_values_(i) - v) <= tol) return i;
  return std::nullopt;
}

bool FactorSpace::operator==(const FactorSpace& other) const {
  return label_ == other.label_ && kind_ == other.kind_ && flavor_ == other.flavor_ &&
         basis_values_.size() == other.basis_values_.size() && basis_values_ == other.basis_values_;
}

ProductSpace::ProductSpace(std::vector<FactorSpace> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw DomainError("product space needs at least one factor");
  std::set<std::string> seen;
  for (const auto& f : factors_)
    if (!seen.insert(f.label()).second) throw StructuralError("duplicate factor label '" + f.label() + "'");
  strides_.assign(factors_.size(), 1);
  total_dim_ = 1;
  for (std::size_t i = factors_.size(); i-- > 0;) {
    strides_[i] = total_dim_;
    if (total_dim_ > std::numeric_limits<Index>::max() / factors_[i].dim())
      throw CapacityError("product dimension overflows the index type");
    total_dim_ *= factors_[i].dim();
  }
}

std::optional<std::size_t> ProductSpace::find(const std::string& label) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].label() == label) return i;
  return std::nullopt;
}

std::size_t ProductSpace::index_of(const std::string& label) const {
  if (auto i = find(label)) return *i;
  throw StructuralError("no factor labeled '" + label + "' in product space");
}

Index ProductSpace::flat_index(std::span<const Index> multi) const {
  if (multi.size() != factors_.size()) throw StructuralError("multi-index length does not match factor count");
  Index flat = 0;
  for (std::size_t i = 0; i < multi.size(); ++i) {
    if (multi[i] < 0 || multi[i] >= factors_[i].dim())
      throw StructuralError("index out of range for factor '" + factors_[i].label() + "'");
    flat += multi[i] * strides_[i];
  }
  return flat;
}

std::vector<Index> ProductSpace::multi_index(Index flat) const {
  std::vector<Index> multi(factors_.size());
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    multi[i] = flat / strides_[i];
    flat %= strides_[i];
  }
  return multi;
}

bool ProductSpace::operator==(const ProductSpace& other) const { return factors_ == other.factors_; }

SpacePtr make_space(std::vector<FactorSpace> factors) {
  return std::make_shared<const ProductSpace>(std::move(factors));
}

void require_same_space(const SpacePtr& a, const SpacePtr& b, const char* what) {
  if (!a || !b) throw StructuralError(std::string(what) + ": null product space");
  if (a == b) return;
  if (!(*a == *b)) throw StructuralError(std::string(what) + ": operands live on different product spaces");
}

// ---------------------------------------------------------------------------
// Local operators

LocalOperator::LocalOperator(std::string label, SparseMatrixXc matrix, unsigned flags)
    : label_(std::move(label)), matrix_(std::move(matrix)), flags_(flags) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1)
    throw StructuralError("local operator on '" + label_ + "' must be square and nonempty");
  matrix_.makeCompressed();
}

LocalOperator::LocalOperator(std::string label, const MatrixXc& matrix, unsigned flags)
    : LocalOperator(std::move(label), SparseMatrixXc(matrix.sparseView(0.0, 0.0)), flags) {}

LocalOperator LocalOperator::diagonal(std::string label, const VectorXc& values, unsigned flags) {
  SparseMatrixXc m(values.size(), values.size());
  std::vector<Eigen::Triplet<Scalar>> trips;
  for (Index i = 0; i < values.size(); ++i)
    if (values(i) != Scalar(0.0)) trips.emplace_back(i, i, values(i));
  m.setFromTriplets(trips.begin(), trips.end());
  return LocalOperator(std::move(label), std::move(m), flags | kDiagonal);
}

LocalOperator LocalOperator::dyad(std::string label, Index dim, Index index) {
  if (index < 0 || index >= dim) throw StructuralError("dyad index out of range on '" + label + "'");
  SparseMatrixXc m(dim, dim);
  m.insert(index, index) = 1.0;
  return LocalOperator(std::move(label), std::move(m), kHermitian | kDiagonal);
}

LocalOperator LocalOperator::identity(std::string label, Index dim) {
  SparseMatrixXc m(dim, dim);
  m.setIdentity();
  return LocalOperator(std::move(label), std::move(m), kHermitian | kDiagonal | kUnitary);
}

bool LocalOperator::is_structurally_diagonal() const {
  for (Index k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrixXc::InnerIterator it(matrix_, k); it; ++it)
      if (it.row() != it.col()) return false;
  return true;
}

bool LocalOperator::verify_flags(double tol) const {
  const MatrixXc d = dense();
  if (has(kHermitian) && hermitian_defect(d) > tol) return false;
  if (has(kAntiHermitian) && anti_hermitian_defect(d) > tol) return false;
  if (has(kDiagonal) && !is_structurally_diagonal()) return false;
  if (has(kUnitary) && max_abs_entry(d.adjoint() * d - MatrixXc::Identity(d.rows(), d.cols())) > tol) return false;
  return true;
}

bool LocalOperator::operator==(const LocalOperator& other) const {
  if (label_ != other.label_ || matrix_.rows() != other.matrix_.rows()) return false;
  if (matrix_.nonZeros() != other.matrix_.nonZeros()) return false;
  return std::equal(matrix_.valuePtr(), matrix_.valuePtr() + matrix_.nonZeros(), other.matrix_.valuePtr()) &&
         std::equal(matrix_.innerIndexPtr(), matrix_.innerIndexPtr() + matrix_.nonZeros(),
                    other.matrix_.innerIndexPtr()) &&
         std::equal(matrix_.outerIndexPtr(), matrix_.outerIndexPtr() + matrix_.outerSize() + 1,
                    other.matrix_.outerIndexPtr());
}

namespace {

unsigned product_flags(unsigned a, unsigned b) {
  unsigned f = kNoFlags;
  if ((a & kDiagonal) && (b & kDiagonal)) f |= kDiagonal;
  if ((a & kUnitary) && (b & kUnitary)) f |= kUnitary;
  return f;
}

void require_same_label(const LocalOperator& a, const LocalOperator& b) {
  if (a.label() != b.label() || a.dim() != b.dim())
    throw StructuralError("local operators act on different factors ('" + a.label() + "' vs '" + b.label() + "')");
}

}  // namespace

LocalOperator adjoint(const LocalOperator& op) {
  SparseMatrixXc m = op.matrix().adjoint();
  return LocalOperator(op.label(), std::move(m), op.flags());
}

LocalOperator operator*(const LocalOperator& a, const LocalOperator& b) {
  require_same_label(a, b);
  SparseMatrixXc m = a.matrix() * b.matrix();
  return LocalOperator(a.label(), std::move(m), product_flags(a.flags(), b.flags()));
}

LocalOperator operator*(Scalar c, const LocalOperator& op) {
  SparseMatrixXc m = c * op.matrix();
  unsigned f = op.flags() & kDiagonal;
  if (c.imag() == 0.0) f |= op.flags() & (kHermitian | kAntiHermitian);
  if (c.real() == 0.0) {
    if (op.has(kHermitian)) f |= kAntiHermitian;
    if (op.has(kAntiHermitian)) f |= kHermitian;
  }
  return LocalOperator(op.label(), std::move(m), f);
}

LocalOperator operator+(const LocalOperator& a, const LocalOperator& b) {
  require_same_label(a, b);
  SparseMatrixXc m = a.matrix() + b.matrix();
  return LocalOperator(a.label(), std::move(m), a.flags() & b.flags() & (kHermitian | kAntiHermitian | kDiagonal));
}

LocalOperator operator-(const LocalOperator& a, const LocalOperator& b) { return a + Scalar(-1.0) * b; }

// ---------------------------------------------------------------------------
// Operator expressions

bool OperatorTerm::operator==(const OperatorTerm& other) const {
  return coeff == other.coeff && factors == other.factors;
}

OperatorExpr::OperatorExpr(SpacePtr space) : space_(std::move(space)) {
  if (!space_) throw StructuralError("operator needs a product space");
}

OperatorExpr OperatorExpr::identity(SpacePtr space, Scalar coeff) {
  OperatorExpr op(std::move(space));
  op.terms_.push_back(OperatorTerm{coeff, {}});
  return op;
}

OperatorExpr OperatorExpr::product(SpacePtr space, const std::vector<LocalOperator>& ops, Scalar coeff) {
  OperatorExpr op(std::move(space));
  op.add_term(coeff, ops);
  return op;
}

OperatorExpr OperatorExpr::local(SpacePtr space, const LocalOperator& op, Scalar coeff) {
  return product(std::move(space), {op}, coeff);
}

void OperatorExpr::add_term(Scalar coeff, const std::vector<LocalOperator>& ops) {
  OperatorTerm term{coeff, {}};
  for (const auto& op : ops) {
    const std::size_t idx = space_->index_of(op.label());
    if (op.dim() != space_->factor(idx).dim())
      throw StructuralError("operator on '" + op.label() + "' has dimension " + std::to_string(op.dim()) +
                            ", factor has " + std::to_string(space_->factor(idx).dim()));
    auto it = term.factors.find(idx);
    if (it == term.factors.end())
      term.factors.emplace(idx, op);
    else
      it->second = it->second * op;
  }
  terms_.push_back(std::move(term));
}

void OperatorExpr::add_term(OperatorTerm term) {
  for (const auto& [idx, op] : term.factors) {
    if (idx >= space_->factor_count() || space_->factor(idx).label() != op.label() ||
        space_->factor(idx).dim() != op.dim())
      throw StructuralError("term factor '" + op.label() + "' does not match the product space");
  }
  terms_.push_back(std::move(term));
}

bool OperatorExpr::is_diagonal() const {
  for (const auto& t : terms_)
    for (const auto& [idx, op] : t.factors)
      if (!op.is_structurally_diagonal()) return false;
  return true;
}

OperatorExpr& OperatorExpr::operator+=(const OperatorExpr& other) {
  require_same_space(space_, other.space_, "operator sum");
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

OperatorExpr& OperatorExpr::operator-=(const OperatorExpr& other) {
  require_same_space(space_, other.space_, "operator difference");
  for (const auto& t : other.terms_) terms_.push_back(OperatorTerm{-t.coeff, t.factors});
  return *this;
}

OperatorExpr& OperatorExpr::operator*=(Scalar c) {
  for (auto& t : terms_) t.coeff *= c;
  return *this;
}

OperatorExpr operator+(OperatorExpr a, const OperatorExpr& b) { return a += b; }
OperatorExpr operator-(OperatorExpr a, const OperatorExpr& b) { return a -= b; }
OperatorExpr operator-(OperatorExpr a) { return a *= Scalar(-1.0); }
OperatorExpr operator*(Scalar c, OperatorExpr a) { return a *= c; }

OperatorExpr compose(const OperatorExpr& a, const OperatorExpr& b, std::size_t term_cap) {
  require_same_space(a.space(), b.space(), "compose");
  const std::size_t count = a.term_count() * b.term_count();
  if (count > term_cap)
    throw CapacityError("compose would produce " + std::to_string(count) + " terms, cap is " +
                        std::to_string(term_cap));
  OperatorExpr out(a.space());
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      OperatorTerm t{ta.coeff * tb.coeff, ta.factors};
      for (const auto& [idx, op] : tb.factors) {
        auto it = t.factors.find(idx);
        if (it == t.factors.end())
          t.factors.emplace(idx, op);
        else
          it->second = it->second * op;
      }
      out.add_term(std::move(t));
    }
  }
  return out;
}

OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b) { return compose(a, b); }

OperatorExpr adjoint(const OperatorExpr& op) {
  OperatorExpr out(op.space());
  for (const auto& t : op.terms()) {
    OperatorTerm at{std::conj(t.coeff), {}};
    for (const auto& [idx, local] : t.factors) at.factors.emplace(idx, adjoint(local));
    out.add_term(std::move(at));
  }
  return out;
}

OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b, std::size_t term_cap) {
  OperatorExpr ab = compose(a, b, term_cap);
  OperatorExpr ba = compose(b, a, term_cap);
  if (ab.term_count() + ba.term_count() > term_cap)
    throw CapacityError("commutator would produce " + std::to_string(ab.term_count() + ba.term_count()) +
                        " terms, cap is " + std::to_string(term_cap));
  return ab -= ba;
}

bool same_terms(const OperatorExpr& a, const OperatorExpr& b) {
  if (!(*a.space() == *b.space())) return false;
  return a.terms() == b.terms();
}

namespace {

/// Accumulates column `col` of `op` into `acc`, recording first-touched rows.
/// Terms are visited in list order, so every entry is summed canonically.
void accumulate_column(const OperatorExpr& op, Index col, std::vector<Scalar>& acc, std::vector<Index>& touched,
                       std::vector<char>& mark) {
  const ProductSpace& space = *op.space();
  const std::size_t nf = space.factor_count();
  const std::vector<Index> multi = space.multi_index(col);

  std::vector<std::vector<std::pair<Index, Scalar>>> entries(nf);
  for (const auto& term : op.terms()) {
    bool empty = false;
    for (std::size_t f = 0; f < nf; ++f) {
      entries[f].clear();
      auto it = term.factors.find(f);
      if (it == term.factors.end()) {
        entries[f].emplace_back(multi[f], Scalar(1.0));
      } else {
        for (SparseMatrixXc::InnerIterator e(it->second.matrix(), multi[f]); e; ++e)
          entries[f].emplace_back(e.row(), e.value());
      }
      if (entries[f].empty()) {
        empty = true;
        break;
      }
    }
    if (empty) continue;

    // Odometer over the per-factor entry lists.
    std::vector<std::size_t> pos(nf, 0);
    while (true) {
      Index row = 0;
      Scalar value = term.coeff;
      for (std::size_t f = 0; f < nf; ++f) {
        const auto& [r, v] = entries[f][pos[f]];
        row += r * space.stride(f);
        value *= v;
      }
      if (!mark[static_cast<std::size_t>(row)]) {
        mark[static_cast<std::size_t>(row)] = 1;
        touched.push_back(row);
      }
      acc[static_cast<std::size_t>(row)] += value;

      std::size_t f = nf;
      while (f-- > 0) {
        if (++pos[f] < entries[f].size()) break;
        pos[f] = 0;
      }
      if (f == static_cast<std::size_t>(-1)) break;
    }
  }
}

}  // namespace

MatrixXc to_dense(const OperatorExpr& op, Index dense_cap) {
  const Index n = op.space()->total_dim();
  if (n > dense_cap)
    throw CapacityError("dense form of dimension " + std::to_string(n) + " exceeds dense cap " +
                        std::to_string(dense_cap));
  MatrixXc out = MatrixXc::Zero(n, n);
  detail::parallel_chunks(n, [&](Index begin, Index end) {
    std::vector<Scalar> acc(static_cast<std::size_t>(n), Scalar(0.0));
    std::vector<char> mark(static_cast<std::size_t>(n), 0);
    std::vector<Index> touched;
    for (Index col = begin; col < end; ++col) {
      accumulate_column(op, col, acc, touched, mark);
      for (Index row : touched) {
        out(row, col) = acc[static_cast<std::size_t>(row)];
        acc[static_cast<std::size_t>(row)] = 0.0;
        mark[static_cast<std::size_t>(row)] = 0;
      }
      touched.clear();
    }
  });
  return out;
}

namespace {

/// Kronecker product of vectors in factor order (last factor fastest).
VectorXc kron_vectors(const std::vector<VectorXc>& vs) {
  VectorXc out = VectorXc::Ones(1);
  for (const auto& v : vs) {
    VectorXc next(out.size() * v.size());
    for (Index i = 0; i < out.size(); ++i) next.segment(i * v.size(), v.size()) = out(i) * v;
    out = std::move(next);
  }
  return out;
}

}  // namespace

VectorXc product_diagonal(const OperatorExpr& op, Index cap) {
  const ProductSpace& space = *op.space();
  if (space.total_dim() > cap)
    throw CapacityError("product diagonal of dimension " + std::to_string(space.total_dim()) + " exceeds cap " +
                        std::to_string(cap));
  if (!op.is_diagonal()) throw StructuralError("product_diagonal requires diagonal local operators");
  VectorXc diag = VectorXc::Zero(space.total_dim());
  for (const auto& term : op.terms()) {
    std::vector<VectorXc> parts;
    parts.reserve(space.factor_count());
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
      auto it = term.factors.find(f);
      if (it == term.factors.end())
        parts.push_back(VectorXc::Ones(space.factor(f).dim()));
      else
        parts.push_back(it->second.matrix().diagonal());
    }
    diag += term.coeff * kron_vectors(parts);
  }
  return diag;
}

// ---------------------------------------------------------------------------
// States

FieldState::FieldState(SpacePtr space, std::variant<SumOfProducts, VectorXc> data)
    : space_(std::move(space)), data_(std::move(data)) {
  if (!space_) throw StructuralError("state needs a product space");
  validate();
}

void FieldState::validate() const {
  if (auto* v = std::get_if<VectorXc>(&data_)) {
    if (v->size() != space_->total_dim()) throw StructuralError("dense state length does not match product dimension");
    return;
  }
  for (const auto& t : std::get<SumOfProducts>(data_)) {
    if (t.factors.size() != space_->factor_count())
      throw StructuralError("product term has " + std::to_string(t.factors.size()) + " factors, space has " +
                            std::to_string(space_->factor_count()));
    for (std::size_t f = 0; f < t.factors.size(); ++f)
      if (t.factors[f].size() != space_->factor(f).dim())
        throw StructuralError("factor vector for '" + space_->factor(f).label() + "' has wrong length");
  }
}

FieldState FieldState::zero(SpacePtr space) { return FieldState(std::move(space), SumOfProducts{}); }

FieldState FieldState::product(SpacePtr space, std::vector<VectorXc> factors, Scalar coeff) {
  SumOfProducts terms;
  terms.push_back(ProductTerm{coeff, std::move(factors)});
  return FieldState(std::move(space), std::move(terms));
}

FieldState FieldState::basis(SpacePtr space, std::span<const Index> multi, Scalar coeff) {
  if (multi.size() != space->factor_count()) throw StructuralError("basis state needs one index per factor");
  std::vector<VectorXc> factors;
  for (std::size_t f = 0; f < multi.size(); ++f) {
    const Index d = space->factor(f).dim();
    if (multi[f] < 0 || multi[f] >= d)
      throw StructuralError("basis index out of range for factor '" + space->factor(f).label() + "'");
    VectorXc e = VectorXc::Zero(d);
    e(multi[f]) = 1.0;
    factors.push_back(std::move(e));
  }
  return product(std::move(space), std::move(factors), coeff);
}

FieldState FieldState::sum_of_products(SpacePtr space, SumOfProducts terms) {
  return FieldState(std::move(space), std::move(terms));
}

FieldState FieldState::dense(SpacePtr space, VectorXc vector) { return FieldState(std::move(space), std::move(vector)); }

const FieldState::SumOfProducts& FieldState::terms() const {
  if (is_dense()) throw StructuralError("state is dense, not sum-of-products");
  return std::get<SumOfProducts>(data_);
}

const VectorXc& FieldState::vector() const {
  if (!is_dense()) throw StructuralError("state is sum-of-products, not dense");
  return std::get<VectorXc>(data_);
}

std::size_t FieldState::term_count() const { return is_dense() ? 1 : std::get<SumOfProducts>(data_).size(); }

VectorXc FieldState::to_dense(Index dense_cap) const {
  if (is_dense()) return vector();
  const Index n = space_->total_dim();
  if (n > dense_cap)
    throw CapacityError("dense state of dimension " + std::to_string(n) + " exceeds dense cap " +
                        std::to_string(dense_cap));
  VectorXc out = VectorXc::Zero(n);
  for (const auto& t : terms()) out += t.coeff * kron_vectors(t.factors);
  return out;
}

FieldState FieldState::as_dense(Index dense_cap) const { return dense(space_, to_dense(dense_cap)); }

FieldState& FieldState::operator+=(const FieldState& other) {
  require_same_space(space_, other.space_, "state sum");
  if (!is_dense() && !other.is_dense()) {
    auto& mine = std::get<SumOfProducts>(data_);
    const auto& theirs = other.terms();
    mine.insert(mine.end(), theirs.begin(), theirs.end());
  } else {
    VectorXc v = to_dense() + other.to_dense();
    data_ = std::move(v);
  }
  return *this;
}

FieldState& FieldState::operator*=(Scalar c) {
  if (is_dense())
    std::get<VectorXc>(data_) *= c;
  else
    for (auto& t : std::get<SumOfProducts>(data_)) t.coeff *= c;
  return *this;
}

FieldState operator+(FieldState a, const FieldState& b) { return a += b; }
FieldState operator*(Scalar c, FieldState a) { return a *= c; }

Scalar inner(const FieldState& a, const FieldState& b) {
  require_same_space(a.space(), b.space(), "inner product");
  if (a.is_dense() || b.is_dense()) {
    const Index cap = a.space()->total_dim();
    return a.to_dense(cap).dot(b.to_dense(cap));
  }
  Scalar sum = 0.0;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      Scalar prod = std::conj(ta.coeff) * tb.coeff;
      for (std::size_t f = 0; f < ta.factors.size() && prod != Scalar(0.0); ++f) prod *= ta.factors[f].dot(tb.factors[f]);
      sum += prod;
    }
  }
  return sum;
}

double norm(const FieldState& s) {
  if (s.is_dense()) return s.vector().norm();
  return std::sqrt(std::max(0.0, inner(s, s).real()));
}

double image_norm(const OperatorExpr& op, const FieldState& psi) {
  ApplyOptions options;
  const Index n = psi.space()->total_dim();
  if (n <= DEFAULT_VECTOR_CAP) {
    options.dense_result = true;
    options.dense_cap = n;
  }
  return norm(apply(op, psi, options));
}

double max_abs_difference(const FieldState& a, const FieldState& b, Index dense_cap) {
  require_same_space(a.space(), b.space(), "state difference");
  return max_abs_entry(a.to_dense(dense_cap) - b.to_dense(dense_cap));
}

namespace {

/// y = M applied along one factor of a row-major tensor x.
void mode_product(const VectorXc& x, VectorXc& y, const SparseMatrixXc& m, Index left, Index d, Index right) {
  y.setZero(x.size());
  for (Index j = 0; j < m.outerSize(); ++j) {
    for (SparseMatrixXc::InnerIterator e(m, j); e; ++e) {
      const Index i = e.row();
      const Scalar v = e.value();
      for (Index l = 0; l < left; ++l) {
        const Index src = (l * d + j) * right;
        const Index dst = (l * d + i) * right;
        y.segment(dst, right) += v * x.segment(src, right);
      }
    }
  }
}

VectorXc apply_term_dense(const ProductSpace& space, const OperatorTerm& term, const VectorXc& x) {
  VectorXc cur = x;
  VectorXc next(x.size());
  for (const auto& [f, op] : term.factors) {
    const Index d = space.factor(f).dim();
    const Index right = space.stride(f);
    const Index left = space.total_dim() / (d * right);
    mode_product(cur, next, op.matrix(), left, d, right);
    std::swap(cur, next);
  }
  return term.coeff * cur;
}

VectorXc apply_dense(const OperatorExpr& op, const VectorXc& x) {
  const ProductSpace& space = *op.space();
  const auto& terms = op.terms();
  const Index n_terms = static_cast<Index>(terms.size());
  VectorXc out = VectorXc::Zero(x.size());
  const Index batch = std::max<Index>(1, static_cast<Index>(thread_count()));
  std::vector<VectorXc> partial(static_cast<std::size_t>(batch));
  for (Index start = 0; start < n_terms; start += batch) {
    const Index count = std::min(batch, n_terms - start);
    detail::parallel_chunks(count, [&](Index b, Index e) {
      for (Index k = b; k < e; ++k)
        partial[static_cast<std::size_t>(k)] = apply_term_dense(space, terms[static_cast<std::size_t>(start + k)], x);
    });
    for (Index k = 0; k < count; ++k) out += partial[static_cast<std::size_t>(k)];
  }
  return out;
}

}  // namespace

FieldState apply(const OperatorExpr& op, const FieldState& state, const ApplyOptions& options) {
  require_same_space(op.space(), state.space(), "apply");
  const SpacePtr& space = op.space();
  if (state.is_dense()) return FieldState::dense(space, apply_dense(op, state.vector()));
  if (options.dense_result) return FieldState::dense(space, apply_dense(op, state.to_dense(options.dense_cap)));

  const auto& in = state.terms();
  const std::size_t count = op.term_count() * in.size();
  if (count > options.term_cap)
    throw CapacityError("apply would produce " + std::to_string(count) + " product terms, cap is " +
                        std::to_string(options.term_cap));
  FieldState::SumOfProducts out;
  out.reserve(count);
  for (const auto& ot : op.terms()) {
    for (const auto& st : in) {
      ProductTerm t{ot.coeff * st.coeff, st.factors};
      for (const auto& [f, local] : ot.factors) t.factors[f] = local.matrix() * st.factors[f];
      out.push_back(std::move(t));
    }
  }
  return FieldState::sum_of_products(space, std::move(out));
}

Scalar expectation(const OperatorExpr& op, const FieldState& state) { return inner(state, apply(op, state)); }

FieldState change_factor(const FieldState& state, const std::string& label, FactorSpace replacement,
                         const MatrixXc& map) {
  const ProductSpace& old_space = *state.space();
  const std::size_t idx = old_space.index_of(label);
  const Index old_dim = old_space.factor(idx).dim();
  if (map.cols() != old_dim || map.rows() != replacement.dim())
    throw StructuralError("representation map for '" + label + "' has shape " + std::to_string(map.rows()) + "x" +
                          std::to_string(map.cols()) + ", expected " + std::to_string(replacement.dim()) + "x" +
                          std::to_string(old_dim));
  std::vector<FactorSpace> factors = old_space.factors();
  factors[idx] = std::move(replacement);
  SpacePtr space = make_space(std::move(factors));

  if (!state.is_dense()) {
    FieldState::SumOfProducts terms = state.terms();
    for (auto& t : terms) t.factors[idx] = map * t.factors[idx];
    return FieldState::sum_of_products(space, std::move(terms));
  }
  const Index right = old_space.stride(idx);
  const Index left = old_space.total_dim() / (old_dim * right);
  const Index new_dim = map.rows();
  const VectorXc& x = state.vector();
  VectorXc y = VectorXc::Zero(left * new_dim * right);
  for (Index l = 0; l < left; ++l)
    for (Index i = 0; i < new_dim; ++i)
      for (Index j = 0; j < old_dim; ++j)
        y.segment((l * new_dim + i) * right, right) += map(i, j) * x.segment((l * old_dim + j) * right, right);
  return FieldState::dense(space, std::move(y));
}

// ---------------------------------------------------------------------------
// Residuals

const char* to_string(ResidualPath path) {
  switch (path) {
    case ResidualPath::Dense: return "dense";
    case ResidualPath::Diagonal: return "diagonal";
    case ResidualPath::Stochastic: return "stochastic";
  }
  return "unknown";
}

ResidualResult op_norm_residual(const OperatorExpr& a, const OperatorExpr& b, const ResidualOptions& options) {
  require_same_space(a.space(), b.space(), "op_norm_residual");
  const OperatorExpr diff = a - b;
  const ProductSpace& space = *diff.space();
  const Index n = space.total_dim();

  if (n <= options.dense_cap) {
    // Column scan of the dense form; each column is accumulated in canonical
    // term order and the maximum is order independent.
    std::vector<double> worst(static_cast<std::size_t>(n), 0.0);
    detail::parallel_chunks(n, [&](Index begin, Index end) {
      std::vector<Scalar> acc(static_cast<std::size_t>(n), Scalar(0.0));
      std::vector<char> mark(static_cast<std::size_t>(n), 0);
      std::vector<Index> touched;
      for (Index col = begin; col < end; ++col) {
        accumulate_column(diff, col, acc, touched, mark);
        double m = 0.0;
        for (Index row : touched) {
          m = std::max(m, std::abs(acc[static_cast<std::size_t>(row)]));
          acc[static_cast<std::size_t>(row)] = 0.0;
          mark[static_cast<std::size_t>(row)] = 0;
        }
        touched.clear();
        worst[static_cast<std::size_t>(col)] = m;
      }
    });
    double m = 0.0;
    for (double w : worst) m = std::max(m, w);
    return {m, ResidualPath::Dense, 0};
  }

  if (diff.is_diagonal()) {
    const VectorXc d = product_diagonal(diff);
    return {max_abs_entry(d), ResidualPath::Diagonal, 0};
  }

  if (options.probes <= 0)
    throw CapacityError("dimension " + std::to_string(n) + " exceeds dense cap " + std::to_string(options.dense_cap) +
                        " and no probe budget was given");

  Rng rng(options.seed);
  double m = 0.0;
  for (int p = 0; p < options.probes; ++p) {
    std::vector<VectorXc> factors;
    for (const auto& f : space.factors()) factors.push_back(rng.complex_vector(f.dim()));
    const FieldState probe = FieldState::product(diff.space(), std::move(factors));
    const double denom = norm(probe);
    if (denom == 0.0) continue;
    m = std::max(m, image_norm(diff, probe) / denom);
  }
  return {m, ResidualPath::Stochastic, options.probes};
}

}  // namespace opfield
