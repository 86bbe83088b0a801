#ifndef OPFIELD_TESTS_ORACLE_HPP
#define OPFIELD_TESTS_ORACLE_HPP

// Independent dense references for the factored algebra. Everything here is
// built from Eigen's Kronecker product and never calls the library's dense
// conversion paths.

#include <algorithm>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "opfield/random.hpp"
#include "opfield/tensor.hpp"

namespace opfield::testing {

inline MatrixXc kron_all(const std::vector<MatrixXc>& mats) {
  MatrixXc out = MatrixXc::Identity(1, 1);
  for (const auto& m : mats) {
    MatrixXc next = Eigen::kroneckerProduct(out, m).eval();
    out = std::move(next);
  }
  return out;
}

inline VectorXc kron_all(const std::vector<VectorXc>& vecs) {
  VectorXc out = VectorXc::Ones(1);
  for (const auto& v : vecs) {
    VectorXc next = Eigen::kroneckerProduct(out, v).eval();
    out = std::move(next);
  }
  return out;
}

inline MatrixXc oracle_dense(const OperatorExpr& op) {
  const ProductSpace& space = *op.space();
  const Index n = space.total_dim();
  MatrixXc out = MatrixXc::Zero(n, n);
  for (const auto& term : op.terms()) {
    std::vector<MatrixXc> mats;
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
      auto it = term.factors.find(f);
      mats.push_back(it == term.factors.end() ? MatrixXc::Identity(space.factor(f).dim(), space.factor(f).dim())
                                              : it->second.dense());
    }
    out += term.coeff * kron_all(mats);
  }
  return out;
}

inline VectorXc oracle_dense(const FieldState& s) {
  if (s.is_dense()) return s.vector();
  VectorXc out = VectorXc::Zero(s.space()->total_dim());
  for (const auto& t : s.terms()) out += t.coeff * kron_all(t.factors);
  return out;
}

inline double rel_err(const VectorXc& got, const VectorXc& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

inline double rel_err(const MatrixXc& got, const MatrixXc& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

/// Random factor dims with total_dim <= max_total.
inline SpacePtr random_space(Rng& rng, Index max_total, int max_factors = 4, Index max_dim = 8) {
  const int n = 1 + static_cast<int>(rng.index(max_factors));
  std::vector<FactorSpace> factors;
  Index total = 1;
  for (int f = 0; f < n; ++f) {
    const Index budget = std::min<Index>(max_dim, max_total / total);
    if (budget < 1) break;
    const Index d = 1 + rng.index(budget);
    total *= d;
    factors.push_back(FactorSpace::fock("f" + std::to_string(f), d));
  }
  return make_space(std::move(factors));
}

inline MatrixXc random_matrix(Rng& rng, Index d, double density = 0.6) {
  MatrixXc m = MatrixXc::Zero(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (rng.uniform() < density) m(i, j) = rng.complex_normal();
  return m;
}

inline OperatorExpr random_expr(Rng& rng, const SpacePtr& space, int max_terms = 4) {
  OperatorExpr op(space);
  const int n_terms = 1 + static_cast<int>(rng.index(max_terms));
  for (int t = 0; t < n_terms; ++t) {
    std::vector<LocalOperator> ops;
    for (const auto& f : space->factors())
      if (rng.uniform() < 0.7) ops.emplace_back(f.label(), random_matrix(rng, f.dim()));
    op.add_term(rng.complex_normal(), ops);
  }
  return op;
}

inline FieldState random_state(Rng& rng, const SpacePtr& space, int max_terms = 3) {
  FieldState::SumOfProducts terms;
  const int n_terms = 1 + static_cast<int>(rng.index(max_terms));
  for (int t = 0; t < n_terms; ++t) {
    ProductTerm term;
    term.coeff = rng.complex_normal();
    for (const auto& f : space->factors()) term.factors.push_back(rng.complex_vector(f.dim()));
    terms.push_back(std::move(term));
  }
  return FieldState::sum_of_products(space, std::move(terms));
}

}  // namespace opfield::testing

#endif  // OPFIELD_TESTS_ORACLE_HPP
