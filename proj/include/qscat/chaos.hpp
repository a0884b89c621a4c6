#ifndef QSCAT_CHAOS_HPP
#define QSCAT_CHAOS_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "qscat/math/quadrature.hpp"
#include "qscat/models.hpp"

namespace qscat {

// ---------------------------------------------------------------------------
// Evaluators for the integrands of the Wiener-Ito decomposition of the
// transform cascade. Nodes are immutable; evaluation is pure. Only the t = 0
// integrands are represented; the time dependence is a pure phase
// e^{i t (lambda_1 + ... + lambda_p)} applied on top (see eval_at_time).
//
// The recursion mirrors the cascade itself: the base node pairs the filtered
// square-root density with itself; an F-lift multiplies by the next-scale
// filter evaluated at the argument sum; a level combination assembles
// binomial-weighted symmetrized contractions of F pairs.

class IntegrandNode;
using NodePtr = std::shared_ptr<const IntegrandNode>;

enum class NodeKind { BaseG1, Scalar, LiftF, SymContraction, WeightedSum };

// Quadrature rule for inner contraction integrals: Gauss-Legendre panels on
// the atanh-mapped line, per inner dimension.
struct ContractionRule {
  int nodes = 96;
  double map_scale = 2.0;
  int panels = 6;
};

class IntegrandNode {
 public:
  int arity() const { return arity_; }
  NodeKind kind() const { return kind_; }
  const std::vector<int>& scale_context() const { return scales_; }
  bool symmetric() const { return symmetric_; }

  complexd eval(std::span<const double> lam) const {
    if (static_cast<int>(lam.size()) != arity_)
      throw std::invalid_argument("IntegrandNode::eval: wrong argument count");
    return eval_impl(lam);
  }

  double eval_real(std::span<const double> lam) const { return eval(lam).real(); }

  // --- factories -----------------------------------------------------------

  // Arity-2 base: psi_hat_{j1}(l1) sqrt(f(l1)) psi_hat_{j1}(l2) sqrt(f(l2)).
  static NodePtr base_g1(const SpectralDensity& sd, const WaveletSpec& w, int j1) {
    auto n = std::make_shared<IntegrandNode>(Private{});
    n->kind_ = NodeKind::BaseG1;
    n->arity_ = 2;
    n->sd_ = std::make_shared<SpectralDensity>(sd);
    n->w_ = std::make_shared<WaveletSpec>(w);
    n->j_ = j1;
    n->scales_ = {j1};
    n->symmetric_ = true;
    if (!(2.0 * w.alpha + sd.beta > 1.0))
      throw std::invalid_argument("base_g1: catalog requires 2*alpha+beta > 1");
    return n;
  }

  static NodePtr scalar(double v) {
    auto n = std::make_shared<IntegrandNode>(Private{});
    n->kind_ = NodeKind::Scalar;
    n->arity_ = 0;
    n->coef_ = v;
    n->symmetric_ = true;
    return n;
  }

  // Multiply by psi_hat_{j_next}(sum of arguments); arity unchanged.
  static NodePtr lift_F(NodePtr g, const WaveletSpec& w, int j_next) {
    if (!g || g->arity() == 0)
      throw std::invalid_argument("lift_F: child must have positive arity");
    auto n = std::make_shared<IntegrandNode>(Private{});
    n->kind_ = NodeKind::LiftF;
    n->arity_ = g->arity();
    n->children_ = {std::move(g)};
    n->w_ = std::make_shared<WaveletSpec>(w);
    n->j_ = j_next;
    n->scales_ = n->children_[0]->scales_;
    n->scales_.push_back(j_next);
    n->symmetric_ = n->children_[0]->symmetric_;
    return n;
  }

  // r-th contraction f1 (x)_r f2, canonically symmetrized by default. For
  // symmetric children the symmetrization reduces to an average over
  // C(arity, a1-r) block assignments instead of (arity)! permutations.
  static NodePtr contract(NodePtr f1, NodePtr f2, int r,
                          ContractionRule rule = {}, bool symmetrize = true) {
    if (!f1 || !f2) throw std::invalid_argument("contract: null child");
    if (r < 0 || r > std::min(f1->arity(), f2->arity()))
      throw std::invalid_argument("contract: r out of range");
    if (f1->arity() > kMaxArity || f2->arity() > kMaxArity)
      throw std::invalid_argument("contract: arity exceeds the supported maximum");
    auto n = std::make_shared<IntegrandNode>(Private{});
    n->kind_ = NodeKind::SymContraction;
    n->r_ = r;
    n->arity_ = f1->arity() + f2->arity() - 2 * r;
    n->children_ = {std::move(f1), std::move(f2)};
    n->rule_ = rule;
    n->symmetrize_ = symmetrize && n->arity_ > 0;
    if (n->symmetrize_ && !(n->children_[0]->symmetric() && n->children_[1]->symmetric()))
      throw std::invalid_argument("contract: symmetrization requires symmetric children");
    n->symmetric_ = n->symmetrize_ || n->arity_ == 0;
    n->scales_ = n->children_[0]->scales_;
    for (int j : n->children_[1]->scales_)
      if (std::find(n->scales_.begin(), n->scales_.end(), j) == n->scales_.end())
        n->scales_.push_back(j);
    if (n->symmetrize_) n->build_splits();
    return n;
  }

  static NodePtr weighted_sum(std::vector<std::pair<double, NodePtr>> terms) {
    if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
    auto n = std::make_shared<IntegrandNode>(Private{});
    n->kind_ = NodeKind::WeightedSum;
    n->arity_ = terms[0].second->arity();
    n->symmetric_ = true;
    for (auto& [c, t] : terms) {
      if (t->arity() != n->arity_)
        throw std::invalid_argument("weighted_sum: mixed arities");
      n->symmetric_ = n->symmetric_ && t->symmetric();
      n->weights_.push_back(c);
      for (int j : t->scales_)
        if (std::find(n->scales_.begin(), n->scales_.end(), j) == n->scales_.end())
          n->scales_.push_back(j);
      n->children_.push_back(std::move(t));
    }
    return n;
  }

  struct Private {};  // make_shared access
  explicit IntegrandNode(Private) {}

 private:
  complexd eval_impl(std::span<const double> lam) const {
    switch (kind_) {
      case NodeKind::Scalar:
        return complexd(coef_, 0.0);
      case NodeKind::BaseG1:
        return complexd(base_factor(lam[0]) * base_factor(lam[1]), 0.0);
      case NodeKind::LiftF: {
        const double s = std::accumulate(lam.begin(), lam.end(), 0.0);
        return children_[0]->eval_impl(lam) * w_->scaled(j_, s);
      }
      case NodeKind::WeightedSum: {
        complexd acc{};
        for (std::size_t i = 0; i < children_.size(); ++i)
          acc += weights_[i] * children_[i]->eval_impl(lam);
        return acc;
      }
      case NodeKind::SymContraction:
        return eval_contraction(lam);
    }
    return {};
  }

  // psi_hat_{j1}(l) sqrt(f(l)); vanishes at l = 0 because the filter does and
  // 2*alpha+beta > 1 makes the product integrable-square there.
  double base_factor(double l) const {
    if (l == 0.0) return 0.0;
    const double c = sd_->cx(l);
    if (c <= 0.0) return 0.0;
    return w_->scaled(j_, l) *
           std::sqrt(c * std::pow(std::abs(l), sd_->beta - 1.0));
  }

  static constexpr int kMaxArity = 16;

  complexd eval_contraction(std::span<const double> lam) const {
    if (!symmetrize_ || arity_ == 0) {
      const int a1 = children_[0]->arity();
      return raw_contraction(lam.first(a1 - r_), lam.subspan(a1 - r_));
    }
    complexd acc{};
    double left[kMaxArity], right[kMaxArity];
    const int nl = children_[0]->arity() - r_;
    const int nr = children_[1]->arity() - r_;
    for (const auto& split : splits_) {
      int li = 0, ri = 0;
      for (int i = 0; i < arity_; ++i) {
        if (split[i])
          left[li++] = lam[i];
        else
          right[ri++] = lam[i];
      }
      acc += raw_contraction(std::span<const double>(left, nl),
                             std::span<const double>(right, nr));
    }
    return acc / static_cast<double>(splits_.size());
  }

  // integral over tau in R^r of f1(tau, left) f2(-tau, right)
  complexd raw_contraction(std::span<const double> left,
                           std::span<const double> right) const {
    const auto& f1 = *children_[0];
    const auto& f2 = *children_[1];
    double a1[kMaxArity], a2[kMaxArity];
    std::copy(left.begin(), left.end(), a1 + r_);
    std::copy(right.begin(), right.end(), a2 + r_);
    const std::span<const double> s1(a1, f1.arity()), s2(a2, f2.arity());
    if (r_ == 0) return f1.eval_impl(s1) * f2.eval_impl(s2);

    const TanhMapRule& q = tanh_map_rule(rule_.nodes, rule_.map_scale, rule_.panels);
    const std::size_t m = q.lambda.size();
    complexd acc{};
    std::size_t idx[8] = {};
    while (true) {
      double wgt = 1.0;
      for (int d = 0; d < r_; ++d) {
        const double tau = q.lambda[idx[d]];
        a1[d] = tau;
        a2[d] = -tau;
        wgt *= q.weight[idx[d]];
      }
      acc += wgt * f1.eval_impl(s1) * f2.eval_impl(s2);
      int d = 0;
      while (d < r_ && ++idx[d] == m) idx[d++] = 0;
      if (d == r_) break;
    }
    return acc;
  }

  void build_splits() {
    const int n = arity_;
    const int k = children_[0]->arity() - r_;
    // enumerate all C(n, k) block assignments
    std::vector<int> comb(k);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      std::vector<char> m(n, 0);
      for (int c : comb) m[c] = 1;
      splits_.push_back(std::move(m));
      int i = k - 1;
      while (i >= 0 && comb[i] == n - k + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }

  NodeKind kind_ = NodeKind::Scalar;
  int arity_ = 0;
  int j_ = 0;
  int r_ = 0;
  double coef_ = 0.0;
  bool symmetric_ = false;
  bool symmetrize_ = false;
  ContractionRule rule_{};
  std::shared_ptr<const SpectralDensity> sd_;
  std::shared_ptr<const WaveletSpec> w_;
  std::vector<NodePtr> children_;
  std::vector<double> weights_;
  std::vector<int> scales_;
  std::vector<std::vector<char>> splits_;
};

// e^{i t sum(lambda)} * node(lambda): the only way time enters an integrand.
inline complexd eval_at_time(const IntegrandNode& node, double t,
                             std::span<const double> lam) {
  const double s = std::accumulate(lam.begin(), lam.end(), 0.0);
  return std::polar(1.0, t * s) * node.eval(lam);
}

inline NodePtr base_g1(const SpectralDensity& sd, const WaveletSpec& w, int j1) {
  return IntegrandNode::base_g1(sd, w, j1);
}
inline NodePtr lift_F(NodePtr g, const WaveletSpec& w, int j_next) {
  return IntegrandNode::lift_F(std::move(g), w, j_next);
}
inline NodePtr contract(NodePtr f1, NodePtr f2, int r, ContractionRule rule = {},
                        bool symmetrize = true) {
  return IntegrandNode::contract(std::move(f1), std::move(f2), r, rule, symmetrize);
}
inline NodePtr weighted_sum(std::vector<std::pair<double, NodePtr>> terms) {
  return IntegrandNode::weighted_sum(std::move(terms));
}

// ---------------------------------------------------------------------------
// Level recursion. Level m holds
//   F[r], r = 0..2^{m-2}-1  with arity 2^{m-1}-2r      (m >= 2)
//   G[l], l = 0..2^{m-1}    with arity 2^m - 2l        (G.back() is scalar)

struct ChaosLevel {
  int level = 1;
  std::vector<NodePtr> F;
  std::vector<NodePtr> G;
};

inline ChaosLevel first_level(const SpectralDensity& sd, const WaveletSpec& w,
                              int j1) {
  ChaosLevel lv;
  lv.level = 1;
  lv.G.push_back(base_g1(sd, w, j1));
  lv.G.push_back(IntegrandNode::scalar(filtered_l1(sd, w, j1)));
  return lv;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// One step of the recursion: lift every positive-arity G of the previous
// level by the next-scale filter, then combine contractions of F pairs with
// the binomial weights (l-r-r')! C(n_r, l-r-r') C(n_r', l-r-r'), terms with
// negative or oversized contraction order dropping out.
inline ChaosLevel build_level(const ChaosLevel& prev, const WaveletSpec& w,
                              int j_next, ContractionRule rule = {}) {
  ChaosLevel lv;
  lv.level = prev.level + 1;
  for (const auto& g : prev.G)
    if (g->arity() > 0) lv.F.push_back(lift_F(g, w, j_next));

  const int half = 1 << (lv.level - 1);  // 2^{m-1}
  for (int l = 0; l <= half; ++l) {
    std::vector<std::pair<double, NodePtr>> terms;
    for (std::size_t r = 0; r < lv.F.size(); ++r) {
      for (std::size_t rp = 0; rp < lv.F.size(); ++rp) {
        const int p = l - static_cast<int>(r) - static_cast<int>(rp);
        const int nr = lv.F[r]->arity(), nrp = lv.F[rp]->arity();
        if (p < 0 || p > std::min(nr, nrp)) continue;
        const double coef = factorial(p) * binomial(nr, p) * binomial(nrp, p);
        if (coef == 0.0) continue;
        terms.emplace_back(coef, contract(lv.F[r], lv.F[rp], p, rule));
      }
    }
    lv.G.push_back(weighted_sum(std::move(terms)));
  }
  return lv;
}

// Levels 1..M for scales (j_1, ..., j_M).
inline std::vector<ChaosLevel> build_chaos(const SpectralDensity& sd,
                                           const WaveletSpec& w,
                                           std::span<const int> scales, int M,
                                           ContractionRule rule = {}) {
  if (M < 1 || static_cast<int>(scales.size()) < M)
    throw std::invalid_argument("build_chaos: need at least M scales");
  std::vector<ChaosLevel> levels;
  levels.push_back(first_level(sd, w, scales[0]));
  for (int m = 2; m <= M; ++m)
    levels.push_back(build_level(levels.back(), w, scales[m - 1], rule));
  return levels;
}

}  // namespace qscat

#endif  // QSCAT_CHAOS_HPP
