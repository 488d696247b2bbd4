#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "kikuchi/combinatorics.hpp"
#include "kikuchi/model.hpp"
#include "kikuchi/operators.hpp"
#include "kikuchi/rng.hpp"

namespace kikuchi {

// Product vector Pi_lambda base^{(x)lambda}: a coefficient per p-subset
// (colex rank order) plus the block count. Never materialized on tuple space
// for lambda >= 2 unless a routine explicitly needs a small dense expansion.
struct ProductVector {
  int n = 0;
  int p = 0;
  int lambda = 1;
  VectorXd base;

  void validate() const {
    if (lambda < 1) throw std::invalid_argument("ProductVector: lambda >= 1");
    if (static_cast<std::uint64_t>(base.size()) != binomial_u64(n, p))
      throw std::invalid_argument("ProductVector: base dimension != C(n,p)");
    if (lambda * p > n) throw std::invalid_argument("ProductVector: lambda p > n");
    if (!base.allFinite()) throw std::invalid_argument("ProductVector: non-finite coefficient");
  }
};

// Certificate coefficients f(x_S); requires ground-truth labels (test paths).
inline VectorXd certificate_base(const Hypergraph& h, const BiasFunction& f) {
  if (!h.labels()) throw std::invalid_argument("certificate_base: instance has no labels");
  const auto& pr = h.params();
  if (f.k() != pr.k || f.p() != pr.p)
    throw std::invalid_argument("certificate_base: bias shape mismatch");
  const auto& x = h.labels()->x;
  VectorXd v(static_cast<Eigen::Index>(h.num_subsets()));
  std::vector<int> subset(pr.p);
  std::vector<int> occ(pr.k);
  first_subset_lex(pr.p, subset);
  do {
    std::fill(occ.begin(), occ.end(), 0);
    for (int u : subset) occ[x[u]] += 1;
    v[static_cast<Eigen::Index>(subset_rank_colex(subset))] = f.at_occupancy(occ);
  } while (next_subset_lex(pr.n, pr.p, subset));
  return v;
}

// Guiding coefficients A_S, masked to batch 1 when a mask is supplied.
inline VectorXd guiding_base(const Hypergraph& h, const BatchMask* mask = nullptr) {
  const auto& pr = h.params();
  if (mask && mask->batch.size() != h.num_subsets())
    throw std::invalid_argument("guiding_base: mask size mismatch");
  VectorXd u(static_cast<Eigen::Index>(h.num_subsets()));
  for (std::uint64_t r = 0; r < h.num_subsets(); ++r) {
    double val = h.edge_value(r);
    if (mask && !mask->in_batch1(r)) val = 0.0;
    u[static_cast<Eigen::Index>(r)] = val;
  }
  (void)pr;
  return u;
}

struct ValueWithError {
  double value = 0;
  double std_error = 0;
  bool exact = true;
  std::uint64_t samples = 0;
};

struct SamplingOptions {
  std::uint64_t max_exact_terms = 10'000'000;
  std::uint64_t samples = 200'000;
  std::uint64_t seed = 1;
};

namespace detail {

// sum over ordered pairs of DISJOINT p-sets of c_S c_T, by inclusion-
// exclusion over shared vertex subsets:
//   sum_disjoint = (sum c)^2 - sum_{r=1..p} (-1)^{r+1} sum_{|R|=r} b_R^2,
// where b_R = sum_{S >= R} c_S. Exact, O(C(n,p) 2^p).
inline double disjoint_pair_sum(int n, int p, const VectorXd& c) {
  std::vector<std::vector<double>> b(p + 1);
  for (int r = 1; r <= p; ++r) b[r].assign(static_cast<std::size_t>(binomial_u64(n, r)), 0.0);
  std::vector<int> subset(p), sub(p);
  double total = 0.0;
  first_subset_lex(p, subset);
  do {
    const double cs = c[static_cast<Eigen::Index>(subset_rank_colex(subset))];
    total += cs;
    if (cs != 0.0) {
      for (unsigned m = 1; m < (1u << p); ++m) {
        int r = 0;
        for (int t = 0; t < p; ++t)
          if (m & (1u << t)) sub[r++] = subset[t];
        b[r][static_cast<std::size_t>(subset_rank_colex(std::span<const int>(sub.data(), r)))] += cs;
      }
    }
  } while (next_subset_lex(n, p, subset));
  double overlap = 0.0;
  for (int r = 1; r <= p; ++r) {
    KahanSum sq;
    for (double v : b[r]) sq.add(v * v);
    overlap += (r % 2 == 1 ? 1.0 : -1.0) * sq.value();
  }
  return total * total - overlap;
}

// recursive exact sum over collision-free lambda-tuples of prod c_{S_t}
inline double collision_free_sum_enumerate(int n, int p, int lambda, const VectorXd& c) {
  const std::uint64_t m = binomial_u64(n, p);
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(m), std::vector<int>(p));
  {
    std::vector<int> s(p);
    first_subset_lex(p, s);
    std::uint64_t i = 0;
    do {
      sets[static_cast<std::size_t>(subset_rank_colex(s))] = s;
      ++i;
    } while (next_subset_lex(n, p, s));
  }
  std::vector<char> used(n, 0);
  double total = 0.0;
  std::function<void(int, double)> rec = [&](int depth, double prod) {
    if (depth == lambda) {
      total += prod;
      return;
    }
    for (std::uint64_t i = 0; i < m; ++i) {
      const double ci = c[static_cast<Eigen::Index>(i)];
      if (ci == 0.0) continue;
      bool free_set = true;
      for (int v : sets[static_cast<std::size_t>(i)])
        if (used[v]) {
          free_set = false;
          break;
        }
      if (!free_set) continue;
      for (int v : sets[static_cast<std::size_t>(i)]) used[v] = 1;
      rec(depth + 1, prod * ci);
      for (int v : sets[static_cast<std::size_t>(i)]) used[v] = 0;
    }
  };
  rec(0, 1.0);
  return total;
}

// Unbiased importance estimate of sum over collision-free tuples of
// prod c_{S_t}: draw blocks iid from |c| and average sign * 1[collision-free],
// scaled by (sum |c|)^lambda.
inline ValueWithError collision_free_sum_sampled(int n, int p, int lambda, const VectorXd& c,
                                                 std::uint64_t samples, std::uint64_t seed) {
  const std::uint64_t m = binomial_u64(n, p);
  std::vector<double> cum(static_cast<std::size_t>(m));
  double total_abs = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    total_abs += std::abs(c[static_cast<Eigen::Index>(i)]);
    cum[static_cast<std::size_t>(i)] = total_abs;
  }
  ValueWithError out;
  out.exact = false;
  out.samples = samples;
  if (total_abs == 0.0) return out;
  const double scale = std::pow(total_abs, lambda);
  CounterRng rng(seed, Stream::sampling);
  std::vector<int> block(p);
  std::vector<char> used(n, 0);
  double acc = 0.0, acc2 = 0.0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    double sign = 1.0;
    bool cf = true;
    std::fill(used.begin(), used.end(), 0);
    for (int t = 0; t < lambda && cf; ++t) {
      const double target = rng.next_double() * total_abs;
      const std::uint64_t idx =
          std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
      const double cv = c[static_cast<Eigen::Index>(idx)];
      if (cv < 0) sign = -sign;
      subset_unrank_colex(idx, p, block);
      for (int v : block) {
        if (used[v]) {
          cf = false;
          break;
        }
        used[v] = 1;
      }
    }
    const double val = cf ? sign : 0.0;
    acc += val;
    acc2 += val * val;
  }
  const double mean = acc / static_cast<double>(samples);
  const double var = std::max(0.0, acc2 / static_cast<double>(samples) - mean * mean);
  out.value = scale * mean;
  out.std_error = scale * std::sqrt(var / static_cast<double>(samples));
  return out;
}

inline ValueWithError collision_free_sum(int n, int p, int lambda, const VectorXd& c,
                                         const SamplingOptions& opts) {
  ValueWithError out;
  if (lambda == 1) {
    KahanSum acc;
    for (Eigen::Index i = 0; i < c.size(); ++i) acc.add(c[i]);
    out.value = acc.value();
    return out;
  }
  if (lambda == 2) {
    out.value = disjoint_pair_sum(n, p, c);
    return out;
  }
  const double m = binomial(n, p);
  if (std::pow(m, lambda) <= static_cast<double>(opts.max_exact_terms)) {
    out.value = collision_free_sum_enumerate(n, p, lambda, c);
    return out;
  }
  return collision_free_sum_sampled(n, p, lambda, c, opts.samples, opts.seed);
}

} // namespace detail

// ||Pi_lambda base^{(x)lambda}||^2: exact for lambda <= 2 (inclusion-
// exclusion), exact enumeration below the term cap, sampled beyond.
inline ValueWithError collision_free_norm2(const ProductVector& pv,
                                           const SamplingOptions& opts = {}) {
  pv.validate();
  VectorXd sq = pv.base.array().square();
  return detail::collision_free_sum(pv.n, pv.p, pv.lambda, sq, opts);
}

// <pv1 | pv2> over the collision-free sector.
inline ValueWithError overlap(const ProductVector& pv1, const ProductVector& pv2,
                              const SamplingOptions& opts = {}) {
  pv1.validate();
  pv2.validate();
  if (pv1.n != pv2.n || pv1.p != pv2.p || pv1.lambda != pv2.lambda)
    throw std::invalid_argument("overlap: shape mismatch");
  VectorXd prod = pv1.base.array() * pv2.base.array();
  return detail::collision_free_sum(pv1.n, pv1.p, pv1.lambda, prod, opts);
}

// <pv1|pv2> / (||pv1|| ||pv2||); sampling errors propagated in quadrature.
inline ValueWithError normalized_overlap(const ProductVector& pv1, const ProductVector& pv2,
                                         const SamplingOptions& opts = {}) {
  const ValueWithError num = overlap(pv1, pv2, opts);
  SamplingOptions o1 = opts;
  o1.seed = opts.seed + 1;
  SamplingOptions o2 = opts;
  o2.seed = opts.seed + 2;
  const ValueWithError n1 = collision_free_norm2(pv1, o1);
  const ValueWithError n2 = collision_free_norm2(pv2, o2);
  ValueWithError out;
  if (n1.value <= 0 || n2.value <= 0) throw std::runtime_error("normalized_overlap: zero norm");
  out.value = num.value / std::sqrt(n1.value * n2.value);
  out.exact = num.exact && n1.exact && n2.exact;
  out.samples = num.samples;
  if (!out.exact) {
    const double rel2 = std::pow(num.std_error / std::max(1e-300, std::abs(num.value)), 2) +
                        0.25 * std::pow(n1.std_error / n1.value, 2) +
                        0.25 * std::pow(n2.std_error / n2.value, 2);
    out.std_error = std::abs(out.value) * std::sqrt(rel2);
  }
  return out;
}

// --- Rayleigh quotient <pv|K|pv> / <pv|pv> -----------------------------------

// Exact at lambda = 1 through the set-sector operator ((p/2)! correspondence
// factor), exact on small tuple spaces, otherwise an unbiased row-sampled
// estimate: E_{T ~ w^2} (K w)_T / w_T with w the tuple-space expansion.
inline ValueWithError rayleigh(const KikuchiOperator& op, const ProductVector& pv,
                               const SamplingOptions& opts = {}) {
  pv.validate();
  (void)opts;
  if (op.ell() != pv.lambda * pv.p) throw std::invalid_argument("rayleigh: ell mismatch");
  ValueWithError out;
  if (pv.lambda == 1) {
    // one set-sector matvec; factor (p/2)! lifts to bosonic normalization
    VectorXd y;
    if (op.mode() == OperatorMode::bosonic_implicit) {
      KikuchiOperator setop(op.edges().hypergraph(), op.ell(), OperatorMode::set_implicit,
                            op.edges().mask(), op.edges().filter(), 1);
      setop.matvec(pv.base, y);
    } else {
      op.matvec(pv.base, y);
    }
    const double num = pv.base.dot(y) * factorial(pv.p / 2);
    const double den = pv.base.squaredNorm();
    out.value = num / den;
    return out;
  }
  throw std::invalid_argument("rayleigh: use rayleigh_sampled for lambda >= 2");
}

// Row-sampled Rayleigh estimate for lambda >= 2 on the bosonic operator.
inline ValueWithError rayleigh_sampled(const Hypergraph& h, const ProductVector& pv,
                                       std::uint64_t samples, std::uint64_t seed,
                                       std::shared_ptr<const BatchMask> mask = nullptr,
                                       EdgeFilter filter = EdgeFilter::all) {
  pv.validate();
  const int n = pv.n, p = pv.p, lambda = pv.lambda, ell = lambda * p;
  const EdgeSource edges(h, std::move(mask), filter);
  // block sampler ~ base^2
  const std::uint64_t m = binomial_u64(n, p);
  std::vector<double> cum(static_cast<std::size_t>(m));
  double total = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    const double b = pv.base[static_cast<Eigen::Index>(i)];
    total += b * b;
    cum[static_cast<std::size_t>(i)] = total;
  }
  if (total <= 0) throw std::runtime_error("rayleigh_sampled: zero base");
  CounterRng rng(seed, Stream::sampling);

  std::vector<int> T(ell), block(p), edge(p), V(ell), bsorted(p);
  std::vector<char> used(n, 0);
  const int half = p / 2;
  std::vector<std::vector<int>> position_subsets;
  {
    std::vector<int> s(half);
    first_subset_lex(half, s);
    do {
      position_subsets.push_back(s);
    } while (next_subset_lex(ell, half, s));
  }
  auto w_at = [&](std::span<const int> tuple) -> double {
    double prod = 1.0;
    for (int b = 0; b < lambda; ++b) {
      for (int t = 0; t < p; ++t) bsorted[t] = tuple[b * p + t];
      std::sort(bsorted.begin(), bsorted.end());
      prod *= pv.base[static_cast<Eigen::Index>(subset_rank_colex(bsorted))];
    }
    return prod;
  };

  double acc = 0.0, acc2 = 0.0;
  std::uint64_t kept = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    // draw collision-free block tuple ~ prod base^2 by rejection
    bool ok = true;
    std::fill(used.begin(), used.end(), 0);
    for (int b = 0; b < lambda && ok; ++b) {
      const double target = rng.next_double() * total;
      const std::uint64_t idx = std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
      subset_unrank_colex(idx, p, block);
      for (int t = 0; t < p; ++t) {
        if (used[block[t]]) {
          ok = false;
          break;
        }
        used[block[t]] = 1;
        T[b * p + t] = block[t];
      }
    }
    if (!ok) continue; // rejection keeps the conditional law ~ w^2 on C_lambda
    ++kept;
    const double wT = w_at(T);
    // (K w)_T by row enumeration
    double row = 0.0;
    for (const auto& pos : position_subsets) {
      V = T;
      std::vector<int> stack(half, -1);
      std::vector<char> vused(n, 0);
      for (int v : T) vused[v] = 1;
      std::vector<int> fresh;
      for (int v = 0; v < n; ++v)
        if (!vused[v]) fresh.push_back(v);
      std::vector<char> fused(fresh.size(), 0);
      int depth = 0;
      while (depth >= 0) {
        int& cur = stack[depth];
        if (cur >= 0) fused[cur] = 0;
        ++cur;
        while (cur < static_cast<int>(fresh.size()) && fused[cur]) ++cur;
        if (cur >= static_cast<int>(fresh.size())) {
          stack[depth] = -1;
          --depth;
          continue;
        }
        fused[cur] = 1;
        V[pos[depth]] = fresh[cur];
        if (depth + 1 < half) {
          ++depth;
          continue;
        }
        for (int t = 0; t < half; ++t) {
          edge[t] = T[pos[t]];
          edge[half + t] = V[pos[t]];
        }
        std::sort(edge.begin(), edge.end());
        const double a = edges.value_sorted(edge);
        if (a != 0.0) row += a * w_at(V);
      }
    }
    const double val = row / wT;
    acc += val;
    acc2 += val * val;
  }
  ValueWithError out;
  out.exact = false;
  out.samples = kept;
  if (kept == 0) throw std::runtime_error("rayleigh_sampled: all samples rejected");
  out.value = acc / static_cast<double>(kept);
  const double var = std::max(0.0, acc2 / static_cast<double>(kept) - out.value * out.value);
  out.std_error = std::sqrt(var / static_cast<double>(kept));
  return out;
}

// --- dense spectra and eigenspace masses --------------------------------------

// Full eigendecomposition of the set-sector matrix, reported in bosonic
// normalization (values scaled by (p/2)!). Exact for ell = p.
struct SetSpectrum {
  VectorXd values; // ascending, bosonic units
  MatrixXd vectors;
  double scale = 1.0;
};

inline SetSpectrum set_spectrum(const Hypergraph& h, int ell,
                                std::shared_ptr<const BatchMask> mask = nullptr,
                                EdgeFilter filter = EdgeFilter::all) {
  KikuchiOperator op(h, ell, OperatorMode::set_dense, std::move(mask), filter);
  MatrixXd K = op.dense_set_matrix();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
  SetSpectrum s;
  s.scale = op.bosonic_scale();
  s.values = es.eigenvalues() * s.scale;
  s.vectors = es.eigenvectors();
  return s;
}

// <pv| Pi_{>= tau} |pv> / <pv|pv> from a full spectrum; lambda = 1 vectors.
inline double eigenspace_overlap(const SetSpectrum& spec, const VectorXd& base,
                                 double tau_bosonic) {
  if (spec.vectors.rows() != base.size())
    throw std::invalid_argument("eigenspace_overlap: dimension mismatch");
  const double den = base.squaredNorm();
  if (den == 0) throw std::invalid_argument("eigenspace_overlap: zero vector");
  double mass = 0.0;
  for (Eigen::Index i = 0; i < spec.values.size(); ++i) {
    if (spec.values[i] >= tau_bosonic) {
      const double a = spec.vectors.col(i).dot(base);
      mass += a * a;
    }
  }
  return mass / den;
}

// --- sample splitting ----------------------------------------------------------

// Batch-1 edges feed the guiding vector; the complement feeds the operator.
// Conditioned on labels the two are independent.
struct SplitPipeline {
  std::shared_ptr<const BatchMask> mask;
  KikuchiOperator op; // complement-of-batch-1 operator
  ProductVector guide;
};

inline SplitPipeline split(const Hypergraph& h, int ell, std::uint64_t mask_seed,
                           OperatorMode mode = OperatorMode::bosonic_implicit, int threads = 1) {
  const auto& pr = h.params();
  auto mask = std::make_shared<const BatchMask>(BatchMask::draw(pr.n, pr.p, mask_seed));
  ProductVector guide;
  guide.n = pr.n;
  guide.p = pr.p;
  guide.lambda = ell / pr.p;
  guide.base = guiding_base(h, mask.get());
  return SplitPipeline{mask,
                       KikuchiOperator(h, ell, mode, mask, EdgeFilter::complement_of_batch1,
                                       threads),
                       std::move(guide)};
}

} // namespace kikuchi
