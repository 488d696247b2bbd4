#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kikuchi/combinatorics.hpp"
#include "kikuchi/model.hpp"
#include "kikuchi/moments.hpp"
#include "kikuchi/rng.hpp"

namespace kikuchi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Natural log; every `log(n)` in a threshold formula means this.
inline double threshold_log(double n) { return std::log(n); }

// --- sample splitting mask ---------------------------------------------------

// Random assignment of every p-subset to one of L = ceil(ln n) batches, drawn
// from its own seed so it is independent of (x, Y).
struct BatchMask {
  int L = 1;
  double zeta = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> batch; // indexed by p-subset colex rank

  static BatchMask draw(int n, int p, std::uint64_t mask_seed) {
    BatchMask m;
    m.L = std::max<int>(1, static_cast<int>(std::ceil(threshold_log(n))));
    m.zeta = 1.0 / m.L;
    m.seed = mask_seed;
    const std::uint64_t cnt = binomial_u64(n, p);
    m.batch.resize(static_cast<std::size_t>(cnt));
    for (std::uint64_t r = 0; r < cnt; ++r)
      m.batch[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(
          uniform_int(mask_seed, Stream::batch_mask, r, static_cast<std::uint64_t>(m.L)));
    return m;
  }

  bool in_batch1(std::uint64_t rank) const { return batch[static_cast<std::size_t>(rank)] == 0; }
};

enum class EdgeFilter { all, complement_of_batch1, batch1_only };

// Filtered access to A_S. Entries removed by the filter read as zero.
// Holds shared ownership of the mask so operator objects stay valid on move.
class EdgeSource {
 public:
  EdgeSource(const Hypergraph& h, std::shared_ptr<const BatchMask> mask = nullptr,
             EdgeFilter filter = EdgeFilter::all)
      : h_(&h), mask_(std::move(mask)), filter_(filter) {
    if (filter_ != EdgeFilter::all && mask_ == nullptr)
      throw std::invalid_argument("EdgeSource: filter requires a mask");
  }

  const Hypergraph& hypergraph() const { return *h_; }
  int n() const { return h_->params().n; }
  int p() const { return h_->params().p; }
  const std::shared_ptr<const BatchMask>& mask() const { return mask_; }
  EdgeFilter filter() const { return filter_; }

  double value_by_rank(std::uint64_t rank) const {
    if (filter_ != EdgeFilter::all) {
      const bool b1 = mask_->in_batch1(rank);
      if (filter_ == EdgeFilter::complement_of_batch1 && b1) return 0.0;
      if (filter_ == EdgeFilter::batch1_only && !b1) return 0.0;
    }
    return h_->edge_value(rank);
  }

  double value_sorted(std::span<const int> sorted_edge) const {
    return value_by_rank(subset_rank_colex(sorted_edge));
  }

  // Fully symmetric dense tensor over [n]^p (p = 2 or 4): entry at any
  // permutation of a p-set equals A of that set, entries with repeated
  // indices are zero. O(1) edge lookups for the hot matvec loops.
  std::vector<double> dense_sym_tensor() const {
    const int n = this->n();
    const int p = this->p();
    if (p != 2 && p != 4) throw std::invalid_argument("dense_sym_tensor: p in {2,4}");
    const double szd = std::pow(static_cast<double>(n), p);
    if (szd > 2.6e7) throw std::invalid_argument("dense_sym_tensor: n^p beyond cap");
    std::vector<double> t(static_cast<std::size_t>(szd), 0.0);
    std::vector<int> e(p);
    first_subset_lex(p, e);
    do {
      const double v = value_sorted(e);
      if (p == 2) {
        t[static_cast<std::size_t>(e[0]) * n + e[1]] = v;
        t[static_cast<std::size_t>(e[1]) * n + e[0]] = v;
      } else {
        std::array<int, 4> a{e[0], e[1], e[2], e[3]};
        std::sort(a.begin(), a.end());
        do {
          t[((static_cast<std::size_t>(a[0]) * n + a[1]) * n + a[2]) * n + a[3]] = v;
        } while (std::next_permutation(a.begin(), a.end()));
      }
    } while (next_subset_lex(n, p, e));
    return t;
  }

 private:
  const Hypergraph* h_;
  std::shared_ptr<const BatchMask> mask_;
  EdgeFilter filter_;
};

// --- tuple symmetric difference ---------------------------------------------

// S (-) V: if S and V disagree in exactly p/2 positions, the p-tuple listing
// S's disagreeing entries (by increasing position) then V's; otherwise empty.
inline std::optional<std::vector<int>> sym_diff_tuple(std::span<const int> S,
                                                      std::span<const int> V, int p) {
  if (S.size() != V.size()) throw std::invalid_argument("sym_diff_tuple: length mismatch");
  std::vector<int> mine, theirs;
  for (std::size_t a = 0; a < S.size(); ++a)
    if (S[a] != V[a]) {
      mine.push_back(S[a]);
      theirs.push_back(V[a]);
    }
  if (2 * static_cast<int>(mine.size()) != p) return std::nullopt;
  mine.insert(mine.end(), theirs.begin(), theirs.end());
  return mine;
}

// --- the operator -------------------------------------------------------------

enum class OperatorMode { bosonic_implicit, set_implicit, set_dense };

inline const char* to_string(OperatorMode m) {
  switch (m) {
    case OperatorMode::bosonic_implicit: return "implicit";
    case OperatorMode::set_implicit: return "set";
    case OperatorMode::set_dense: return "dense";
  }
  return "?";
}

// The ell-th order Kikuchi matrix as a matrix-free symmetric operator.
//
//  * bosonic_implicit: on no-repeat ell-tuples; entry K_{S,V} = A of the
//    p-set underlying S (-) V when S, V differ in exactly p/2 positions.
//  * set_implicit / set_dense: the set-indexed variant on C([n], ell) with
//    entries A_{S triangle V} when |S triangle V| = p. At ell = p this is the
//    symmetric sector of the bosonic operator up to a factor (p/2)!.
class KikuchiOperator {
 public:
  KikuchiOperator(const Hypergraph& h, int ell, OperatorMode mode,
                  std::shared_ptr<const BatchMask> mask = nullptr,
                  EdgeFilter filter = EdgeFilter::all, int threads = 1)
      : edges_(h, std::move(mask), filter), ell_(ell), mode_(mode),
        threads_(std::max(1, threads)) {
    const auto& pr = h.params();
    n_ = pr.n;
    p_ = pr.p;
    if (p_ % 2 != 0) throw std::invalid_argument("KikuchiOperator: p must be even");
    if (ell_ % p_ != 0) throw std::invalid_argument("KikuchiOperator: ell must be a multiple of p");
    if (ell_ < p_ / 2 || ell_ > n_ - p_ / 2)
      throw std::invalid_argument("KikuchiOperator: ell out of [p/2, n - p/2]");
    lambda_ = ell_ / p_;

    if (mode_ == OperatorMode::bosonic_implicit) {
      tindex_.emplace(n_, ell_);
      dim_ = tindex_->cardinality();
      const double flat = std::pow(static_cast<double>(n_), ell_);
      use_flat_ = (p_ == 2 || p_ == 4) && flat <= 3.3e7;
      if (use_flat_) build_flat_rows();
    } else {
      dim_ = binomial_u64(n_, ell_);
      if (mode_ == OperatorMode::set_dense && dim_ > 50000)
        throw std::invalid_argument("set_dense: C(n, ell) beyond dense cap");
    }
    const double np = std::pow(static_cast<double>(n_), p_);
    if ((p_ == 2 || p_ == 4) && np <= 2.6e7) atensor_ = edges_.dense_sym_tensor();
    position_subsets_ = make_position_subsets(ell_, p_ / 2);
  }

  std::uint64_t dim() const { return dim_; }
  int n() const { return n_; }
  int p() const { return p_; }
  int ell() const { return ell_; }
  int lambda() const { return lambda_; }
  OperatorMode mode() const { return mode_; }
  const EdgeSource& edges() const { return edges_; }
  void set_threads(int t) { threads_ = std::max(1, t); }
  // test hook: route bosonic matvec through the generic enumeration path
  void force_generic_path() { use_flat_ = false; }

  // multiplier taking set-variant eigenvalues to bosonic normalization;
  // exact on the symmetric sector at ell = p
  double bosonic_scale() const {
    return mode_ == OperatorMode::bosonic_implicit ? 1.0 : factorial(p_ / 2);
  }

  // nonzero entries per row are at most C(ell, p/2) * (n - ell) falling p/2
  double row_degree_bound() const {
    return binomial(ell_, p_ / 2) * falling_factorial(n_ - ell_, p_ / 2);
  }

  void matvec(const VectorXd& x, VectorXd& y) const {
    if (static_cast<std::uint64_t>(x.size()) != dim_)
      throw std::invalid_argument("matvec: dimension mismatch");
    y.resize(x.size());
    if (mode_ == OperatorMode::bosonic_implicit) {
      if (use_flat_)
        matvec_bosonic_flat(x, y);
      else
        matvec_bosonic_generic(x, y);
    } else {
      matvec_set(x, y);
    }
  }

  VectorXd apply(const VectorXd& x) const {
    VectorXd y;
    matvec(x, y);
    return y;
  }

  // Dense tuple-space materialization straight from the entry rule; test
  // oracle for the implicit paths.
  MatrixXd dense_tuple_matrix() const {
    if (mode_ != OperatorMode::bosonic_implicit)
      throw std::invalid_argument("dense_tuple_matrix: bosonic mode only");
    if (dim_ > 20000) throw std::invalid_argument("dense_tuple_matrix: dimension too large");
    const std::size_t d = static_cast<std::size_t>(dim_);
    MatrixXd K = MatrixXd::Zero(d, d);
    std::vector<int> S(ell_), V(ell_);
    for (std::size_t i = 0; i < d; ++i) {
      tindex_->unrank(i, S);
      for (std::size_t j = 0; j < d; ++j) {
        tindex_->unrank(j, V);
        auto sv = sym_diff_tuple(S, V, p_);
        if (!sv) continue;
        std::sort(sv->begin(), sv->end());
        bool distinct = true;
        for (std::size_t t = 0; t + 1 < sv->size(); ++t)
          if ((*sv)[t] == (*sv)[t + 1]) distinct = false;
        if (!distinct) continue;
        K(i, j) = edges_.value_sorted(*sv);
      }
    }
    return K;
  }

  // Dense set-indexed matrix with entries A_{S triangle V}.
  MatrixXd dense_set_matrix() const {
    if (mode_ == OperatorMode::bosonic_implicit)
      throw std::invalid_argument("dense_set_matrix: set modes only");
    const std::size_t d = static_cast<std::size_t>(dim_);
    if (d > 20000) throw std::invalid_argument("dense_set_matrix: dimension too large");
    MatrixXd K = MatrixXd::Zero(d, d);
    std::vector<int> U(ell_), W(ell_), diff;
    for (std::size_t i = 0; i < d; ++i) {
      subset_unrank_colex(i, ell_, U);
      for (std::size_t j = i + 1; j < d; ++j) {
        subset_unrank_colex(j, ell_, W);
        diff.clear();
        std::set_symmetric_difference(U.begin(), U.end(), W.begin(), W.end(),
                                      std::back_inserter(diff));
        if (static_cast<int>(diff.size()) != p_) continue;
        const double v = edges_.value_sorted(diff);
        K(i, j) = v;
        K(j, i) = v;
      }
    }
    return K;
  }

  // structural nonzero count of one row (entries that can be nonzero)
  std::uint64_t row_degree(std::uint64_t row) const {
    (void)row; // every row has the same structural degree
    const int half = p_ / 2;
    if (mode_ == OperatorMode::bosonic_implicit)
      return static_cast<std::uint64_t>(binomial(ell_, half) *
                                        falling_factorial(n_ - ell_, half));
    return static_cast<std::uint64_t>(binomial(ell_, half) * binomial(n_ - ell_, half));
  }

 private:
  static std::vector<std::vector<int>> make_position_subsets(int ell, int half) {
    std::vector<std::vector<int>> out;
    std::vector<int> s(half);
    first_subset_lex(half, s);
    do {
      out.push_back(s);
    } while (next_subset_lex(ell, half, s));
    return out;
  }

  void build_flat_rows() {
    const std::size_t flat_sz = static_cast<std::size_t>(std::pow(static_cast<double>(n_), ell_));
    flat_of_row_.resize(static_cast<std::size_t>(dim_));
    row_of_flat_.assign(flat_sz, -1);
    std::vector<int> S(ell_);
    for (std::uint64_t r = 0; r < dim_; ++r) {
      tindex_->unrank(r, S);
      std::size_t code = 0;
      for (int t = 0; t < ell_; ++t) code = code * n_ + static_cast<std::size_t>(S[t]);
      flat_of_row_[static_cast<std::size_t>(r)] = code;
      row_of_flat_[code] = static_cast<std::int64_t>(r);
    }
    strides_.resize(ell_);
    std::size_t s = 1;
    for (int t = ell_ - 1; t >= 0; --t) {
      strides_[t] = s;
      s *= n_;
    }
  }

  void parallel_rows(std::uint64_t total, const std::function<void(std::uint64_t, std::uint64_t)>& body) const {
    if (threads_ <= 1) {
      body(0, total);
      return;
    }
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (total + threads_ - 1) / threads_;
    for (int t = 0; t < threads_; ++t) {
      const std::uint64_t lo = std::min<std::uint64_t>(t * chunk, total);
      const std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, total);
      if (lo >= hi) break;
      pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
  }

  void matvec_bosonic_flat(const VectorXd& x, VectorXd& y) const {
    const int n = n_;
    const double* A = atensor_.data();
    // x scattered onto flat tuple codes
    std::vector<double> xf(row_of_flat_.size(), 0.0);
    for (std::uint64_t r = 0; r < dim_; ++r)
      xf[flat_of_row_[static_cast<std::size_t>(r)]] = x[static_cast<Eigen::Index>(r)];

    parallel_rows(dim_, [&](std::uint64_t lo, std::uint64_t hi) {
      std::vector<int> S(ell_);
      std::vector<char> in_s(n_, 0);
      std::vector<int> fresh;
      fresh.reserve(n_);
      for (std::uint64_t r = lo; r < hi; ++r) {
        const std::size_t code = flat_of_row_[static_cast<std::size_t>(r)];
        std::size_t c = code;
        for (int t = ell_ - 1; t >= 0; --t) {
          S[t] = static_cast<int>(c % n_);
          c /= n_;
        }
        std::fill(in_s.begin(), in_s.end(), 0);
        for (int v : S) in_s[v] = 1;
        fresh.clear();
        for (int v = 0; v < n_; ++v)
          if (!in_s[v]) fresh.push_back(v);
        const int nf = static_cast<int>(fresh.size());
        double acc = 0.0;
        if (p_ == 4) {
          for (const auto& pos : position_subsets_) {
            const int i = pos[0], j = pos[1];
            const int si = S[i], sj = S[j];
            const std::size_t base = code - si * strides_[i] - sj * strides_[j];
            const std::size_t abase = (static_cast<std::size_t>(si) * n + sj) * n;
            for (int ai = 0; ai < nf; ++ai) {
              const int a = fresh[ai];
              const std::size_t xa = base + static_cast<std::size_t>(a) * strides_[i];
              const double* arow = A + (abase + static_cast<std::size_t>(a)) * n;
              double inner = 0.0;
              for (int bi = 0; bi < nf; ++bi) {
                const int b = fresh[bi];
                inner += arow[b] * xf[xa + b * strides_[j]];
              }
              acc += inner; // arow[a] pairs with b == a excluded: A has zero there
            }
          }
        } else { // p == 2
          for (const auto& pos : position_subsets_) {
            const int i = pos[0];
            const int si = S[i];
            const std::size_t base = code - si * strides_[i];
            const double* arow = A + static_cast<std::size_t>(si) * n;
            for (int ai = 0; ai < nf; ++ai) {
              const int a = fresh[ai];
              acc += arow[a] * xf[base + static_cast<std::size_t>(a) * strides_[i]];
            }
          }
        }
        y[static_cast<Eigen::Index>(r)] = acc;
      }
    });
  }

  void matvec_bosonic_generic(const VectorXd& x, VectorXd& y) const {
    parallel_rows(dim_, [&](std::uint64_t lo, std::uint64_t hi) {
      std::vector<int> S(ell_), V(ell_), edge(p_), fresh;
      fresh.reserve(n_);
      const int half = p_ / 2;
      std::vector<int> sel(half);
      for (std::uint64_t r = lo; r < hi; ++r) {
        tindex_->unrank(r, S);
        std::vector<char> in_s(n_, 0);
        for (int v : S) in_s[v] = 1;
        fresh.clear();
        for (int v = 0; v < n_; ++v)
          if (!in_s[v]) fresh.push_back(v);
        double acc = 0.0;
        for (const auto& pos : position_subsets_) {
          V = S;
          // ordered selections of `half` distinct fresh values
          std::vector<int> stack(half, -1);
          std::vector<char> used(fresh.size(), 0);
          int depth = 0;
          while (depth >= 0) {
            int& cur = stack[depth];
            if (cur >= 0) used[cur] = 0;
            ++cur;
            while (cur < static_cast<int>(fresh.size()) && used[cur]) ++cur;
            if (cur >= static_cast<int>(fresh.size())) {
              stack[depth] = -1;
              --depth;
              continue;
            }
            used[cur] = 1;
            V[pos[depth]] = fresh[cur];
            if (depth + 1 < half) {
              ++depth;
              continue;
            }
            // full selection: edge = removed union added
            for (int t = 0; t < half; ++t) {
              edge[t] = S[pos[t]];
              edge[half + t] = V[pos[t]];
            }
            std::sort(edge.begin(), edge.end());
            const double a = edges_.value_sorted(edge);
            if (a != 0.0) acc += a * x[static_cast<Eigen::Index>(tindex_->rank(V))];
          }
        }
        y[static_cast<Eigen::Index>(r)] = acc;
      }
    });
  }

  // set-sector fast path at ell = p: both x and A live in fully symmetric
  // dense [n]^p arrays, so every partner is two O(1) strided lookups
  void matvec_set_flat(const VectorXd& x, VectorXd& y) const {
    const int n = n_;
    const double* A = atensor_.data();
    const std::size_t np = atensor_.size();
    std::vector<double> xs(np, 0.0);
    {
      std::vector<int> U(p_);
      for (std::uint64_t r = 0; r < dim_; ++r) {
        subset_unrank_colex(r, p_, U);
        const double v = x[static_cast<Eigen::Index>(r)];
        if (p_ == 2) {
          xs[static_cast<std::size_t>(U[0]) * n + U[1]] = v;
          xs[static_cast<std::size_t>(U[1]) * n + U[0]] = v;
        } else {
          std::array<int, 4> a{U[0], U[1], U[2], U[3]};
          do {
            xs[((static_cast<std::size_t>(a[0]) * n + a[1]) * n + a[2]) * n + a[3]] = v;
          } while (std::next_permutation(a.begin(), a.end()));
        }
      }
    }
    parallel_rows(dim_, [&](std::uint64_t lo, std::uint64_t hi) {
      std::vector<int> U(p_);
      std::vector<char> in_u(n_, 0);
      std::vector<int> fresh;
      fresh.reserve(n_);
      for (std::uint64_t r = lo; r < hi; ++r) {
        subset_unrank_colex(r, p_, U);
        std::fill(in_u.begin(), in_u.end(), 0);
        for (int v : U) in_u[v] = 1;
        fresh.clear();
        for (int v = 0; v < n_; ++v)
          if (!in_u[v]) fresh.push_back(v);
        const int nf = static_cast<int>(fresh.size());
        double acc = 0.0;
        if (p_ == 4) {
          // drop pair (U[i], U[j]), keep the other two
          static constexpr int kPairs[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                               {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
          for (const auto& pr : kPairs) {
            const int d0 = U[pr[0]], d1 = U[pr[1]], k0 = U[pr[2]], k1 = U[pr[3]];
            const double* arow = A + (static_cast<std::size_t>(d0) * n + d1) * n * n;
            const double* xrow = xs.data() + (static_cast<std::size_t>(k0) * n + k1) * n * n;
            for (int ai = 0; ai < nf; ++ai) {
              const std::size_t a = static_cast<std::size_t>(fresh[ai]) * n;
              double inner = 0.0;
              for (int bi = ai + 1; bi < nf; ++bi) {
                const int b = fresh[bi];
                inner += arow[a + b] * xrow[a + b];
              }
              acc += inner;
            }
          }
        } else { // p == 2: drop one vertex, add one; every partner arises once
          for (int t = 0; t < 2; ++t) {
            const int d0 = U[t], k0 = U[1 - t];
            const double* arow = A + static_cast<std::size_t>(d0) * n;
            const double* xrow = xs.data() + static_cast<std::size_t>(k0) * n;
            for (int ai = 0; ai < nf; ++ai) {
              const int a = fresh[ai];
              acc += arow[a] * xrow[a];
            }
          }
        }
        y[static_cast<Eigen::Index>(r)] = acc;
      }
    });
  }

  void matvec_set(const VectorXd& x, VectorXd& y) const {
    if (ell_ == p_ && !atensor_.empty()) {
      matvec_set_flat(x, y);
      return;
    }
    const int half = p_ / 2;
    parallel_rows(dim_, [&](std::uint64_t lo, std::uint64_t hi) {
      std::vector<int> U(ell_), kept(ell_ - half), edge(p_), W(ell_), an(half);
      std::vector<int> comp(n_ - ell_), drop_sel(half), sel(half);
      std::vector<char> in_u(n_, 0);
      for (std::uint64_t r = lo; r < hi; ++r) {
        subset_unrank_colex(r, ell_, U);
        std::fill(in_u.begin(), in_u.end(), 0);
        for (int v : U) in_u[v] = 1;
        int ci = 0;
        for (int v = 0; v < n_; ++v)
          if (!in_u[v]) comp[ci++] = v;
        double acc = 0.0;
        first_subset_lex(half, drop_sel);
        do {
          int ki = 0;
          for (int t = 0; t < ell_; ++t) {
            bool dropped = false;
            for (int d = 0; d < half; ++d)
              if (drop_sel[d] == t) dropped = true;
            if (!dropped) kept[ki++] = U[t];
          }
          first_subset_lex(half, sel);
          do {
            for (int t = 0; t < half; ++t) an[t] = comp[sel[t]];
            for (int t = 0; t < half; ++t) edge[t] = U[drop_sel[t]];
            for (int t = 0; t < half; ++t) edge[half + t] = an[t];
            std::sort(edge.begin(), edge.end());
            const double a = edges_.value_sorted(edge);
            if (a != 0.0) {
              std::merge(kept.begin(), kept.end(), an.begin(), an.end(), W.begin());
              acc += a * x[static_cast<Eigen::Index>(subset_rank_colex(W))];
            }
          } while (next_subset_lex(static_cast<int>(comp.size()), half, sel));
        } while (next_subset_lex(ell_, half, drop_sel));
        y[static_cast<Eigen::Index>(r)] = acc;
      }
    });
  }

  EdgeSource edges_;
  int ell_, n_ = 0, p_ = 0, lambda_ = 0;
  OperatorMode mode_;
  int threads_;
  std::uint64_t dim_ = 0;
  std::optional<TupleIndex> tindex_;
  std::vector<std::vector<int>> position_subsets_;
  std::vector<double> atensor_;
  bool use_flat_ = false;
  std::vector<std::size_t> flat_of_row_;
  std::vector<std::int64_t> row_of_flat_;
  std::vector<std::size_t> strides_;
};

// Free-function spelling for the dense set-indexed variant.
inline MatrixXd dense_set_kikuchi(const Hypergraph& h, int ell) {
  KikuchiOperator op(h, ell, OperatorMode::set_dense);
  return op.dense_set_matrix();
}

// --- eigenvalue estimation -----------------------------------------------------

struct SpectralEstimate {
  double lambda_max = 0;         // native units of the operator mode
  double bosonic_equivalent = 0; // lambda_max * bosonic_scale()
  int iterations = 0;
  double residual = 0; // ||K v - lambda v|| / ||v|| (or tridiagonal estimate)
  std::string method = "lanczos";
  bool converged = false;
};

struct EigOptions {
  double tol = 1e-6;
  int max_iter = 0; // 0 -> 10 * ell * ln(dim)
  std::uint64_t seed = 1;
  std::string method = "lanczos"; // lanczos | power | dense
};

inline int default_max_iter(const KikuchiOperator& op) {
  return static_cast<int>(10.0 * op.ell() * std::log(static_cast<double>(op.dim()))) + 10;
}

namespace detail {

inline VectorXd seeded_start(std::uint64_t dim, std::uint64_t seed) {
  CounterRng rng(seed, Stream::iteration);
  VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.next_sym();
  v.normalize();
  return v;
}

// Top eigenvalue of a symmetric tridiagonal via Eigen (sizes are tiny).
inline double tridiag_top(const std::vector<double>& alpha, const std::vector<double>& beta,
                          VectorXd* top_vec = nullptr) {
  const int m = static_cast<int>(alpha.size());
  MatrixXd T = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
  if (top_vec) *top_vec = es.eigenvectors().col(m - 1);
  return es.eigenvalues()(m - 1);
}

} // namespace detail

// Lanczos iteration for the largest (signed) eigenvalue. Full
// reorthogonalization whenever the basis fits; residual is the Ritz residual
// when the basis is kept, otherwise the tridiagonal estimate |beta_m s_m|.
inline SpectralEstimate lambda_max_lanczos(const KikuchiOperator& op, double tol, int max_iter,
                                           std::uint64_t seed) {
  SpectralEstimate est;
  est.method = "lanczos";
  const std::uint64_t dim = op.dim();
  const bool keep_basis = dim * static_cast<std::uint64_t>(std::min(max_iter, 220)) <= 60000000ull;
  const int m_cap = keep_basis ? std::min(max_iter, 220) : std::min(max_iter, 400);

  VectorXd v = detail::seeded_start(dim, seed);
  VectorXd v_prev = VectorXd::Zero(v.size());
  std::vector<VectorXd> basis;
  if (keep_basis) basis.push_back(v);
  std::vector<double> alpha, beta;
  double theta_prev = -1e300;
  double beta_last = 0;
  VectorXd w;

  for (int it = 0; it < m_cap; ++it) {
    op.matvec(v, w);
    const double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (!beta.empty()) w -= beta_last * v_prev;
    if (keep_basis) { // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) w -= q.dot(w) * q;
    }
    VectorXd tvec;
    const double theta = detail::tridiag_top(alpha, beta, &tvec);
    const double b = w.norm();
    const double resid_est = std::abs(b * tvec[tvec.size() - 1]);
    est.iterations = it + 1;
    est.lambda_max = theta;
    est.residual = resid_est;
    const double scale = std::max(1.0, std::abs(theta));
    if (resid_est <= tol * scale && it >= 2) {
      est.converged = true;
      break;
    }
    if (std::abs(theta - theta_prev) <= 1e-15 * scale && it > 8) {
      est.converged = resid_est <= 10 * tol * scale;
      break;
    }
    theta_prev = theta;
    if (b <= 1e-300) { // invariant subspace exhausted
      est.converged = true;
      est.residual = 0;
      break;
    }
    beta.push_back(b);
    beta_last = b;
    v_prev = v;
    v = w / b;
    if (keep_basis) basis.push_back(v);
  }

  if (keep_basis && !basis.empty()) { // exact Ritz residual
    VectorXd tvec;
    detail::tridiag_top(alpha, beta, &tvec);
    VectorXd ritz = VectorXd::Zero(basis[0].size());
    for (std::size_t i = 0; i < basis.size() && i < static_cast<std::size_t>(tvec.size()); ++i)
      ritz += tvec[static_cast<Eigen::Index>(i)] * basis[i];
    ritz.normalize();
    VectorXd kr;
    op.matvec(ritz, kr);
    est.lambda_max = ritz.dot(kr);
    est.residual = (kr - est.lambda_max * ritz).norm();
    est.converged = est.converged || est.residual <= tol * std::max(1.0, std::abs(est.lambda_max));
  }
  est.bosonic_equivalent = est.lambda_max * op.bosonic_scale();
  return est;
}

// Shifted power iteration; converges to the top signed eigenvalue.
inline SpectralEstimate lambda_max_power(const KikuchiOperator& op, double tol, int max_iter,
                                         std::uint64_t seed) {
  SpectralEstimate est;
  est.method = "power";
  const double shift =
      op.row_degree_bound() * std::max(std::abs(op.edges().hypergraph().value_present()),
                                       std::abs(op.edges().hypergraph().value_absent()));
  VectorXd v = detail::seeded_start(op.dim(), seed);
  VectorXd w;
  double lam = 0;
  for (int it = 0; it < max_iter; ++it) {
    op.matvec(v, w);
    lam = v.dot(w);
    const double resid = (w - lam * v).norm();
    est.iterations = it + 1;
    est.lambda_max = lam;
    est.residual = resid;
    if (resid <= tol * std::max(1.0, std::abs(lam))) {
      est.converged = true;
      break;
    }
    w += shift * v; // K + shift I keeps the top end dominant
    const double nn = w.norm();
    if (nn == 0) break;
    v = w / nn;
  }
  est.bosonic_equivalent = est.lambda_max * op.bosonic_scale();
  return est;
}

inline SpectralEstimate lambda_max_dense(const KikuchiOperator& op) {
  SpectralEstimate est;
  est.method = "dense";
  MatrixXd K = (op.mode() == OperatorMode::bosonic_implicit) ? op.dense_tuple_matrix()
                                                             : op.dense_set_matrix();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
  est.lambda_max = es.eigenvalues()(K.rows() - 1);
  est.bosonic_equivalent = est.lambda_max * op.bosonic_scale();
  est.iterations = 1;
  est.residual = 0;
  est.converged = true;
  return est;
}

inline SpectralEstimate lambda_max(const KikuchiOperator& op, const EigOptions& opts = {}) {
  const int mi = opts.max_iter > 0 ? opts.max_iter : default_max_iter(op);
  if (opts.method == "dense") return lambda_max_dense(op);
  if (opts.method == "power") return lambda_max_power(op, opts.tol, mi, opts.seed);
  return lambda_max_lanczos(op, opts.tol, mi, opts.seed);
}

// --- thresholds ------------------------------------------------------------------

// Leading-order constant of the planted certificate energy, from the
// r = p/2, all s_u = p-1 term of the energy expansion:
//   C_hat = k (g_{k,p}(p-1) / mu)^{p/2} / (p/2)!.
inline double c_hat_closed_form(int k, int p) {
  const double mu = whitened_moment_closed(k, p, 2);
  return k * std::pow(g_overlap(k, p, p - 1) / mu, p / 2) / factorial(p / 2);
}

// Exact expectation of the certificate Rayleigh quotient at finite (n, lambda):
//   E<v|K|v> / E||v||^2 =
//     beta C(n - lp, p/2) (p/2)! k sum_r C(l, r) sum_{s in S_r} prod_u C(p,s_u) g(s_u)/mu.
// The sum runs over disagreeing-block counts r and overlap profiles s with
// sum_u (p - s_u) = p/2. Reduces to the C_hat scaling as lambda, n -> infinity.
inline double expected_certificate_rayleigh(int k, int p, int n, int lambda, double beta) {
  const double mu = whitened_moment_closed(k, p, 2);
  const int half = p / 2;
  double total = 0.0;
  const int rmax = std::min(lambda, half);
  for (int r = 1; r <= rmax; ++r) {
    // enumerate s_1..s_r with p-1 >= s_u and sum (p - s_u) = p/2
    std::vector<int> deficit(r, 1); // d_u = p - s_u >= 1, sum = p/2
    double sum_profiles = 0.0;
    // enumerate compositions of p/2 into r positive parts
    std::vector<int> comp(r, 1);
    int rem = half - r;
    if (rem < 0) continue;
    // odometer over compositions
    std::vector<int> extra(r, 0);
    while (true) {
      double prod = 1.0;
      for (int u = 0; u < r; ++u) {
        const int d = 1 + extra[u];
        const int s = p - d;
        prod *= binomial(p, s) * g_overlap(k, p, s) / mu;
      }
      // check sum extra == rem
      int se = 0;
      for (int e : extra) se += e;
      if (se == rem) sum_profiles += prod;
      // next odometer state
      int pos = 0;
      while (pos < r) {
        if (extra[pos] < rem) {
          ++extra[pos];
          for (int q = 0; q < pos; ++q) extra[q] = 0;
          break;
        }
        ++pos;
      }
      if (pos == r) break;
    }
    (void)deficit;
    total += binomial(lambda, r) * sum_profiles;
  }
  return beta * binomial(n - lambda * p, half) * factorial(half) * k * total;
}

struct Thresholds {
  double tau = 0;        // (1/gap) * C_hat * beta * n^{p/2} ell^{p/2}
  double null_bound = 0; // sqrt(6 n^{p/2} ell^{1+p/2} ln n)
  double beta_min = 0;   // (3 sqrt 6 / C_hat) ell^{1/2-p/4} n^{-p/4} sqrt(ln n)
  double c_hat = 0;
  double gap = 2.0;
};

inline Thresholds thresholds(const ModelParams& params, int ell, double gap = 2.0,
                             double beta_override = -1.0) {
  if (ell < params.p / 2 || ell > params.n - params.p / 2)
    throw std::invalid_argument("thresholds: ell out of range");
  Thresholds t;
  t.gap = gap;
  t.c_hat = c_hat_closed_form(params.k, params.p);
  const double beta = beta_override > 0 ? beta_override : params.beta();
  const double n = params.n;
  const double p = params.p;
  t.tau = (1.0 / gap) * t.c_hat * beta * std::pow(n, p / 2) * std::pow(static_cast<double>(ell), p / 2);
  t.null_bound = std::sqrt(6.0 * std::pow(n, p / 2) * std::pow(static_cast<double>(ell), 1 + p / 2) *
                           threshold_log(n));
  t.beta_min = (3.0 * std::sqrt(6.0) / t.c_hat) * std::pow(static_cast<double>(ell), 0.5 - p / 4) *
               std::pow(n, -p / 4) * std::sqrt(threshold_log(n));
  return t;
}

} // namespace kikuchi
