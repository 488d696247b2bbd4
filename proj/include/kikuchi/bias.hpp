#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "kikuchi/combinatorics.hpp"

namespace kikuchi {

// Dense real table on [k]^p, row-major with digit 0 fastest. Used as the
// input/working representation for whitening; symmetric tables collapse to
// the occupancy-indexed BiasFunction below.
class DenseTable {
 public:
  DenseTable(int k, int p, double fill = 0.0)
      : k_(k), p_(p), data_(size_of(k, p), fill) {}

  static std::size_t size_of(int k, int p) {
    std::size_t s = 1;
    for (int i = 0; i < p; ++i) {
      s *= static_cast<std::size_t>(k);
      if (s > (1u << 28)) throw std::invalid_argument("DenseTable: k^p too large");
    }
    return s;
  }

  int k() const { return k_; }
  int p() const { return p_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t flat(std::span<const int> a) const {
    std::size_t idx = 0;
    for (int j = p_ - 1; j >= 0; --j) idx = idx * k_ + static_cast<std::size_t>(a[j]);
    return idx;
  }
  void unflat(std::size_t idx, std::span<int> a) const {
    for (int j = 0; j < p_; ++j) {
      a[j] = static_cast<int>(idx % k_);
      idx /= k_;
    }
  }

  double at(std::span<const int> a) const { return data_[flat(a)]; }

  // Average over all argument permutations; depends only on occupancies, so
  // bucket by sorted argument vector.
  DenseTable symmetrized() const {
    DenseTable out(k_, p_);
    std::vector<double> bucket_sum;
    std::vector<std::size_t> bucket_count;
    std::vector<std::size_t> bucket_of(size());
    std::vector<std::size_t> key_of_sorted;
    std::vector<int> a(p_), s(p_);
    // first pass: map each entry to its sorted-key bucket
    std::vector<std::size_t> seen_keys;
    for (std::size_t i = 0; i < size(); ++i) {
      unflat(i, a);
      s = a;
      std::sort(s.begin(), s.end());
      std::size_t key = flat(s);
      auto it = std::find(seen_keys.begin(), seen_keys.end(), key);
      std::size_t b;
      if (it == seen_keys.end()) {
        b = seen_keys.size();
        seen_keys.push_back(key);
        bucket_sum.push_back(0.0);
        bucket_count.push_back(0);
      } else {
        b = static_cast<std::size_t>(it - seen_keys.begin());
      }
      bucket_of[i] = b;
      bucket_sum[b] += data_[i];
      bucket_count[b] += 1;
    }
    for (std::size_t i = 0; i < size(); ++i)
      out[i] = bucket_sum[bucket_of[i]] / static_cast<double>(bucket_count[bucket_of[i]]);
    return out;
  }

  // E[f | a_T = given values] by enumerating the complement coordinates.
  double conditional_mean(std::span<const int> positions, std::span<const int> values) const {
    std::vector<int> a(p_, 0);
    std::vector<int> free_pos;
    for (int j = 0; j < p_; ++j) {
      bool fixed = false;
      for (std::size_t t = 0; t < positions.size(); ++t)
        if (positions[t] == j) {
          a[j] = values[t];
          fixed = true;
        }
      if (!fixed) free_pos.push_back(j);
    }
    const int m = static_cast<int>(free_pos.size());
    std::size_t total = 1;
    for (int i = 0; i < m; ++i) total *= k_;
    KahanSum acc;
    for (std::size_t e = 0; e < total; ++e) {
      std::size_t idx = e;
      for (int i = 0; i < m; ++i) {
        a[free_pos[i]] = static_cast<int>(idx % k_);
        idx /= k_;
      }
      acc.add(at(a));
    }
    return acc.value() / static_cast<double>(total);
  }

 private:
  int k_, p_;
  std::vector<double> data_;
};

// Symmetric bias function f : [k]^p -> R stored by occupancy vector
// (m_1, ..., m_k), sum m_i = p. Size C(p+k-1, k-1) instead of k^p.
class BiasFunction {
 public:
  BiasFunction(int k, int p) : k_(k), p_(p) {
    if (k < 2) throw std::invalid_argument("BiasFunction: k >= 2 required");
    if (p < 2) throw std::invalid_argument("BiasFunction: p >= 2 required");
    enumerate_occupancies();
    table_.assign(occupancies_.size(), 0.0);
  }

  int k() const { return k_; }
  int p() const { return p_; }
  std::size_t table_size() const { return table_.size(); }

  const std::vector<std::vector<int>>& occupancies() const { return occupancies_; }

  double& value_at(std::size_t occ_index) { return table_[occ_index]; }
  double value_at(std::size_t occ_index) const { return table_[occ_index]; }

  std::size_t occ_index(std::span<const int> m) const {
    for (std::size_t i = 0; i < occupancies_.size(); ++i)
      if (std::equal(m.begin(), m.end(), occupancies_[i].begin())) return i;
    throw std::invalid_argument("BiasFunction: bad occupancy vector");
  }

  // f at an assignment a in [k]^p (0-based labels)
  double operator()(std::span<const int> a) const {
    std::vector<int> m(k_, 0);
    for (int j = 0; j < p_; ++j) m[a[j]] += 1;
    return table_[occ_index(m)];
  }

  double at_occupancy(std::span<const int> m) const { return table_[occ_index(m)]; }

  // Number of assignments a in [k]^p with occupancy m: multinomial(p; m).
  double multiplicity(std::size_t occ_index) const {
    double acc = factorial(p_);
    for (int v : occupancies_[occ_index]) acc /= factorial(v);
    return acc;
  }

  double sum_over_assignments() const {
    KahanSum acc;
    for (std::size_t i = 0; i < table_.size(); ++i) acc.add(multiplicity(i) * table_[i]);
    return acc.value();
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : table_) m = std::max(m, std::abs(v));
    return m;
  }

  bool is_mean_zero(double tol = 1e-12) const {
    const double total = std::pow(static_cast<double>(k_), p_);
    return std::abs(sum_over_assignments() / total) <= tol;
  }

  DenseTable to_dense() const {
    DenseTable out(k_, p_);
    std::vector<int> a(p_);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.unflat(i, a);
      out[i] = (*this)(a);
    }
    return out;
  }

  static BiasFunction from_dense_symmetric(const DenseTable& t, double tol = 1e-9) {
    BiasFunction f(t.k(), t.p());
    std::vector<int> a(t.p());
    std::vector<bool> set(f.table_.size(), false);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.unflat(i, a);
      std::vector<int> m(t.k(), 0);
      for (int v : a) m[v] += 1;
      std::size_t oi = f.occ_index(m);
      if (!set[oi]) {
        f.table_[oi] = t[i];
        set[oi] = true;
      } else if (std::abs(f.table_[oi] - t[i]) > tol * (1.0 + std::abs(t[i]))) {
        throw std::invalid_argument("from_dense_symmetric: table is not symmetric");
      }
    }
    return f;
  }

 private:
  void enumerate_occupancies() {
    std::vector<int> m(k_, 0);
    build(0, p_, m);
  }
  void build(int slot, int remaining, std::vector<int>& m) {
    if (slot == k_ - 1) {
      m[slot] = remaining;
      occupancies_.push_back(m);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      m[slot] = c;
      build(slot + 1, remaining - c, m);
    }
  }

  int k_, p_;
  std::vector<std::vector<int>> occupancies_;
  std::vector<double> table_;
};

// f(a) = sum_i prod_j (1[a_j = i] - 1/k), in occupancy form
// f(m) = sum_i (1 - 1/k)^{m_i} (-1/k)^{p - m_i}.
inline BiasFunction whitened_indicator(int k, int p) {
  BiasFunction f(k, p);
  const double u = 1.0 - 1.0 / k;
  const double v = -1.0 / k;
  for (std::size_t i = 0; i < f.occupancies().size(); ++i) {
    const auto& m = f.occupancies()[i];
    KahanSum acc;
    for (int c = 0; c < k; ++c) acc.add(std::pow(u, m[c]) * std::pow(v, p - m[c]));
    f.value_at(i) = acc.value();
  }
  return f;
}

// Exact value on a monochromatic assignment: (1-1/k)^p + (k-1)(-1/k)^p.
inline double whitened_indicator_monochromatic(int k, int p) {
  return std::pow(1.0 - 1.0 / k, p) + (k - 1) * std::pow(-1.0 / k, p);
}

// p*-whitening: symmetrize, decompose over conditional marginals, and keep
// only the pieces supported on >= p_star coordinates. The output has all
// conditional marginals of order < p_star equal to zero.
inline DenseTable whiten_table(const DenseTable& raw, int p_star) {
  const int k = raw.k();
  const int p = raw.p();
  if (p_star < 2 || p_star > p) throw std::invalid_argument("whiten: need 2 <= p_star <= p");
  DenseTable tab = raw.symmetrized();

  // m_T(a_T) = E[f~ | a_T] for every position subset T, stored dense over
  // the full index with free coordinates ignored.
  const int nsub = 1 << p;
  std::vector<std::vector<double>> cond(nsub);
  std::vector<int> pos, val, a(p);
  for (int T = 0; T < nsub; ++T) {
    pos.clear();
    for (int j = 0; j < p; ++j)
      if (T & (1 << j)) pos.push_back(j);
    std::size_t sz = 1;
    for (std::size_t i = 0; i < pos.size(); ++i) sz *= k;
    cond[T].resize(sz);
    val.assign(pos.size(), 0);
    for (std::size_t e = 0; e < sz; ++e) {
      std::size_t idx = e;
      for (std::size_t i = 0; i < pos.size(); ++i) {
        val[i] = static_cast<int>(idx % k);
        idx /= k;
      }
      cond[T][e] = tab.conditional_mean(pos, val);
    }
  }
  // stored order: increasing position, first listed digit fastest
  auto cond_at = [&](int T, std::span<const int> full) -> double {
    std::size_t e = 0;
    std::size_t mult = 1;
    for (int j = 0; j < p; ++j)
      if (T & (1 << j)) {
        e += static_cast<std::size_t>(full[j]) * mult;
        mult *= k;
      }
    return cond[T][e];
  };

  DenseTable out(k, p);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.unflat(i, a);
    KahanSum acc;
    for (int S = 0; S < nsub; ++S) {
      if (__builtin_popcount(static_cast<unsigned>(S)) < p_star) continue;
      // sum over T subset of S with sign (-1)^{|S \ T|}
      for (int T = S;; T = (T - 1) & S) {
        const int sign_bits = __builtin_popcount(static_cast<unsigned>(S ^ T));
        acc.add((sign_bits % 2 == 0 ? 1.0 : -1.0) * cond_at(T, a));
        if (T == 0) break;
      }
    }
    out[i] = acc.value();
  }
  return out;
}

inline BiasFunction whiten(const DenseTable& raw, int p_star) {
  return BiasFunction::from_dense_symmetric(whiten_table(raw, p_star));
}

// Max |conditional marginal| over all position subsets of size r < p_star;
// the whitening contract is that this vanishes.
inline double max_low_order_marginal(const DenseTable& t, int p_star) {
  const int p = t.p();
  const int k = t.k();
  double worst = 0.0;
  std::vector<int> pos, val;
  for (int T = 0; T < (1 << p); ++T) {
    const int r = __builtin_popcount(static_cast<unsigned>(T));
    if (r >= p_star) continue;
    pos.clear();
    for (int j = 0; j < p; ++j)
      if (T & (1 << j)) pos.push_back(j);
    std::size_t sz = 1;
    for (int i = 0; i < r; ++i) sz *= k;
    val.assign(r, 0);
    for (std::size_t e = 0; e < sz; ++e) {
      std::size_t idx = e;
      for (int i = 0; i < r; ++i) {
        val[i] = static_cast<int>(idx % k);
        idx /= k;
      }
      worst = std::max(worst, std::abs(t.conditional_mean(pos, val)));
    }
  }
  return worst;
}

// The raw indicator channel 1[a_1 = ... = a_p] - k^{1-p}.
inline DenseTable indicator_channel(int k, int p) {
  DenseTable t(k, p, -std::pow(static_cast<double>(k), 1 - p));
  std::vector<int> a(p);
  for (int c = 0; c < k; ++c) {
    std::fill(a.begin(), a.end(), c);
    t[t.flat(a)] += 1.0;
  }
  return t;
}

} // namespace kikuchi
