#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace kikuchi {

namespace detail {
inline std::uint64_t binomial_u64_compute(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0;
  if (r > n - r) r = n - r;
  unsigned __int128 acc = 1;
  for (int i = 1; i <= r; ++i) {
    acc = acc * static_cast<unsigned __int128>(n - r + i) / static_cast<unsigned __int128>(i);
    if (acc > std::numeric_limits<std::uint64_t>::max())
      return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

inline constexpr int kBinomTableN = 1024;
inline constexpr int kBinomTableR = 13;

inline const std::uint64_t* binom_table() {
  static const std::vector<std::uint64_t> table = [] {
    std::vector<std::uint64_t> t(static_cast<std::size_t>(kBinomTableN) * kBinomTableR);
    for (int n = 0; n < kBinomTableN; ++n)
      for (int r = 0; r < kBinomTableR; ++r)
        t[static_cast<std::size_t>(n) * kBinomTableR + r] = binomial_u64_compute(n, r);
    return t;
  }();
  return table.data();
}
} // namespace detail

// Exact binomial coefficients as uint64, saturating at max() on overflow.
// Small arguments come from a cached table; rank/unrank loops live on this.
inline std::uint64_t binomial_u64(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0;
  if (n < detail::kBinomTableN && r < detail::kBinomTableR)
    return detail::binom_table()[static_cast<std::size_t>(n) * detail::kBinomTableR + r];
  return detail::binomial_u64_compute(n, r);
}

inline double binomial(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0.0;
  if (r > n - r) r = n - r;
  double acc = 1.0;
  for (int i = 1; i <= r; ++i) acc = acc * static_cast<double>(n - r + i) / static_cast<double>(i);
  return acc;
}

inline double falling_factorial(double n, int r) {
  double acc = 1.0;
  for (int i = 0; i < r; ++i) acc *= (n - i);
  return acc;
}

inline double factorial(int n) {
  double acc = 1.0;
  for (int i = 2; i <= n; ++i) acc *= i;
  return acc;
}

// Colexicographic rank of a sorted r-subset with 0-based elements:
//   rank(v_1 < ... < v_r) = sum_i C(v_i, i).
// Membership bitmaps for hypergraph edges are indexed by this rank.
inline std::uint64_t subset_rank_colex(std::span<const int> sorted) {
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    rank += binomial_u64(sorted[i], static_cast<int>(i) + 1);
  return rank;
}

inline void subset_unrank_colex(std::uint64_t rank, int r, std::span<int> out) {
  for (int i = r; i >= 1; --i) {
    // largest v with C(v, i) <= rank
    int v = i - 1;
    while (binomial_u64(v + 1, i) <= rank) ++v;
    out[i - 1] = v;
    rank -= binomial_u64(v, i);
  }
}

// Lexicographic iteration over r-subsets of [0, n): first() then next().
inline void first_subset_lex(int r, std::span<int> s) {
  for (int i = 0; i < r; ++i) s[i] = i;
}

inline bool next_subset_lex(int n, int r, std::span<int> s) {
  int i = r - 1;
  while (i >= 0 && s[i] == n - r + i) --i;
  if (i < 0) return false;
  ++s[i];
  for (int j = i + 1; j < r; ++j) s[j] = s[i] + j - i;
  return true;
}

// Rank/unrank bijection for length-ell tuples over [0, n) with no repeated
// entries, in lexicographic tuple order. Cardinality n!/(n-ell)!.
class TupleIndex {
 public:
  TupleIndex(int n, int ell) : n_(n), ell_(ell) {
    if (ell < 0 || ell > n) throw std::invalid_argument("TupleIndex: need 0 <= ell <= n");
    card_ = 1;
    for (int i = 0; i < ell; ++i) {
      unsigned __int128 next = static_cast<unsigned __int128>(card_) * (n - i);
      if (next > std::numeric_limits<std::uint64_t>::max())
        throw std::overflow_error("TupleIndex: cardinality overflows 64 bits");
      card_ = static_cast<std::uint64_t>(next);
    }
  }

  int n() const { return n_; }
  int ell() const { return ell_; }
  std::uint64_t cardinality() const { return card_; }

  std::uint64_t rank(std::span<const int> tuple) const {
    std::uint64_t r = 0;
    std::uint64_t radix = card_;
    for (int i = 0; i < ell_; ++i) {
      radix /= (n_ - i);
      int smaller_unused = tuple[i];
      for (int j = 0; j < i; ++j)
        if (tuple[j] < tuple[i]) --smaller_unused;
      r += static_cast<std::uint64_t>(smaller_unused) * radix;
    }
    return r;
  }

  void unrank(std::uint64_t r, std::span<int> out) const {
    std::uint64_t radix = card_;
    for (int i = 0; i < ell_; ++i) {
      radix /= (n_ - i);
      int digit = static_cast<int>(r / radix);
      r %= radix;
      // digit-th smallest value not used by out[0..i)
      int v = 0;
      for (int seen = 0;; ++v) {
        bool used = false;
        for (int j = 0; j < i; ++j)
          if (out[j] == v) { used = true; break; }
        if (!used) {
          if (seen == digit) break;
          ++seen;
        }
      }
      out[i] = v;
    }
  }

 private:
  int n_, ell_;
  std::uint64_t card_;
};

// Compensated (Kahan) accumulator; summation order stays the caller's.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

} // namespace kikuchi
