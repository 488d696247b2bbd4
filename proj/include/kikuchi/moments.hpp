#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kikuchi/bias.hpp"
#include "kikuchi/combinatorics.hpp"

namespace kikuchi {

// E_{a ~ Unif[k]}[ prod_t (1[a = c_t] - 1/k) ] for a fixed color tuple c.
inline double color_pattern_mean(std::span<const int> c, int k) {
  KahanSum acc;
  for (int a = 0; a < k; ++a) {
    double prod = 1.0;
    for (int t : c) prod *= (a == t ? 1.0 : 0.0) - 1.0 / k;
    acc.add(prod);
  }
  return acc.value() / k;
}

// Exact m-th moment of the whitened indicator under uniform labels:
//   E[f^m] = sum_{c in [k]^m} ( E_a prod_t (1[a=c_t] - 1/k) )^p.
// Coordinates factorize, which reduces the [k]^p enumeration to a [k]^m one.
// Valid for every p >= 2 (even or odd).
inline double whitened_moment_closed(int k, int p, int m) {
  std::vector<int> c(m, 0);
  KahanSum acc;
  const std::size_t total = static_cast<std::size_t>(std::pow(static_cast<double>(k), m));
  for (std::size_t e = 0; e < total; ++e) {
    std::size_t idx = e;
    for (int t = 0; t < m; ++t) {
      c[t] = static_cast<int>(idx % k);
      idx /= k;
    }
    acc.add(std::pow(color_pattern_mean(c, k), p));
  }
  return acc.value();
}

// Brute-force E[f^m] by enumerating all of [k]^p.
inline double moment_brute(const BiasFunction& f, int m) {
  KahanSum acc;
  for (std::size_t i = 0; i < f.table_size(); ++i)
    acc.add(f.multiplicity(i) * std::pow(f.value_at(i), m));
  return acc.value() / std::pow(static_cast<double>(f.k()), f.p());
}

// Literal single-line closed forms. mu holds for all p; alpha for even p.
inline double mu_literal(int k, int p) {
  return ((std::pow(k - 1.0, p) + std::pow(-1.0, p) * (k - 1.0))) /
         std::pow(static_cast<double>(k), 2 * p - 1);
}

// gamma normalized by k^{3p}; the matching numerator carries (-1)^p on the
// paired-color term.
inline double gamma_literal(int k, int p) {
  const double t1 = k * std::pow((k - 1.0) * (k - 2.0), p);
  const double t2 = 3.0 * k * (k - 1.0) * std::pow(-(k - 2.0), p);
  const double t3 = k * (k - 1.0) * (k - 2.0) * std::pow(2.0, p);
  return (t1 + t2 + t3) / std::pow(static_cast<double>(k), 3 * p);
}

inline double alpha_literal_even_p(int k, int p) {
  const double kd = k;
  const double t1 = (kd - 3) * (kd - 2) * (kd - 1) * std::pow(3.0, p) * std::pow(kd, -4.0 * p);
  const double t2 = 4 * (kd - 1) * std::pow((std::pow(kd - 1, 3) + 1) / std::pow(kd, 5), p);
  const double t3 = std::pow((std::pow(kd - 1, 4) + kd - 1) / std::pow(kd, 5), p);
  const double t4 = 6 * (kd - 2) * (kd - 1) * std::pow((kd - 3) / std::pow(kd, 4), p);
  const double t5 = 3 * (kd - 1) * std::pow((2 * kd - 3) / std::pow(kd, 4), p);
  return kd * (t1 + t2 + t3 + t4 + t5);
}

struct MomentSet {
  double mu = 0;      // E f^2
  double gamma = 0;   // E f^3
  double alpha = 0;   // E f^4
  double c = 0;       // (1 - 2 theta0) / (theta0 (1 - theta0))
  double mu_brute = 0, gamma_brute = 0, alpha_brute = 0;
  bool closed_form = true; // provenance of mu/gamma/alpha fields
};

// Both evaluation routes for cross-validation. The closed route never touches
// the [k]^p enumeration the brute route uses.
inline MomentSet moment_set(const BiasFunction& f, double theta0) {
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw std::invalid_argument("moment_set: theta0 in (0,1)");
  MomentSet ms;
  ms.c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0));
  ms.mu_brute = moment_brute(f, 2);
  ms.gamma_brute = moment_brute(f, 3);
  ms.alpha_brute = moment_brute(f, 4);
  ms.mu = whitened_moment_closed(f.k(), f.p(), 2);
  ms.gamma = whitened_moment_closed(f.k(), f.p(), 3);
  ms.alpha = whitened_moment_closed(f.k(), f.p(), 4);
  return ms;
}

// Moments of an arbitrary bias table (closed pattern route does not apply).
inline MomentSet moment_set_brute_only(const BiasFunction& f, double theta0) {
  MomentSet ms;
  ms.c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0));
  ms.mu = ms.mu_brute = moment_brute(f, 2);
  ms.gamma = ms.gamma_brute = moment_brute(f, 3);
  ms.alpha = ms.alpha_brute = moment_brute(f, 4);
  ms.closed_form = false;
  return ms;
}

// g_{k,p}(s) from the planted-energy block computation:
//   E_x (prod_u f(x_{A_u}) f(x_{B_u})) f(x_C) = k prod_u g_{k,p}(s_u).
inline double g_overlap(int k, int p, int s) {
  if (s < 0 || s > p) throw std::invalid_argument("g_overlap: s in [0, p]");
  const double a = (k - 1.0) / (static_cast<double>(k) * k);
  const double b = -1.0 / (static_cast<double>(k) * k);
  return std::pow(a, 2 * p - s) + 2.0 * (k - 1) * std::pow(a, p - s) * std::pow(b, p) +
         (k - 1) * std::pow(a, s) * std::pow(b, 2 * (p - s)) +
         static_cast<double>(k - 1) * (k - 2) * std::pow(b, 2 * p - s);
}

// Brute-force oracle for the same product over an explicit block
// configuration, enumerating labels on the union support.
inline double g_product_brute(int k, int p, const std::vector<std::vector<int>>& As,
                              const std::vector<std::vector<int>>& Bs, const std::vector<int>& C,
                              int support_size) {
  const BiasFunction f = whitened_indicator(k, p);
  std::vector<int> x(support_size);
  std::vector<int> arg(p);
  KahanSum acc;
  std::size_t total = 1;
  for (int i = 0; i < support_size; ++i) total *= k;
  for (std::size_t e = 0; e < total; ++e) {
    std::size_t idx = e;
    for (int i = 0; i < support_size; ++i) {
      x[i] = static_cast<int>(idx % k);
      idx /= k;
    }
    double prod = 1.0;
    for (std::size_t u = 0; u < As.size(); ++u) {
      for (int j = 0; j < p; ++j) arg[j] = x[As[u][j]];
      prod *= f(arg);
      for (int j = 0; j < p; ++j) arg[j] = x[Bs[u][j]];
      prod *= f(arg);
    }
    for (int j = 0; j < p; ++j) arg[j] = x[C[j]];
    prod *= f(arg);
    acc.add(prod);
  }
  return acc.value() / static_cast<double>(total);
}

// --- W(a,b): covariance dictionary for the directional-unbias argument -----

struct WMoments {
  double mean = 0;
  double variance = 0;
};

// Closed forms for E_x W(a,b) and Var_x W(a,b) built from the x-averaged
// moment dictionary; a + b = lambda over disjoint p-set blocks.
inline WMoments w_moments(int k, int p, double theta0, double eps, int lambda, int a, int b) {
  if (a < 0 || b < 0 || a + b != lambda) throw std::invalid_argument("w_moments: need a + b = lambda");
  const BiasFunction f = whitened_indicator(k, p);
  const double mu = whitened_moment_closed(k, p, 2);
  const double gamma = whitened_moment_closed(k, p, 3);
  const double alpha = whitened_moment_closed(k, p, 4);
  const double beta = eps / std::sqrt(theta0 * (1.0 - theta0));
  const double c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0));
  WMoments w;
  if (a < lambda) {
    w.mean = 0.0;
  } else {
    w.mean = 1.0 - std::pow(beta * beta * mu, lambda);
  }
  const double e2 = 1.0 + eps * eps * mu * c * c;            // E_x E[A^2]^2
  const double e4 = std::pow(beta, 4) * alpha;               // E_x E[A]^4
  const double ecross = beta * beta * (mu + eps * gamma * c);// E_x E[A^2] E[A]^2
  const double core = std::pow(e2, a) + std::pow(e4, a) - 2.0 * std::pow(ecross, a);
  if (a < lambda) {
    w.variance = std::pow(beta * beta * mu, 2 * b) * core;
  } else {
    w.variance = core - std::pow(1.0 - std::pow(beta * beta * mu, lambda), 2);
  }
  return w;
}

// Exact W(a,b)(x) for one label assignment over the disjoint supports;
// Monte Carlo over x reproduces the closed forms above.
inline double w_value_given_labels(const BiasFunction& f, double theta0, double eps,
                                   std::span<const double> fS /* f(x_{S_i}), i<a */,
                                   std::span<const double> fSp /* f(x_{S'_j}) */,
                                   std::span<const double> fSpp /* f(x_{S''_j}) */) {
  const double beta = eps / std::sqrt(theta0 * (1.0 - theta0));
  const double c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0));
  (void)f;
  double g = 1.0;
  for (std::size_t j = 0; j < fSp.size(); ++j) g *= (beta * fSp[j]) * (beta * fSpp[j]);
  double prod_e2 = 1.0, prod_m2 = 1.0;
  for (std::size_t i = 0; i < fS.size(); ++i) {
    prod_e2 *= 1.0 + eps * c * fS[i];
    prod_m2 *= (beta * fS[i]) * (beta * fS[i]);
  }
  return g * (prod_e2 - prod_m2);
}

// --- characteristic tensor and marginal order -------------------------------

// Rank-one characteristic tensor of a Bernoulli GSBM:
//   T_{a,b} = (eps^2 / p!) (1/theta0 + 1/(1-theta0)) f(a) f(b).
class CharacteristicTensor {
 public:
  CharacteristicTensor(const BiasFunction& f, double theta0, double eps)
      : k_(f.k()), p_(f.p()),
        scale_((eps * eps / factorial(f.p())) * (1.0 / theta0 + 1.0 / (1.0 - theta0))),
        fdense_(f.to_dense()) {
    if (!(theta0 > 0.0 && theta0 < 1.0))
      throw std::invalid_argument("characteristic_tensor: theta0 in (0,1)");
    if (theta0 + eps * f.max_abs() >= 1.0 || theta0 - eps * f.max_abs() <= 0.0)
      throw std::invalid_argument("characteristic_tensor: channel leaves (0,1)");
  }

  int k() const { return k_; }
  int p() const { return p_; }
  double scale() const { return scale_; }
  const DenseTable& f_table() const { return fdense_; }

  double entry(std::span<const int> a, std::span<const int> b) const {
    return scale_ * fdense_.at(a) * fdense_.at(b);
  }

  // Dense export over ([k]^2)^p slots, slot digit = a_i * k + b_i, first slot
  // fastest. Guard: k^{2p} entries.
  std::vector<double> to_dense() const {
    const double entries = std::pow(static_cast<double>(k_), 2.0 * p_);
    if (entries > 2.44e8) throw std::invalid_argument("characteristic tensor: k^{2p} beyond cap");
    const std::size_t sz = static_cast<std::size_t>(entries);
    std::vector<double> out(sz);
    std::vector<int> a(p_), b(p_);
    for (std::size_t e = 0; e < sz; ++e) {
      std::size_t idx = e;
      for (int j = 0; j < p_; ++j) {
        const int d = static_cast<int>(idx % (k_ * k_));
        idx /= (k_ * k_);
        a[j] = d / k_;
        b[j] = d % k_;
      }
      out[e] = entry(a, b);
    }
    return out;
  }

 private:
  int k_, p_;
  double scale_;
  DenseTable fdense_;
};

inline CharacteristicTensor characteristic_tensor(const BiasFunction& f, double theta0,
                                                  double eps) {
  return CharacteristicTensor(f, theta0, eps);
}

// Contract j slots of a dense order-p tensor over [k]^2 with the all-ones
// vector and divide by k^{2j}; the tensor-contraction route used to certify
// the rank-one shortcut.
inline std::vector<double> contract_dense_tensor(const std::vector<double>& t, int k, int p,
                                                 int j) {
  const int d = k * k;
  std::size_t out_sz = 1;
  for (int i = 0; i < p - j; ++i) out_sz *= d;
  std::size_t in_block = 1;
  for (int i = 0; i < j; ++i) in_block *= d;
  std::vector<double> out(out_sz, 0.0);
  // contract the FIRST j slots (slot order is symmetric anyway)
  for (std::size_t rest = 0; rest < out_sz; ++rest) {
    KahanSum acc;
    for (std::size_t head = 0; head < in_block; ++head) acc.add(t[rest * in_block + head]);
    out[rest] = acc.value() / std::pow(static_cast<double>(k), 2.0 * j);
  }
  return out;
}

// Marginalized bias f^(r)(a_1..a_r) = k^{-(p-r)} sum_rest f(a).
inline std::vector<double> marginal_bias_table(const DenseTable& f, int r) {
  const int k = f.k();
  const int p = f.p();
  std::size_t out_sz = 1;
  for (int i = 0; i < r; ++i) out_sz *= k;
  std::vector<double> out(out_sz, 0.0);
  std::vector<int> a(p);
  std::vector<KahanSum> acc(out_sz);
  for (std::size_t e = 0; e < f.size(); ++e) {
    f.unflat(e, a);
    std::size_t key = 0;
    for (int j = r - 1; j >= 0; --j) key = key * k + static_cast<std::size_t>(a[j]);
    acc[key].add(f[e]);
  }
  const double norm = std::pow(static_cast<double>(k), p - r);
  for (std::size_t i = 0; i < out_sz; ++i) out[i] = acc[i].value() / norm;
  return out;
}

// Smallest p* with T^(p*) != 0 (entries above tol). The contraction of the
// rank-one tensor is the rank-one tensor of the marginalized channel, so the
// scan reduces to the marginal bias tables.
inline int marginal_order(const BiasFunction& f, double theta0, double eps, double tol = 1e-12) {
  CharacteristicTensor T(f, theta0, eps);
  const DenseTable fd = f.to_dense();
  bool nontrivial = false;
  for (std::size_t i = 0; i < fd.size(); ++i)
    if (std::abs(fd[i]) > 0) nontrivial = true;
  if (!nontrivial || eps == 0.0)
    throw std::invalid_argument("marginal_order: trivial model (all f = 0 or eps = 0)");
  for (int r = 1; r <= f.p(); ++r) {
    const auto m = marginal_bias_table(fd, r);
    double mx = 0.0;
    for (double v : m) mx = std::max(mx, std::abs(v));
    // largest |T^(r)| entry = scale * max|f^(r)|^2
    if (T.scale() * mx * mx > tol) return r;
  }
  throw std::runtime_error("marginal_order: no nonzero contraction found");
}

// --- LCDF hardness boundary --------------------------------------------------

struct LcdfResult {
  double beta_lcdf = 0;        // witness-based boundary C * D^{1/2-p/4} n^{-p/4}
  double constant = 0;         // C = sqrt(c_free * p!) / |f(mono)|, c_free = 1
  double injective_witness = 0;// (eps^2/p!) (1/theta0 + 1/(1-theta0)) f(mono)^2
  double f_mono = 0;
};

// Hardness boundary for the p-marginal HSBM from the coordinate-degree
// budget inequality, using the monochromatic unit-vector witness for the
// injective norm. The free constant is set to 1 and reported; the boundary
// is a documented stand-in, not tight.
inline LcdfResult lcdf_threshold(int k, int p, double n, double D, double theta0 = 0.3,
                                 double eps = 0.1, double c_free = 1.0) {
  if (p <= 2) throw std::invalid_argument("lcdf_threshold: p > 2 required");
  if (D < 1.0) throw std::invalid_argument("lcdf_threshold: D >= 1 required");
  LcdfResult r;
  r.f_mono = whitened_indicator_monochromatic(k, p);
  r.constant = std::sqrt(c_free * factorial(p)) / std::abs(r.f_mono);
  r.beta_lcdf = r.constant * std::pow(D, 0.5 - 0.25 * p) * std::pow(n, -0.25 * p);
  r.injective_witness =
      (eps * eps / factorial(p)) * (1.0 / theta0 + 1.0 / (1.0 - theta0)) * r.f_mono * r.f_mono;
  return r;
}

// Heuristic upper estimate of the injective norm of a small dense symmetric
// tensor over [k]^2 slots by tensor power iteration. Lower-bound witnesses
// plus this estimate bracket the truth; exact injective norms are out of scope.
inline double injective_norm_power_estimate(const std::vector<double>& t, int k, int p,
                                            int iters = 200, std::uint64_t seed = 1) {
  const int d = k * k;
  std::vector<double> v(d);
  double nrm = 0;
  for (int i = 0; i < d; ++i) {
    v[i] = std::cos(static_cast<double>(seed + 1) * (i + 1.0)); // fixed start
    nrm += v[i] * v[i];
  }
  for (int i = 0; i < d; ++i) v[i] /= std::sqrt(nrm);
  std::vector<int> digits(p);
  double val = 0;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> g(d, 0.0);
    std::size_t sz = t.size();
    for (std::size_t e = 0; e < sz; ++e) {
      std::size_t idx = e;
      double prod = 1.0;
      for (int j = 0; j < p; ++j) {
        digits[j] = static_cast<int>(idx % d);
        idx /= d;
      }
      for (int j = 1; j < p; ++j) prod *= v[digits[j]];
      g[digits[0]] += t[e] * prod;
    }
    double gn = 0;
    for (int i = 0; i < d; ++i) gn += g[i] * g[i];
    gn = std::sqrt(gn);
    if (gn == 0) return 0;
    for (int i = 0; i < d; ++i) v[i] = g[i] / gn;
    val = gn;
  }
  return val;
}

} // namespace kikuchi
