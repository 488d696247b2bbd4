#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kikuchi/operators.hpp"
#include "kikuchi/stats.hpp"
#include "kikuchi/vectors.hpp"

namespace kikuchi {

struct QSimConfig {
  double tau = 0;
  int shots = 1024;
  bool use_amplitude_amplification = true;
  int phase_bits = 0; // 0 = exact eigenvalues (idealized QPE)
  std::uint64_t seed = 1;
  double amp_constant = 1.0; // repetitions ~ ceil(amp_constant / sqrt(overlap))
};

// Success probability of projecting lambda tensor copies of the normalized
// base into the collision-free sector:
//   eta = || Pi_lambda (base/||base||)^{(x)lambda} ||^2.
// Shares the collision_free_norm2 code path by construction.
inline ValueWithError prep_success_probability(const VectorXd& base, int n, int p, int lambda,
                                               const SamplingOptions& opts = {}) {
  ProductVector pv;
  pv.n = n;
  pv.p = p;
  pv.lambda = lambda;
  const double nn = base.norm();
  if (nn == 0) throw std::invalid_argument("prep_success_probability: zero base");
  pv.base = base / nn;
  return collision_free_norm2(pv, opts);
}

struct QpeResult {
  std::uint64_t hits = 0;
  std::uint64_t shots = 0;
  double hit_prob_exact = 0;   // sum of |<psi_i|guide>|^2 over eigenvalues >= tau
  std::map<double, std::uint64_t> histogram; // sampled eigenvalue -> count
};

// Idealized quantum phase estimation on a full spectrum: outcomes are exact
// eigenvalues sampled with Born weights |<psi_i|guide>|^2 / ||guide||^2. An
// optional phase register width rounds eigenvalues to `bits` bits across the
// symmetric spectral range for discretization-sensitivity studies.
inline QpeResult qpe_sample(const SetSpectrum& spec, const VectorXd& guide_base, double tau,
                            int shots, std::uint64_t seed, int phase_bits = 0) {
  if (spec.vectors.rows() != guide_base.size())
    throw std::invalid_argument("qpe_sample: dimension mismatch");
  const double den = guide_base.squaredNorm();
  if (den == 0) throw std::invalid_argument("qpe_sample: zero guide");
  const Eigen::Index d = spec.values.size();
  std::vector<double> probs(d), cum(d);
  double total = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double a = spec.vectors.col(i).dot(guide_base);
    probs[i] = a * a / den;
    total += probs[i];
    cum[i] = total;
  }
  const double range = std::max(std::abs(spec.values[0]), std::abs(spec.values[d - 1]));
  auto rounded = [&](double lam) {
    if (phase_bits <= 0 || range == 0) return lam;
    const double delta = 2.0 * range / std::pow(2.0, phase_bits);
    return std::round(lam / delta) * delta;
  };

  QpeResult out;
  out.shots = static_cast<std::uint64_t>(shots);
  for (Eigen::Index i = 0; i < d; ++i)
    if (rounded(spec.values[i]) >= tau) out.hit_prob_exact += probs[i];

  CounterRng rng(seed, Stream::shots);
  for (int s = 0; s < shots; ++s) {
    const double u = rng.next_double() * total;
    const Eigen::Index idx =
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    const double lam = rounded(spec.values[std::min(idx, d - 1)]);
    out.histogram[lam] += 1;
    if (lam >= tau) ++out.hits;
  }
  return out;
}

struct CostSimResult {
  std::vector<double> overlaps;          // per instance eigenspace overlap
  std::vector<double> reps_plain;        // sampled Geometric(overlap)
  std::vector<double> reps_amplified;    // ceil(c / sqrt(overlap))
  double median_plain = 0;
  double median_amplified = 0;
  double exponent_ratio = 0;             // log(reps_amp) / log(reps_plain), medians
  std::uint64_t zero_overlap_instances = 0;
};

// Repetitions-to-first-hit under the idealized pipeline. Plain repetition is
// geometric in the overlap; amplitude amplification is modeled analytically
// as ceil(c / sqrt(overlap)).
inline CostSimResult detection_cost_sim(const std::vector<double>& overlaps,
                                        const QSimConfig& cfg) {
  CostSimResult res;
  res.overlaps = overlaps;
  CounterRng rng(cfg.seed, Stream::shots);
  for (double eta : overlaps) {
    if (eta <= 0) {
      ++res.zero_overlap_instances;
      continue;
    }
    const double u = std::max(1e-300, rng.next_double());
    const double geo = std::ceil(std::log(u) / std::log1p(-std::min(eta, 1.0 - 1e-15)));
    res.reps_plain.push_back(std::max(1.0, geo));
    res.reps_amplified.push_back(std::ceil(cfg.amp_constant / std::sqrt(eta)));
  }
  if (!res.reps_plain.empty()) {
    res.median_plain = median(res.reps_plain);
    res.median_amplified = median(res.reps_amplified);
    if (res.median_plain > 1.0)
      res.exponent_ratio = std::log(res.median_amplified) / std::log(res.median_plain);
  }
  return res;
}

// --- resource estimator ---------------------------------------------------------

enum class EllSchedule { constant, sqrt_n };

struct ResourceOptions {
  double c_exp = 1.0;        // exp(O(ell)) modeled as exp(c_exp * ell) in gate counts
  bool include_np = true;    // keep the n^p preparation factor in the exponent
  EllSchedule schedule = EllSchedule::constant;
};

struct ResourceEstimate {
  double n = 0;
  int ell = 0;
  int p = 0;
  double log10_gates = 0;          // full gate-count expression incl. overheads
  double qubits = 0;               // ell * ceil(log2 n), polylog factors aside
  double log10_classical_bits = 0; // ell * n^p
  double log10_classical_time = 0; // n^ell
  double speedup_exponent = 0;     // ratio of n-power exponents (see below)
  std::string polylog_column;      // overhead factors reported, not folded in
};

// Speedup exponent convention: the ratio log(classical)/log(quantum) over the
// n-power-law parts only. Factors polylog in n and factors depending on ell
// alone are constants at fixed ell; they are reported in polylog_column and
// in the full gate count, never folded into the exponent. Under the sqrt-n
// schedule, powers of ell are powers of n and enter the exponent.
inline ResourceEstimate resource_estimate(double n, int ell, int p,
                                          const ResourceOptions& opts = {}) {
  if (n < 2 || ell < 1 || p < 2) throw std::invalid_argument("resource_estimate: bad arguments");
  ResourceEstimate r;
  r.n = n;
  r.ell = ell;
  r.p = p;
  const double ln_n = std::log(n);
  const double ln_ell = std::log(static_cast<double>(ell));
  const double ell_d = ell;

  // full gate-count expression:
  //   n^{ell/4} n^p ell^{ell/4 - ell/2p} log(n)^{ell/2p} exp(c_exp ell)
  const double ln_gates = (ell_d / 4.0) * ln_n + p * ln_n +
                          (ell_d / 4.0 - ell_d / (2.0 * p)) * ln_ell +
                          (ell_d / (2.0 * p)) * std::log(std::max(2.0, ln_n)) +
                          opts.c_exp * ell_d;
  r.log10_gates = ln_gates / std::log(10.0);
  r.qubits = ell_d * std::ceil(std::log2(n));
  r.log10_classical_bits = (std::log(ell_d) + p * ln_n) / std::log(10.0);
  r.log10_classical_time = ell_d * ln_n / std::log(10.0);

  double quantum_power = ell_d / 4.0;
  if (opts.include_np) quantum_power += p;
  if (opts.schedule == EllSchedule::sqrt_n)
    quantum_power += (ell_d / 4.0 - ell_d / (2.0 * p)) * (ln_ell / ln_n);
  r.speedup_exponent = ell_d / quantum_power;

  std::ostringstream os;
  os << "log(n)^{ell/2p}=log(n)^" << (ell_d / (2.0 * p)) << " * exp(" << opts.c_exp << "*ell)";
  if (opts.schedule == EllSchedule::constant)
    os << " * ell^{ell/4-ell/2p}=ell^" << (ell_d / 4.0 - ell_d / (2.0 * p));
  r.polylog_column = os.str();
  return r;
}

} // namespace kikuchi
