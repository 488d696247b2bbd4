#include <doctest.h>

#include <cmath>
#include <vector>

#include "kikuchi/qsim.hpp"
#include "kikuchi/stats.hpp"

using namespace kikuchi;

namespace {

Hypergraph planted_instance(int n, int k, int p, double theta0, double beta, std::uint64_t seed) {
  const double eps = beta * std::sqrt(theta0 * (1 - theta0));
  const ModelParams pr(n, k, p, theta0, eps);
  return sample(pr, whitened_indicator(k, p), true, seed);
}

} // namespace

TEST_SUITE_BEGIN("qsim");

TEST_CASE("preparation success probability") {
  SUBCASE("lambda = 1 always succeeds") {
    VectorXd base = VectorXd::Ones(static_cast<Eigen::Index>(binomial_u64(10, 4)));
    CHECK(prep_success_probability(base, 10, 4, 1).value == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("uniform base, n=10 p=2 lambda=2") {
    VectorXd base = VectorXd::Ones(static_cast<Eigen::Index>(binomial_u64(10, 2)));
    CHECK(prep_success_probability(base, 10, 2, 2).value ==
          doctest::Approx(1260.0 / 2025.0).epsilon(1e-12));
  }
  SUBCASE("shared code path with collision_free_norm2") {
    CounterRng rng(2, Stream::sampling);
    VectorXd base(static_cast<Eigen::Index>(binomial_u64(12, 4)));
    for (Eigen::Index i = 0; i < base.size(); ++i) base[i] = rng.next_sym();
    ProductVector pv;
    pv.n = 12;
    pv.p = 4;
    pv.lambda = 2;
    pv.base = base / base.norm();
    CHECK(prep_success_probability(base, 12, 4, 2).value ==
          doctest::Approx(collision_free_norm2(pv).value).epsilon(1e-14));
  }
  SUBCASE("eta approaches 1 as n grows") {
    double prev = 0;
    for (int n : {10, 16, 24, 40}) {
      VectorXd base = VectorXd::Ones(static_cast<Eigen::Index>(binomial_u64(n, 2)));
      const double eta = prep_success_probability(base, n, 2, 2).value;
      CHECK(eta > prev);
      prev = eta;
    }
    CHECK(prev > 0.9);
  }
  SUBCASE("lambda p > n rejected") {
    VectorXd base = VectorXd::Ones(static_cast<Eigen::Index>(binomial_u64(10, 4)));
    CHECK_THROWS((void)prep_success_probability(base, 10, 4, 3));
  }
}

TEST_CASE("qpe sampling against the exact overlap") {
  const Hypergraph h = planted_instance(10, 2, 4, 0.45, 0.8, 42);
  const SetSpectrum spec = set_spectrum(h, 4);
  const Eigen::Index d = spec.values.size();

  SUBCASE("guide = top eigenvector hits with certainty") {
    const VectorXd top = spec.vectors.col(d - 1);
    const QpeResult r = qpe_sample(spec, top, spec.values[d - 1] - 1e-9, 500, 7);
    CHECK(r.hit_prob_exact == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.hits == 500);
  }
  SUBCASE("tau above the spectrum never hits") {
    const VectorXd top = spec.vectors.col(d - 1);
    const QpeResult r = qpe_sample(spec, top, spec.values[d - 1] + 1.0, 500, 7);
    CHECK(r.hit_prob_exact == doctest::Approx(0.0));
    CHECK(r.hits == 0);
  }
  SUBCASE("empirical hit rate within binomial error of the exact overlap") {
    const VectorXd guide = guiding_base(h);
    const double tau = spec.values[d / 2];
    const int shots = 10000;
    const QpeResult r = qpe_sample(spec, guide, tau, shots, 11);
    const double se = std::sqrt(r.hit_prob_exact * (1 - r.hit_prob_exact) / shots);
    CHECK(std::abs(static_cast<double>(r.hits) / shots - r.hit_prob_exact) <= 3 * se + 1e-9);
    // hit probability equals the eigenspace overlap by construction
    CHECK(r.hit_prob_exact == doctest::Approx(eigenspace_overlap(spec, guide, tau)).epsilon(1e-12));
  }
  SUBCASE("phase register rounding is a coarser measurement") {
    const VectorXd guide = guiding_base(h);
    const QpeResult exact = qpe_sample(spec, guide, spec.values[d / 2], 2000, 5, 0);
    const QpeResult coarse = qpe_sample(spec, guide, spec.values[d / 2], 2000, 5, 3);
    CHECK(coarse.histogram.size() <= exact.histogram.size());
    CHECK(coarse.shots == 2000);
  }
}

TEST_CASE("detection cost simulation") {
  SUBCASE("median geometric repetitions near ln2 / overlap") {
    std::vector<double> overlaps(400, 0.02);
    QSimConfig cfg;
    cfg.seed = 3;
    const CostSimResult r = detection_cost_sim(overlaps, cfg);
    CHECK(r.median_plain == doctest::Approx(std::log(2.0) / 0.02).epsilon(0.35));
    CHECK(r.median_amplified == doctest::Approx(std::ceil(1.0 / std::sqrt(0.02))).epsilon(1e-12));
  }
  SUBCASE("amplification halves the exponent") {
    // overlaps eta = 1/dim across a dimension grid: reps_plain ~ dim,
    // reps_amp ~ sqrt(dim), so log-ratio ~ 0.5
    std::vector<double> ratios;
    for (double dim : {300.0, 1000.0, 3000.0, 10000.0}) {
      std::vector<double> overlaps(300, 1.0 / dim);
      QSimConfig cfg;
      cfg.seed = 17;
      const CostSimResult r = detection_cost_sim(overlaps, cfg);
      ratios.push_back(std::log(r.median_amplified) / std::log(r.median_plain));
    }
    for (double x : ratios) CHECK(std::abs(x - 0.5) <= 0.15);
  }
  SUBCASE("zero overlap flagged") {
    std::vector<double> overlaps{0.0, 0.1};
    const CostSimResult r = detection_cost_sim(overlaps, {});
    CHECK(r.zero_overlap_instances == 1);
    CHECK(r.reps_plain.size() == 1);
  }
}

TEST_CASE("resource estimator") {
  SUBCASE("qubits") {
    const ResourceEstimate r = resource_estimate(1024, 8, 4);
    CHECK(r.qubits == doctest::Approx(80.0)); // 8 * log2(1024)
  }
  SUBCASE("speedup exponent approaches 16/5 on the sqrt-n schedule at p = 4") {
    ResourceOptions opts;
    opts.schedule = EllSchedule::sqrt_n;
    const int ell = static_cast<int>(std::sqrt(1e6));
    const ResourceEstimate r = resource_estimate(1e6, ell, 4, opts);
    CHECK(std::abs(r.speedup_exponent - 3.2) <= 0.05);
  }
  SUBCASE("speedup exponent approaches 4 at constant ell") {
    ResourceOptions opts;
    opts.schedule = EllSchedule::constant;
    const ResourceEstimate r = resource_estimate(1e6, 4096, 4, opts);
    CHECK(std::abs(r.speedup_exponent - 4.0) <= 0.05);
  }
  SUBCASE("monotone gate scaling and bounded exponent") {
    double prev_gates = -1;
    for (double n : {100.0, 1000.0, 10000.0}) {
      const ResourceEstimate r = resource_estimate(n, 16, 4);
      CHECK(r.log10_gates > prev_gates);
      prev_gates = r.log10_gates;
    }
    double prev = 0;
    for (int ell : {8, 16, 32, 128, 1024}) {
      const ResourceEstimate r = resource_estimate(1e6, ell, 4);
      CHECK(r.speedup_exponent > prev);      // increasing toward 4
      CHECK(r.speedup_exponent <= 4.2);
      CHECK(r.speedup_exponent > 1.0);       // valid regime ell >= 2p
      prev = r.speedup_exponent;
    }
    CHECK(prev <= 4.0 + 1e-12);
  }
  SUBCASE("classical space and time columns") {
    const ResourceEstimate r = resource_estimate(100, 8, 4);
    CHECK(r.log10_classical_bits == doctest::Approx(std::log10(8.0) + 4 * 2.0).epsilon(1e-12));
    CHECK(r.log10_classical_time == doctest::Approx(8 * 2.0).epsilon(1e-12));
    CHECK(r.polylog_column.find("log(n)") != std::string::npos);
  }
}

TEST_CASE("end-to-end pipeline statistics on a small planted instance") {
  // not a detection-quality claim at this size, a mechanical pipeline check:
  // split, diagonalize, sample, and confirm hits track the exact overlap
  const Hypergraph h = planted_instance(12, 2, 4, 0.45, 0.8, 3);
  const SplitPipeline sp = split(h, 4, 555, OperatorMode::set_implicit);
  const SetSpectrum spec = set_spectrum(h, 4, sp.mask, EdgeFilter::complement_of_batch1);
  const double tau = spec.values[spec.values.size() / 2];
  const QpeResult r = qpe_sample(spec, sp.guide.base, tau, 4000, 21);
  const double se = std::sqrt(std::max(1e-12, r.hit_prob_exact * (1 - r.hit_prob_exact) / 4000));
  CHECK(std::abs(static_cast<double>(r.hits) / 4000 - r.hit_prob_exact) <= 4 * se + 1e-9);
}

TEST_SUITE_END();
