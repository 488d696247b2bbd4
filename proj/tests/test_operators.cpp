#include <doctest.h>

#include <cmath>
#include <vector>

#include "kikuchi/operators.hpp"
#include "kikuchi/stats.hpp"

using namespace kikuchi;

namespace {

Hypergraph all_edges_instance(int n, int p, double theta0 = 0.3) {
  ModelParams pr(n, 2, p, theta0, 0.0);
  Hypergraph h(pr, false, 0);
  for (std::uint64_t r = 0; r < h.num_subsets(); ++r) h.set_edge(r, true);
  return h;
}

Hypergraph null_instance(int n, int p, std::uint64_t seed, double theta0 = 0.3) {
  const ModelParams pr(n, 2, p, theta0, 0.0);
  return sample(pr, whitened_indicator(2, p), false, seed);
}

} // namespace

TEST_SUITE_BEGIN("operators");

TEST_CASE("sym_diff_tuple definition cases") {
  std::vector<int> S{1, 2, 3, 4}, V{1, 7, 3, 9};
  auto d = sym_diff_tuple(S, V, 4);
  REQUIRE(d.has_value());
  CHECK(*d == std::vector<int>{2, 4, 7, 9});

  CHECK_FALSE(sym_diff_tuple(S, S, 4).has_value()); // d = 0 != p
  std::vector<int> A{1, 2}, B{3, 4};
  CHECK_FALSE(sym_diff_tuple(A, B, 2).has_value()); // both disagree, d = 4 != 2
  std::vector<int> C{1, 2, 3};
  CHECK_THROWS(sym_diff_tuple(A, C, 2));
}

TEST_CASE("batch mask covers every subset exactly once") {
  const BatchMask m = BatchMask::draw(12, 4, 99);
  CHECK(m.L == 3); // ceil(ln 12)
  CHECK(m.zeta == doctest::Approx(1.0 / 3));
  CHECK(m.batch.size() == binomial_u64(12, 4));
  for (auto b : m.batch) CHECK(b < m.L);
  // deterministic
  const BatchMask m2 = BatchMask::draw(12, 4, 99);
  CHECK(m.batch == m2.batch);
}

TEST_CASE("constant matrix row sums: all edges present, theta0 = 1/2 limit") {
  // with every edge present, A_S = value_present for all S; K * ones equals
  // row_degree * value_present in every row
  const Hypergraph h = all_edges_instance(8, 4, 0.49);
  KikuchiOperator op(h, 4, OperatorMode::bosonic_implicit);
  const double a0 = h.value_present();
  VectorXd ones = VectorXd::Ones(static_cast<Eigen::Index>(op.dim()));
  VectorXd y;
  op.matvec(ones, y);
  const double expect = a0 * static_cast<double>(op.row_degree(0));
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(op.row_degree(0) == binomial_u64(4, 2) * 4 * 3);
  CHECK(static_cast<double>(op.row_degree(0)) <= op.row_degree_bound() + 1e-9);
  // looser bound that also counts replacements reusing removed vertices
  const double loose_bound = binomial(4, 2) * falling_factorial(8 - 4 + 2, 2);
  CHECK(op.row_degree_bound() <= loose_bound + 1e-9);
}

TEST_CASE("implicit matvec equals dense materialization") {
  for (auto [n, ell, p] : std::vector<std::array<int, 3>>{{6, 2, 2}, {7, 4, 2}, {7, 4, 4}}) {
    const Hypergraph h = null_instance(n, p, 11 + n + ell);
    KikuchiOperator op(h, ell, OperatorMode::bosonic_implicit);
    const MatrixXd K = op.dense_tuple_matrix();
    const Eigen::Index d = static_cast<Eigen::Index>(op.dim());
    REQUIRE(K.rows() == d);
    CHECK(K.isApprox(K.transpose(), 1e-14));
    for (Eigen::Index j = 0; j < d; j += std::max<Eigen::Index>(1, d / 37)) {
      VectorXd e = VectorXd::Zero(d);
      e[j] = 1.0;
      VectorXd y;
      op.matvec(e, y);
      CHECK((y - K.col(j)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("generic enumeration path equals the strided fast path") {
  for (auto [n, ell, p] : std::vector<std::array<int, 3>>{{8, 4, 4}, {8, 4, 2}}) {
    const Hypergraph h = null_instance(n, p, 5 + n);
    KikuchiOperator fast(h, ell, OperatorMode::bosonic_implicit);
    KikuchiOperator generic(h, ell, OperatorMode::bosonic_implicit);
    generic.force_generic_path();
    const Eigen::Index d = static_cast<Eigen::Index>(fast.dim());
    VectorXd x(d);
    CounterRng rng(3, Stream::iteration);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.next_sym();
    VectorXd yf, yg;
    fast.matvec(x, yf);
    generic.matvec(x, yg);
    CHECK((yf - yg).lpNorm<Eigen::Infinity>() <= 1e-11);
  }
}

TEST_CASE("operator symmetry on random vectors") {
  const Hypergraph h = null_instance(8, 4, 21);
  KikuchiOperator op(h, 4, OperatorMode::bosonic_implicit);
  CounterRng rng(5, Stream::iteration);
  const Eigen::Index d = static_cast<Eigen::Index>(op.dim());
  VectorXd x(d), y(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    x[i] = rng.next_sym();
    y[i] = rng.next_sym();
  }
  VectorXd kx, ky;
  op.matvec(x, kx);
  op.matvec(y, ky);
  CHECK(std::abs(x.dot(ky) - y.dot(kx)) <= 1e-10 * std::max(1.0, kx.norm() * y.norm()));
}

TEST_CASE("linearity") {
  const Hypergraph h = null_instance(7, 2, 8);
  KikuchiOperator op(h, 4, OperatorMode::bosonic_implicit);
  const Eigen::Index d = static_cast<Eigen::Index>(op.dim());
  CounterRng rng(6, Stream::iteration);
  VectorXd x(d), y(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    x[i] = rng.next_sym();
    y[i] = rng.next_sym();
  }
  VectorXd lhs, kx, ky;
  op.matvec(2.5 * x - 0.75 * y, lhs);
  op.matvec(x, kx);
  op.matvec(y, ky);
  CHECK((lhs - (2.5 * kx - 0.75 * ky)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("threaded matvec is deterministic and equal to single thread") {
  const Hypergraph h = null_instance(10, 4, 77);
  KikuchiOperator op1(h, 4, OperatorMode::bosonic_implicit, nullptr, EdgeFilter::all, 1);
  KikuchiOperator op2(h, 4, OperatorMode::bosonic_implicit, nullptr, EdgeFilter::all, 2);
  const Eigen::Index d = static_cast<Eigen::Index>(op1.dim());
  CounterRng rng(6, Stream::iteration);
  VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.next_sym();
  VectorXd y1, y2;
  op1.matvec(x, y1);
  op2.matvec(x, y2);
  CHECK((y1 - y2).lpNorm<Eigen::Infinity>() == 0.0); // disjoint row ranges: bitwise equal
}

TEST_CASE("dense set matrix structure at ell = p") {
  const Hypergraph h = null_instance(12, 4, 13);
  const MatrixXd K = dense_set_kikuchi(h, 4);
  CHECK(K.rows() == 495); // C(12,4)
  std::vector<int> U(4), W(4), diff;
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t i = uniform_int(trial, Stream::sampling, 1, 495);
    const std::uint64_t j = uniform_int(trial, Stream::sampling, 2, 495);
    subset_unrank_colex(i, 4, U);
    subset_unrank_colex(j, 4, W);
    diff.clear();
    std::set_symmetric_difference(U.begin(), U.end(), W.begin(), W.end(),
                                  std::back_inserter(diff));
    const double entry = K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (diff.size() == 4)
      CHECK(entry == doctest::Approx(h.edge_value(diff)).epsilon(1e-14));
    else
      CHECK(entry == 0.0);
  }
}

TEST_CASE("set sector carries the bosonic top eigenvalue at ell = p") {
  // lambda_top(bosonic) equals (p/2)! * lambda_top(set matrix) at ell = p
  const Hypergraph h = null_instance(10, 4, 4);
  KikuchiOperator bos(h, 4, OperatorMode::bosonic_implicit);
  EigOptions opts;
  opts.tol = 1e-12;
  opts.max_iter = 400;
  const SpectralEstimate be = lambda_max(bos, opts);
  KikuchiOperator setop(h, 4, OperatorMode::set_dense);
  const SpectralEstimate se = lambda_max_dense(setop);
  CHECK(std::abs(be.lambda_max - se.bosonic_equivalent) <= 1e-8 * std::abs(se.bosonic_equivalent));
}

TEST_CASE("set implicit equals dense set matrix") {
  const Hypergraph h = null_instance(11, 4, 19);
  KikuchiOperator impl(h, 4, OperatorMode::set_implicit);
  KikuchiOperator dens(h, 4, OperatorMode::set_dense);
  const MatrixXd K = dens.dense_set_matrix();
  const Eigen::Index d = static_cast<Eigen::Index>(impl.dim());
  CounterRng rng(8, Stream::iteration);
  VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.next_sym();
  VectorXd y;
  impl.matvec(x, y);
  CHECK((y - K * x).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("lanczos and power agree with dense eigensolve") {
  const Hypergraph h = null_instance(8, 4, 6);
  KikuchiOperator op(h, 4, OperatorMode::bosonic_implicit);
  const MatrixXd K = op.dense_tuple_matrix();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
  const double exact = es.eigenvalues()(K.rows() - 1);
  EigOptions lopt;
  lopt.tol = 1e-9;
  const SpectralEstimate lan = lambda_max(op, lopt);
  CHECK(std::abs(lan.lambda_max - exact) <= 1e-6 * std::abs(exact));
  CHECK(lan.converged);
  CHECK(lan.residual <= 1e-6 * std::max(1.0, std::abs(exact)));
  EigOptions popt;
  popt.method = "power";
  popt.tol = 1e-8;
  popt.max_iter = 20000;
  const SpectralEstimate pw = lambda_max(op, popt);
  CHECK(std::abs(pw.lambda_max - exact) <= 1e-6 * std::abs(exact));
}

TEST_CASE("lambda_max determinism given seed") {
  const Hypergraph h = null_instance(10, 4, 31);
  KikuchiOperator op(h, 4, OperatorMode::set_implicit);
  EigOptions opts;
  opts.seed = 5;
  const SpectralEstimate a = lambda_max(op, opts);
  const SpectralEstimate b = lambda_max(op, opts);
  CHECK(a.lambda_max == b.lambda_max);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("operator input validation") {
  const Hypergraph h = null_instance(10, 4, 1);
  CHECK_THROWS(KikuchiOperator(h, 6, OperatorMode::bosonic_implicit)); // not multiple of p
  CHECK_THROWS(KikuchiOperator(h, 12, OperatorMode::bosonic_implicit)); // > n - p/2
  KikuchiOperator op(h, 4, OperatorMode::bosonic_implicit);
  VectorXd wrong(5);
  VectorXd y;
  CHECK_THROWS(op.matvec(wrong, y));
}

TEST_CASE("masked operator zeroes batch-1 edges") {
  const Hypergraph h = null_instance(9, 4, 3);
  auto mask = std::make_shared<const BatchMask>(BatchMask::draw(9, 4, 17));
  KikuchiOperator full(h, 4, OperatorMode::set_implicit);
  KikuchiOperator comp(h, 4, OperatorMode::set_implicit, mask, EdgeFilter::complement_of_batch1);
  KikuchiOperator b1(h, 4, OperatorMode::set_implicit, mask, EdgeFilter::batch1_only);
  const Eigen::Index d = static_cast<Eigen::Index>(full.dim());
  CounterRng rng(2, Stream::iteration);
  VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.next_sym();
  VectorXd yf, yc, yb;
  full.matvec(x, yf);
  comp.matvec(x, yc);
  b1.matvec(x, yb);
  CHECK((yf - (yc + yb)).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(yc.norm() > 0);
  CHECK(yb.norm() > 0);
}

TEST_CASE("thresholds formulas") {
  const ModelParams pr(20, 2, 4, 0.3, 0.1);
  const Thresholds t = thresholds(pr, 4, 2.0, 0.5);
  CHECK(t.c_hat == doctest::Approx(1.0 / 16).epsilon(1e-12));
  CHECK(t.tau == doctest::Approx(100.0).epsilon(1e-12)); // 0.5*(1/16)*0.5*400*16
  CHECK(t.null_bound ==
        doctest::Approx(std::sqrt(6.0 * 400 * 64 * std::log(20.0))).epsilon(1e-12));
  // beta_min scaling in ell: factor 4^{1/2-p/4} when ell -> 4 ell
  const ModelParams pr2(200, 2, 4, 0.3, 0.1);
  const double r = thresholds(pr2, 16).beta_min / thresholds(pr2, 4).beta_min;
  CHECK(r == doctest::Approx(std::pow(4.0, 0.5 - 1.0)).epsilon(1e-12));
  CHECK_THROWS(thresholds(pr, 1));
}

TEST_CASE("expected certificate rayleigh matches the lambda=1 derivation") {
  // beta (p/2)! C(p,p/2) C(n-p,p/2) k g(p/2) / mu at lambda = 1
  const int k = 2, p = 4, n = 30;
  const double beta = 0.3;
  const double mu = whitened_moment_closed(k, p, 2);
  const double direct = beta * factorial(2) * binomial(4, 2) * binomial(26, 2) * k *
                        g_overlap(k, p, 2) / mu;
  CHECK(expected_certificate_rayleigh(k, p, n, 1, beta) ==
        doctest::Approx(direct).epsilon(1e-12));
  CHECK(direct == doctest::Approx(146.25).epsilon(1e-12));
}

TEST_CASE("eps = 0 planted spectra match null spectra (KS)") {
  std::vector<double> a, b;
  const BiasFunction f = whitened_indicator(2, 4);
  for (int s = 0; s < 20; ++s) {
    const ModelParams pr(11, 2, 4, 0.3, 0.0);
    const Hypergraph hp = sample(pr, f, true, 100 + s);
    const Hypergraph hq = sample(pr, f, false, 200 + s);
    EigOptions opts;
    opts.tol = 1e-7;
    KikuchiOperator op1(hp, 4, OperatorMode::set_implicit);
    KikuchiOperator op2(hq, 4, OperatorMode::set_implicit);
    a.push_back(lambda_max(op1, opts).bosonic_equivalent);
    b.push_back(lambda_max(op2, opts).bosonic_equivalent);
  }
  CHECK_FALSE(ks_two_sample(a, b, 0.01).reject);
}

TEST_SUITE_END();
