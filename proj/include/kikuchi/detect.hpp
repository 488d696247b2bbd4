#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kikuchi/model.hpp"
#include "kikuchi/operators.hpp"
#include "kikuchi/stats.hpp"
#include "kikuchi/vectors.hpp"
#include "kikuchi/version.hpp"

namespace kikuchi {

struct DetectConfig {
  double tol = 1e-6;
  int max_iter = 0; // 0 -> solver default
  std::uint64_t seed = 1;
  OperatorMode mode = OperatorMode::bosonic_implicit;
  std::string method = "lanczos";
  int threads = 1;
  double design_beta = -1.0; // <= 0: use the instance's own beta
  double gap = 2.0;
};

struct DetectionReport {
  std::string verdict; // "Planted" | "Random"
  double lambda_max = 0; // bosonic-equivalent units
  double tau = 0;
  double null_bound = 0;
  double beta = 0;
  int ell = 0;
  std::uint64_t seed = 0;
  double wall_time_s = 0;
  int iterations = 0;
  double residual = 0;
  bool converged = true;
  std::string mode;

  std::string to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"verdict\":\"" << verdict << "\",\"lambda_max\":" << lambda_max
       << ",\"tau\":" << tau << ",\"null_bound\":" << null_bound << ",\"beta\":" << beta
       << ",\"ell\":" << ell << ",\"seed\":" << seed << ",\"wall_time_s\":" << wall_time_s
       << ",\"iterations\":" << iterations << ",\"residual\":" << residual
       << ",\"converged\":" << (converged ? "true" : "false") << ",\"mode\":\"" << mode
       << "\",\"version\":\"" << kVersion << "\"}";
    return os.str();
  }
};

// Largest-eigenvalue threshold test. Verdict is Planted iff lambda_max > tau
// (strict); solver non-convergence is flagged but still decided.
inline DetectionReport run_detection(const Hypergraph& h, int ell, const DetectConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& pr = h.params();
  const double beta = cfg.design_beta > 0 ? cfg.design_beta : pr.beta();
  const Thresholds th = thresholds(pr, ell, cfg.gap, beta);

  KikuchiOperator op(h, ell, cfg.mode, nullptr, EdgeFilter::all, cfg.threads);
  EigOptions eopts;
  eopts.tol = cfg.tol;
  eopts.max_iter = cfg.max_iter;
  eopts.seed = cfg.seed;
  eopts.method = cfg.mode == OperatorMode::set_dense ? "dense" : cfg.method;
  const SpectralEstimate est = lambda_max(op, eopts);

  DetectionReport rep;
  rep.lambda_max = est.bosonic_equivalent;
  rep.tau = th.tau;
  rep.null_bound = th.null_bound;
  rep.beta = beta;
  rep.ell = ell;
  rep.seed = cfg.seed;
  rep.iterations = est.iterations;
  rep.residual = est.residual;
  rep.converged = est.converged;
  rep.mode = to_string(cfg.mode);
  rep.verdict = rep.lambda_max > rep.tau ? "Planted" : "Random";
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// --- sweep harness ------------------------------------------------------------

struct SweepSpec {
  int k = 2;
  int p = 4;
  double theta0 = 0.45;
  std::vector<int> n_list;
  std::vector<int> ell_list;
  std::vector<double> beta_list;
  int trials = 20;
  std::uint64_t seed = 1;
  OperatorMode mode = OperatorMode::set_implicit;
  int threads = 1;
  std::string out_path;

  void validate() const {
    for (int n : n_list)
      for (int ell : ell_list) {
        if (ell % p != 0) throw std::invalid_argument("sweep: ell must be a multiple of p");
        if (ell < p / 2 || ell > n - p / 2) throw std::invalid_argument("sweep: ell out of range");
      }
    if (n_list.empty() || ell_list.empty()) return; // empty grid is legal
  }
};

// plain-text key=value spec file; lists are comma separated
inline SweepSpec parse_sweep_spec(std::istream& is) {
  SweepSpec s;
  std::string line;
  auto split_ints = [](const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
  };
  auto split_doubles = [](const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("sweep spec: bad line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "k") s.k = std::stoi(val);
    else if (key == "p") s.p = std::stoi(val);
    else if (key == "theta0") s.theta0 = std::stod(val);
    else if (key == "n") s.n_list = split_ints(val);
    else if (key == "ell") s.ell_list = split_ints(val);
    else if (key == "beta") s.beta_list = split_doubles(val);
    else if (key == "trials") s.trials = std::stoi(val);
    else if (key == "seed") s.seed = std::stoull(val);
    else if (key == "threads") s.threads = std::stoi(val);
    else if (key == "mode") {
      if (val == "implicit") s.mode = OperatorMode::bosonic_implicit;
      else if (val == "set") s.mode = OperatorMode::set_implicit;
      else if (val == "dense") s.mode = OperatorMode::set_dense;
      else throw std::runtime_error("sweep spec: bad mode " + val);
    } else if (key == "out") s.out_path = val;
    else throw std::runtime_error("sweep spec: unknown key " + key);
  }
  s.validate();
  return s;
}

struct SweepCell {
  int n = 0, k = 0, p = 0, ell = 0;
  double beta = 0;
  int trials = 0;
  double planted_rate = 0, null_fp_rate = 0;
  double ci_low = 0, ci_high = 0; // Wilson interval on the planted rate
};

inline std::string sweep_csv_header() {
  return std::string("# kikuchi ") + kVersion +
         "\nn,k,p,ell,beta,trials,planted_rate,null_fp_rate,ci_low,ci_high\n";
}

inline std::string cell_key(int n, int ell, double beta) {
  std::ostringstream os;
  os.precision(17);
  os << n << "|" << ell << "|" << beta;
  return os.str();
}

inline std::string format_cell(const SweepCell& c) {
  std::ostringstream os;
  os.precision(17);
  os << c.n << ',' << c.k << ',' << c.p << ',' << c.ell << ',' << c.beta << ',' << c.trials << ','
     << c.planted_rate << ',' << c.null_fp_rate << ',' << c.ci_low << ',' << c.ci_high << '\n';
  return os.str();
}

inline SweepCell run_sweep_cell(const SweepSpec& spec, int n, int ell, double beta) {
  SweepCell cell;
  cell.n = n;
  cell.k = spec.k;
  cell.p = spec.p;
  cell.ell = ell;
  cell.beta = beta;
  cell.trials = spec.trials;
  const double eps = beta * std::sqrt(spec.theta0 * (1.0 - spec.theta0));
  const ModelParams params(n, spec.k, spec.p, spec.theta0, eps);
  const BiasFunction f = whitened_indicator(spec.k, spec.p);
  int planted_hits = 0, null_hits = 0;
  for (int t = 0; t < spec.trials; ++t) {
    // per-cell deterministic seeding: hash spec seed with cell coordinates
    const std::uint64_t base = counter_hash(
        spec.seed, Stream::cells,
        (static_cast<std::uint64_t>(n) << 40) ^ (static_cast<std::uint64_t>(ell) << 24) ^
            static_cast<std::uint64_t>(beta * 1e6) ^ static_cast<std::uint64_t>(t));
    DetectConfig cfg;
    cfg.mode = spec.mode;
    cfg.seed = base;
    cfg.threads = spec.threads;
    cfg.design_beta = beta;
    {
      const Hypergraph hp = sample(params, f, true, base);
      if (run_detection(hp, ell, cfg).verdict == "Planted") ++planted_hits;
    }
    {
      const ModelParams null_params(n, spec.k, spec.p, spec.theta0, 0.0);
      const Hypergraph hq = sample(null_params, f, false, base + 1);
      if (run_detection(hq, ell, cfg).verdict == "Planted") ++null_hits;
    }
  }
  cell.planted_rate = static_cast<double>(planted_hits) / spec.trials;
  cell.null_fp_rate = static_cast<double>(null_hits) / spec.trials;
  const WilsonInterval wi = wilson_interval(planted_hits, spec.trials);
  cell.ci_low = wi.low;
  cell.ci_high = wi.high;
  return cell;
}

// Grid sweep with one CSV row per cell, resumable: existing rows are kept and
// their cells skipped. Returns all cells (existing + new).
inline std::vector<SweepCell> sweep(const SweepSpec& spec) {
  spec.validate();
  std::map<std::string, std::string> done;
  std::string existing_header;
  if (!spec.out_path.empty()) {
    std::ifstream in(spec.out_path);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("n,", 0) == 0) continue;
      std::stringstream ss(line);
      std::string tok;
      std::vector<std::string> parts;
      while (std::getline(ss, tok, ',')) parts.push_back(tok);
      if (parts.size() >= 10)
        done[cell_key(std::stoi(parts[0]), std::stoi(parts[3]), std::stod(parts[4]))] = line;
    }
  }

  std::vector<SweepCell> cells;
  std::ostringstream body;
  for (int n : spec.n_list)
    for (int ell : spec.ell_list)
      for (double beta : spec.beta_list) {
        const std::string key = cell_key(n, ell, beta);
        if (done.count(key)) {
          body << done[key] << '\n';
          continue;
        }
        const SweepCell cell = run_sweep_cell(spec, n, ell, beta);
        cells.push_back(cell);
        body << format_cell(cell);
        if (!spec.out_path.empty()) { // persist progress cell by cell
          std::ofstream out(spec.out_path, std::ios::trunc);
          out << sweep_csv_header() << body.str();
        }
      }
  if (!spec.out_path.empty()) {
    std::ofstream out(spec.out_path, std::ios::trunc);
    out << sweep_csv_header() << body.str();
  }
  return cells;
}

// --- calibration of the energy constant ---------------------------------------

struct CalibrationCell {
  int n = 0, ell = 0, trials = 0;
  double beta = 0;
  double mc_rayleigh = 0;    // Monte Carlo mean of <v|K|v>/||v||^2
  double predictor = 0;      // beta n^{p/2} ell^{p/2}
  double exact_expected = 0; // finite-size expansion value
};

struct CalibrationRecord {
  double c_closed = 0; // asymptotic constant k (g(p-1)/mu)^{p/2} / (p/2)!
  double c_mc = 0;     // regression slope of mc_rayleigh on the predictor
  double ratio = 0;    // c_mc / c_closed
  bool warn = false;   // outside [0.75, 1.33]
  std::vector<CalibrationCell> cells;
};

// Monte Carlo certificate Rayleigh quotients regressed against
// beta n^{p/2} ell^{p/2}. The asymptotic constant only emerges for
// lambda >= p/2 (smaller lambda never contains the leading term of the
// expansion), so cells default to lambda = 2 at p = 4.
inline CalibrationRecord calibrate(int k, int p, const std::vector<int>& n_list, int trials,
                                   double beta = 0.3, double theta0 = 0.3, int lambda = 2,
                                   std::uint64_t seed = 1, std::uint64_t samples_per_trial = 512) {
  CalibrationRecord rec;
  rec.c_closed = c_hat_closed_form(k, p);
  const BiasFunction f = whitened_indicator(k, p);
  const int ell = lambda * p;
  double sxy = 0, sxx = 0;
  for (int n : n_list) {
    const double eps = beta * std::sqrt(theta0 * (1 - theta0));
    const ModelParams params(n, k, p, theta0, eps);
    CalibrationCell cell;
    cell.n = n;
    cell.ell = ell;
    cell.trials = trials;
    cell.beta = beta;
    cell.predictor = beta * std::pow(static_cast<double>(n), p / 2.0) *
                     std::pow(static_cast<double>(ell), p / 2.0);
    cell.exact_expected = expected_certificate_rayleigh(k, p, n, lambda, beta);
    std::vector<double> vals;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t s = counter_hash(seed, Stream::cells,
                                           (static_cast<std::uint64_t>(n) << 20) ^
                                               static_cast<std::uint64_t>(t));
      const Hypergraph h = sample(params, f, true, s);
      ProductVector pv;
      pv.n = n;
      pv.p = p;
      pv.lambda = lambda;
      pv.base = certificate_base(h, f);
      if (lambda == 1) {
        KikuchiOperator op(h, ell, OperatorMode::set_implicit);
        vals.push_back(rayleigh(op, pv).value);
      } else {
        vals.push_back(rayleigh_sampled(h, pv, samples_per_trial, s + 17).value);
      }
    }
    cell.mc_rayleigh = mean(vals);
    rec.cells.push_back(cell);
    sxy += cell.predictor * cell.mc_rayleigh;
    sxx += cell.predictor * cell.predictor;
  }
  rec.c_mc = sxy / sxx;
  rec.ratio = rec.c_mc / rec.c_closed;
  rec.warn = rec.ratio < 0.75 || rec.ratio > 4.0 / 3.0;
  return rec;
}

} // namespace kikuchi
