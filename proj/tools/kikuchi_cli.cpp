// kikuchi: sampling, spectral detection, moment oracles, hardness boundaries,
// and a desk-scale simulation of the quantized detection pipeline, in one
// reproducible binary. All outputs are plain text (hsbm, CSV, JSON); every
// file artifact gets a sibling manifest with parameters, seeds and checksum.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "kikuchi/detect.hpp"
#include "kikuchi/manifest.hpp"
#include "kikuchi/moments.hpp"
#include "kikuchi/qsim.hpp"
#include "kikuchi/version.hpp"

using namespace kikuchi;

namespace {

int default_threads() {
  if (const char* env = std::getenv("KIKUCHI_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

OperatorMode parse_mode(const std::string& m) {
  if (m == "implicit") return OperatorMode::bosonic_implicit;
  if (m == "set") return OperatorMode::set_implicit;
  if (m == "dense") return OperatorMode::set_dense;
  throw CLI::ValidationError("--mode", "expected implicit|set|dense");
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string d17(double v) { return format_decimal17(v); }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("kikuchi ") + kVersion +
               " - hypergraph community detection via the Kikuchi hierarchy"};
  app.require_subcommand(1);
  int threads = default_threads();
  app.add_option("--threads", threads, "worker threads (env KIKUCHI_THREADS overrides default)");

  // ---- sample ---------------------------------------------------------------
  auto* c_sample = app.add_subcommand("sample", "draw an instance and write it as .hsbm text");
  int s_n = 20, s_p = 4, s_k = 2;
  double s_theta0 = 0.3, s_eps = 0.1;
  bool s_planted = false, s_no_labels = false;
  std::uint64_t s_seed = 1;
  std::string s_out;
  c_sample->add_option("--n", s_n)->required();
  c_sample->add_option("--p", s_p)->required();
  c_sample->add_option("--k", s_k)->required();
  c_sample->add_option("--theta0", s_theta0)->required();
  c_sample->add_option("--eps", s_eps)->required();
  c_sample->add_flag("--planted", s_planted, "draw from the planted distribution");
  c_sample->add_flag("--no-labels", s_no_labels, "omit ground-truth labels from the file");
  c_sample->add_option("--seed", s_seed);
  c_sample->add_option("--out", s_out, "output path")->required();

  // ---- detect ---------------------------------------------------------------
  auto* c_detect = app.add_subcommand("detect", "spectral threshold test on an instance");
  std::string d_in, d_mode = "implicit", d_method = "lanczos";
  int d_ell = 4, d_max_iter = 0;
  double d_tol = 1e-6, d_design_beta = -1.0, d_gap = 2.0;
  std::uint64_t d_seed = 1;
  c_detect->add_option("--in", d_in, "input .hsbm file")->required();
  c_detect->add_option("--ell", d_ell)->required();
  c_detect->add_option("--tol", d_tol);
  c_detect->add_option("--max-iter", d_max_iter);
  c_detect->add_option("--seed", d_seed);
  c_detect->add_option("--mode", d_mode, "implicit|set|dense");
  c_detect->add_option("--method", d_method, "lanczos|power|dense");
  c_detect->add_option("--design-beta", d_design_beta, "SNR used for the threshold tau");
  c_detect->add_option("--gap", d_gap, "threshold gap factor (default 2)");

  // ---- sweep ----------------------------------------------------------------
  auto* c_sweep = app.add_subcommand("sweep", "Monte Carlo detection-rate grid (resumable)");
  std::string w_spec;
  c_sweep->add_option("--spec", w_spec, "key=value spec file")->required();

  // ---- moments --------------------------------------------------------------
  auto* c_moments = app.add_subcommand("moments", "moment oracle report");
  int m_k = 2, m_p = 4;
  double m_theta0 = 0.3, m_eps = 0.1;
  bool m_json = false;
  c_moments->add_option("--k", m_k)->required();
  c_moments->add_option("--p", m_p)->required();
  c_moments->add_option("--theta0", m_theta0);
  c_moments->add_option("--eps", m_eps);
  c_moments->add_flag("--json", m_json);

  // ---- lcdf -----------------------------------------------------------------
  auto* c_lcdf = app.add_subcommand("lcdf", "low-coordinate-degree hardness boundary table");
  int l_k = 2, l_p = 4, l_n = 100;
  double l_theta0 = 0.3, l_eps = 0.1;
  std::vector<double> l_D{1, 2, 4, 8, 16, 32};
  c_lcdf->add_option("--k", l_k)->required();
  c_lcdf->add_option("--p", l_p)->required();
  c_lcdf->add_option("--n", l_n)->required();
  c_lcdf->add_option("--D", l_D, "coordinate degrees");
  c_lcdf->add_option("--theta0", l_theta0);
  c_lcdf->add_option("--eps", l_eps);

  // ---- overlap ----------------------------------------------------------------
  auto* c_overlap = app.add_subcommand("overlap", "certificate/guiding overlap statistics (CSV)");
  int o_n = 20, o_p = 4, o_k = 2, o_ell = 4, o_seeds = 20;
  double o_theta0 = 0.3, o_beta = 0.3;
  std::uint64_t o_seed0 = 1;
  c_overlap->add_option("--n", o_n)->required();
  c_overlap->add_option("--p", o_p)->required();
  c_overlap->add_option("--k", o_k)->required();
  c_overlap->add_option("--ell", o_ell)->required();
  c_overlap->add_option("--theta0", o_theta0);
  c_overlap->add_option("--beta", o_beta);
  c_overlap->add_option("--seeds", o_seeds, "number of instances");
  c_overlap->add_option("--seed0", o_seed0, "first seed");

  // ---- qsim -----------------------------------------------------------------
  auto* c_qsim = app.add_subcommand("qsim", "simulated quantized detection on an instance");
  std::string q_in, q_bits = "exact";
  int q_ell = 4, q_shots = 1024;
  double q_tau = -1.0, q_gap = 2.0, q_design_beta = -1.0;
  std::string q_amp = "on";
  std::uint64_t q_seed = 1, q_mask_seed = 0;
  c_qsim->add_option("--in", q_in, "input .hsbm file")->required();
  c_qsim->add_option("--ell", q_ell);
  c_qsim->add_option("--tau", q_tau, "threshold; < 0 uses the formula threshold");
  c_qsim->add_option("--shots", q_shots);
  c_qsim->add_option("--amp", q_amp, "on|off");
  c_qsim->add_option("--bits", q_bits, "phase register bits or 'exact'");
  c_qsim->add_option("--seed", q_seed);
  c_qsim->add_option("--mask-seed", q_mask_seed, "sample-splitting seed (default seed+1)");
  c_qsim->add_option("--design-beta", q_design_beta);
  c_qsim->add_option("--gap", q_gap);

  // ---- estimate ----------------------------------------------------------------
  auto* c_estimate = app.add_subcommand("estimate", "quantum resource estimates (CSV)");
  int e_p = 4, e_ell = 16;
  std::string e_schedule = "const";
  std::vector<double> e_ngrid{1e2, 1e3, 1e4, 1e5, 1e6};
  double e_cexp = 1.0;
  c_estimate->add_option("--p", e_p)->required();
  c_estimate->add_option("--ell", e_ell, "ell (const schedule) ");
  c_estimate->add_option("--schedule", e_schedule, "const|sqrt");
  c_estimate->add_option("--n-grid", e_ngrid);
  c_estimate->add_option("--c-exp", e_cexp, "exp(O(ell)) modeled as exp(c_exp ell)");

  // ---- calibrate ----------------------------------------------------------------
  auto* c_calibrate = app.add_subcommand("calibrate", "re-estimate the energy constant by MC");
  int cb_k = 2, cb_p = 4, cb_trials = 16, cb_lambda = 2;
  std::vector<int> cb_nlist{60, 90};
  double cb_beta = 0.3, cb_theta0 = 0.3;
  std::uint64_t cb_seed = 1;
  c_calibrate->add_option("--k", cb_k)->required();
  c_calibrate->add_option("--p", cb_p)->required();
  c_calibrate->add_option("--n-list", cb_nlist);
  c_calibrate->add_option("--trials", cb_trials);
  c_calibrate->add_option("--lambda", cb_lambda);
  c_calibrate->add_option("--beta", cb_beta);
  c_calibrate->add_option("--theta0", cb_theta0);
  c_calibrate->add_option("--seed", cb_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e); // prints help or the usage diagnostic
    return code == 0 ? 0 : 1;
  }

  try {
    Timer timer;
    if (*c_sample) {
      const ModelParams params(s_n, s_k, s_p, s_theta0, s_eps);
      const BiasFunction f = whitened_indicator(s_k, s_p);
      const Hypergraph h = sample(params, f, s_planted, s_seed, !s_no_labels);
      store(h, s_out);
      write_manifest(s_out, "sample",
                     {{"n", std::to_string(s_n)},
                      {"p", std::to_string(s_p)},
                      {"k", std::to_string(s_k)},
                      {"theta0", d17(s_theta0)},
                      {"eps", d17(s_eps)},
                      {"planted", s_planted ? "1" : "0"},
                      {"seed", std::to_string(s_seed)}},
                     timer.seconds());
      std::cout << "{\"file\":\"" << s_out << "\",\"edges\":" << h.edge_count()
                << ",\"subsets\":" << h.num_subsets() << "}\n";
    } else if (*c_detect) {
      const Hypergraph h = load(d_in);
      DetectConfig cfg;
      cfg.tol = d_tol;
      cfg.max_iter = d_max_iter;
      cfg.seed = d_seed;
      cfg.mode = parse_mode(d_mode);
      cfg.method = d_method;
      cfg.threads = threads;
      cfg.design_beta = d_design_beta;
      cfg.gap = d_gap;
      const DetectionReport rep = run_detection(h, d_ell, cfg);
      std::cout << rep.to_json() << "\n";
      std::cout << "verdict: " << rep.verdict << "\n";
    } else if (*c_sweep) {
      std::ifstream is(w_spec);
      if (!is) throw std::runtime_error("cannot open spec " + w_spec);
      SweepSpec spec = parse_sweep_spec(is);
      if (spec.threads <= 1) spec.threads = threads;
      const auto cells = sweep(spec);
      if (spec.out_path.empty()) {
        std::cout << sweep_csv_header();
        for (const auto& c : cells) std::cout << format_cell(c);
      } else {
        write_manifest(spec.out_path, "sweep", {{"spec", w_spec}}, timer.seconds());
        std::cout << "{\"file\":\"" << spec.out_path << "\",\"new_cells\":" << cells.size()
                  << "}\n";
      }
    } else if (*c_moments) {
      const BiasFunction f = whitened_indicator(m_k, m_p);
      const MomentSet ms = moment_set(f, m_theta0);
      const double beta = m_eps / std::sqrt(m_theta0 * (1 - m_theta0));
      if (m_json) {
        std::cout.precision(17);
        std::cout << "{\"k\":" << m_k << ",\"p\":" << m_p << ",\"theta0\":" << m_theta0
                  << ",\"eps\":" << m_eps << ",\"beta\":" << beta << ",\"mu\":" << ms.mu
                  << ",\"gamma\":" << ms.gamma << ",\"alpha\":" << ms.alpha << ",\"c\":" << ms.c
                  << ",\"mu_brute\":" << ms.mu_brute << ",\"gamma_brute\":" << ms.gamma_brute
                  << ",\"alpha_brute\":" << ms.alpha_brute
                  << ",\"f_mono\":" << whitened_indicator_monochromatic(m_k, m_p)
                  << ",\"c_hat\":" << c_hat_closed_form(m_k, m_p) << ",\"version\":\"" << kVersion
                  << "\"}\n";
      } else {
        std::cout << "k " << m_k << "\np " << m_p << "\ntheta0 " << d17(m_theta0) << "\neps "
                  << d17(m_eps) << "\nbeta " << d17(beta) << "\nmu " << d17(ms.mu) << "\ngamma "
                  << d17(ms.gamma) << "\nalpha " << d17(ms.alpha) << "\nc " << d17(ms.c)
                  << "\nmu_brute " << d17(ms.mu_brute) << "\ngamma_brute " << d17(ms.gamma_brute)
                  << "\nalpha_brute " << d17(ms.alpha_brute) << "\nf_mono "
                  << d17(whitened_indicator_monochromatic(m_k, m_p)) << "\nc_hat "
                  << d17(c_hat_closed_form(m_k, m_p)) << "\n";
      }
    } else if (*c_lcdf) {
      std::cout << "# kikuchi " << kVersion << "\nD,beta_lcdf,n,p,k\n";
      for (double D : l_D) {
        const LcdfResult r = lcdf_threshold(l_k, l_p, l_n, D, l_theta0, l_eps);
        std::cout << d17(D) << ',' << d17(r.beta_lcdf) << ',' << l_n << ',' << l_p << ',' << l_k
                  << "\n";
      }
    } else if (*c_overlap) {
      const double eps = o_beta * std::sqrt(o_theta0 * (1 - o_theta0));
      const ModelParams params(o_n, o_k, o_p, o_theta0, eps);
      const BiasFunction f = whitened_indicator(o_k, o_p);
      const int lambda = o_ell / o_p;
      std::cout << "# kikuchi " << kVersion << "\nn,p,k,ell,beta,seed,stat_name,value,stderr\n";
      for (int s = 0; s < o_seeds; ++s) {
        const std::uint64_t seed = o_seed0 + s;
        const Hypergraph h = sample(params, f, true, seed);
        ProductVector u{o_n, o_p, lambda, guiding_base(h)};
        ProductVector v{o_n, o_p, lambda, certificate_base(h, f)};
        auto row = [&](const char* name, const ValueWithError& val) {
          std::cout << o_n << ',' << o_p << ',' << o_k << ',' << o_ell << ',' << d17(o_beta) << ','
                    << seed << ',' << name << ',' << d17(val.value) << ',' << d17(val.std_error)
                    << "\n";
        };
        row("cert_norm2", collision_free_norm2(v));
        row("guide_norm2", collision_free_norm2(u));
        row("overlap", overlap(u, v));
        row("normalized_overlap", normalized_overlap(u, v));
        if (lambda == 1) {
          KikuchiOperator op(h, o_ell, OperatorMode::set_implicit, nullptr, EdgeFilter::all,
                             threads);
          row("certificate_rayleigh", rayleigh(op, v));
        } else {
          row("certificate_rayleigh", rayleigh_sampled(h, v, 4096, seed + 101));
        }
      }
    } else if (*c_qsim) {
      const Hypergraph h = load(q_in);
      const auto& pr = h.params();
      const double beta = q_design_beta > 0 ? q_design_beta : pr.beta();
      const Thresholds th = thresholds(pr, q_ell, q_gap, beta);
      const double tau = q_tau >= 0 ? q_tau : th.tau;
      const std::uint64_t mask_seed = q_mask_seed ? q_mask_seed : q_seed + 1;
      const SplitPipeline sp = split(h, q_ell, mask_seed, OperatorMode::set_implicit, threads);
      const SetSpectrum spec = set_spectrum(h, q_ell, sp.mask, EdgeFilter::complement_of_batch1);
      const int bits = q_bits == "exact" ? 0 : std::stoi(q_bits);
      const QpeResult qr = qpe_sample(spec, sp.guide.base, tau, q_shots, q_seed, bits);
      const bool amp = q_amp != "off";
      double reps = -1;
      if (qr.hit_prob_exact > 0)
        reps = amp ? std::ceil(1.0 / std::sqrt(qr.hit_prob_exact))
                   : std::ceil(std::log(2.0) / qr.hit_prob_exact);
      std::cout.precision(17);
      std::cout << "{\"tau\":" << tau << ",\"shots\":" << q_shots << ",\"hits\":" << qr.hits
                << ",\"hit_prob_exact\":" << qr.hit_prob_exact
                << ",\"lambda_max\":" << spec.values[spec.values.size() - 1]
                << ",\"repetitions_estimate\":" << reps << ",\"amplified\":" << (amp ? 1 : 0)
                << ",\"verdict\":\"" << (qr.hits > 0 ? "Planted" : "Random") << "\"}\n";
    } else if (*c_estimate) {
      ResourceOptions opts;
      opts.c_exp = e_cexp;
      opts.schedule = e_schedule == "sqrt" ? EllSchedule::sqrt_n : EllSchedule::constant;
      std::cout << "# kikuchi " << kVersion
                << "\nn,ell,p,log10_gates,qubits,log10_classical_bits,log10_classical_time,"
                   "speedup_exponent,overheads\n";
      for (double n : e_ngrid) {
        const int ell = opts.schedule == EllSchedule::sqrt_n
                            ? std::max(e_p, static_cast<int>(std::sqrt(n)) / e_p * e_p)
                            : e_ell;
        const ResourceEstimate r = resource_estimate(n, ell, e_p, opts);
        std::cout << d17(n) << ',' << ell << ',' << e_p << ',' << d17(r.log10_gates) << ','
                  << d17(r.qubits) << ',' << d17(r.log10_classical_bits) << ','
                  << d17(r.log10_classical_time) << ',' << d17(r.speedup_exponent) << ",\""
                  << r.polylog_column << "\"\n";
      }
    } else if (*c_calibrate) {
      const CalibrationRecord rec =
          calibrate(cb_k, cb_p, cb_nlist, cb_trials, cb_beta, cb_theta0, cb_lambda, cb_seed);
      std::cout.precision(17);
      std::cout << "{\"c_closed\":" << rec.c_closed << ",\"c_mc\":" << rec.c_mc
                << ",\"ratio\":" << rec.ratio << ",\"warn\":" << (rec.warn ? "true" : "false")
                << ",\"cells\":[";
      for (std::size_t i = 0; i < rec.cells.size(); ++i) {
        const auto& c = rec.cells[i];
        if (i) std::cout << ',';
        std::cout << "{\"n\":" << c.n << ",\"ell\":" << c.ell << ",\"trials\":" << c.trials
                  << ",\"mc_rayleigh\":" << c.mc_rayleigh << ",\"predictor\":" << c.predictor
                  << ",\"exact_expected\":" << c.exact_expected << "}";
      }
      std::cout << "]}\n";
      if (rec.warn)
        std::cerr << "warning: Monte Carlo constant differs from the closed form by more than 25%"
                  << " (ratio " << rec.ratio << ")\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
