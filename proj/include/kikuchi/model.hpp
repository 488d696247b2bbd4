#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kikuchi/bias.hpp"
#include "kikuchi/combinatorics.hpp"
#include "kikuchi/rng.hpp"

namespace kikuchi {

struct RegimeFlags {
  bool beta_below_computational = false; // beta <~ n^{-p/4}
  bool beta_above_statistical = false;   // beta >~ n^{1/2 - p/2}
  bool theta0_dense_enough = false;      // theta0 >~ n^{1-p}
  bool ell_small_enough = false;         // ell = o(sqrt n), checked as ell <= sqrt(n)
};

struct ModelParams {
  int n = 0;
  int k = 2;
  int p = 4;
  double theta0 = 0.3;
  double eps = 0.1;

  ModelParams() = default;
  // moments-only paths may legitimately use odd p; detection paths reject it
  ModelParams(int n_, int k_, int p_, double theta0_, double eps_, bool allow_odd_p = false)
      : n(n_), k(k_), p(p_), theta0(theta0_), eps(eps_) {
    if (n < p) throw std::invalid_argument("ModelParams: n >= p required");
    if (k < 2) throw std::invalid_argument("ModelParams: k >= 2 required");
    if (p < 2) throw std::invalid_argument("ModelParams: p >= 2 required");
    if (!allow_odd_p && p % 2 != 0)
      throw std::invalid_argument("ModelParams: odd p is not supported on detection paths");
    if (!(theta0 > 0.0 && theta0 < 0.5))
      throw std::invalid_argument("ModelParams: 0 < theta0 < 1/2 required");
    if (!(eps >= 0.0 && eps < theta0))
      throw std::invalid_argument("ModelParams: 0 <= eps < theta0 required");
  }

  double beta() const { return eps / std::sqrt(theta0 * (1.0 - theta0)); }

  // Asymptotic regime conditions are recorded, never enforced: desk-scale n
  // violates the o(sqrt n)-type conditions by construction.
  RegimeFlags regime_flags(int ell) const {
    RegimeFlags f;
    const double b = beta();
    f.beta_below_computational = b <= std::pow(static_cast<double>(n), -0.25 * p);
    f.beta_above_statistical = b >= std::pow(static_cast<double>(n), 0.5 - 0.5 * p);
    f.theta0_dense_enough = theta0 >= std::pow(static_cast<double>(n), 1.0 - p);
    f.ell_small_enough = ell <= static_cast<int>(std::sqrt(static_cast<double>(n)));
    return f;
  }
};

struct Labels {
  std::vector<int> x; // entries in [0, k)
};

// Observed instance: indicator Y_S over all p-subsets, stored as a bitmap
// indexed by colex subset rank. theta0 is constant, so instances are dense
// in edges and the bitmap is the right representation.
class Hypergraph {
 public:
  Hypergraph(ModelParams params, bool planted, std::uint64_t seed)
      : params_(params), planted_(planted), seed_(seed) {
    edge_count_cap_ = binomial_u64(params_.n, params_.p);
    if (edge_count_cap_ == std::numeric_limits<std::uint64_t>::max() ||
        edge_count_cap_ > (1ull << 27))
      throw std::invalid_argument("Hypergraph: C(n,p) too large for dense storage");
    bits_.assign(static_cast<std::size_t>((edge_count_cap_ + 63) / 64), 0ull);
  }

  const ModelParams& params() const { return params_; }
  bool planted() const { return planted_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t num_subsets() const { return edge_count_cap_; }

  const std::optional<Labels>& labels() const { return labels_; }
  void set_labels(Labels l) {
    if (static_cast<int>(l.x.size()) != params_.n)
      throw std::invalid_argument("labels: wrong length");
    for (int v : l.x)
      if (v < 0 || v >= params_.k) throw std::invalid_argument("labels: entry out of range");
    labels_ = std::move(l);
  }

  void set_edge(std::uint64_t rank, bool present) {
    if (rank >= edge_count_cap_) throw std::out_of_range("edge rank");
    const std::uint64_t mask = 1ull << (rank & 63);
    if (present)
      bits_[static_cast<std::size_t>(rank >> 6)] |= mask;
    else
      bits_[static_cast<std::size_t>(rank >> 6)] &= ~mask;
  }

  bool has_edge(std::uint64_t rank) const {
    return (bits_[static_cast<std::size_t>(rank >> 6)] >> (rank & 63)) & 1ull;
  }

  bool has_edge(std::span<const int> sorted_subset) const {
    return has_edge(subset_rank_colex(sorted_subset));
  }

  std::uint64_t edge_count() const {
    std::uint64_t c = 0;
    for (std::uint64_t w : bits_) c += static_cast<std::uint64_t>(__builtin_popcountll(w));
    return c;
  }

  // A_S = (Y_S - theta0) / sqrt(theta0 (1 - theta0)); defined for every
  // p-subset, present or absent.
  double edge_value(std::uint64_t rank) const {
    const double sd = std::sqrt(params_.theta0 * (1.0 - params_.theta0));
    return has_edge(rank) ? (1.0 - params_.theta0) / sd : -params_.theta0 / sd;
  }

  double edge_value(std::span<const int> sorted_subset) const {
    if (static_cast<int>(sorted_subset.size()) != params_.p)
      throw std::invalid_argument("edge_value: subset size != p");
    for (std::size_t i = 0; i + 1 < sorted_subset.size(); ++i)
      if (sorted_subset[i] >= sorted_subset[i + 1])
        throw std::invalid_argument("edge_value: subset must be sorted and distinct");
    if (sorted_subset.front() < 0 || sorted_subset.back() >= params_.n)
      throw std::invalid_argument("edge_value: vertex out of range");
    return edge_value(subset_rank_colex(sorted_subset));
  }

  double value_present() const {
    return (1.0 - params_.theta0) / std::sqrt(params_.theta0 * (1.0 - params_.theta0));
  }
  double value_absent() const {
    return -params_.theta0 / std::sqrt(params_.theta0 * (1.0 - params_.theta0));
  }

 private:
  ModelParams params_;
  bool planted_;
  std::uint64_t seed_;
  std::uint64_t edge_count_cap_;
  std::vector<std::uint64_t> bits_;
  std::optional<Labels> labels_;
};

// Under null each S is present with probability theta0; under planted with
// probability theta0 + eps f(x_S). Per-edge substreams keyed by subset rank
// make the sample independent of enumeration order.
inline Hypergraph sample(const ModelParams& params, const BiasFunction& f, bool planted,
                         std::uint64_t seed, bool keep_labels = true) {
  if (f.k() != params.k || f.p() != params.p)
    throw std::invalid_argument("sample: bias function shape mismatch");
  if (params.theta0 + params.eps * f.max_abs() >= 1.0 ||
      params.theta0 - params.eps * f.max_abs() <= 0.0)
    throw std::invalid_argument("sample: theta0 + eps*f leaves (0,1)");

  Hypergraph h(params, planted, seed);
  Labels labels;
  if (planted) {
    labels.x.resize(params.n);
    for (int i = 0; i < params.n; ++i)
      labels.x[i] =
          static_cast<int>(uniform_int(seed, Stream::labels, static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(params.k)));
  }

  std::vector<int> subset(params.p);
  first_subset_lex(params.p, subset);
  std::vector<int> occ(params.k);
  do {
    const std::uint64_t rank = subset_rank_colex(subset);
    double prob = params.theta0;
    if (planted && params.eps != 0.0) {
      std::fill(occ.begin(), occ.end(), 0);
      for (int v : subset) occ[labels.x[v]] += 1;
      prob += params.eps * f.at_occupancy(occ);
    }
    if (uniform01(seed, Stream::edges, rank) < prob) h.set_edge(rank, true);
  } while (next_subset_lex(params.n, params.p, subset));

  if (planted && keep_labels) h.set_labels(std::move(labels));
  return h;
}

// --- text format -----------------------------------------------------------
//
// line 1:  hsbm n=<int> p=<int> k=<int> theta0=<dec> eps=<dec> planted=<0|1> seed=<u64>
// line 2:  labels <x_1> ... <x_n>          (optional; 1-based community ids)
// then one line per present edge: p sorted 1-based vertex ids, single spaces,
// edges in lexicographic order, LF endings, decimals with 17 significant digits.

inline std::string format_decimal17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline void store(const Hypergraph& h, std::ostream& os) {
  const auto& pr = h.params();
  os << "hsbm n=" << pr.n << " p=" << pr.p << " k=" << pr.k
     << " theta0=" << format_decimal17(pr.theta0) << " eps=" << format_decimal17(pr.eps)
     << " planted=" << (h.planted() ? 1 : 0) << " seed=" << h.seed() << "\n";
  if (h.labels()) {
    os << "labels";
    for (int v : h.labels()->x) os << ' ' << (v + 1);
    os << "\n";
  }
  std::vector<int> subset(pr.p);
  first_subset_lex(pr.p, subset);
  do {
    if (h.has_edge(subset_rank_colex(subset))) {
      for (int i = 0; i < pr.p; ++i) {
        if (i) os << ' ';
        os << subset[i] + 1;
      }
      os << "\n";
    }
  } while (next_subset_lex(pr.n, pr.p, subset));
}

inline void store(const Hypergraph& h, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("store: cannot open " + path);
  store(h, os);
}

inline Hypergraph load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load: empty input");
  std::istringstream hs(line);
  std::string tag;
  hs >> tag;
  if (tag != "hsbm") throw std::runtime_error("load: bad header tag");
  int n = 0, p = 0, k = 0, planted = 0;
  double theta0 = 0, eps = 0;
  std::uint64_t seed = 0;
  std::string kv;
  while (hs >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("load: bad header field " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "n") n = std::stoi(val);
    else if (key == "p") p = std::stoi(val);
    else if (key == "k") k = std::stoi(val);
    else if (key == "theta0") theta0 = std::stod(val);
    else if (key == "eps") eps = std::stod(val);
    else if (key == "planted") planted = std::stoi(val);
    else if (key == "seed") seed = std::stoull(val);
    else throw std::runtime_error("load: unknown header key " + key);
  }
  ModelParams params(n, k, p, theta0, eps, /*allow_odd_p=*/true);
  Hypergraph h(params, planted != 0, seed);

  std::vector<int> subset(p);
  bool labels_done = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (!labels_done && line.rfind("labels", 0) == 0) {
      std::string word;
      ls >> word;
      Labels lab;
      lab.x.resize(n);
      for (int i = 0; i < n; ++i) {
        int v;
        if (!(ls >> v)) throw std::runtime_error("load: short labels line");
        lab.x[i] = v - 1;
      }
      h.set_labels(std::move(lab));
      labels_done = true;
      continue;
    }
    labels_done = true;
    for (int i = 0; i < p; ++i) {
      int v;
      if (!(ls >> v)) throw std::runtime_error("load: short edge line");
      subset[i] = v - 1;
    }
    for (int i = 0; i + 1 < p; ++i)
      if (subset[i] >= subset[i + 1]) throw std::runtime_error("load: edge not sorted");
    if (subset.front() < 0 || subset.back() >= n)
      throw std::runtime_error("load: vertex out of range");
    h.set_edge(subset_rank_colex(subset), true);
  }
  return h;
}

inline Hypergraph load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load: cannot open " + path);
  return load(is);
}

} // namespace kikuchi
