#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "kikuchi/model.hpp"

#ifndef KIKUCHI_CLI_PATH
#define KIKUCHI_CLI_PATH "kikuchi"
#endif

using namespace kikuchi;

namespace {

int run_cli(const std::string& args, const std::string& stdout_path = "") {
  std::string cmd = std::string(KIKUCHI_CLI_PATH) + " " + args;
  if (!stdout_path.empty()) cmd += " > " + stdout_path + " 2>/dev/null";
  else
    cmd += " >/dev/null 2>&1";
  const int code = std::system(cmd.c_str());
  return WEXITSTATUS(code);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("sample writes a format-conformant reloadable file") {
  const std::string out = "cli_sample_test.hsbm";
  std::remove(out.c_str());
  const int code = run_cli(
      "sample --n 20 --p 4 --k 2 --theta0 0.3 --eps 0.1 --planted --seed 7 --out " + out);
  CHECK(code == 0);
  const std::string text = slurp(out);
  CHECK(text.rfind("hsbm n=20 p=4 k=2 theta0=0.29999999999999999 "
                   "eps=0.10000000000000001 planted=1 seed=7\n",
                   0) == 0);
  const Hypergraph h = load(out);
  CHECK(h.params().n == 20);
  CHECK(h.planted());
  REQUIRE(h.labels());
  // manifest sits next to the artifact
  CHECK(!slurp(out + ".manifest.json").empty());
  CHECK(slurp(out + ".manifest.json").find("\"verb\": \"sample\"") != std::string::npos);

  SUBCASE("round trip: identical store") {
    std::ostringstream os;
    store(h, os);
    CHECK(os.str() == text);
  }
  SUBCASE("same seed reproduces the file byte for byte") {
    const std::string out2 = "cli_sample_test2.hsbm";
    run_cli("sample --n 20 --p 4 --k 2 --theta0 0.3 --eps 0.1 --planted --seed 7 --out " + out2);
    CHECK(slurp(out2) == text);
    std::remove(out2.c_str());
    std::remove((out2 + ".manifest.json").c_str());
  }
  std::remove(out.c_str());
  std::remove((out + ".manifest.json").c_str());
}

TEST_CASE("detect emits json and a verdict line") {
  const std::string in = "cli_detect_test.hsbm";
  run_cli("sample --n 14 --p 4 --k 2 --theta0 0.45 --eps 0.3 --planted --seed 3 --out " + in);
  const std::string outp = "cli_detect_out.txt";
  const int code = run_cli("detect --in " + in + " --ell 4 --seed 1 --mode set", outp);
  CHECK(code == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("\"verdict\":\"") != std::string::npos);
  CHECK(text.find("\"lambda_max\":") != std::string::npos);
  CHECK(text.find("verdict: ") != std::string::npos);
  std::remove(in.c_str());
  std::remove((in + ".manifest.json").c_str());
  std::remove(outp.c_str());
}

TEST_CASE("moments prints both routes") {
  const std::string outp = "cli_moments_out.txt";
  CHECK(run_cli("moments --k 2 --p 4 --theta0 0.3 --eps 0.1", outp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("mu 0.015625") != std::string::npos);
  CHECK(text.find("mu_brute 0.015625") != std::string::npos);
  CHECK(text.find("c_hat 0.0625") != std::string::npos);
  std::remove(outp.c_str());
}

TEST_CASE("lcdf prints the csv table") {
  const std::string outp = "cli_lcdf_out.txt";
  CHECK(run_cli("lcdf --k 2 --p 4 --n 100 --D 1 4", outp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("D,beta_lcdf,n,p,k") != std::string::npos);
  CHECK(text.find(",100,4,2") != std::string::npos);
  std::remove(outp.c_str());
}

TEST_CASE("estimate prints resource rows") {
  const std::string outp = "cli_estimate_out.txt";
  CHECK(run_cli("estimate --p 4 --ell 16 --n-grid 100 10000", outp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("speedup_exponent") != std::string::npos);
  CHECK(text.find("100,16,4,") != std::string::npos);
  std::remove(outp.c_str());
}

TEST_CASE("overlap emits csv rows with stderr column") {
  const std::string outp = "cli_overlap_out.txt";
  CHECK(run_cli("overlap --n 12 --p 4 --k 2 --ell 4 --beta 0.4 --seeds 2", outp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("n,p,k,ell,beta,seed,stat_name,value,stderr") != std::string::npos);
  CHECK(text.find("normalized_overlap") != std::string::npos);
  CHECK(text.find("certificate_rayleigh") != std::string::npos);
  std::remove(outp.c_str());
}

TEST_CASE("qsim runs the split pipeline") {
  const std::string in = "cli_qsim_test.hsbm";
  run_cli("sample --n 12 --p 4 --k 2 --theta0 0.45 --eps 0.4 --planted --seed 11 --out " + in);
  const std::string outp = "cli_qsim_out.txt";
  const int code = run_cli("qsim --in " + in + " --ell 4 --tau 40 --shots 256 --seed 5", outp);
  CHECK(code == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("\"hit_prob_exact\":") != std::string::npos);
  CHECK(text.find("\"verdict\":\"") != std::string::npos);
  std::remove(in.c_str());
  std::remove((in + ".manifest.json").c_str());
  std::remove(outp.c_str());
}

TEST_CASE("sweep runs from a spec file") {
  const std::string specp = "cli_sweep_spec.txt";
  const std::string outp = "cli_sweep_out.csv";
  {
    std::ofstream spec(specp);
    spec << "k=2\np=4\ntheta0=0.45\nn=12\nell=4\nbeta=0.4\ntrials=2\nseed=5\nmode=set\nout="
         << outp << "\n";
  }
  CHECK(run_cli("sweep --spec " + specp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("n,k,p,ell,beta,trials,planted_rate") != std::string::npos);
  CHECK(text.find("12,2,4,4,") != std::string::npos);
  std::remove(specp.c_str());
  std::remove(outp.c_str());
  std::remove((outp + ".manifest.json").c_str());
}

TEST_CASE("calibrate emits the record json") {
  const std::string outp = "cli_calibrate_out.txt";
  CHECK(run_cli("calibrate --k 2 --p 4 --n-list 14 --trials 2 --lambda 1", outp) == 0);
  const std::string text = slurp(outp);
  CHECK(text.find("\"c_closed\":0.0625") != std::string::npos);
  CHECK(text.find("\"c_mc\":") != std::string::npos);
  std::remove(outp.c_str());
}

TEST_CASE("unknown verb exits with usage error") {
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("") != 0);
}

TEST_CASE("runtime failure exits 2") {
  CHECK(run_cli("detect --in does_not_exist.hsbm --ell 4") == 2);
}

TEST_SUITE_END();
