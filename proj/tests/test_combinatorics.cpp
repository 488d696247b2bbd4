#include <doctest.h>

#include <vector>

#include "kikuchi/combinatorics.hpp"
#include "kikuchi/rng.hpp"

using namespace kikuchi;

TEST_SUITE_BEGIN("combinatorics");

TEST_CASE("binomials") {
  CHECK(binomial_u64(12, 4) == 495);
  CHECK(binomial_u64(20, 4) == 4845);
  CHECK(binomial_u64(4, 0) == 1);
  CHECK(binomial_u64(3, 5) == 0);
  CHECK(binomial(30, 4) == doctest::Approx(27405.0));
  CHECK(falling_factorial(16.0, 2) == doctest::Approx(240.0));
  CHECK(factorial(6) == doctest::Approx(720.0));
}

TEST_CASE("subset colex rank round trip") {
  const int n = 14, r = 4;
  std::vector<int> s(r), back(r);
  first_subset_lex(r, s);
  std::uint64_t count = 0;
  do {
    const std::uint64_t rk = subset_rank_colex(s);
    CHECK(rk < binomial_u64(n, r));
    subset_unrank_colex(rk, r, back);
    CHECK(back == s);
    ++count;
  } while (next_subset_lex(n, r, s));
  CHECK(count == binomial_u64(n, r));
}

TEST_CASE("colex rank is a bijection") {
  const int n = 9, r = 3;
  std::vector<char> seen(binomial_u64(n, r), 0);
  std::vector<int> s(r);
  first_subset_lex(r, s);
  do {
    seen[subset_rank_colex(s)] += 1;
  } while (next_subset_lex(n, r, s));
  for (char c : seen) CHECK(c == 1);
}

TEST_CASE("tuple index cardinality and round trip") {
  TupleIndex ti(8, 4);
  CHECK(ti.cardinality() == 8ull * 7 * 6 * 5);
  std::vector<int> t(4), back(4);
  CounterRng rng(42, Stream::sampling);
  for (int trial = 0; trial < 200; ++trial) {
    // random distinct tuple
    std::vector<int> pool{0, 1, 2, 3, 4, 5, 6, 7};
    for (int i = 0; i < 4; ++i) {
      const int j = static_cast<int>(rng.next_int(pool.size()));
      t[i] = pool[j];
      pool.erase(pool.begin() + j);
    }
    const std::uint64_t rk = ti.rank(t);
    CHECK(rk < ti.cardinality());
    ti.unrank(rk, back);
    CHECK(back == t);
  }
}

TEST_CASE("tuple ranks cover the space") {
  TupleIndex ti(5, 3);
  std::vector<char> seen(ti.cardinality(), 0);
  std::vector<int> t(3);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b)
      for (int c = 0; c < 5; ++c) {
        if (a == b || b == c || a == c) continue;
        t = {a, b, c};
        seen[ti.rank(t)] += 1;
      }
  for (char c : seen) CHECK(c == 1);
}

TEST_CASE("counter rng determinism and order independence") {
  CHECK(uniform01(7, Stream::edges, 123) == uniform01(7, Stream::edges, 123));
  CHECK(uniform01(7, Stream::edges, 123) != uniform01(8, Stream::edges, 123));
  CHECK(uniform01(7, Stream::edges, 123) != uniform01(7, Stream::labels, 123));
  // rough uniformity of the low-level hash
  double acc = 0;
  for (int i = 0; i < 20000; ++i) acc += uniform01(11, Stream::edges, i);
  CHECK(acc / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("kahan summation") {
  KahanSum s;
  for (int i = 0; i < 1000000; ++i) s.add(0.1);
  CHECK(s.value() == doctest::Approx(100000.0).epsilon(1e-12));
}

TEST_SUITE_END();
