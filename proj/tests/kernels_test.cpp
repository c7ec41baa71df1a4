#include "bookalign/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

using namespace bookalign::kernels;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct RowInputs {
  std::vector<double> prev, prev_m1, tok_lp;
  double blank_lp = 0.0;
};

RowInputs random_row(std::mt19937_64& rng, size_t n, bool with_inf) {
  std::uniform_real_distribution<double> val(-50.0, -1e-3);
  std::bernoulli_distribution inf(0.15);
  RowInputs in;
  in.prev.resize(n);
  in.prev_m1.resize(n);
  in.tok_lp.resize(n);
  for (size_t j = 0; j < n; ++j) {
    in.prev[j] = (with_inf && inf(rng)) ? kNegInf : val(rng);
    in.prev_m1[j] = (with_inf && inf(rng)) ? kNegInf : val(rng);
    in.tok_lp[j] = val(rng);
  }
  in.blank_lp = val(rng);
  return in;
}

}  // namespace

TEST_CASE("scalar trellis row matches the formula") {
  // n = 3, hand-picked values
  const std::vector<double> prev = {-1.0, -2.0, kNegInf};
  const std::vector<double> prev_m1 = {-0.5, -1.0, -2.0};
  const std::vector<double> tok = {-0.3, -0.9, -0.1};
  const double blank = -0.4;
  std::vector<double> out(3);
  std::vector<uint8_t> choice(3);
  scalar_ops().trellis_row(prev.data(), prev_m1.data(), tok.data(), blank, out.data(),
                           choice.data(), 3);
  // j=0: stay = -1 + max(-0.4, -0.3) = -1.3; adv = -0.5 + -0.3 = -0.8 -> advance
  CHECK(out[0] == -0.8);
  CHECK(choice[0] == 1);
  // j=1: stay = -2 + max(-0.4, -0.9) = -2.4; adv = -1 + -0.9 = -1.9 -> advance
  CHECK(out[1] == doctest::Approx(-1.9));
  CHECK(choice[1] == 1);
  // j=2: stay = -inf; adv = -2 + -0.1 = -2.1 -> advance
  CHECK(out[2] == doctest::Approx(-2.1));
  CHECK(choice[2] == 1);
}

TEST_CASE("scalar trellis row prefers advance on exact ties") {
  const std::vector<double> prev = {-1.0};
  const std::vector<double> prev_m1 = {-1.0};
  const std::vector<double> tok = {-0.5};
  const double blank = -0.5;  // stay = -1.5 = adv
  std::vector<double> out(1);
  std::vector<uint8_t> choice(1);
  scalar_ops().trellis_row(prev.data(), prev_m1.data(), tok.data(), blank, out.data(),
                           choice.data(), 1);
  CHECK(out[0] == -1.5);
  CHECK(choice[0] == 1);
}

TEST_CASE("avx2 trellis row is bit-identical to scalar") {
  const Ops* avx2 = avx2_ops();
  if (!avx2) {
    MESSAGE("AVX2 unavailable on this machine; skipping");
    return;
  }
  std::mt19937_64 rng(7);
  for (const size_t n : {size_t{0}, size_t{1}, size_t{3}, size_t{4}, size_t{5},
                         size_t{8}, size_t{17}, size_t{64}, size_t{101}}) {
    for (int rep = 0; rep < 20; ++rep) {
      const RowInputs in = random_row(rng, n, rep % 2 == 1);
      std::vector<double> out_s(n, 42.0), out_v(n, -42.0);
      std::vector<uint8_t> ch_s(n, 9), ch_v(n, 8);
      scalar_ops().trellis_row(in.prev.data(), in.prev_m1.data(), in.tok_lp.data(),
                               in.blank_lp, out_s.data(), ch_s.data(), n);
      avx2->trellis_row(in.prev.data(), in.prev_m1.data(), in.tok_lp.data(),
                        in.blank_lp, out_v.data(), ch_v.data(), n);
      for (size_t j = 0; j < n; ++j) {
        // bit-level compare; NaN never occurs with these inputs
        CHECK(std::memcmp(&out_s[j], &out_v[j], sizeof(double)) == 0);
        CHECK(ch_s[j] == ch_v[j]);
      }
    }
  }
}

TEST_CASE("avx2 trellis row ties are bit-identical to scalar") {
  const Ops* avx2 = avx2_ops();
  if (!avx2) return;
  // blank == token and stay == adv in every lane, across the SIMD width
  const size_t n = 9;
  std::vector<double> prev(n, -2.0), prev_m1(n, -2.0), tok(n, -0.25);
  std::vector<double> out_s(n), out_v(n);
  std::vector<uint8_t> ch_s(n), ch_v(n);
  scalar_ops().trellis_row(prev.data(), prev_m1.data(), tok.data(), -0.25, out_s.data(),
                           ch_s.data(), n);
  avx2->trellis_row(prev.data(), prev_m1.data(), tok.data(), -0.25, out_v.data(),
                    ch_v.data(), n);
  for (size_t j = 0; j < n; ++j) {
    CHECK(out_s[j] == out_v[j]);
    CHECK(ch_s[j] == 1);
    CHECK(ch_v[j] == 1);
  }
}

TEST_CASE("scalar sum of squares matches a plain loop") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  std::vector<float> x(1000);
  for (auto& v : x) v = val(rng);
  double expect = 0.0;
  for (float v : x) expect += static_cast<double>(v) * v;
  CHECK(scalar_ops().sum_squares(x.data(), x.size()) == expect);
  CHECK(scalar_ops().sum_squares(x.data(), 0) == 0.0);
}

TEST_CASE("avx2 sum of squares agrees with scalar within accumulation tolerance") {
  const Ops* avx2 = avx2_ops();
  if (!avx2) {
    MESSAGE("AVX2 unavailable on this machine; skipping");
    return;
  }
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  for (const size_t n : {size_t{0}, size_t{1}, size_t{7}, size_t{8}, size_t{9},
                         size_t{1023}, size_t{4096}}) {
    std::vector<float> x(n);
    for (auto& v : x) v = val(rng);
    const double a = scalar_ops().sum_squares(x.data(), n);
    const double b = avx2->sum_squares(x.data(), n);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("active ops resolve to a known variant") {
  const Ops& ops = active_ops();
  const bool known = std::string(ops.name) == "scalar" || std::string(ops.name) == "avx2";
  CHECK(known);
  if (avx2_ops()) {
    // without an override, the best available variant wins unless the
    // environment pinned scalar before the first call resolved
    const char* env = std::getenv("BOOKALIGN_KERNELS");
    if (!env) CHECK(std::string(ops.name) == "avx2");
  }
}
