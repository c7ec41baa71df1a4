#include "bookalign/kernels/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

namespace bookalign::kernels {

namespace {

double sum_squares_scalar(const float* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * x[i];
  return acc;
}

void trellis_row_scalar(const double* prev, const double* prev_m1, const double* tok_lp,
                        double blank_lp, double* out, uint8_t* choice, size_t n) {
  for (size_t j = 0; j < n; ++j) {
    const double stay = prev[j] + std::max(blank_lp, tok_lp[j]);
    const double adv = prev_m1[j] + tok_lp[j];
    const bool take_adv = adv >= stay;
    out[j] = take_adv ? adv : stay;
    choice[j] = take_adv ? 1 : 0;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar", &sum_squares_scalar, &trellis_row_scalar};
  return ops;
}

#if defined(__x86_64__)
const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp
#endif

const Ops* avx2_ops() {
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_ops_impl();
#endif
  return nullptr;
}

const Ops& active_ops() {
  static const Ops* chosen = [] {
    if (const char* env = std::getenv("BOOKALIGN_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
      if (std::strcmp(env, "avx2") == 0 && avx2_ops()) return avx2_ops();
    }
    if (const Ops* v = avx2_ops()) return v;
    return &scalar_ops();
  }();
  return *chosen;
}

}  // namespace bookalign::kernels
