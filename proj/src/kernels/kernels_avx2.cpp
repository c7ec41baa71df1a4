// AVX2 kernel variants. This translation unit is compiled with -mavx2 -mfma;
// callers reach it only through the runtime dispatch in kernels.cpp.

#if defined(__x86_64__)

#include <immintrin.h>

#include <algorithm>

#include "bookalign/kernels/kernels.hpp"

namespace bookalign::kernels {

namespace {

double sum_squares_avx2(const float* x, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
    acc0 = _mm256_fmadd_pd(lo, lo, acc0);
    acc1 = _mm256_fmadd_pd(hi, hi, acc1);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d sum2 = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  double acc_s = _mm_cvtsd_f64(_mm_add_sd(sum2, _mm_unpackhi_pd(sum2, sum2)));
  for (; i < n; ++i) acc_s += static_cast<double>(x[i]) * x[i];
  return acc_s;
}

// Same per-element operation order as the scalar reference (add then max, no
// FMA), so the outputs are bit-identical to it.
void trellis_row_avx2(const double* prev, const double* prev_m1, const double* tok_lp,
                      double blank_lp, double* out, uint8_t* choice, size_t n) {
  const __m256d blank = _mm256_set1_pd(blank_lp);
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d tok = _mm256_loadu_pd(tok_lp + j);
    const __m256d stay =
        _mm256_add_pd(_mm256_loadu_pd(prev + j), _mm256_max_pd(blank, tok));
    const __m256d adv = _mm256_add_pd(_mm256_loadu_pd(prev_m1 + j), tok);
    const __m256d ge = _mm256_cmp_pd(adv, stay, _CMP_GE_OQ);
    _mm256_storeu_pd(out + j, _mm256_blendv_pd(stay, adv, ge));
    const int mask = _mm256_movemask_pd(ge);
    choice[j + 0] = static_cast<uint8_t>(mask & 1);
    choice[j + 1] = static_cast<uint8_t>((mask >> 1) & 1);
    choice[j + 2] = static_cast<uint8_t>((mask >> 2) & 1);
    choice[j + 3] = static_cast<uint8_t>((mask >> 3) & 1);
  }
  for (; j < n; ++j) {
    const double stay = prev[j] + std::max(blank_lp, tok_lp[j]);
    const double adv = prev_m1[j] + tok_lp[j];
    const bool take_adv = adv >= stay;
    out[j] = take_adv ? adv : stay;
    choice[j] = take_adv ? 1 : 0;
  }
}

}  // namespace

const Ops* avx2_ops_impl() {
  static const Ops ops{"avx2", &sum_squares_avx2, &trellis_row_avx2};
  return &ops;
}

}  // namespace bookalign::kernels

#endif  // __x86_64__
