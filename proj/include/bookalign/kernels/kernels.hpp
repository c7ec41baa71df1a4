#pragma once

#include <cstddef>
#include <cstdint>

namespace bookalign::kernels {

/// One trellis-row update step, vectorizable over j:
///   stay[j] = prev[j]    + max(blank_lp, tok_lp[j])
///   adv[j]  = prev_m1[j] + tok_lp[j]
///   out[j]  = max(stay[j], adv[j]);  choice[j] = (adv[j] >= stay[j])
/// prev_m1 is prev shifted left by one (caller provides valid memory).
using TrellisRowFn = void (*)(const double* prev, const double* prev_m1,
                              const double* tok_lp, double blank_lp, double* out,
                              uint8_t* choice, size_t n);

/// Sum of squares of n floats, accumulated in double.
using SumSquaresFn = double (*)(const float* x, size_t n);

struct Ops {
  const char* name;
  SumSquaresFn sum_squares;
  TrellisRowFn trellis_row;
};

/// Portable reference implementations.
const Ops& scalar_ops();

/// AVX2 implementations, or nullptr when unavailable on this CPU/build.
const Ops* avx2_ops();

/// Best variant for this machine, resolved once.
/// BOOKALIGN_KERNELS=scalar|avx2 in the environment overrides the choice.
const Ops& active_ops();

}  // namespace bookalign::kernels
