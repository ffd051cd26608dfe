#pragma once

#if defined(__SSE2__)
#include <immintrin.h>
#endif

namespace bevcast::detail {

// Sets flush-to-zero and denormals-are-zero on the calling thread for the
// guard's lifetime. Subnormal activations and optimizer moments otherwise
// slow the vector units by an order of magnitude late in training.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }
#else
  FlushDenormals() = default;
#endif
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
#if defined(__SSE2__)
  unsigned saved_;
#endif
};

}  // namespace bevcast::detail
