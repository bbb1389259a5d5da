#pragma once

// Denormal floats slow x86 arithmetic by an order of magnitude and show up in
// late training (tiny gradients, Adam second moments). This guard flushes them
// to zero for its lifetime and restores the previous mode afterwards.

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define SALEVAL_HAVE_MXCSR 1
#endif

namespace saleval {

class FlushDenormals {
 public:
  FlushDenormals() {
#ifdef SALEVAL_HAVE_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);  // FTZ | DAZ
#endif
  }
  ~FlushDenormals() {
#ifdef SALEVAL_HAVE_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace saleval
