#pragma once

#include "xview/kernels.hpp"

namespace xview::kernels {

namespace scalar {
template <typename T>
const KernelTable<T>& get();
}

#ifdef XVIEW_HAVE_AVX2_TU
namespace avx2 {
template <typename T>
const KernelTable<T>& get();
}
#endif

// Shared gemm driver: row-panel loops expressed in terms of the ISA's axpy and
// dot so both paths accumulate in the same element order.
template <typename T, auto Axpy, auto Dot>
void gemm_driver(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
                 const T* b, T* c, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = T(0);
  }
  if (tb == Trans::kYes) {
    // C[i,j] += sum_p opA[i,p] * B[j,p]
    if (ta == Trans::kNo) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] += Dot(k, a + i * k, b + j * k);
    } else {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          T acc = T(0);
          for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
          c[i * n + j] += acc;
        }
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = (ta == Trans::kNo) ? a[i * k + p] : a[p * m + i];
      if (aip == T(0)) continue;
      Axpy(n, aip, b + p * n, crow);
    }
  }
}

}  // namespace xview::kernels
