// Reference kernels. Plain loops, no intrinsics; the baseline every SIMD path is
// checked against.
#include "kernels/kernel_tables.hpp"

namespace xview::kernels::scalar {
namespace {

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void add(std::size_t n, const T* x, const T* y, T* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

template <typename T>
void mul(std::size_t n, const T* x, const T* y, T* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

template <typename T>
void scale(std::size_t n, T a, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          T* c, bool accumulate) {
  gemm_driver<T, axpy<T>, dot<T>>(ta, tb, m, n, k, a, b, c, accumulate);
}

template <typename T>
constexpr KernelTable<T> kTable{axpy<T>, dot<T>, add<T>, mul<T>, scale<T>, gemm<T>};

}  // namespace

template <typename T>
const KernelTable<T>& get() {
  return kTable<T>;
}

template const KernelTable<float>& get<float>();
template const KernelTable<double>& get<double>();

}  // namespace xview::kernels::scalar
