#pragma once
// Dense arithmetic kernels with a scalar reference path and an AVX2/FMA path.
//
// The active instruction set is chosen once, at first use, from CPUID and the
// XVIEW_ISA environment variable ("scalar" or "avx2"). Every kernel has a
// fixed reduction order for a given ISA, so results are bit-reproducible run to
// run; the two ISAs agree to rounding (FMA contraction differs).

#include <cstddef>
#include <string_view>

namespace xview::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();
// Not thread-safe; meant for tests and benchmarks that compare code paths.
void set_active_isa(Isa isa);

enum class Trans { kNo, kYes };

// Per-type function table. One instance exists per (ISA, scalar type).
template <typename T>
struct KernelTable {
  // y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // z = x + y, z = x * y (z may alias x or y)
  void (*add)(std::size_t n, const T* x, const T* y, T* z);
  void (*mul)(std::size_t n, const T* x, const T* y, T* z);
  void (*scale)(std::size_t n, T a, T* x);
  // Row-major C[m x n] (+)= op(A)[m x k] * op(B)[k x n]. With trans_a, A is
  // stored k x m; with trans_b, B is stored n x k.
  void (*gemm)(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, const T* b, T* c, bool accumulate);
};

template <typename T>
const KernelTable<T>& table(Isa isa);

template <typename T>
const KernelTable<T>& active() {
  return table<T>(active_isa());
}

template <typename T>
inline void axpy(std::size_t n, T a, const T* x, T* y) { active<T>().axpy(n, a, x, y); }
template <typename T>
inline T dot(std::size_t n, const T* x, const T* y) { return active<T>().dot(n, x, y); }
template <typename T>
inline void add(std::size_t n, const T* x, const T* y, T* z) { active<T>().add(n, x, y, z); }
template <typename T>
inline void mul(std::size_t n, const T* x, const T* y, T* z) { active<T>().mul(n, x, y, z); }
template <typename T>
inline void scale(std::size_t n, T a, T* x) { active<T>().scale(n, a, x); }
template <typename T>
inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
                 const T* b, T* c, bool accumulate) {
  active<T>().gemm(ta, tb, m, n, k, a, b, c, accumulate);
}

}  // namespace xview::kernels
