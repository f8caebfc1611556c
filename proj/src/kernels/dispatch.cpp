#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels/kernel_tables.hpp"

namespace xview::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(XVIEW_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  const bool has_avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("XVIEW_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && has_avx2) return Isa::kAvx2;
  }
  return has_avx2 ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::kScalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) isa = Isa::kScalar;
  current().store(isa, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& table(Isa isa) {
#ifdef XVIEW_HAVE_AVX2_TU
  if (isa == Isa::kAvx2) return avx2::get<T>();
#endif
  (void)isa;
  return scalar::get<T>();
}

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);

}  // namespace xview::kernels
