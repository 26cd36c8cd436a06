#include "efex/kernels.hpp"

#include <cstdlib>
#include <string>

namespace efex::simd {

#if defined(EFEX_HAVE_AVX2_KERNELS)
const KernelTable& avx2_kernels();
#endif
#if defined(EFEX_HAVE_NEON_KERNELS)
const KernelTable& neon_kernels();
#endif

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &scalar_kernels();
    case Isa::avx2:
#if defined(EFEX_HAVE_AVX2_KERNELS)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_kernels();
#endif
      return nullptr;
    case Isa::neon:
#if defined(EFEX_HAVE_NEON_KERNELS)
      return &neon_kernels();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("EFEX_SIMD"); forced != nullptr) {
    if (std::string(forced) == "scalar") return scalar_kernels();
  }
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelTable* t = kernels_for(isa)) return *t;
  }
  return scalar_kernels();
}

}  // namespace

const KernelTable& kernels() {
  static const KernelTable& table = select();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

}  // namespace efex::simd
