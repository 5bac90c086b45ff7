#include "hhmm/kernels.hpp"

#include <atomic>
#include <string>

#include "hhmm/error.hpp"
#include "kernels_impl.hpp"

namespace hhmm::kernels {
namespace {

#define HHMM_TABLE(ns, tag)                                                                     \
  KernelTable {                                                                               \
    tag, detail::ns::max_value, detail::ns::argmax, detail::ns::sum_exp_shifted,              \
        detail::ns::exp_shifted, detail::ns::add, detail::ns::dot, detail::ns::axpy,          \
        detail::ns::weighted_sq_dist                                                          \
  }

const KernelTable kScalar = HHMM_TABLE(scalar, Isa::Scalar);
#ifdef HHMM_HAVE_AVX2
const KernelTable kAvx2 = HHMM_TABLE(avx2, Isa::Avx2);
#endif

#undef HHMM_TABLE

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &kScalar;
    case Isa::Avx2:
      return avx2_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{table_for(best_available())};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#ifdef HHMM_HAVE_AVX2
  return &kAvx2;
#else
  return nullptr;
#endif
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#ifdef HHMM_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_available() { return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (!cpu_supports(isa)) {
    throw InputError("kernel ISA '" + std::string(isa_name(isa)) + "' is not available on this CPU");
  }
  current().store(table_for(isa), std::memory_order_relaxed);
}

}  // namespace hhmm::kernels
