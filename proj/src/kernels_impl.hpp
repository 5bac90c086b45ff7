#pragma once

// Internal: raw kernel entry points for each ISA. Kept free of standard
// library includes so the AVX2 translation unit stays isolated.

#include <cstddef>

namespace hhmm::kernels::detail {

#define HHMM_DECLARE_KERNELS(ns)                                                          \
  namespace ns {                                                                          \
  double max_value(const double* v, std::size_t n);                                       \
  std::size_t argmax(const double* v, std::size_t n);                                     \
  double sum_exp_shifted(const double* v, std::size_t n, double shift);                   \
  void exp_shifted(const double* v, std::size_t n, double shift, double* out);            \
  void add(const double* a, const double* b, std::size_t n, double* out);                 \
  double dot(const double* a, const double* b, std::size_t n);                            \
  void axpy(double alpha, const double* x, std::size_t n, double* y);                     \
  double weighted_sq_dist(const double* x, const double* m, const double* w, std::size_t n); \
  }

HHMM_DECLARE_KERNELS(scalar)
HHMM_DECLARE_KERNELS(avx2)

#undef HHMM_DECLARE_KERNELS

}  // namespace hhmm::kernels::detail
