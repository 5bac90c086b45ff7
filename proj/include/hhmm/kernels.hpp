#pragma once

// Vector kernels behind every hot inner loop of the library (log-sum-exp
// reductions, pairwise posteriors, Gaussian quadratic forms, statistic
// accumulation). Each kernel has a scalar reference implementation and, on
// x86-64, an AVX2/FMA variant. The active table is picked once at startup
// from CPU features and can be pinned for testing.
//
// Variants agree to a few ulps, not bit-for-bit: lane-wise summation order and
// the vector exp differ from their scalar counterparts.

#include <cstddef>
#include <span>
#include <string_view>

namespace hhmm::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // max over n values; -inf for n == 0
  double (*max_value)(const double* v, std::size_t n);
  // first index of the maximum (lowest index wins ties); 0 for n == 0
  std::size_t (*argmax)(const double* v, std::size_t n);
  // sum_i exp(v[i] - shift)
  double (*sum_exp_shifted)(const double* v, std::size_t n, double shift);
  // out[i] = exp(v[i] - shift)
  void (*exp_shifted)(const double* v, std::size_t n, double shift, double* out);
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, std::size_t n, double* out);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, std::size_t n, double* y);
  // sum_i w[i] * (x[i] - m[i])^2
  double (*weighted_sq_dist)(const double* x, const double* m, const double* w, std::size_t n);
};

const KernelTable& scalar_table();

/// Null when the library was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

/// Widest ISA that is both compiled in and supported by this CPU.
Isa best_available();

/// The table every library routine dispatches through.
const KernelTable& active();

/// Pin the active table. Throws InputError if the ISA is unavailable.
void select(Isa isa);

// Span conveniences over the active table.
inline double max_value(std::span<const double> v) { return active().max_value(v.data(), v.size()); }
inline std::size_t argmax(std::span<const double> v) { return active().argmax(v.data(), v.size()); }
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), x.size(), y.data());
}

}  // namespace hhmm::kernels
