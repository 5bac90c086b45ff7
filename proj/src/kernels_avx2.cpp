// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after the
// runtime CPU check in kernels.cpp. Do not include standard library headers
// here: inline functions instantiated in this unit would carry AVX2 code into
// the rest of the program.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace hhmm::kernels::detail::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

constexpr double kNegInf = -__builtin_inf();
constexpr double kPosInf = __builtin_inf();

// Cephes-style exp: x = n ln2 + r, |r| <= ln2/2, exp(r) from a (2,3) Pade
// form, then scaled by 2^n assembled directly in the exponent field.
inline __m256d exp4(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.3964185322641);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d overflow = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, r);

  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009E0));

  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // n + 1023 + 2^52 puts the biased exponent in the low mantissa bits.
  const __m256d biased = _mm256_add_pd(n, _mm256_set1_pd(1023.0 + 4503599627370496.0));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_castpd_si256(biased), 52));
  __m256d result = _mm256_mul_pd(e, scale);

  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), underflow);
  result = _mm256_blendv_pd(result, _mm256_set1_pd(kPosInf), overflow);
  return result;
}

inline __m256d load_tail(const double* v, std::size_t count, double pad) {
  alignas(32) double buf[4] = {pad, pad, pad, pad};
  for (std::size_t i = 0; i < count; ++i) buf[i] = v[i];
  return _mm256_load_pd(buf);
}

}  // namespace

double max_value(const double* v, std::size_t n) {
  __m256d acc = _mm256_set1_pd(kNegInf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(v + i));
  if (i < n) acc = _mm256_max_pd(acc, load_tail(v + i, n - i, kNegInf));
  return hmax(acc);
}

std::size_t argmax(const double* v, std::size_t n) {
  if (n == 0) return 0;
  const double best = max_value(v, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == best) return i;
  }
  return 0;
}

double sum_exp_shifted(const double* v, std::size_t n, double shift) {
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(_mm256_loadu_pd(v + i), s)));
  if (i < n) acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(load_tail(v + i, n - i, kNegInf), s)));
  return hsum(acc);
}

void exp_shifted(const double* v, std::size_t n, double shift, double* out) {
  const __m256d s = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_sub_pd(_mm256_loadu_pd(v + i), s)));
  if (i < n) {
    alignas(32) double buf[4];
    _mm256_store_pd(buf, exp4(_mm256_sub_pd(load_tail(v + i, n - i, kNegInf), s)));
    for (std::size_t k = 0; i + k < n; ++k) out[i + k] = buf[k];
  }
}

void add(const double* a, const double* b, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double sum = hsum(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, std::size_t n, double* y) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double weighted_sq_dist(const double* x, const double* m, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(m + i));
    acc = _mm256_fmadd_pd(_mm256_mul_pd(d, _mm256_loadu_pd(w + i)), d, acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - m[i];
    sum += w[i] * d * d;
  }
  return sum;
}

}  // namespace hhmm::kernels::detail::avx2
