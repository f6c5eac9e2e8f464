#include "nami/numeric.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

namespace nami {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  if (p < 0.5) return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
  return kSqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
}

double log_normal_interval(double a, double b) {
  if (!(a < b)) return -kInf;
  // Work in the lower tail: Phi(b) - Phi(a) == Phi(-a) - Phi(-b).
  if (a > 0.0) {
    const double na = -b;
    b = -a;
    a = na;
  }
  const double pb = normal_cdf(b);
  const double pa = normal_cdf(a);
  if (pb > 0.0 && pa / pb < 0.5) return std::log(pb) + std::log1p(-pa / pb);
  if (pb - pa > 0.0) return std::log(pb - pa);
  // Both bounds far in the lower tail: Mills-ratio asymptotics.
  const double lb = log_normal_pdf(b) - std::log(-b);
  const double la = log_normal_pdf(a) - std::log(-a);
  return lb + std::log1p(-std::exp(la - lb));
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_inv(double x) {
  if (x <= 0.0) return -kInf;
  if (x > 30.0) return x;
  return std::log(std::expm1(x));
}

double softplus_deriv(double x) { return expit(x); }

double logit(double p) { return std::log(p) - std::log1p(-p); }

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace nami
