#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace nami {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal helpers. The quantile is accurate in both tails.
double normal_cdf(double z);
double normal_pdf(double z);
double log_normal_pdf(double z);
double normal_quantile(double p);
/// log(Phi(b) - Phi(a)) for a < b, evaluated on whichever tail is more accurate.
double log_normal_interval(double a, double b);

double softplus(double x);
/// Inverse of softplus; -inf for x == 0.
double softplus_inv(double x);
/// d softplus / dx (the logistic function).
double softplus_deriv(double x);

double logit(double p);
double expit(double x);

/// Compensated (Neumaier) summation; result is independent of nothing but order.
double compensated_sum(std::span<const double> values);

/// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nami
