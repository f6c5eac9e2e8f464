#pragma once

#include <string>
#include <string_view>

namespace nami {

enum class LinkKind { probit, logit, cloglog };

std::string_view to_string(LinkKind kind);
LinkKind link_from_string(std::string_view name);

/// Result of mapping a shifted transformation value u onto the standard
/// normal scale, z = Phi^-1(G(u)).
struct Latent {
  double z = 0.0;
  /// dz/du; zero when the value was clamped.
  double dz_du = 1.0;
  bool clamped = false;
};

/// The fixed CDF G of a transformation model. All members are tail-accurate:
/// the survivor function is evaluated directly rather than as 1 - G.
class LinkFunction {
 public:
  /// Latent values are clamped here when G(u) is exactly 0 or 1 in floating point.
  static constexpr double kLatentClamp = 8.0;

  constexpr LinkFunction() = default;
  constexpr explicit LinkFunction(LinkKind kind) : kind_(kind) {}

  LinkKind kind() const { return kind_; }

  double cdf(double u) const;
  double survivor(double u) const;
  double quantile(double p) const;
  double density(double u) const;
  double log_density(double u) const;
  /// d/du log g(u).
  double dlog_density(double u) const;

  /// Phi^-1(G(u)) with its derivative.
  Latent latent(double u) const;
  /// log(G(b) - G(a)) for a < b; either bound may be infinite.
  double log_interval(double a, double b) const;

 private:
  LinkKind kind_ = LinkKind::probit;
};

}  // namespace nami
