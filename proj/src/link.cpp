#include "nami/link.hpp"

#include <cmath>

#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::probit:
      return "probit";
    case LinkKind::logit:
      return "logit";
    case LinkKind::cloglog:
      return "cloglog";
  }
  return "?";
}

LinkKind link_from_string(std::string_view name) {
  if (name == "probit") return LinkKind::probit;
  if (name == "logit") return LinkKind::logit;
  if (name == "cloglog") return LinkKind::cloglog;
  throw ConfigError("unknown link '" + std::string(name) + "' (expected probit, logit or cloglog)");
}

double LinkFunction::cdf(double u) const {
  switch (kind_) {
    case LinkKind::probit:
      return normal_cdf(u);
    case LinkKind::logit:
      return expit(u);
    case LinkKind::cloglog:
      return -std::expm1(-std::exp(u));
  }
  return 0.0;
}

double LinkFunction::survivor(double u) const {
  switch (kind_) {
    case LinkKind::probit:
      return normal_cdf(-u);
    case LinkKind::logit:
      return expit(-u);
    case LinkKind::cloglog:
      return std::exp(-std::exp(u));
  }
  return 0.0;
}

double LinkFunction::quantile(double p) const {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  switch (kind_) {
    case LinkKind::probit:
      return normal_quantile(p);
    case LinkKind::logit:
      return logit(p);
    case LinkKind::cloglog:
      return std::log(-std::log1p(-p));
  }
  return 0.0;
}

double LinkFunction::density(double u) const { return std::exp(log_density(u)); }

double LinkFunction::log_density(double u) const {
  switch (kind_) {
    case LinkKind::probit:
      return log_normal_pdf(u);
    case LinkKind::logit:
      // log g = -|u| - 2 log(1 + e^{-|u|})
      return -std::fabs(u) - 2.0 * std::log1p(std::exp(-std::fabs(u)));
    case LinkKind::cloglog:
      return u - std::exp(u);
  }
  return 0.0;
}

double LinkFunction::dlog_density(double u) const {
  switch (kind_) {
    case LinkKind::probit:
      return -u;
    case LinkKind::logit:
      return 1.0 - 2.0 * expit(u);
    case LinkKind::cloglog:
      return 1.0 - std::exp(u);
  }
  return 0.0;
}

Latent LinkFunction::latent(double u) const {
  if (kind_ == LinkKind::probit) return {u, 1.0, false};
  Latent out;
  const double p = cdf(u);
  if (p <= 0.5) {
    if (p <= 0.0) return {-kLatentClamp, 0.0, true};
    out.z = normal_quantile(p);
  } else {
    const double q = survivor(u);
    if (q <= 0.0) return {kLatentClamp, 0.0, true};
    out.z = -normal_quantile(q);
  }
  out.dz_du = std::exp(log_density(u) - log_normal_pdf(out.z));
  return out;
}

double LinkFunction::log_interval(double a, double b) const {
  if (!(a < b)) return -kInf;
  if (kind_ == LinkKind::probit) return log_normal_interval(a, b);
  const double ga = std::isinf(a) ? 0.0 : cdf(a);
  if (ga < 0.5) {
    const double gb = std::isinf(b) ? 1.0 : cdf(b);
    return std::log(gb - ga);
  }
  const double sa = survivor(a);
  const double sb = std::isinf(b) ? 0.0 : survivor(b);
  return std::log(sa - sb);
}

}  // namespace nami
