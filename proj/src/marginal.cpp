#include "nami/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "design.hpp"
#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

Datum Datum::interval(double lo, double hi) {
  if (!(lo < hi)) throw InputError("interval datum needs lo < hi");
  return {Kind::interval, lo, hi, 0};
}

bool datum_less(const Datum& a, const Datum& b) {
  return std::tuple(static_cast<int>(a.kind), a.lo, a.hi, a.category) <
         std::tuple(static_cast<int>(b.kind), b.lo, b.hi, b.category);
}

double MarginalModel::shift(int arm) const {
  if (arm < 0) throw InputError("treatment arm out of range");
  if (arm == 0 || tau.size() == 0) return 0.0;
  if (arm > tau.size()) throw InputError("treatment arm out of range");
  return tau[arm - 1];
}

double marginal_cdf(const MarginalModel& model, double y, int arm) {
  const double h = model.basis.eval(y);
  if (std::isinf(h)) return h > 0 ? 1.0 : 0.0;
  return model.link.cdf(h - model.shift(arm));
}

Latent to_latent(const MarginalModel& model, double y, int arm) {
  const double h = model.basis.eval_clamped(y);
  if (std::isinf(h)) return {h > 0 ? kInf : -kInf, 0.0, false};
  return model.link.latent(h - model.shift(arm));
}

namespace {

// Latent bound of a category: cutpoint k (1-based), infinite past either end.
double category_bound(const MarginalModel& model, int k, int arm, bool* clamped) {
  const int cats = model.basis.categories();
  if (k <= 0) return -kInf;
  if (k >= cats) return kInf;
  const Latent l = model.link.latent(model.basis.coefficients()[k - 1] - model.shift(arm));
  *clamped = *clamped || l.clamped;
  return l.z;
}

double bound_latent(const MarginalModel& model, double y, int arm, bool* clamped) {
  bool outside = false;
  const double h = model.basis.eval_clamped(y, &outside);
  const Latent l = model.link.latent(h - model.shift(arm));
  *clamped = *clamped || outside || l.clamped;
  return l.z;
}

}  // namespace

LatentInterval latent_interval(const MarginalModel& model, const Datum& datum, int arm) {
  LatentInterval out;
  using K = Datum::Kind;
  switch (datum.kind) {
    case K::missing:
      throw InputError("latent interval requested for a missing value");
    case K::exact: {
      const double u = model.basis.eval(datum.lo) - model.shift(arm);
      const Latent l = model.link.latent(u);
      out.lo = out.hi = l.z;
      out.clamped = l.clamped;
      out.log_jacobian = model.link.log_density(u) + std::log(model.basis.eval_deriv(datum.lo)) -
                         log_normal_pdf(l.z);
      return out;
    }
    case K::right_censored:
      out.lo = bound_latent(model, datum.lo, arm, &out.clamped);
      out.hi = kInf;
      return out;
    case K::left_censored:
      out.lo = -kInf;
      out.hi = bound_latent(model, datum.hi, arm, &out.clamped);
      return out;
    case K::interval:
      out.lo = bound_latent(model, datum.lo, arm, &out.clamped);
      out.hi = bound_latent(model, datum.hi, arm, &out.clamped);
      return out;
    case K::category:
      if (datum.category < 1 || datum.category > model.basis.categories())
        throw InputError("category index out of range");
      out.lo = category_bound(model, datum.category - 1, arm, &out.clamped);
      out.hi = category_bound(model, datum.category, arm, &out.clamped);
      return out;
  }
  return out;
}

namespace {

struct Prepared {
  std::vector<Datum> data;
  std::vector<int> arms;
  detail::ColumnDesign design;
  int observed = 0;
};

Prepared prepare(const TransformationBasis& basis, std::span<const Observation> obs) {
  std::vector<int> arms;
  std::vector<std::vector<Datum>> cols(1);
  for (const auto& o : obs) {
    arms.push_back(o.arm);
    cols[0].push_back(o.datum);
  }
  Prepared p;
  for (std::size_t i : detail::canonical_order(arms, cols)) {
    p.arms.push_back(arms[i]);
    p.data.push_back(cols[0][i]);
    if (!cols[0][i].is_missing()) ++p.observed;
  }
  p.design = detail::build_design(basis, p.data);
  return p;
}

// Log-likelihood and its gradient with respect to (coefficients, tau).
double loglik_design(const Prepared& p, const LinkFunction& link, const Eigen::VectorXd& coef,
                     const Eigen::VectorXd& tau, Eigen::VectorXd* grad_coef,
                     Eigen::VectorXd* grad_tau) {
  const auto& d = p.design;
  const Eigen::Index k = coef.size();
  if (grad_coef) grad_coef->setZero(k);
  if (grad_tau) grad_tau->setZero(tau.size());
  std::vector<double> terms;
  terms.reserve(p.data.size());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d.kind[i] == detail::RowKind::missing) continue;
    const int arm = p.arms[i];
    const bool shifted = arm > 0 && tau.size() > 0;
    const double shift = shifted ? tau[arm - 1] : 0.0;
    if (d.kind[i] == detail::RowKind::exact) {
      const double u = d.a.row(i).dot(coef) - shift;
      const double hp = d.a_deriv.row(i).dot(coef);
      if (!(hp > 0.0)) return -kInf;
      terms.push_back(link.log_density(u) + std::log(hp));
      if (grad_coef || grad_tau) {
        const double dl = link.dlog_density(u);
        if (grad_coef) *grad_coef += dl * d.a.row(i).transpose() + d.a_deriv.row(i).transpose() / hp;
        if (grad_tau && shifted) (*grad_tau)[arm - 1] -= dl;
      }
      continue;
    }
    const double lo = d.lo_finite[i] ? d.a_lo.row(i).dot(coef) - shift : -kInf;
    const double hi = d.hi_finite[i] ? d.a_hi.row(i).dot(coef) - shift : kInf;
    const double lp = link.log_interval(lo, hi);
    if (!std::isfinite(lp)) return -kInf;
    terms.push_back(lp);
    if (grad_coef || grad_tau) {
      const double wlo = d.lo_finite[i] ? std::exp(link.log_density(lo) - lp) : 0.0;
      const double whi = d.hi_finite[i] ? std::exp(link.log_density(hi) - lp) : 0.0;
      if (grad_coef) {
        if (d.hi_finite[i]) *grad_coef += whi * d.a_hi.row(i).transpose();
        if (d.lo_finite[i]) *grad_coef -= wlo * d.a_lo.row(i).transpose();
      }
      if (grad_tau && shifted) (*grad_tau)[arm - 1] -= whi - wlo;
    }
  }
  return compensated_sum(terms);
}

void check_arms(const MarginalModel& model, std::span<const Observation> data) {
  // Covariate models carry no shifts and accept any arm label.
  for (const auto& o : data)
    if (o.arm < 0 || (model.tau.size() > 0 && o.arm >= model.arms()))
      throw InputError("treatment arm out of range");
}

}  // namespace

double marginal_loglik(const MarginalModel& model, std::span<const Observation> data) {
  check_arms(model, data);
  const Prepared p = prepare(model.basis, data);
  if (p.observed == 0) return 0.0;
  return loglik_design(p, model.link, model.basis.coefficients(), model.tau, nullptr, nullptr);
}

Eigen::Index MarginalSpec::coefficient_count() const {
  return nami::coefficient_count(basis, order, categories);
}

Support data_support(const MarginalSpec& spec, std::span<const Datum> data) {
  if (spec.support) return *spec.support;
  double lo = kInf;
  double hi = -kInf;
  auto take = [&](double v) {
    if (!std::isfinite(v)) return;
    if (spec.log_scale) {
      if (!(v > 0.0)) throw DomainError("log-scale variable has a non-positive value");
      v = std::log(v);
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  using K = Datum::Kind;
  for (const auto& d : data) {
    switch (d.kind) {
      case K::exact:
      case K::right_censored:
        take(d.lo);
        break;
      case K::left_censored:
        take(d.hi);
        break;
      case K::interval:
        take(d.lo);
        take(d.hi);
        break;
      default:
        break;
    }
  }
  if (!(lo <= hi)) throw InputError("no finite values to define a transformation support");
  return support_from_range(lo, hi, spec.support_expand);
}

namespace {

TransformationBasis basis_from_coef(const MarginalSpec& spec, const Support& support,
                                    const Eigen::VectorXd& coef) {
  switch (spec.basis) {
    case BasisKind::linear:
      return TransformationBasis::linear(coef[0], coef[1], spec.log_scale);
    case BasisKind::bernstein:
      return TransformationBasis::bernstein(coef, support, spec.log_scale);
    case BasisKind::step:
      return TransformationBasis::step(coef);
  }
  throw UnsupportedError("unknown basis kind");
}

}  // namespace

MarginalModel model_from_raw(const MarginalSpec& spec, const Support& support,
                             const Eigen::VectorXd& raw) {
  const Eigen::Index k = spec.coefficient_count();
  if (raw.size() != k + spec.shift_count()) throw InputError("parameter vector has the wrong length");
  MarginalModel m;
  m.basis = basis_from_coef(spec, support, constrain(raw.head(k), spec.basis, spec.positivity));
  m.link = LinkFunction(spec.link);
  m.tau = raw.tail(spec.shift_count());
  m.role = spec.role;
  return m;
}

namespace {

// Points (working-scale value, plotting position) used for starting values.
std::vector<std::pair<double, double>> empirical_cdf(const MarginalSpec& spec,
                                                     std::span<const Observation> data) {
  std::vector<double> v;
  for (const auto& o : data) {
    const Datum& d = o.datum;
    double x = std::numeric_limits<double>::quiet_NaN();
    if (d.kind == Datum::Kind::exact || d.kind == Datum::Kind::right_censored)
      x = d.lo;
    else if (d.kind == Datum::Kind::left_censored)
      x = d.hi;
    else if (d.kind == Datum::Kind::interval)
      x = 0.5 * (d.lo + d.hi);
    if (!std::isfinite(x)) continue;
    v.push_back(spec.log_scale ? std::log(x) : x);
  }
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], (static_cast<double>(i) + 0.5) / n);
  return out;
}

double ecdf_at(const std::vector<std::pair<double, double>>& pts, double s) {
  const double n = static_cast<double>(pts.size());
  const auto it = std::upper_bound(pts.begin(), pts.end(), s,
                                   [](double x, const auto& p) { return x < p.first; });
  const double count = static_cast<double>(it - pts.begin());
  return std::clamp(count / n, 0.5 / n, 1.0 - 0.5 / n);
}

}  // namespace

Eigen::VectorXd initial_raw(const MarginalSpec& spec, const Support& support,
                            std::span<const Observation> data) {
  const LinkFunction link(spec.link);
  const Eigen::Index k = spec.coefficient_count();
  Eigen::VectorXd coef(k);

  if (spec.basis == BasisKind::step) {
    std::vector<double> counts(static_cast<std::size_t>(spec.categories), 0.0);
    double n = 0.0;
    for (const auto& o : data) {
      if (o.datum.kind != Datum::Kind::category) continue;
      const int c = o.datum.category;
      if (c >= 1 && c <= spec.categories) {
        counts[c - 1] += 1.0;
        n += 1.0;
      }
    }
    if (n == 0.0) throw InputError("no observed categories");
    double cum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      cum += counts[j];
      const double p = std::clamp(cum / n, 0.5 / n, 1.0 - 0.5 / n);
      coef[j] = link.quantile(p);
      if (j > 0) coef[j] = std::max(coef[j], coef[j - 1] + 0.05);
    }
  } else {
    const auto pts = empirical_cdf(spec, data);
    if (pts.size() < 2) throw IdentifiabilityError("need at least two observed values");
    if (spec.basis == BasisKind::linear) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const auto& [x, p] : pts) {
        const double z = link.quantile(p);
        sx += x;
        sy += z;
        sxx += x * x;
        sxy += x * z;
      }
      const double n = static_cast<double>(pts.size());
      const double var = sxx - sx * sx / n;
      if (!(var > 0.0)) throw IdentifiabilityError("variable has no variation");
      double slope = (sxy - sx * sy / n) / var;
      if (!(slope > 0.0)) slope = 1.0 / std::sqrt(var / n);
      coef << (sy - slope * sx) / n, slope;
    } else {
      const int m = spec.order;
      for (int j = 0; j <= m; ++j) {
        const double s = support.lo + (support.hi - support.lo) * j / m;
        coef[j] = link.quantile(ecdf_at(pts, s));
        if (j > 0) coef[j] = std::max(coef[j], coef[j - 1] + 0.05);
      }
    }
  }
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(k + spec.shift_count());
  raw.head(k) = unconstrain(coef, spec.basis, spec.positivity);
  return raw;
}

double MarginalFit::tau_se(int k) const {
  const Eigen::Index idx = spec.coefficient_count() + k;
  if (k < 0 || idx >= covariance.rows()) throw InputError("no such treatment effect");
  return std::sqrt(covariance(idx, idx));
}

MarginalFit fit_marginal(const MarginalSpec& spec, std::span<const Observation> data,
                         const FitOptions& options) {
  if (spec.arms < 1) throw ConfigError("at least one arm is required");
  std::vector<Datum> values;
  std::vector<int> per_arm(static_cast<std::size_t>(spec.arms), 0);
  for (const auto& o : data) {
    if (o.arm < 0 || o.arm >= spec.arms) throw InputError("treatment arm out of range");
    values.push_back(o.datum);
    if (!o.datum.is_missing()) ++per_arm[o.arm];
  }
  if (spec.shift_count() > 0)
    for (int a = 0; a < spec.arms; ++a)
      if (per_arm[a] == 0) throw IdentifiabilityError("treatment arm " + std::to_string(a) + " has no observations");

  const Support support = spec.basis == BasisKind::bernstein ? data_support(spec, values) : Support{};
  const Eigen::VectorXd start = options.start ? *options.start : initial_raw(spec, support, data);
  const Eigen::Index k = spec.coefficient_count();
  if (start.size() != k + spec.shift_count()) throw InputError("start vector has the wrong length");

  const MarginalModel shape = model_from_raw(spec, support, start);
  const Prepared prepared = prepare(shape.basis, data);
  if (prepared.observed == 0) throw InputError("no observed values");
  const double n = prepared.observed;
  const LinkFunction link(spec.link);

  const Objective objective = [&](const Eigen::VectorXd& raw, Eigen::VectorXd* grad) {
    const Eigen::VectorXd coef = constrain(raw.head(k), spec.basis, spec.positivity);
    const Eigen::VectorXd tau = raw.tail(spec.shift_count());
    Eigen::VectorXd gc, gt;
    const double ll = loglik_design(prepared, link, coef, tau, grad ? &gc : nullptr,
                                    grad ? &gt : nullptr);
    if (!std::isfinite(ll)) return kInf;
    if (grad) {
      grad->resize(raw.size());
      grad->head(k) = -constrain_pullback(raw.head(k), gc, spec.basis, spec.positivity) / n;
      grad->tail(spec.shift_count()) = -gt / n;
    }
    return -ll / n;
  };

  const OptimResult res = minimize(objective, start, options.optim, nullptr);
  if (!res.converged)
    throw ConvergenceError("marginal fit did not converge: " + res.status, res.x, -res.value * n);

  MarginalFit fit;
  fit.spec = spec;
  fit.raw = res.x;
  fit.model = model_from_raw(spec, support, res.x);
  fit.loglik = -res.value * n;
  fit.observations = prepared.observed;
  fit.convergence = {res.converged, res.iterations, res.evaluations, res.gradient_norm(), 0.0, res.status};
  if (options.compute_covariance) {
    const Objective theta_objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
      Eigen::VectorXd gc, gt;
      const double ll = loglik_design(prepared, link, theta.head(k), theta.tail(spec.shift_count()),
                                      grad ? &gc : nullptr, grad ? &gt : nullptr);
      if (!std::isfinite(ll)) return kInf;
      if (grad) {
        grad->resize(theta.size());
        grad->head(k) = -gc / n;
        grad->tail(spec.shift_count()) = -gt / n;
      }
      return -ll / n;
    };
    Eigen::VectorXd theta(res.x.size());
    theta.head(k) = fit.model.basis.coefficients();
    theta.tail(spec.shift_count()) = fit.model.tau;
    std::vector<MonotoneBlock> blocks;
    if (spec.basis != BasisKind::linear) blocks.push_back({0, k});
    const InformationResult info = information_covariance(theta_objective, theta, n, blocks);
    fit.convergence.hessian_asymmetry = info.asymmetry;
    if (!info.positive_definite) throw IdentifiabilityError("observed information is not positive definite");
    fit.covariance = info.covariance;
  }
  return fit;
}

double auc_from_tau(double tau) { return normal_cdf(tau / std::sqrt(2.0)); }

}  // namespace nami
