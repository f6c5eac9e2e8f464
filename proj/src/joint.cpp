#include "nami/joint.hpp"

#include <algorithm>
#include <cmath>

#include "design.hpp"
#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

void JointSpec::validate() const {
  if (marginals.empty()) throw ConfigError("model has no variables");
  if (!names.empty() && names.size() != marginals.size())
    throw ConfigError("variable names do not match the number of variables");
  if (arms < 2) throw ConfigError("at least two treatment arms are required");
  for (int j = 0; j + 1 < dim(); ++j)
    if (marginals[j].role != Role::covariate)
      throw ConfigError("only the last variable may be the outcome");
  const MarginalSpec& out = marginals.back();
  if (out.role != Role::outcome) throw ConfigError("the last variable must be the outcome");
  if (out.arms != arms) throw ConfigError("outcome arms differ from the treatment arms");
}

std::vector<Observation> JointData::observations(int variable) const {
  std::vector<Observation> out;
  const auto& col = columns.at(static_cast<std::size_t>(variable));
  out.reserve(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) out.push_back({col[i], arm[i]});
  return out;
}

ParamLayout::ParamLayout(const JointSpec& spec) : dim(spec.dim()), arms(spec.arms) {
  Eigen::Index at = 0;
  for (const auto& m : spec.marginals) {
    offset.push_back(at);
    size.push_back(m.coefficient_count() + m.shift_count());
    at += size.back();
  }
  lambda_offset = at;
  at += dim * (dim - 1) / 2;
  gamma_offset = at;
  at += static_cast<Eigen::Index>(arms - 1) * (dim - 1);
  total = at;
}

Eigen::Index ParamLayout::tau_index(int arm) const {
  if (arm < 1 || arm >= arms) throw InputError("no shift for this arm");
  return offset.back() + size.back() - (arms - 1) + (arm - 1);
}

Eigen::Index ParamLayout::lambda_index(int row, int col) const {
  if (!(row > col && col >= 0 && row < dim)) throw InputError("lambda index out of range");
  return lambda_offset + CopulaParams::lambda_index(row, col);
}

Eigen::Index ParamLayout::gamma_index(int arm, int col) const {
  if (arm < 1 || arm >= arms || col < 0 || col >= dim - 1) throw InputError("gamma index out of range");
  return gamma_offset + static_cast<Eigen::Index>(arm - 1) * (dim - 1) + col;
}

std::vector<Support> joint_supports(const JointSpec& spec, const JointData& data) {
  if (data.columns.size() != spec.marginals.size())
    throw InputError("dataset has the wrong number of variables");
  std::vector<Support> out;
  for (int j = 0; j < spec.dim(); ++j) {
    const MarginalSpec& m = spec.marginals[j];
    out.push_back(m.basis == BasisKind::bernstein ? data_support(m, data.columns[j]) : Support{});
  }
  return out;
}

namespace {

Eigen::Index gamma_start(const ParamLayout& lay, int arm) {
  return lay.gamma_offset + static_cast<Eigen::Index>(arm - 1) * (lay.dim - 1);
}

CopulaParams copula_from_raw(const ParamLayout& lay, const Eigen::VectorXd& raw) {
  CopulaParams c;
  c.dim = lay.dim;
  c.lambda = raw.segment(lay.lambda_offset, lay.gamma_offset - lay.lambda_offset);
  for (int a = 1; a < lay.arms; ++a)
    c.gamma.push_back(raw.segment(gamma_start(lay, a), lay.dim - 1));
  return c;
}

}  // namespace

JointModel joint_model_from_raw(const JointSpec& spec, const std::vector<Support>& supports,
                                const Eigen::VectorXd& raw) {
  const ParamLayout lay(spec);
  if (raw.size() != lay.total) throw InputError("joint parameter vector has the wrong length");
  JointModel m;
  m.spec = spec;
  m.supports = supports;
  for (int j = 0; j < spec.dim(); ++j)
    m.marginals.push_back(
        model_from_raw(spec.marginals[j], supports[j], raw.segment(lay.offset[j], lay.size[j])));
  m.copula = copula_from_raw(lay, raw);
  return m;
}

Eigen::VectorXd joint_raw_from_model(const JointModel& model) {
  const ParamLayout lay(model.spec);
  Eigen::VectorXd raw(lay.total);
  for (int j = 0; j < lay.dim; ++j) {
    const MarginalSpec& s = model.spec.marginals[j];
    const MarginalModel& m = model.marginals[j];
    const Eigen::Index k = s.coefficient_count();
    raw.segment(lay.offset[j], k) = unconstrain(m.basis.coefficients(), s.basis, s.positivity);
    raw.segment(lay.offset[j] + k, s.shift_count()) = m.tau;
  }
  raw.segment(lay.lambda_offset, model.copula.lambda.size()) = model.copula.lambda;
  for (int a = 1; a < lay.arms; ++a)
    raw.segment(gamma_start(lay, a), lay.dim - 1) = model.copula.gamma[a - 1];
  return raw;
}

Eigen::VectorXd theta_from_raw(const JointSpec& spec, const Eigen::VectorXd& raw) {
  const ParamLayout lay(spec);
  if (raw.size() != lay.total) throw InputError("joint parameter vector has the wrong length");
  Eigen::VectorXd theta = raw;
  for (int j = 0; j < lay.dim; ++j) {
    const MarginalSpec& s = spec.marginals[j];
    const Eigen::Index k = s.coefficient_count();
    theta.segment(lay.offset[j], k) = constrain(raw.segment(lay.offset[j], k), s.basis, s.positivity);
  }
  return theta;
}

struct JointLikelihood::Impl {
  struct Var {
    MarginalSpec spec;
    LinkFunction link;
    detail::ColumnDesign design;
    Eigen::Index k = 0;
  };

  JointSpec spec;
  ParamLayout layout;
  std::vector<Var> vars;
  std::vector<int> arm;
  /// Sorted position -> input row.
  std::vector<std::size_t> order;
  std::vector<double> jitter;
  int n = 0;
  int dim = 0;

  Impl(const JointSpec& s, const std::vector<Support>& supports, const JointData& data)
      : spec(s), layout(s), n(static_cast<int>(data.rows())), dim(s.dim()) {
    spec.validate();
    if (data.columns.size() != static_cast<std::size_t>(dim))
      throw InputError("dataset has the wrong number of variables");
    for (const auto& col : data.columns)
      if (col.size() != data.rows()) throw InputError("dataset columns differ in length");
    for (int a : data.arm)
      if (a < 0 || a >= spec.arms) throw InputError("treatment arm out of range");
    if (n == 0) throw InputError("dataset is empty");

    order = detail::canonical_order(data.arm, data.columns);
    for (std::size_t i : order) arm.push_back(data.arm[i]);

    for (int j = 0; j < dim; ++j) {
      const MarginalSpec& ms = spec.marginals[j];
      std::vector<Datum> col;
      col.reserve(order.size());
      for (std::size_t i : order) col.push_back(data.columns[j][i]);
      if (j + 1 < dim) {
        for (const Datum& d : col) {
          if (d.is_missing())
            throw InputError("missing value in covariate " + name(j) + "; only the outcome may be missing");
          if (d.kind != Datum::Kind::exact && !spec.discrete_approx)
            throw UnsupportedError("covariate " + name(j) +
                                   " is discrete or censored; rerun with --discrete-approx");
        }
      }
      const Eigen::VectorXd raw0 = Eigen::VectorXd::Zero(ms.coefficient_count() + ms.shift_count());
      const MarginalModel shape = model_from_raw(ms, supports[j], raw0);
      vars.push_back({ms, LinkFunction(ms.link), detail::build_design(shape.basis, col),
                      ms.coefficient_count()});
    }
    std::mt19937_64 rng(spec.approx_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    jitter.resize(order.size() * static_cast<std::size_t>(dim));
    for (double& u : jitter) u = unif(rng);
  }

  std::string name(int j) const {
    return j < static_cast<int>(spec.names.size()) ? spec.names[j] : std::to_string(j + 1);
  }

  // With `theta` set, basis blocks of `raw` hold the coefficients themselves.
  double eval(const Eigen::VectorXd& raw, Eigen::VectorXd* grad, std::vector<double>* terms,
              bool theta = false) const;
};

namespace {

double latent_or(const LinkFunction& link, double u, double* dz_du) {
  if (std::isinf(u)) {
    *dz_du = 0.0;
    return u;
  }
  const Latent l = link.latent(u);
  *dz_du = l.dz_du;
  return l.z;
}

// Ratio phi(x) / exp(log_p), zero at infinite x.
double density_ratio(double x, double log_p) {
  return std::isinf(x) ? 0.0 : std::exp(log_normal_pdf(x) - log_p);
}

// Point at quantile fraction t between Phi(a) and Phi(b), using the tail
// that keeps precision.
double jitter_point(double a, double b, double t) {
  if (a > 0.0) {
    const double q = (1.0 - t) * normal_cdf(-a) + t * normal_cdf(-b);
    return -normal_quantile(q);
  }
  return normal_quantile((1.0 - t) * normal_cdf(a) + t * normal_cdf(b));
}

}  // namespace

double JointLikelihood::Impl::eval(const Eigen::VectorXd& raw, Eigen::VectorXd* grad,
                                   std::vector<double>* terms, bool theta) const {
  const int J = dim;
  const int out = J - 1;
  const int arms = spec.arms;
  if (raw.size() != layout.total) throw InputError("joint parameter vector has the wrong length");

  std::vector<Eigen::VectorXd> coef(J), u(J), hp(J), ulo(J), uhi(J);
  Eigen::VectorXd tau = raw.segment(layout.offset[out] + vars[out].k, arms - 1);
  for (int j = 0; j < J; ++j) {
    const Var& v = vars[j];
    coef[j] = theta ? Eigen::VectorXd(raw.segment(layout.offset[j], v.k))
                    : constrain(raw.segment(layout.offset[j], v.k), v.spec.basis, v.spec.positivity);
    u[j] = v.design.a * coef[j];
    hp[j] = v.design.a_deriv * coef[j];
    ulo[j] = v.design.a_lo * coef[j];
    uhi[j] = v.design.a_hi * coef[j];
  }
  for (int i = 0; i < n; ++i) {
    if (arm[i] == 0) continue;
    const double t = tau[arm[i] - 1];
    u[out][i] -= t;
    ulo[out][i] -= t;
    uhi[out][i] -= t;
  }

  const CopulaParams cop = copula_from_raw(layout, raw);
  std::vector<Eigen::MatrixXd> lam;
  std::vector<OmegaFactor> om;
  for (int a = 0; a < arms; ++a) {
    lam.push_back(build_lambda(cop, a));
    om.push_back(standardize(lam.back()));
  }

  const bool want = grad != nullptr;
  std::vector<Eigen::MatrixXd> g_omega(arms, Eigen::MatrixXd::Zero(J, J));
  std::vector<Eigen::VectorXd> d_u(J), d_r(J), d_lo(J), d_hi(J);
  if (want)
    for (int j = 0; j < J; ++j) {
      d_u[j] = d_r[j] = d_lo[j] = d_hi[j] = Eigen::VectorXd::Zero(n);
    }

  std::vector<double> local;
  std::vector<double>& rows = terms ? *terms : local;
  rows.assign(static_cast<std::size_t>(n), 0.0);

  Eigen::VectorXd z(J), dzdu(J), dlg(J), jac(J), eps(J), dz(J);
  Eigen::VectorXd a_lat(J), b_lat(J), da_du(J), db_du(J);
  for (int i = 0; i < n; ++i) {
    const int w = arm[i];
    const Eigen::MatrixXd& omega = om[w].omega;
    const detail::RowKind out_kind = vars[out].design.kind[i];
    const int m = out_kind == detail::RowKind::exact ? J : J - 1;

    for (int j = 0; j < m; ++j) {
      const Var& v = vars[j];
      if (v.design.kind[i] == detail::RowKind::exact) {
        if (!(hp[j][i] > 0.0)) return -kInf;
        const Latent l = v.link.latent(u[j][i]);
        z[j] = l.z;
        dzdu[j] = l.dz_du;
        jac[j] = v.link.log_density(u[j][i]) + std::log(hp[j][i]) - log_normal_pdf(l.z);
        if (want) dlg[j] = v.link.dlog_density(u[j][i]);
      } else {
        const double lo = v.design.lo_finite[i] ? ulo[j][i] : -kInf;
        const double hi = v.design.hi_finite[i] ? uhi[j][i] : kInf;
        a_lat[j] = latent_or(v.link, lo, &da_du[j]);
        b_lat[j] = latent_or(v.link, hi, &db_du[j]);
        const double lp = log_normal_interval(a_lat[j], b_lat[j]);
        if (!std::isfinite(lp)) return -kInf;
        z[j] = jitter_point(a_lat[j], b_lat[j], jitter[static_cast<std::size_t>(i) * J + j]);
        jac[j] = lp - log_normal_pdf(z[j]);
        dlg[j] = lp;  // reused below for the interval probability
      }
    }

    eps.head(m) = omega.topLeftCorner(m, m).triangularView<Eigen::Lower>() * z.head(m);
    double ll = 0.0;
    for (int k = 0; k < m; ++k) ll += log_normal_pdf(eps[k]) + std::log(omega(k, k)) + jac[k];

    double w_lo = 0.0, w_hi = 0.0, z_lo = 0.0, z_hi = 0.0, dzlo = 0.0, dzhi = 0.0;
    if (out_kind == detail::RowKind::interval) {
      const Var& v = vars[out];
      const double lo = v.design.lo_finite[i] ? ulo[out][i] : -kInf;
      const double hi = v.design.hi_finite[i] ? uhi[out][i] : kInf;
      z_lo = latent_or(v.link, lo, &dzlo);
      z_hi = latent_or(v.link, hi, &dzhi);
      const double s = omega.row(out).head(out).dot(z.head(out));
      const double wjj = omega(out, out);
      const double lo_arg = std::isinf(z_lo) ? z_lo : wjj * z_lo + s;
      const double hi_arg = std::isinf(z_hi) ? z_hi : wjj * z_hi + s;
      const double lp = log_normal_interval(lo_arg, hi_arg);
      if (!std::isfinite(lp)) return -kInf;
      ll += lp;
      w_lo = -density_ratio(lo_arg, lp);
      w_hi = density_ratio(hi_arg, lp);
    }
    rows[i] = ll;
    if (!want) continue;

    Eigen::MatrixXd& g = g_omega[w];
    dz.head(m) = -(omega.topLeftCorner(m, m).triangularView<Eigen::Lower>().transpose() * eps.head(m));
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c <= r; ++c) g(r, c) -= eps[r] * z[c];
      g(r, r) += 1.0 / omega(r, r);
    }
    if (out_kind == detail::RowKind::interval) {
      const double wsum = w_lo + w_hi;
      dz.head(out) += wsum * omega.row(out).head(out).transpose();
      g.row(out).head(out) += wsum * z.head(out).transpose();
      if (!std::isinf(z_lo)) g(out, out) += w_lo * z_lo;
      if (!std::isinf(z_hi)) g(out, out) += w_hi * z_hi;
      d_lo[out][i] = w_lo * omega(out, out) * dzlo;
      d_hi[out][i] = w_hi * omega(out, out) * dzhi;
    }
    for (int j = 0; j < m; ++j) {
      const Var& v = vars[j];
      const double total = dz[j] + z[j];  // copula term plus the -log phi(z) Jacobian
      if (v.design.kind[i] == detail::RowKind::exact) {
        d_u[j][i] = total * dzdu[j] + dlg[j];
        d_r[j][i] = 1.0 / hp[j][i];
      } else {
        const double lp = dlg[j];
        const double t = jitter[static_cast<std::size_t>(i) * J + j];
        const double lz = log_normal_pdf(z[j]);
        const double ra = std::isinf(a_lat[j]) ? 0.0 : std::exp(log_normal_pdf(a_lat[j]) - lz);
        const double rb = std::isinf(b_lat[j]) ? 0.0 : std::exp(log_normal_pdf(b_lat[j]) - lz);
        const double dda = total * (1.0 - t) * ra - density_ratio(a_lat[j], lp);
        const double ddb = total * t * rb + density_ratio(b_lat[j], lp);
        d_lo[j][i] = dda * da_du[j];
        d_hi[j][i] = ddb * db_du[j];
      }
    }
  }

  const double total = compensated_sum(rows);
  if (!std::isfinite(total)) return -kInf;
  if (!want) return total;

  grad->setZero(layout.total);
  for (int j = 0; j < J; ++j) {
    const Var& v = vars[j];
    const Eigen::VectorXd gc = v.design.a.transpose() * d_u[j] + v.design.a_deriv.transpose() * d_r[j] +
                               v.design.a_lo.transpose() * d_lo[j] + v.design.a_hi.transpose() * d_hi[j];
    grad->segment(layout.offset[j], v.k) =
        theta ? gc : constrain_pullback(raw.segment(layout.offset[j], v.k), gc, v.spec.basis, v.spec.positivity);
  }
  for (int i = 0; i < n; ++i)
    if (arm[i] > 0)
      (*grad)[layout.tau_index(arm[i])] -= d_u[out][i] + d_lo[out][i] + d_hi[out][i];
  for (int a = 0; a < arms; ++a) {
    const Eigen::MatrixXd gl = omega_pullback(lam[a], om[a], g_omega[a]);
    for (int r = 1; r < J; ++r)
      for (int c = 0; c < r; ++c) (*grad)[layout.lambda_index(r, c)] += gl(r, c);
    if (a > 0)
      for (int c = 0; c < out; ++c) (*grad)[layout.gamma_index(a, c)] = gl(out, c);
  }
  return total;
}

JointLikelihood::JointLikelihood(const JointSpec& spec, const std::vector<Support>& supports,
                                 const JointData& data)
    : impl_(std::make_unique<Impl>(spec, supports, data)) {}
JointLikelihood::~JointLikelihood() = default;
JointLikelihood::JointLikelihood(JointLikelihood&&) noexcept = default;

double JointLikelihood::operator()(const Eigen::VectorXd& raw, Eigen::VectorXd* grad) const {
  return impl_->eval(raw, grad, nullptr);
}

double JointLikelihood::theta_loglik(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  return impl_->eval(theta, grad, nullptr, true);
}

Eigen::VectorXd JointLikelihood::row_terms(const Eigen::VectorXd& raw) const {
  std::vector<double> terms;
  impl_->eval(raw, nullptr, &terms);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(impl_->n, -kInf);
  for (std::size_t i = 0; i < terms.size(); ++i) out[impl_->order[i]] = terms[i];
  return out;
}

int JointLikelihood::rows() const { return impl_->n; }

double joint_loglik(const JointModel& model, const JointData& data) {
  const JointLikelihood lik(model.spec, model.supports, data);
  return lik(joint_raw_from_model(model));
}

double JointFit::se(Eigen::Index i) const {
  if (covariance.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(covariance(i, i));
}

namespace {

[[noreturn]] void rethrow_named(const std::string& name) {
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("variable " + name + ": " + e.what(), e.best(), e.best_value());
  } catch (const IdentifiabilityError& e) {
    throw IdentifiabilityError("variable " + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("variable " + name + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError("variable " + name + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError("variable " + name + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("variable " + name + ": " + e.what());
  }
}

}  // namespace

JointFit fit_joint(const JointSpec& spec, const JointData& data, const JointFitOptions& options) {
  spec.validate();
  const ParamLayout lay(spec);
  JointFit fit;
  fit.spec = spec;
  fit.supports = joint_supports(spec, data);

  Eigen::VectorXd start;
  if (options.start) {
    start = *options.start;
    if (start.size() != lay.total) throw InputError("start vector has the wrong length");
  } else {
    start = Eigen::VectorXd::Zero(lay.total);
    for (int j = 0; j < spec.dim(); ++j) {
      MarginalSpec ms = spec.marginals[j];
      if (ms.basis == BasisKind::bernstein) ms.support = fit.supports[j];
      FitOptions mo;
      mo.optim = options.optim;
      mo.compute_covariance = false;
      const std::string name = j < static_cast<int>(spec.names.size()) ? spec.names[j] : std::to_string(j + 1);
      try {
        fit.stage1.push_back(fit_marginal(ms, data.observations(j), mo));
      } catch (const Error&) {
        rethrow_named(name);
      }
      start.segment(lay.offset[j], lay.size[j]) = fit.stage1.back().raw;
    }
  }

  const JointLikelihood lik(spec, fit.supports, data);
  const double n = lik.rows();
  const Objective objective = [&](const Eigen::VectorXd& raw, Eigen::VectorXd* grad) {
    const double ll = lik(raw, grad);
    if (!std::isfinite(ll)) return kInf;
    if (grad) *grad /= -n;
    return -ll / n;
  };

  const OptimResult res = minimize(objective, start, options.optim, nullptr);
  if (!std::isfinite(res.value))
    throw ConvergenceError("joint likelihood is not finite at the starting values", res.x, res.value);

  fit.raw = res.x;
  fit.theta = theta_from_raw(spec, res.x);
  fit.model = joint_model_from_raw(spec, fit.supports, res.x);
  fit.loglik = -res.value * n;
  fit.observations = lik.rows();
  fit.convergence = {res.converged, res.iterations, res.evaluations, res.gradient_norm(), 0.0, res.status};
  if (options.compute_covariance) {
    const Objective theta_objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
      const double ll = lik.theta_loglik(theta, grad);
      if (!std::isfinite(ll)) return kInf;
      if (grad) *grad /= -n;
      return -ll / n;
    };
    const ParamLayout lay(spec);
    std::vector<MonotoneBlock> blocks;
    for (int j = 0; j < lay.dim; ++j) {
      const MarginalSpec& ms = spec.marginals[static_cast<std::size_t>(j)];
      if (ms.basis != BasisKind::linear) blocks.push_back({lay.offset[j], ms.coefficient_count()});
    }
    const InformationResult info = information_covariance(theta_objective, fit.theta, n, blocks);
    fit.convergence.hessian_asymmetry = info.asymmetry;
    if (info.positive_definite) {
      fit.covariance = info.covariance;
    } else if (res.converged) {
      throw IdentifiabilityError("observed information of the joint model is not positive definite");
    }
  }
  return fit;
}

Eigen::MatrixXd delta_method(const JointFit& fit,
                             const std::function<Eigen::VectorXd(const CopulaParams&)>& f) {
  if (fit.covariance.size() == 0) throw NumericalError("fit has no covariance matrix");
  const ParamLayout lay = fit.layout();
  const Eigen::Index start = lay.lambda_offset;
  const Eigen::Index count = lay.total - start;
  const Eigen::VectorXd base = f(copula_from_raw(lay, fit.raw));
  Eigen::MatrixXd jac(base.size(), count);
  Eigen::VectorXd x = fit.raw;
  for (Eigen::Index c = 0; c < count; ++c) {
    const double h = 1e-6 * std::max(1.0, std::fabs(x[start + c]));
    x[start + c] = fit.raw[start + c] + h;
    const Eigen::VectorXd fp = f(copula_from_raw(lay, x));
    x[start + c] = fit.raw[start + c] - h;
    const Eigen::VectorXd fm = f(copula_from_raw(lay, x));
    x[start + c] = fit.raw[start + c];
    jac.col(c) = (fp - fm) / (2.0 * h);
  }
  const Eigen::MatrixXd cov = fit.covariance.block(start, start, count, count);
  return jac * cov * jac.transpose();
}

double conditional_cdf(const JointModel& model, double y, int arm, std::span<const double> covariates) {
  const int J = model.spec.dim();
  if (static_cast<int>(covariates.size()) != J - 1) throw InputError("wrong number of covariate values");
  const OmegaFactor f = model.omega(arm);
  double s = 0.0;
  for (int j = 0; j + 1 < J; ++j) {
    if (model.marginals[j].basis.kind() == BasisKind::step)
      throw UnsupportedError("conditional CDF needs continuous covariates");
    s += f.omega(J - 1, j) * to_latent(model.marginals[j], covariates[j], 0).z;
  }
  const Latent t = to_latent(model.outcome(), y, arm);
  if (std::isinf(t.z)) return t.z > 0 ? 1.0 : 0.0;
  return normal_cdf(s + f.omega(J - 1, J - 1) * t.z);
}

Eigen::MatrixXd sample_latent(const CopulaParams& copula, int arm, int n, std::mt19937_64& rng) {
  const OmegaFactor f = omega_for_arm(copula, arm);
  const int J = copula.dim;
  std::normal_distribution<double> norm;
  Eigen::MatrixXd eps(J, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J; ++j) eps(j, i) = norm(rng);
  const Eigen::MatrixXd z = f.omega.triangularView<Eigen::Lower>().solve(eps);
  return z.transpose();
}

double marginal_recovery_check(const JointModel& model, int arm, std::span<const double> y_grid,
                               int draws, std::uint64_t seed) {
  const int J = model.spec.dim();
  const OmegaFactor f = model.omega(arm);
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd z = sample_latent(model.copula, arm, draws, rng);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(draws);
  if (J > 1) s = z.leftCols(J - 1) * f.omega.row(J - 1).head(J - 1).transpose();
  const double wjj = f.omega(J - 1, J - 1);

  double worst = 0.0;
  for (double y : y_grid) {
    const double t = to_latent(model.outcome(), y, arm).z;
    double mean = 0.0;
    for (int i = 0; i < draws; ++i) mean += (normal_cdf(s[i] + wjj * t) - mean) / (i + 1);
    worst = std::max(worst, std::fabs(mean - normal_cdf(t)));
  }
  return worst;
}

namespace {

Datum invert_latent(const MarginalModel& m, double z, int arm) {
  double u = z;
  if (m.link.kind() != LinkKind::probit)
    u = z <= 0.0 ? m.link.quantile(normal_cdf(z)) : m.link.quantile(1.0 - normal_cdf(-z));
  const double h = u + m.shift(arm);
  const double y = m.basis.invert(h);
  if (m.basis.kind() == BasisKind::step) return Datum::category_of(static_cast<int>(y));
  return Datum::exact(y);
}

}  // namespace

JointSample sample_joint(const JointModel& model, int arm, int n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample size must be positive");
  const int J = model.spec.dim();
  std::mt19937_64 rng(seed);
  JointSample out;
  out.latent = sample_latent(model.copula, arm, n, rng);
  out.data.columns.assign(static_cast<std::size_t>(J), {});
  out.data.arm.assign(static_cast<std::size_t>(n), arm);
  for (int j = 0; j < J; ++j) {
    const int shift_arm = j + 1 == J ? arm : 0;
    auto& col = out.data.columns[j];
    col.reserve(n);
    for (int i = 0; i < n; ++i) col.push_back(invert_latent(model.marginals[j], out.latent(i, j), shift_arm));
  }
  return out;
}

}  // namespace nami
