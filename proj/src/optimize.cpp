#include "nami/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nami {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;

struct Point {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double f0,
             double slope0, int* evaluations)
      : f_(f), x_(x), dir_(dir), f0_(f0), slope0_(slope0), evaluations_(evaluations) {}

  // Returns false when no acceptable step was found.
  bool run(double alpha0, Point* out) {
    Point prev{0.0, f0_, slope0_, x_, {}};
    double alpha = alpha0;
    for (int i = 0; i < 40; ++i) {
      Point cur = eval(alpha);
      if (!std::isfinite(cur.value)) {
        alpha = prev.alpha + 0.25 * (alpha - prev.alpha);
        continue;
      }
      if (cur.value > f0_ + kC1 * alpha * slope0_ || (i > 0 && cur.value >= prev.value))
        return zoom(prev, cur, out);
      if (std::fabs(cur.slope) <= -kC2 * slope0_) {
        *out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

 private:
  Point eval(double alpha) {
    Point p;
    p.alpha = alpha;
    p.x = x_ + alpha * dir_;
    p.grad.resize(x_.size());
    p.value = f_(p.x, &p.grad);
    ++*evaluations_;
    if (!std::isfinite(p.value) || !p.grad.allFinite()) {
      p.value = std::numeric_limits<double>::infinity();
      p.slope = 0.0;
    } else {
      p.slope = p.grad.dot(dir_);
    }
    return p;
  }

  bool zoom(Point lo, Point hi, Point* out) {
    Point best_armijo;
    bool have_armijo = false;
    for (int i = 0; i < 40; ++i) {
      const double width = hi.alpha - lo.alpha;
      // Quadratic interpolation from lo's value and slope and hi's value.
      double alpha = lo.alpha + 0.5 * width;
      if (std::isfinite(hi.value)) {
        const double denom = 2.0 * (hi.value - lo.value - lo.slope * width);
        if (denom > 0.0) alpha = lo.alpha - lo.slope * width * width / denom;
      }
      const double a = std::min(lo.alpha, hi.alpha);
      const double b = std::max(lo.alpha, hi.alpha);
      alpha = std::clamp(alpha, a + 0.1 * (b - a), b - 0.1 * (b - a));
      Point cur = eval(alpha);
      if (!std::isfinite(cur.value) || cur.value > f0_ + kC1 * alpha * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::fabs(cur.slope) <= -kC2 * slope0_) {
          *out = std::move(cur);
          return true;
        }
        if (!have_armijo || cur.value < best_armijo.value) {
          best_armijo = cur;
          have_armijo = true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
      if (std::fabs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::fabs(lo.alpha))) break;
    }
    if (have_armijo) {
      *out = std::move(best_armijo);
      return true;
    }
    if (lo.alpha > 0.0 && lo.value < f0_) {
      *out = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  double f0_;
  double slope0_;
  int* evaluations_;
};

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

OptimResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options) {
  const Eigen::Index n = x0.size();
  OptimResult res;
  res.x = std::move(x0);
  res.gradient.resize(n);
  res.value = f(res.x, &res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    res.status = "non-finite objective at the starting point";
    return res;
  }
  if (n == 0) {
    res.converged = true;
    res.status = "no parameters";
    return res;
  }

  Eigen::MatrixXd inv_hess = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int stalled = 0;
  bool restarted = false;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    const double gnorm = sup_norm(res.gradient);
    if (gnorm <= options.gradient_tol) {
      res.converged = true;
      res.status = "gradient tolerance reached";
      return res;
    }
    Eigen::VectorXd dir = -inv_hess * res.gradient;
    double slope = dir.dot(res.gradient);
    if (!(slope < 0.0)) {
      inv_hess.setIdentity();
      scaled = false;
      dir = -res.gradient;
      slope = dir.dot(res.gradient);
    }
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(gnorm, 1e-12));
    Point next;
    LineSearch search(f, res.x, dir, res.value, slope, &res.evaluations);
    if (!search.run(alpha0, &next)) {
      if (gnorm <= options.accept_gradient_tol) {
        res.converged = true;
        res.status = "line search exhausted at acceptable gradient";
        return res;
      }
      if (restarted) {
        res.status = "line search failed";
        return res;
      }
      inv_hess.setIdentity();
      scaled = false;
      restarted = true;
      continue;
    }
    restarted = false;

    const Eigen::VectorXd s = next.x - res.x;
    const Eigen::VectorXd y = next.grad - res.gradient;
    const double change = res.value - next.value;
    const double prev_value = res.value;
    res.x = std::move(next.x);
    res.gradient = std::move(next.grad);
    res.value = next.value;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hess *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hess * y;
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      inv_hess += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                  rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (std::fabs(change) <= options.relative_tol * (std::fabs(prev_value) + options.relative_tol))
      ++stalled;
    else
      stalled = 0;
    if (stalled >= 3 && sup_norm(res.gradient) <= options.accept_gradient_tol) {
      res.converged = true;
      res.status = "relative change tolerance reached";
      return res;
    }
  }
  res.status = "iteration limit reached";
  res.converged = sup_norm(res.gradient) <= options.accept_gradient_tol;
  return res;
}

HessianResult numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd gp(n);
  Eigen::VectorXd gm(n);
  Eigen::VectorXd xp = x;
  auto central = [&](Eigen::Index j, double step) {
    xp[j] = x[j] + step;
    f(xp, &gp);
    xp[j] = x[j] - step;
    f(xp, &gm);
    xp[j] = x[j];
    return Eigen::VectorXd((gp - gm) / (2.0 * step));
  };
  // Richardson extrapolation of two central differences cancels the h^2 term.
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = rel_step * std::max(1.0, std::fabs(x[j]));
    const Eigen::VectorXd coarse = central(j, step);
    h.col(j) = (4.0 * central(j, 0.5 * step) - coarse) / 3.0;
  }
  HessianResult out;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  out.asymmetry = n ? (h - h.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  out.hessian = 0.5 * (h + h.transpose());
  return out;
}

InformationResult information_covariance(const Objective& f, const Eigen::VectorXd& x, double n,
                                         const std::vector<MonotoneBlock>& blocks, double rel_step) {
  const Eigen::Index dim = x.size();
  // Column c of `expand` maps reduced coordinate c to the entries it moves.
  std::vector<Eigen::Index> group(static_cast<std::size_t>(dim));
  std::vector<Eigen::Index> lead;
  int tied = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    bool merge = false;
    for (const auto& b : blocks)
      if (i > b.offset && i < b.offset + b.size)
        merge = x[i] - x[i - 1] < rel_step * std::max(1.0, std::fabs(x[i]));
    if (merge) {
      group[static_cast<std::size_t>(i)] = group[static_cast<std::size_t>(i - 1)];
      ++tied;
    } else {
      group[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(lead.size());
      lead.push_back(i);
    }
  }
  const auto reduced = static_cast<Eigen::Index>(lead.size());
  Eigen::MatrixXd expand = Eigen::MatrixXd::Zero(dim, reduced);
  for (Eigen::Index i = 0; i < dim; ++i) expand(i, group[static_cast<std::size_t>(i)]) = 1.0;
  Eigen::VectorXd phi0(reduced);
  for (Eigen::Index c = 0; c < reduced; ++c) phi0[c] = x[lead[static_cast<std::size_t>(c)]];

  const Objective g = [&](const Eigen::VectorXd& phi, Eigen::VectorXd* grad) {
    Eigen::VectorXd full_grad;
    const double v = f(x + expand * (phi - phi0), grad ? &full_grad : nullptr);
    if (grad) *grad = expand.transpose() * full_grad;
    return v;
  };
  const HessianResult hess = numeric_hessian(g, phi0, rel_step);

  InformationResult out;
  out.asymmetry = hess.asymmetry;
  out.tied = tied;
  const Eigen::MatrixXd info = n * hess.hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  out.positive_definite = info.allFinite() && llt.info() == Eigen::Success;
  if (out.positive_definite) {
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(reduced, reduced));
    out.covariance = expand * (0.5 * (inv + inv.transpose())) * expand.transpose();
  }
  return out;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::fabs(x[j]));
    xp[j] = x[j] + h;
    const double fp = f(xp);
    xp[j] = x[j] - h;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

OptimResult minimize(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options,
                     HessianResult* hessian) {
  OptimResult res = minimize_bfgs(f, std::move(x0), options);
  if (!std::isfinite(res.value)) return res;
  HessianResult hess = numeric_hessian(f, res.x);
  res.evaluations += 4 * static_cast<int>(res.x.size());

  // Newton steps with Levenberg damping; the damping grows until the step
  // both lowers the objective and shrinks the gradient.
  const Eigen::Index n = res.x.size();
  for (int step = 0; step < options.polish_steps; ++step) {
    if (sup_norm(res.gradient) <= 1e-9) break;
    const double scale = std::max(1.0, hess.hessian.cwiseAbs().maxCoeff());
    bool moved = false;
    for (double mu = 0.0; mu <= 1e-2 * scale; mu = mu == 0.0 ? 1e-10 * scale : mu * 100.0) {
      const Eigen::MatrixXd damped = hess.hessian + mu * Eigen::MatrixXd::Identity(n, n);
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() != Eigen::Success) continue;
      Eigen::VectorXd x_new = res.x - llt.solve(res.gradient);
      Eigen::VectorXd g_new(n);
      const double v_new = f(x_new, &g_new);
      ++res.evaluations;
      if (!std::isfinite(v_new) || !g_new.allFinite()) continue;
      if (v_new > res.value + 1e-13 * std::fabs(res.value) || sup_norm(g_new) >= sup_norm(res.gradient)) continue;
      res.x = std::move(x_new);
      res.value = v_new;
      res.gradient = std::move(g_new);
      moved = true;
      break;
    }
    if (!moved) break;
    hess = numeric_hessian(f, res.x);
    res.evaluations += 4 * static_cast<int>(n);
  }
  if (!res.converged && sup_norm(res.gradient) <= options.accept_gradient_tol) {
    res.converged = true;
    res.status += "; polished to acceptable gradient";
  }
  if (hessian) *hessian = std::move(hess);
  return res;
}

}  // namespace nami
