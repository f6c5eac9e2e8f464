#include "design.hpp"

#include <algorithm>
#include <numeric>

#include "nami/error.hpp"

namespace nami::detail {

namespace {

bool is_step(const TransformationBasis& basis) { return basis.kind() == BasisKind::step; }

Eigen::VectorXd cut_vector(const TransformationBasis& basis, int index) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(basis.size());
  e[index] = 1.0;
  return e;
}

}  // namespace

ColumnDesign build_design(const TransformationBasis& basis, std::span<const Datum> data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index k = basis.size();
  ColumnDesign d;
  d.coefficients = k;
  d.kind.assign(data.size(), RowKind::missing);
  d.a = Eigen::MatrixXd::Zero(n, k);
  d.a_deriv = Eigen::MatrixXd::Zero(n, k);
  d.a_lo = Eigen::MatrixXd::Zero(n, k);
  d.a_hi = Eigen::MatrixXd::Zero(n, k);
  d.lo_finite.assign(data.size(), 0);
  d.hi_finite.assign(data.size(), 0);

  auto set_lo = [&](Eigen::Index i, double v) {
    d.a_lo.row(i) = basis.design(v).transpose();
    d.lo_finite[i] = 1;
  };
  auto set_hi = [&](Eigen::Index i, double v) {
    d.a_hi.row(i) = basis.design(v).transpose();
    d.hi_finite[i] = 1;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const Datum& x = data[i];
    using K = Datum::Kind;
    if (x.kind == K::missing) continue;
    if (is_step(basis) != (x.kind == K::category))
      throw InputError(is_step(basis) ? "ordinal variable needs category data"
                                      : "category data given for a continuous variable");
    switch (x.kind) {
      case K::exact:
        d.kind[i] = RowKind::exact;
        d.a.row(i) = basis.design(x.lo).transpose();
        d.a_deriv.row(i) = basis.design_deriv(x.lo).transpose();
        break;
      case K::right_censored:
        d.kind[i] = RowKind::interval;
        set_lo(i, x.lo);
        break;
      case K::left_censored:
        d.kind[i] = RowKind::interval;
        set_hi(i, x.hi);
        break;
      case K::interval:
        d.kind[i] = RowKind::interval;
        set_lo(i, x.lo);
        set_hi(i, x.hi);
        break;
      case K::category: {
        const int cats = basis.categories();
        if (x.category < 1 || x.category > cats)
          throw InputError("category index out of range");
        d.kind[i] = RowKind::interval;
        if (x.category > 1) {
          d.a_lo.row(i) = cut_vector(basis, x.category - 2).transpose();
          d.lo_finite[i] = 1;
        }
        if (x.category < cats) {
          d.a_hi.row(i) = cut_vector(basis, x.category - 1).transpose();
          d.hi_finite[i] = 1;
        }
        break;
      }
      case K::missing:
        break;
    }
  }
  return d;
}

std::vector<std::size_t> canonical_order(std::span<const int> arms,
                                         std::span<const std::vector<Datum>> columns) {
  std::vector<std::size_t> idx(arms.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (arms[a] != arms[b]) return arms[a] < arms[b];
    for (const auto& col : columns) {
      if (datum_less(col[a], col[b])) return true;
      if (datum_less(col[b], col[a])) return false;
    }
    return false;
  });
  return idx;
}

}  // namespace nami::detail
