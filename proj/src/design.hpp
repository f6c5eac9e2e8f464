#pragma once

// Per-variable design matrices, precomputed once per dataset so that each
// likelihood evaluation reduces to dot products with the coefficient vector.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nami/basis.hpp"
#include "nami/marginal.hpp"

namespace nami::detail {

enum class RowKind : unsigned char { exact, interval, missing };

struct ColumnDesign {
  Eigen::Index coefficients = 0;
  std::vector<RowKind> kind;
  // Row i holds a(y_i) and a'(y_i) for exact rows and the bound design
  // vectors for interval rows. Unused rows are zero.
  Eigen::MatrixXd a;
  Eigen::MatrixXd a_deriv;
  Eigen::MatrixXd a_lo;
  Eigen::MatrixXd a_hi;
  std::vector<unsigned char> lo_finite;
  std::vector<unsigned char> hi_finite;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(kind.size()); }
};

/// Bound design vector: the basis design for continuous bases, a unit vector
/// for step cutpoints.
ColumnDesign build_design(const TransformationBasis& basis, std::span<const Datum> data);

/// Indices sorting rows by (arm, data) so sums do not depend on input order.
std::vector<std::size_t> canonical_order(std::span<const int> arms,
                                         std::span<const std::vector<Datum>> columns);

}  // namespace nami::detail
