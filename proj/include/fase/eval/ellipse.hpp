#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"

namespace fase::eval {

/// Quantile of the chi-square distribution with two degrees of freedom.
inline double chi2_2dof_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("confidence must lie in (0, 1)");
  return -2.0 * std::log1p(-p);
}

enum class EllipseShape { ellipse, segment, point };

inline const char* shape_name(EllipseShape s) {
  switch (s) {
  case EllipseShape::ellipse: return "ellipse";
  case EllipseShape::segment: return "segment";
  case EllipseShape::point: return "point";
  }
  return "?";
}

struct ErrorEllipse {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero(); ///< sample covariance (n - 1)
  double confidence = 0.95;
  double major = 0.0;       ///< semi-axes, sqrt(eigenvalue * quantile)
  double minor = 0.0;
  double orientation = 0.0; ///< angle of the major axis from the first coordinate, rad in (-pi/2, pi/2]
  EllipseShape shape = EllipseShape::ellipse;
};

/// Confidence ellipse of a two-column error sample. Eigenvalues below
/// `rank_tol` times the largest (or absolute 1e-300) count as zero; rank 1 is
/// reported as a segment along the major axis, rank 0 as a point.
inline ErrorEllipse error_ellipse(const Eigen::MatrixX2d& errors, double confidence, double rank_tol = 1e-12) {
  const auto n = errors.rows();
  if (n < 3)
    throw DomainError("error_ellipse: need at least 3 samples, got " + std::to_string(n));
  const double q = chi2_2dof_quantile(confidence);
  ErrorEllipse e;
  e.confidence = confidence;
  e.center = errors.colwise().mean().transpose();
  const Eigen::MatrixX2d c = errors.rowwise() - e.center.transpose();
  e.covariance = (c.transpose() * c) / static_cast<double>(n - 1);
  e.covariance(1, 0) = e.covariance(0, 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(e.covariance);
  const double l_max = std::max(es.eigenvalues()[1], 0.0);
  const double l_min = std::max(es.eigenvalues()[0], 0.0);
  const double zero = std::max(rank_tol * l_max, 1e-300);
  const Eigen::Vector2d axis = es.eigenvectors().col(1);
  double theta = std::atan2(axis[1], axis[0]);
  if (theta <= -std::numbers::pi / 2)
    theta += std::numbers::pi;
  else if (theta > std::numbers::pi / 2)
    theta -= std::numbers::pi;
  e.orientation = theta;
  if (l_max <= 1e-300) {
    e.shape = EllipseShape::point;
    e.orientation = 0.0;
    return e;
  }
  e.major = std::sqrt(l_max * q);
  if (l_min <= zero) {
    e.shape = EllipseShape::segment;
    return e;
  }
  e.minor = std::sqrt(l_min * q);
  return e;
}

/// Closed polygon of `vertices` distinct points plus the repeated first point.
inline std::vector<std::array<double, 2>> ellipse_polygon(const ErrorEllipse& e, int vertices = 72) {
  if (vertices < 3)
    throw DomainError("ellipse_polygon: need at least 3 vertices");
  std::vector<std::array<double, 2>> out;
  out.reserve(static_cast<std::size_t>(vertices) + 1);
  const double c = std::cos(e.orientation), s = std::sin(e.orientation);
  for (int k = 0; k < vertices; ++k) {
    const double t = 2.0 * std::numbers::pi * k / vertices;
    const double u = e.major * std::cos(t), v = e.minor * std::sin(t);
    out.push_back({e.center[0] + c * u - s * v, e.center[1] + s * u + c * v});
  }
  out.push_back(out.front());
  return out;
}

} // namespace fase::eval
