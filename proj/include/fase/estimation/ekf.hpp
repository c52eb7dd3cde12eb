#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fase/common/error.hpp"

namespace fase::est {

struct CorrectionOptions {
  bool iterated = false; ///< iterate the Gauss-Newton step (iterated EKF)
  int max_iter = 5;
  double tol = 1e-8;     ///< max-norm of the state step that ends the iteration
  int max_halvings = 30; ///< step-halving budget that keeps J from increasing
};

struct Correction {
  Eigen::VectorXd x;       ///< posterior estimate
  Eigen::MatrixXd P;       ///< posterior covariance, (P~^-1 + H'R^-1 H)^-1
  Eigen::MatrixXd K;       ///< gain, P H' R^-1
  double objective_prior = 0.0; ///< J at the prediction (or start point)
  double objective_post = 0.0;  ///< J at the estimate
  int iterations = 0;
};

namespace detail {

template <class Model>
void check_sizes(const Model& model, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& r) {
  if (model.rows() == 0)
    throw DomainError("correction: no measurements");
  if (z.size() != model.rows() || r.size() != model.rows())
    throw DomainError("correction: " + std::to_string(model.rows()) + " measurement functions but " +
                      std::to_string(z.size()) + " readings and " + std::to_string(r.size()) + " variances");
  if (x.size() != model.cols())
    throw DomainError("correction: state has " + std::to_string(x.size()) + " entries, model expects " +
                      std::to_string(model.cols()));
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (!(r[i] > 0.0) || !std::isfinite(r[i]))
      throw DomainError("correction: measurement variance " + std::to_string(i) + " is not positive and finite");
  if (!z.allFinite() || !x.allFinite())
    throw DomainError("correction: non-finite readings or state");
}

// Square-root information form. The normal matrix A'A equals
// P~^-1 + H'R^-1 H, but solving through a QR of A squares its condition
// number only implicitly.
template <class Model>
Correction gauss_newton(const Model& model, const Eigen::VectorXd& x_pred, const Eigen::MatrixXd* prior_whitener,
                        const Eigen::VectorXd& z, const Eigen::VectorXd& r, const CorrectionOptions& opt) {
  const Eigen::Index n = x_pred.size();
  const Eigen::Index m = z.size();
  const Eigen::VectorXd w = r.cwiseSqrt().cwiseInverse();
  const Eigen::Index prior_rows = prior_whitener ? n : 0;

  auto objective = [&](const Eigen::VectorXd& x) {
    double j = (model.residual(z, x).cwiseProduct(w)).squaredNorm();
    if (prior_whitener)
      j += (*prior_whitener * (x - x_pred)).squaredNorm();
    return j;
  };

  Correction out;
  out.x = x_pred;
  out.objective_prior = objective(x_pred);
  double j_cur = out.objective_prior;

  Eigen::MatrixXd A(m + prior_rows, n);
  Eigen::VectorXd b(m + prior_rows);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Eigen::MatrixXd H;
  const int max_iter = opt.iterated ? std::max(1, opt.max_iter) : 1;
  for (int it = 1; it <= max_iter; ++it) {
    H = model.jacobian(out.x);
    A.topRows(m) = w.asDiagonal() * H;
    b.head(m) = model.residual(z, out.x).cwiseProduct(w);
    if (prior_whitener) {
      A.bottomRows(n) = *prior_whitener;
      b.tail(n) = *prior_whitener * (x_pred - out.x);
    }
    qr.compute(A);
    if (qr.rank() < n)
      throw UnobservableError("correction: information matrix is singular (null space dimension " +
                                  std::to_string(n - qr.rank()) + ")",
                              static_cast<int>(n - qr.rank()));
    const Eigen::VectorXd step = qr.solve(b);
    out.iterations = it;

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = out.x + t * step;
      const double j_trial = objective(trial);
      if (std::isfinite(j_trial) && j_trial <= j_cur) {
        out.x = trial;
        j_cur = j_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted || t * step.lpNorm<Eigen::Infinity>() < opt.tol)
      break;
  }
  out.objective_post = j_cur;

  // P = (A'A)^-1 = Pi R^-1 R^-T Pi' for A Pi = Q R.
  const Eigen::MatrixXd Rt = qr.matrixR().topLeftCorner(n, n).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      Rt.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  Eigen::MatrixXd P = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
  out.P = 0.5 * (P + P.transpose());
  out.K = out.P * H.transpose() * r.cwiseInverse().asDiagonal();
  return out;
}

} // namespace detail

/// EKF measurement update around the prediction `x_pred` with covariance `P_pred`.
///
/// Minimizes J(x) = (z - h(x))' R^-1 (z - h(x)) + (x - x~)' P~^-1 (x - x~) by
/// Gauss-Newton from x~ (one step unless `opt.iterated`); steps are halved
/// until J does not increase. `r` holds the diagonal of R.
template <class Model>
Correction ekf_correct(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& r, const Model& model, const CorrectionOptions& opt = {}) {
  detail::check_sizes(model, x_pred, z, r);
  if (P_pred.rows() != x_pred.size() || P_pred.cols() != x_pred.size())
    throw DomainError("correction: covariance dimensions do not match the state");
  const Eigen::MatrixXd Ps = 0.5 * (P_pred + P_pred.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(Ps);
  if (llt.info() != Eigen::Success)
    throw DomainError("correction: predicted covariance is not positive definite");
  const Eigen::MatrixXd whitener =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(x_pred.size(), x_pred.size()));
  return detail::gauss_newton(model, x_pred, &whitener, z, r, opt);
}

/// Weighted least squares without prior information, iterated from `x0`.
/// Used to initialise the filter; reports unobservable subspaces.
template <class Model>
Correction wls_estimate(const Eigen::VectorXd& x0, const Eigen::VectorXd& z, const Eigen::VectorXd& r,
                        const Model& model, CorrectionOptions opt = {}) {
  detail::check_sizes(model, x0, z, r);
  opt.iterated = true;
  opt.max_iter = std::max(opt.max_iter, 20);
  return detail::gauss_newton(model, x0, nullptr, z, r, opt);
}

/// Time update P~ = F P F' + Q, symmetrized.
inline Eigen::MatrixXd predict_covariance(const Eigen::MatrixXd& P, const Eigen::MatrixXd& F,
                                          const Eigen::MatrixXd& Q) {
  if (P.rows() != P.cols() || F.rows() != P.rows() || F.cols() != P.cols() || Q.rows() != P.rows() ||
      Q.cols() != P.cols())
    throw DomainError("predict_covariance: dimension mismatch");
  const Eigen::MatrixXd out = F * P * F.transpose() + Q;
  return 0.5 * (out + out.transpose());
}

/// Diagonal-F form used by the Holt predictor.
inline Eigen::MatrixXd predict_covariance(const Eigen::MatrixXd& P, const Eigen::VectorXd& f, double q) {
  if (P.rows() != P.cols() || f.size() != P.rows())
    throw DomainError("predict_covariance: dimension mismatch");
  Eigen::MatrixXd out = f.asDiagonal() * P * f.asDiagonal();
  out.diagonal().array() += q;
  return 0.5 * (out + out.transpose());
}

} // namespace fase::est
