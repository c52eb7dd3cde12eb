#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"

namespace fase::der {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Dense two-phase tableau simplex for
///   minimize c'x  subject to  A_le x <= b_le,  A_eq x = b_eq,  x >= 0.
///
/// Entering variables follow Dantzig's rule; after a run of degenerate pivots
/// the rule switches to Bland's, which cannot cycle.
class DenseSimplex {
public:
  explicit DenseSimplex(double tol = 1e-9) : tol_(tol) {}

  LpResult solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_le, const Eigen::VectorXd& b_le,
                 const Eigen::MatrixXd& a_eq = {}, const Eigen::VectorXd& b_eq = {}) {
    const Eigen::Index n = c.size();
    const Eigen::Index m_le = a_le.rows(), m_eq = a_eq.rows();
    if ((m_le > 0 && a_le.cols() != n) || (m_eq > 0 && a_eq.cols() != n) || b_le.size() != m_le ||
        b_eq.size() != m_eq)
      throw DomainError("simplex: dimension mismatch");
    const Eigen::Index m = m_le + m_eq;

    // Columns: x (n), slack/surplus (m_le), artificial (one per row that needs it), rhs.
    std::vector<int> needs_art(static_cast<std::size_t>(m), 0);
    Eigen::Index arts = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      const bool le = r < m_le;
      const double rhs = le ? b_le[r] : b_eq[r - m_le];
      if (!le || rhs < 0.0) {
        needs_art[static_cast<std::size_t>(r)] = 1;
        ++arts;
      }
    }
    cols_ = n + m_le + arts;
    T_ = Eigen::MatrixXd::Zero(m + 1, cols_ + 1);
    basis_.assign(static_cast<std::size_t>(m), -1);
    Eigen::Index art = n + m_le;
    for (Eigen::Index r = 0; r < m; ++r) {
      const bool le = r < m_le;
      double rhs = le ? b_le[r] : b_eq[r - m_le];
      Eigen::RowVectorXd row = le ? Eigen::RowVectorXd(a_le.row(r)) : Eigen::RowVectorXd(a_eq.row(r - m_le));
      double slack = le ? 1.0 : 0.0;
      if (rhs < 0.0) {
        rhs = -rhs;
        row = -row;
        slack = -slack;
      }
      T_.block(r, 0, 1, n) = row;
      if (le)
        T_(r, n + r) = slack;
      T_(r, cols_) = rhs;
      if (needs_art[static_cast<std::size_t>(r)]) {
        T_(r, art) = 1.0;
        basis_[static_cast<std::size_t>(r)] = static_cast<int>(art++);
      } else {
        basis_[static_cast<std::size_t>(r)] = static_cast<int>(n + r);
      }
    }
    first_art_ = n + m_le;

    LpResult res;
    if (arts > 0) {
      // Phase 1: minimise the sum of artificials.
      T_.row(m).setZero();
      for (Eigen::Index j = first_art_; j < cols_; ++j)
        T_(m, j) = 1.0;
      price_out();
      if (!iterate(cols_))
        throw DomainError("simplex: phase 1 unbounded (internal error)");
      if (T_(m, cols_) < -tol_ * std::max(1.0, T_.col(cols_).head(m).cwiseAbs().maxCoeff())) {
        res.status = LpStatus::infeasible;
        return res;
      }
      drive_out_artificials();
    }
    T_.row(m).setZero();
    T_.block(m, 0, 1, n) = c.transpose();
    price_out();
    if (!iterate(first_art_)) {
      res.status = LpStatus::unbounded;
      return res;
    }
    res.status = LpStatus::optimal;
    res.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r)
      if (basis_[static_cast<std::size_t>(r)] < n)
        res.x[basis_[static_cast<std::size_t>(r)]] = T_(r, cols_);
    res.objective = c.dot(res.x);
    return res;
  }

private:
  Eigen::Index rows() const { return T_.rows() - 1; }

  // Make the objective row consistent with the current basis.
  void price_out() {
    const Eigen::Index m = rows();
    for (Eigen::Index r = 0; r < m; ++r) {
      const double f = T_(m, basis_[static_cast<std::size_t>(r)]);
      if (f != 0.0)
        T_.row(m) -= f * T_.row(r);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index col) {
    T_.row(r) /= T_(r, col);
    for (Eigen::Index i = 0; i <= rows(); ++i)
      if (i != r && T_(i, col) != 0.0)
        T_.row(i) -= T_(i, col) * T_.row(r);
    T_.col(col).setZero();
    T_(r, col) = 1.0;
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(col);
  }

  // Returns false when the objective is unbounded below.
  bool iterate(Eigen::Index allowed_cols) {
    const Eigen::Index m = rows();
    int degenerate = 0;
    const int max_pivots = 50 * static_cast<int>(m + cols_) + 1000;
    for (int it = 0; it < max_pivots; ++it) {
      const bool bland = degenerate > 20;
      Eigen::Index enter = -1;
      double best = -tol_;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        const double d = T_(m, j);
        if (d < best) {
          enter = j;
          if (bland)
            break;
          best = d;
        }
      }
      if (enter < 0)
        return true;
      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        const double a = T_(r, enter);
        if (a > tol_) {
          const double q = T_(r, cols_) / a;
          if (q < ratio - tol_ ||
              (q <= ratio + tol_ && leave >= 0 && basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)])) {
            ratio = q;
            leave = r;
          }
        }
      }
      if (leave < 0)
        return false;
      degenerate = ratio <= tol_ ? degenerate + 1 : 0;
      pivot(leave, enter);
    }
    throw ConvergenceError("simplex: pivot limit reached");
  }

  void drive_out_artificials() {
    const Eigen::Index m = rows();
    for (Eigen::Index r = 0; r < m; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < first_art_)
        continue;
      for (Eigen::Index j = 0; j < first_art_; ++j)
        if (std::abs(T_(r, j)) > tol_) {
          pivot(r, j);
          break;
        }
      // A row without a non-artificial entry is redundant; its artificial stays at zero.
    }
    for (Eigen::Index j = first_art_; j < cols_; ++j) {
      bool basic = false;
      for (int b : basis_)
        basic = basic || b == j;
      if (!basic)
        T_.col(j).setZero();
    }
  }

  double tol_;
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
  Eigen::Index cols_ = 0;
  Eigen::Index first_art_ = 0;
};

} // namespace fase::der
