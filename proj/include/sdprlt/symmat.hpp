#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace sdprlt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SymMat = Eigen::MatrixXd;  // dense, stored with both triangles

struct EigPair {
  Vec values;   // descending
  Mat vectors;  // columns match values
};

inline void check_finite(const Mat& M, const std::string& what) {
  if (!M.allFinite()) throw NonFinite(what + " contains NaN or Inf");
}

inline SymMat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

inline EigPair sym_eig(const SymMat& M) {
  check_finite(M, "sym_eig input");
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const Eigen::Index n = M.rows();
  EigPair out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  // Sign convention: largest-magnitude entry of each vector is positive.
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index imax;
    out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.vectors(imax, j) < 0) out.vectors.col(j) *= -1.0;
  }
  return out;
}

inline SymMat psd_project(const SymMat& M) {
  check_finite(M, "psd_project input");
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  const Mat& V = es.eigenvectors();
  return symmetrize(V * lam.asDiagonal() * V.transpose());
}

// T M T^T
inline SymMat congruence(const SymMat& M, const Mat& T) {
  if (T.cols() != M.rows() || M.rows() != M.cols())
    throw ShapeMismatch("congruence: T is " + std::to_string(T.rows()) + "x" +
                        std::to_string(T.cols()) + ", M is " +
                        std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  return symmetrize(T * M * T.transpose());
}

// R_hat = [e1^T; R]
inline Mat hat(const Mat& R) {
  Mat Rh(R.rows() + 1, R.cols());
  Rh.row(0).setZero();
  Rh(0, 0) = 1.0;
  Rh.bottomRows(R.rows()) = R;
  return Rh;
}

inline SymMat gram_hat(const Mat& R) {
  const Mat Rh = hat(R);
  return Rh * Rh.transpose();
}

// Factor Y ~ R_hat R_hat^T with the first row of R_hat equal to e1^T.
// Returns R (rows 2..n+1 of R_hat); its column count is the numerical rank.
inline Mat psd_factorize_hat(const SymMat& Y, double rel_tol = 1e-8) {
  if (std::abs(Y(0, 0) - 1.0) > 1e-6)
    throw CornerMismatch("Y(1,1) = " + std::to_string(Y(0, 0)));
  const EigPair ep = sym_eig(Y);
  const double lmax = ep.values(0);
  const double lmin = ep.values(ep.values.size() - 1);
  if (lmin < -1e-6 * std::max(lmax, 1.0))
    throw NotPsd("lambda_min = " + std::to_string(lmin));
  Eigen::Index r = 0;
  while (r < ep.values.size() && ep.values(r) > rel_tol * lmax) ++r;
  r = std::max<Eigen::Index>(r, 1);

  Mat F = ep.vectors.leftCols(r) * ep.values.head(r).cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Vec u = F.row(0).transpose();
  const double fn = u.norm();
  if (fn > 0) u /= fn;
  // Householder reflector H with H u = e1; w1 = u1 - 1 computed without cancellation.
  Vec w = u;
  const double tail = u.tail(r - 1).squaredNorm();
  w(0) = (u(0) > 0) ? -tail / (u(0) + 1.0) : u(0) - 1.0;
  const double ww = w.squaredNorm();
  if (ww > 1e-300) F -= (2.0 / ww) * (F * w) * w.transpose();
  return F.bottomRows(F.rows() - 1);
}

inline double frob_dot(const Mat& A, const Mat& B) { return A.cwiseProduct(B).sum(); }

}  // namespace sdprlt
