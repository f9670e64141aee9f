#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "relax.hpp"

namespace sdprlt {

// M_r = {R in R^{n x r} : AR = b e1^T, ||2R_i - e1||^2 = 1 + v_i for i in B}.
struct ManifoldSpec {
  int n = 0;
  int r = 1;
  Mat A;
  Vec b;
  std::vector<int> B;
  Vec v;

  int m() const { return static_cast<int>(A.rows()); }
  int p() const { return static_cast<int>(B.size()); }
};

struct ManifoldPoint {
  Mat R;
  double residual = 0.0;
};

inline ManifoldSpec manifold_spec(const GeneralSdp& s, int r) {
  ManifoldSpec spec;
  spec.n = s.N;
  spec.r = r;
  spec.A = s.A;
  spec.b = s.b;
  spec.B = s.B;
  spec.v = Vec::Zero(s.p());
  return spec;
}

inline ManifoldSpec with_rank(ManifoldSpec spec, int r) {
  spec.r = r;
  return spec;
}

inline double feasibility_residual(const ManifoldSpec& spec, const Mat& R) {
  double lin = 0.0;
  if (spec.m() > 0) {
    Mat F = spec.A * R;
    F.col(0) -= spec.b;
    lin = F.squaredNorm();
  }
  double sph = 0.0;
  for (int k = 0; k < spec.p(); ++k) {
    Vec u = 2.0 * R.row(spec.B[k]).transpose();
    u(0) -= 1.0;
    const double e = 0.25 * (u.squaredNorm() - 1.0 - spec.v(k));
    sph += e * e;
  }
  return std::sqrt(lin + sph);
}

inline bool on_manifold(const ManifoldSpec& spec, const Mat& R, double tol) {
  return feasibility_residual(spec, R) <= tol;
}

namespace detail {

// rows 2R_i - e1 for i in B
inline Mat sphere_dirs(const ManifoldSpec& spec, const Mat& R) {
  Mat U(spec.p(), R.cols());
  for (int k = 0; k < spec.p(); ++k) U.row(k) = 2.0 * R.row(spec.B[k]);
  if (spec.p() > 0) U.col(0).array() -= 1.0;
  return U;
}

inline double radius(const ManifoldSpec& spec, int k) { return std::sqrt(1.0 + spec.v(k)); }

// Cholesky with jitter; reports the spectral condition number.
inline Mat spd_solve(const Mat& H, const Mat& rhs, double* cond_out) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  const double lmax = ev.size() ? ev(ev.size() - 1) : 1.0;
  const double lmin = ev.size() ? ev(0) : 1.0;
  const double cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (cond_out) *cond_out = cond;
  if (!(cond <= 1e12)) throw SingularSystem("normal system condition " + sci(cond));
  Mat Hj = H;
  Hj.diagonal().array() += 1e-12 * H.trace();
  Eigen::LLT<Mat> llt(Hj);
  if (llt.info() != Eigen::Success) throw SingularSystem("Cholesky failed");
  return llt.solve(rhs);
}

// sum_j (P_j kron a_j a_j^T) on vec(Lambda), column-major Lambda (m x r).
inline Mat kron_normal(const ManifoldSpec& spec, const std::vector<Mat>& Pj, int r) {
  const int m = spec.m(), n = spec.n;
  Mat H = Mat::Zero(m * r, m * r);
  std::vector<char> isB(n, 0);
  for (int i : spec.B) isB[i] = 1;
  // non-binary rows contribute I_r kron A_nb A_nb^T
  Mat M = Mat::Zero(m, m);
  for (int j = 0; j < n; ++j)
    if (!isB[j]) M.noalias() += spec.A.col(j) * spec.A.col(j).transpose();
  for (int c = 0; c < r; ++c) H.block(c * m, c * m, m, m) += M;
  for (int k = 0; k < spec.p(); ++k) {
    const Vec a = spec.A.col(spec.B[k]);
    const Mat aa = a * a.transpose();
    const Mat& P = Pj[k];
    for (int c = 0; c < r; ++c)
      for (int e = 0; e < r; ++e)
        if (P(c, e) != 0.0) H.block(c * m, e * m, m, m) += P(c, e) * aa;
  }
  return H;
}

}  // namespace detail

// Gram matrix of all constraint gradients at R (order m*r + p).
inline Mat tangent_gram(const ManifoldSpec& spec, const Mat& R) {
  const int m = spec.m(), r = static_cast<int>(R.cols()), p = spec.p();
  const Mat U = detail::sphere_dirs(spec, R);
  Mat Gm = Mat::Zero(m * r + p, m * r + p);
  const Mat M = spec.A * spec.A.transpose();
  for (int c = 0; c < r; ++c) Gm.block(c * m, c * m, m, m) = M;
  for (int k = 0; k < p; ++k) {
    for (int c = 0; c < r; ++c)
      for (int i = 0; i < m; ++i) Gm(c * m + i, m * r + k) = Gm(m * r + k, c * m + i) = spec.A(i, spec.B[k]) * U(k, c);
    Gm(m * r + k, m * r + k) = U.row(k).squaredNorm();
  }
  return Gm;
}

inline double tangent_condition(const ManifoldSpec& spec, const Mat& R) {
  const Mat Gm = tangent_gram(spec, R);
  if (Gm.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(Gm, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(Gm.rows() - 1);
  return lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
}

// Orthogonal projection of W onto the tangent space of M_r at R.
inline Mat tangent_project(const ManifoldSpec& spec, const Mat& R, const Mat& W, double* cond_out = nullptr) {
  const int m = spec.m(), p = spec.p(), r = static_cast<int>(R.cols());
  const Mat U = detail::sphere_dirs(spec, R);
  Mat out = W;
  if (m == 0) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int k = 0; k < p; ++k) {
      const double uu = U.row(k).squaredNorm();
      lo = std::min(lo, uu);
      hi = std::max(hi, uu);
      if (uu > 0) out.row(spec.B[k]) -= (U.row(k).dot(W.row(spec.B[k])) / uu) * U.row(k);
    }
    const double cond = p == 0 ? 1.0 : (lo > 0 ? hi / lo : std::numeric_limits<double>::infinity());
    if (cond_out) *cond_out = cond;
    if (!(cond <= 1e12)) throw SingularSystem("degenerate sphere row");
    return out;
  }
  const double mr = static_cast<double>(m) * r;
  const double cost_schur = std::pow(p, 3) + double(m) * m * r + mr * p;
  const double cost_kron = mr * mr * p + mr * mr * mr;
  const Mat M = spec.A * spec.A.transpose();
  Eigen::LLT<Mat> Mllt(M);
  if (cost_schur <= cost_kron) {
    Mat F(m, p);
    for (int k = 0; k < p; ++k) F.col(k) = spec.A.col(spec.B[k]);
    const Mat MF = Mllt.solve(F);
    const Mat AW = spec.A * W;
    Vec mu = Vec::Zero(p);
    if (p > 0) {
      Mat S = -(F.transpose() * MF).cwiseProduct(U * U.transpose());
      S.diagonal() += U.rowwise().squaredNorm();
      Vec rhs(p);
      const Mat MFtAW = MF.transpose() * AW;  // p x r
      for (int k = 0; k < p; ++k) rhs(k) = U.row(k).dot(W.row(spec.B[k]) - MFtAW.row(k));
      mu = detail::spd_solve(S, rhs, cond_out);
    } else if (cond_out) {
      *cond_out = 1.0;
    }
    const Mat Lam = Mllt.solve(AW - F * mu.asDiagonal() * U);
    out -= spec.A.transpose() * Lam;
    for (int k = 0; k < p; ++k) out.row(spec.B[k]) -= mu(k) * U.row(k);
    return out;
  }
  std::vector<Mat> Pj(p);
  Mat Wp = W;
  for (int k = 0; k < p; ++k) {
    const double uu = U.row(k).squaredNorm();
    Pj[k] = Mat::Identity(r, r) - U.row(k).transpose() * U.row(k) / uu;
    Wp.row(spec.B[k]) = W.row(spec.B[k]) * Pj[k];
  }
  const Mat H = detail::kron_normal(spec, Pj, r);
  const Mat AWp = spec.A * Wp;
  const Vec rhs = Eigen::Map<const Vec>(AWp.data(), m * r);
  const Vec lam = detail::spd_solve(H, rhs, cond_out);
  const Eigen::Map<const Mat> Lam(lam.data(), m, r);
  out = W - spec.A.transpose() * Lam;
  for (int k = 0; k < p; ++k) out.row(spec.B[k]) = out.row(spec.B[k]) * Pj[k];
  return out;
}

namespace detail {

inline void normalize_sphere_rows(const ManifoldSpec& spec, Mat& R) {
  for (int k = 0; k < spec.p(); ++k) {
    Eigen::RowVectorXd q = 2.0 * R.row(spec.B[k]);
    q(0) -= 1.0;
    const double qn = q.norm();
    if (qn > 0) q *= radius(spec, k) / qn;
    else {
      q.setZero();
      q(0) = radius(spec, k);
    }
    q(0) += 1.0;
    R.row(spec.B[k]) = 0.5 * q;
  }
}

inline void affine_project(const ManifoldSpec& spec, const Eigen::LLT<Mat>& Mllt, Mat& R) {
  Mat F = spec.A * R;
  F.col(0) -= spec.b;
  R -= spec.A.transpose() * Mllt.solve(F);
}

}  // namespace detail

// Metric projection of W onto M_r. Closed form when m = 0 or p = 0; otherwise a
// damped Newton iteration on the affine multipliers, with the rows of B mapped
// onto their spheres in closed form for each multiplier value.
inline ManifoldPoint retract(const ManifoldSpec& spec, const Mat& W, int max_iters = 100, double tol = 1e-10) {
  check_finite(W, "retract input");
  const int m = spec.m(), p = spec.p(), r = static_cast<int>(W.cols()), n = spec.n;
  ManifoldPoint pt;
  pt.R = W;
  if (m == 0) {
    detail::normalize_sphere_rows(spec, pt.R);
    pt.residual = feasibility_residual(spec, pt.R);
    return pt;
  }
  const Mat M = spec.A * spec.A.transpose();
  Eigen::LLT<Mat> Mllt(M);
  if (p == 0) {
    detail::affine_project(spec, Mllt, pt.R);
    pt.residual = feasibility_residual(spec, pt.R);
    return pt;
  }
  const double ftol = tol * (1.0 + spec.b.norm());
  std::vector<char> isB(n, 0);
  for (int k = 0; k < p; ++k) isB[spec.B[k]] = 1;

  // Rows of B land on their spheres; dR_i/dq = c_k (I - n_k^T n_k) feeds the Newton system.
  Vec ck(p);
  Mat Nk(p, r);
  const Mat* base = &W;
  auto evalR = [&](const Mat& Lam, Mat& R, bool want_jac) {
    R = *base - spec.A.transpose() * Lam;
    for (int k = 0; k < p; ++k) {
      const int i = spec.B[k];
      Eigen::RowVectorXd q = 2.0 * R.row(i);
      q(0) -= 1.0;
      double qn = q.norm();
      Eigen::RowVectorXd nh = q;
      if (qn > 1e-300) nh /= qn;
      else {
        nh.setZero();
        nh(0) = 1.0;
        qn = 1e-300;
      }
      const double s = detail::radius(spec, k);
      Eigen::RowVectorXd row = s * nh;
      row(0) += 1.0;
      R.row(i) = 0.5 * row;
      if (want_jac) {
        ck(k) = s / qn;
        Nk.row(k) = nh;
      }
    }
    Mat F = spec.A * R;
    F.col(0) -= spec.b;
    return F;
  };

  Mat Fa(m, p);
  for (int k = 0; k < p; ++k) Fa.col(k) = spec.A.col(spec.B[k]);
  Mat Mnb = Mat::Zero(m, m);
  for (int j = 0; j < n; ++j)
    if (!isB[j]) Mnb.noalias() += spec.A.col(j) * spec.A.col(j).transpose();
  // H = I kron Mc - sum_k c_k (n_k^T n_k kron a_k a_k^T), solved by Woodbury.
  auto newton_solve = [&](const Mat& F, Mat& dLam) {
    const Mat Mc = Mnb + Fa * ck.asDiagonal() * Fa.transpose();
    Eigen::LLT<Mat> llt(Mc);
    if (llt.info() != Eigen::Success) return false;
    const Mat X = llt.solve(F);
    const Mat MFa = llt.solve(Fa);
    Vec t(p);
    for (int k = 0; k < p; ++k) t(k) = Fa.col(k).dot(X * Nk.row(k).transpose());
    Mat S = -(Fa.transpose() * MFa).cwiseProduct(Nk * Nk.transpose());
    S.diagonal() += ck.cwiseInverse();
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success) return false;
    const Vec z = ldlt.solve(t);
    dLam = X + MFa * z.asDiagonal() * Nk;
    return static_cast<bool>(dLam.allFinite());
  };

  Mat R;
  auto run_newton = [&] {
    Mat F0 = spec.A * *base;
    F0.col(0) -= spec.b;
    Mat Lam = Mllt.solve(F0);
    Mat F = evalR(Lam, R, true);
    double fn = F.norm();
    bool done = fn <= ftol;
    for (int it = 0; it < max_iters && !done; ++it) {
      Mat dLam;
      if (!newton_solve(F, dLam)) break;
      double step = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt) {
        Mat Rt;
        const Mat Lt = Lam + step * dLam;
        const Mat Ft = evalR(Lt, Rt, false);
        const double ftn = Ft.norm();
        if (ftn < (1.0 - 1e-4 * step) * fn || ftn <= ftol) {
          Lam = Lt;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      F = evalR(Lam, R, true);
      fn = F.norm();
      done = fn <= ftol;
    }
    return done;
  };
  bool ok = run_newton();
  // Degenerate starts (parallel sphere normals) make the Newton system singular on a
  // measure-zero set; a small seeded jitter moves off it.
  std::mt19937_64 jgen(0x5eed);
  std::normal_distribution<double> jnd(0.0, 1.0);
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    Mat Wj = W;
    const double delta = std::pow(10.0, attempt - 4) * (1.0 + W.norm());
    for (Eigen::Index i = 0; i < Wj.size(); ++i) Wj.data()[i] += delta * jnd(jgen);
    base = &Wj;
    ok = run_newton();
    base = &W;
  }
  if (!ok) {
    // alternating projections from W as a fallback
    R = W;
    for (int it = 0; it < max_iters && !ok; ++it) {
      detail::affine_project(spec, Mllt, R);
      detail::normalize_sphere_rows(spec, R);
      ok = feasibility_residual(spec, R) <= ftol;
    }
  }
  pt.R = R;
  pt.residual = feasibility_residual(spec, R);
  if (!ok && pt.residual > 1e-8 * (1.0 + R.norm()))
    throw RetractionFailed("residual " + sci(pt.residual));
  return pt;
}

inline ManifoldPoint random_feasible(const ManifoldSpec& spec, std::uint64_t seed) {
  if (spec.r < 1) throw std::invalid_argument("random_feasible: r must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = spec.n, r = spec.r, m = spec.m();
  auto gauss = [&](int rows, int cols) {
    Mat G(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) G(i, j) = nd(gen);
    return G;
  };
  for (int attempt = 0; attempt < 20; ++attempt) {
    Mat W = gauss(n, r);
    if (attempt % 2 == 1 && m > 0) {
      // start near the least-norm solution of Ax = b
      const Vec x0 = spec.A.transpose() * (spec.A * spec.A.transpose()).llt().solve(spec.b);
      W *= 0.1;
      W.col(0) += x0;
    }
    detail::normalize_sphere_rows(spec, W);
    try {
      ManifoldPoint pt = retract(spec, W);
      // Newton is only linear near degenerate points, so give it a longer run
      if (pt.residual > 1e-10 * (1.0 + pt.R.norm())) pt = retract(spec, pt.R, 2000);
      if (pt.residual <= 1e-10 * (1.0 + pt.R.norm())) return pt;
    } catch (const RetractionFailed&) {
    }
  }
  throw Infeasible("no point of M_r found");
}

inline ManifoldSpec perturb(const ManifoldSpec& spec, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0)) throw std::invalid_argument("perturb: epsilon must be positive");
  ManifoldSpec out = spec;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(spec.p());
  for (int k = 0; k < spec.p(); ++k) v(k) = nd(gen);
  if (v.size() > 0) v *= epsilon / v.norm();
  out.v = v;
  return out;
}

}  // namespace sdprlt
