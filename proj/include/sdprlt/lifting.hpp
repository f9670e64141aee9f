#pragma once

#include <optional>

#include "lowrank.hpp"

namespace sdprlt {

// K = [1, e^T/2; 0, I/2] and its closed-form inverse [1, -e^T; 0, 2I].
inline Mat K_matrix(int N) {
  Mat K = 0.5 * Mat::Identity(N + 1, N + 1);
  K.row(0).setConstant(0.5);
  K(0, 0) = 1.0;
  return K;
}

inline Mat K_inverse(int N) {
  Mat K = 2.0 * Mat::Identity(N + 1, N + 1);
  K.row(0).setConstant(-1.0);
  K(0, 0) = 1.0;
  return K;
}

inline SymMat H0_matrix(int N) {
  SymMat H = SymMat::Zero(N + 1, N + 1);
  H(0, 0) = 1.0;
  return H;
}

// <H_k, Y> = X_kk - x_k for variable k (0-based).
inline SymMat Hk_matrix(int N, int k) {
  SymMat H = SymMat::Zero(N + 1, N + 1);
  H(0, k + 1) = H(k + 1, 0) = -0.5;
  H(k + 1, k + 1) = 1.0;
  return H;
}

struct PreprocessContext {
  int N = 0;
  Mat P;   // [b^T; -A^T]
  Mat Nm;  // K P
  Mat Qn;  // orthonormal basis of range(Nm)
  std::vector<int> idx;  // positions picked by D: 0 and B_k + 1
  Vec q;                 // right-hand side of D(Y) = e
  bool rank_deficient = false;
  double identity_error = 0.0;

  SymMat applyJ(const SymMat& X) const {
    if (Qn.cols() == 0) return X;
    const Mat XQ = X * Qn;
    const Mat QtXQ = Qn.transpose() * XQ;
    SymMat out = X - XQ * Qn.transpose() - Qn * XQ.transpose() + Qn * QtXQ * Qn.transpose();
    return symmetrize(out);
  }

  Mat J() const { return Mat::Identity(N + 1, N + 1) - Qn * Qn.transpose(); }

  Vec D(const SymMat& Y) const {
    Vec v(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) v(k) = Y(idx[k], idx[k]);
    return v;
  }

  SymMat Dadj(const Vec& y) const {
    SymMat out = SymMat::Zero(N + 1, N + 1);
    for (std::size_t k = 0; k < idx.size(); ++k) out(idx[k], idx[k]) += y(k);
    return out;
  }
};

inline PreprocessContext preprocess(const GeneralSdp& s, bool strict = false) {
  PreprocessContext ctx;
  const int N = s.N, m = s.m();
  ctx.N = N;
  ctx.P = Mat(N + 1, m);
  if (m > 0) {
    ctx.P.row(0) = s.b.transpose();
    ctx.P.bottomRows(N) = -s.A.transpose();
  }
  ctx.Nm = K_matrix(N) * ctx.P;
  if (m > 0) {
    Eigen::ColPivHouseholderQR<Mat> qr(ctx.Nm);
    qr.setThreshold(1e-12);
    const int rk = static_cast<int>(qr.rank());
    ctx.rank_deficient = rk < m;
    if (ctx.rank_deficient && strict) throw RankDeficientP("rank " + std::to_string(rk) + " < " + std::to_string(m));
    ctx.Qn = Mat(qr.householderQ()).leftCols(rk);
  } else {
    ctx.Qn = Mat(N + 1, 0);
  }
  ctx.idx.push_back(0);
  for (int i : s.B) ctx.idx.push_back(i + 1);
  ctx.q = Vec::Ones(ctx.idx.size());

  // K H0 K^T = e1 e1^T and 4 K H_k K^T + K H0 K^T = e_k e_k^T, using columns of K.
  const Mat K = K_matrix(N);
  const Vec k0 = K.col(0);
  const SymMat KH0K = k0 * k0.transpose();
  double err = (KH0K - H0_matrix(N)).cwiseAbs().maxCoeff();
  for (int kk = 0; kk < N; ++kk) {
    const Vec kc = K.col(kk + 1);
    // K H_k K^T = -1/2 (k0 kc^T + kc k0^T) + kc kc^T
    const SymMat KHK = -0.5 * (k0 * kc.transpose() + kc * k0.transpose()) + kc * kc.transpose();
    SymMat diff = 4.0 * KHK + KH0K;
    diff(kk + 1, kk + 1) -= 1.0;
    diff(0, 0) -= 0.0;
    err = std::max(err, diff.cwiseAbs().maxCoeff());
  }
  ctx.identity_error = err;
  return ctx;
}

struct SsnOptions {
  int max_newton = 50;
  int max_cg = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
};

struct SsnReport {
  int newton_iters = 0;
  int cg_iters = 0;
  double residual = 0.0;
  bool warm_started = false;
};

struct SsnResult {
  SymMat Yhat;
  Vec y;
  double y0 = 0.0;
  SsnReport report;
};

namespace detail {

struct SsnPoint {
  Vec y;
  SymMat Yhat;
  Vec grad;
  double theta = 0.0;
  Vec lam;
  Mat Pidx;  // rows idx of J * eigenvectors
};

inline SsnPoint ssn_eval(const PreprocessContext& ctx, const SymMat& Ghat, const Vec& y) {
  SsnPoint pt;
  pt.y = y;
  const SymMat X = ctx.applyJ(Ghat + ctx.Dadj(y));
  Eigen::SelfAdjointEigenSolver<Mat> es(X);
  pt.lam = es.eigenvalues().reverse();
  const Mat V = es.eigenvectors().rowwise().reverse();
  const Vec lp = pt.lam.cwiseMax(0.0);
  Eigen::Index r = 0;
  while (r < lp.size() && lp(r) > 0) ++r;
  const Mat Vp = V.leftCols(r);
  pt.Yhat = symmetrize(Vp * lp.head(r).asDiagonal() * Vp.transpose());
  pt.grad = ctx.D(pt.Yhat) - ctx.q;
  pt.theta = 0.5 * lp.squaredNorm() - ctx.q.dot(y);
  // J V restricted to the rows picked by D
  Mat JV = V;
  if (ctx.Qn.cols() > 0) JV -= ctx.Qn * (ctx.Qn.transpose() * V);
  pt.Pidx = Mat(ctx.idx.size(), V.cols());
  for (std::size_t k = 0; k < ctx.idx.size(); ++k) pt.Pidx.row(k) = JV.row(ctx.idx[k]);
  return pt;
}

}  // namespace detail

// Projection of Ghat onto {D(Y) = e, <NN^T, Y> = 0, Y psd} via its dual.
inline SsnResult ssn_project(const PreprocessContext& ctx, const SymMat& Ghat, double y0_init, const Vec& y_init,
                             double tol, const SsnOptions& opt = {}) {
  const int d = static_cast<int>(ctx.idx.size());
  Vec y = y_init.size() == d ? y_init : Vec::Zero(d);
  SsnResult out;
  out.report.warm_started = y_init.size() == d && y_init.squaredNorm() > 0;
  (void)y0_init;
  detail::SsnPoint cur = detail::ssn_eval(ctx, Ghat, y);
  double res = cur.grad.norm();
  int it = 0;
  while (res > tol) {
    if (it >= opt.max_newton)
      throw MaxNewtonIters("residual " + sci(res) + " after " + std::to_string(it) + " iterations");
    const Vec& lam = cur.lam;
    const Eigen::Index nn = lam.size();
    Eigen::Index r = 0;
    while (r < nn && lam(r) > 0) ++r;
    const Mat P1 = cur.Pidx.leftCols(r), P2 = cur.Pidx.rightCols(nn - r);
    Mat Om = Mat::Zero(r, nn - r);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < nn - r; ++j) Om(i, j) = lam(i) / (lam(i) - lam(r + j));
    // a failed line search restarts with a larger Jacobian jitter
    detail::SsnPoint next;
    bool ok = false;
    for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
      const double eps = (std::min(1e-6, 1e-2 * res) + 1e-12) * std::pow(100.0, attempt);
      auto matvec = [&](const Vec& h) {
        const Mat hP1 = h.asDiagonal() * P1;
        const Mat M1 = P1.transpose() * hP1;
        const Mat M2 = Om.cwiseProduct(hP1.transpose() * P2);
        Vec out_v = (P1 * M1).cwiseProduct(P1).rowwise().sum() + 2.0 * (P1 * M2).cwiseProduct(P2).rowwise().sum();
        return Vec(out_v + eps * h);
      };
      // exact diagonal preconditioner
      Vec pre(d);
      {
        const Mat P1s = P1.cwiseAbs2(), P2s = P2.cwiseAbs2();
        const Vec s1 = P1s.rowwise().sum();
        pre = s1.cwiseAbs2() + 2.0 * (P1s * Om).cwiseProduct(P2s).rowwise().sum();
        pre.array() += eps;
        pre = pre.cwiseMax(1e-12);
      }
      // preconditioned CG on V d = -grad
      Vec dir = Vec::Zero(d), rr = -cur.grad, z = rr.cwiseQuotient(pre), pp = z;
      double rz = rr.dot(z);
      const double cg_tol = std::min(0.1, std::sqrt(res)) * res;
      for (int k = 0; k < opt.max_cg && rr.norm() > cg_tol; ++k) {
        const Vec Vp = matvec(pp);
        const double pVp = pp.dot(Vp);
        if (!(pVp > 0)) {
          if (k == 0) dir = -cur.grad;
          break;
        }
        const double a = rz / pVp;
        dir += a * pp;
        rr -= a * Vp;
        z = rr.cwiseQuotient(pre);
        const double rz2 = rr.dot(z);
        pp = z + (rz2 / rz) * pp;
        rz = rz2;
        ++out.report.cg_iters;
      }
      // Armijo on the dual objective
      const double slope = cur.grad.dot(dir);
      double step = 1.0;
      for (int bt = 0; bt < 40; ++bt) {
        next = detail::ssn_eval(ctx, Ghat, cur.y + step * dir);
        if (next.theta <= cur.theta + opt.armijo * step * slope || next.grad.norm() < res * 1e-3) {
          ok = true;
          break;
        }
        step *= opt.backtrack;
      }
    }
    ++it;
    if (!ok) throw CGBreakdown("no descent along Newton direction, residual " + sci(res));
    cur = std::move(next);
    res = cur.grad.norm();
  }
  out.Yhat = cur.Yhat;
  out.y = cur.y;
  out.report.newton_iters = it;
  out.report.residual = res;
  if (ctx.Qn.cols() > 0) {
    const SymMat NN = ctx.Nm * ctx.Nm.transpose();
    const SymMat S2 = cur.Yhat - Ghat - ctx.Dadj(cur.y);
    out.y0 = frob_dot(S2, NN) / NN.squaredNorm();
  }
  return out;
}

struct WarmStart {
  double y0 = 0.0;
  Vec y;
  SymMat S2;
};

inline WarmStart warm_start_duals(double alpha, const Vec& mu, double beta, const SymMat& S1, double t) {
  WarmStart w;
  w.y0 = t * beta;
  w.y = Vec(mu.size() + 1);
  w.y(0) = t * (alpha - 0.25 * mu.sum());
  w.y.tail(mu.size()) = 0.25 * t * mu;
  const Mat K = K_matrix(static_cast<int>(S1.rows()) - 1);
  w.S2 = t * congruence(S1, K);
  return w;
}

struct PgOptions {
  double ssn_tol = 1e-9;
  int max_halvings = 5;
  double rank_tol = 1e-8;
  SsnOptions ssn;
};

struct PgResult {
  ManifoldPoint point;
  ManifoldSpec spec;
  SsnReport ssn;
  double L0 = 0.0, L1 = 0.0;
  double t = 0.0;
  int halvings = 0;
  int rank = 0;
  SymMat Y1;
};

inline PgResult pg_step(const GeneralSdp& s, const PreprocessContext& ctx, const ManifoldSpec& spec, const Mat& R,
                        const AugLagParams& prm, const std::optional<Vec>& warm_y = std::nullopt,
                        const PgOptions& opt = {}) {
  PgResult out;
  const int N = s.N;
  const SymMat Y0 = gram_hat(R);
  const LagEval ev = eval_lagrangian(s, Y0, prm, true);
  out.L0 = ev.value;
  const Mat K = K_matrix(N), Kinv = K_inverse(N);
  const SymMat Yh0 = congruence(Y0, Kinv.transpose());
  const SymMat KWK = congruence(ev.W, K);
  double t = 1.0 / prm.sigma;
  bool accepted = false;
  SsnResult ssn;
  SymMat Y1;
  for (int h = 0; h <= opt.max_halvings; ++h) {
    const SymMat Ghat = Yh0 - t * KWK;
    const Vec y_init = warm_y ? Vec(*warm_y * (t * prm.sigma)) : Vec::Zero(ctx.idx.size());
    ssn = ssn_project(ctx, Ghat, 0.0, y_init, opt.ssn_tol * (1.0 + Ghat.norm()), opt.ssn);
    Y1 = congruence(ssn.Yhat, K.transpose());
    out.L1 = eval_lagrangian(s, Y1, prm, false).value;
    // the projection is only exact to the SSN tolerance, which bounds the attainable decrease test
    const double slack = 1e-10 * (1.0 + std::abs(out.L0)) + 10.0 * opt.ssn_tol * (1.0 + Ghat.norm()) * KWK.norm();
    if (out.L1 <= out.L0 + slack) {
      accepted = true;
      break;
    }
    t *= 0.5;
    ++out.halvings;
  }
  out.t = t;
  out.ssn = ssn.report;
  if (!accepted) throw DescentViolated("L rose from " + sci(out.L0) + " by " + sci(out.L1 - out.L0));
  Y1(0, 0) = 1.0;
  const Mat R1 = psd_factorize_hat(Y1, opt.rank_tol);
  out.rank = static_cast<int>(R1.cols());
  out.spec = with_rank(spec, out.rank);
  out.spec.v.setZero();
  out.point = retract(out.spec, R1);
  out.Y1 = Y1;
  return out;
}

}  // namespace sdprlt
