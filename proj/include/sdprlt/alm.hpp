#pragma once

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "lifting.hpp"

namespace sdprlt {

struct AlmState {
  Vec lambda;
  SymMat mu;
  Vec mu_lin;
  double sigma = 1.0;
  double t = 1.0;
  int k = 0;
  int rgd_total = 0;
  int pg_total = 0;
  std::vector<int> rank_trace;
  std::vector<double> rmax_history;

  AugLagParams params() const { return {sigma, lambda, mu, mu_lin}; }
};

inline AlmState initial_state(const GeneralSdp& s, double sigma0) {
  AlmState st;
  const AugLagParams p = zero_params(s, sigma0);
  st.lambda = p.lambda;
  st.mu = p.mu;
  st.mu_lin = p.mu_lin;
  st.sigma = sigma0;
  st.t = 1.0 / sigma0;
  return st;
}

inline AlmState update_multipliers(AlmState st, const GeneralSdp& s, const SymMat& Y) {
  const LagEval ev = eval_lagrangian(s, Y, st.params(), false);
  st.lambda = ev.lam_plus;
  st.mu = ev.mu_plus;
  st.mu_lin = ev.mu_lin_plus;
  return st;
}

inline AlmState update_sigma(AlmState st, double Rp, double Rd) {
  if (Rd == 0.0 || Rp / Rd >= 2.0) st.sigma *= 1.5;
  else if (Rp / Rd <= 0.2) st.sigma /= 1.5;
  st.t = 1.0 / st.sigma;
  return st;
}

struct Residuals {
  double Rp = 0.0, Rd = 0.0, Rc = 0.0;
  double max() const { return std::max({Rp, Rd, Rc}); }
};

inline double primal_residual(const GeneralSdp& s, const SymMat& Y) {
  const Vec d = F_rhs(s);
  const double f2 = (F_apply(s, Y) - d).squaredNorm();
  const double e2 = (s.E.apply(Y) - s.E.rhs).squaredNorm();
  // cone entries count once per unordered pair
  const SymMat V = (-s.cone.apply(Y)).cwiseMax(0.0);
  const double c2 = 0.5 * (V.squaredNorm() + V.diagonal().squaredNorm()) +
                    (s.I_lin.rhs - s.I_lin.apply(Y)).cwiseMax(0.0).squaredNorm();
  const double scale = std::sqrt(d.squaredNorm() + s.E.rhs.squaredNorm() + s.I_lin.rhs.squaredNorm());
  return std::sqrt(f2 + e2 + c2) / (1.0 + scale);
}

inline double dual_residual(const SymMat& S) { return psd_project(-S).norm() / (1.0 + S.norm()); }

inline double complementarity_residual(const SymMat& Y, const SymMat& S) {
  return std::abs(frob_dot(Y, S)) / (1.0 + Y.norm() + S.norm());
}

inline Residuals residuals(const GeneralSdp& s, const SymMat& Y, const SymMat& S) {
  return {primal_residual(s, Y), dual_residual(S), complementarity_residual(Y, S)};
}

struct DualCertificate {
  Vec y;  // [A rows (m), vec(Y2) (m x N, column-major), binary rows (p), corner]
  Vec lambda;
  SymMat mu;
  Vec mu_lin;
  SymMat S;
  SymMat Y;
  double alpha = 0.0;
  double beta = 0.0;
  Vec mu_diag;
  double Rp = 0.0, Rd = 0.0, Rc = 0.0;
  bool exact = true;

  double rmax() const { return std::max({Rp, Rd, Rc}); }
};

namespace detail {

inline Mat range_basis(const Mat& P) {
  if (P.cols() == 0) return Mat(P.rows(), 0);
  Eigen::ColPivHouseholderQR<Mat> qr(P);
  qr.setThreshold(1e-12);
  return Mat(qr.householderQ()).leftCols(qr.rank());
}

inline Mat apply_J(const Mat& Qp, const Mat& X) {
  if (Qp.cols() == 0) return X;
  return X - Qp * (Qp.transpose() * X);
}

struct DiagFit {
  double alpha = 0.0;
  Vec mu;
};

// Least squares for the H0/H_k multipliers: min || J (W - a H0 - sum mu_k H_k) Rh ||.
inline DiagFit fit_diag_multipliers(const GeneralSdp& s, const Mat& Qp, const Mat& Rh, const SymMat& W) {
  const int n1 = s.N + 1, r1 = static_cast<int>(Rh.cols()), p = s.p();
  const Eigen::Index rows = static_cast<Eigen::Index>(n1) * r1;
  Mat M(rows, p + 1);
  auto put_col = [&](int c, const Mat& HR) {
    const Mat JHR = apply_J(Qp, HR);
    M.col(c) = Eigen::Map<const Vec>(JHR.data(), rows);
  };
  {
    Mat HR = Mat::Zero(n1, r1);
    HR.row(0) = Rh.row(0);
    put_col(0, HR);
  }
  for (int k = 0; k < p; ++k) {
    const int a = s.B[k] + 1;
    Mat HR = Mat::Zero(n1, r1);
    HR.row(0) = -0.5 * Rh.row(a);
    HR.row(a) = Rh.row(a) - 0.5 * Rh.row(0);
    put_col(k + 1, HR);
  }
  const Mat T = apply_J(Qp, W * Rh);
  const Vec rhs = Eigen::Map<const Vec>(T.data(), rows);
  Mat G = M.transpose() * M;
  const Vec g = M.transpose() * rhs;
  Vec sol;
  double jitter = 0.0;
  const double base = std::max(1.0, G.diagonal().maxCoeff());
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::LDLT<Mat> ldlt(G + jitter * Mat::Identity(p + 1, p + 1));
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Vec D = ldlt.vectorD();
      if (D.minCoeff() > 1e-14 * base) {
        sol = ldlt.solve(g);
        if (sol.allFinite()) break;
      }
    }
    jitter = jitter == 0.0 ? 1e-12 * base : jitter * 100.0;
    sol.resize(0);
  }
  if (sol.size() == 0) throw LeastSquaresSingular("multiplier fit");
  return {sol(0), sol.tail(p)};
}

}  // namespace detail

// Dual recovery at Y = Rh Rh^T: S = W - F*(y) where F* collects the manifold-kept constraints.
inline DualCertificate recover_duals(const GeneralSdp& s, const Mat& R, const AugLagParams& prm) {
  DualCertificate cert;
  const int N = s.N, m = s.m(), p = s.p();
  const Mat Rh = hat(R);
  cert.Y = symmetrize(Rh * Rh.transpose());
  const LagEval ev = eval_lagrangian(s, cert.Y, prm, true);
  cert.lambda = ev.lam_plus;
  cert.mu = ev.mu_plus;
  cert.mu_lin = ev.mu_lin_plus;

  Mat P(N + 1, m);
  if (m > 0) {
    P.row(0) = s.b.transpose();
    P.bottomRows(N) = -s.A.transpose();
  }
  const Mat Qp = detail::range_basis(P);
  const detail::DiagFit fit = detail::fit_diag_multipliers(s, Qp, Rh, ev.W);
  cert.alpha = fit.alpha;
  cert.mu_diag = fit.mu;

  SymMat Wp = ev.W;
  Wp(0, 0) -= fit.alpha;
  for (int k = 0; k < p; ++k) {
    const int a = s.B[k] + 1;
    Wp(a, a) -= fit.mu(k);
    Wp(0, a) += 0.5 * fit.mu(k);
    Wp(a, 0) += 0.5 * fit.mu(k);
  }
  cert.y = Vec::Zero(s.d0());
  double corner = fit.alpha;
  if (m > 0) {
    const Eigen::CompleteOrthogonalDecomposition<Mat> cod(P);
    const Mat Pp = cod.pseudoInverse();  // m x (N+1)
    const Mat M = Pp * Wp;
    const Mat Z = 2.0 * M - M * (P * Pp).transpose();
    cert.y.head(m) = -Z.col(0);
    const Mat Y2 = -Z.rightCols(N);
    cert.y.segment(m, m * N) = Eigen::Map<const Vec>(Y2.data(), m * N);
    corner += s.b.dot(Z.col(0));
  }
  cert.y.segment(m + m * N, p) = fit.mu;
  cert.y(s.d0() - 1) = corner;
  cert.S = symmetrize(ev.W - F_adjoint(s, cert.y));
  const Residuals res = residuals(s, cert.Y, cert.S);
  cert.Rp = res.Rp;
  cert.Rd = res.Rd;
  cert.Rc = res.Rc;
  return cert;
}

// At low rank the least-squares fit leaves y underdetermined. Semismooth Newton on
// 0.5 ||min(S, 0)||^2 + 0.5 ||S Rh||^2 over y picks a dual-feasible member when one exists.
// The certificate is replaced only if Rd and Rc both reach tol. y_warm carries the last
// iterate between calls.
inline bool refine_duals(const GeneralSdp& s, const Mat& R, DualCertificate& cert, double tol,
                         std::optional<Vec>& y_warm, int max_iters = 8) {
  const int d = s.d0(), n1 = s.N + 1;
  const Mat Rh = hat(R);
  const SymMat P = Rh * Rh.transpose();
  const SymMat W = cert.S + F_adjoint(s, cert.y);

  struct Eval {
    SymMat S;
    Vec lam;
    Mat V;
    double phi = 0.0;
  };
  auto eval = [&](const Vec& y) {
    Eval ev;
    ev.S = symmetrize(W - F_adjoint(s, y));
    Eigen::SelfAdjointEigenSolver<Mat> es(ev.S);
    ev.lam = es.eigenvalues();
    ev.V = es.eigenvectors();
    ev.phi = 0.5 * ev.lam.cwiseMin(0.0).squaredNorm() + 0.5 * (ev.S * Rh).squaredNorm();
    return ev;
  };

  Vec y = cert.y;
  Eval cur = eval(y);
  if (y_warm && y_warm->size() == d) {
    Eval alt = eval(*y_warm);
    if (alt.phi < cur.phi) {
      y = *y_warm;
      cur = std::move(alt);
    }
  }
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(2.0 * cur.phi) <= 0.1 * tol * (1.0 + cur.S.norm())) break;
    const Vec neg = cur.lam.cwiseMin(0.0);
    const Vec grad = -F_apply(s, symmetrize(cur.V * neg.asDiagonal() * cur.V.transpose() + cur.S * P));
    const double gn = grad.norm();
    if (gn < 1e-14 * (1.0 + W.norm())) break;

    // Clarke generalized Jacobian of min(., 0) in the eigenbasis of S
    Mat Om(n1, n1);
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n1; ++b) {
        const double la = cur.lam(a), lb = cur.lam(b);
        if (la < 0 && lb < 0) Om(a, b) = 1.0;
        else if (la >= 0 && lb >= 0) Om(a, b) = 0.0;
        else Om(a, b) = (std::min(la, 0.0) - std::min(lb, 0.0)) / (la - lb);
      }
    const double reg = 1e-10 + std::min(1e-2, gn);
    auto hess = [&](const Vec& v) {
      const SymMat D = F_adjoint(s, v);
      const Mat Dt = cur.V.transpose() * D * cur.V;
      const SymMat J = symmetrize(cur.V * Om.cwiseProduct(Dt) * cur.V.transpose() + D * P);
      return Vec(F_apply(s, J) + reg * v);
    };
    // conjugate gradients on (H + reg I) dy = -grad
    Vec dy = Vec::Zero(d), r = -grad, pdir = r;
    double rr = r.squaredNorm();
    const double cg_tol = std::min(1e-2, gn) * gn;
    for (int k = 0; k < 200 && std::sqrt(rr) > cg_tol; ++k) {
      const Vec Hp = hess(pdir);
      const double pHp = pdir.dot(Hp);
      if (!(pHp > 0)) break;
      const double a = rr / pHp;
      dy += a * pdir;
      r -= a * Hp;
      const double rr_new = r.squaredNorm();
      pdir = r + (rr_new / rr) * pdir;
      rr = rr_new;
    }
    if (!dy.allFinite() || dy.squaredNorm() == 0.0) break;

    double step = 1.0;
    const double slope = grad.dot(dy);
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      Eval nxt = eval(y + step * dy);
      if (nxt.phi <= cur.phi + 1e-4 * step * slope) {
        y += step * dy;
        cur = std::move(nxt);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  y_warm = y;
  const Residuals res = residuals(s, cert.Y, cur.S);
  if (std::max(res.Rd, res.Rc) >= tol) return false;
  cert.y = y;
  cert.S = cur.S;
  cert.Rd = res.Rd;
  cert.Rc = res.Rc;
  return true;
}

// Multipliers in the order of export_sparse: equalities, inequalities, nonneg pairs.
struct FlatMultipliers {
  Vec eq, ineq, nonneg;
};

inline FlatMultipliers flatten_multipliers(const GeneralSdp& s, const DualCertificate& c) {
  FlatMultipliers f;
  f.eq = Vec(c.y.size() + c.lambda.size());
  f.eq << c.y, c.lambda;
  std::vector<double> ineq, nn;
  const int base = s.cone.base, tot = s.cone.order();
  for (int a = 0; a < tot; ++a)
    for (int b = a; b < tot; ++b) {
      if (s.cone.mask(a, b) == 0.0) continue;
      const double v = (a == b ? 1.0 : 2.0) * c.mu(a, b);
      (b < base ? nn : ineq).push_back(v);
    }
  for (Eigen::Index k = 0; k < c.mu_lin.size(); ++k) ineq.push_back(c.mu_lin(k));
  f.ineq = Eigen::Map<const Vec>(ineq.data(), ineq.size());
  f.nonneg = Eigen::Map<const Vec>(nn.data(), nn.size());
  return f;
}

struct SolveOptions {
  double tol = 1e-6;
  double time_limit = 3600.0;
  int rank0 = 0;  // 0 means min(200, ceil(n/5))
  double sigma0 = 1.0;
  double sigma_min = 1.0;
  double sigma_max = 1e6;
  int pg_every = 5;
  int pg_inner_cap = 20;
  int rgd_cap = 50;
  std::uint64_t seed = 1;
  int max_outer = 5000;
  bool polish = true;
  bool scale_cost = true;
  double perturb_eps = 1e-6;
  int stall_limit = 5;
  std::optional<Mat> R0;
};

struct IterLog {
  int k = 0;
  double sigma = 0.0;
  int rank = 0;
  double f = 0.0;
  double Rp = 0.0, Rd = 0.0, Rc = 0.0;
  int rgd_iters = 0;
  bool pg = false;
  int ssn_iters = 0;
  double t_rgd = 0.0, t_pg = 0.0, t_dual = 0.0;
  std::string event;
};

inline std::string to_jsonl(const IterLog& r) {
  nlohmann::json j = {{"k", r.k},       {"sigma", r.sigma},   {"rank", r.rank},       {"f", r.f},
                      {"Rp", r.Rp},     {"Rd", r.Rd},         {"Rc", r.Rc},           {"rgd_iters", r.rgd_iters},
                      {"pg", r.pg},     {"ssn_iters", r.ssn_iters}, {"t_rgd", r.t_rgd}, {"t_pg", r.t_pg},
                      {"t_dual", r.t_dual}};
  if (!r.event.empty()) j["event"] = r.event;
  return j.dump();
}

struct RunReport {
  int alm_iters = 0;
  int rgd_iters = 0;
  int pg_steps = 0;
  int final_rank = 0;
  double objective = 0.0;
  double rmax = 0.0;
  double time = 0.0;
  double pg_time = 0.0;
  bool converged = false;
  bool time_limit_hit = false;
  int perturbations = 0;
  std::vector<int> rank_trace;
  std::vector<IterLog> log;
};

struct SolveResult {
  SymMat Y;
  Mat R;
  DualCertificate cert;
  RunReport report;
};

inline int default_rank0(int n) { return std::max(1, std::min(200, (n + 4) / 5)); }

inline SolveResult solve(const GeneralSdp& sdp, const SolveOptions& opt = {},
                         const std::function<void(const IterLog&)>& on_iter = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };

  const double scale = opt.scale_cost ? std::max(1.0, sdp.C.norm()) : 1.0;
  GeneralSdp ss = sdp;
  ss.C /= scale;
  const PreprocessContext ctx = preprocess(ss);

  const int r0 = opt.rank0 > 0 ? opt.rank0 : default_rank0(sdp.N);
  ManifoldSpec spec = manifold_spec(sdp, r0);
  Mat R = opt.R0 ? *opt.R0 : random_feasible(spec, opt.seed).R;
  if (opt.R0) {
    spec = with_rank(spec, static_cast<int>(R.cols()));
    if (!on_manifold(spec, R, 1e-8)) R = retract(spec, R).R;
  }

  AlmState st = initial_state(ss, opt.sigma0);
  SolveResult out;
  RunReport& rep = out.report;
  double rmax_prev = 1.0;
  // shrinks every outer step so a stalled rmax cannot keep the subproblem loose
  double inner_tol = 0.1;
  int stalls = 0;

  auto do_pg = [&](IterLog& lg) -> bool {
    const auto tp = clock::now();
    try {
      std::optional<Vec> warm;
      try {
        Mat Pm(ss.N + 1, ss.m());
        if (ss.m() > 0) {
          Pm.row(0) = ss.b.transpose();
          Pm.bottomRows(ss.N) = -ss.A.transpose();
        }
        const Mat Rh = hat(R);
        const LagEval ev = eval_lagrangian(ss, Rh * Rh.transpose(), st.params(), true);
        const detail::DiagFit fit = detail::fit_diag_multipliers(ss, detail::range_basis(Pm), Rh, ev.W);
        warm = warm_start_duals(fit.alpha, fit.mu, 0.0, SymMat::Zero(1, 1), st.t).y;
      } catch (const LeastSquaresSingular&) {
      }
      const PgResult pg = pg_step(ss, ctx, spec, R, st.params(), warm);
      R = pg.point.R;
      spec = pg.spec;
      ++st.pg_total;
      st.rank_trace.push_back(pg.rank);
      lg.pg = true;
      lg.ssn_iters += pg.ssn.newton_iters;
      lg.t_pg += elapsed(tp);
      rep.pg_time += elapsed(tp);
      return true;
    } catch (const Error& e) {
      lg.event += std::string(lg.event.empty() ? "" : "; ") + e.what();
      lg.t_pg += elapsed(tp);
      rep.pg_time += elapsed(tp);
      return false;
    }
  };

  DualCertificate cert;
  std::optional<Vec> y_refined;
  for (int k = 1; k <= opt.max_outer; ++k) {
    st.k = k;
    IterLog lg;
    lg.k = k;
    bool singular = false, rgd_ok = true;
    const auto tr = clock::now();
    try {
      RgdOptions ro;
      ro.max_iters = opt.rgd_cap;
      ro.grad_tol = inner_tol;
      auto [pt, rr] = rgd_solve(ss, spec, R, st.params(), ro);
      R = pt.R;
      st.rgd_total += rr.iterations;
      lg.rgd_iters = rr.iterations;
      rgd_ok = !rr.line_search_failed || rr.iterations > 0;
    } catch (const SingularSystem& e) {
      singular = true;
      lg.event = e.what();
    } catch (const RetractionFailed& e) {
      singular = true;
      lg.event = e.what();
    }
    lg.t_rgd = elapsed(tr);

    bool pg_done = false, pg_ok = true;
    if (singular || k % opt.pg_every == 0 || !rgd_ok) {
      pg_ok = pg_done = do_pg(lg);
      // RGD cannot move at a singular point, so PG carries the subproblem alone
      for (int j = 1; pg_ok && singular && j < opt.pg_inner_cap; ++j) {
        const SymMat Yprev = gram_hat(R);
        if (!do_pg(lg)) break;
        if ((gram_hat(R) - Yprev).norm() * st.sigma <= inner_tol * (1.0 + Yprev.norm())) break;
      }
    }
    if (singular) {
      // move off the degenerate point on a perturbed variety
      spec = perturb(spec, opt.perturb_eps, opt.seed + static_cast<std::uint64_t>(k));
      try {
        R = retract(spec, R).R;
        ++rep.perturbations;
      } catch (const RetractionFailed&) {
        spec.v.setZero();
      }
    }
    if (!rgd_ok && !pg_ok) {
      if (++stalls >= opt.stall_limit) throw SubproblemStalled("RGD and PG both failed " + std::to_string(stalls) + " times");
    } else {
      stalls = 0;
    }

    const auto td = clock::now();
    auto certify = [&] {
      cert = recover_duals(sdp, R, scaled(st.params(), scale));
      if (cert.Rp < opt.tol && cert.Rd >= opt.tol) refine_duals(sdp, R, cert, opt.tol, y_refined);
    };
    certify();
    if (cert.rmax() < opt.tol && !pg_done && opt.polish) {
      const Mat Rkeep = R;
      const ManifoldSpec skeep = spec;
      if (do_pg(lg)) {
        pg_done = true;
        certify();
      } else {
        R = Rkeep;
        spec = skeep;
      }
    }
    lg.t_dual = elapsed(td);

    st.lambda = cert.lambda / scale;
    st.mu = cert.mu / scale;
    st.mu_lin = cert.mu_lin / scale;
    st = update_sigma(st, cert.Rp, cert.Rd);
    st.sigma = std::clamp(st.sigma, opt.sigma_min, opt.sigma_max);
    st.t = 1.0 / st.sigma;
    rmax_prev = cert.rmax();
    inner_tol = std::max(0.1 * opt.tol, std::min(0.1 * rmax_prev, 0.9 * inner_tol));
    st.rmax_history.push_back(rmax_prev);

    lg.sigma = st.sigma;
    lg.rank = static_cast<int>(R.cols());
    lg.f = frob_dot(sdp.C, cert.Y);
    lg.Rp = cert.Rp;
    lg.Rd = cert.Rd;
    lg.Rc = cert.Rc;
    rep.log.push_back(lg);
    if (on_iter) on_iter(lg);

    if (cert.rmax() < opt.tol && (pg_done || !opt.polish)) {
      rep.converged = true;
      break;
    }
    if (elapsed(t0) > opt.time_limit) {
      rep.time_limit_hit = true;
      cert.exact = false;
      break;
    }
  }
  if (!rep.converged) cert.exact = false;

  rep.alm_iters = st.k;
  rep.rgd_iters = st.rgd_total;
  rep.pg_steps = st.pg_total;
  rep.rank_trace = st.rank_trace;
  out.Y = cert.Y;
  out.R = R;
  // Eigenvalues below tol * lambda_max are within the solve accuracy and not counted.
  rep.final_rank = static_cast<int>(psd_factorize_hat(cert.Y, opt.tol).cols());
  rep.objective = frob_dot(sdp.C, cert.Y);
  rep.rmax = cert.rmax();
  rep.time = elapsed(t0);
  out.cert = std::move(cert);
  return out;
}

}  // namespace sdprlt
