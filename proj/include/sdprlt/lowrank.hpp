#pragma once

#include <deque>
#include <functional>

#include "manifold.hpp"

namespace sdprlt {

struct AugLagParams {
  double sigma = 1.0;
  Vec lambda;    // E multipliers
  SymMat mu;     // cone multipliers (masked, >= 0)
  Vec mu_lin;    // lifted-inequality multipliers (>= 0)
};

inline AugLagParams zero_params(const GeneralSdp& s, double sigma = 1.0) {
  AugLagParams p;
  p.sigma = sigma;
  p.lambda = Vec::Zero(s.E.size());
  p.mu = SymMat::Zero(s.cone.order(), s.cone.order());
  p.mu_lin = Vec::Zero(s.I_lin.size());
  return p;
}

inline AugLagParams scaled(AugLagParams p, double c) {
  p.sigma *= c;
  p.lambda *= c;
  p.mu *= c;
  p.mu_lin *= c;
  return p;
}

// L_sigma(Y; lambda, mu) with the updated multipliers and the gradient in Y.
struct LagEval {
  double value = 0.0;
  Vec lam_plus;
  SymMat mu_plus;
  Vec mu_lin_plus;
  SymMat W;  // C - E*(lam_plus) - cone*(mu_plus) - I_lin*(mu_lin_plus)
};

inline LagEval eval_lagrangian(const GeneralSdp& s, const SymMat& Y, const AugLagParams& prm, bool with_grad = true) {
  LagEval ev;
  const double sig = prm.sigma;
  ev.lam_plus = prm.lambda - sig * (s.E.apply(Y) - s.E.rhs);
  ev.mu_plus = (prm.mu - sig * s.cone.apply(Y)).cwiseMax(0.0).cwiseProduct(s.cone.mask);
  ev.mu_lin_plus = (prm.mu_lin - sig * (s.I_lin.apply(Y) - s.I_lin.rhs)).cwiseMax(0.0);
  ev.value = frob_dot(s.C, Y) +
             (ev.lam_plus.squaredNorm() + ev.mu_plus.squaredNorm() + ev.mu_lin_plus.squaredNorm()) / (2.0 * sig);
  if (with_grad) {
    ev.W = s.C - s.cone.adjoint(ev.mu_plus);
    s.E.add_adjoint(-ev.lam_plus, ev.W);
    s.I_lin.add_adjoint(-ev.mu_lin_plus, ev.W);
  }
  if (!std::isfinite(ev.value)) throw NonFinite("augmented Lagrangian value");
  return ev;
}

inline double f_value(const GeneralSdp& s, const Mat& R, const AugLagParams& prm) {
  return eval_lagrangian(s, gram_hat(R), prm, false).value;
}

inline std::pair<double, Mat> f_and_grad(const GeneralSdp& s, const Mat& R, const AugLagParams& prm) {
  const Mat Rh = hat(R);
  const LagEval ev = eval_lagrangian(s, Rh * Rh.transpose(), prm, true);
  Mat g = 2.0 * (ev.W * Rh).bottomRows(R.rows());
  if (!g.allFinite()) throw NonFinite("gradient");
  return {ev.value, g};
}

struct RgdOptions {
  int max_iters = 50;
  double grad_tol = 1e-6;
  int window = 5;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 25;
  double step_min = 1e-10;
  double step_max = 1e10;
  double init_step = 0.0;  // 0 means 1/sigma
};

struct RgdReport {
  int iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> f_trace;
  std::vector<double> steps;
  bool line_search_failed = false;
};

struct RgdTraceRecord {
  int iter;
  double f, grad_norm, step;
};

inline std::pair<ManifoldPoint, RgdReport> rgd_solve(const GeneralSdp& s, const ManifoldSpec& spec, const Mat& R0,
                                                     const AugLagParams& prm, const RgdOptions& opt,
                                                     const std::function<void(const RgdTraceRecord&)>& trace = {}) {
  RgdReport rep;
  ManifoldPoint cur{R0, feasibility_residual(spec, R0)};
  if (cur.residual > 1e-8 * (1.0 + R0.norm())) cur = retract(spec, R0);
  auto [f, eg] = f_and_grad(s, cur.R, prm);
  Mat g = tangent_project(spec, cur.R, eg);
  double gn = g.norm();
  rep.f_trace.push_back(f);
  rep.grad_norm = gn;
  double step = opt.init_step > 0 ? opt.init_step : 1.0 / prm.sigma;
  std::deque<double> hist{f};
  for (int it = 0; it < opt.max_iters && gn > opt.grad_tol; ++it) {
    const double fref = *std::max_element(hist.begin(), hist.end());
    double t = std::clamp(step, opt.step_min, opt.step_max);
    bool ok = false;
    ManifoldPoint next;
    double fn = 0.0;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
      next = retract(spec, cur.R - t * g);
      fn = f_value(s, next.R, prm);
      if (fn <= fref - opt.armijo * t * gn * gn) {
        ok = true;
        break;
      }
      t *= opt.backtrack;
    }
    if (!ok) {
      rep.line_search_failed = true;
      break;
    }
    auto [f2, eg2] = f_and_grad(s, next.R, prm);
    Mat g2 = tangent_project(spec, next.R, eg2);
    const Mat S = next.R - cur.R;
    const Mat Yd = g2 - tangent_project(spec, next.R, g);
    const double sy = frob_dot(S, Yd);
    if (sy > 0) step = (it % 2 == 0) ? S.squaredNorm() / sy : sy / Yd.squaredNorm();
    else step = 2.0 * t;
    cur = next;
    f = f2;
    g = std::move(g2);
    gn = g.norm();
    ++rep.iterations;
    rep.f_trace.push_back(f);
    rep.steps.push_back(t);
    rep.grad_norm = gn;
    hist.push_back(f);
    if (static_cast<int>(hist.size()) > opt.window) hist.pop_front();
    if (trace) trace({rep.iterations, f, gn, t});
  }
  return {cur, rep};
}

}  // namespace sdprlt
