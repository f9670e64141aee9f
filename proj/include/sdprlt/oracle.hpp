#pragma once

// Reference implementations used to cross-check the solver. They share the data
// types with the library but none of its numerical kernels beyond eigensolves.

#include <functional>
#include <istream>
#include <sstream>

#include "model.hpp"

namespace sdprlt::oracle {

// ---- brute-force enumeration ----

struct OracleResult {
  double value = std::numeric_limits<double>::infinity();
  Vec x;
  std::vector<Vec> argmins;
  long long count = 0;  // assignments enumerated
  long long feasible = 0;
};

struct BruteForceOptions {
  double feas_tol = 1e-9;
  double tie_tol = 1e-9;
  int inner_iters = 20000;
  double inner_tol = 1e-9;
};

namespace detail {

// Euclidean projection onto {x >= 0, A x = b, G x <= d} by Dykstra over the
// individual pieces; returns false when the set looks empty.
inline bool project_polyhedron(const Mat& A, const Vec& b, const Mat& G, const Vec& d, Vec& x, double tol) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(A.rows()), l = static_cast<int>(G.rows());
  Eigen::CompleteOrthogonalDecomposition<Mat> cod;
  if (m > 0) cod.compute(A);
  const int pieces = 2 + l;
  std::vector<Vec> inc(pieces, Vec::Zero(n));
  Vec z = x;
  for (int it = 0; it < 100000; ++it) {
    const Vec prev = z;
    for (int k = 0; k < pieces; ++k) {
      const Vec y = z + inc[k];
      Vec p = y;
      if (k == 0) p = y.cwiseMax(0.0);
      else if (k == 1) {
        if (m > 0) p = y - cod.solve(A * y - b);
      } else {
        const Vec g = G.row(k - 2).transpose();
        const double viol = g.dot(y) - d(k - 2);
        if (viol > 0) p = y - (viol / g.squaredNorm()) * g;
      }
      inc[k] = y - p;
      z = p;
    }
    if ((z - prev).norm() <= tol * (1.0 + z.norm())) break;
  }
  x = z;
  bool ok = (x.array() >= -1e-7).all();
  if (m > 0) ok = ok && (A * x - b).cwiseAbs().maxCoeff() <= 1e-7 * (1.0 + b.norm());
  if (l > 0) ok = ok && (G * x - d).maxCoeff() <= 1e-7 * (1.0 + d.norm());
  return ok;
}

// Accelerated projected gradient for min x^T Q x + 2 q^T x over the polyhedron.
inline bool inner_qp(const SymMat& Q, const Vec& q, const Mat& A, const Vec& b, const Mat& G, const Vec& d, Vec& x,
                     const BruteForceOptions& opt) {
  const int n = static_cast<int>(q.size());
  if (n == 0) return (A.rows() == 0 || b.cwiseAbs().maxCoeff() <= opt.feas_tol) &&
                     (G.rows() == 0 || d.minCoeff() >= -opt.feas_tol);
  x = Vec::Zero(n);
  if (!project_polyhedron(A, b, G, d, x, 1e-13)) return false;
  Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
  const double L = std::max(2.0 * es.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
  Vec yk = x, xprev = x;
  double tk = 1.0;
  for (int it = 0; it < opt.inner_iters; ++it) {
    Vec xn = yk - (2.0 * (Q * yk + q)) / L;
    project_polyhedron(A, b, G, d, xn, 1e-13);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    yk = xn + ((tk - 1.0) / tn) * (xn - xprev);
    const double step = (xn - xprev).norm();
    xprev = xn;
    tk = tn;
    if (step <= opt.inner_tol * (1.0 + xn.norm())) break;
  }
  x = xprev;
  return true;
}

inline bool quad_ok(const MbqpInstance& inst, const Vec& x, double tol) {
  for (const auto& qc : inst.quad_cons) {
    const double v = x.dot(qc.A * x) + qc.b.dot(x) + qc.c;
    if (qc.sense == LiftedQuadCon::Sense::Eq ? std::abs(v) > tol : v > tol) return false;
  }
  return true;
}

}  // namespace detail

// Exact minimum over binary assignments. Continuous variables (if any) are
// handled by a convex inner QP per assignment, exact only when their block of
// Q is positive semidefinite.
inline OracleResult brute_force_mbqp(const MbqpInstance& inst, const BruteForceOptions& opt = {}) {
  const int n = inst.n, p = inst.p();
  if (p > 20) throw TooLarge("brute force limited to 20 binaries, got " + std::to_string(p));
  std::vector<int> cont;
  {
    std::vector<char> isB(n, 0);
    for (int i : inst.B) isB[i] = 1;
    for (int i = 0; i < n; ++i)
      if (!isB[i]) cont.push_back(i);
  }
  const int nc = static_cast<int>(cont.size());
  OracleResult res;
  Vec x = Vec::Zero(n);
  const long long total = 1LL << p;
  for (long long mask = 0; mask < total; ++mask) {
    ++res.count;
    for (int k = 0; k < p; ++k) x(inst.B[k]) = static_cast<double>((mask >> k) & 1LL);
    if (nc == 0) {
      if (inst.m() > 0 && (inst.A * x - inst.b).cwiseAbs().maxCoeff() > opt.feas_tol) continue;
      if (inst.l() > 0 && (inst.G * x - inst.d).maxCoeff() > opt.feas_tol) continue;
    } else {
      Mat Ac(inst.m(), nc), Gc(inst.l(), nc);
      SymMat Qcc(nc, nc);
      Vec qc(nc);
      Vec xb = x;
      for (int i : cont) xb(i) = 0.0;
      for (int a = 0; a < nc; ++a) {
        Ac.col(a) = inst.A.col(cont[a]);
        Gc.col(a) = inst.G.col(cont[a]);
        for (int c = 0; c < nc; ++c) Qcc(a, c) = inst.Q(cont[a], cont[c]);
        qc(a) = inst.c(cont[a]) + inst.Q.row(cont[a]).dot(xb);
      }
      Vec xc;
      if (!detail::inner_qp(Qcc, qc, Ac, inst.b - inst.A * xb, Gc, inst.d - inst.G * xb, xc, opt)) continue;
      for (int a = 0; a < nc; ++a) x(cont[a]) = xc(a);
    }
    if (!detail::quad_ok(inst, x, opt.feas_tol)) continue;
    ++res.feasible;
    const double v = inst.objective(x);
    if (v < res.value - opt.tie_tol) {
      res.value = v;
      res.x = x;
      res.argmins.assign(1, x);
    } else if (std::abs(v - res.value) <= opt.tie_tol) {
      res.argmins.push_back(x);
    }
  }
  return res;
}

// ---- Dykstra alternating projections ----

struct ConvexSet {
  std::string name;
  std::function<SymMat(const SymMat&)> project;
  bool affine = false;
};

inline SymMat psd_part(const SymMat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const Vec l = es.eigenvalues().cwiseMax(0.0);
  const Mat& V = es.eigenvectors();
  const Mat out = V * l.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

inline ConvexSet psd_set() { return {"psd", psd_part, false}; }

inline ConvexSet nonneg_set(const SymMat& mask) {
  return {"nonneg",
          [mask](const SymMat& Y) {
            SymMat out = Y;
            for (Eigen::Index i = 0; i < Y.rows(); ++i)
              for (Eigen::Index j = 0; j < Y.cols(); ++j)
                if (mask(i, j) != 0.0) out(i, j) = std::max(0.0, Y(i, j));
            return out;
          },
          false};
}

// {Y : <A_k, Y> = b_k} for symmetric A_k, by least squares on the Gram system.
inline ConvexSet affine_set(std::vector<SymMat> As, Vec bs, std::string name = "affine") {
  const int K = static_cast<int>(As.size());
  Mat Gm(K, K);
  for (int a = 0; a < K; ++a)
    for (int c = 0; c < K; ++c) Gm(a, c) = As[a].cwiseProduct(As[c]).sum();
  auto cod = std::make_shared<Eigen::CompleteOrthogonalDecomposition<Mat>>(Gm);
  auto shared = std::make_shared<std::vector<SymMat>>(std::move(As));
  return {std::move(name),
          [shared, bs, cod](const SymMat& Y) {
            const auto& A = *shared;
            Vec r(A.size());
            for (std::size_t k = 0; k < A.size(); ++k) r(k) = A[k].cwiseProduct(Y).sum() - bs(k);
            const Vec z = cod->solve(r);
            SymMat out = Y;
            for (std::size_t k = 0; k < A.size(); ++k) out -= z(k) * A[k];
            return out;
          },
          true};
}

inline ConvexSet hyperplane_set(const SymMat& A, double b) { return affine_set({A}, Vec::Constant(1, b), "hyperplane"); }

// {Y : Y_ii = v_i for i in idx}
inline ConvexSet diag_pattern_set(std::vector<int> idx, Vec vals) {
  return {"diag",
          [idx, vals](const SymMat& Y) {
            SymMat out = Y;
            for (std::size_t k = 0; k < idx.size(); ++k) out(idx[k], idx[k]) = vals(k);
            return out;
          },
          true};
}

// {Y : Y P = 0}; its projection is (I - PP^+) Y (I - PP^+).
inline ConvexSet zero_product_set(const Mat& P) {
  if (P.cols() == 0) return {"zero_product", [](const SymMat& Y) { return Y; }, true};
  const Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  int rk = 0;
  while (rk < s.size() && s(rk) > 1e-12 * std::max(1.0, s(0))) ++rk;
  const Mat U = svd.matrixU().leftCols(rk);
  const Mat J = Mat::Identity(P.rows(), P.rows()) - U * U.transpose();
  return {"zero_product",
          [J](const SymMat& Y) {
            const Mat out = J * Y * J;
            return SymMat(0.5 * (out + out.transpose()));
          },
          true};
}

struct DykstraOptions {
  double tol = 1e-10;
  int max_iters = 50000;
};

struct DykstraReport {
  int iterations = 0;
  double last_change = 0.0;
};

inline SymMat dykstra_project(const SymMat& target, const std::vector<ConvexSet>& sets, const DykstraOptions& opt = {},
                              DykstraReport* rep = nullptr) {
  const Eigen::Index n = target.rows();
  std::vector<SymMat> inc(sets.size(), SymMat::Zero(n, n));
  SymMat x = target;
  double change = 0.0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    const SymMat prev = x;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      if (sets[k].affine) {
        x = sets[k].project(x);
        continue;
      }
      const SymMat y = x + inc[k];
      x = sets[k].project(y);
      inc[k] = y - x;
    }
    change = (x - prev).norm();
    if (rep) *rep = {it, change};
    if (change <= opt.tol) return x;
  }
  throw NoConvergence("Dykstra change " + std::to_string(change) + " after " + std::to_string(opt.max_iters) + " sweeps");
}

// ---- finite differences ----

inline Mat fd_gradient(const std::function<double(const Mat&)>& f, const Mat& R, double h) {
  if (!(h >= 1e-8 && h <= 1e-4)) throw std::invalid_argument("fd_gradient: h must lie in [1e-8, 1e-4]");
  Mat g(R.rows(), R.cols());
  Mat X = R;
  for (Eigen::Index j = 0; j < R.cols(); ++j)
    for (Eigen::Index i = 0; i < R.rows(); ++i) {
      const double x0 = X(i, j);
      X(i, j) = x0 + h;
      const double fp = f(X);
      X(i, j) = x0 - h;
      const double fm = f(X);
      X(i, j) = x0;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  if (!g.allFinite()) throw NonFinite("finite-difference gradient");
  return g;
}

// ---- KKT residuals recomputed from the sparse export ----

struct Functional {
  std::vector<std::tuple<int, int, double>> terms;  // v * Y(i,j), i <= j
  double rhs = 0.0;

  double eval(const SymMat& Y) const {
    double s = 0.0;
    for (const auto& [i, j, v] : terms) s += v * Y(i, j);
    return s;
  }

  // adds w times the symmetric matrix of this functional
  void add_to(SymMat& M, double w) const {
    for (const auto& [i, j, v] : terms) {
      if (i == j) M(i, i) += w * v;
      else {
        M(i, j) += 0.5 * w * v;
        M(j, i) += 0.5 * w * v;
      }
    }
  }
};

struct ExportedSdp {
  std::string kind;
  int order = 0;
  Functional objective;
  std::vector<Functional> equalities, inequalities;
  std::vector<std::pair<int, int>> nonneg;
};

inline ExportedSdp parse_export(std::istream& is) {
  ExportedSdp e;
  std::string word;
  auto expect = [&](const char* w) {
    if (!(is >> word) || word != w) throw ParseError(std::string("export: expected '") + w + "', got '" + word + "'");
  };
  std::string line;
  std::getline(is, line);
  if (line.rfind("# sdprlt sparse export", 0) != 0) throw ParseError("export: bad header");
  expect("kind");
  is >> e.kind;
  expect("order");
  is >> e.order;
  auto read_fun = [&]() {
    Functional f;
    int nnz = 0;
    if (!(is >> nnz >> f.rhs)) throw ParseError("export: bad functional header");
    for (int t = 0; t < nnz; ++t) {
      int i, j;
      double v;
      if (!(is >> i >> j >> v)) throw ParseError("export: bad term");
      f.terms.emplace_back(i, j, v);
    }
    return f;
  };
  expect("objective");
  e.objective = read_fun();
  int cnt = 0;
  expect("equalities");
  is >> cnt;
  for (int k = 0; k < cnt; ++k) e.equalities.push_back(read_fun());
  expect("inequalities");
  is >> cnt;
  for (int k = 0; k < cnt; ++k) e.inequalities.push_back(read_fun());
  expect("nonneg");
  is >> cnt;
  for (int k = 0; k < cnt; ++k) {
    int i, j;
    if (!(is >> i >> j)) throw ParseError("export: bad nonneg pair");
    e.nonneg.push_back({i, j});
  }
  return e;
}

struct KktCheck {
  double Rp = 0.0, Rd = 0.0, Rc = 0.0;
  double S_mismatch = 0.0;  // || S_recomputed - S_stored ||
  double max() const { return std::max({Rp, Rd, Rc}); }
};

// S = C - sum y_k A_k - sum nu_k B_k - sum eta_(i,j) E_ij, then the relative residuals.
inline KktCheck kkt_recompute(const ExportedSdp& e, const SymMat& Y, const Vec& y_eq, const Vec& nu_ineq,
                              const Vec& eta_nonneg, const SymMat* S_stored = nullptr) {
  if (y_eq.size() != static_cast<Eigen::Index>(e.equalities.size()) ||
      nu_ineq.size() != static_cast<Eigen::Index>(e.inequalities.size()) ||
      eta_nonneg.size() != static_cast<Eigen::Index>(e.nonneg.size()))
    throw SizeMismatch("multiplier lengths do not match the export");
  const int n = e.order;
  SymMat S = SymMat::Zero(n, n);
  e.objective.add_to(S, 1.0);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < e.equalities.size(); ++k) {
    const auto& f = e.equalities[k];
    f.add_to(S, -y_eq(k));
    const double r = f.eval(Y) - f.rhs;
    num += r * r;
    den += f.rhs * f.rhs;
  }
  for (std::size_t k = 0; k < e.inequalities.size(); ++k) {
    const auto& f = e.inequalities[k];
    f.add_to(S, -nu_ineq(k));
    const double r = std::max(0.0, f.rhs - f.eval(Y));
    num += r * r;
    den += f.rhs * f.rhs;
  }
  for (std::size_t k = 0; k < e.nonneg.size(); ++k) {
    const auto [i, j] = e.nonneg[k];
    Functional f{{{i, j, 1.0}}, 0.0};
    f.add_to(S, -eta_nonneg(k));
    const double r = std::max(0.0, -Y(i, j));
    num += r * r;
  }
  KktCheck out;
  out.Rp = std::sqrt(num) / (1.0 + std::sqrt(den));
  out.Rd = psd_part(-S).norm() / (1.0 + S.norm());
  out.Rc = std::abs(S.cwiseProduct(Y).sum()) / (1.0 + Y.norm() + S.norm());
  if (S_stored) out.S_mismatch = (S - *S_stored).norm();
  return out;
}

}  // namespace sdprlt::oracle
