#pragma once

#include <Eigen/Sparse>

#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "model.hpp"

namespace sdprlt {

enum class RelaxKind { Shor, SdpRlt, Dnn, Comp };

inline const char* to_string(RelaxKind k) {
  switch (k) {
    case RelaxKind::Shor: return "shor";
    case RelaxKind::SdpRlt: return "sdprlt";
    case RelaxKind::Dnn: return "dnn";
    case RelaxKind::Comp: return "comp";
  }
  return "?";
}

inline RelaxKind relax_kind_from_string(const std::string& s) {
  if (s == "shor") return RelaxKind::Shor;
  if (s == "sdprlt") return RelaxKind::SdpRlt;
  if (s == "dnn") return RelaxKind::Dnn;
  if (s == "comp") return RelaxKind::Comp;
  throw InvalidInstance("unknown relaxation '" + s + "'");
}

// One coefficient of a linear functional: contributes v * Y(i, j), i <= j.
struct Term {
  int i, j;
  double v;
};

// Rows f_k(Y) = sum_t v_t Y(i_t, j_t) with right-hand sides.
struct LinearBundle {
  std::vector<std::vector<Term>> rows;
  Vec rhs = Vec::Zero(0);

  int size() const { return static_cast<int>(rows.size()); }

  void add(std::vector<Term> terms, double r) {
    for (auto& t : terms)
      if (t.i > t.j) std::swap(t.i, t.j);
    rows.push_back(std::move(terms));
    rhs.conservativeResize(rhs.size() + 1);
    rhs(rhs.size() - 1) = r;
  }

  Vec apply(const SymMat& Y) const {
    Vec out(size());
    for (int k = 0; k < size(); ++k) {
      double s = 0.0;
      for (const auto& t : rows[k]) s += t.v * Y(t.i, t.j);
      out(k) = s;
    }
    return out;
  }

  // out += sum_k w_k * adjoint(e_k)
  void add_adjoint(const Vec& w, SymMat& out) const {
    for (int k = 0; k < size(); ++k)
      for (const auto& t : rows[k]) {
        if (t.i == t.j) {
          out(t.i, t.i) += w(k) * t.v;
        } else {
          out(t.i, t.j) += 0.5 * w(k) * t.v;
          out(t.j, t.i) += 0.5 * w(k) * t.v;
        }
      }
  }
};

// mask o (T Y T^T) >= 0 with T = [I; Gt], Gt = [d, -G] (or empty).
struct NonnegCone {
  int base = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Gt;
  SymMat mask;

  int extra() const { return static_cast<int>(Gt.rows()); }
  int order() const { return base + extra(); }

  SymMat lift(const SymMat& Y) const {
    const int l = extra();
    if (l == 0) return Y;
    SymMat M(order(), order());
    const Mat GY = Gt * Y;
    M.topLeftCorner(base, base) = Y;
    M.bottomLeftCorner(l, base) = GY;
    M.topRightCorner(base, l) = GY.transpose();
    M.bottomRightCorner(l, l) = symmetrize(Gt * GY.transpose());
    return M;
  }

  SymMat apply(const SymMat& Y) const { return mask.cwiseProduct(lift(Y)); }

  SymMat adjoint(const SymMat& Mu) const {
    const SymMat M = mask.cwiseProduct(Mu);
    const int l = extra();
    if (l == 0) return M;
    const Mat Mtr = M.topRightCorner(base, l);
    const Mat cross = Mtr * Gt;  // base x base
    const Mat Mbr = M.bottomRightCorner(l, l);
    const Mat tmp = Mbr * Gt;    // l x base
    SymMat out = M.topLeftCorner(base, base) + cross + cross.transpose();
    out += Mat(Gt.transpose() * tmp);
    return symmetrize(out);
  }
};

// Problem (P): min <C,Y> over Y in F ∩ E ∩ I ∩ PSD, Y of order N+1.
// F is kept on the manifold: AY21 = b, AY22 = bY12, diag_B(Y22) = (Y21)_B, Y11 = 1.
struct GeneralSdp {
  RelaxKind kind = RelaxKind::SdpRlt;
  int N = 0;
  SymMat C;
  Mat A;  // m x N
  Vec b;
  std::vector<int> B;
  LinearBundle E;      // E(Y) = g
  NonnegCone cone;     // mask o Phi(Y) >= 0
  LinearBundle I_lin;  // f(Y) >= h
  int src_n = 0, src_m = 0, src_l = 0, src_p = 0;
  bool redundant_dropped = false;

  int m() const { return static_cast<int>(A.rows()); }
  int p() const { return static_cast<int>(B.size()); }
  int order() const { return N + 1; }
  int d0() const { return m() + m() * N + p() + 1; }
};

inline SymMat cost_matrix(const SymMat& Q, const Vec& c) {
  const int n = static_cast<int>(c.size());
  SymMat C = SymMat::Zero(n + 1, n + 1);
  C.bottomRightCorner(n, n) = Q;
  C.block(1, 0, n, 1) = c;
  C.block(0, 1, 1, n) = c.transpose();
  return C;
}

// ---- F block ----

inline Vec F_apply(const GeneralSdp& s, const SymMat& Y) {
  const int m = s.m(), N = s.N, p = s.p();
  Vec out(s.d0());
  const Vec x = Y.block(1, 0, N, 1);
  out.head(m) = s.A * x;
  const Mat L = s.A * Y.bottomRightCorner(N, N) - s.b * x.transpose();
  out.segment(m, m * N) = Eigen::Map<const Vec>(L.data(), m * N);
  for (int k = 0; k < p; ++k) {
    const int a = s.B[k] + 1;
    out(m + m * N + k) = Y(a, a) - Y(a, 0);
  }
  out(s.d0() - 1) = Y(0, 0);
  return out;
}

inline Vec F_rhs(const GeneralSdp& s) {
  Vec d = Vec::Zero(s.d0());
  d.head(s.m()) = s.b;
  d(s.d0() - 1) = 1.0;
  return d;
}

inline SymMat F_adjoint(const GeneralSdp& s, const Vec& y) {
  const int m = s.m(), N = s.N, p = s.p();
  SymMat out = SymMat::Zero(N + 1, N + 1);
  const Eigen::Map<const Mat> Y2(y.data() + m, m, N);
  Vec xcoef = s.A.transpose() * y.head(m) - Y2.transpose() * s.b;
  SymMat X = symmetrize(s.A.transpose() * Y2);
  for (int k = 0; k < p; ++k) {
    X(s.B[k], s.B[k]) += y(m + m * N + k);
    xcoef(s.B[k]) -= y(m + m * N + k);
  }
  out.bottomRightCorner(N, N) = X;
  out.block(1, 0, N, 1) = 0.5 * xcoef;
  out.block(0, 1, 1, N) = 0.5 * xcoef.transpose();
  out(0, 0) = y(s.d0() - 1);
  return out;
}

// ---- quadratic constraint lifting ----

namespace detail {

inline std::vector<Term> lift_quadratic(const LiftedQuadCon& q, double sign) {
  std::vector<Term> t;
  const int n = static_cast<int>(q.b.size());
  for (int a = 0; a < n; ++a) {
    if (q.b(a) != 0.0) t.push_back({0, a + 1, sign * q.b(a)});
    for (int c = a; c < n; ++c) {
      const double v = q.A(a, c);
      if (v != 0.0) t.push_back({a + 1, c + 1, sign * (a == c ? v : 2.0 * v)});
    }
  }
  return t;
}

inline void add_quad_cons(const MbqpInstance& inst, GeneralSdp& s) {
  for (const auto& q : inst.quad_cons) {
    if (q.sense == LiftedQuadCon::Sense::Eq)
      s.E.add(lift_quadratic(q, 1.0), -q.c);
    else
      s.I_lin.add(lift_quadratic(q, -1.0), q.c);
  }
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor> rlt_rows(const Mat& G, const Vec& d) {
  const int l = static_cast<int>(G.rows()), n = static_cast<int>(G.cols());
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < l; ++i) {
    if (d(i) != 0.0) trip.emplace_back(i, 0, d(i));
    for (int j = 0; j < n; ++j)
      if (G(i, j) != 0.0) trip.emplace_back(i, j + 1, -G(i, j));
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> S(l, n + 1);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

inline void set_source(const MbqpInstance& inst, GeneralSdp& s) {
  s.src_n = inst.n;
  s.src_m = inst.m();
  s.src_l = inst.l();
  s.src_p = inst.p();
}

// Instance extended by slacks s = d - Gx: A' = [A 0; G I], b' = [b; d].
inline GeneralSdp slack_form(const MbqpInstance& inst, RelaxKind kind) {
  require_valid(inst);
  const int n = inst.n, m = inst.m(), l = inst.l(), N = n + l;
  GeneralSdp s;
  s.kind = kind;
  s.N = N;
  SymMat Qp = SymMat::Zero(N, N);
  Qp.topLeftCorner(n, n) = inst.Q;
  Vec cp = Vec::Zero(N);
  cp.head(n) = inst.c;
  s.C = cost_matrix(Qp, cp);
  s.A = Mat::Zero(m + l, N);
  s.A.topLeftCorner(m, n) = inst.A;
  s.A.bottomLeftCorner(l, n) = inst.G;
  s.A.bottomRightCorner(l, l) = Mat::Identity(l, l);
  s.b = Vec(m + l);
  s.b << inst.b, inst.d;
  if (numerical_rank(s.A) < m + l) throw InvalidInstance("slack-form A' is rank deficient");
  s.B = inst.B;
  add_quad_cons(inst, s);
  s.cone.base = N + 1;
  s.cone.Gt.resize(0, N + 1);
  s.cone.mask = SymMat::Ones(N + 1, N + 1);
  set_source(inst, s);
  return s;
}

}  // namespace detail

inline GeneralSdp build_shor(const MbqpInstance& inst) {
  require_valid(inst);
  const int n = inst.n, l = inst.l();
  GeneralSdp s;
  s.kind = RelaxKind::Shor;
  s.N = n;
  s.C = cost_matrix(inst.Q, inst.c);
  // Ax = b is not a lifted constraint here, so it is penalized rather than kept on the manifold.
  s.A = Mat::Zero(0, n);
  s.b = Vec::Zero(0);
  s.B = inst.B;
  for (int k = 0; k < inst.m(); ++k) {
    std::vector<Term> t;
    for (int j = 0; j < n; ++j)
      if (inst.A(k, j) != 0.0) t.push_back({0, j + 1, inst.A(k, j)});
    s.E.add(std::move(t), inst.b(k));
  }
  detail::add_quad_cons(inst, s);
  s.cone.base = n + 1;
  s.cone.Gt = detail::rlt_rows(inst.G, inst.d);
  s.cone.mask = SymMat::Zero(n + 1 + l, n + 1 + l);
  for (int j = 1; j < n + 1 + l; ++j) s.cone.mask(0, j) = s.cone.mask(j, 0) = 1.0;
  detail::set_source(inst, s);
  return s;
}

inline GeneralSdp build_sdp_rlt(const MbqpInstance& inst, bool drop_redundant = false) {
  require_valid(inst);
  const int n = inst.n, l = inst.l();
  GeneralSdp s;
  s.kind = RelaxKind::SdpRlt;
  s.N = n;
  s.C = cost_matrix(inst.Q, inst.c);
  s.A = inst.A;
  s.b = inst.b;
  s.B = inst.B;
  detail::add_quad_cons(inst, s);
  s.cone.base = n + 1;
  s.cone.Gt = detail::rlt_rows(inst.G, inst.d);
  s.cone.mask = SymMat::Ones(n + 1 + l, n + 1 + l);
  if (drop_redundant)
    for (int i = 0; i < l; ++i) s.cone.mask(0, n + 1 + i) = s.cone.mask(n + 1 + i, 0) = 0.0;
  s.redundant_dropped = drop_redundant;
  detail::set_source(inst, s);
  return s;
}

inline GeneralSdp build_dnn(const MbqpInstance& inst) {
  return detail::slack_form(inst, RelaxKind::Dnn);
}

// Index of the row x_i <= 1 for each binary i (the last such row wins).
inline std::vector<int> binary_bound_rows(const MbqpInstance& inst) {
  std::vector<int> rows;
  for (int i : inst.B) {
    int found = -1;
    for (int k = 0; k < inst.l(); ++k) {
      if (inst.d(k) != 1.0 || inst.G(k, i) != 1.0) continue;
      if (inst.G.row(k).cwiseAbs().sum() == 1.0) found = k;
    }
    if (found < 0) throw NotStrengthened("no row x_" + std::to_string(i) + " <= 1");
    rows.push_back(found);
  }
  return rows;
}

inline GeneralSdp build_comp(const MbqpInstance& inst) {
  const auto rows = binary_bound_rows(inst);
  GeneralSdp s = detail::slack_form(inst, RelaxKind::Comp);
  s.B.clear();
  // x_i * s_i = 0 for the slack of x_i <= 1.
  for (std::size_t k = 0; k < rows.size(); ++k)
    s.E.add({{inst.B[k] + 1, inst.n + rows[k] + 1, 1.0}}, 0.0);
  return s;
}

inline GeneralSdp build(const MbqpInstance& inst, RelaxKind kind) {
  switch (kind) {
    case RelaxKind::Shor: return build_shor(inst);
    case RelaxKind::SdpRlt: return build_sdp_rlt(inst);
    case RelaxKind::Dnn: return build_dnn(inst);
    case RelaxKind::Comp: return build_comp(inst);
  }
  throw InvalidInstance("unknown relaxation");
}

// [1 0; 0 I; d -G] Y [..]^T
inline SymMat phi_map(const SymMat& Y, const Mat& G, const Vec& d) {
  const Eigen::Index n = Y.rows() - 1, l = G.rows();
  if (Y.rows() != Y.cols() || G.cols() != n || d.size() != l)
    throw ShapeMismatch("phi_map: Y order " + std::to_string(Y.rows()) + ", G " +
                        std::to_string(G.rows()) + "x" + std::to_string(G.cols()));
  Mat T = Mat::Zero(n + 1 + l, n + 1);
  T.topRows(n + 1).setIdentity();
  T.block(n + 1, 0, l, 1) = d;
  T.block(n + 1, 1, l, n) = -G;
  return congruence(Y, T);
}

// ---- audit ----

struct CountRecord {
  int order = 0;
  int manifold_equalities = 0;   // F rows
  int penalized_equalities = 0;  // E rows
  int equalities = 0;
  int rlt = 0, mixed = 0, linear = 0, nonneg = 0, lin_ineq = 0;
  int table_inequalities = 0;
  int expected_equalities = 0;
  int expected_inequalities = 0;
  bool matches = false;
};

inline CountRecord audit_counts(const GeneralSdp& s) {
  CountRecord c;
  c.order = s.order();
  c.manifold_equalities = s.d0();
  c.penalized_equalities = s.E.size();
  c.equalities = c.manifold_equalities + c.penalized_equalities;
  const int base = s.cone.base, tot = s.cone.order();
  for (int i = 0; i < tot; ++i)
    for (int j = i; j < tot; ++j) {
      if (s.cone.mask(i, j) == 0.0) continue;
      if (j < base) ++c.nonneg;
      else if (i == 0) ++c.linear;
      else if (i < base) ++c.mixed;
      else ++c.rlt;
    }
  c.lin_ineq = s.I_lin.size();
  const int n = s.src_n, m = s.src_m, l = s.src_l, p = s.src_p;
  int quad_eq = s.E.size();
  switch (s.kind) {
    case RelaxKind::Shor:
      quad_eq -= m;
      c.table_inequalities = c.nonneg + c.linear;
      c.expected_equalities = m + p + 1;
      c.expected_inequalities = l + n;
      break;
    case RelaxKind::SdpRlt:
      c.table_inequalities = c.rlt + c.mixed;
      c.expected_equalities = m * (n + 1) + p + 1;
      c.expected_inequalities = l * (2 * n + l + 1) / 2;
      break;
    case RelaxKind::Dnn:
      c.table_inequalities = c.rlt + c.mixed;
      c.expected_equalities = (m + l) * (n + l + 1) + p + 1;
      c.expected_inequalities = 0;
      break;
    case RelaxKind::Comp:
      quad_eq -= p;
      c.table_inequalities = c.rlt + c.mixed;
      c.expected_equalities = (m + l) * (n + l + 1) + p + 1;
      c.expected_inequalities = 0;
      break;
  }
  c.expected_equalities += quad_eq;
  c.matches = c.equalities == c.expected_equalities &&
              c.table_inequalities == c.expected_inequalities;
  return c;
}

// ---- export ----
// Every constraint is written as a linear functional sum v * Y(i,j) over 0-based
// pairs i <= j; see README for the layout.

namespace detail {

using TermMap = std::map<std::pair<int, int>, double>;

inline void put(TermMap& m, int i, int j, double v) {
  if (v == 0.0) return;
  if (i > j) std::swap(i, j);
  m[{i, j}] += v;
}

inline void write_terms(std::ostream& os, const TermMap& t, double rhs) {
  int nnz = 0;
  for (const auto& kv : t) nnz += (kv.second != 0.0);
  os << nnz << " " << rhs << "\n";
  for (const auto& kv : t)
    if (kv.second != 0.0) os << kv.first.first << " " << kv.first.second << " " << kv.second << "\n";
}

}  // namespace detail

inline void export_sparse(const GeneralSdp& s, std::ostream& os) {
  using detail::TermMap;
  const int N = s.N, m = s.m();
  os.precision(17);
  os << "# sdprlt sparse export v1\n";
  os << "kind " << to_string(s.kind) << "\n";
  os << "order " << s.order() << "\n";
  TermMap obj;
  for (int i = 0; i <= N; ++i)
    for (int j = i; j <= N; ++j) detail::put(obj, i, j, i == j ? s.C(i, i) : 2.0 * s.C(i, j));
  os << "objective ";
  detail::write_terms(os, obj, 0.0);

  std::vector<std::pair<TermMap, double>> eqs;
  for (int k = 0; k < m; ++k) {
    TermMap t;
    for (int j = 0; j < N; ++j) detail::put(t, 0, j + 1, s.A(k, j));
    eqs.push_back({t, s.b(k)});
  }
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < m; ++k) {
      TermMap t;
      for (int i = 0; i < N; ++i) detail::put(t, i + 1, j + 1, s.A(k, i));
      detail::put(t, 0, j + 1, -s.b(k));
      eqs.push_back({t, 0.0});
    }
  for (int i : s.B) {
    TermMap t;
    detail::put(t, i + 1, i + 1, 1.0);
    detail::put(t, 0, i + 1, -1.0);
    eqs.push_back({t, 0.0});
  }
  {
    TermMap t;
    detail::put(t, 0, 0, 1.0);
    eqs.push_back({t, 1.0});
  }
  for (int k = 0; k < s.E.size(); ++k) {
    TermMap t;
    for (const auto& term : s.E.rows[k]) detail::put(t, term.i, term.j, term.v);
    eqs.push_back({t, s.E.rhs(k)});
  }
  os << "equalities " << eqs.size() << "\n";
  for (const auto& e : eqs) detail::write_terms(os, e.first, e.second);

  // Inequalities: masked entries of T Y T^T outside the leading block, then lifted rows.
  const int base = s.cone.base, tot = s.cone.order();
  auto trow = [&](int a) {
    std::vector<std::pair<int, double>> r;
    if (a < base) r.push_back({a, 1.0});
    else
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(s.cone.Gt, a - base); it; ++it)
        r.push_back({static_cast<int>(it.col()), it.value()});
    return r;
  };
  std::vector<std::pair<TermMap, double>> ineqs;
  std::vector<std::pair<int, int>> nonneg;
  for (int a = 0; a < tot; ++a)
    for (int c = a; c < tot; ++c) {
      if (s.cone.mask(a, c) == 0.0) continue;
      if (c < base) {
        nonneg.push_back({a, c});
        continue;
      }
      TermMap t;
      for (const auto& [i, vi] : trow(a))
        for (const auto& [j, vj] : trow(c)) detail::put(t, i, j, vi * vj);
      ineqs.push_back({t, 0.0});
    }
  for (int k = 0; k < s.I_lin.size(); ++k) {
    TermMap t;
    for (const auto& term : s.I_lin.rows[k]) detail::put(t, term.i, term.j, term.v);
    ineqs.push_back({t, s.I_lin.rhs(k)});
  }
  os << "inequalities " << ineqs.size() << "\n";
  for (const auto& e : ineqs) detail::write_terms(os, e.first, e.second);
  os << "nonneg " << nonneg.size() << "\n";
  for (const auto& [i, j] : nonneg) os << i << " " << j << "\n";
}

}  // namespace sdprlt
