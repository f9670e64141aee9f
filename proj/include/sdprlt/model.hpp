#pragma once

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "symmat.hpp"

namespace sdprlt {

// x^T A x + b^T x + c (<= 0 or == 0), lifted to <A, X> + b^T x + c.
struct LiftedQuadCon {
  enum class Sense { Le, Eq };
  SymMat A;
  Vec b;
  double c = 0.0;
  Sense sense = Sense::Eq;
};

// min x^T Q x + 2 c^T x  s.t.  Ax = b, Gx <= d, x >= 0, x_B binary.
struct MbqpInstance {
  std::string name;
  int n = 0;
  SymMat Q;
  Vec c;
  Mat A;  // m x n
  Vec b;
  Mat G;  // l x n
  Vec d;
  std::vector<int> B;  // 0-based, sorted
  std::vector<LiftedQuadCon> quad_cons;

  int m() const { return static_cast<int>(A.rows()); }
  int l() const { return static_cast<int>(G.rows()); }
  int p() const { return static_cast<int>(B.size()); }

  double objective(const Vec& x) const { return x.dot(Q * x) + 2.0 * c.dot(x); }
};

inline MbqpInstance make_instance(int n, std::string name = {}) {
  MbqpInstance inst;
  inst.name = std::move(name);
  inst.n = n;
  inst.Q = SymMat::Zero(n, n);
  inst.c = Vec::Zero(n);
  inst.A = Mat::Zero(0, n);
  inst.b = Vec::Zero(0);
  inst.G = Mat::Zero(0, n);
  inst.d = Vec::Zero(0);
  return inst;
}

inline int numerical_rank(const Mat& M, double rel = 1e-10) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::BDCSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > rel * s(0)).count());
}

inline std::vector<std::string> validate(const MbqpInstance& inst) {
  std::vector<std::string> rep;
  const int n = inst.n;
  if (n < 1) rep.push_back("n must be positive");
  if (inst.Q.rows() != n || inst.Q.cols() != n) rep.push_back("Q shape mismatch");
  else {
    if (!inst.Q.allFinite()) rep.push_back("Q not finite");
    else if ((inst.Q - inst.Q.transpose()).cwiseAbs().maxCoeff() > 0.0) rep.push_back("Q not symmetric");
  }
  if (inst.c.size() != n) rep.push_back("c length mismatch");
  if (inst.A.cols() != n || inst.b.size() != inst.A.rows()) rep.push_back("A/b shape mismatch");
  else {
    if ((inst.b.array() < -1e-12).any()) rep.push_back("negative b");
    if (numerical_rank(inst.A) < inst.A.rows()) rep.push_back("rank-deficient A");
  }
  if (inst.G.cols() != n || inst.d.size() != inst.G.rows()) rep.push_back("G/d shape mismatch");
  std::set<int> seen;
  for (int i : inst.B) {
    if (i < 0 || i >= n) rep.push_back("binary index out of range: " + std::to_string(i));
    if (!seen.insert(i).second) rep.push_back("duplicate binary index: " + std::to_string(i));
  }
  if (!std::is_sorted(inst.B.begin(), inst.B.end())) rep.push_back("B not sorted");
  for (std::size_t k = 0; k < inst.quad_cons.size(); ++k) {
    const auto& q = inst.quad_cons[k];
    if (q.A.rows() != n || q.A.cols() != n || q.b.size() != n)
      rep.push_back("quad_cons[" + std::to_string(k) + "] shape mismatch");
    else if (q.A.cwiseAbs().maxCoeff() == 0.0)
      rep.push_back("quad_cons[" + std::to_string(k) + "] has zero A");
  }
  return rep;
}

inline void require_valid(const MbqpInstance& inst) {
  auto rep = validate(inst);
  if (!rep.empty()) {
    std::string msg;
    for (auto& s : rep) msg += s + "; ";
    throw InvalidInstance(msg);
  }
}

inline MbqpInstance strengthen_binary(const MbqpInstance& inst) {
  if (inst.B.empty()) throw EmptyBinarySet("instance has no binary variables");
  MbqpInstance out = inst;
  const int l = inst.l(), p = inst.p();
  out.G = Mat::Zero(l + p, inst.n);
  out.G.topRows(l) = inst.G;
  out.d = Vec::Ones(l + p);
  out.d.head(l) = inst.d;
  for (int k = 0; k < p; ++k) out.G(l + k, inst.B[k]) = 1.0;
  return out;
}

enum class L0Mode { BigM, Complementarity };

// Sparsity constraint ||x||_0 <= rho on all n variables.
inline MbqpInstance l0_reformulate(const MbqpInstance& inst, int rho, L0Mode mode) {
  const int n = inst.n, m = inst.m(), l = inst.l();
  if (rho <= 0 || rho > n) throw InvalidSparsity("rho = " + std::to_string(rho));
  MbqpInstance out = make_instance(2 * n, inst.name);
  out.Q.topLeftCorner(n, n) = inst.Q;
  out.c.head(n) = inst.c;
  out.A = Mat::Zero(m + 1, 2 * n);
  out.A.topLeftCorner(m, n) = inst.A;
  out.A.row(m).tail(n).setOnes();
  out.b = Vec(m + 1);
  out.b << inst.b, (mode == L0Mode::BigM ? rho : n - rho);
  out.G = Mat::Zero(l + 2 * n, 2 * n);
  out.G.topLeftCorner(l, n) = inst.G;
  out.d = Vec::Zero(l + 2 * n);
  out.d.head(l) = inst.d;
  for (int i = 0; i < n; ++i) {
    if (mode == L0Mode::BigM) {
      out.G(l + i, i) = 1.0;  // x <= u
      out.G(l + i, n + i) = -1.0;
      out.G(l + n + i, n + i) = 1.0;  // u <= e
      out.d(l + n + i) = 1.0;
    } else {
      out.G(l + i, i) = 1.0;  // x <= e
      out.d(l + i) = 1.0;
      out.G(l + n + i, n + i) = 1.0;  // v <= e
      out.d(l + n + i) = 1.0;
    }
  }
  out.B = inst.B;
  for (int i = 0; i < n; ++i) out.B.push_back(n + i);
  for (const auto& q : inst.quad_cons) {
    LiftedQuadCon w;
    w.A = SymMat::Zero(2 * n, 2 * n);
    w.A.topLeftCorner(n, n) = q.A;
    w.b = Vec::Zero(2 * n);
    w.b.head(n) = q.b;
    w.c = q.c;
    w.sense = q.sense;
    out.quad_cons.push_back(w);
  }
  if (mode == L0Mode::Complementarity) {
    LiftedQuadCon comp;
    comp.A = SymMat::Zero(2 * n, 2 * n);
    comp.A.topRightCorner(n, n) = 0.5 * Mat::Identity(n, n);
    comp.A.bottomLeftCorner(n, n) = 0.5 * Mat::Identity(n, n);
    comp.b = Vec::Zero(2 * n);
    comp.sense = LiftedQuadCon::Sense::Eq;
    out.quad_cons.push_back(comp);
  }
  return out;
}

// ---- canonical instance document ----

namespace detail {

inline nlohmann::json mat_to_json(const Mat& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

// Symmetric matrices go out as upper-triangle COO when sparse.
inline nlohmann::json sym_to_json(const SymMat& M) {
  const Eigen::Index n = M.rows();
  Eigen::Index nnz = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) nnz += (M(i, j) != 0.0);
  if (3 * nnz > n * (n + 1) / 2) return mat_to_json(M);
  nlohmann::json coo = nlohmann::json::array();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      if (M(i, j) != 0.0) coo.push_back({i, j, M(i, j)});
  return {{"coo", coo}};
}

inline nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Mat mat_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  Mat M = Mat::Zero(rows, cols);
  if (j.is_object()) {
    for (const auto& t : j.at("coo")) {
      const auto i = t.at(0).get<Eigen::Index>(), k = t.at(1).get<Eigen::Index>();
      if (i < 0 || k < 0 || i >= rows || k >= cols) throw ParseError("COO index out of range");
      M(i, k) = t.at(2).get<double>();
      if (rows == cols) M(k, i) = M(i, k);
    }
    return M;
  }
  if (static_cast<Eigen::Index>(j.size()) != rows) throw ParseError("row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ParseError("column count mismatch");
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

inline Vec vec_from_json(const nlohmann::json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const MbqpInstance& inst) {
  using namespace detail;
  nlohmann::json j;
  j["name"] = inst.name;
  j["n"] = inst.n;
  j["Q"] = sym_to_json(inst.Q);
  j["c"] = vec_to_json(inst.c);
  j["A"] = mat_to_json(inst.A);
  j["b"] = vec_to_json(inst.b);
  j["G"] = mat_to_json(inst.G);
  j["d"] = vec_to_json(inst.d);
  j["B"] = inst.B;
  nlohmann::json qc = nlohmann::json::array();
  for (const auto& q : inst.quad_cons)
    qc.push_back({{"A", sym_to_json(q.A)},
                  {"b", vec_to_json(q.b)},
                  {"c", q.c},
                  {"sense", q.sense == LiftedQuadCon::Sense::Eq ? "eq" : "le"}});
  j["quad_cons"] = qc;
  return j;
}

inline MbqpInstance from_json(const nlohmann::json& j) {
  using namespace detail;
  try {
    const int n = j.at("n").get<int>();
    MbqpInstance inst = make_instance(n, j.value("name", std::string{}));
    inst.Q = mat_from_json(j.at("Q"), n, n);
    inst.c = vec_from_json(j.at("c"));
    const auto& ja = j.at("A");
    inst.A = mat_from_json(ja, ja.size(), n);
    inst.b = vec_from_json(j.at("b"));
    const auto& jg = j.at("G");
    inst.G = mat_from_json(jg, jg.size(), n);
    inst.d = vec_from_json(j.at("d"));
    inst.B = j.at("B").get<std::vector<int>>();
    if (j.contains("quad_cons"))
      for (const auto& q : j.at("quad_cons")) {
        LiftedQuadCon w;
        w.A = mat_from_json(q.at("A"), n, n);
        w.b = vec_from_json(q.at("b"));
        w.c = q.value("c", 0.0);
        w.sense = q.value("sense", std::string("eq")) == "le" ? LiftedQuadCon::Sense::Le
                                                              : LiftedQuadCon::Sense::Eq;
        inst.quad_cons.push_back(w);
      }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
}

inline void write_instance(const MbqpInstance& inst, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  f << to_json(inst).dump(1) << "\n";
}

inline MbqpInstance read_instance(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace sdprlt
