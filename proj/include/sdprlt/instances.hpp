#pragma once

#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string_view>

#include "model.hpp"

namespace sdprlt {

// ---- seeding: one seed, independent substreams keyed by field name ----

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view field) {
  return std::mt19937_64(splitmix64(seed ^ fnv1a(field)));
}

inline int uniform_int(std::mt19937_64& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

// ---- ORLIB bqp ----
// File: problem count, then per problem "n nnz" and nnz lines "i j q" (1-based).
// The dataset maximizes sum_{i,j} q_ij x_i x_j over symmetric q listed once per pair.
// Mapped to minimization: Q_ij = Q_ji = -q_ij (i != j), c_i = -q_ii / 2.

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Next non-empty line split into tokens.
  std::vector<std::string> next(const char* what) {
    std::string line;
    while (std::getline(is_, line)) {
      ++lineno_;
      std::istringstream ss(line);
      std::vector<std::string> tok;
      std::string t;
      while (ss >> t) tok.push_back(t);
      if (!tok.empty()) return tok;
    }
    throw ParseError(std::string("unexpected end of input, expected ") + what + " after line " +
                     std::to_string(lineno_));
  }

  bool at_end() {
    std::streampos pos = is_.tellg();
    std::string line;
    int skipped = 0;
    while (std::getline(is_, line)) {
      ++skipped;
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        is_.clear();
        is_.seekg(pos);
        return false;
      }
    }
    lineno_ += skipped;
    return true;
  }

  int lineno() const { return lineno_; }

  template <class T>
  T number(const std::string& s) const {
    std::istringstream ss(s);
    T v{};
    ss >> v;
    if (ss.fail() || !ss.eof()) throw ParseError("line " + std::to_string(lineno_) + ": bad number '" + s + "'");
    return v;
  }

 private:
  std::istream& is_;
  int lineno_ = 0;
};

}  // namespace detail

inline std::vector<MbqpInstance> read_orlib_biq_all(std::istream& is, const std::string& name = "bqp") {
  detail::LineReader rd(is);
  auto head = rd.next("problem count");
  if (head.size() != 1) throw ParseError("line " + std::to_string(rd.lineno()) + ": expected problem count");
  const int count = rd.number<int>(head[0]);
  std::vector<MbqpInstance> out;
  for (int pidx = 0; pidx < count; ++pidx) {
    auto hdr = rd.next("'n nnz'");
    if (hdr.size() != 2) throw ParseError("line " + std::to_string(rd.lineno()) + ": expected 'n nnz'");
    const int n = rd.number<int>(hdr[0]);
    const int nnz = rd.number<int>(hdr[1]);
    if (n < 1 || nnz < 0) throw ParseError("line " + std::to_string(rd.lineno()) + ": bad sizes");
    MbqpInstance inst = make_instance(n, count == 1 ? name : name + "." + std::to_string(pidx + 1));
    for (int i = 0; i < n; ++i) inst.B.push_back(i);
    std::set<std::pair<int, int>> seen;
    for (int e = 0; e < nnz; ++e) {
      auto t = rd.next("'i j q'");
      if (t.size() != 3) throw ParseError("line " + std::to_string(rd.lineno()) + ": expected 'i j q'");
      int i = rd.number<int>(t[0]) - 1, j = rd.number<int>(t[1]) - 1;
      const double q = rd.number<double>(t[2]);
      if (i < 0 || j < 0 || i >= n || j >= n)
        throw ParseError("line " + std::to_string(rd.lineno()) + ": index out of range");
      if (i > j) std::swap(i, j);
      if (!seen.insert({i, j}).second)
        throw DuplicateEntry("line " + std::to_string(rd.lineno()) + ": pair (" + std::to_string(i + 1) + "," +
                             std::to_string(j + 1) + ")");
      if (i == j) inst.c(i) = -0.5 * q;
      else inst.Q(i, j) = inst.Q(j, i) = -q;
    }
    out.push_back(std::move(inst));
  }
  if (!rd.at_end()) throw ParseError("line " + std::to_string(rd.lineno() + 1) + ": trailing content");
  return out;
}

inline MbqpInstance read_orlib_biq(const std::string& path, int index = 0) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find_last_of('.'));
  auto all = read_orlib_biq_all(f, stem);
  if (index < 0 || index >= static_cast<int>(all.size()))
    throw ParseError(path + ": problem index " + std::to_string(index + 1) + " not present");
  return all[index];
}

inline void write_orlib_biq(const std::vector<MbqpInstance>& insts, std::ostream& os) {
  os << insts.size() << "\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& inst : insts) {
    if (inst.m() || inst.l() || inst.p() != inst.n || !inst.quad_cons.empty())
      throw InvalidInstance("ORLIB format holds unconstrained all-binary instances only");
    std::vector<std::tuple<int, int, double>> t;
    for (int i = 0; i < inst.n; ++i) {
      if (inst.c(i) != 0.0) t.emplace_back(i, i, -2.0 * inst.c(i));
      for (int j = i + 1; j < inst.n; ++j)
        if (inst.Q(i, j) != 0.0) t.emplace_back(i, j, -inst.Q(i, j));
    }
    os << inst.n << " " << t.size() << "\n";
    for (const auto& [i, j, v] : t) os << i + 1 << " " << j + 1 << " " << v << "\n";
  }
}

// Beasley-style data: integer q_ij uniform in [-100, 100] at the given density,
// including the diagonal, mapped through the ORLIB convention above.
inline MbqpInstance gen_biq_random(int n, double density, std::uint64_t seed) {
  if (n < 1 || !(density > 0.0 && density <= 1.0)) throw InvalidInstance("gen_biq_random: need n >= 1, density in (0,1]");
  auto gq = substream(seed, "biq.q");
  auto gm = substream(seed, "biq.mask");
  std::bernoulli_distribution keep(density);
  std::ostringstream nm;
  nm << "biq" << n << "_d" << density << "_s" << seed;
  MbqpInstance inst = make_instance(n, nm.str());
  for (int i = 0; i < n; ++i) {
    inst.B.push_back(i);
    for (int j = i; j < n; ++j) {
      const int q = uniform_int(gq, -100, 100);
      if (!keep(gm)) continue;
      if (i == j) inst.c(i) = -0.5 * q;
      else inst.Q(i, j) = inst.Q(j, i) = -q;
    }
  }
  return inst;
}

// ---- graphs ----

struct GraphInstance {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // 0-based, i < j
  std::vector<double> weights;             // empty or one per edge
};

inline void validate_graph(const GraphInstance& g) {
  std::set<std::pair<int, int>> seen;
  for (const auto& [i, j] : g.edges) {
    if (!(0 <= i && i < j && j < g.n)) throw InvalidInstance("edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    if (!seen.insert({i, j}).second) throw DuplicateEntry("edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  if (!g.weights.empty() && g.weights.size() != g.edges.size()) throw SizeMismatch("edge weights");
}

inline GraphInstance empty_graph(int n) { return {n, {}, {}}; }

inline GraphInstance complete_graph(int n) {
  GraphInstance g{n, {}, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.push_back({i, j});
  return g;
}

// Gset: "n m" then m lines "i j w" (1-based).
inline GraphInstance read_gset(std::istream& is) {
  detail::LineReader rd(is);
  auto hdr = rd.next("'n m'");
  if (hdr.size() != 2) throw ParseError("line " + std::to_string(rd.lineno()) + ": expected 'n m'");
  GraphInstance g;
  g.n = rd.number<int>(hdr[0]);
  const int m = rd.number<int>(hdr[1]);
  std::set<std::pair<int, int>> seen;
  for (int e = 0; e < m; ++e) {
    auto t = rd.next("'i j w'");
    if (t.size() != 3) throw ParseError("line " + std::to_string(rd.lineno()) + ": expected 'i j w'");
    int i = rd.number<int>(t[0]) - 1, j = rd.number<int>(t[1]) - 1;
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= g.n || i == j) throw ParseError("line " + std::to_string(rd.lineno()) + ": bad edge");
    if (!seen.insert({i, j}).second) throw DuplicateEntry("line " + std::to_string(rd.lineno()));
    g.edges.push_back({i, j});
    g.weights.push_back(rd.number<double>(t[2]));
  }
  return g;
}

inline GraphInstance read_gset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return read_gset(f);
}

// max x^T x over stable-set constraints x_i x_j = 0, written as a minimization.
inline MbqpInstance build_theta_plus(const GraphInstance& g, std::string name = "theta_plus") {
  validate_graph(g);
  MbqpInstance inst = make_instance(g.n, std::move(name));
  inst.Q = -SymMat::Identity(g.n, g.n);
  inst.G = Mat::Identity(g.n, g.n);
  inst.d = Vec::Ones(g.n);
  for (int i = 0; i < g.n; ++i) inst.B.push_back(i);
  for (const auto& [i, j] : g.edges) {
    LiftedQuadCon q;
    q.A = SymMat::Zero(g.n, g.n);
    q.A(i, j) = q.A(j, i) = 0.5;
    q.b = Vec::Zero(g.n);
    q.sense = LiftedQuadCon::Sense::Eq;
    inst.quad_cons.push_back(std::move(q));
  }
  return inst;
}

// ---- quadratic knapsack ----

inline double qkp_capacity(const Vec& a) { return 0.9 * a.sum(); }

inline MbqpInstance gen_qkp(int n, double p, std::uint64_t seed) {
  if (n < 1 || !(p > 0.0 && p <= 1.0)) throw InvalidInstance("gen_qkp: need n >= 1, p in (0,1]");
  auto gq = substream(seed, "qkp.q");
  auto gm = substream(seed, "qkp.mask");
  auto ga = substream(seed, "qkp.a");
  std::bernoulli_distribution keep(p);
  std::ostringstream nm;
  nm << "qkp" << n << "_p" << p << "_s" << seed;
  MbqpInstance inst = make_instance(n, nm.str());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const int q = uniform_int(gq, 1, 100);
      if (keep(gm)) inst.Q(i, j) = inst.Q(j, i) = -q;
    }
  Vec a(n);
  for (int i = 0; i < n; ++i) a(i) = uniform_int(ga, 1, 50);
  inst.A = a.transpose();
  inst.b = Vec::Constant(1, std::floor(qkp_capacity(a)));
  inst.G = Mat::Identity(n, n);
  inst.d = Vec::Ones(n);
  for (int i = 0; i < n; ++i) inst.B.push_back(i);
  return inst;
}

// ---- cardinality-constrained clustering ----
// Variable (s, j) -> s * k + j. The last column-sum row is implied by the others
// and the row sums, so it is left out to keep A of full row rank.

inline MbqpInstance gen_ccmssc(const Mat& points, const std::vector<int>& sizes, std::string name = "ccmssc") {
  const int m = static_cast<int>(points.rows()), k = static_cast<int>(sizes.size());
  if (k < 1 || m < 1) throw SizeMismatch("need at least one point and one cluster");
  int total = 0;
  for (int c : sizes) {
    if (c < 1) throw SizeMismatch("cluster sizes must be >= 1");
    total += c;
  }
  if (total != m) throw SizeMismatch("cluster sizes sum to " + std::to_string(total) + ", expected " + std::to_string(m));
  const int n = m * k;
  MbqpInstance inst = make_instance(n, std::move(name));
  for (int s = 0; s < m; ++s)
    for (int t = 0; t < m; ++t) {
      const double dst = (points.row(s) - points.row(t)).squaredNorm();
      for (int j = 0; j < k; ++j) inst.Q(s * k + j, t * k + j) = dst / sizes[j];
    }
  const int rows = m + k - 1;
  inst.A = Mat::Zero(rows, n);
  inst.b = Vec::Zero(rows);
  for (int s = 0; s < m; ++s) {
    for (int j = 0; j < k; ++j) inst.A(s, s * k + j) = 1.0;
    inst.b(s) = 1.0;
  }
  for (int j = 0; j + 1 < k; ++j) {
    for (int s = 0; s < m; ++s) inst.A(m + j, s * k + j) = 1.0;
    inst.b(m + j) = sizes[j];
  }
  inst.G = Mat::Identity(n, n);
  inst.d = Vec::Ones(n);
  for (int i = 0; i < n; ++i) inst.B.push_back(i);
  return inst;
}

inline Mat read_points_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        r.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
    }
    if (!rows.empty() && r.size() != rows.front().size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) + " columns");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return Mat(0, 0);
  Mat P(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) P(i, j) = rows[i][j];
  return P;
}

inline Mat read_points_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return read_points_csv(f);
}

inline void write_points_csv(const Mat& P, std::ostream& os) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) os << (j ? "," : "") << P(i, j);
    os << "\n";
  }
}

// ---- sparse standard QP (PSD family) ----

inline int sstqp_rho(int m) { return std::max(1, m / 8); }

inline MbqpInstance gen_sstqp_psd(int m, std::uint64_t seed) {
  if (m < 4) throw InvalidInstance("gen_sstqp_psd: need m >= 4");
  auto gf = substream(seed, "sstqp.factor");
  std::normal_distribution<double> N01;
  Mat F(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) F(i, j) = N01(gf);
  MbqpInstance base = make_instance(m, "sstqp_psd" + std::to_string(m) + "_s" + std::to_string(seed));
  base.Q = symmetrize(F * F.transpose() / m);
  base.A = Mat::Ones(1, m);
  base.b = Vec::Ones(1);
  MbqpInstance inst = l0_reformulate(base, sstqp_rho(m), L0Mode::BigM);
  inst.name = base.name;
  return inst;
}

// ---- quadratic minimum spanning tree on K_n (|S| = 1 cuts) ----

enum class QmstpFamily { Sym, Vsym, Esym };

inline QmstpFamily qmstp_family_from_string(const std::string& s) {
  if (s == "sym") return QmstpFamily::Sym;
  if (s == "vsym") return QmstpFamily::Vsym;
  if (s == "esym") return QmstpFamily::Esym;
  throw InvalidInstance("unknown QMSTP family '" + s + "'");
}

struct QmstpData {
  MbqpInstance inst;
  std::vector<std::pair<int, int>> edges;  // variable e -> vertex pair
  Vec w;                                    // vertex weights (vsym)
  Mat coords;                               // vertex coordinates (esym)
};

inline QmstpData gen_qmstp(int nv, QmstpFamily fam, std::uint64_t seed) {
  if (nv < 3) throw InvalidInstance("gen_qmstp: need at least 3 vertices");
  QmstpData out;
  out.edges = complete_graph(nv).edges;
  const int m = static_cast<int>(out.edges.size());
  const char* tag = fam == QmstpFamily::Sym ? "sym" : fam == QmstpFamily::Vsym ? "vsym" : "esym";
  MbqpInstance inst = make_instance(m, std::string("qmstp_") + tag + std::to_string(nv) + "_s" + std::to_string(seed));
  switch (fam) {
    case QmstpFamily::Sym: {
      auto gd = substream(seed, "qmstp.diag");
      auto go = substream(seed, "qmstp.off");
      for (int e = 0; e < m; ++e) inst.Q(e, e) = uniform_int(gd, 1, 100);
      for (int e = 0; e < m; ++e)
        for (int f = e + 1; f < m; ++f) inst.Q(e, f) = inst.Q(f, e) = uniform_int(go, 1, 20);
      break;
    }
    case QmstpFamily::Vsym: {
      auto gd = substream(seed, "qmstp.diag");
      auto gw = substream(seed, "qmstp.w");
      out.w = Vec(nv);
      for (int v = 0; v < nv; ++v) out.w(v) = uniform_int(gw, 1, 10);
      for (int e = 0; e < m; ++e) inst.Q(e, e) = uniform_int(gd, 1, 10000);
      for (int e = 0; e < m; ++e)
        for (int f = e + 1; f < m; ++f) {
          const auto [i, j] = out.edges[e];
          const auto [k, l] = out.edges[f];
          inst.Q(e, f) = inst.Q(f, e) = out.w(i) * out.w(j) * out.w(k) * out.w(l);
        }
      break;
    }
    case QmstpFamily::Esym: {
      auto gc = substream(seed, "qmstp.coords");
      std::uniform_real_distribution<double> U(0.0, 100.0);
      out.coords = Mat(nv, 2);
      for (int v = 0; v < nv; ++v) {
        out.coords(v, 0) = U(gc);
        out.coords(v, 1) = U(gc);
      }
      Mat mid(m, 2);
      for (int e = 0; e < m; ++e) {
        const auto [i, j] = out.edges[e];
        mid.row(e) = 0.5 * (out.coords.row(i) + out.coords.row(j));
        inst.Q(e, e) = (out.coords.row(i) - out.coords.row(j)).norm();
      }
      for (int e = 0; e < m; ++e)
        for (int f = e + 1; f < m; ++f) inst.Q(e, f) = inst.Q(f, e) = (mid.row(e) - mid.row(f)).norm();
      break;
    }
  }
  inst.A = Mat::Ones(1, m);
  inst.b = Vec::Constant(1, nv - 1);
  inst.G = Mat::Zero(nv + m, m);
  inst.d = Vec::Zero(nv + m);
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = out.edges[e];
    inst.G(i, e) = inst.G(j, e) = -1.0;
    inst.G(nv + e, e) = 1.0;
  }
  inst.d.head(nv).setConstant(-1.0);
  inst.d.tail(m).setOnes();
  for (int e = 0; e < m; ++e) inst.B.push_back(e);
  out.inst = std::move(inst);
  return out;
}

// Relative gap between an exact optimum and a lower bound, in percent.
// The denominator is |v*| so that a valid bound gives a nonnegative gap.
inline double gap_percent(double v_star, double v) {
  const double den = std::abs(v_star) > 0.0 ? std::abs(v_star) : 1.0;
  return (v_star - v) / den * 100.0;
}

}  // namespace sdprlt
