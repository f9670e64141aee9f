#include <gtest/gtest.h>

#include <sstream>

#include "common.hpp"

using namespace sdprlt;
using sdprlt::testing::gaussian;
using sdprlt::testing::random_sym;

namespace {

double bound(const MbqpInstance& inst, RelaxKind kind = RelaxKind::SdpRlt) {
  const SolveResult r = solve(build(inst, kind));
  EXPECT_TRUE(r.report.converged) << inst.name;
  return r.report.objective;
}

void expect_valid_bound(const MbqpInstance& inst, RelaxKind kind = RelaxKind::SdpRlt) {
  const double vstar = oracle::brute_force_mbqp(inst).value;
  const double v = bound(inst, kind);
  EXPECT_LE(v, vstar + 1e-5 * (1 + std::abs(vstar))) << inst.name;
  EXPECT_GE(gap_percent(vstar, v), -1e-3) << inst.name;
}

}  // namespace

// ---- ORLIB ----

TEST(Orlib, SingleVariable) {
  std::istringstream is("1\n1 1\n1 1 5\n");
  const auto all = read_orlib_biq_all(is);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].n, 1);
  EXPECT_EQ(all[0].c(0), -2.5);
  EXPECT_EQ(all[0].B, std::vector<int>{0});
  // maximizing 5 x^2 over binary x -> minimizing -5 at x = 1
  EXPECT_EQ(all[0].objective(Vec::Ones(1)), -5.0);
}

TEST(Orlib, OffDiagonalConvention) {
  std::istringstream is("1\n2 2\n1 2 3\n2 2 -4\n");
  const MbqpInstance inst = read_orlib_biq_all(is)[0];
  EXPECT_EQ(inst.Q(0, 1), -3.0);
  EXPECT_EQ(inst.Q(1, 0), -3.0);
  EXPECT_EQ(inst.c(1), 2.0);
  // x = (1,1): 2 q12 + q22 in the max form
  EXPECT_EQ(inst.objective(Vec::Ones(2)), -(2 * 3.0 - 4.0));
}

TEST(Orlib, RoundTrip) {
  const std::vector<MbqpInstance> src = {gen_biq_random(6, 0.5, 1), gen_biq_random(4, 1.0, 2)};
  std::stringstream ss;
  write_orlib_biq(src, ss);
  const auto back = read_orlib_biq_all(ss);
  ASSERT_EQ(back.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].Q, src[k].Q);
    EXPECT_EQ(back[k].c, src[k].c);
    EXPECT_EQ(back[k].B, src[k].B);
  }
}

TEST(Orlib, Errors) {
  std::istringstream dup("1\n2 2\n1 2 3\n2 1 3\n");
  EXPECT_THROW(read_orlib_biq_all(dup), DuplicateEntry);
  std::istringstream shortf("1\n2 3\n1 2 3\n");
  EXPECT_THROW(read_orlib_biq_all(shortf), ParseError);
  std::istringstream range("1\n2 1\n1 3 3\n");
  EXPECT_THROW(read_orlib_biq_all(range), ParseError);
  EXPECT_THROW(read_orlib_biq("/nonexistent/bqp.txt"), ParseError);
}

// ---- generators ----

TEST(Generators, BiqDensityAndDeterminism) {
  const MbqpInstance a = gen_biq_random(2, 1.0, 7), b = gen_biq_random(2, 1.0, 7);
  EXPECT_EQ(a.Q, b.Q);
  EXPECT_EQ(a.c, b.c);
  EXPECT_NE(a.Q, gen_biq_random(2, 1.0, 8).Q);
  for (int i = 0; i < 2; ++i) EXPECT_GE(std::abs(a.c(i)), 0.0);
  EXPECT_TRUE(validate(a).empty());
  const MbqpInstance big = gen_biq_random(30, 1.0, 3);
  EXPECT_LE(big.Q.cwiseAbs().maxCoeff(), 100.0);
  EXPECT_LE(big.c.cwiseAbs().maxCoeff(), 50.0);
}

TEST(Generators, AllFamiliesValidateAndRepeat) {
  const std::vector<std::pair<MbqpInstance, MbqpInstance>> pairs = {
      {gen_qkp(8, 0.5, 24), gen_qkp(8, 0.5, 24)},
      {gen_sstqp_psd(8, 2), gen_sstqp_psd(8, 2)},
      {gen_qmstp(4, QmstpFamily::Sym, 3).inst, gen_qmstp(4, QmstpFamily::Sym, 3).inst},
      {gen_qmstp(4, QmstpFamily::Vsym, 3).inst, gen_qmstp(4, QmstpFamily::Vsym, 3).inst},
      {gen_qmstp(4, QmstpFamily::Esym, 3).inst, gen_qmstp(4, QmstpFamily::Esym, 3).inst},
      {build_theta_plus(complete_graph(4)), build_theta_plus(complete_graph(4))},
  };
  for (const auto& [a, b] : pairs) {
    EXPECT_TRUE(validate(a).empty()) << a.name;
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump()) << a.name;
  }
}

TEST(Generators, SubstreamsAreKeyedByField) {
  auto a = substream(5, "x"), b = substream(5, "x"), c = substream(5, "y");
  const auto va = a(), vb = b(), vc = c();
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
}

TEST(Theta, EmptyAndCompleteGraphs) {
  EXPECT_NEAR(bound(build_theta_plus(empty_graph(4))), -4.0, 1e-5);
  EXPECT_NEAR(bound(build_theta_plus(complete_graph(3))), -1.0, 1e-4);
  EXPECT_EQ(oracle::brute_force_mbqp(build_theta_plus(empty_graph(4))).value, -4.0);
  EXPECT_EQ(oracle::brute_force_mbqp(build_theta_plus(complete_graph(3))).value, -1.0);
}

TEST(Gset, Reader) {
  std::istringstream is("3 2\n1 2 1\n3 2 -1\n");
  const GraphInstance g = read_gset(is);
  EXPECT_EQ(g.n, 3);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[1], std::make_pair(1, 2));
  EXPECT_EQ(g.weights[1], -1.0);
  std::istringstream loop("2 1\n1 1 1\n");
  EXPECT_THROW(read_gset(loop), ParseError);
}

TEST(Qkp, Ranges) {
  const MbqpInstance inst = gen_qkp(3, 1.0, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_GE(-inst.Q(i, j), 1.0);
      EXPECT_LE(-inst.Q(i, j), 100.0);
    }
  for (int j = 0; j < 3; ++j) {
    EXPECT_GE(inst.A(0, j), 1.0);
    EXPECT_LE(inst.A(0, j), 50.0);
  }
  EXPECT_DOUBLE_EQ(qkp_capacity(Vec::Constant(3, 10.0)), 27.0);
  EXPECT_EQ(inst.b(0), std::floor(qkp_capacity(inst.A.row(0).transpose())));
}

TEST(Qkp, BoundBelowEnumeration) { expect_valid_bound(gen_qkp(8, 0.5, 24)); }

TEST(Ccmssc, TwoPointsTwoClusters) {
  Mat P(2, 2);
  P << 0, 0, 3, 4;
  const MbqpInstance inst = gen_ccmssc(P, {1, 1});
  EXPECT_EQ(inst.n, 4);
  EXPECT_EQ(inst.m(), 3);
  EXPECT_NEAR(oracle::brute_force_mbqp(inst).value, 0.0, 1e-12);
  EXPECT_THROW(gen_ccmssc(P, {1, 2}), SizeMismatch);
}

TEST(Ccmssc, SeparatedPairs) {
  Mat P(4, 2);
  P << 0, 0, 1, 0, 10, 10, 10, 12;
  const MbqpInstance inst = gen_ccmssc(P, {2, 2});
  // within-pair squared distances: 1 and 4; each counted twice over the cluster size 2
  const double vstar = oracle::brute_force_mbqp(inst).value;
  EXPECT_NEAR(vstar, 1.0 + 4.0, 1e-9);
  EXPECT_LE(bound(inst), vstar + 1e-5 * (1 + vstar));
}

TEST(Ccmssc, CsvRoundTrip) {
  const Mat P = gaussian(5, 3, 1) * 1e3;
  std::stringstream ss;
  write_points_csv(P, ss);
  EXPECT_EQ(read_points_csv(ss), P);
  std::istringstream bad("1,2\n3\n");
  EXPECT_THROW(read_points_csv(bad), ParseError);
}

TEST(Sstqp, Structure) {
  const MbqpInstance inst = gen_sstqp_psd(8, 1);
  EXPECT_EQ(inst.n, 16);
  EXPECT_EQ(inst.m(), 2);
  EXPECT_EQ(inst.A.row(1).tail(8), Eigen::RowVectorXd::Ones(8));
  EXPECT_EQ(inst.b(1), 1.0);
  EXPECT_EQ(sstqp_rho(8), 1);
  EXPECT_EQ(sstqp_rho(40), 5);
  EXPECT_GE(sym_eig(inst.Q).values.minCoeff(), -1e-10);
}

TEST(Sstqp, BoundBelowSupportEnumeration) { expect_valid_bound(gen_sstqp_psd(8, 3)); }

TEST(Qmstp, Structure) {
  const QmstpData d = gen_qmstp(3, QmstpFamily::Sym, 1);
  EXPECT_EQ(d.inst.n, 3);
  EXPECT_EQ(d.inst.m(), 1);
  EXPECT_EQ(d.inst.l(), 6);
  EXPECT_EQ(d.inst.b(0), 2.0);
  // cut rows first: each vertex touches two edges
  for (int v = 0; v < 3; ++v) EXPECT_EQ(d.inst.G.row(v).sum(), -2.0);
}

TEST(Qmstp, VsymRecompute) {
  const QmstpData d = gen_qmstp(5, QmstpFamily::Vsym, 4);
  const int m = static_cast<int>(d.edges.size());
  for (int e = 0; e < m; ++e)
    for (int f = 0; f < m; ++f) {
      if (e == f) continue;
      const double w = d.w(d.edges[e].first) * d.w(d.edges[e].second) * d.w(d.edges[f].first) * d.w(d.edges[f].second);
      EXPECT_EQ(d.inst.Q(e, f), w);
    }
}

TEST(Qmstp, BoundBelowEnumeration) { expect_valid_bound(gen_qmstp(5, QmstpFamily::Sym, 2).inst); }

TEST(Gap, Formula) {
  EXPECT_DOUBLE_EQ(gap_percent(-100.0, -110.0), 10.0);
  EXPECT_DOUBLE_EQ(gap_percent(200.0, 190.0), 5.0);
}

// ---- oracle ----

TEST(BruteForce, Examples) {
  MbqpInstance a = make_instance(3);
  a.Q = SymMat::Identity(3, 3);
  a.B = {2};
  EXPECT_NEAR(oracle::brute_force_mbqp(a).value, 0.0, 1e-9);
  a.c = -Vec::Ones(3);
  const auto r = oracle::brute_force_mbqp(a);
  EXPECT_NEAR(r.value, -3.0, 1e-8);
  EXPECT_LE((r.x - Vec::Ones(3)).norm(), 1e-4);
  MbqpInstance big = make_instance(21);
  for (int i = 0; i < 21; ++i) big.B.push_back(i);
  EXPECT_THROW(oracle::brute_force_mbqp(big), TooLarge);
}

TEST(BruteForce, PermutationInvariant) {
  const MbqpInstance inst = gen_biq_random(7, 0.8, 5);
  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  Eigen::PermutationMatrix<Eigen::Dynamic> Pm(7);
  for (int i = 0; i < 7; ++i) Pm.indices()(i) = perm[i];
  MbqpInstance q = inst;
  q.Q = Pm * inst.Q * Pm.transpose();
  q.c = Pm * inst.c;
  EXPECT_DOUBLE_EQ(oracle::brute_force_mbqp(inst).value, oracle::brute_force_mbqp(q).value);
}

TEST(BruteForce, BiqBoundBelowOptimum) { expect_valid_bound(gen_biq_random(10, 1.0, 6)); }

TEST(Dykstra, Examples) {
  const SymMat G = random_sym(5, 1);
  EXPECT_LE((oracle::dykstra_project(G, {oracle::psd_set()}) - psd_project(G)).norm(), 1e-12);
  const SymMat F = SymMat::Identity(4, 4);
  const SymMat same = oracle::dykstra_project(F, {oracle::psd_set(), oracle::diag_pattern_set({0, 1, 2, 3}, Vec::Ones(4))});
  EXPECT_LE((same - F).norm(), 1e-14);
}

TEST(Dykstra, OutputFeasibleForEverySet) {
  const SymMat G = random_sym(6, 2) * 3.0;
  SymMat H = SymMat::Zero(6, 6);
  H(0, 5) = H(5, 0) = 1.0;
  const std::vector<oracle::ConvexSet> sets = {oracle::psd_set(), oracle::hyperplane_set(H, 0.3),
                                               oracle::nonneg_set(SymMat::Ones(6, 6))};
  const SymMat X = oracle::dykstra_project(G, sets);
  for (const auto& s : sets) EXPECT_LE((s.project(X) - X).norm(), 1e-8) << s.name;
}

TEST(Dykstra, ProjectedCongruenceMatchesIntersection) {
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5 + trial;
    const Mat P = gaussian(n, 2, 10 + trial);
    const SymMat G = random_sym(n, 20 + trial);
    const Eigen::HouseholderQR<Mat> qr(P);
    const Mat Qp = qr.householderQ() * Mat::Identity(n, 2);
    const Mat J = Mat::Identity(n, n) - Qp * Qp.transpose();
    const SymMat direct = psd_project(symmetrize(J * G * J));
    // {YP = 0} is implied by the other two sets; it gives Dykstra a linear rate on this face
    const SymMat viaD = oracle::dykstra_project(
        G, {oracle::psd_set(), oracle::hyperplane_set(P * P.transpose(), 0.0), oracle::zero_product_set(P)});
    EXPECT_LE((direct - viaD).norm(), 1e-7);
    EXPECT_LE((direct * P).norm(), 1e-9);
  }
}

// ---- report ----

TEST(Report, CsvRoundTrip) {
  RunRecord a;
  a.problem = "bqp,\"quoted\"";
  a.relax = "dnn";
  a.alm_iters = 12;
  a.rgd_iters = 340;
  a.pg_steps = 3;
  a.rank = 7;
  a.rmax = 9.87654321e-7;
  a.objective = -8036.65843;
  a.time = 0.1 + 0.2;
  a.pg_time = std::numeric_limits<double>::infinity();
  RunRecord b = a;
  b.problem = "plain";
  b.status = "time_limit";
  std::stringstream ss;
  write_run_csv({a, b}, ss);
  const auto back = read_run_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
  std::istringstream bad(std::string(run_record_header()) + "\nx,y\n");
  EXPECT_THROW(read_run_csv(bad), ParseError);
}

TEST(Report, PerformanceProfile) {
  Mat T(2, 2);
  T << 1, 2, 4, 2;
  const Mat r = perf_ratios(T);
  Mat want(2, 2);
  want << 1, 2, 2, 1;
  EXPECT_EQ(r, want);
  const Vec f1 = perf_profile(r, 1.0);
  EXPECT_EQ(f1, Eigen::Vector2d(0.5, 0.5));
  EXPECT_EQ(perf_profile(r, 2.0), Eigen::Vector2d(1.0, 1.0));
  Mat Tf(1, 2);
  Tf << 3, std::numeric_limits<double>::infinity();
  EXPECT_EQ(perf_profile(perf_ratios(Tf), 1e9), Eigen::Vector2d(1.0, 0.0));
}

TEST(Report, TimeTablePivot) {
  RunRecord a{"p1", "sdprlt", "dnn", 1, 1, 1, 1, 0, 0, 2.0, 0, "converged"};
  RunRecord b{"p1", "sdprlt", "comp", 1, 1, 1, 1, 0, 0, 3.0, 0, "time_limit"};
  const TimeTable t = time_table({a, b});
  ASSERT_EQ(t.solvers.size(), 2u);
  EXPECT_EQ(t.T(0, 0), 2.0);
  EXPECT_TRUE(std::isinf(t.T(0, 1)));
}
