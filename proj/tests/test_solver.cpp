#include <gtest/gtest.h>

#include "common.hpp"

using namespace sdprlt;
using sdprlt::testing::gaussian;
using sdprlt::testing::random_mixed;
using sdprlt::testing::random_sym;

namespace {

// Multipliers with some active entries so every penalty branch is exercised.
AugLagParams busy_params(const GeneralSdp& s, double sigma, std::uint64_t seed) {
  AugLagParams p = zero_params(s, sigma);
  p.lambda = gaussian(s.E.size(), 1, seed);
  p.mu = symmetrize(gaussian(s.cone.order(), s.cone.order(), seed + 1)).cwiseAbs().cwiseProduct(s.cone.mask);
  p.mu_lin = gaussian(s.I_lin.size(), 1, seed + 2).cwiseAbs();
  return p;
}

SymMat full_projection_oracle(const PreprocessContext& ctx, const SymMat& Ghat) {
  return oracle::dykstra_project(Ghat, {oracle::psd_set(), oracle::diag_pattern_set(ctx.idx, ctx.q),
                                        oracle::zero_product_set(ctx.Nm)});
}

}  // namespace

// ---- lowrank ----

TEST(Lowrank, FactorizedValueMatchesFullMatrix) {
  const GeneralSdp s = build_dnn(random_mixed(6, 1, 2, 3, 1));
  const AugLagParams prm = busy_params(s, 2.0, 2);
  const Mat R = gaussian(s.N, 3, 3);
  EXPECT_NEAR(f_value(s, R, prm), eval_lagrangian(s, gram_hat(R), prm, false).value, 1e-10);
}

TEST(Lowrank, FeasiblePointValueIgnoresSigma) {
  MbqpInstance inst = make_instance(2);
  inst.Q = SymMat::Identity(2, 2);
  const GeneralSdp s = build_shor(inst);
  Mat R(2, 1);
  R << 0.3, 0.4;
  const double a = f_value(s, R, zero_params(s, 1.0)), b = f_value(s, R, zero_params(s, 2.0));
  EXPECT_DOUBLE_EQ(a, frob_dot(s.C, gram_hat(R)));
  EXPECT_DOUBLE_EQ(a, b);
  // an inactive cone entry adds the squared violation over 2 sigma
  Mat Rn(2, 1);
  Rn << -0.5, 0.0;
  const double v = f_value(s, Rn, zero_params(s, 1.0));
  EXPECT_NEAR(v, frob_dot(s.C, gram_hat(Rn)) + 0.5 * (2 * 0.25), 1e-15);
}

TEST(Lowrank, GradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 4; ++trial) {
    const MbqpInstance inst = random_mixed(5 + trial, 1, 1 + trial % 2, 3, 10 + trial);
    const GeneralSdp s = trial % 2 ? build_dnn(inst) : build_shor(inst);
    const AugLagParams prm = busy_params(s, 0.5 + trial, 20 + trial);
    const Mat R = gaussian(s.N, 2 + trial % 3, 30 + trial) * 0.5;
    const Mat g = f_and_grad(s, R, prm).second;
    const Mat fd = oracle::fd_gradient([&](const Mat& X) { return f_value(s, X, prm); }, R, 1e-6);
    EXPECT_LE((g - fd).norm() / std::max(1.0, g.norm()), 1e-6) << "trial " << trial;
  }
}

TEST(Lowrank, RotationInvariance) {
  const GeneralSdp s = build_sdp_rlt(random_mixed(6, 1, 2, 4, 5));
  const AugLagParams prm = busy_params(s, 1.0, 6);
  const Mat R = gaussian(6, 3, 7);
  // R^ Q must fix e1, so only the trailing columns rotate
  Mat Qr = Mat::Identity(3, 3);
  Qr.bottomRightCorner(2, 2) = gaussian(2, 2, 8).householderQr().householderQ();
  EXPECT_NEAR(f_value(s, R * Qr, prm), f_value(s, R, prm), 1e-10);
}

TEST(Lowrank, FdGradientExamples) {
  const Mat R = gaussian(3, 2, 1);
  const Mat g = oracle::fd_gradient([](const Mat& X) { return 0.5 * X.squaredNorm(); }, R, 1e-5);
  EXPECT_LE((g - R).norm(), 1e-8);
  SymMat C = SymMat::Zero(4, 4);
  C(0, 0) = 1;
  const Mat g0 = oracle::fd_gradient([&](const Mat& X) { return frob_dot(C, gram_hat(X)); }, R, 1e-5);
  EXPECT_LE(g0.norm(), 1e-12);
  EXPECT_THROW(oracle::fd_gradient([](const Mat&) { return 0.0; }, R, 1e-3), std::invalid_argument);
}

TEST(Rgd, StationaryStartTakesNoSteps) {
  MbqpInstance inst = make_instance(2);
  inst.Q = SymMat::Identity(2, 2);
  const GeneralSdp s = build_sdp_rlt(inst);
  const ManifoldSpec spec = manifold_spec(s, 1);
  const Mat R0 = Mat::Zero(2, 1);
  RgdOptions opt;
  opt.grad_tol = 1e-8;
  const auto [pt, rep] = rgd_solve(s, spec, R0, zero_params(s), opt);
  EXPECT_EQ(rep.iterations, 0);
  EXPECT_EQ(pt.R, R0);
}

TEST(Rgd, NonmonotoneDecreaseAndCap) {
  const GeneralSdp s = build_sdp_rlt(gen_biq_random(10, 1.0, 3));
  const ManifoldSpec spec = manifold_spec(s, 2);
  const Mat R0 = random_feasible(spec, 4).R;
  RgdOptions opt;
  opt.grad_tol = 0.0;
  opt.max_iters = 50;
  std::vector<double> fs;
  const auto [pt, rep] = rgd_solve(s, spec, R0, zero_params(s), opt,
                                   [&](const RgdTraceRecord& r) { fs.push_back(r.f); });
  EXPECT_EQ(rep.iterations, 50);
  ASSERT_FALSE(rep.f_trace.empty());
  EXPECT_LE(rep.f_trace.back(), f_value(s, R0, zero_params(s)));
  // each accepted value sits below the max of the previous window
  for (std::size_t k = 1; k < rep.f_trace.size(); ++k) {
    double ref = -std::numeric_limits<double>::infinity();
    for (std::size_t j = k >= 5 ? k - 5 : 0; j < k; ++j) ref = std::max(ref, rep.f_trace[j]);
    EXPECT_LE(rep.f_trace[k], ref + 1e-12);
  }
  EXPECT_LE(feasibility_residual(spec, pt.R), 1e-8);
}

// ---- lifting ----

TEST(Preprocess, NoEqualities) {
  MbqpInstance inst = make_instance(3);
  inst.B = {2};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  EXPECT_EQ(ctx.Qn.cols(), 0);
  EXPECT_TRUE(ctx.J().isApprox(Mat::Identity(4, 4)));
  EXPECT_EQ(ctx.idx, (std::vector<int>{0, 3}));
}

TEST(Preprocess, SmallAffineExample) {
  MbqpInstance inst = make_instance(2);
  inst.A = Mat::Ones(1, 2);
  inst.b = Vec::Ones(1);
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  Vec P(3);
  P << 1, -1, -1;
  EXPECT_LE((ctx.P.col(0) - P).norm(), 1e-15);
  const Mat J = ctx.J();
  EXPECT_LE((J * ctx.Nm).norm(), 1e-10);
  EXPECT_LE((J * J - J).norm(), 1e-12);
  EXPECT_LE((J - J.transpose()).norm(), 1e-12);
}

TEST(Preprocess, BlockIdentities) {
  for (int n : {1, 5, 20, 50}) {
    MbqpInstance inst = make_instance(n);
    for (int i = 0; i < n; i += 2) inst.B.push_back(i);
    const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
    EXPECT_LE(ctx.identity_error, 1e-14) << n;
    const Mat K = K_matrix(n);
    EXPECT_LE((K * K_inverse(n) - Mat::Identity(n + 1, n + 1)).cwiseAbs().maxCoeff(), 0.0);
    SymMat E11 = SymMat::Zero(n + 1, n + 1);
    E11(0, 0) = 1;
    EXPECT_LE((congruence(H0_matrix(n), K) - E11).cwiseAbs().maxCoeff(), 1e-14);
    const SymMat D = 4.0 * congruence(Hk_matrix(n, 0), K) + congruence(H0_matrix(n), K);
    SymMat want = SymMat::Zero(n + 1, n + 1);
    want(1, 1) = 1;
    EXPECT_LE((D - want).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Preprocess, DiagAdjointPairing) {
  MbqpInstance inst = make_instance(4);
  inst.B = {1, 3};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  const SymMat Y = random_sym(5, 1);
  const Vec y = gaussian(3, 1, 2);
  EXPECT_NEAR(ctx.D(Y).dot(y), frob_dot(Y, ctx.Dadj(y)), 1e-14);
}

TEST(Ssn, FeasibleInputIsFixed) {
  MbqpInstance inst = make_instance(3);
  inst.B = {0, 1, 2};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  Mat V = gaussian(4, 2, 3);
  for (int i = 0; i < 4; ++i) V.row(i).normalize();  // unit diagonal on every picked position
  const SymMat G = V * V.transpose();
  const SsnResult r = ssn_project(ctx, G, 0.0, Vec(), 1e-10);
  EXPECT_EQ(r.report.newton_iters, 0);
  EXPECT_LE(r.y.norm(), 0.0);
  EXPECT_LE((r.Yhat - G).norm(), 1e-12);
}

TEST(Ssn, MatchesDykstraWithoutEqualities) {
  MbqpInstance inst = make_instance(3);
  inst.B = {2};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  const SymMat G = random_sym(4, 5) * 2.0;
  const SsnResult r = ssn_project(ctx, G, 0.0, Vec(), 1e-12);
  EXPECT_LE((r.Yhat - full_projection_oracle(ctx, G)).norm(), 1e-7);
}

TEST(Ssn, MatchesDykstraWithEqualities) {
  MbqpInstance inst = make_instance(5);
  inst.A = Mat::Ones(1, 5);
  inst.b = Vec::Constant(1, 2.0);
  inst.B = {0, 1, 2};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  const SymMat G = random_sym(6, 6) * 2.0;
  const SsnResult r = ssn_project(ctx, G, 0.0, Vec(), 1e-12);
  const SymMat oracle_Y = full_projection_oracle(ctx, G);
  EXPECT_LE((r.Yhat - oracle_Y).norm(), 1e-7);
  EXPECT_LE((r.Yhat * ctx.Nm).norm(), 1e-9);
  EXPECT_LE((ctx.D(r.Yhat) - ctx.q).norm(), 1e-10);
}

TEST(Ssn, WarmStartAtSolutionNeedsNoIterations) {
  MbqpInstance inst = make_instance(4);
  inst.B = {0, 1, 2, 3};
  const PreprocessContext ctx = preprocess(build_sdp_rlt(inst));
  const SymMat G = random_sym(5, 9);
  const SsnResult first = ssn_project(ctx, G, 0.0, Vec(), 1e-11);
  const SsnResult again = ssn_project(ctx, G, first.y0, first.y, 1e-10);
  EXPECT_EQ(again.report.newton_iters, 0);
  EXPECT_TRUE(again.report.warm_started);
}

TEST(WarmStart, Arithmetic) {
  const SymMat S1 = random_sym(3, 1);
  const WarmStart z = warm_start_duals(1.0, Vec::Constant(2, 4.0), 2.0, S1, 0.0);
  EXPECT_EQ(z.y0, 0.0);
  EXPECT_EQ(z.y.norm(), 0.0);
  EXPECT_EQ(z.S2.norm(), 0.0);
  EXPECT_EQ(warm_start_duals(0.0, Vec::Zero(2), 2.0, S1, 0.5).y0, 1.0);
  const WarmStart w = warm_start_duals(1.0, Vec::Constant(2, 4.0), 0.0, S1, 1.0);
  EXPECT_EQ(w.y, Eigen::Vector3d(-1.0, 1.0, 1.0));
  const Mat K = K_matrix(2);
  EXPECT_LE((w.S2 - K * S1 * K.transpose()).norm(), 1e-15);
}

TEST(PgStep, RankMatchesEigenCountAndDescends) {
  const GeneralSdp s = build_sdp_rlt(gen_biq_random(20, 1.0, 11));
  const PreprocessContext ctx = preprocess(s);
  const ManifoldSpec spec = manifold_spec(s, 2);
  const Mat R = random_feasible(spec, 12).R;
  const AugLagParams prm = zero_params(s, 1.0);
  const PgResult pg = pg_step(s, ctx, spec, R, prm);
  EXPECT_LE(pg.L1, pg.L0 + 1e-10 * (1 + std::abs(pg.L0)));
  const Vec ev = sym_eig(pg.Y1).values;
  int count = 0;
  for (int i = 0; i < ev.size(); ++i) count += ev(i) > 1e-8 * ev(0);
  EXPECT_EQ(pg.rank, count);
  EXPECT_EQ(pg.point.R.cols(), pg.rank);
  EXPECT_LE(feasibility_residual(pg.spec, pg.point.R), 1e-8);
}

TEST(PgStep, OptimalPointIsFixed) {
  MbqpInstance inst = make_instance(2);
  inst.Q = SymMat::Identity(2, 2);
  const GeneralSdp s = build_sdp_rlt(inst);
  const ManifoldSpec spec = manifold_spec(s, 1);
  const Mat R = Mat::Zero(2, 1);
  const PgResult pg = pg_step(s, preprocess(s), spec, R, zero_params(s));
  EXPECT_LE((pg.Y1 - gram_hat(R)).norm(), 1e-7);
}

// ---- alm ----

TEST(Alm, UpdateMultipliersExamples) {
  MbqpInstance inst = make_instance(2);
  inst.A = Mat(1, 2);
  inst.A << 1, 0;
  inst.b = Vec::Ones(1);
  const GeneralSdp s = build_shor(inst);
  AlmState st = initial_state(s, 1.0);
  SymMat Y = SymMat::Zero(3, 3);
  Y(0, 0) = 1;
  Y(0, 1) = Y(1, 0) = 1.0;
  Y(0, 2) = Y(2, 0) = -1.0;
  // E(Y) = g, cone entries (1, -1)
  const AlmState a = update_multipliers(st, s, Y);
  EXPECT_EQ(a.lambda(0), 0.0);
  EXPECT_EQ(a.mu(0, 1), 0.0);
  EXPECT_EQ(a.mu(0, 2), 1.0);

  st.lambda(0) = 1.0;
  st.sigma = 2.0;
  Y(0, 1) = Y(1, 0) = 1.5;
  ASSERT_NEAR(s.E.apply(Y)(0) - s.E.rhs(0), 0.5, 1e-15);
  EXPECT_NEAR(update_multipliers(st, s, Y).lambda(0), 0.0, 1e-15);

  // feasible Y leaves zero multipliers unchanged
  Y(0, 1) = Y(1, 0) = 1.0;
  Y(0, 2) = Y(2, 0) = 0.0;
  const AlmState z = update_multipliers(initial_state(s, 1.0), s, Y);
  EXPECT_EQ(z.lambda.norm(), 0.0);
  EXPECT_EQ(z.mu.norm(), 0.0);
}

TEST(Alm, UpdateSigmaSchedule) {
  AlmState st;
  st.sigma = 1.0;
  EXPECT_DOUBLE_EQ(update_sigma(st, 3.0, 1.0).sigma, 1.5);
  st.sigma = 1.5;
  EXPECT_DOUBLE_EQ(update_sigma(st, 0.1, 1.0).sigma, 1.0);
  EXPECT_DOUBLE_EQ(update_sigma(st, 1.0, 1.0).sigma, 1.5);
  EXPECT_DOUBLE_EQ(update_sigma(st, 1.0, 0.0).sigma, 2.25);
  const AlmState u = update_sigma(st, 3.0, 1.0);
  EXPECT_DOUBLE_EQ(u.sigma * u.t, 1.0);
}

TEST(Alm, SyntheticKktTupleHasZeroResiduals) {
  MbqpInstance inst = make_instance(2);
  inst.Q = SymMat::Identity(2, 2);
  const GeneralSdp s = build_shor(inst);
  const DualCertificate c = recover_duals(s, Mat::Zero(2, 1), zero_params(s));
  EXPECT_LE(c.Rp, 1e-12);
  EXPECT_LE(c.Rd, 1e-12);
  EXPECT_LE(c.Rc, 1e-12);
  EXPECT_DOUBLE_EQ(c.Rc, complementarity_residual(c.Y, c.S));
}

TEST(Alm, ToySolve) {
  MbqpInstance inst = make_instance(2);
  inst.Q = SymMat::Identity(2, 2);
  const SolveResult r = solve(build_sdp_rlt(inst));
  EXPECT_TRUE(r.report.converged);
  EXPECT_NEAR(r.report.objective, 0.0, 1e-6);
  EXPECT_EQ(r.report.final_rank, 1);
}

TEST(Alm, SmallBiqBoundAndCertificate) {
  const MbqpInstance inst = gen_biq_random(8, 1.0, 21);
  const GeneralSdp s = build_sdp_rlt(inst);
  std::vector<IterLog> logs;
  const SolveResult r = solve(s, {}, [&](const IterLog& l) { logs.push_back(l); });
  ASSERT_TRUE(r.report.converged);
  EXPECT_LT(r.cert.rmax(), 1e-6);
  EXPECT_EQ(logs.size(), static_cast<std::size_t>(r.report.alm_iters));
  EXPECT_GE(r.cert.mu.minCoeff(), 0.0);
  const double vstar = oracle::brute_force_mbqp(inst).value;
  EXPECT_LE(r.report.objective, vstar + 1e-5 * (1 + std::abs(vstar)));
  // rank trace entries are PG factorization ranks
  EXPECT_EQ(r.report.rank_trace.size(), static_cast<std::size_t>(r.report.pg_steps));
}

TEST(Alm, DefaultRank) {
  EXPECT_EQ(default_rank0(1), 1);
  EXPECT_EQ(default_rank0(100), 20);
  EXPECT_EQ(default_rank0(101), 21);
  EXPECT_EQ(default_rank0(5000), 200);
}
