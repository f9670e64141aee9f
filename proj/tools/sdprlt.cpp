// Command-line front end: gen, build, solve, verify, bench, profile.
// Exit codes: 0 ok, 2 bad arguments or input, 3 solver failure or time limit, 4 verification failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sdprlt/sdprlt.hpp"

namespace fs = std::filesystem;
using namespace sdprlt;

namespace {

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  const char* env = std::getenv("SDPRLT_OUT_DIR");
  return env && *env ? env : "sdprlt_out";
}

MbqpInstance load_instance(const std::string& path, int orlib_index) {
  if (!fs::exists(path)) throw BadInput("no such file: " + path);
  if (fs::path(path).extension() == ".json") return read_instance(path);
  return read_orlib_biq(path, orlib_index);
}

struct SolveFlags {
  std::string relax = "sdprlt";
  double tol = 1e-6;
  double time_limit = 3600.0;
  int rank0 = 0;
  double sigma0 = 1.0;
  int pg_every = 5;
  int rgd_cap = 50;
  std::uint64_t seed = 1;
  bool strengthen = false;
  bool drop_redundant = false;
  int orlib_index = 0;

  void attach(CLI::App* app) {
    app->add_option("--relax", relax, "shor | sdprlt | dnn | comp")->check(CLI::IsMember({"shor", "sdprlt", "dnn", "comp"}));
    app->add_option("--tol", tol, "stopping tolerance on R_max");
    app->add_option("--time-limit", time_limit, "seconds");
    app->add_option("--rank0", rank0, "initial rank (0: min(200, ceil(n/5)))");
    app->add_option("--sigma0", sigma0, "initial penalty");
    app->add_option("--pg-every", pg_every, "PG step every k outer iterations");
    app->add_option("--rgd-cap", rgd_cap, "max RGD iterations per outer iteration");
    app->add_option("--seed", seed, "seed for the initial point");
    app->add_flag("--strengthen", strengthen, "add x_B <= e before relaxing");
    app->add_flag("--drop-redundant", drop_redundant, "drop the redundant RLT row (sdprlt only)");
    app->add_option("--orlib-index", orlib_index, "problem index inside an ORLIB file (1-based)")
        ->transform([](std::string s) { return std::to_string(std::stoi(s) - 1); });
  }

  SolveOptions options() const {
    SolveOptions o;
    o.tol = tol;
    o.time_limit = time_limit;
    o.rank0 = rank0;
    o.sigma0 = sigma0;
    o.pg_every = pg_every;
    o.rgd_cap = rgd_cap;
    o.seed = seed;
    return o;
  }

  GeneralSdp relaxation(MbqpInstance inst) const {
    if (strengthen) inst = strengthen_binary(inst);
    const RelaxKind k = relax_kind_from_string(relax);
    if (k == RelaxKind::SdpRlt) return build_sdp_rlt(inst, drop_redundant);
    return build(inst, k);
  }
};

RunRecord make_record(const std::string& problem, const std::string& relax, const SolveResult& r) {
  RunRecord rec;
  rec.problem = problem;
  rec.relax = relax;
  rec.alm_iters = r.report.alm_iters;
  rec.rgd_iters = r.report.rgd_iters;
  rec.pg_steps = r.report.pg_steps;
  rec.rank = r.report.final_rank;
  rec.rmax = r.report.rmax;
  rec.objective = r.report.objective;
  rec.time = r.report.time;
  rec.pg_time = r.report.pg_time;
  rec.status = r.report.converged ? "converged" : r.report.time_limit_hit ? "time_limit" : "failed";
  return rec;
}

void print_table(const std::vector<RunRecord>& rs, std::ostream& os) {
  os << std::left << std::setw(24) << "problem" << std::setw(8) << "relax" << std::setw(18) << "iteration"
     << std::setw(6) << "rank" << std::setw(10) << "R_max" << std::setw(18) << "objective" << std::setw(10) << "time"
     << "TPG\n";
  for (const auto& r : rs) {
    std::ostringstream it, rm, ob, tm, tp;
    it << r.alm_iters << "," << r.rgd_iters << "," << r.pg_steps;
    rm << std::scientific << std::setprecision(1) << r.rmax;
    ob << std::scientific << std::setprecision(8) << r.objective;
    tm << std::fixed << std::setprecision(2) << r.time;
    tp << std::fixed << std::setprecision(2) << r.pg_time;
    os << std::left << std::setw(24) << r.problem << std::setw(8) << r.relax << std::setw(18) << it.str()
       << std::setw(6) << r.rank << std::setw(10) << rm.str() << std::setw(18) << ob.str() << std::setw(10)
       << tm.str() << tp.str() << "\n";
  }
}

// Solves and writes run.csv, log.jsonl and rank_trace.txt under dir.
SolveResult solve_to_dir(const GeneralSdp& sdp, const SolveOptions& opt, const fs::path& dir, RunRecord& rec) {
  fs::create_directories(dir);
  std::ofstream log(dir / "log.jsonl");
  SolveResult r = solve(sdp, opt, [&](const IterLog& l) { log << to_jsonl(l) << "\n"; });
  const std::string problem = rec.problem, relax = rec.relax;
  rec = make_record(problem, relax, r);
  std::ofstream csv(dir / "run.csv");
  write_run_csv({rec}, csv);
  std::ofstream rt(dir / "rank_trace.txt");
  for (int k : r.report.rank_trace) rt << k << "\n";
  return r;
}

// ---- gen ----

struct GenFlags {
  std::string family = "biq";
  int n = 20;
  double density = 1.0;
  double p = 0.5;
  std::uint64_t seed = 1;
  std::string graph;
  std::string points;
  std::vector<int> sizes;
  std::string qmstp = "sym";
  std::string orlib;
  int orlib_index = 1;
  bool strengthen = false;
  std::string out;
};

int run_gen(const GenFlags& g) {
  MbqpInstance inst;
  if (!g.orlib.empty()) inst = read_orlib_biq(g.orlib, g.orlib_index - 1);
  else if (g.family == "biq") inst = gen_biq_random(g.n, g.density, g.seed);
  else if (g.family == "qkp") inst = gen_qkp(g.n, g.p, g.seed);
  else if (g.family == "sstqp") inst = gen_sstqp_psd(g.n, g.seed);
  else if (g.family == "qmstp") inst = gen_qmstp(g.n, qmstp_family_from_string(g.qmstp), g.seed).inst;
  else if (g.family == "theta") {
    GraphInstance gr;
    if (g.graph == "complete") gr = complete_graph(g.n);
    else if (g.graph.empty() || g.graph == "empty") gr = empty_graph(g.n);
    else gr = read_gset(g.graph);
    inst = build_theta_plus(gr, "theta_" + (g.graph.empty() ? std::string("empty") : fs::path(g.graph).stem().string()));
  } else if (g.family == "ccmssc") {
    if (g.points.empty()) throw BadInput("ccmssc needs --points");
    inst = gen_ccmssc(read_points_csv(g.points), g.sizes, "ccmssc_" + fs::path(g.points).stem().string());
  } else {
    throw BadInput("unknown family " + g.family);
  }
  if (g.strengthen) inst = strengthen_binary(inst);
  require_valid(inst);
  const std::string out = g.out.empty() ? (fs::path(default_out_dir()) / (inst.name + ".json")).string() : g.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_instance(inst, out);
  std::cout << out << "\n";
  return 0;
}

// ---- build ----

int run_build(const std::string& path, const SolveFlags& f, const std::string& out) {
  const MbqpInstance inst = load_instance(path, f.orlib_index);
  const GeneralSdp sdp = f.relaxation(inst);
  const CountRecord c = audit_counts(sdp);
  const std::string target =
      out.empty() ? (fs::path(default_out_dir()) / (inst.name + "_" + f.relax + ".sdp")).string() : out;
  if (fs::path(target).has_parent_path()) fs::create_directories(fs::path(target).parent_path());
  std::ofstream os(target);
  export_sparse(sdp, os);
  nlohmann::json j = {{"export", target},
                      {"order", c.order},
                      {"manifold_equalities", c.manifold_equalities},
                      {"penalized_equalities", c.penalized_equalities},
                      {"equalities", c.equalities},
                      {"rlt", c.rlt},
                      {"mixed", c.mixed},
                      {"linear", c.linear},
                      {"nonneg", c.nonneg},
                      {"table_inequalities", c.table_inequalities},
                      {"expected_equalities", c.expected_equalities},
                      {"expected_inequalities", c.expected_inequalities},
                      {"matches", c.matches}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---- solve ----

int run_solve(const std::string& path, const SolveFlags& f, const std::string& out_dir) {
  const MbqpInstance inst = load_instance(path, f.orlib_index);
  const GeneralSdp sdp = f.relaxation(inst);
  RunRecord rec;
  rec.problem = inst.name.empty() ? fs::path(path).stem().string() : inst.name;
  rec.relax = f.relax;
  const fs::path dir = fs::path(out_dir.empty() ? default_out_dir() : out_dir) / (rec.problem + "_" + f.relax);
  solve_to_dir(sdp, f.options(), dir, rec);
  print_table({rec}, std::cout);
  std::cout << "artifacts: " << dir.string() << "\n";
  return rec.status == "converged" ? 0 : 3;
}

// ---- verify ----

// Random instance with inequality rows and a handful of feasible binary points.
bool verify_phi(int n, std::uint64_t seed) {
  auto g = substream(seed, "verify.phi");
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int l = std::max(1, n / 2);
  MbqpInstance inst = make_instance(n, "phi_check");
  for (int i = 0; i < n; ++i) {
    inst.c(i) = U(g);
    for (int j = i; j < n; ++j) inst.Q(i, j) = inst.Q(j, i) = U(g);
  }
  for (int i = 0; i < n; ++i) inst.B.push_back(i);
  inst.G = Mat(l, n);
  for (int k = 0; k < l; ++k)
    for (int j = 0; j < n; ++j) inst.G(k, j) = std::abs(U(g));
  inst.d = inst.G.rowwise().sum() * 0.6;
  std::vector<Vec> pts;
  for (int tries = 0; tries < 200 && pts.size() < 6; ++tries) {
    Vec x(n);
    for (int j = 0; j < n; ++j) x(j) = U(g) > 0 ? 1.0 : 0.0;
    if ((inst.G * x - inst.d).maxCoeff() <= 0) pts.push_back(x);
  }
  SymMat Y = SymMat::Zero(n + 1, n + 1);
  for (const auto& x : pts) {
    Vec h(n + 1);
    h << 1.0, x;
    Y += h * h.transpose() / static_cast<double>(pts.size());
  }
  const GeneralSdp rlt = build_sdp_rlt(inst), dnn = build_dnn(inst);
  const SymMat Z = phi_map(Y, inst.G, inst.d);
  auto feas = [](const GeneralSdp& s, const SymMat& M) {
    const double f = (F_apply(s, M) - F_rhs(s)).cwiseAbs().maxCoeff();
    const double c = (-s.cone.apply(M)).cwiseMax(0.0).maxCoeff();
    const double psd = std::max(0.0, -sym_eig(M).values.minCoeff());
    return std::max({f, c, psd});
  };
  const double tol = 1e-10;
  const double e_rlt = feas(rlt, Y), e_dnn = feas(dnn, Z);
  const double e_obj = std::abs(frob_dot(rlt.C, Y) - frob_dot(dnn.C, Z));
  const double e_inv = (Z.topLeftCorner(n + 1, n + 1) - Y).cwiseAbs().maxCoeff();
  // the DNN point determines its slack rows, so the leading block is the inverse map
  const double e_back = (phi_map(Z.topLeftCorner(n + 1, n + 1), inst.G, inst.d) - Z).cwiseAbs().maxCoeff();
  const bool ok = !pts.empty() && e_rlt <= tol && e_dnn <= tol && e_obj <= tol * (1 + std::abs(frob_dot(rlt.C, Y))) &&
                  e_inv == 0.0 && e_back <= tol;
  std::cout << (ok ? "PASS" : "FAIL") << " phi n=" << n << " points=" << pts.size() << " rlt_feas=" << e_rlt
            << " dnn_feas=" << e_dnn << " objective_gap=" << e_obj << " inverse=" << e_back << "\n";
  return ok;
}

bool verify_bound(const std::string& path, const SolveFlags& f) {
  const MbqpInstance inst0 = load_instance(path, f.orlib_index);
  const MbqpInstance inst = f.strengthen ? strengthen_binary(inst0) : inst0;
  const auto bf = oracle::brute_force_mbqp(inst);
  const SolveResult r = solve(f.relaxation(inst0), f.options());
  const double v = r.report.objective, vs = bf.value;
  const bool ok = r.report.converged && v <= vs + 1e-5 * (1 + std::abs(vs));
  std::cout << (ok ? "PASS" : "FAIL") << " bound relax=" << f.relax << " v=" << std::setprecision(10) << v
            << " v*=" << vs << " gap%=" << gap_percent(vs, v) << "\n";
  return ok;
}

bool verify_kkt(const std::string& path, const SolveFlags& f) {
  const MbqpInstance inst = load_instance(path, f.orlib_index);
  const GeneralSdp sdp = f.relaxation(inst);
  const SolveResult r = solve(sdp, f.options());
  std::stringstream ss;
  export_sparse(sdp, ss);
  const auto ex = oracle::parse_export(ss);
  const auto fm = flatten_multipliers(sdp, r.cert);
  const auto k = oracle::kkt_recompute(ex, r.cert.Y, fm.eq, fm.ineq, fm.nonneg, &r.cert.S);
  const bool ok = r.report.converged && k.max() <= 1.1 * f.tol;
  std::cout << (ok ? "PASS" : "FAIL") << " kkt Rp=" << k.Rp << " Rd=" << k.Rd << " Rc=" << k.Rc
            << " S_mismatch=" << k.S_mismatch << "\n";
  return ok;
}

// ---- bench / profile ----

int run_bench(const std::string& list, const std::vector<std::string>& relaxes, const SolveFlags& f,
              const std::string& out_dir) {
  std::ifstream is(list);
  if (!is) throw BadInput("cannot open " + list);
  const fs::path root = out_dir.empty() ? default_out_dir() : out_dir;
  std::vector<RunRecord> recs;
  std::string path;
  while (std::getline(is, path)) {
    if (path.empty() || path[0] == '#') continue;
    const MbqpInstance inst = load_instance(path, f.orlib_index);
    for (const auto& rx : relaxes) {
      SolveFlags g = f;
      g.relax = rx;
      RunRecord rec;
      rec.problem = inst.name.empty() ? fs::path(path).stem().string() : inst.name;
      rec.relax = rx;
      try {
        solve_to_dir(g.relaxation(inst), g.options(), root / (rec.problem + "_" + rx), rec);
      } catch (const Error& e) {
        std::cerr << rec.problem << "/" << rx << ": " << e.what() << "\n";
        rec.status = "failed";
      }
      recs.push_back(rec);
    }
  }
  fs::create_directories(root);
  std::ofstream csv(root / "bench.csv");
  write_run_csv(recs, csv);
  print_table(recs, std::cout);
  std::cout << "bench.csv: " << (root / "bench.csv").string() << "\n";
  for (const auto& r : recs)
    if (r.status != "converged") return 3;
  return 0;
}

int run_profile(const std::vector<std::string>& csvs, const std::vector<double>& taus) {
  std::vector<RunRecord> all;
  for (const auto& p : csvs) {
    std::ifstream is(p);
    if (!is) throw BadInput("cannot open " + p);
    auto rs = read_run_csv(is);
    all.insert(all.end(), rs.begin(), rs.end());
  }
  const TimeTable t = time_table(all);
  const Mat r = perf_ratios(t.T);
  std::cout << "# ratios r(problem, solver)\nproblem";
  for (const auto& s : t.solvers) std::cout << "," << s;
  std::cout << "\n";
  for (std::size_t p = 0; p < t.problems.size(); ++p) {
    std::cout << t.problems[p];
    for (Eigen::Index s = 0; s < r.cols(); ++s) std::cout << "," << detail::fmt_double(r(p, s));
    std::cout << "\n";
  }
  std::cout << "# profile f(tau)\ntau";
  for (const auto& s : t.solvers) std::cout << "," << s;
  std::cout << "\n";
  for (double tau : taus) {
    const Vec fv = perf_profile(r, tau);
    std::cout << detail::fmt_double(tau);
    for (Eigen::Index s = 0; s < fv.size(); ++s) std::cout << "," << detail::fmt_double(fv(s));
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank ALM solver for SDP relaxations of mixed-binary quadratic programs"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "generate or convert an instance");
  g->add_option("--family", gen.family, "biq | qkp | theta | ccmssc | sstqp | qmstp")
      ->check(CLI::IsMember({"biq", "qkp", "theta", "ccmssc", "sstqp", "qmstp"}));
  g->add_option("--n", gen.n, "variables (biq, qkp), vertices (theta, qmstp) or m (sstqp)");
  g->add_option("--density", gen.density, "biq density");
  g->add_option("--p", gen.p, "qkp density");
  g->add_option("--seed", gen.seed);
  g->add_option("--graph", gen.graph, "theta: Gset file, 'empty' or 'complete'");
  g->add_option("--points", gen.points, "ccmssc: headerless CSV of points");
  g->add_option("--sizes", gen.sizes, "ccmssc: cluster sizes")->delimiter(',');
  g->add_option("--qmstp-family", gen.qmstp, "sym | vsym | esym");
  g->add_option("--orlib", gen.orlib, "convert an ORLIB bqp file");
  g->add_option("--orlib-index", gen.orlib_index, "problem index inside the ORLIB file (1-based)");
  g->add_flag("--strengthen", gen.strengthen, "add x_B <= e");
  g->add_option("-o,--out", gen.out, "output path");

  SolveFlags bflags;
  std::string bpath, bout;
  auto* b = app.add_subcommand("build", "write a relaxation export and its count audit");
  bflags.attach(b);
  b->add_option("instance", bpath)->required();
  b->add_option("-o,--out", bout, "export path");

  SolveFlags sflags;
  std::string spath, sdir;
  auto* s = app.add_subcommand("solve", "solve one relaxation");
  sflags.attach(s);
  s->add_option("instance", spath)->required();
  s->add_option("--out-dir", sdir, "artifact root (default $SDPRLT_OUT_DIR or ./sdprlt_out)");

  SolveFlags vflags;
  std::string phi, vbound, vkkt;
  int vn = 6;
  auto* v = app.add_subcommand("verify", "oracle cross-checks");
  vflags.attach(v);
  v->add_option("--phi", phi, "'random': check the slack congruence on a random instance");
  v->add_option("--n", vn, "size for --phi");
  v->add_option("--bound", vbound, "instance: solver bound against brute force");
  v->add_option("--kkt", vkkt, "instance: recompute KKT residuals from the export");

  SolveFlags benchflags;
  std::string blist, bdir;
  std::vector<std::string> brelax{"sdprlt"};
  auto* be = app.add_subcommand("bench", "solve a list of instances");
  benchflags.attach(be);
  be->add_option("list", blist, "file with one instance path per line")->required();
  be->add_option("--relaxations", brelax, "comma-separated kinds")->delimiter(',');
  be->add_option("--out-dir", bdir);

  std::vector<std::string> pcsv;
  std::vector<double> taus{1, 2, 4, 8, 16};
  auto* pr = app.add_subcommand("profile", "Dolan-More ratios and profile from run CSVs");
  pr->add_option("csv", pcsv)->required();
  pr->add_option("--tau", taus, "tau grid")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*g) return run_gen(gen);
    if (*b) return run_build(bpath, bflags, bout);
    if (*s) return run_solve(spath, sflags, sdir);
    if (*be) return run_bench(blist, brelax, benchflags, bdir);
    if (*pr) return run_profile(pcsv, taus);
    if (*v) {
      if (phi.empty() && vbound.empty() && vkkt.empty()) throw BadInput("verify needs --phi, --bound or --kkt");
      if (!phi.empty() && phi != "random") throw BadInput("--phi accepts 'random'");
      bool ok = true;
      if (!phi.empty()) ok = verify_phi(vn, vflags.seed) && ok;
      if (!vbound.empty()) ok = verify_bound(vbound, vflags) && ok;
      if (!vkkt.empty()) ok = verify_kkt(vkkt, vflags) && ok;
      return ok ? 0 : 4;
    }
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInstance& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
