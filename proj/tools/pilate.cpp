#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pilate/compliers.hpp"
#include "pilate/cv.hpp"
#include "pilate/estimation.hpp"
#include "pilate/fstar.hpp"
#include "pilate/heterosked.hpp"
#include "pilate/montecarlo.hpp"
#include "pilate/report.hpp"
#include "pilate/robust.hpp"

using namespace pilate;

namespace {

using Clock = std::chrono::steady_clock;

struct DataOpts {
  std::string path;
  std::string y = "y", d = "d", policy = "policy";
  std::vector<std::string> x, z = {"z"};
  CLI::Option* z_opt = nullptr;

  void attach(CLI::App* c, bool with_policy) {
    c->add_option("--data", path, "CSV file with a header row")->required();
    c->add_option("--y", y, "outcome column");
    c->add_option("--d", d, "endogenous column");
    c->add_option("--x", x, "exogenous columns")->delimiter(',');
    z_opt = c->add_option("--z", z, "instrument columns (default z, or the policy column where one is read)")
                ->delimiter(',');
    if (with_policy) c->add_option("--policy", policy, "0/1 policy-date column");
  }

  Dataset load(bool need_policy) const {
    CsvSchema s;
    s.outcome = y;
    s.endogenous = d;
    s.exogenous = x;
    s.instruments = z;
    if (need_policy) {
      s.policy = policy;
      if (z_opt->count() == 0) s.instruments = {policy};
    }
    return load_csv(path, s);
  }
};

struct HacOpts {
  int lags = -1;
  void attach(CLI::App* c) { c->add_option("--lags", lags, "fixed Newey-West lags (default: cube root of length)"); }
  HacConfig config() const {
    if (lags < 0) return HacConfig{};
    return HacConfig::fixed(lags);
  }
};

std::string report_format = "json";
int threads = 1;

void flatten(const Json& j, const std::string& prefix, std::ostream& os) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), os);
    return;
  }
  if (j.is_array() && !j.empty() && j.front().is_object()) {
    for (size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", os);
    return;
  }
  os << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
}

void emit(const Json& j) {
  if (report_format == "text")
    flatten(j, "", std::cout);
  else
    std::cout << dump(j);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Partition load_partition(const std::string& path, int T) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail_validation("malformed segments file '" + path + "': " + e.what());
  }
  return partition_from_json(j, T);
}

std::string cache_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("PILATE_CV_CACHE");
  return env ? env : "";
}

CvTable load_cache(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream probe(path);
  if (!probe) return {};
  return CvTable::load(path);
}

// --- fstar ---

struct FstarCmd {
  DataOpts data;
  HacOpts hac;
  double pi_l = 0.6, eps = 0.05, alpha = 0.05;
  int m_plus = 5, top_k = 10;
  bool exact_only = false, unrestricted = false, simulate_cv = false;
  int cv_reps = 10000;
  std::uint64_t cv_seed = 7;
  std::string cache;

  void attach(CLI::App* c) {
    data.attach(c, false);
    hac.attach(c);
    c->add_option("--pi-l", pi_l, "smallest subsample fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--eps", eps, "minimal segment fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--m-plus", m_plus, "maximal number of segments")->check(CLI::PositiveNumber);
    c->add_option("--alpha", alpha, "test level")->check(CLI::Range(0.0, 1.0));
    c->add_option("--top-k", top_k, "candidates refined per length")->check(CLI::PositiveNumber);
    c->add_flag("--exact-only", exact_only, "maximize the exact joint F instead of the segment-additive form");
    c->add_flag("--unrestricted", unrestricted, "use unrestricted first-stage residuals in the LRV");
    c->add_flag("--simulate-cv", simulate_cv, "simulate a missing critical value instead of failing");
    c->add_option("--cv-reps", cv_reps, "replications when simulating a critical value");
    c->add_option("--cv-seed", cv_seed, "seed when simulating a critical value");
    c->add_option("--cv-cache", cache, "critical-value cache (default $PILATE_CV_CACHE)");
  }

  // value and where it came from: builtin, cache or simulated
  std::pair<double, std::string> critical_value(int q) const {
    if (auto v = CvTable::builtin().find(q, pi_l, alpha)) return {*v, "builtin"};
    NullSupConfig sim;
    sim.q = q;
    sim.pi_l = pi_l;
    sim.reps = cv_reps;
    sim.seed = cv_seed;
    sim.threads = threads;
    const std::string path = cache_path(cache);
    CvTable table = load_cache(path);
    if (auto v = table.find_simulated(sim, alpha)) return {*v, "cache"};
    if (!simulate_cv)
      fail_validation("no critical value for q=" + std::to_string(q) + ", pi_L=" + format_double(pi_l) +
                      ", alpha=" + format_double(alpha) + "; run `pilate cv` or pass --simulate-cv");
    const CvTable fresh = CvTable::from_distribution(simulate_null_sup(sim), sim, {alpha});
    if (!path.empty()) {
      table.merge(fresh);
      table.save(path);
    }
    return {*fresh.find_simulated(sim, alpha), "simulated"};
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(false);
    SearchConfig cfg;
    cfg.pi_l = pi_l;
    cfg.eps = eps;
    cfg.m_plus = m_plus;
    cfg.top_k = top_k;
    cfg.hac = hac.config();
    cfg.objective = exact_only ? FStarObjective::joint : FStarObjective::segment_sum;
    cfg.residuals = unrestricted ? ResidualChoice::unrestricted : ResidualChoice::restricted;
    cfg.validate(ds.T());
    const auto [cv, cv_source] = critical_value(ds.q());
    const FStarResult res = fstar_search(ds, cfg);
    CvTable one({CvEntry{ds.q(), pi_l, alpha, cv, {}, {}, {}, {}, {}}});
    const TestReport dec = fstar_decision(res, ds.q(), pi_l, alpha, one);
    Json j = envelope("fstar");
    j["T"] = ds.T();
    j["q"] = ds.q();
    j["p"] = ds.p();
    j["config"] = {{"pi_l", pi_l},
                   {"eps", eps},
                   {"m_plus", m_plus},
                   {"objective", exact_only ? "joint" : "segment_sum"},
                   {"residuals", unrestricted ? "unrestricted" : "restricted"}};
    j["value"] = number(res.value);
    j["segments"] = to_json(res.argmax_partition);
    j["subsample_length"] = res.argmax_partition.total_length();
    j["enumerated"] = res.enumerated;
    j["alpha"] = alpha;
    j["cv"] = number(cv);
    j["cv_source"] = cv_source;
    j["reject"] = dec.reject;
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- cv ---

struct CvCmd {
  int q = 1, n = 1000, reps = 10000;
  int m_plus = kCalibratedMPlus;
  double eps = kCalibratedEps;
  std::vector<double> pi_ls = {0.6};
  std::vector<double> levels = {0.10, 0.05, 0.01};
  std::uint64_t seed = 7;
  std::string cache;
  bool no_cache = false;

  void attach(CLI::App* c) {
    c->add_option("--q", q, "number of instruments")->check(CLI::PositiveNumber);
    c->add_option("--pi-l", pi_ls, "smallest subsample fractions")->delimiter(',');
    c->add_option("--m-plus", m_plus, "maximal number of segments")->check(CLI::PositiveNumber);
    c->add_option("--eps", eps, "minimal segment fraction");
    c->add_option("--n", n, "grid points per path")->check(CLI::PositiveNumber);
    c->add_option("--reps", reps, "simulated paths")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed, "random seed");
    c->add_option("--levels", levels, "test levels")->delimiter(',');
    c->add_option("--cache", cache, "merge results into this table file (default $PILATE_CV_CACHE)");
    c->add_flag("--no-cache", no_cache, "do not write a table file");
  }

  int run() const {
    const auto t0 = Clock::now();
    for (double a : levels)
      if (!(a > 0) || !(a < 1)) fail_validation("levels must lie in (0, 1)");
    NullSupConfig sim;
    sim.q = q;
    sim.m_plus = m_plus;
    sim.eps = eps;
    sim.n = n;
    sim.reps = reps;
    sim.seed = seed;
    sim.threads = threads;
    const auto dists = simulate_null_sup(sim, pi_ls);
    CvTable out;
    Json rows = Json::array();
    for (size_t k = 0; k < pi_ls.size(); ++k) {
      NullSupConfig cell = sim;
      cell.pi_l = pi_ls[k];
      const CvTable t = CvTable::from_distribution(dists[k], cell, levels);
      out.merge(t);
      for (const auto& e : t.entries()) {
        const double se_p = std::sqrt(e.alpha * (1 - e.alpha) / reps);
        rows.push_back({{"q", e.q}, {"pi_l", e.pi_l}, {"alpha", e.alpha}, {"cv", number(e.value)},
                        {"quantile_prob_se", se_p}});
      }
    }
    Json j = envelope("cv");
    j["config"] = {{"q", q}, {"m_plus", m_plus}, {"eps", eps}, {"n", n}, {"reps", reps}, {"seed", seed}};
    j["entries"] = rows;
    const std::string path = no_cache ? "" : cache_path(cache);
    if (!path.empty()) {
      CvTable table = load_cache(path);
      table.merge(out);
      table.save(path);
      j["cache"] = path;
    }
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- estimate ---

struct EstimateCmd {
  DataOpts data;
  HacOpts hac;
  double pi0 = 0.8, eps = 0.05;
  int m0 = 2;
  std::string method = "ols";
  bool at_least = false;

  void attach(CLI::App* c) {
    data.attach(c, false);
    hac.attach(c);
    c->add_option("--pi0", pi0, "subsample fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--m0", m0, "number of segments")->check(CLI::PositiveNumber);
    c->add_option("--eps", eps, "minimal segment fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--method", method, "ols or fgls")->check(CLI::IsMember({"ols", "fgls"}));
    c->add_flag("--at-least", at_least, "allow subsamples longer than pi0*T");
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(false);
    EstimationConfig cfg;
    cfg.pi0 = pi0;
    cfg.m0 = m0;
    cfg.eps = eps;
    cfg.exact_length = !at_least;
    const auto res =
        estimate(ds, cfg, method == "fgls" ? EstimationMethod::fgls : EstimationMethod::ols, hac.config());
    Json j = envelope("estimate");
    j["T"] = ds.T();
    j["config"] = {{"pi0", pi0}, {"m0", m0}, {"eps", eps}, {"exact_length", !at_least}};
    j.update(to_json(res));
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- robust ---

struct RobustCmd {
  DataOpts data;
  HacOpts hac;
  double beta0 = 0, alpha = 0.05, eps = 0.05;
  std::optional<double> pi_l;
  int m_plus = 5;
  std::string mode = "estimated";
  std::string subsample;

  void attach(CLI::App* c) {
    data.attach(c, false);
    hac.attach(c);
    c->add_option("--beta0", beta0, "hypothesized coefficient");
    c->add_option("--alpha", alpha, "test level")->check(CLI::Range(0.0, 1.0));
    c->add_option("--mode", mode, "full, known or estimated")->check(CLI::IsMember({"full", "known", "estimated"}));
    c->add_option("--subsample", subsample, "segments JSON for --mode known");
    c->add_option("--pi-l", pi_l, "smallest subsample fraction in the search")->check(CLI::Range(0.0, 1.0));
    c->add_option("--eps", eps, "minimal segment fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--m-plus", m_plus, "maximal number of segments")->check(CLI::PositiveNumber);
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(false);
    M2SearchConfig cfg;
    cfg.eps = eps;
    cfg.m_plus = m_plus;
    cfg.pi_l = pi_l;
    RobustMode m = RobustMode::estimated_subsample;
    std::optional<Partition> known;
    if (mode == "full") m = RobustMode::full_sample;
    if (mode == "known") {
      if (subsample.empty()) fail_validation("--mode known needs --subsample");
      m = RobustMode::known_subsample;
      known = load_partition(subsample, ds.T());
    }
    const auto rep = robust_test(ds, beta0, alpha, m, known, cfg, hac.config());
    Json j = envelope("robust");
    j["T"] = ds.T();
    j["q"] = ds.q();
    j.update(to_json(rep));
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- compliers / exclusion ---

struct WindowOpts {
  int n0 = 101, n1 = 15;
  std::string sided = "two", transform = "level";
  double alpha = 0.05;
  bool welch = false;

  void attach(CLI::App* c) {
    c->add_option("--n0", n0, "control window size");
    c->add_option("--n1", n1, "policy window size");
    c->add_option("--sided", sided, "one or two")->check(CLI::IsMember({"one", "two"}));
    c->add_option("--transform", transform, "level or square")->check(CLI::IsMember({"level", "square"}));
    c->add_flag("--welch", welch, "add the policy-window sampling variance to the t denominator");
  }

  ComplierConfig config() const {
    ComplierConfig c;
    c.windows.n0 = n0;
    c.windows.n1 = n1;
    c.windows.side = sided == "one" ? WindowSide::one_sided_left : WindowSide::two_sided;
    c.transform = transform == "square" ? Transform::square : Transform::level;
    c.variance = welch ? MeanDiffVariance::welch : MeanDiffVariance::control_only;
    c.alpha = alpha;
    return c;
  }
};

struct CompliersCmd {
  DataOpts data;
  WindowOpts win;
  std::string out;

  void attach(CLI::App* c) {
    data.attach(c, true);
    win.attach(c);
    c->add_option("--alpha", win.alpha, "one-sided test level")->check(CLI::Range(0.0, 1.0));
    c->add_option("--out", out, "write the per-date CSV here");
  }

  static std::string dates_csv(const ComplierReport& rep) {
    std::ostringstream os;
    os << "row,policy,t,status\n";
    for (const auto& dc : rep.dates)
      os << dc.row + 1 << "," << (dc.policy ? 1 : 0) << "," << (std::isfinite(dc.t) ? format_double(dc.t) : "")
         << "," << to_string(dc.status) << "\n";
    return os.str();
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(true);
    const ComplierReport rep = classify_dates(ds, win.config());
    Json j = envelope("compliers");
    j["T"] = ds.T();
    j["config"] = {{"n0", win.n0},
                   {"n1", win.n1},
                   {"sided", win.sided},
                   {"transform", win.transform},
                   {"variance", win.welch ? "welch" : "control_only"}};
    j.update(to_json(rep));
    const std::string csv = dates_csv(rep);
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f) throw ComputationError("cannot write '" + out + "'");
      f << csv;
      j["dates_csv"] = out;
    }
    add_run_info(j, seconds_since(t0), threads);
    if (out.empty() && report_format == "text") {
      std::cout << csv;
      return 0;
    }
    if (out.empty()) {
      Json rows = Json::array();
      for (const auto& dc : rep.dates)
        rows.push_back({{"row", dc.row + 1}, {"policy", dc.policy}, {"t", number(dc.t)}, {"status", to_string(dc.status)}});
      j["dates"] = rows;
    }
    emit(j);
    return 0;
  }
};

struct ExclusionCmd {
  DataOpts data;
  WindowOpts win;
  double alpha = 0.05, class_alpha = 0.05;
  std::string subset = "all";
  std::optional<double> threshold;
  int min_size = 5;
  bool product = false;

  void attach(CLI::App* c) {
    data.attach(c, true);
    win.attach(c);
    c->add_option("--alpha", alpha, "two-sided test level")->check(CLI::Range(0.0, 1.0));
    c->add_option("--classify-alpha", class_alpha, "level of the complier classification")
        ->check(CLI::Range(0.0, 1.0));
    c->add_option("--subset", subset, "all, above-mean or below-mean")
        ->check(CLI::IsMember({"all", "above-mean", "below-mean"}));
    c->add_option("--threshold", threshold, "split point for the subset rule (default: mean of d)");
    c->add_option("--min-size", min_size, "minimal non-complier count per side");
    c->add_flag("--product", product, "use demeaned d*y as the outcome");
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(true);
    WindowOpts w = win;
    w.alpha = class_alpha;
    const ComplierReport rep = classify_dates(ds, w.config());
    ExclusionConfig cfg;
    cfg.alpha = alpha;
    cfg.subset = subset == "above-mean" ? SubsetRule::above : subset == "below-mean" ? SubsetRule::below : SubsetRule::all;
    cfg.threshold = threshold;
    cfg.min_size = min_size;
    cfg.variance = win.welch ? MeanDiffVariance::welch : MeanDiffVariance::control_only;
    const Eigen::VectorXd outcome = product ? make_frame(ds).ystar : ds.y;
    const TestReport r = exclusion_test(outcome, ds.d, rep, cfg);
    Json j = envelope("exclusion");
    j["T"] = ds.T();
    j["subset"] = subset;
    j["outcome"] = product ? "d*y" : "y";
    j["classification"] = to_json(rep);
    j.update(to_json(r));
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- rigobon ---

struct RigobonCmd {
  DataOpts data;
  HacOpts hac;
  std::string subsample = "full";

  void attach(CLI::App* c) {
    data.attach(c, true);
    hac.attach(c);
    c->add_option("--subsample", subsample, "segments JSON or 'full'");
  }

  int run() const {
    const auto t0 = Clock::now();
    const Dataset ds = data.load(true);
    std::optional<Partition> P;
    if (subsample != "full") P = load_partition(subsample, ds.T());
    const EventStudyFrame f = make_frame(ds);
    Json j = envelope("rigobon");
    j["T"] = ds.T();
    j["segments"] = P ? to_json(*P) : to_json(Partition::full(ds.T()));
    j["estimand"] = to_json(rigobon_estimand(f, P));
    j["iv"] = to_json(iv_reformulation(f, P, hac.config()));
    add_run_info(j, seconds_since(t0), threads);
    emit(j);
    return 0;
  }
};

// --- mc ---

struct McCmd {
  std::string suite, out;
  int reps = 5000;
  std::uint64_t seed = 7;

  void attach(CLI::App* c) {
    c->add_option("--suite", suite, "fstar-size, beta-mse or robust-size")
        ->required()
        ->check(CLI::IsMember({"fstar-size", "beta-mse", "robust-size"}));
    c->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed, "random seed");
    c->add_option("--out", out, "write the JSON report here instead of standard output");
  }

  int run() const {
    const ExperimentReport rep = run_suite(suite, McRun{reps, seed, threads}, CvTable::builtin());
    const Json j = rep.to_json(true);
    if (out.empty()) {
      emit(j);
      return 0;
    }
    std::ofstream f(out);
    if (!f) throw ComputationError("cannot write '" + out + "'");
    f << dump(j);
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subsample identification tools for instrumental-variable time series"};
  app.require_subcommand(1);
  app.add_option("--report", report_format, "json or text")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  FstarCmd fstar;
  CvCmd cv;
  EstimateCmd est;
  RobustCmd robust;
  CompliersCmd compliers;
  ExclusionCmd exclusion;
  RigobonCmd rigobon;
  McCmd mc;
  auto* c_fstar = app.add_subcommand("fstar", "sup-F test for a first stage on some subsample");
  auto* c_cv = app.add_subcommand("cv", "simulate critical values of the sup-F test");
  auto* c_est = app.add_subcommand("estimate", "estimate the identified subsample and the coefficient");
  auto* c_robust = app.add_subcommand("robust", "AR/LM/CLR tests of a coefficient value");
  auto* c_comp = app.add_subcommand("compliers", "classify dates as compliers");
  auto* c_excl = app.add_subcommand("exclusion", "test the exclusion restriction on non-compliers");
  auto* c_rig = app.add_subcommand("rigobon", "identification through heteroskedasticity");
  auto* c_mc = app.add_subcommand("mc", "Monte Carlo suites");
  fstar.attach(c_fstar);
  cv.attach(c_cv);
  est.attach(c_est);
  robust.attach(c_robust);
  compliers.attach(c_comp);
  exclusion.attach(c_excl);
  rigobon.attach(c_rig);
  mc.attach(c_mc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_fstar) return fstar.run();
    if (*c_cv) return cv.run();
    if (*c_est) return est.run();
    if (*c_robust) return robust.run();
    if (*c_comp) return compliers.run();
    if (*c_excl) return exclusion.run();
    if (*c_rig) return rigobon.run();
    if (*c_mc) return mc.run();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
