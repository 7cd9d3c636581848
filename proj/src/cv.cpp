#include "pilate/cv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pilate/data.hpp"
#include "pilate/partition_dp.hpp"
#include "pilate/rng.hpp"

namespace pilate {

namespace {

bool same(double a, double b) { return std::abs(a - b) <= 1e-9; }

LengthRules grid_rules(int n, double eps, double pi_l, int m_plus) {
  LengthRules r;
  r.T = n;
  r.min_segment = std::max(1, ceil_fraction(eps, n));
  r.min_total = std::max(floor_fraction(pi_l, n), r.min_segment);
  r.max_total = n;
  r.min_count = 1;
  r.max_count = m_plus;
  return r;
}

}  // namespace

std::vector<double> null_sup_from_paths(const std::vector<double>& W, int q, int n, double eps, int m_plus,
                                        const std::vector<double>& pi_ls) {
  const double min_pi = *std::min_element(pi_ls.begin(), pi_ls.end());
  auto path = [&](int j) { return W.begin() + static_cast<std::ptrdiff_t>(j) * (n + 1); };
  std::vector<double> best;
  if (min_pi >= 1.0 - 1e-12) {
    best.assign(n + 1, kNegInf);
    double s = 0;
    for (int j = 0; j < q; ++j) s += path(j)[n] * path(j)[n];
    best[n] = s;
  } else {
    const LengthRules rules = grid_rules(n, eps, min_pi, m_plus);
    if (q == 1) {
      best = dp_profile_squared_increments(std::vector<double>(path(0), path(0) + n + 1), rules);
    } else {
      SegmentTable w(n, rules.min_segment);
      for (int e = rules.min_segment; e <= n; ++e)
        for (int s = 0; s + rules.min_segment <= e; ++s) {
          double v = 0;
          for (int j = 0; j < q; ++j) {
            const double dlt = path(j)[e] - path(j)[s];
            v += dlt * dlt;
          }
          w.set(s, e, v);
        }
      best = dp_profile(w, rules, 1).best;
    }
  }
  std::vector<double> out;
  for (double pi_l : pi_ls) {
    const int lo = std::max(floor_fraction(pi_l, n), 1);
    double sup = kNegInf;
    for (int L = lo; L <= n; ++L)
      if (best[L] > kNegInf) sup = std::max(sup, best[L] * n / (static_cast<double>(q) * L));
    out.push_back(sup);
  }
  return out;
}

std::vector<std::vector<double>> simulate_null_sup(const NullSupConfig& cfg, const std::vector<double>& pi_ls) {
  if (cfg.q < 1) fail_validation("q must be >= 1");
  if (cfg.n < 2) fail_validation("grid size must be >= 2");
  if (cfg.reps < 1) fail_validation("replications must be >= 1");
  if (cfg.m_plus < 1) fail_validation("m_plus must be >= 1");
  if (!(cfg.eps > 0) || cfg.eps > 1) fail_validation("eps must lie in (0, 1]");
  if (pi_ls.empty()) fail_validation("at least one pi_L is required");
  for (double p : pi_ls)
    if (!(p > 0) || p > 1 || p + 1e-12 < cfg.eps) fail_validation("need eps <= pi_L <= 1");

  std::vector<std::vector<double>> draws(cfg.reps);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n));
  parallel_for(cfg.reps, cfg.threads, [&](int r) {
    auto eng = stream_engine(cfg.seed, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> nd;
    std::vector<double> W(static_cast<size_t>(cfg.q) * (cfg.n + 1), 0.0);
    for (int j = 0; j < cfg.q; ++j) {
      double* w = &W[static_cast<size_t>(j) * (cfg.n + 1)];
      for (int t = 1; t <= cfg.n; ++t) w[t] = w[t - 1] + scale * nd(eng);
    }
    draws[r] = null_sup_from_paths(W, cfg.q, cfg.n, cfg.eps, cfg.m_plus, pi_ls);
  });
  std::vector<std::vector<double>> out(pi_ls.size(), std::vector<double>(cfg.reps));
  for (int r = 0; r < cfg.reps; ++r)
    for (size_t k = 0; k < pi_ls.size(); ++k) out[k][r] = draws[r][k];
  return out;
}

std::vector<double> simulate_null_sup(const NullSupConfig& cfg) { return simulate_null_sup(cfg, {cfg.pi_l}).front(); }

double quantile_type7(std::vector<double> x, double prob) {
  if (x.empty()) fail_validation("quantile of an empty sample");
  if (!(prob >= 0) || prob > 1) fail_validation("quantile probability must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1) * prob;
  const auto lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

CvTable CvTable::builtin() {
  static const int qs[] = {1, 2, 3, 4, 5, 10};
  static const double pis[] = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  static const double alphas[] = {0.10, 0.05, 0.01};
  static const double v[3][6][6] = {
      {{7.44, 5.18, 4.20, 3.70, 3.35, 2.53},
       {6.92, 4.76, 3.94, 3.46, 3.14, 2.40},
       {6.19, 4.44, 3.71, 3.28, 2.96, 2.31},
       {5.51, 4.02, 3.37, 2.79, 2.77, 2.18},
       {4.81, 3.59, 3.08, 2.78, 2.52, 2.04},
       {2.70, 2.32, 2.09, 1.94, 1.80, 1.59}},
      {{8.90, 6.03, 4.75, 4.14, 3.74, 2.74},
       {8.28, 5.60, 4.49, 3.91, 3.51, 2.62},
       {7.55, 5.21, 4.26, 3.70, 3.31, 2.53},
       {6.84, 4.71, 3.83, 3.43, 3.13, 2.39},
       {6.04, 4.31, 3.58, 3.19, 2.89, 2.25},
       {3.85, 3.00, 2.57, 2.37, 2.16, 1.82}},
      {{12.27, 7.91, 6.08, 5.12, 4.56, 3.19},
       {11.63, 7.28, 5.73, 4.81, 4.37, 3.08},
       {10.94, 6.97, 5.56, 4.67, 4.19, 3.04},
       {9.73, 6.41, 5.06, 4.34, 3.89, 2.84},
       {8.68, 5.94, 4.62, 4.15, 3.65, 2.69},
       {6.68, 4.60, 3.70, 3.31, 2.99, 2.31}}};
  std::vector<CvEntry> e;
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        CvEntry c;
        c.q = qs[j];
        c.pi_l = pis[i];
        c.alpha = alphas[a];
        c.value = v[a][i][j];
        e.push_back(c);
      }
  return CvTable(std::move(e));
}

CvTable CvTable::from_distribution(const std::vector<double>& dist, const NullSupConfig& cfg,
                                   const std::vector<double>& levels) {
  CvTable t;
  for (double a : levels) {
    if (!(a > 0) || !(a < 1)) fail_validation("significance levels must lie in (0, 1)");
    CvEntry c;
    c.q = cfg.q;
    c.pi_l = cfg.pi_l;
    c.alpha = a;
    c.value = quantile_type7(dist, 1.0 - a);
    c.m_plus = cfg.m_plus;
    c.eps = cfg.eps;
    c.n = cfg.n;
    c.reps = cfg.reps;
    c.seed = cfg.seed;
    t.entries_.push_back(c);
  }
  return t;
}

void CvTable::add(const CvEntry& e) {
  for (auto& old : entries_) {
    if (old.q == e.q && same(old.pi_l, e.pi_l) && same(old.alpha, e.alpha) && old.m_plus == e.m_plus &&
        old.n == e.n && old.reps == e.reps && old.seed == e.seed &&
        old.eps.has_value() == e.eps.has_value() && (!e.eps || same(*old.eps, *e.eps))) {
      old.value = e.value;
      return;
    }
  }
  entries_.push_back(e);
}

void CvTable::merge(const CvTable& other) {
  for (const auto& e : other.entries_) add(e);
}

std::optional<double> CvTable::find(int q, double pi_l, double alpha, std::optional<int> m_plus,
                                    std::optional<double> eps) const {
  for (const auto& e : entries_) {
    if (e.q != q || !same(e.pi_l, pi_l) || !same(e.alpha, alpha)) continue;
    if (m_plus && e.m_plus != m_plus) continue;
    if (eps && !(e.eps && same(*e.eps, *eps))) continue;
    return e.value;
  }
  return std::nullopt;
}

std::optional<double> CvTable::find_simulated(const NullSupConfig& cfg, double alpha) const {
  for (const auto& e : entries_) {
    if (e.q == cfg.q && same(e.pi_l, cfg.pi_l) && same(e.alpha, alpha) && e.m_plus == cfg.m_plus && e.eps &&
        same(*e.eps, cfg.eps) && e.n == cfg.n && e.reps == cfg.reps && e.seed == cfg.seed)
      return e.value;
  }
  return std::nullopt;
}

std::string CvTable::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "cv_table";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json o;
    o["q"] = e.q;
    o["pi_l"] = e.pi_l;
    o["alpha"] = e.alpha;
    o["value"] = e.value;
    if (e.m_plus) o["m_plus"] = *e.m_plus;
    if (e.eps) o["eps"] = *e.eps;
    if (e.n) o["n"] = *e.n;
    if (e.reps) o["reps"] = *e.reps;
    if (e.seed) o["seed"] = *e.seed;
    arr.push_back(o);
  }
  j["entries"] = arr;
  return j.dump(2) + "\n";
}

CvTable CvTable::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    fail_validation(std::string("critical-value cache is not valid JSON: ") + ex.what());
  }
  if (!j.contains("entries") || !j["entries"].is_array()) fail_validation("critical-value cache lacks an entries array");
  CvTable t;
  try {
    for (const auto& o : j["entries"]) {
      CvEntry e;
      e.q = o.at("q").get<int>();
      e.pi_l = o.at("pi_l").get<double>();
      e.alpha = o.at("alpha").get<double>();
      e.value = o.at("value").get<double>();
      if (o.contains("m_plus")) e.m_plus = o["m_plus"].get<int>();
      if (o.contains("eps")) e.eps = o["eps"].get<double>();
      if (o.contains("n")) e.n = o["n"].get<int>();
      if (o.contains("reps")) e.reps = o["reps"].get<int>();
      if (o.contains("seed")) e.seed = o["seed"].get<std::uint64_t>();
      t.entries_.push_back(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    fail_validation(std::string("malformed critical-value cache entry: ") + ex.what());
  }
  return t;
}

CvTable CvTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open critical-value cache " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void CvTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail_validation("cannot write critical-value cache " + path);
  out << to_json();
}

}  // namespace pilate
