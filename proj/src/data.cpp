#include "pilate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <tuple>
#include <sstream>

#include "pilate/linalg.hpp"

namespace pilate {

void Dataset::validate() const {
  const int n = T();
  if (d.size() != n) fail_validation("d length differs from y length");
  if (z.rows() != n) fail_validation("z rows differ from y length");
  if (x.cols() > 0 && x.rows() != n) fail_validation("x rows differ from y length");
  if (q() < 1) fail_validation("at least one instrument column is required");
  if (n < p() + q() + 2)
    fail_validation("T = " + std::to_string(n) + " is too small for p + q + 2 = " + std::to_string(p() + q() + 2));
  if (policy && static_cast<int>(policy->size()) != n) fail_validation("policy indicator length differs from T");
  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  if (!y.allFinite() || !d.allFinite() || !finite(x) || !finite(z)) fail_validation("non-finite value in dataset");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto res = std::from_chars(b, e, v);
  return res.ec == std::errc() && res.ptr == e && std::isfinite(v);
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) fail_validation("CSV is empty");
  const auto header = split(lines[0]);
  std::map<std::string, int> pos;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i].empty()) fail_validation("CSV header has an empty column name at column " + std::to_string(i + 1));
    if (pos.count(header[i])) fail_validation("CSV header repeats column '" + header[i] + "'");
    pos[header[i]] = i;
  }
  auto need = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) fail_validation("missing column '" + name + "'");
    return it->second;
  };
  std::vector<ColumnRole> roles(header.size(), ColumnRole::ignored);
  const int iy = need(schema.outcome);
  const int id = need(schema.endogenous);
  roles[iy] = ColumnRole::outcome;
  roles[id] = ColumnRole::endogenous;
  std::vector<int> ix, iz;
  for (const auto& c : schema.exogenous) {
    ix.push_back(need(c));
    roles[ix.back()] = ColumnRole::exogenous;
  }
  for (const auto& c : schema.instruments) {
    iz.push_back(need(c));
    roles[iz.back()] = ColumnRole::instrument;
  }
  int ip = -1;
  if (schema.policy) {
    ip = need(*schema.policy);
    roles[ip] = ColumnRole::policy;
  }

  const int T = static_cast<int>(lines.size()) - 1;
  Dataset ds;
  ds.y.resize(T);
  ds.d.resize(T);
  ds.x.resize(T, static_cast<int>(ix.size()));
  ds.z.resize(T, static_cast<int>(iz.size()));
  if (ip >= 0) ds.policy = std::vector<int>(T, 0);
  for (int r = 0; r < T; ++r) {
    const auto cells = split(lines[r + 1]);
    if (cells.size() != header.size())
      fail_validation("row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    auto value = [&](int c) {
      if (cells[c].empty())
        fail_validation("missing value at row " + std::to_string(r + 1) + ", column '" + header[c] + "'");
      double v;
      if (!parse_number(cells[c], v))
        fail_validation("non-numeric value '" + cells[c] + "' at row " + std::to_string(r + 1) + ", column '" +
                        header[c] + "'");
      return v;
    };
    ds.y(r) = value(iy);
    ds.d(r) = value(id);
    for (size_t j = 0; j < ix.size(); ++j) ds.x(r, static_cast<int>(j)) = value(ix[j]);
    for (size_t j = 0; j < iz.size(); ++j) ds.z(r, static_cast<int>(j)) = value(iz[j]);
    if (ip >= 0) {
      const double v = value(ip);
      if (v != 0.0 && v != 1.0)
        fail_validation("policy column '" + header[ip] + "' must be 0/1 at row " + std::to_string(r + 1));
      (*ds.policy)[r] = static_cast<int>(v);
    }
  }
  for (size_t c = 0; c < header.size(); ++c)
    if (roles[c] != ColumnRole::ignored) ds.columns.push_back({header[c], roles[c]});
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_validation("cannot open data file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string format_csv(const Dataset& ds) {
  std::vector<Column> cols = ds.columns;
  if (cols.empty()) cols = make_dataset(ds.y, ds.d, ds.x, ds.z, ds.policy).columns;
  std::string out;
  for (size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += cols[c].name;
  }
  out += '\n';
  for (int r = 0; r < ds.T(); ++r) {
    int xi = 0, zi = 0;
    for (size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      switch (cols[c].role) {
        case ColumnRole::outcome: out += format_double(ds.y(r)); break;
        case ColumnRole::endogenous: out += format_double(ds.d(r)); break;
        case ColumnRole::exogenous: out += format_double(ds.x(r, xi++)); break;
        case ColumnRole::instrument: out += format_double(ds.z(r, zi++)); break;
        case ColumnRole::policy: out += ds.policy ? std::to_string((*ds.policy)[r]) : "0"; break;
        case ColumnRole::ignored: break;
      }
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputationError("cannot write '" + path + "'");
  out << format_csv(ds);
}

Dataset make_dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x, Eigen::MatrixXd z,
                     std::optional<std::vector<int>> policy) {
  Dataset ds;
  ds.y = std::move(y);
  ds.d = std::move(d);
  ds.x = std::move(x);
  ds.z = std::move(z);
  if (ds.x.rows() == 0 && ds.x.cols() == 0) ds.x.resize(ds.y.size(), 0);
  ds.policy = std::move(policy);
  ds.columns.push_back({"y", ColumnRole::outcome});
  ds.columns.push_back({"d", ColumnRole::endogenous});
  for (int j = 0; j < ds.x.cols(); ++j) ds.columns.push_back({"x" + std::to_string(j + 1), ColumnRole::exogenous});
  for (int j = 0; j < ds.z.cols(); ++j)
    ds.columns.push_back({ds.z.cols() == 1 ? std::string("z") : "z" + std::to_string(j + 1), ColumnRole::instrument});
  if (ds.policy) ds.columns.push_back({"policy", ColumnRole::policy});
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------- partitions

Partition::Partition(std::vector<Segment> segments, int T) : segments_(std::move(segments)), T_(T) {
  if (T_ < 1) fail_validation("partition needs T >= 1");
  if (segments_.empty()) fail_validation("partition needs at least one segment");
  for (size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (s.start < 1 || s.end > T_ + 1 || s.start >= s.end)
      fail_validation("segment [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") outside 1.." +
                      std::to_string(T_));
    if (i > 0 && segments_[i - 1].end > s.start) fail_validation("partition segments overlap or are unordered");
  }
}

Partition Partition::full(int T) { return Partition({{1, T + 1}}, T); }

int Partition::total_length() const {
  int L = 0;
  for (const auto& s : segments_) L += s.length();
  return L;
}

std::vector<int> Partition::rows() const {
  std::vector<int> r;
  r.reserve(total_length());
  for (const auto& s : segments_)
    for (int t = s.start; t < s.end; ++t) r.push_back(t - 1);
  return r;
}

std::vector<char> Partition::mask() const {
  std::vector<char> m(T_, 0);
  for (const auto& s : segments_)
    for (int t = s.start; t < s.end; ++t) m[t - 1] = 1;
  return m;
}

bool Partition::strictly_gapped() const {
  for (size_t i = 1; i < segments_.size(); ++i)
    if (segments_[i - 1].end >= segments_[i].start) return false;
  return true;
}

std::string Partition::to_string() const {
  std::string s;
  for (size_t i = 0; i < segments_.size(); ++i) {
    if (i) s += ' ';
    s += "[" + std::to_string(segments_[i].start) + "," + std::to_string(segments_[i].end) + ")";
  }
  return s;
}

bool LengthRules::admits(const Partition& P) const {
  if (P.T() != T || !P.strictly_gapped()) return false;
  if (P.count() < min_count || P.count() > max_count) return false;
  for (const auto& s : P.segments())
    if (s.length() < min_segment) return false;
  const int L = P.total_length();
  return L >= min_total && L <= max_total;
}

int floor_fraction(double frac, int T) { return static_cast<int>(std::floor(frac * T + 1e-9)); }
int ceil_fraction(double frac, int T) { return static_cast<int>(std::ceil(frac * T - 1e-9)); }

LengthRules search_rules(int T, double eps, double pi_l, int m_plus) {
  if (!(eps > 0) || !(pi_l > 0) || pi_l > 1 || eps > pi_l) fail_validation("need 0 < eps <= pi_L <= 1");
  if (m_plus < 1) fail_validation("m_plus must be >= 1");
  LengthRules r;
  r.T = T;
  r.min_segment = floor_fraction(eps, T);
  if (r.min_segment < 1) fail_validation("eps * T must be at least 1");
  r.min_total = std::max(floor_fraction(pi_l, T), r.min_segment);
  if (r.min_total > T) fail_validation("infeasible partition class: floor(pi_L T) > T");
  r.max_total = T;
  r.min_count = 1;
  r.max_count = m_plus;
  return r;
}

LengthRules exact_rules(int T, double eps, double pi0, int m0) {
  if (!(eps > 0) || !(pi0 > 0) || pi0 > 1) fail_validation("need 0 < eps and 0 < pi0 <= 1");
  if (m0 < 1) fail_validation("m0 must be >= 1");
  LengthRules r;
  r.T = T;
  r.min_segment = floor_fraction(eps, T);
  if (r.min_segment < 1) fail_validation("eps * T must be at least 1");
  r.min_total = r.max_total = floor_fraction(pi0, T);
  r.min_count = r.max_count = m0;
  if (m0 * r.min_segment > r.min_total || r.min_total + (m0 - 1) > T)
    fail_validation("infeasible class: " + std::to_string(m0) + " segments of length >= " +
                    std::to_string(r.min_segment) + " with total " + std::to_string(r.min_total));
  return r;
}

LengthRules open_rules(int T, double eps, int m_plus) {
  if (!(eps > 0) || eps >= 1) fail_validation("need 0 < eps < 1");
  if (m_plus < 1) fail_validation("m_plus must be >= 1");
  LengthRules r;
  r.T = T;
  r.min_segment = floor_fraction(eps, T);
  if (r.min_segment < 1) fail_validation("eps * T must be at least 1");
  r.min_total = std::max(floor_fraction(eps, T) + 1, r.min_segment);
  r.max_total = T;
  r.min_count = 1;
  r.max_count = m_plus;
  return r;
}

namespace {

// positions are 0-based cut points; a segment (s, e) covers rows s..e-1
bool enumerate_rec(const LengthRules& r, int next_start, int used, std::vector<Segment>& cur,
                   const std::function<bool(const Partition&)>& visit) {
  const int k = static_cast<int>(cur.size());
  if (k >= r.min_count && used >= r.min_total && used <= r.max_total) {
    if (!visit(Partition(cur, r.T))) return false;
  }
  if (k == r.max_count) return true;
  for (int s = next_start; s + r.min_segment <= r.T; ++s) {
    for (int e = s + r.min_segment; e <= r.T; ++e) {
      if (used + (e - s) > r.max_total) break;
      cur.push_back({s + 1, e + 1});
      const bool go = enumerate_rec(r, e + 1, used + (e - s), cur, visit);
      cur.pop_back();
      if (!go) return false;
    }
  }
  return true;
}

}  // namespace

void for_each_partition(const LengthRules& rules, const std::function<bool(const Partition&)>& visit) {
  std::vector<Segment> cur;
  enumerate_rec(rules, 0, 0, cur, visit);
}

std::vector<Partition> enumerate_partitions(int T, double eps, double pi_l, int m_plus) {
  const auto rules = search_rules(T, eps, pi_l, m_plus);
  std::vector<Partition> out;
  for_each_partition(rules, [&](const Partition& P) {
    out.push_back(P);
    return true;
  });
  return out;
}

long long count_partitions(const LengthRules& r, long long limit) {
  // ways[k][L] of placing k segments ending at or before position e, by total length; rolled over e
  const int T = r.T;
  const int K = r.max_count;
  // C[k][e][L]: count with k segments, last segment ends exactly at e
  // P[k][s][L]: count with k segments all ending at or before s-1 (k = 0: 1 way with L = 0)
  auto idx = [&](int e, int L) { return static_cast<size_t>(e) * (T + 1) + L; };
  std::vector<long double> P((T + 2) * static_cast<size_t>(T + 1), 0.0L), C, Pn;
  for (int s = 0; s <= T; ++s) P[idx(s, 0)] = 1.0L;
  long double total = 0;
  for (int k = 1; k <= K; ++k) {
    C.assign(P.size(), 0.0L);
    for (int e = r.min_segment; e <= T; ++e)
      for (int s = 0; s + r.min_segment <= e; ++s) {
        const int len = e - s;
        for (int L = 0; L + len <= std::min(T, r.max_total); ++L) {
          const long double w = P[idx(s, L)];
          if (w != 0) C[idx(e, L + len)] += w;
        }
      }
    if (k >= r.min_count)
      for (int e = 0; e <= T; ++e)
        for (int L = r.min_total; L <= std::min(T, r.max_total); ++L) total += C[idx(e, L)];
    if (total > static_cast<long double>(limit)) return limit + 1;
    // next P: last segment ends at e' <= s-1
    Pn.assign(P.size(), 0.0L);
    for (int s = 1; s <= T; ++s)
      for (int L = 0; L <= T; ++L) Pn[idx(s, L)] = Pn[idx(s - 1, L)] + C[idx(s - 1, L)];
    P.swap(Pn);
  }
  return static_cast<long long>(total + 0.5L);
}

long long count_partitions_cached(const LengthRules& r, long long limit) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, int, int, int, long long>, long long> cache;
  const auto key = std::make_tuple(r.T, r.min_segment, r.min_total, r.max_total, r.min_count, r.max_count, limit);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const long long c = count_partitions(r, limit);
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = c;
  return c;
}

// ---------------------------------------------------------------- selection algebra

const Eigen::MatrixXd block_matrix(const Dataset& ds, Block b) {
  switch (b) {
    case Block::y: return ds.y;
    case Block::d: return ds.d;
    case Block::x: return ds.x;
    case Block::z: return ds.z;
  }
  return {};
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& a, const Partition& P) {
  const auto rows = P.rows();
  Eigen::MatrixXd out(static_cast<int>(rows.size()), a.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = a.row(rows[i]);
  return out;
}

Eigen::MatrixXd zero_fill(const Eigen::MatrixXd& a, const Partition& P) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (const auto& s : P.segments()) out.middleRows(s.start - 1, s.length()) = a.middleRows(s.start - 1, s.length());
  return out;
}

Eigen::MatrixXd residualize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return a;
  return ols(a, x).residuals;
}

Eigen::MatrixXd residualize(const Dataset& ds, const Partition& P, Block b) {
  if (P.T() != ds.T()) fail_validation("partition length differs from dataset T");
  const Eigen::MatrixXd a = select_rows(block_matrix(ds, b), P);
  if (ds.p() == 0) return a;
  try {
    return residualize(a, select_rows(ds.x, P));
  } catch (const SingularityError&) {
    throw SingularityError("exogenous regressors are rank deficient on subsample " + P.to_string());
  }
}

}  // namespace pilate
