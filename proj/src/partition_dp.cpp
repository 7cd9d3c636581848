#include "pilate/partition_dp.hpp"

#include <algorithm>
#include <numeric>

namespace pilate {

SegmentTable::SegmentTable(int T, int min_segment)
    : T_(T), min_segment_(min_segment), w_(static_cast<size_t>(T + 1) * (T + 1), kNegInf) {}

bool better_candidate(double v1, const Partition& p1, double v2, const Partition& p2) {
  if (v1 != v2) return v1 > v2;
  if (p1.total_length() != p2.total_length()) return p1.total_length() > p2.total_length();
  return p1.segments().front().start < p2.segments().front().start;
}

namespace {

// States are indexed by (g, pos): g = rows left uncovered among the first pos rows.
struct Grid {
  int T;
  int G;
  size_t at(int g, int p) const { return static_cast<size_t>(g) * (T + 1) + p; }
  size_t size() const { return static_cast<size_t>(G + 1) * (T + 1); }
};

struct FinalState {
  double v;
  int k, e, g;
};

class TopK {
 public:
  TopK(int T, int k) : cap_(std::max(1, k)), by_len_(T + 1) {}
  void push(int L, const FinalState& s) {
    auto& v = by_len_[L];
    if (static_cast<int>(v.size()) == cap_ && !(s.v > v.back().v)) return;
    auto it = std::upper_bound(v.begin(), v.end(), s, [](const FinalState& a, const FinalState& b) { return a.v > b.v; });
    v.insert(it, s);
    if (static_cast<int>(v.size()) > cap_) v.pop_back();
  }
  const std::vector<FinalState>& at(int L) const { return by_len_[L]; }

 private:
  int cap_;
  std::vector<std::vector<FinalState>> by_len_;
};

struct Backpointers {
  std::vector<std::vector<int>> a_arg;   // per k (index k-1): segment start of the state ending at e
  std::vector<std::vector<int>> b_from;  // per k (index k-1): last end of the best state before s
};

Partition backtrack(const Backpointers& bp, const Grid& grid, int k, int e, int g) {
  std::vector<Segment> segs;
  for (;;) {
    const int s = bp.a_arg[k - 1][grid.at(g, e)];
    segs.push_back({s + 1, e + 1});
    if (k == 1) break;
    const int ep = bp.b_from[k - 2][grid.at(g, s)];
    g -= s - ep;
    e = ep;
    --k;
  }
  std::reverse(segs.begin(), segs.end());
  return Partition(std::move(segs), grid.T);
}

// B_k(g, s) = max(B_k(g-1, s-1), A_k(g-1, s-1)): row s is left uncovered.
void advance_gap(const Grid& grid, const std::vector<double>& A, std::vector<double>& B, std::vector<int>* from) {
  std::fill(B.begin(), B.end(), kNegInf);
  if (from) std::fill(from->begin(), from->end(), -1);
  for (int g = 1; g <= grid.G; ++g) {
    for (int s = g; s <= grid.T; ++s) {
      const size_t prev = grid.at(g - 1, s - 1);
      const double viaB = B[prev];
      const double viaA = A[prev];
      const size_t cur = grid.at(g, s);
      if (viaA > viaB) {
        B[cur] = viaA;
        if (from) (*from)[cur] = s - 1;
      } else if (viaB > kNegInf) {
        B[cur] = viaB;
        if (from) (*from)[cur] = (*from)[prev];
      }
    }
  }
}

template <class FillA>
DpProfile run_dp(const LengthRules& r, int top_k, FillA fill_a) {
  const int T = r.T;
  DpProfile out;
  out.best.assign(T + 1, kNegInf);
  out.top.assign(T + 1, {});
  const int G = T - r.min_total;
  if (G < 0 || r.max_count < 1) return out;
  const Grid grid{T, G};
  const int lmin = std::max(1, r.min_segment);
  std::vector<double> Bprev(grid.size(), kNegInf), A(grid.size()), Bcur(grid.size());
  for (int s = 0; s <= std::min(T, G); ++s) Bprev[grid.at(s, s)] = 0.0;
  Backpointers bp;
  bp.a_arg.resize(r.max_count);
  bp.b_from.resize(std::max(0, r.max_count - 1));
  TopK finals(T, top_k);
  for (int k = 1; k <= r.max_count; ++k) {
    std::fill(A.begin(), A.end(), kNegInf);
    auto& arg = bp.a_arg[k - 1];
    arg.assign(grid.size(), -1);
    for (int g = 0; g <= G; ++g) {
      const double* Bg = &Bprev[grid.at(g, 0)];
      double* Ag = &A[grid.at(g, 0)];
      int* argg = &arg[grid.at(g, 0)];
      const int e_hi = std::min(T, g + r.max_total);
      fill_a(g, lmin, e_hi, Bg, Ag, argg);
      if (k >= r.min_count) {
        for (int e = std::max(g + lmin, g + r.min_total); e <= e_hi; ++e) {
          if (Ag[e] > kNegInf) finals.push(e - g, {Ag[e], k, e, g});
        }
      }
    }
    if (k < r.max_count) {
      auto& from = bp.b_from[k - 1];
      from.resize(grid.size());
      advance_gap(grid, A, Bcur, &from);
      Bprev.swap(Bcur);
    }
  }
  for (int L = r.min_total; L <= std::min(T, r.max_total); ++L) {
    for (const auto& st : finals.at(L)) out.top[L].push_back({backtrack(bp, grid, st.k, st.e, st.g), st.v});
    if (!out.top[L].empty()) out.best[L] = out.top[L].front().score;
  }
  return out;
}

// Upper envelope of lines a·x + b over a fixed sorted abscissa set.
class LiChao {
 public:
  explicit LiChao(std::vector<double> xs) : xs_(std::move(xs)), n_(static_cast<int>(xs_.size())) {
    a_.assign(4 * n_, 0.0);
    b_.assign(4 * n_, 0.0);
    stamp_.assign(4 * n_, -1);
  }
  void reset() { ++cur_; }
  void insert(double la, double lb) {
    int node = 1, lo = 0, hi = n_ - 1;
    for (;;) {
      if (stamp_[node] != cur_) {
        stamp_[node] = cur_;
        a_[node] = la;
        b_[node] = lb;
        return;
      }
      const int mid = (lo + hi) / 2;
      const bool left_better = la * xs_[lo] + lb > a_[node] * xs_[lo] + b_[node];
      const bool mid_better = la * xs_[mid] + lb > a_[node] * xs_[mid] + b_[node];
      if (mid_better) {
        std::swap(a_[node], la);
        std::swap(b_[node], lb);
      }
      if (lo == hi) return;
      if (left_better != mid_better) {
        node = 2 * node;
        hi = mid;
      } else {
        node = 2 * node + 1;
        lo = mid + 1;
      }
    }
  }
  double query(int idx) const {
    const double x = xs_[idx];
    int node = 1, lo = 0, hi = n_ - 1;
    double r = kNegInf;
    for (;;) {
      if (stamp_[node] != cur_) return r;
      r = std::max(r, a_[node] * x + b_[node]);
      if (lo == hi) return r;
      const int mid = (lo + hi) / 2;
      if (idx <= mid) {
        node = 2 * node;
        hi = mid;
      } else {
        node = 2 * node + 1;
        lo = mid + 1;
      }
    }
  }

 private:
  std::vector<double> xs_;
  int n_;
  std::vector<double> a_, b_;
  std::vector<int> stamp_;
  int cur_ = 0;
};

}  // namespace

DpProfile dp_profile(const SegmentTable& w, const LengthRules& r, int top_k) {
  if (w.T() != r.T) fail_validation("segment table and rules disagree on T");
  return run_dp(r, top_k, [&](int g, int lmin, int e_hi, const double* Bg, double* Ag, int* argg) {
    for (int e = g + lmin; e <= e_hi; ++e) {
      const double* wc = w.column(e);
      double best = kNegInf;
      int arg = -1;
      for (int s = g; s <= e - lmin; ++s) {
        const double b = Bg[s];
        if (b == kNegInf) continue;
        const double v = b + wc[s];
        if (v > best) {
          best = v;
          arg = s;
        }
      }
      Ag[e] = best;
      argg[e] = arg;
    }
  });
}

DpProfile dp_profile_linear(const std::vector<double>& H, const LengthRules& r, int top_k) {
  if (static_cast<int>(H.size()) != r.T + 1) fail_validation("cumulative series must have T+1 entries");
  return run_dp(r, top_k, [&](int g, int lmin, int e_hi, const double* Bg, double* Ag, int* argg) {
    double run = kNegInf;
    int arg = -1;
    for (int e = g + lmin; e <= e_hi; ++e) {
      const int s = e - lmin;
      if (Bg[s] > kNegInf) {
        const double c = Bg[s] - H[s];
        if (c > run) {
          run = c;
          arg = s;
        }
      }
      if (arg >= 0) {
        Ag[e] = run + H[e];
        argg[e] = arg;
      }
    }
  });
}

std::vector<double> dp_profile_squared_increments(const std::vector<double>& W, const LengthRules& r) {
  const int T = r.T;
  if (static_cast<int>(W.size()) != T + 1) fail_validation("path must have T+1 entries");
  std::vector<double> best(T + 1, kNegInf);
  const int G = T - r.min_total;
  if (G < 0) return best;
  const Grid grid{T, G};
  const int lmin = std::max(1, r.min_segment);

  std::vector<int> order(T + 1), rank(T + 1);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return W[i] < W[j]; });
  std::vector<double> xs(T + 1);
  for (int i = 0; i <= T; ++i) {
    xs[i] = W[order[i]];
    rank[order[i]] = i;
  }
  LiChao hull(xs);

  std::vector<double> A(grid.size(), kNegInf), B(grid.size(), kNegInf);
  auto record = [&](int k, int g, int e, double v) {
    if (k < r.min_count) return;
    const int L = e - g;
    if (L >= r.min_total && L <= r.max_total && v > best[L]) best[L] = v;
  };
  // one segment: it starts at s = g
  for (int g = 0; g <= G; ++g) {
    for (int e = g + lmin; e <= std::min(T, g + r.max_total); ++e) {
      const double d = W[e] - W[g];
      A[grid.at(g, e)] = d * d;
      record(1, g, e, d * d);
    }
  }
  for (int k = 2; k <= r.max_count; ++k) {
    advance_gap(grid, A, B, nullptr);
    std::fill(A.begin(), A.end(), kNegInf);
    for (int g = 1; g <= G; ++g) {
      hull.reset();
      const double* Bg = &B[grid.at(g, 0)];
      double* Ag = &A[grid.at(g, 0)];
      bool any = false;
      for (int e = g + lmin; e <= std::min(T, g + r.max_total); ++e) {
        const int s = e - lmin;
        if (Bg[s] > kNegInf) {
          hull.insert(-2.0 * W[s], Bg[s] + W[s] * W[s]);
          any = true;
        }
        if (!any) continue;
        const double v = hull.query(rank[e]) + W[e] * W[e];
        Ag[e] = v;
        record(k, g, e, v);
      }
    }
  }
  return best;
}

}  // namespace pilate
