// Acceptance suite: one PASS/FAIL line per criterion. Criteria 6-8 drive the
// hibp-lab commands in-process through run_cli.
//
// Usage: acceptance [--only 1,2,...] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hibp/cli.hpp"
#include "hibp/countdists.hpp"
#include "hibp/hhibp.hpp"
#include "hibp/inference.hpp"
#include "hibp/io.hpp"
#include "hibp/predict.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace hibp;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.2e", x); }

fs::path g_work;

// --- shared oracles --------------------------------------------------------

// Sum of a pmf on m = lo, lo+1, ... with consecutive-term ratio bounded by
// rho < 1 beyond some point: stops once the geometric tail bound is below tol.
double sum_with_tail(const std::function<double(long)>& pmf, long lo, double rho, double* tail_bound,
                     double tol = 1e-13, long m_cap = 2000000) {
  double s = 0.0;
  for (long m = lo; m <= m_cap; ++m) {
    const double p = pmf(m);
    s += p;
    const double bound = p * rho / (1.0 - rho);
    if (m > lo + 10 && bound < tol) {
      *tail_bound = bound;
      return s;
    }
  }
  *tail_bound = 1.0;
  return s;
}

double nb_pmf(long x, double shape, double q) {
  return std::exp(std::lgamma(x + shape) - std::lgamma(x + 1.0) - std::lgamma(shape) + x * std::log(q) +
                  shape * std::log1p(-q));
}

double trbinom_pmf(long m, long M, double a, double b) {
  double z = 0.0;
  auto w = [&](long k) {
    return std::exp(std::lgamma(M + 1.0) - std::lgamma(k + 1.0) - std::lgamma(M - k + 1.0) + std::lgamma(k - a) +
                    std::lgamma(M - k + b + a) - std::lgamma(M + b));
  };
  for (long k = 1; k <= M; ++k) z += w(k);
  return w(m) / z;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

json run(const std::vector<std::string>& args, int* code = nullptr) {
  std::ostringstream o, e;
  const int c = run_cli(args, o, e);
  if (code) *code = c;
  if (c != 0 && !code) throw std::runtime_error("hibp-lab " + args[0] + " failed: " + e.str());
  return json::parse(o.str());
}

std::string path(const std::string& name) { return (g_work / name).string(); }

// --- enumeration helpers ---------------------------------------------------

// One feature column of a draw with M = 1 in every group: occurrences per
// group and each occurrence's slab total.
struct Column {
  std::vector<std::vector<long>> occ;
};

void compositions(long total, long parts, std::vector<long>& cur, std::vector<std::vector<long>>& out) {
  if (parts == 0) {
    if (total == 0) out.push_back(cur);
    return;
  }
  for (long a = 1; a <= total - (parts - 1); ++a) {
    cur.push_back(a);
    compositions(total - a, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<Column> full_columns(int J, long cap) {
  std::vector<Column> cols;
  std::function<void(int, long, Column&)> rec = [&](int j, long used, Column& c) {
    if (j == J) {
      bool any = false;
      for (const auto& o : c.occ) any = any || !o.empty();
      if (any) cols.push_back(c);
      return;
    }
    for (long n = 0; n <= cap - used; ++n) {
      std::vector<std::vector<long>> comps;
      std::vector<long> cur;
      if (n == 0)
        comps.push_back({});
      else
        for (long t = n; t <= cap - used; ++t) compositions(t, n, cur, comps);
      for (const auto& comp : comps) {
        c.occ.push_back(comp);
        rec(j + 1, used + std::accumulate(comp.begin(), comp.end(), 0L), c);
        c.occ.pop_back();
      }
    }
  };
  Column c;
  rec(0, 0, c);
  return cols;
}

HibpDraw draw_of(const std::vector<const Column*>& cs, int J) {
  HibpDraw d;
  d.r = static_cast<long>(cs.size());
  d.has_occurrences = true;
  d.X.assign(J, {});
  d.agg.assign(J, {});
  d.doc_totals.assign(J, {});
  d.occurrences.assign(J, {});
  for (const Column* c : cs)
    for (int j = 0; j < J; ++j) {
      d.X[j].push_back(static_cast<long>(c->occ[j].size()));
      const long s = std::accumulate(c->occ[j].begin(), c->occ[j].end(), 0L);
      CountMatrix occ;
      for (long a : c->occ[j]) occ.push_back({a});
      d.agg[j].push_back(s);
      d.doc_totals[j].push_back({s});
      d.occurrences[j].push_back(occ);
    }
  return d;
}

// Sum over r <= r_max of (1/r!) * sum over ordered column sequences.
template <class Col, class F>
double janossy_sum(const std::vector<Col>& cols, int r_max, F&& prob) {
  double total = 0.0, fact = 1.0;
  for (int r = 0; r <= r_max; ++r) {
    if (r > 0) fact *= r;
    double sum = 0.0;
    std::vector<std::size_t> idx(r, 0);
    for (;;) {
      std::vector<const Col*> cs;
      for (auto i : idx) cs.push_back(&cols[i]);
      sum += prob(cs);
      int pos = r - 1;
      while (pos >= 0 && ++idx[pos] == cols.size()) idx[pos--] = 0;
      if (pos < 0) break;
    }
    total += sum / fact;
  }
  return total;
}

HibpSpec tiny_spec(int J, double theta0) {
  HibpSpec s;
  s.baseline = GGParams{-1.0, 1.0, theta0};
  for (int j = 0; j < J; ++j)
    s.groups.push_back(GroupSpec{GGParams{-1.0 + 0.3 * j, 1.0, 0.5}, SlabSpec::poisson(0.05), 1});
  return s;
}

// --- criteria --------------------------------------------------------------

Outcome normalization() {
  Outcome o;
  struct P {
    double kappa, zeta;
  };
  const P sets[5] = {{0.1, 1.0}, {1.0, 1.0}, {5.0, 0.5}, {2.0, 3.0}, {20.0, 2.0}};
  double worst = 0.0;
  for (double alpha : {-0.5, 0.0, 0.6})
    for (const P& p : sets) {
      double tail;
      const double s = sum_with_tail(
          [&](long m) { return std::exp(mtp_univariate_log_pmf(m, p.kappa, GGParams{alpha, p.zeta, 1.0})); }, 1,
          p.kappa / (p.kappa + p.zeta), &tail);
      worst = std::max(worst, std::fabs(1.0 - s) + tail);
    }
  o.check(worst < 1e-8, "MtP, 3 alpha branches x 5 (kappa, zeta): max |1 - sum| + tail = " + sci(worst));

  worst = 0.0;
  for (double alpha : {-0.7, 0.0, 0.45})
    for (double p : {0.2, 0.6, 0.9}) {
      double tail;
      const double s = sum_with_tail([&](long m) { return std::exp(trunc_nb_log_pmf(m, alpha, p)); }, 1,
                                     p, &tail);
      worst = std::max(worst, std::fabs(1.0 - s) + tail);
    }
  o.check(worst < 1e-8, "tNB, 3 alpha x 3 p: max |1 - sum| + tail = " + sci(worst));

  worst = 0.0;
  for (double alpha : {-0.5, 0.3, 0.7})
    for (double p : {0.3, 0.7})
      for (long n = 1; n <= 5; ++n) {
        // The n-fold sum exceeds m only if some summand exceeds m / n.
        double s = 0.0;
        const long hi = 400;
        for (long m = n; m <= hi; ++m) s += std::exp(sum_trunc_nb_log_pmf(m, n, alpha, p));
        double single_tail = 0.0;
        for (long m = hi / n; m <= hi / n + 2000; ++m) single_tail += oracle::tnb_pmf(m, alpha, p);
        worst = std::max(worst, std::fabs(1.0 - s) + n * single_tail);
      }
  o.check(worst < 1e-8, "sum-tNB (Stirling), n <= 5: max |1 - sum| + tail = " + sci(worst));

  worst = 0.0;
  for (double a : {0.0, 0.25, 0.8})
    for (double b : {1.0, 6.0})
      for (long M : {1L, 7L, 40L}) {
        double s = 0.0;
        for (long m = 1; m <= M; ++m) s += std::exp(trbinom_sb_log_pmf(m, M, a, b));
        worst = std::max(worst, std::fabs(1.0 - s));
      }
  o.check(worst < 1e-8, "trBinomSB, 18 parameter sets: max |1 - sum| = " + sci(worst));

  // Aggregated marginal summed over r, latent X and aggregated counts.
  for (auto [J, theta0, cap, r_max] : {std::tuple{1, 0.5, 10L, 3}, std::tuple{2, 0.05, 7L, 2}}) {
    HibpSpec s = tiny_spec(J, theta0);
    std::vector<std::vector<std::pair<long, long>>> cols;  // per group (n, m); n = 0 means absent
    std::vector<std::pair<long, long>> cells{{0, 0}};
    for (long m = 1; m <= cap; ++m)
      for (long n = 1; n <= m; ++n) cells.push_back({n, m});
    std::function<void(int, std::vector<std::pair<long, long>>&)> rec = [&](int j, auto& c) {
      if (j == J) {
        for (auto& x : c)
          if (x.first > 0) {
            cols.push_back(c);
            return;
          }
        return;
      }
      for (auto& x : cells) {
        c.push_back(x);
        rec(j + 1, c);
        c.pop_back();
      }
    };
    std::vector<std::pair<long, long>> cur;
    rec(0, cur);
    const double total = janossy_sum(cols, r_max, [&](const auto& cs) {
      AggregatedData d;
      d.M.assign(J, 1);
      d.m.assign(J, {});
      CountMatrix X(J);
      for (const auto* c : cs)
        for (int j = 0; j < J; ++j) {
          d.m[j].push_back((*c)[j].second);
          X[j].push_back((*c)[j].first);
        }
      return std::exp(log_marginal_aggregated(s, d, X));
    });
    o.check(std::fabs(total - 1.0) < 1e-8, "aggregated marginal, J=" + std::to_string(J) + ", M=1, counts <= " +
                                              std::to_string(cap) + ", r <= " + std::to_string(r_max) +
                                              ": |1 - sum| = " + sci(std::fabs(total - 1.0)));
  }
  return o;
}

template <class K>
double tv_of(const std::map<K, double>& counts, long n, const std::map<K, double>& exact) {
  std::map<K, double> emp;
  for (const auto& [k, c] : counts) emp[k] = c / static_cast<double>(n);
  return oracle::total_variation(emp, exact);
}

Outcome sampler_vs_pmf() {
  Outcome o;
  const long N = 1000000;

  {
    // Joint pmf: univariate MtP of the total times a multinomial split.
    MtPParams p{{1.0, 0.5}, GGParams{0.3, 1.0, 1.0}};
    RngStream rng(201, 0);
    std::map<std::pair<long, long>, double> c, exact;
    for (long i = 0; i < N; ++i) {
      auto x = mtp_sample(p, rng);
      c[{x[0], x[1]}] += 1.0;
    }
    for (long t = 1; t <= 120; ++t) {
      const double pt = oracle::mtp_pmf(t, 1.5, 0.3, 1.0);
      for (long a = 0; a <= t; ++a)
        exact[{a, t - a}] = pt * std::exp(std::lgamma(t + 1.0) - std::lgamma(a + 1.0) - std::lgamma(t - a + 1.0) +
                                          a * std::log(1.0 / 1.5) + (t - a) * std::log(0.5 / 1.5));
    }
    const double tv = tv_of(c, N, exact);
    o.check(tv < 0.01, "mtp_sample (bivariate, alpha=0.3): TV = " + sci(tv));
  }
  {
    RngStream rng(202, 0);
    std::map<long, double> c, exact;
    for (long i = 0; i < N; ++i) c[tpoisson_sample(2.5, rng)] += 1.0;
    for (long m = 1; m <= 60; ++m)
      exact[m] = std::exp(m * std::log(2.5) - 2.5 - std::lgamma(m + 1.0)) / (1.0 - std::exp(-2.5));
    const double tv = tv_of(c, N, exact);
    o.check(tv < 0.01, "tpoisson_sample (lambda=2.5): TV = " + sci(tv));
  }
  {
    RngStream rng(203, 0);
    std::map<long, double> c, exact;
    for (long i = 0; i < N; ++i) c[trbinom_sb_sample(10, 0.25, 2.0, rng)] += 1.0;
    for (long m = 1; m <= 10; ++m) exact[m] = trbinom_pmf(m, 10, 0.25, 2.0);
    const double tv = tv_of(c, N, exact);
    o.check(tv < 0.01, "trbinom_sb_sample (M=10, alpha=0.25, beta=2): TV = " + sci(tv));
  }
  {
    // Poisson slab over M=3 documents: the total is tNB(alpha_j, beta M / (beta M + zeta_j)).
    GroupSpec g{GGParams{0.4, 1.0, 2.0}, SlabSpec::poisson(1.0), 3};
    RngStream rng(204, 0);
    std::map<long, double> c, exact;
    for (long i = 0; i < N; ++i) {
      auto a = sample_slab_vector(g, rng);
      c[std::accumulate(a.begin(), a.end(), 0L)] += 1.0;
    }
    for (long m = 1; m <= 3000; ++m) exact[m] = oracle::tnb_pmf(m, 0.4, 0.75);
    const double tv = tv_of(c, N, exact);
    o.check(tv < 0.01, "slab-vector totals (Poisson, M=3): TV = " + sci(tv));
  }
  {
    // Revived occurrences of a seen feature in group 0: NB(n_k - alpha, q_0)
    // with q_0 = gamma / (gamma + kappa + zeta).
    HibpSpec s;
    s.baseline = GGParams{0.3, 1.0, 2.0};
    s.groups.push_back(GroupSpec{GGParams{0.4, 1.5, 1.2}, SlabSpec::poisson(0.8), 3});
    s.groups.push_back(GroupSpec{GGParams{-0.5, 1.0, 1.0}, SlabSpec::poisson(1.3), 2});
    TrainState st{s, AggregatedData{{3, 2}, CountMatrix{{4}, {2}}}, CountMatrix{{2}, {1}}, {}};
    auto psi = [](const GroupSpec& g, long M) { return g.prior.theta * oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * M); };
    const double kappa = psi(s.groups[0], 3) + psi(s.groups[1], 2);
    const double gamma = psi(s.groups[0], 4) - psi(s.groups[0], 3);
    const double q = gamma / (gamma + kappa + s.baseline.zeta);
    RngStream rng(205, 0);
    std::map<long, double> c, exact;
    for (long i = 0; i < N; ++i) c[predict_sample(st, 0, rng).revived_occurrences[0]] += 1.0;
    for (long x = 0; x < 400; ++x) exact[x] = nb_pmf(x, 3 - 0.3, q);
    const double tv = tv_of(c, N, exact);
    o.check(tv < 0.01, "revived-feature NB counts: TV = " + sci(tv));
  }
  return o;
}

Outcome stirling_oracle() {
  Outcome o;
  double worst = 0.0;
  for (double alpha : {-0.5, 0.0, 0.3, 0.7})
    for (double p : {0.2, 0.4, 0.85}) {
      std::vector<double> base(13, 0.0);
      for (int m = 1; m <= 12; ++m) base[m] = oracle::tnb_pmf(m, alpha, p);
      for (int n = 1; n <= 5; ++n) {
        auto conv = oracle::convolve_power(base, n, 12);
        for (int m = 1; m <= 12; ++m) {
          const double got = std::exp(sum_trunc_nb_log_pmf(m, n, alpha, p));
          const double err = conv[m] == 0.0 ? got : std::fabs(got - conv[m]) / conv[m];
          worst = std::max(worst, err);
        }
      }
    }
  o.check(worst < 1e-10, "sum_trunc_nb vs brute-force convolution, m <= 12, n <= 5: max relative error " + sci(worst));
  return o;
}

Outcome moments() {
  Outcome o;
  const int N = 10000;
  for (double alpha : {0.2, 0.7}) {
    const std::string text = R"({"model": "gg-gg-poisson", "seed": 41, "baseline": {"alpha": )" + format_real(alpha) +
                             R"(, "zeta": 1, "theta": 10},
      "random_groups": {"J": 4, "M": 20, "theta": [2, 4], "alpha": [0.2, 0.5], "zeta": 1, "beta": 1}})";
    const HibpSpec s = parse_config(text).hibp;
    double kappa = 0.0;
    for (const GroupSpec& g : s.groups) kappa += g.prior.theta * oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * g.M);
    const double phi = s.gamma0 * s.baseline.theta * oracle::psi_gg(alpha, s.baseline.zeta, kappa);
    RngStream rng(42, static_cast<std::uint64_t>(alpha * 10));
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double r = static_cast<double>(sample_hibp(s, rng).r);
      sum += r;
      sum2 += r * r;
    }
    const double mean = sum / N, se = std::sqrt((sum2 / N - mean * mean) / N);
    o.check(std::fabs(mean - phi) < 4 * se, "HIBP alpha=" + fmt("%.1f", alpha) + ": mean r " + fmt("%.3f", mean) +
                                                " vs closed form " + fmt("%.3f", phi) + " (" +
                                                fmt("%.2f", (mean - phi) / se) + " SE)");
  }

  // Two subgroups per category, all GG parameters drawn from the ranges above.
  for (double alpha : {0.2, 0.7}) {
    RngStream pr(43, 0);
    HhibpSpec s;
    s.baseline = GGParams{alpha, 1.0, 10.0};
    for (int j = 0; j < 4; ++j) {
      s.categories.push_back(GGParams{0.2 + 0.3 * pr.uniform(), 1.0, 2.0 + 2.0 * pr.uniform()});
      std::vector<GroupSpec> row;
      for (int d = 0; d < 2; ++d)
        row.push_back(GroupSpec{GGParams{0.2 + 0.3 * pr.uniform(), 1.0, 2.0 + 2.0 * pr.uniform()}, SlabSpec::poisson(1.0), 20});
      s.subgroups.push_back(row);
    }
    double outer = 0.0;
    for (int j = 0; j < 4; ++j) {
      double inner = 0.0;
      for (const GroupSpec& g : s.subgroups[j]) inner += g.prior.theta * oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * g.M);
      outer += s.categories[j].theta * oracle::psi_gg(s.categories[j].alpha, s.categories[j].zeta, inner);
    }
    const double phi = s.gamma0 * s.baseline.theta * oracle::psi_gg(alpha, s.baseline.zeta, outer);
    RngStream rng(44, static_cast<std::uint64_t>(alpha * 10));
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double r = static_cast<double>(sample_hhibp(s, rng).r);
      sum += r;
      sum2 += r * r;
    }
    const double mean = sum / N, se = std::sqrt((sum2 / N - mean * mean) / N);
    o.check(std::fabs(mean - phi) < 4 * se, "HHIBP alpha=" + fmt("%.1f", alpha) + ": mean r " + fmt("%.3f", mean) +
                                                " vs closed form " + fmt("%.3f", phi) + " (" +
                                                fmt("%.2f", (mean - phi) / se) + " SE)");
  }
  return o;
}

Outcome coherence() {
  Outcome o;
  for (auto [J, theta0, r_max] : {std::tuple{1, 0.5, 3}, std::tuple{2, 0.1, 2}}) {
    HibpSpec s = tiny_spec(J, theta0);
    auto cols = full_columns(J, 6);
    const double total =
        janossy_sum(cols, r_max, [&](const auto& cs) { return std::exp(log_marginal_full(s, draw_of(cs, J))); });
    o.check(std::fabs(total - 1.0) < 1e-6, "full marginal, J=" + std::to_string(J) +
                                               ", M=1, counts <= 6: |1 - sum| = " + sci(std::fabs(total - 1.0)));
  }

  RngStream rng(4, 0);
  double worst = 0.0;
  long pairs = 0;
  for (int rep = 0; rep < 100; ++rep) {
    HibpSpec s;
    s.baseline = GGParams{0.8 * rng.uniform() - 0.2, 1.0, 2.0};
    s.groups.push_back(GroupSpec{GGParams{0.9 * rng.uniform(), 1.5, 1.2}, SlabSpec::poisson(0.8), 3});
    s.groups.push_back(GroupSpec{GGParams{-rng.uniform(), 1.0, 1.0}, SlabSpec::poisson(1.3), 2});
    const long r = 4;
    CountMatrix m(2, std::vector<long>(r, 0)), X = m;
    for (long k = 0; k < r; ++k) {
      for (int j = 0; j < 2; ++j) m[j][k] = static_cast<long>(rng.uniform() * 7.0);
      if (m[0][k] + m[1][k] == 0) m[0][k] = 1;
      for (int j = 0; j < 2; ++j) X[j][k] = m[j][k] == 0 ? 0 : 1 + static_cast<long>(rng.uniform() * m[j][k]);
    }
    AggregatedData d{{3, 2}, m};
    ChainState c(s, d, X, RngStream(5, static_cast<std::uint64_t>(rep)));
    for (int j = 0; j < 2; ++j)
      for (long k = 0; k < r; ++k) {
        if (m[j][k] < 2) continue;
        auto lp = c.gibbs_log_probs(j, k);
        for (long n = 1; n < m[j][k]; ++n) {
          CountMatrix Xa = X, Xb = X;
          Xa[j][k] = n;
          Xb[j][k] = m[j][k];
          const double joint = log_marginal_aggregated(s, d, Xa) - log_marginal_aggregated(s, d, Xb);
          worst = std::max(worst, std::fabs(lp[n - 1] - lp[m[j][k] - 1] - joint));
          ++pairs;
        }
      }
  }
  o.check(worst < 1e-12, "Gibbs conditional vs joint ratio at 100 random states (" + std::to_string(pairs) +
                             " pairs): max error " + sci(worst));
  return o;
}

std::string benchmark_config(double alpha) {
  return R"({"model": "gg-gg-poisson", "seed": 1, "baseline": {"alpha": )" + format_real(alpha) +
         R"(, "zeta": 1, "theta": 10},
  "random_groups": {"J": 4, "M": 100, "theta": [2, 4], "alpha": [0.1, 0.6], "zeta": 1, "beta": 1},
  "mcmc": {"iters": 10000, "burnin": 5000, "chains": 3, "init_jitter": 1.0,
           "init": {"theta0": 1, "alpha": 0.3, "theta": 1, "alpha_j": 0.3}}})";
}

Outcome mcmc_recovery() {
  Outcome o;
  for (double alpha : {0.2, 0.6}) {
    const std::string cfg = path("recovery_" + fmt("%.1f", alpha) + ".json");
    write_file(cfg, benchmark_config(alpha));
    int covered = 0;
    double worst_rhat = 0.0;
    for (int seed = 1; seed <= 5; ++seed) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::string tag = fmt("%.1f", alpha) + "_" + std::to_string(seed);
      const std::string data = path("recovery_data_" + tag + ".json"), chains = path("recovery_chains_" + tag + ".csv");
      const std::string sd = std::to_string(seed);
      json sim = run({"simulate", "--config", cfg, "--seed", sd, "--out", data});
      run({"infer", "--config", cfg, "--seed", sd, "--data", data, "--out", chains});
      json dia = run({"diagnose", "--chains", chains});
      const json& th = dia["parameters"]["theta0"];
      const json& al = dia["parameters"]["alpha"];
      const double rt = th["rhat"].get<double>(), ra = al["rhat"].get<double>();
      const double lo = al["q025"].get<double>(), hi = al["q975"].get<double>();
      const bool cov = lo <= alpha && alpha <= hi;
      covered += cov;
      worst_rhat = std::max({worst_rhat, rt, ra});
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      o.notes.push_back("     alpha=" + fmt("%.1f", alpha) + " seed " + sd + ": r=" + std::to_string(sim["features"].get<long>()) +
                        " Rhat(theta0)=" + fmt("%.3f", rt) + " Rhat(alpha)=" + fmt("%.3f", ra) + " alpha 95% [" +
                        fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "] median " + fmt("%.3f", al["q50"].get<double>()) +
                        " theta0 95% [" + fmt("%.2f", th["q025"].get<double>()) + ", " +
                        fmt("%.2f", th["q975"].get<double>()) + "]" + (cov ? "" : " MISS") + " (" + fmt("%.0f", sec) + " s)");
      std::cout.flush();
    }
    o.check(worst_rhat < 1.2, "alpha=" + fmt("%.1f", alpha) + ": max Rhat over theta0 and alpha = " + fmt("%.3f", worst_rhat));
    o.check(covered >= 4, "alpha=" + fmt("%.1f", alpha) + ": 95% interval covers the truth in " +
                              std::to_string(covered) + "/5 replicates");
  }
  return o;
}

Outcome classification() {
  Outcome o;
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<double> acc_mean, ovl_mean, margin_mean;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    double acc = 0.0, ovl = 0.0, margin = 0.0;
    std::string per;
    for (int rep = 0; rep < 3; ++rep) {
      const std::string tag = fmt("%.1f", grid[a]) + "_" + std::to_string(rep);
      const std::string cfg = path("classify_" + tag + ".json"), data = path("classify_data_" + tag + ".json"),
                        tests = path("classify_tests_" + tag + ".json"), chains = path("classify_chains_" + tag + ".csv"),
                        res = path("classify_result_" + tag + ".json");
      const long seed = 1000 + 10 * static_cast<long>(a) + rep;
      write_file(cfg, R"({"model": "gg-gg-poisson", "seed": )" + std::to_string(seed) + R"(,
  "baseline": {"alpha": )" + format_real(grid[a]) + R"(, "zeta": 1, "theta": 10},
  "random_groups": {"J": 4, "M": 100, "theta": [2, 4], "alpha": [0.1, 0.6], "zeta": 1, "beta": 1},
  "mcmc": {"iters": 3000, "burnin": 1500, "chains": 2, "init_jitter": 0.5},
  "classify": {"n_test_per_group": 50, "posterior_samples": 10, "estimator": "exact"}})");
      run({"simulate", "--config", cfg, "--out", data, "--test-out", tests});
      run({"infer", "--config", cfg, "--data", data, "--out", chains});
      json r = run({"classify", "--config", cfg, "--data", data, "--posterior", path("classify_chains_" + tag + ".posterior.json"),
                    "--tests", tests, "--out", res});
      acc += r["accuracy"].get<double>() / 3.0;
      ovl += r["overlap"].get<double>() / 3.0;
      per += " " + fmt("%.3f", r["accuracy"].get<double>()) + "/" + fmt("%.3f", r["overlap"].get<double>());
      // Log predictive of the true group minus the best other group, per document.
      std::vector<double> gaps;
      const json written = json::parse(read_file(res));
      for (const json& d : written["results"]) {
        const auto lp = d["log_predictive"].get<std::vector<double>>();
        const auto label = d["label"].get<std::size_t>();
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lp.size(); ++j)
          if (j != label) other = std::max(other, lp[j]);
        gaps.push_back(lp[label] - other);
      }
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      margin += gaps[gaps.size() / 2] / 3.0;
    }
    acc_mean.push_back(acc);
    ovl_mean.push_back(ovl);
    margin_mean.push_back(margin);
    o.notes.push_back("     alpha=" + fmt("%.1f", grid[a]) + ": mean accuracy " + fmt("%.3f", acc) + ", mean overlap " +
                      fmt("%.3f", ovl) + ", median log-predictive margin " + fmt("%.1f", margin) +
                      " (per dataset accuracy/overlap:" + per + ")");
  }
  const double rho_acc = spearman(grid, acc_mean), rho_ovl = spearman(grid, ovl_mean);
  // Not a pass condition: shows whether a flat accuracy is a ceiling or a missing trend.
  o.notes.push_back("     Spearman(alpha, median margin) = " + fmt("%.3f", spearman(grid, margin_mean)));
  o.check(rho_acc > 0.8, "Spearman(alpha, accuracy) = " + fmt("%.3f", rho_acc));
  o.check(rho_ovl < -0.8, "Spearman(alpha, overlap) = " + fmt("%.3f", rho_ovl));
  return o;
}

Outcome determinism() {
  Outcome o;
  const std::string cfg = path("det_config.json");
  write_file(cfg, R"({"model": "gg-gg-poisson", "seed": 11,
  "baseline": {"alpha": 0.4, "zeta": 1, "theta": 5},
  "random_groups": {"J": 3, "M": 12, "theta": [2, 4], "alpha": [0.1, 0.6]},
  "mcmc": {"iters": 400, "burnin": 200, "chains": 3, "thin": 2, "init_jitter": 0.5},
  "classify": {"n_test_per_group": 6, "posterior_samples": 5, "sweeps": 40, "burnin": 10}})");
  const std::string hcfg = path("det_hconfig.json");
  write_file(hcfg, R"({"model": "gg-gg-sbp-bernoulli", "seed": 12, "keep_occurrences": true,
  "baseline": {"alpha": 0.3, "zeta": 1, "theta": 4},
  "categories": [{"alpha": 0.2, "theta": 2}, {"alpha": 0.4, "theta": 3}],
  "subgroups": [[{"alpha_b": 0.2, "beta_b": 1, "theta_b": 2, "M": 6}], [{"alpha_b": 0.0, "beta_b": 2, "theta_b": 1, "M": 5}]]})");

  auto run_all = [&](const std::string& dir, const std::string& threads) {
    fs::remove_all(g_work / dir);
    fs::create_directories(g_work / dir);
    auto p = [&](const std::string& f) { return (g_work / dir / f).string(); };
    const std::vector<std::vector<std::string>> cmds{
        {"simulate", "--config", cfg, "--out", p("data.json"), "--test-out", p("tests.json")},
        {"simulate", "--config", hcfg, "--out", p("hdata.json")},
        {"infer", "--config", cfg, "--data", p("data.json"), "--out", p("chains.csv"), "--threads", threads},
        {"diagnose", "--chains", p("chains.csv"), "--out", p("diagnose.json")},
        {"predict", "--data", p("data.json"), "--posterior", p("chains.posterior.json"), "--tests", p("tests.json"),
         "--group", "2", "--doc", "1", "--estimator", "gibbs", "--seed", "3", "--out", p("predict.json")},
        {"classify", "--config", cfg, "--data", p("data.json"), "--posterior", p("chains.posterior.json"), "--tests",
         p("tests.json"), "--estimator", "gibbs", "--out", p("classify.json"), "--threads", threads},
        {"overlap", "--data", p("hdata.json"), "--out", p("overlap.json")},
        {"plot-data", "--kind", "trace", "--input", p("chains.csv"), "--out", p("trace.csv")},
        {"plot-data", "--kind", "counts", "--input", p("data.json"), "--input", p("hdata.json"), "--out", p("counts.csv")},
        {"plot-data", "--kind", "classify", "--input", p("classify.json"), "--out", p("classify.csv")}};
    std::map<std::string, std::string> artifacts;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      std::ostringstream out, err;
      const int code = run_cli(cmds[i], out, err);
      if (code != 0) throw std::runtime_error("hibp-lab " + cmds[i][0] + " failed: " + err.str());
      std::string s = out.str();
      for (std::size_t pos; (pos = s.find((g_work / dir).string())) != std::string::npos;)
        s.replace(pos, (g_work / dir).string().size(), "DIR");
      artifacts["stdout_" + std::to_string(i) + "_" + cmds[i][0]] = s;
    }
    for (const auto& e : fs::directory_iterator(g_work / dir)) artifacts[e.path().filename().string()] = read_file(e.path().string());
    return artifacts;
  };
  auto a = run_all("det_a", "1");
  auto b = run_all("det_b", "4");
  std::vector<std::string> differ;
  for (const auto& [name, text] : a)
    if (!b.count(name) || b[name] != text) differ.push_back(name);
  o.check(a.size() == b.size() && differ.empty(),
          std::to_string(a.size()) + " artifacts and summaries from 10 commands, reruns with 1 and 4 threads: " +
              (differ.empty() ? std::string("byte-identical") : "differ: " + differ.front()));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::current_path() / "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--work DIR]\n";
      return 2;
    }
  }
  fs::create_directories(g_work);

  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Entry all[] = {{1, "distribution normalization", normalization},
                       {2, "sampler vs pmf", sampler_vs_pmf},
                       {3, "Stirling / convolution oracle", stirling_oracle},
                       {4, "generative moment checks", moments},
                       {5, "likelihood / enumeration coherence", coherence},
                       {6, "MCMC recovery", mcmc_recovery},
                       {7, "classification trend", classification},
                       {8, "CLI determinism", determinism}};
  int failed = 0;
  for (const Entry& e : all) {
    if (!only.empty() && !only.count(e.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.check(false, std::string("exception: ") + ex.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << e.id << ": " << e.name << " (" << fmt("%.1f", sec)
              << " s)\n";
    for (const std::string& n : o.notes) std::cout << "    " << n << "\n";
    std::cout.flush();
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
