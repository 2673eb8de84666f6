#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "doctest.h"
#include "hibp/errors.hpp"
#include "hibp/hhibp.hpp"
#include "test_support.hpp"

using namespace hibp;

namespace {

HhibpSpec small_spec(std::vector<std::vector<long>> Ms, double beta) {
  HhibpSpec s;
  s.baseline = GGParams{0.3, 1.5, 2.0};
  for (std::size_t j = 0; j < Ms.size(); ++j) {
    s.categories.push_back(GGParams{0.2 + 0.1 * j, 1.0 + j, 1.5});
    std::vector<GroupSpec> subs;
    for (std::size_t d = 0; d < Ms[j].size(); ++d)
      subs.push_back(GroupSpec{GGParams{0.1 * d, 1.0 + 0.5 * d, 1.0}, SlabSpec::poisson(beta), Ms[j][d]});
    s.subgroups.push_back(subs);
  }
  return s;
}

// Nested rate written out with the power-form exponent.
double nested_phi(const HhibpSpec& s, double* zeta0 = nullptr, std::vector<double>* zeta_cat = nullptr) {
  double outer = 0.0;
  for (int j = 0; j < s.J(); ++j) {
    double inner = 0.0;
    for (const auto& g : s.subgroups[j])
      inner += g.prior.theta * oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * g.M);
    const auto& c = s.categories[j];
    outer += c.theta * oracle::psi_gg(c.alpha, c.zeta, inner);
    if (zeta_cat) zeta_cat->push_back(c.zeta + inner);
  }
  if (zeta0) *zeta0 = s.baseline.zeta + outer;
  return s.gamma0 * s.baseline.theta * oracle::psi_gg(s.baseline.alpha, s.baseline.zeta, outer);
}

HhibpDraw empty_draw(const HhibpSpec& s) {
  HhibpDraw d;
  d.Xhat.assign(s.J(), {});
  d.C.assign(s.J(), {});
  for (int j = 0; j < s.J(); ++j) {
    d.Nhat.push_back(CountMatrix(s.subgroups[j].size()));
    d.agg.push_back(CountMatrix(s.subgroups[j].size()));
    d.doc_totals.push_back(Count3(s.subgroups[j].size()));
  }
  return d;
}

// Single-feature columns for J = D = M = 1: table sizes and the slab total of
// every occurrence, with the slab grand total at most cap.
struct HCol {
  std::vector<long> tables;
  std::vector<long> occ;
};

void comps(long total, long parts, std::vector<long>& cur, std::vector<std::vector<long>>& out) {
  if (parts == 0) {
    if (total == 0) out.push_back(cur);
    return;
  }
  for (long a = 1; a <= total - (parts - 1); ++a) {
    cur.push_back(a);
    comps(total - a, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<HCol> enumerate_hcols(long cap) {
  std::vector<HCol> out;
  for (long T = 1; T <= cap; ++T)
    for (long N = 1; N <= T; ++N) {
      std::vector<std::vector<long>> occs, tabs;
      std::vector<long> cur;
      comps(T, N, cur, occs);
      for (long n = 1; n <= N; ++n) {
        tabs.clear();
        comps(N, n, cur, tabs);
        for (auto& t : tabs)
          for (auto& o : occs) out.push_back(HCol{t, o});
      }
    }
  return out;
}

HhibpDraw draw_from(const std::vector<const HCol*>& cs) {
  HhibpDraw d;
  d.r = static_cast<long>(cs.size());
  d.has_occurrences = true;
  d.Xhat.assign(1, {});
  d.C.assign(1, {});
  d.Nhat.assign(1, CountMatrix(1));
  d.agg.assign(1, CountMatrix(1));
  d.doc_totals.assign(1, Count3(1));
  d.occurrences.assign(1, Count4(1));
  for (const HCol* c : cs) {
    d.Xhat[0].push_back(static_cast<long>(c->tables.size()));
    CountMatrix rows;
    for (long t : c->tables) rows.push_back({t});
    d.C[0].push_back(rows);
    long sum = 0;
    CountMatrix occ;
    for (long a : c->occ) {
      sum += a;
      occ.push_back({a});
    }
    d.Nhat[0][0].push_back(static_cast<long>(c->occ.size()));
    d.agg[0][0].push_back(sum);
    d.doc_totals[0][0].push_back({sum});
    d.occurrences[0][0].push_back(occ);
  }
  return d;
}

// Product-form log density: gamma ratios at each level, tilted zetas, table
// and slab multiplicities, with the per-document multinomial split.
double closed_form(const HhibpSpec& s, const HhibpDraw& d) {
  double zeta0 = 0.0;
  std::vector<double> zc;
  double phi = nested_phi(s, &zeta0, &zc);
  const double a0 = s.baseline.alpha;
  double lp = -phi + d.r * std::log(s.gamma0 * s.baseline.theta);
  for (long k = 0; k < d.r; ++k) {
    long nk = 0;
    for (int j = 0; j < s.J(); ++j) nk += d.Xhat[j][k];
    lp += std::lgamma(nk - a0) - std::lgamma(1 - a0) + (a0 - nk) * std::log(zeta0);
    for (int j = 0; j < s.J(); ++j) {
      const auto& c = s.categories[j];
      lp += d.Xhat[j][k] * std::log(c.theta) - std::lgamma(d.Xhat[j][k] + 1.0);
      for (const auto& row : d.C[j][k]) {
        long cl = 0;
        for (std::size_t q = 0; q < row.size(); ++q) {
          cl += row[q];
          lp -= std::lgamma(row[q] + 1.0);
        }
        lp += std::lgamma(cl - c.alpha) - std::lgamma(1 - c.alpha) + (c.alpha - cl) * std::log(zc[j]);
      }
      for (std::size_t q = 0; q < s.subgroups[j].size(); ++q) {
        const auto& g = s.subgroups[j][q];
        const double al = g.prior.alpha, beta = g.slab.beta;
        for (const auto& a : d.occurrences[j][q][k]) {
          long tot = 0;
          for (long x : a) {
            tot += x;
            lp -= std::lgamma(x + 1.0);
          }
          lp += std::log(g.prior.theta) + tot * std::log(beta) + (al - tot) * std::log(beta * g.M + g.prior.zeta) +
                std::lgamma(tot - al) - std::lgamma(1 - al);
        }
      }
    }
  }
  return lp;
}

double chi_square_pvalue(const std::vector<double>& counts, const std::vector<double>& probs, double n) {
  double stat = 0.0;
  int bins = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double e = probs[i] * n;
    stat += (counts[i] - e) * (counts[i] - e) / e;
    ++bins;
  }
  boost::math::chi_squared dist(bins - 1);
  return boost::math::cdf(complement(dist, stat));
}

}  // namespace

TEST_CASE("hhibp rates and tilts match the nested power-form exponents") {
  HhibpSpec s = small_spec({{2, 3}, {1}}, 0.7);
  double zeta0 = 0.0;
  std::vector<double> zc;
  double phi = nested_phi(s, &zeta0, &zc);
  HhibpRates rates = hhibp_rates(s);
  CHECK(rates.phi == doctest::Approx(phi).epsilon(1e-12));
  HhibpTilts t = hhibp_tilts(s);
  CHECK(t.zeta0 == doctest::Approx(zeta0).epsilon(1e-12));
  REQUIRE(t.zeta_cat.size() == 2);
  for (int j = 0; j < 2; ++j) CHECK(t.zeta_cat[j] == doctest::Approx(zc[j]).epsilon(1e-12));
  CHECK(t.zeta0 > s.baseline.zeta);
  CHECK(log_marginal_hhibp(s, empty_draw(s)) == doctest::Approx(-phi).epsilon(1e-12));
}

TEST_CASE("hhibp spec validation") {
  HhibpSpec s = small_spec({{1}}, 1.0);
  s.subgroups[0].clear();
  CHECK_THROWS_AS(hhibp_rates(s), ValidationError);
  s = small_spec({{1}}, 1.0);
  s.categories[0].alpha = 1.0;
  CHECK_THROWS_AS(hhibp_rates(s), ValidationError);
  s = small_spec({{1}}, 1.0);
  s.subgroups.push_back(s.subgroups[0]);
  CHECK_THROWS_AS(hhibp_rates(s), ValidationError);
}

TEST_CASE("hhibp marginal sums to one over enumerated single-subgroup draws") {
  HhibpSpec s;
  s.baseline = GGParams{-1.0, 1.0, 0.5};
  s.categories = {GGParams{-1.0, 1.0, 0.5}};
  s.subgroups = {{GroupSpec{GGParams{-1.0, 1.0, 0.5}, SlabSpec::poisson(0.05), 1}}};
  // phi is about 6e-3 here, so lists longer than two carry < 1e-7 of the mass
  auto cols = enumerate_hcols(6);
  double total = 0.0, fact = 1.0;
  for (int r = 0; r <= 2; ++r) {
    if (r > 0) fact *= r;
    double sum = 0.0;
    std::vector<std::size_t> idx(r, 0);
    for (;;) {
      std::vector<const HCol*> cs;
      for (auto i : idx) cs.push_back(&cols[i]);
      sum += std::exp(log_marginal_hhibp(s, draw_from(cs)));
      int pos = r - 1;
      while (pos >= 0 && ++idx[pos] == cols.size()) idx[pos--] = 0;
      if (pos < 0) break;
    }
    total += sum / fact;
  }
  CHECK(std::fabs(total - 1.0) < 1e-6);
}

TEST_CASE("hhibp marginal matches the product-form closed expression") {
  HhibpSpec s = small_spec({{2, 3}, {1}}, 0.8);
  RngStream rng(11, 0);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    HhibpDraw d = sample_hhibp(s, rng, true);
    if (d.r == 0) continue;
    ++checked;
    double lm = log_marginal_hhibp(s, d), cf = closed_form(s, d);
    CHECK(lm == doctest::Approx(cf).epsilon(1e-10));
  }
  CHECK(checked > 10);
}

TEST_CASE("hhibp draws satisfy the count identities") {
  HhibpSpec s = small_spec({{2, 3}, {4}}, 1.0);
  s.subgroups[1].push_back(GroupSpec{GGParams{}, SlabSpec::bernoulli(0.3, 1.0, 1.5), 5});
  s.subgroups[0].push_back(GroupSpec{GGParams{0.2, 1.0, 1.0}, SlabSpec::poisson(1.0), 0});
  RngStream rng(5, 1);
  for (int rep = 0; rep < 50; ++rep) {
    HhibpDraw d = sample_hhibp(s, rng, rep % 2 == 0);
    CHECK_NOTHROW(check_draw(s, d));
    for (int j = 0; j < s.J(); ++j)
      for (std::size_t q = 0; q < s.subgroups[j].size(); ++q) {
        long v_tables = 0, v_nhat = 0, docs = 0, agg = 0;
        for (long k = 0; k < d.r; ++k) {
          for (const auto& row : d.C[j][k]) v_tables += row[q];
          v_nhat += d.Nhat[j][q][k];
          agg += d.agg[j][q][k];
          for (long x : d.doc_totals[j][q][k]) docs += x;
        }
        CHECK(v_tables == v_nhat);
        CHECK(docs == agg);
        if (s.subgroups[j][q].M == 0) CHECK(v_nhat == 0);
      }
    if (d.r > 0) CHECK(std::isfinite(log_marginal_hhibp(s, d)));
  }
}

TEST_CASE("hhibp with vanishing subgroup mass is empty") {
  HhibpSpec s = small_spec({{3}, {2, 2}}, 1.0);
  for (auto& row : s.subgroups)
    for (auto& g : row) g.prior.theta = 1e-12;
  RngStream rng(3, 0);
  long total = 0;
  for (int rep = 0; rep < 200; ++rep) total += sample_hhibp(s, rng).r;
  CHECK(total == 0);
}

TEST_CASE("hhibp feature count has the nested Poisson mean") {
  HhibpSpec s = small_spec({{3, 2}, {4}}, 1.0);
  const double phi = nested_phi(s);
  RngStream rng(8, 0);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(sample_hhibp(s, rng).r);
  CHECK(std::fabs(sum / n - phi) < 4.0 * std::sqrt(phi / n));
}

TEST_CASE("hhibp column permutations leave the marginal unchanged") {
  HhibpSpec s = small_spec({{2, 1}}, 1.0);
  RngStream rng(21, 0);
  HhibpDraw d;
  do d = sample_hhibp(s, rng, true);
  while (d.r < 3);
  HhibpDraw p = d;
  auto swap01 = [](auto& v) { std::swap(v[0], v[v.size() - 1]); };
  swap01(p.Xhat[0]);
  swap01(p.C[0]);
  for (std::size_t q = 0; q < 2; ++q) {
    swap01(p.Nhat[0][q]);
    swap01(p.agg[0][q]);
    swap01(p.doc_totals[0][q]);
    swap01(p.occurrences[0][q]);
  }
  CHECK(log_marginal_hhibp(s, p) == doctest::Approx(log_marginal_hhibp(s, d)).epsilon(1e-13));
  d.has_occurrences = p.has_occurrences = false;
  CHECK(log_marginal_hhibp(s, p) == doctest::Approx(log_marginal_hhibp(s, d)).epsilon(1e-13));
}

TEST_CASE("hhibp table rows follow the bivariate MtP law") {
  HhibpSpec s = small_spec({{2, 3}}, 0.5);
  HhibpRates rates = hhibp_rates(s);
  const auto& c = s.categories[0];
  const double k1 = rates.psi[0][0], k2 = rates.psi[0][1], kappa = k1 + k2;
  std::map<std::pair<long, long>, double> exact, emp;
  for (long a = 0; a <= 40; ++a)
    for (long b = 0; a + b <= 40; ++b) {
      if (a + b == 0) continue;
      double pn = oracle::mtp_pmf(a + b, kappa, c.alpha, c.zeta);
      double split = std::exp(std::lgamma(a + b + 1.0) - std::lgamma(a + 1.0) - std::lgamma(b + 1.0) +
                              a * std::log(k1 / kappa) + b * std::log(k2 / kappa));
      exact[{a, b}] = pn * split;
    }
  RngStream rng(4, 4);
  long rows = 0;
  while (rows < 200000) {
    HhibpDraw d = sample_hhibp(s, rng);
    for (long k = 0; k < d.r; ++k)
      for (const auto& row : d.C[0][k]) {
        emp[{row[0], row[1]}] += 1.0;
        ++rows;
      }
  }
  for (auto& [key, v] : emp) v /= static_cast<double>(rows);
  CHECK(oracle::total_variation(emp, exact) < 0.01);
}

TEST_CASE("hhibp category occurrence totals match the nested compound law") {
  // One category with two subgroups: per feature, the category total is a sum
  // of Xhat iid table totals, Xhat ~ MtP(cat rate, baseline mixing).
  HhibpSpec s = small_spec({{2, 3}}, 0.5);
  s.baseline.theta = 4.0;
  HhibpRates rates = hhibp_rates(s);
  const auto& c = s.categories[0];
  const int K = 60;
  std::vector<double> top(K + 1, 0.0), table(K + 1, 0.0), law(K + 1, 0.0);
  double inner = 0.0;
  for (auto& g : s.subgroups[0]) inner += g.prior.theta * oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * g.M);
  double cat_rate = c.theta * oracle::psi_gg(c.alpha, c.zeta, inner);
  CHECK(cat_rate == doctest::Approx(rates.kappa).epsilon(1e-12));
  for (int m = 1; m <= K; ++m) {
    top[m] = oracle::mtp_pmf(m, cat_rate, s.baseline.alpha, s.baseline.zeta);
    table[m] = oracle::mtp_pmf(m, inner, c.alpha, c.zeta);
  }
  for (int n = 1; n <= K; ++n) {
    auto conv = oracle::convolve_power(table, n, K);
    for (int m = n; m <= K; ++m) law[m] += top[n] * conv[m];
  }
  // bins 1..B-1 and a tail bin
  const int B = 12;
  std::vector<double> probs(B, 0.0), counts(B, 0.0);
  double head = 0.0;
  for (int m = 1; m < B; ++m) {
    probs[m - 1] = law[m];
    head += law[m];
  }
  probs[B - 1] = 1.0 - head;
  RngStream rng(6, 0);
  double n = 0.0;
  while (n < 100000) {
    HhibpDraw d = sample_hhibp(s, rng);
    for (long k = 0; k < d.r; ++k) {
      long tot = d.Nhat[0][0][k] + d.Nhat[0][1][k];
      counts[std::min<long>(tot, B) - 1] += 1.0;
      n += 1.0;
    }
  }
  CHECK(chi_square_pvalue(counts, probs, n) > 0.001);
}

TEST_CASE("hhibp prediction rates match the tilted closed forms") {
  HhibpSpec s = small_spec({{2, 3}, {1}}, 0.8);
  RngStream rng(31, 0);
  HhibpDraw d = sample_hhibp(s, rng);
  double zeta0 = 0.0;
  std::vector<double> zc;
  nested_phi(s, &zeta0, &zc);
  for (int j = 0; j < 2; ++j)
    for (std::size_t q = 0; q < s.subgroups[j].size(); ++q) {
      const auto& g = s.subgroups[j][q];
      HhibpTarget tg{j, static_cast<int>(q), std::nullopt, std::nullopt};
      HhibpPrediction p = hhibp_predict_sample(s, d, tg, rng);
      double gam = g.prior.theta * (oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * (g.M + 1)) -
                                    oracle::psi_gg(g.prior.alpha, g.prior.zeta, g.slab.beta * g.M));
      const auto& c = s.categories[j];
      double t = c.theta * oracle::psi_gg(c.alpha, zc[j], gam);
      CHECK(p.gamma == doctest::Approx(gam).epsilon(1e-10));
      CHECK(p.t == doctest::Approx(t).epsilon(1e-10));
      CHECK(p.phi == doctest::Approx(s.gamma0 * s.baseline.theta * oracle::psi_gg(s.baseline.alpha, zeta0, t)).epsilon(1e-10));
      CHECK(p.q == doctest::Approx(t / (t + zeta0)).epsilon(1e-12));
      CHECK(p.q3 == doctest::Approx(gam / (gam + zc[j])).epsilon(1e-12));
      CHECK(p.q > 0.0);
      CHECK(p.q < 1.0);
      CHECK(p.q3 > 0.0);
      CHECK(p.q3 < 1.0);
      CHECK(static_cast<long>(p.counts.size()) == d.r);
    }
}

TEST_CASE("hhibp prediction for new subgroups and categories") {
  HhibpSpec s = small_spec({{2, 3}}, 0.8);
  RngStream rng(32, 0);
  HhibpDraw d;
  do d = sample_hhibp(s, rng);
  while (d.r < 2);
  GroupSpec fresh{GGParams{0.4, 2.0, 1.2}, SlabSpec::poisson(0.9), 7};
  GGParams cat{0.1, 3.0, 0.8};
  HhibpTilts tl = hhibp_tilts(s);

  HhibpTarget new_j{1, 0, cat, fresh};
  double gam = 1.2 * oracle::psi_gg(0.4, 2.0, 0.9);
  double t = 0.8 * oracle::psi_gg(0.1, 3.0, gam);
  for (int rep = 0; rep < 200; ++rep) {
    HhibpPrediction p = hhibp_predict_sample(s, d, new_j, rng);
    CHECK(p.gamma == doctest::Approx(gam).epsilon(1e-12));
    CHECK(p.t == doctest::Approx(t).epsilon(1e-12));
    for (long k = 0; k < d.r; ++k) {
      CHECK(p.table_counts[k] == 0);
      CHECK(p.repeat_counts[k] == 0);
      CHECK(p.counts[k] == p.revived_counts[k]);
    }
  }
  HhibpTarget new_d{0, 2, std::nullopt, fresh};
  for (int rep = 0; rep < 200; ++rep) {
    HhibpPrediction p = hhibp_predict_sample(s, d, new_d, rng);
    CHECK(p.t == doctest::Approx(s.categories[0].theta * oracle::psi_gg(s.categories[0].alpha, tl.zeta_cat[0], gam)).epsilon(1e-12));
    for (long k = 0; k < d.r; ++k) CHECK(p.repeat_counts[k] == 0);
  }
  CHECK_THROWS_AS(hhibp_predict_sample(s, d, HhibpTarget{0, 3, std::nullopt, fresh}, rng), ValidationError);
  CHECK_THROWS_AS(hhibp_predict_sample(s, d, HhibpTarget{2, 0, cat, fresh}, rng), ValidationError);
  CHECK_THROWS_AS(hhibp_predict_sample(s, d, HhibpTarget{1, 0, std::nullopt, fresh}, rng), ValidationError);
  CHECK_THROWS_AS(hhibp_predict_sample(s, d, HhibpTarget{0, 2, std::nullopt, std::nullopt}, rng), ValidationError);
}

TEST_CASE("hhibp brand-new feature counts have the composed mean") {
  HhibpSpec s = small_spec({{2, 3}}, 0.8);
  HhibpDraw d = empty_draw(s);
  HhibpTarget tg{0, 1, std::nullopt, std::nullopt};
  RngStream rng(41, 0);
  HhibpPrediction p0 = hhibp_predict_sample(s, d, tg, rng);
  HhibpTilts tl = hhibp_tilts(s);
  const auto& g = s.subgroups[0][1];
  double mean = p0.phi * oracle::mtp_mean(p0.t, s.baseline.alpha, tl.zeta0) *
                oracle::mtp_mean(p0.gamma, s.categories[0].alpha, tl.zeta_cat[0]) *
                oracle::mtp_mean(g.slab.beta, g.prior.alpha, g.prior.zeta + g.slab.beta * g.M);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    HhibpPrediction p = hhibp_predict_sample(s, d, tg, rng);
    double x = 0.0;
    for (long v : p.new_counts) x += static_cast<double>(v);
    sum += x;
    sq += x * x;
  }
  double m = sum / n, se = std::sqrt((sq / n - m * m) / n);
  CHECK(std::fabs(m - mean) < 4.0 * se);
}

TEST_CASE("hhibp negative binomial blocks match their mixed Poisson forms") {
  HhibpSpec s = small_spec({{2, 3}}, 0.8);
  RngStream rng(51, 0);
  HhibpDraw d;
  do d = sample_hhibp(s, rng);
  while (d.r < 1 || d.Nhat[0][1][0] == 0);
  HhibpTarget tg{0, 1, std::nullopt, std::nullopt};
  HhibpTilts tl = hhibp_tilts(s);
  const auto& g = s.subgroups[0][1];
  const double a0 = s.baseline.alpha, aj = s.categories[0].alpha, ad = g.prior.alpha;
  long nk = d.Xhat[0][0], ck = 0;
  for (const auto& row : d.C[0][0])
    for (long x : row) ck += x;
  const long nh = d.Nhat[0][1][0], ag = d.agg[0][1][0];
  const double zs = g.slab.beta * g.M + g.prior.zeta;

  std::mt19937_64 eng(99);
  const int n = 100000;
  std::vector<double> nb(3, 0.0), mix(3, 0.0);
  HhibpPrediction p0 = hhibp_predict_sample(s, d, tg, rng);
  for (int i = 0; i < n; ++i) {
    HhibpPrediction p = hhibp_predict_sample(s, d, tg, rng);
    nb[0] += p.revived_tables[0];
    nb[1] += p.table_occurrences[0];
    nb[2] += p.repeat_counts[0];
    HhibpJumps J;
    for (long k = 0; k < d.r; ++k) {
      long n_k = d.Xhat[0][k];
      J.baseline.push_back(std::gamma_distribution<double>(n_k - a0, 1.0 / tl.zeta0)(eng));
    }
    J.category.assign(1, std::vector<std::vector<double>>(d.r));
    J.slab.assign(1, std::vector<std::vector<std::vector<double>>>(2, std::vector<std::vector<double>>(d.r)));
    for (long k = 0; k < d.r; ++k) {
      for (const auto& row : d.C[0][k]) {
        long c = row[0] + row[1];
        J.category[0][k].push_back(std::gamma_distribution<double>(c - aj, 1.0 / tl.zeta_cat[0])(eng));
      }
      for (int q = 0; q < 2; ++q) {
        long a = d.agg[0][q][k], m = d.Nhat[0][q][k];
        const auto& gq = s.subgroups[0][q];
        if (m > 0)
          J.slab[0][q][k].push_back(std::gamma_distribution<double>(a - gq.prior.alpha * m,
                                                                    1.0 / (gq.slab.beta * gq.M + gq.prior.zeta))(eng));
      }
    }
    HhibpPrediction pm = hhibp_predict_sample(s, d, tg, rng, &J);
    mix[0] += pm.revived_tables[0];
    mix[1] += pm.table_occurrences[0];
    mix[2] += pm.repeat_counts[0];
  }
  const double pt = g.slab.beta / (g.slab.beta * (g.M + 1) + g.prior.zeta);
  (void)zs;
  double expect[3] = {(nk - a0) * p0.q / (1 - p0.q), (ck - nk * aj) * p0.q3 / (1 - p0.q3),
                      (ag - nh * ad) * pt / (1 - pt)};
  for (int b = 0; b < 3; ++b) {
    // NB variance mean/(1-q) bounds the Poisson-mixture variance as well
    double sd = std::sqrt(expect[b] * 3.0 / n) + 1e-12;
    CHECK(std::fabs(nb[b] / n - expect[b]) < 4.0 * sd);
    CHECK(std::fabs(mix[b] / n - expect[b]) < 4.0 * sd);
  }
}

TEST_CASE("hhibp Bernoulli repeats use the posterior-mean probability") {
  HhibpSpec s;
  s.baseline = GGParams{0.2, 1.0, 1.0};
  s.categories = {GGParams{0.2, 1.0, 1.0}};
  s.subgroups = {{GroupSpec{GGParams{}, SlabSpec::bernoulli(0.0, 1.0, 1.0), 4}}};
  HhibpDraw d = empty_draw(s);
  d.r = 1;
  d.has_occurrences = true;
  d.Xhat[0] = {1};
  d.C[0] = {CountMatrix{{1}}};
  d.Nhat[0][0] = {1};
  d.agg[0][0] = {1};
  d.doc_totals[0][0] = {{1, 0, 0, 0}};
  d.occurrences = {Count4{Count3{CountMatrix{{1, 0, 0, 0}}}}};
  RngStream rng(61, 0);
  const int n = 100000;
  double hits = 0.0;
  for (int i = 0; i < n; ++i) hits += hhibp_predict_sample(s, d, HhibpTarget{0, 0, std::nullopt, std::nullopt}, rng).repeat_counts[0];
  CHECK(std::fabs(hits / n - 0.2) < 4.0 * std::sqrt(0.16 / n));
  d.has_occurrences = false;
  d.occurrences.clear();
  CHECK_THROWS_AS(hhibp_predict_sample(s, d, HhibpTarget{0, 0, std::nullopt, std::nullopt}, rng), ValidationError);
}
