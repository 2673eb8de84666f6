#include "hibp/hibp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "hibp/errors.hpp"

namespace hibp {

void validate(const GroupSpec& g, const std::string& where) {
  validate(g.slab, where + " slab");
  if (g.slab.is_poisson()) validate(g.prior, where + " prior");
  require(g.M >= 0, where + ": M must be >= 0");
}

void validate(const HibpSpec& spec) {
  validate(spec.baseline, "baseline");
  require(spec.gamma0 > 0.0 && std::isfinite(spec.gamma0), "gamma0 must be positive");
  require(!spec.groups.empty(), "HIBP needs at least one group");
  for (std::size_t j = 0; j < spec.groups.size(); ++j) validate(spec.groups[j], "group " + std::to_string(j + 1));
}

HibpRates hibp_rates(const HibpSpec& spec) {
  validate(spec);
  HibpRates out;
  for (const auto& g : spec.groups) {
    out.psi.push_back(psi_rate(g.prior, g.slab, g.M));
    out.kappa += out.psi.back();
  }
  out.phi = spec.gamma0 * spec.baseline.theta * laplace_exponent(spec.baseline, out.kappa);
  return out;
}

double slab_tnb_p(const GroupSpec& group) {
  require(group.slab.is_poisson(), "slab_tnb_p: Poisson slab required");
  const double bm = group.slab.beta * static_cast<double>(group.M);
  return bm / (bm + group.prior.zeta);
}

namespace {

// Adds `total` counts spread uniformly over the documents of `a`.
void split_uniform(long total, std::vector<long>& a, RngStream& rng) {
  const auto M = static_cast<long>(a.size());
  if (total < M) {
    for (long t = 0; t < total; ++t) {
      auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(M));
      a[std::min(i, a.size() - 1)] += 1;
    }
    return;
  }
  // Same sequential binomials as rng.multinomial with equal weights.
  long left = total;
  for (long i = 0; i < M && left > 0; ++i) {
    const long x = i + 1 == M ? left : rng.binomial(left, 1.0 / static_cast<double>(M - i));
    a[static_cast<std::size_t>(i)] += x;
    left -= x;
  }
}

}  // namespace

std::vector<long> sample_slab_vector(const GroupSpec& group, RngStream& rng) {
  if (group.M < 1) throw ValidationError("sample_slab_vector: group has no documents");
  const long M = group.M;
  std::vector<long> a(static_cast<std::size_t>(M), 0);
  if (group.slab.is_poisson()) {
    split_uniform(mtp_sample_total(group.slab.beta * static_cast<double>(M), group.prior, rng), a, rng);
    return a;
  }
  long total = trbinom_sb_sample(M, group.slab.alpha_b, group.slab.beta_b, rng);
  std::vector<long> idx(static_cast<std::size_t>(M));
  std::iota(idx.begin(), idx.end(), 0);
  for (long t = 0; t < total; ++t) {
    auto span = static_cast<double>(M - t);
    auto pick = t + std::min(static_cast<long>(rng.uniform() * span), M - t - 1);
    std::swap(idx[t], idx[pick]);
    a[idx[t]] = 1;
  }
  return a;
}

std::vector<long> sample_slab_sum(const GroupSpec& group, long n, RngStream& rng) {
  require(group.M >= 1 || n == 0, "sample_slab_sum: group has no documents");
  std::vector<long> a(static_cast<std::size_t>(group.M), 0);
  if (group.slab.is_poisson()) {
    // Uniform splits of independent totals add up to one uniform split.
    long total = 0;
    if (n > 0) {
      const TruncNbSampler draw(group.prior.alpha, slab_tnb_p(group));
      for (long o = 0; o < n; ++o) total += draw(rng);
    }
    split_uniform(total, a, rng);
    return a;
  }
  for (long o = 0; o < n; ++o) {
    std::vector<long> v = sample_slab_vector(group, rng);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += v[i];
  }
  return a;
}

double slab_total_log_pmf(const GroupSpec& group, long m) {
  require(group.M >= 1, "slab law: group has no documents");
  if (m < 1) return kNegInf;
  if (group.slab.is_poisson())
    return mtp_univariate_log_pmf(m, group.slab.beta * static_cast<double>(group.M), group.prior);
  return trbinom_sb_log_pmf(m, group.M, group.slab.alpha_b, group.slab.beta_b);
}

double slab_vector_log_pmf(const GroupSpec& group, const std::vector<long>& a) {
  require(static_cast<long>(a.size()) == group.M, "slab vector length differs from M");
  long total = 0;
  for (long x : a) {
    require(x >= 0, "slab values must be >= 0");
    total += x;
  }
  if (total == 0) return kNegInf;
  double lp = slab_total_log_pmf(group, total);
  if (group.slab.is_poisson()) {
    // Multinomial(total; 1/M, ..., 1/M)
    lp += log_factorial(total) - static_cast<double>(total) * std::log(static_cast<double>(group.M));
    for (long x : a) lp -= log_factorial(x);
    return lp;
  }
  for (long x : a)
    if (x > 1) return kNegInf;
  return lp - log_binomial(group.M, total);
}

namespace {

// n-fold convolution of the Bernoulli-slab total law, entries 0..m.
std::vector<double> bernoulli_sum_law(const GroupSpec& group, long m, long n) {
  std::vector<double> base(static_cast<std::size_t>(m) + 1, kNegInf);
  for (long x = 1; x <= std::min(m, group.M); ++x) base[x] = slab_total_log_pmf(group, x);
  std::vector<double> cur(static_cast<std::size_t>(m) + 1, kNegInf);
  cur[0] = 0.0;
  for (long step = 0; step < n; ++step) {
    std::vector<double> nxt(cur.size(), kNegInf);
    for (long s = 0; s <= m; ++s) {
      if (cur[s] == kNegInf) continue;
      for (long x = 1; s + x <= m && x <= group.M; ++x) nxt[s + x] = log_add_exp(nxt[s + x], cur[s] + base[x]);
    }
    cur.swap(nxt);
  }
  return cur;
}

}  // namespace

double slab_sum_log_pmf(const GroupSpec& group, long m, long n, const StirlingTable* table) {
  require(n >= 0 && m >= 0, "slab sum: counts must be >= 0");
  if (n == 0) return m == 0 ? 0.0 : kNegInf;
  if (m < n) return kNegInf;
  if (group.M < 1) return kNegInf;
  if (group.slab.is_poisson()) return sum_trunc_nb_log_pmf(m, n, group.prior.alpha, slab_tnb_p(group), table);
  if (m > n * group.M) return kNegInf;
  return bernoulli_sum_law(group, m, n)[m];
}

AggregatedData aggregate(const HibpDraw& draw, const HibpSpec& spec) {
  AggregatedData d;
  for (const auto& g : spec.groups) d.M.push_back(g.M);
  d.m = draw.agg;
  return d;
}

void validate(const AggregatedData& data, const HibpSpec& spec) {
  require(data.J() == spec.J(), "data: group count differs from the model");
  require(static_cast<int>(data.M.size()) == spec.J(), "data: M has wrong length");
  for (int j = 0; j < spec.J(); ++j) {
    require(data.M[j] == spec.groups[j].M, "data: M differs from the model");
    require(static_cast<long>(data.m[j].size()) == data.r(), "data: ragged count matrix");
    for (long x : data.m[j]) require(x >= 0, "data: counts must be >= 0");
  }
}

HibpDraw sample_hibp(const HibpSpec& spec, RngStream& rng, bool keep_occurrences) {
  HibpRates rates = hibp_rates(spec);
  const int J = spec.J();
  HibpDraw d;
  d.has_occurrences = keep_occurrences;
  d.X.assign(J, {});
  d.agg.assign(J, {});
  d.doc_totals.assign(J, {});
  if (keep_occurrences) d.occurrences.assign(J, {});
  d.r = rates.phi > 0.0 ? rng.poisson(rates.phi) : 0;
  if (d.r == 0) return d;
  MtPParams cols{rates.psi, spec.baseline};
  for (long k = 0; k < d.r; ++k) {
    d.labels.push_back(rng.engine()() >> 1);
    std::vector<long> col = mtp_sample(cols, rng);
    for (int j = 0; j < J; ++j) {
      const GroupSpec& g = spec.groups[j];
      d.X[j].push_back(col[j]);
      std::vector<long> totals(static_cast<std::size_t>(g.M), 0);
      CountMatrix occ;
      if (keep_occurrences) {
        for (long l = 0; l < col[j]; ++l) {
          std::vector<long> a = sample_slab_vector(g, rng);
          for (long i = 0; i < g.M; ++i) totals[i] += a[i];
          occ.push_back(std::move(a));
        }
      } else {
        totals = sample_slab_sum(g, col[j], rng);
      }
      const long sum = std::accumulate(totals.begin(), totals.end(), 0L);
      d.agg[j].push_back(sum);
      d.doc_totals[j].push_back(std::move(totals));
      if (keep_occurrences) d.occurrences[j].push_back(std::move(occ));
    }
  }
  return d;
}

void check_draw(const HibpSpec& spec, const HibpDraw& d) {
  const int J = spec.J();
  require(d.r >= 0, "draw: r must be >= 0");
  require(static_cast<int>(d.X.size()) == J, "draw: X must have one row per group");
  require(static_cast<int>(d.agg.size()) == J, "draw: aggregated counts must have one row per group");
  require(d.labels.empty() || static_cast<long>(d.labels.size()) == d.r, "draw: label count differs from r");
  for (int j = 0; j < J; ++j) {
    require(static_cast<long>(d.X[j].size()) == d.r, "draw: X row length differs from r");
    require(static_cast<long>(d.agg[j].size()) == d.r, "draw: aggregated row length differs from r");
  }
  for (long k = 0; k < d.r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) {
      require(d.X[j][k] >= 0, "draw: negative occurrence count");
      nk += d.X[j][k];
      require(d.agg[j][k] >= d.X[j][k], "draw: aggregated count below occurrence count");
      require(d.X[j][k] > 0 || d.agg[j][k] == 0, "draw: counts on a feature with no occurrences");
    }
    require(nk >= 1, "draw: feature column with no occurrences");
  }
  if (d.has_occurrences) {
    require(static_cast<int>(d.occurrences.size()) == J, "draw: occurrence lists need one entry per group");
    for (int j = 0; j < J; ++j) {
      require(static_cast<long>(d.occurrences[j].size()) == d.r, "draw: occurrence list length differs from r");
      for (long k = 0; k < d.r; ++k) {
        const auto& occ = d.occurrences[j][k];
        require(static_cast<long>(occ.size()) == d.X[j][k], "draw: occurrence count differs from X");
        long sum = 0;
        for (const auto& a : occ) {
          require(static_cast<long>(a.size()) == spec.groups[j].M, "draw: slab vector length differs from M");
          long t = 0;
          for (long x : a) {
            require(x >= 0, "draw: negative slab value");
            t += x;
          }
          require(t > 0, "draw: all-zero slab vector");
          sum += t;
        }
        require(sum == d.agg[j][k], "draw: slab vectors do not sum to the aggregated count");
      }
    }
  }
}

double log_marginal_full(const HibpSpec& spec, const HibpDraw& draw) {
  check_draw(spec, draw);
  require(draw.has_occurrences || draw.r == 0, "log_marginal_full: occurrence-level slab vectors required");
  HibpRates rates = hibp_rates(spec);
  if (draw.r == 0) return -rates.phi;
  if (rates.phi <= 0.0) return kNegInf;
  double lp = -rates.phi + static_cast<double>(draw.r) * std::log(rates.phi);
  MtPParams cols{rates.psi, spec.baseline};
  const int J = spec.J();
  std::vector<long> col(J);
  for (long k = 0; k < draw.r; ++k) {
    for (int j = 0; j < J; ++j) col[j] = draw.X[j][k];
    lp += mtp_log_pmf(cols, col);
    if (lp == kNegInf) return lp;
    for (int j = 0; j < J; ++j)
      for (const auto& a : draw.occurrences[j][k]) lp += slab_vector_log_pmf(spec.groups[j], a);
  }
  return lp;
}

double log_marginal_aggregated(const HibpSpec& spec, const AggregatedData& data, const CountMatrix& X) {
  validate(data, spec);
  const int J = spec.J();
  const long r = data.r();
  require(static_cast<int>(X.size()) == J, "X must have one row per group");
  for (int j = 0; j < J; ++j) require(static_cast<long>(X[j].size()) == r, "X row length differs from r");
  HibpRates rates = hibp_rates(spec);
  if (r == 0) return -rates.phi;
  if (rates.phi <= 0.0) return kNegInf;

  // Support checks first so impossible states never reach the Stirling tables.
  for (long k = 0; k < r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) {
      const long n = X[j][k], m = data.m[j][k];
      if (n < 0) return kNegInf;
      if (n == 0 && m != 0) return kNegInf;
      if (n > 0 && m < n) return kNegInf;
      nk += n;
    }
    if (nk < 1) return kNegInf;
  }

  double lp = -rates.phi + static_cast<double>(r) * std::log(rates.phi);
  MtPParams cols{rates.psi, spec.baseline};
  std::vector<long> col(J);
  for (long k = 0; k < r; ++k) {
    for (int j = 0; j < J; ++j) col[j] = X[j][k];
    lp += mtp_log_pmf(cols, col);
  }
  if (lp == kNegInf) return lp;
  for (int j = 0; j < J; ++j) {
    const GroupSpec& g = spec.groups[j];
    std::unique_ptr<StirlingTable> table;
    if (g.slab.is_poisson()) {
      std::vector<int> rows;
      int m_max = 0, n_max = 0;
      for (long k = 0; k < r; ++k) {
        if (X[j][k] == 0) continue;
        rows.push_back(static_cast<int>(data.m[j][k]));
        m_max = std::max(m_max, static_cast<int>(data.m[j][k]));
        n_max = std::max(n_max, static_cast<int>(X[j][k]));
      }
      if (!rows.empty()) table = std::make_unique<StirlingTable>(g.prior.alpha, m_max, n_max, rows);
    }
    for (long k = 0; k < r; ++k) lp += slab_sum_log_pmf(g, data.m[j][k], X[j][k], table.get());
  }
  return lp;
}

}  // namespace hibp
