#include "hibp/hhibp.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "hibp/errors.hpp"

namespace hibp {

namespace {

std::string sub_name(int j, int d) { return "subgroup (" + std::to_string(d + 1) + "," + std::to_string(j + 1) + ")"; }

// Slab total of a fresh occurrence in the next document of a subgroup that
// currently holds M documents.
long next_doc_slab_total(const GroupSpec& g, RngStream& rng) {
  if (!g.slab.is_poisson()) return 1;
  const double beta = g.slab.beta;
  GGParams tilted{g.prior.alpha, g.prior.zeta + beta * static_cast<double>(g.M), 1.0};
  return mtp_sample_total(beta, tilted, rng);
}

}  // namespace

void validate(const HhibpSpec& spec) {
  validate(spec.baseline, "baseline");
  require(spec.gamma0 > 0.0 && std::isfinite(spec.gamma0), "gamma0 must be positive");
  require(spec.J() >= 1, "HHIBP needs at least one category");
  require(spec.subgroups.size() == spec.categories.size(), "HHIBP: one subgroup list per category required");
  for (int j = 0; j < spec.J(); ++j) {
    validate(spec.categories[j], "category " + std::to_string(j + 1));
    require(!spec.subgroups[j].empty(), "category " + std::to_string(j + 1) + " needs at least one subgroup");
    for (std::size_t d = 0; d < spec.subgroups[j].size(); ++d)
      validate(spec.subgroups[j][d], sub_name(j, static_cast<int>(d)));
  }
}

HhibpRates hhibp_rates(const HhibpSpec& spec) {
  validate(spec);
  HhibpRates out;
  for (int j = 0; j < spec.J(); ++j) {
    std::vector<double> row;
    double sum = 0.0;
    for (const auto& g : spec.subgroups[j]) {
      row.push_back(psi_rate(g.prior, g.slab, g.M));
      sum += row.back();
    }
    out.psi.push_back(std::move(row));
    out.psi_sum.push_back(sum);
    const GGParams& c = spec.categories[j];
    out.cat_rate.push_back(c.theta * laplace_exponent(c, sum));
    out.kappa += out.cat_rate.back();
  }
  out.phi = spec.gamma0 * spec.baseline.theta * laplace_exponent(spec.baseline, out.kappa);
  return out;
}

HhibpTilts hhibp_tilts(const HhibpSpec& spec) {
  HhibpRates rates = hhibp_rates(spec);
  HhibpTilts t;
  t.zeta0 = spec.baseline.zeta + rates.kappa;
  for (int j = 0; j < spec.J(); ++j) t.zeta_cat.push_back(spec.categories[j].zeta + rates.psi_sum[j]);
  return t;
}

HhibpDraw sample_hhibp(const HhibpSpec& spec, RngStream& rng, bool keep_occurrences) {
  HhibpRates rates = hhibp_rates(spec);
  const int J = spec.J();
  HhibpDraw d;
  d.has_occurrences = keep_occurrences;
  d.Xhat.assign(J, {});
  d.C.assign(J, {});
  d.Nhat.resize(J);
  d.agg.resize(J);
  d.doc_totals.resize(J);
  if (keep_occurrences) d.occurrences.resize(J);
  for (int j = 0; j < J; ++j) {
    const std::size_t D = spec.subgroups[j].size();
    d.Nhat[j].assign(D, {});
    d.agg[j].assign(D, {});
    d.doc_totals[j].assign(D, {});
    if (keep_occurrences) d.occurrences[j].assign(D, {});
  }
  d.r = rates.phi > 0.0 ? rng.poisson(rates.phi) : 0;
  MtPParams top{rates.cat_rate, spec.baseline};
  for (long k = 0; k < d.r; ++k) {
    d.labels.push_back(rng.engine()() >> 1);
    std::vector<long> col = mtp_sample(top, rng);
    for (int j = 0; j < J; ++j) {
      const int D = static_cast<int>(spec.subgroups[j].size());
      d.Xhat[j].push_back(col[j]);
      CountMatrix tables;
      std::vector<long> nhat(D, 0);
      if (col[j] > 0) {
        MtPParams mid{rates.psi[j], spec.categories[j]};
        for (long l = 0; l < col[j]; ++l) {
          tables.push_back(mtp_sample(mid, rng));
          for (int s = 0; s < D; ++s) nhat[s] += tables.back()[s];
        }
      }
      d.C[j].push_back(std::move(tables));
      for (int s = 0; s < D; ++s) {
        const GroupSpec& g = spec.subgroups[j][s];
        std::vector<long> totals(static_cast<std::size_t>(g.M), 0);
        CountMatrix occ;
        if (keep_occurrences) {
          for (long o = 0; o < nhat[s]; ++o) {
            std::vector<long> a = sample_slab_vector(g, rng);
            for (long i = 0; i < g.M; ++i) totals[i] += a[i];
            occ.push_back(std::move(a));
          }
        } else {
          totals = sample_slab_sum(g, nhat[s], rng);
        }
        const long sum = std::accumulate(totals.begin(), totals.end(), 0L);
        d.Nhat[j][s].push_back(nhat[s]);
        d.agg[j][s].push_back(sum);
        d.doc_totals[j][s].push_back(std::move(totals));
        if (keep_occurrences) d.occurrences[j][s].push_back(std::move(occ));
      }
    }
  }
  return d;
}

void check_draw(const HhibpSpec& spec, const HhibpDraw& d) {
  validate(spec);
  const int J = spec.J();
  require(d.r >= 0, "draw: r must be >= 0");
  require(d.labels.empty() || static_cast<long>(d.labels.size()) == d.r, "draw: label count differs from r");
  require(static_cast<int>(d.Xhat.size()) == J && static_cast<int>(d.C.size()) == J &&
              static_cast<int>(d.Nhat.size()) == J && static_cast<int>(d.agg.size()) == J,
          "draw: one entry per category required");
  for (int j = 0; j < J; ++j) {
    const int D = static_cast<int>(spec.subgroups[j].size());
    require(static_cast<long>(d.Xhat[j].size()) == d.r && static_cast<long>(d.C[j].size()) == d.r,
            "draw: category row length differs from r");
    require(static_cast<int>(d.Nhat[j].size()) == D && static_cast<int>(d.agg[j].size()) == D,
            "draw: one entry per subgroup required");
    for (int s = 0; s < D; ++s)
      require(static_cast<long>(d.Nhat[j][s].size()) == d.r && static_cast<long>(d.agg[j][s].size()) == d.r,
              "draw: subgroup row length differs from r");
  }
  for (long k = 0; k < d.r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) {
      const int D = static_cast<int>(spec.subgroups[j].size());
      const CountMatrix& tables = d.C[j][k];
      require(d.Xhat[j][k] >= 0 && static_cast<long>(tables.size()) == d.Xhat[j][k],
              "draw: table count differs from Xhat");
      nk += d.Xhat[j][k];
      std::vector<long> nhat(D, 0);
      for (const auto& row : tables) {
        require(static_cast<int>(row.size()) == D, "draw: table row length differs from D_j");
        long t = 0;
        for (int s = 0; s < D; ++s) {
          require(row[s] >= 0, "draw: negative table count");
          require(row[s] == 0 || spec.subgroups[j][s].M > 0, "draw: occurrences in a subgroup with no documents");
          t += row[s];
          nhat[s] += row[s];
        }
        require(t >= 1, "draw: table with no occurrences");
      }
      for (int s = 0; s < D; ++s) {
        require(d.Nhat[j][s][k] == nhat[s], "draw: Nhat differs from the table sums");
        require(d.agg[j][s][k] >= nhat[s], "draw: aggregated count below occurrence count");
        require(nhat[s] > 0 || d.agg[j][s][k] == 0, "draw: counts on a feature with no occurrences");
      }
    }
    require(nk >= 1, "draw: feature column with no tables");
  }
  if (d.has_occurrences) {
    require(static_cast<int>(d.occurrences.size()) == J, "draw: occurrence lists need one entry per category");
    for (int j = 0; j < J; ++j) {
      const int D = static_cast<int>(spec.subgroups[j].size());
      require(static_cast<int>(d.occurrences[j].size()) == D, "draw: occurrence lists need one entry per subgroup");
      for (int s = 0; s < D; ++s) {
        require(static_cast<long>(d.occurrences[j][s].size()) == d.r, "draw: occurrence list length differs from r");
        for (long k = 0; k < d.r; ++k) {
          const auto& occ = d.occurrences[j][s][k];
          require(static_cast<long>(occ.size()) == d.Nhat[j][s][k], "draw: occurrence count differs from Nhat");
          long sum = 0;
          for (const auto& a : occ) {
            require(static_cast<long>(a.size()) == spec.subgroups[j][s].M, "draw: slab vector length differs from M");
            long t = 0;
            for (long x : a) {
              require(x >= 0, "draw: negative slab value");
              t += x;
            }
            require(t > 0, "draw: all-zero slab vector");
            sum += t;
          }
          require(sum == d.agg[j][s][k], "draw: slab vectors do not sum to the aggregated count");
        }
      }
    }
  }
}

double log_marginal_hhibp(const HhibpSpec& spec, const HhibpDraw& draw) {
  check_draw(spec, draw);
  HhibpRates rates = hhibp_rates(spec);
  if (draw.r == 0) return -rates.phi;
  if (rates.phi <= 0.0) return kNegInf;
  const int J = spec.J();
  double lp = -rates.phi + static_cast<double>(draw.r) * std::log(rates.phi);
  MtPParams top{rates.cat_rate, spec.baseline};
  std::vector<long> col(J);
  for (long k = 0; k < draw.r; ++k) {
    for (int j = 0; j < J; ++j) col[j] = draw.Xhat[j][k];
    lp += mtp_log_pmf(top, col);
    if (lp == kNegInf) return lp;
    for (int j = 0; j < J; ++j) {
      if (draw.Xhat[j][k] == 0) continue;
      MtPParams mid{rates.psi[j], spec.categories[j]};
      for (const auto& row : draw.C[j][k]) lp += mtp_log_pmf(mid, row);
    }
  }
  // Slab part: occurrence vectors when kept, otherwise the law of the
  // aggregated sums per (subgroup, feature).
  for (int j = 0; j < J; ++j) {
    for (std::size_t s = 0; s < spec.subgroups[j].size(); ++s) {
      const GroupSpec& g = spec.subgroups[j][s];
      for (long k = 0; k < draw.r; ++k) {
        if (draw.has_occurrences) {
          for (const auto& a : draw.occurrences[j][s][k]) lp += slab_vector_log_pmf(g, a);
        } else {
          lp += slab_sum_log_pmf(g, draw.agg[j][s][k], draw.Nhat[j][s][k]);
        }
      }
    }
  }
  return lp;
}

HhibpPrediction hhibp_predict_sample(const HhibpSpec& spec, const HhibpDraw& draw, const HhibpTarget& target,
                                     RngStream& rng, const HhibpJumps* jumps) {
  check_draw(spec, draw);
  const int J = spec.J();
  require(target.j >= 0 && target.j <= J, "predict: category index out of range");
  const bool new_cat = target.j == J;
  const int D = new_cat ? 0 : static_cast<int>(spec.subgroups[target.j].size());
  require(new_cat ? target.d == 0 : (target.d >= 0 && target.d <= D), "predict: subgroup index out of range");
  const bool new_sub = new_cat || target.d == D;

  HhibpTilts tilts = hhibp_tilts(spec);
  GGParams cat;
  double zeta_cat = 0.0;
  if (new_cat) {
    require(target.new_category.has_value(), "predict: a new category needs its prior");
    cat = *target.new_category;
    validate(cat, "new category");
    zeta_cat = cat.zeta;
  } else {
    cat = spec.categories[target.j];
    zeta_cat = tilts.zeta_cat[target.j];
  }
  GroupSpec sub;
  if (new_sub) {
    require(target.new_subgroup.has_value(), "predict: a new subgroup needs its prior and slab");
    sub = *target.new_subgroup;
    sub.M = 0;
    validate(sub, "new subgroup");
  } else {
    sub = spec.subgroups[target.j][target.d];
  }

  HhibpPrediction p;
  p.gamma = gamma_increment(sub.prior, sub.slab, sub.M);
  p.t = cat.theta * laplace_exponent(cat.alpha, zeta_cat, p.gamma);
  p.phi = spec.gamma0 * spec.baseline.theta * laplace_exponent(spec.baseline.alpha, tilts.zeta0, p.t);
  p.q = p.t / (p.t + tilts.zeta0);
  p.q3 = p.gamma / (p.gamma + zeta_cat);
  const GGParams top_mix{spec.baseline.alpha, tilts.zeta0, 1.0};
  const GGParams cat_mix{cat.alpha, zeta_cat, 1.0};

  // Occurrences from `tables` new category-level tables, and their counts.
  auto seat = [&](long tables, long& occ, long& cnt) {
    occ = 0;
    cnt = 0;
    for (long l = 0; l < tables; ++l) occ += mtp_sample_total(p.gamma, cat_mix, rng);
    for (long o = 0; o < occ; ++o) cnt += next_doc_slab_total(sub, rng);
  };

  const long xi = p.phi > 0.0 ? rng.poisson(p.phi) : 0;
  for (long v = 0; v < xi; ++v) {
    long tables = mtp_sample_total(p.t, top_mix, rng), occ = 0, cnt = 0;
    seat(tables, occ, cnt);
    p.new_tables.push_back(tables);
    p.new_occurrences.push_back(occ);
    p.new_counts.push_back(cnt);
  }

  if (jumps != nullptr) {
    require(static_cast<long>(jumps->baseline.size()) == draw.r, "predict: baseline jumps differ in length from r");
  }
  const bool bern = !sub.slab.is_poisson();
  if (!new_sub && bern) require(draw.has_occurrences, "predict: Bernoulli repeats need occurrence-level slab vectors");

  for (long k = 0; k < draw.r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) nk += draw.Xhat[j][k];
    long tables = 0;
    if (jumps != nullptr) {
      tables = rng.poisson(p.t * jumps->baseline[k]);
    } else {
      tables = rng.negative_binomial(static_cast<double>(nk) - spec.baseline.alpha, p.q);
    }
    long occ = 0, cnt = 0;
    seat(tables, occ, cnt);
    p.revived_tables.push_back(tables);
    p.revived_occurrences.push_back(occ);
    p.revived_counts.push_back(cnt);

    long tocc = 0, tcnt = 0, rep = 0;
    if (!new_cat && draw.Xhat[target.j][k] > 0) {
      const CountMatrix& rows = draw.C[target.j][k];
      if (jumps != nullptr) {
        const auto& L = jumps->category.at(target.j).at(k);
        require(L.size() == rows.size(), "predict: category jumps differ in length from the table count");
        double s = 0.0;
        for (double x : L) s += x;
        tocc = rng.poisson(p.gamma * s);
      } else {
        long c = 0;
        for (const auto& row : rows)
          for (long x : row) c += x;
        const double shape = static_cast<double>(c) - static_cast<double>(rows.size()) * cat.alpha;
        tocc = rng.negative_binomial(shape, p.q3);
      }
      for (long o = 0; o < tocc; ++o) tcnt += next_doc_slab_total(sub, rng);
    }
    p.table_occurrences.push_back(tocc);
    p.table_counts.push_back(tcnt);

    if (!new_sub && draw.Nhat[target.j][target.d][k] > 0) {
      const long nhat = draw.Nhat[target.j][target.d][k];
      const long a = draw.agg[target.j][target.d][k];
      const double M = static_cast<double>(sub.M);
      if (jumps != nullptr) {
        const auto& S = jumps->slab.at(target.j).at(target.d).at(k);
        if (bern) {
          for (double s : S) rep += rng.uniform() < s ? 1 : 0;
        } else {
          double s = 0.0;
          for (double x : S) s += x;
          rep = rng.poisson(sub.slab.beta * s);
        }
      } else if (bern) {
        for (const auto& vec : draw.occurrences[target.j][target.d][k]) {
          long m = 0;
          for (long x : vec) m += x;
          const double pr = (static_cast<double>(m) - sub.slab.alpha_b) / (M + sub.slab.beta_b);
          rep += rng.uniform() < pr ? 1 : 0;
        }
      } else {
        const double beta = sub.slab.beta;
        const double pt = beta / (beta * (M + 1.0) + sub.prior.zeta);
        rep = rng.negative_binomial(static_cast<double>(a) - sub.prior.alpha * static_cast<double>(nhat), pt);
      }
    }
    p.repeat_counts.push_back(rep);
    p.counts.push_back(cnt + tcnt + rep);
  }
  return p;
}

}  // namespace hibp
