#include "hibp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hibp/errors.hpp"

namespace hibp {

void validate(const TrainState& st) {
  validate(st.data, st.spec);
  const int J = st.spec.J();
  const long r = st.data.r();
  require(static_cast<int>(st.X.size()) == J, "train state: X must have one row per group");
  for (int j = 0; j < J; ++j) {
    require(static_cast<long>(st.X[j].size()) == r, "train state: X row length differs from r");
    for (long k = 0; k < r; ++k) {
      const long n = st.X[j][k], m = st.data.m[j][k];
      require(n >= 0 && (n == 0 ? m == 0 : m >= n), "train state: latent counts outside the support of the data");
    }
  }
  for (long k = 0; k < r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) nk += st.X[j][k];
    require(nk >= 1, "train state: feature with no occurrences");
  }
  if (!st.occurrence_totals.empty()) {
    require(static_cast<int>(st.occurrence_totals.size()) == J, "train state: occurrence totals need one entry per group");
    for (int j = 0; j < J; ++j) {
      require(static_cast<long>(st.occurrence_totals[j].size()) == r, "train state: occurrence totals differ in length from r");
      for (long k = 0; k < r; ++k) {
        require(static_cast<long>(st.occurrence_totals[j][k].size()) == st.X[j][k],
                "train state: occurrence totals differ in number from X");
        long s = 0;
        for (long a : st.occurrence_totals[j][k]) s += a;
        require(s == st.data.m[j][k], "train state: occurrence totals do not sum to the aggregated count");
      }
    }
  }
}

PredictiveRates predictive_rates(const HibpSpec& spec, int j, const GroupSpec* new_group) {
  HibpRates hr = hibp_rates(spec);
  require(j >= 0 && j <= spec.J(), "predict: group index out of range");
  GroupSpec g;
  if (j == spec.J()) {
    require(new_group != nullptr, "predict: a new group needs its prior and slab");
    g = *new_group;
    g.M = 0;
    validate(g, "new group");
  } else {
    g = spec.groups[j];
  }
  const double zeta_t = spec.baseline.zeta + hr.kappa;
  PredictiveRates pr;
  pr.gamma = gamma_increment(g.prior, g.slab, g.M);
  pr.phi = spec.gamma0 * spec.baseline.theta * laplace_exponent(spec.baseline.alpha, zeta_t, pr.gamma);
  pr.q = pr.gamma / (pr.gamma + zeta_t);
  if (g.slab.is_poisson()) {
    const double b = g.slab.beta;
    pr.p_tilde = b / (b * (static_cast<double>(g.M) + 1.0) + g.prior.zeta);
  }
  return pr;
}

namespace {

long new_occurrence_total(const GroupSpec& g, RngStream& rng) {
  if (!g.slab.is_poisson()) return 1;
  const double b = g.slab.beta;
  return mtp_sample_total(b, GGParams{g.prior.alpha, g.prior.zeta + b * static_cast<double>(g.M), 1.0}, rng);
}

long n_k(const TrainState& st, long k) {
  long s = 0;
  for (const auto& row : st.X) s += row[k];
  return s;
}

// Shared pieces for evaluating test documents under group j.
struct DocContext {
  PredictiveRates rates;
  GGParams mix;  // baseline mixing tilted by kappa
  double alpha_j;
  std::unique_ptr<StirlingTable> table;

  DocContext(const TrainState& st, const TestDoc& doc, int j) {
    validate(st);
    require(j >= 0 && j < st.spec.J(), "predictive likelihood: group index out of range");
    const GroupSpec& g = st.spec.groups[j];
    require(g.slab.is_poisson(), "predictive likelihood: Poisson slabs required");
    require(static_cast<long>(doc.counts.size()) == st.data.r(), "test document: count vector differs in length from r");
    long cmax = 1;
    for (long c : doc.counts) {
      require(c >= 0, "test document: negative count");
      cmax = std::max(cmax, c);
    }
    for (long c : doc.new_counts) {
      require(c >= 1, "test document: new-feature counts must be positive");
      cmax = std::max(cmax, c);
    }
    rates = predictive_rates(st.spec, j);
    mix = GGParams{st.spec.baseline.alpha, st.spec.baseline.zeta + hibp_rates(st.spec).kappa, 1.0};
    alpha_j = g.prior.alpha;
    table = std::make_unique<StirlingTable>(alpha_j, static_cast<int>(cmax));
  }

  double sum_tnb(long m, long n) const { return sum_trunc_nb_log_pmf(m, n, alpha_j, rates.p_tilde, table.get()); }

  double new_weight(long n1, long c) const {
    return mtp_univariate_log_pmf(n1, rates.gamma, mix) + sum_tnb(c, n1);
  }
};

struct PairWeights {
  std::vector<long> n2, m2;
  std::vector<double> lw;
};

// All (n2, m2) states of a training feature with test count c > 0.
PairWeights pair_weights(const TrainState& st, const DocContext& cx, int j, long k, long c) {
  PairWeights pw;
  const double r2 = static_cast<double>(n_k(st, k)) - st.spec.baseline.alpha;
  const long njk = st.X[j][k];
  const double s3 = static_cast<double>(st.data.m[j][k]) - static_cast<double>(njk) * cx.alpha_j;
  const double p = cx.rates.p_tilde;
  if (njk > 0) {
    pw.n2.push_back(0);
    pw.m2.push_back(0);
    pw.lw.push_back(nb_log_pmf(0, r2, cx.rates.q) + nb_log_pmf(c, s3, p));
  }
  for (long m2 = njk > 0 ? 1 : c; m2 <= c; ++m2) {
    const double rep = njk > 0 ? nb_log_pmf(c - m2, s3, p) : 0.0;
    for (long n2 = 1; n2 <= m2; ++n2) {
      pw.n2.push_back(n2);
      pw.m2.push_back(m2);
      pw.lw.push_back(nb_log_pmf(n2, r2, cx.rates.q) + cx.sum_tnb(m2, n2) + rep);
    }
  }
  return pw;
}

double zero_feature_term(const TrainState& st, const PredictiveRates& pr, int j, long k) {
  const double r2 = static_cast<double>(n_k(st, k)) - st.spec.baseline.alpha;
  double lp = nb_log_pmf(0, r2, pr.q);
  const long njk = st.X[j][k];
  if (njk > 0) {
    const double s3 = static_cast<double>(st.data.m[j][k]) - static_cast<double>(njk) * st.spec.groups[j].prior.alpha;
    lp += nb_log_pmf(0, s3, pr.p_tilde);
  }
  return lp;
}

}  // namespace

PredictiveBreakdown predict_sample(const TrainState& st, int j, RngStream& rng, const HibpJumps* jumps,
                                   const GroupSpec* new_group) {
  validate(st);
  const int J = st.spec.J();
  PredictiveBreakdown out;
  out.group = j;
  out.rates = predictive_rates(st.spec, j, new_group);
  GroupSpec g = j == J ? *new_group : st.spec.groups[j];
  if (j == J) g.M = 0;
  const PredictiveRates& pr = out.rates;
  const GGParams mix{st.spec.baseline.alpha, st.spec.baseline.zeta + hibp_rates(st.spec).kappa, 1.0};
  const long r = st.data.r();
  const bool bern = !g.slab.is_poisson();
  if (j < J && bern) require(!st.occurrence_totals.empty(), "predict: Bernoulli repeats need occurrence totals");
  if (jumps != nullptr) {
    require(static_cast<long>(jumps->baseline.size()) == r, "predict: baseline jumps differ in length from r");
    if (j < J) require(static_cast<int>(jumps->slab.size()) == J, "predict: slab jumps need one entry per group");
  }

  const long xi = pr.phi > 0.0 ? rng.poisson(pr.phi) : 0;
  for (long v = 0; v < xi; ++v) {
    long occ = mtp_sample_total(pr.gamma, mix, rng), cnt = 0;
    for (long l = 0; l < occ; ++l) cnt += new_occurrence_total(g, rng);
    out.new_occurrences.push_back(occ);
    out.new_counts.push_back(cnt);
  }
  for (long k = 0; k < r; ++k) {
    long occ = jumps != nullptr ? rng.poisson(pr.gamma * jumps->baseline[k])
                                : rng.negative_binomial(static_cast<double>(n_k(st, k)) - st.spec.baseline.alpha, pr.q);
    long cnt = 0;
    for (long l = 0; l < occ; ++l) cnt += new_occurrence_total(g, rng);
    long rep = 0;
    if (j < J && st.X[j][k] > 0) {
      const double M = static_cast<double>(g.M);
      if (jumps != nullptr) {
        const auto& S = jumps->slab[j].at(k);
        if (bern) {
          for (double s : S) rep += rng.uniform() < s ? 1 : 0;
        } else {
          double s = 0.0;
          for (double x : S) s += x;
          rep = rng.poisson(g.slab.beta * s);
        }
      } else if (bern) {
        for (long a : st.occurrence_totals[j][k])
          rep += rng.uniform() < (static_cast<double>(a) - g.slab.alpha_b) / (M + g.slab.beta_b) ? 1 : 0;
      } else {
        const double s3 = static_cast<double>(st.data.m[j][k]) - static_cast<double>(st.X[j][k]) * g.prior.alpha;
        rep = rng.negative_binomial(s3, pr.p_tilde);
      }
    }
    out.revived_occurrences.push_back(occ);
    out.revived_counts.push_back(cnt);
    out.repeat_counts.push_back(rep);
    out.counts.push_back(cnt + rep);
  }
  return out;
}

TestLatents init_test_latents(const TrainState& st, const TestDoc& doc, int j) {
  require(j >= 0 && j < st.spec.J(), "test latents: group index out of range");
  require(static_cast<long>(doc.counts.size()) == st.data.r(), "test document: count vector differs in length from r");
  TestLatents t;
  t.n1.assign(doc.new_counts.size(), 1);
  for (std::size_t k = 0; k < doc.counts.size(); ++k) {
    const long c = doc.counts[k];
    if (c == 0 || st.X[j][k] > 0) {
      t.n2.push_back(0);
      t.m2.push_back(0);
    } else {
      t.n2.push_back(1);
      t.m2.push_back(c);
    }
  }
  return t;
}

double log_predictive_aggregated(const TrainState& st, const TestDoc& doc, int j, const TestLatents& t) {
  DocContext cx(st, doc, j);
  const long r = st.data.r();
  require(t.n1.size() == doc.new_counts.size(), "test latents: n1 differs in length from the new features");
  require(static_cast<long>(t.n2.size()) == r && static_cast<long>(t.m2.size()) == r,
          "test latents: n2/m2 differ in length from r");
  double lp = poisson_log_pmf(static_cast<long>(doc.new_counts.size()), cx.rates.phi);
  for (std::size_t v = 0; v < doc.new_counts.size(); ++v) {
    const long c = doc.new_counts[v], n1 = t.n1[v];
    if (n1 < 1 || n1 > c) return kNegInf;
    lp += cx.new_weight(n1, c);
  }
  const double a_j = cx.alpha_j;
  for (long k = 0; k < r; ++k) {
    const long c = doc.counts[k], n2 = t.n2[k], m2 = t.m2[k], njk = st.X[j][k];
    if (n2 < 0 || m2 < 0 || m2 > c) return kNegInf;
    if (n2 == 0 ? m2 != 0 : m2 < n2) return kNegInf;
    const long m3 = c - m2;
    if (njk == 0 && m3 != 0) return kNegInf;
    lp += nb_log_pmf(n2, static_cast<double>(n_k(st, k)) - st.spec.baseline.alpha, cx.rates.q);
    if (n2 > 0) lp += cx.sum_tnb(m2, n2);
    if (njk > 0)
      lp += nb_log_pmf(m3, static_cast<double>(st.data.m[j][k]) - static_cast<double>(njk) * a_j, cx.rates.p_tilde);
  }
  return lp;
}

namespace {

BlockConditional block_conditional(const TrainState& st, const DocContext& cx, const TestDoc& doc, int j, long block) {
  BlockConditional bc;
  const long rs = static_cast<long>(doc.new_counts.size());
  require(block >= 0 && block < rs + st.data.r(), "test latents: block index out of range");
  if (block < rs) {
    const long c = doc.new_counts[block];
    for (long n1 = 1; n1 <= c; ++n1) {
      bc.a.push_back(n1);
      bc.b.push_back(0);
      bc.log_prob.push_back(cx.new_weight(n1, c));
    }
  } else {
    const long k = block - rs, c = doc.counts[k];
    if (c == 0) {
      bc.a = {0};
      bc.b = {0};
      bc.log_prob = {0.0};
      return bc;
    }
    PairWeights pw = pair_weights(st, cx, j, k, c);
    bc.a = std::move(pw.n2);
    bc.b = std::move(pw.m2);
    bc.log_prob = std::move(pw.lw);
  }
  const double z = log_sum_exp(bc.log_prob);
  for (double& x : bc.log_prob) x -= z;
  return bc;
}

}  // namespace

BlockConditional test_latent_conditional(const TrainState& st, const TestDoc& doc, int j, long block) {
  DocContext cx(st, doc, j);
  return block_conditional(st, cx, doc, j, block);
}

void gibbs_test_latents(const TrainState& st, const TestDoc& doc, int j, TestLatents& t, RngStream& rng) {
  DocContext cx(st, doc, j);
  const long r = st.data.r(), rs = static_cast<long>(doc.new_counts.size());
  t.n1.resize(rs);
  t.n2.resize(r);
  t.m2.resize(r);
  for (long b = 0; b < rs + r; ++b) {
    if (b >= rs && doc.counts[b - rs] == 0) {
      t.n2[b - rs] = t.m2[b - rs] = 0;
      continue;
    }
    BlockConditional bc = block_conditional(st, cx, doc, j, b);
    const std::size_t i = rng.categorical_log(bc.log_prob);
    if (b < rs) {
      t.n1[b] = bc.a[i];
    } else {
      t.n2[b - rs] = bc.a[i];
      t.m2[b - rs] = bc.b[i];
    }
  }
}

double log_predictive_exact(const TrainState& st, const TestDoc& doc, int j) {
  DocContext cx(st, doc, j);
  double lp = poisson_log_pmf(static_cast<long>(doc.new_counts.size()), cx.rates.phi);
  std::vector<double> lw;
  for (long c : doc.new_counts) {
    lw.clear();
    for (long n1 = 1; n1 <= c; ++n1) lw.push_back(cx.new_weight(n1, c));
    lp += log_sum_exp(lw);
  }
  for (long k = 0; k < st.data.r(); ++k) {
    const long c = doc.counts[k];
    lp += c == 0 ? zero_feature_term(st, cx.rates, j, k) : log_sum_exp(pair_weights(st, cx, j, k, c).lw);
  }
  return lp;
}

GibbsEstimate log_predictive_gibbs(const TrainState& st, const TestDoc& doc, int j, int sweeps, int burnin,
                                   RngStream& rng) {
  require(sweeps > burnin && burnin >= 0, "Gibbs predictive: sweeps must exceed burn-in");
  TestLatents t = init_test_latents(st, doc, j);
  std::vector<double> vals;
  for (int s = 0; s < sweeps; ++s) {
    gibbs_test_latents(st, doc, j, t, rng);
    if (s >= burnin) vals.push_back(log_predictive_aggregated(st, doc, j, t));
  }
  const double n = static_cast<double>(vals.size());
  GibbsEstimate e;
  e.log_mean = log_sum_exp(vals) - std::log(n);
  // sample variance of exp(v), in log space relative to the mean
  double acc = 0.0;
  for (double v : vals) {
    const double d = std::exp(v - e.log_mean) - 1.0;
    acc += d * d;
  }
  e.log_variance = vals.size() > 1 ? 2.0 * e.log_mean + std::log(acc / (n - 1.0)) : kNegInf;
  return e;
}

GroupPredictor::GroupPredictor(const TrainState& st, int j, long max_count)
    : state_(&st), j_(j), max_count_(std::max(1L, max_count)) {
  validate(st);
  require(j >= 0 && j < st.spec.J(), "predictor: group index out of range");
  const GroupSpec& g = st.spec.groups[j];
  require(g.slab.is_poisson(), "predictor: Poisson slabs required");
  rates_ = predictive_rates(st.spec, j);
  alpha_ = g.prior.alpha;
  StirlingTable table(alpha_, static_cast<int>(max_count_));
  log_sum_tnb_.assign(max_count_ + 1, std::vector<double>());
  for (long m = 1; m <= max_count_; ++m)
    for (long n = 0; n <= m; ++n) log_sum_tnb_[m].push_back(n == 0 ? kNegInf : sum_trunc_nb_log_pmf(m, n, alpha_, rates_.p_tilde, &table));
  const GGParams mix{st.spec.baseline.alpha, st.spec.baseline.zeta + hibp_rates(st.spec).kappa, 1.0};
  log_new_.assign(max_count_ + 1, kNegInf);
  std::vector<double> lw;
  for (long c = 1; c <= max_count_; ++c) {
    lw.clear();
    for (long n1 = 1; n1 <= c; ++n1) lw.push_back(mtp_univariate_log_pmf(n1, rates_.gamma, mix) + log_sum_tnb_[c][n1]);
    log_new_[c] = log_sum_exp(lw);
  }
  for (long k = 0; k < st.data.r(); ++k) {
    zero_term_.push_back(zero_feature_term(st, rates_, j, k));
    zero_total_ += zero_term_.back();
  }
}

double GroupPredictor::feature_term(long k, long c) const {
  const TrainState& st = *state_;
  const double r2 = static_cast<double>(n_k(st, k)) - st.spec.baseline.alpha;
  const long njk = st.X[j_][k];
  const double s3 = static_cast<double>(st.data.m[j_][k]) - static_cast<double>(njk) * alpha_;
  std::vector<double> nb2(c + 1);
  for (long n2 = 0; n2 <= c; ++n2) nb2[n2] = nb_log_pmf(n2, r2, rates_.q);
  std::vector<double> terms, inner;
  if (njk > 0) terms.push_back(nb2[0] + nb_log_pmf(c, s3, rates_.p_tilde));
  for (long m2 = njk > 0 ? 1 : c; m2 <= c; ++m2) {
    inner.clear();
    for (long n2 = 1; n2 <= m2; ++n2) inner.push_back(nb2[n2] + log_sum_tnb_[m2][n2]);
    terms.push_back(log_sum_exp(inner) + (njk > 0 ? nb_log_pmf(c - m2, s3, rates_.p_tilde) : 0.0));
  }
  return log_sum_exp(terms);
}

double GroupPredictor::log_prob(const TestDoc& doc) const {
  const TrainState& st = *state_;
  require(static_cast<long>(doc.counts.size()) == st.data.r(), "test document: count vector differs in length from r");
  double lp = poisson_log_pmf(static_cast<long>(doc.new_counts.size()), rates_.phi) + zero_total_;
  for (long c : doc.new_counts) {
    require(c >= 1 && c <= max_count_, "test document: new-feature count outside the predictor range");
    lp += log_new_[c];
  }
  for (long k = 0; k < st.data.r(); ++k) {
    const long c = doc.counts[k];
    if (c == 0) continue;
    require(c > 0 && c <= max_count_, "test document: count outside the predictor range");
    lp += feature_term(k, c) - zero_term_[k];
  }
  return lp;
}

int argmax_lowest(const std::vector<double>& v) {
  require(!v.empty(), "argmax of an empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

ClassifyResult finish(std::vector<std::vector<double>>& per_group) {
  ClassifyResult res;
  for (auto& vals : per_group) res.log_predictive.push_back(log_sum_exp(vals) - std::log(static_cast<double>(vals.size())));
  res.group = argmax_lowest(res.log_predictive);
  return res;
}

}  // namespace

ClassifyResult classify(const std::vector<TrainState>& samples, const TestDoc& doc, RngStream& rng,
                        const ClassifyOptions& opts) {
  require(!samples.empty(), "classify: at least one posterior sample required");
  const int J = samples.front().spec.J();
  std::vector<std::vector<double>> per_group(J);
  for (const auto& st : samples) {
    require(st.spec.J() == J, "classify: samples disagree on the number of groups");
    for (int j = 0; j < J; ++j) {
      if (opts.estimator == Estimator::Exact)
        per_group[j].push_back(log_predictive_exact(st, doc, j));
      else
        per_group[j].push_back(log_predictive_gibbs(st, doc, j, opts.sweeps, opts.burnin, rng).log_mean);
    }
  }
  return finish(per_group);
}

std::vector<ClassifyResult> classify_many(const std::vector<TrainState>& samples, const std::vector<TestDoc>& docs,
                                          const RngStream& rng, const ClassifyOptions& opts, int threads) {
  require(!samples.empty(), "classify: at least one posterior sample required");
  const int J = samples.front().spec.J();
  long cmax = 1;
  for (const auto& d : docs) {
    require(static_cast<long>(d.counts.size()) == samples.front().data.r(),
            "test document: count vector differs in length from r");
    for (long c : d.counts) {
      require(c >= 0, "test document: negative count");
      cmax = std::max(cmax, c);
    }
    for (long c : d.new_counts) {
      require(c >= 1, "test document: new-feature counts must be positive");
      cmax = std::max(cmax, c);
    }
  }
  std::vector<std::vector<GroupPredictor>> preds;
  if (opts.estimator == Estimator::Exact) {
    preds.resize(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s)
      for (int j = 0; j < J; ++j) preds[s].emplace_back(samples[s], j, cmax);
  }
  std::vector<ClassifyResult> out(docs.size());
  auto work = [&](std::size_t i) {
    std::vector<std::vector<double>> per_group(J);
    RngStream local = rng.substream(i);
    for (std::size_t s = 0; s < samples.size(); ++s)
      for (int j = 0; j < J; ++j) {
        if (opts.estimator == Estimator::Exact)
          per_group[j].push_back(preds[s][j].log_prob(docs[i]));
        else
          per_group[j].push_back(log_predictive_gibbs(samples[s], docs[i], j, opts.sweeps, opts.burnin, local).log_mean);
      }
    out[i] = finish(per_group);
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(docs.size())));
  if (nt == 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) work(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < docs.size(); i += nt) work(i);
    });
  for (auto& th : pool) th.join();
  return out;
}

double overlap(const AggregatedData& data) {
  const int J = data.J();
  const long r = data.r();
  if (r < 1) throw ValidationError("overlap: no features");
  if (J < 2) throw ValidationError("overlap: at least two groups required");
  double total = 0.0;
  for (int a = 0; a < J - 1; ++a)
    for (int b = a + 1; b < J; ++b) {
      long shared = 0;
      for (long k = 0; k < r; ++k) shared += (data.m[a][k] > 0 && data.m[b][k] > 0) ? 1 : 0;
      total += static_cast<double>(shared) / static_cast<double>(r);
    }
  return total / (0.5 * J * (J - 1));
}

}  // namespace hibp
