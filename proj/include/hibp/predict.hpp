#ifndef HIBP_PREDICT_HPP
#define HIBP_PREDICT_HPP

#include <memory>
#include <optional>
#include <vector>

#include "hibp/hibp.hpp"

namespace hibp {

// Model, observed aggregated counts and latent occurrence counts X. The
// per-occurrence totals are only needed for Bernoulli repeats.
struct TrainState {
  HibpSpec spec;
  AggregatedData data;
  CountMatrix X;
  std::vector<CountMatrix> occurrence_totals;  // [j][k][l], optional
};

void validate(const TrainState& state);

// Closed-form quantities of the next document in group j (j == J is a new
// group with no documents).
struct PredictiveRates {
  double gamma = 0.0;    // psi_j(M_j+1) - psi_j(M_j)
  double phi = 0.0;      // gamma0 theta0 Psi_{alpha, kappa+zeta}(gamma)
  double q = 0.0;        // gamma / (gamma + kappa + zeta)
  double p_tilde = 0.0;  // beta / (beta (M+1) + zeta_j); Poisson slabs only
};

PredictiveRates predictive_rates(const HibpSpec& spec, int j, const GroupSpec* new_group = nullptr);

struct PredictiveBreakdown {
  int group = 0;
  PredictiveRates rates;
  std::vector<long> new_occurrences;      // per brand-new feature
  std::vector<long> new_counts;
  std::vector<long> revived_occurrences;  // per observed feature
  std::vector<long> revived_counts;
  std::vector<long> repeat_counts;
  std::vector<long> counts;  // revived + repeats per observed feature
};

// Draw the next document of group j. j == J needs `new_group`. Passing
// realized jumps switches the observed-feature blocks to their Poisson
// mixture form.
PredictiveBreakdown predict_sample(const TrainState& state, int j, RngStream& rng, const HibpJumps* jumps = nullptr,
                                   const GroupSpec* new_group = nullptr);

// A test document: counts on the r training features and the positive
// counts on features not seen in training.
struct TestDoc {
  std::vector<long> counts;
  std::vector<long> new_counts;
};

// Hidden split of a test document in group j: occurrences n1 on each new
// feature, revived occurrences n2 on each training feature and the part m2
// of that feature's count they carry (the rest are repeats).
struct TestLatents {
  std::vector<long> n1;
  std::vector<long> n2;
  std::vector<long> m2;
};

TestLatents init_test_latents(const TrainState& state, const TestDoc& doc, int j);

// Joint log probability of the test document and its latents under group j
// (Poisson slabs). Impossible states give -inf.
double log_predictive_aggregated(const TrainState& state, const TestDoc& doc, int j, const TestLatents& latents);

// Normalized conditional of one latent block given the rest. Blocks
// 0..r*-1 are the new features (values n1 in `a`); block r* + k is training
// feature k (values n2 in `a`, m2 in `b`).
struct BlockConditional {
  std::vector<long> a, b;
  std::vector<double> log_prob;
};

BlockConditional test_latent_conditional(const TrainState& state, const TestDoc& doc, int j, long block);

// One sweep over the test latents. Each new feature's n1 and each training
// feature's (n2, m2) pair is drawn from its exact conditional.
void gibbs_test_latents(const TrainState& state, const TestDoc& doc, int j, TestLatents& latents, RngStream& rng);

// log P(test document | training latents, hyperparameters) for group j with
// the latents summed out exactly.
double log_predictive_exact(const TrainState& state, const TestDoc& doc, int j);

struct GibbsEstimate {
  double log_mean = 0.0;      // log of the mean of exp(joint) over retained sweeps
  double log_variance = 0.0;  // log of the sample variance of exp(joint)
};

GibbsEstimate log_predictive_gibbs(const TrainState& state, const TestDoc& doc, int j, int sweeps, int burnin,
                                   RngStream& rng);

// Per-group evaluator of log_predictive_exact that reuses the parts that do
// not depend on the test document. Counts above max_count are rejected.
class GroupPredictor {
 public:
  GroupPredictor(const TrainState& state, int j, long max_count);
  double log_prob(const TestDoc& doc) const;

 private:
  double feature_term(long k, long c) const;
  const TrainState* state_;
  int j_;
  long max_count_;
  PredictiveRates rates_;
  double alpha_;
  std::vector<double> log_new_;         // per count c: log sum_n MtP(n) sumtNB(c | n)
  std::vector<std::vector<double>> log_sum_tnb_;  // [m][n]
  std::vector<double> zero_term_;       // per training feature, log P(count 0)
  double zero_total_ = 0.0;
};

enum class Estimator { Exact, Gibbs };

struct ClassifyOptions {
  Estimator estimator = Estimator::Exact;
  int sweeps = 200;
  int burnin = 50;
};

struct ClassifyResult {
  int group = 0;
  std::vector<double> log_predictive;  // per group, log-mean-exp over samples
};

// Argmax of the per-group predictive averaged over posterior samples; ties
// go to the lowest index.
ClassifyResult classify(const std::vector<TrainState>& samples, const TestDoc& doc, RngStream& rng,
                        const ClassifyOptions& opts = {});

// Classify a whole test set, building each group predictor once per
// posterior sample. Documents run on up to `threads` workers; document i
// uses rng.substream(i), so results do not depend on the thread count.
std::vector<ClassifyResult> classify_many(const std::vector<TrainState>& samples, const std::vector<TestDoc>& docs,
                                          const RngStream& rng, const ClassifyOptions& opts = {}, int threads = 1);

int argmax_lowest(const std::vector<double>& v);

// Mean over group pairs of the fraction of features used by both groups.
double overlap(const AggregatedData& data);

}  // namespace hibp

#endif  // HIBP_PREDICT_HPP
