#ifndef HIBP_IO_HPP
#define HIBP_IO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hibp/hhibp.hpp"
#include "hibp/hibp.hpp"
#include "hibp/inference.hpp"
#include "hibp/predict.hpp"

namespace hibp {

enum class ModelKind { GgGgPoisson, GgSbpBernoulli, GgGgGgPoisson, GgGgSbpBernoulli };

std::string model_name(ModelKind m);
ModelKind parse_model_kind(const std::string& name);
bool is_hierarchical(ModelKind m);
bool is_bernoulli(ModelKind m);

// Starting hyperparameters of every chain.
struct InitValues {
  double theta0 = 1.0;
  double alpha = 0.3;
  double theta = 1.0;
  double alpha_j = 0.3;
};

struct ClassifyConfig {
  long n_test_per_group = 0;
  ClassifyOptions opts;
  long posterior_samples = 10;  // latent snapshots kept per chain by infer
};

// A parsed and validated experiment configuration. Only the spec that
// matches `model` is filled; random group parameters are already drawn.
struct ExperimentConfig {
  ModelKind model = ModelKind::GgGgPoisson;
  std::uint64_t seed = 0;
  bool keep_occurrences = false;
  HibpSpec hibp;
  HhibpSpec hhibp;
  McmcOptions mcmc;
  InitValues init;
  ClassifyConfig classify;
};

// Unknown keys anywhere in the document are rejected. The seed override
// replaces the file's seed before random groups are drawn.
ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = {});

// Training data of a two-level model. `has_latents` says whether draw.X is
// known; draw.agg always is. Per-document totals and occurrence vectors
// are carried when present.
struct HibpDataset {
  ModelKind model = ModelKind::GgGgPoisson;
  HibpSpec spec;
  HibpDraw draw;
  bool has_latents = true;
  bool has_doc_totals = true;
};

struct HhibpDataset {
  ModelKind model = ModelKind::GgGgGgPoisson;
  HhibpSpec spec;
  HhibpDraw draw;
};

std::string to_json(const HibpDataset& d);
std::string to_json(const HhibpDataset& d);
// Model name stored in a data, posterior or test-set document.
ModelKind peek_model(const std::string& text);
HibpDataset parse_hibp_dataset(const std::string& text);
HhibpDataset parse_hhibp_dataset(const std::string& text);

// Posterior draws written by infer: hyperparameters in hyper_names order
// plus the latent X at the same iteration.
struct PosteriorSample {
  int chain = 0;
  long iteration = 0;
  std::vector<double> values;
  CountMatrix X;
};

struct PosteriorFile {
  ModelKind model = ModelKind::GgGgPoisson;
  std::vector<std::string> names;
  std::vector<PosteriorSample> samples;
  std::string prior;  // free-text description of the prior and sampler settings
};

PosteriorFile posterior_from_chains(const ChainSummary& s, const std::string& prior);
std::string to_json(const PosteriorFile& p);
PosteriorFile parse_posterior(const std::string& text);

// Training states for prediction: the dataset's fixed parameters with
// each sample's hypers and latents.
std::vector<TrainState> train_states(const HibpDataset& d, const PosteriorFile& p);

// Chain file: header "iteration,chain,<names...>,loglik", one row per
// retained iteration, reals with 17 significant digits.
std::string chains_csv(const ChainSummary& s);

struct ChainTable {
  std::vector<std::string> names;
  std::vector<std::vector<long>> iteration;             // [chain][t]
  std::vector<std::vector<std::vector<double>>> values;  // [chain][param][t]
  std::vector<std::vector<double>> loglik;               // [chain][t]
};

// Rows must be grouped by chain id 0, 1, ... in order.
ChainTable parse_chains_csv(const std::string& text);

struct TestSet {
  ModelKind model = ModelKind::GgGgPoisson;
  std::vector<TestDoc> docs;
  std::vector<int> labels;  // generating group per document
};

std::string to_json(const TestSet& t);
TestSet parse_test_set(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Shortest decimal text that reads back to the same double.
std::string format_real(double x);

}  // namespace hibp

#endif  // HIBP_IO_HPP
