#include "hibp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "hibp/errors.hpp"
#include "hibp/io.hpp"
#include "json.hpp"

namespace hibp {
namespace {

using json = nlohmann::ordered_json;

// Stream ids under the run seed, one per command.
constexpr std::uint64_t kStreamSimulate = 1;
constexpr std::uint64_t kStreamInfer = 2;
constexpr std::uint64_t kStreamClassify = 3;
constexpr std::uint64_t kStreamTestDocs = 4;
constexpr std::uint64_t kStreamPredict = 5;

int resolve_threads(const std::optional<int>& flag) {
  if (flag) {
    require(*flag >= 1, "--threads must be >= 1");
    return *flag;
  }
  const char* env = std::getenv("HIBP_LAB_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const std::string s(env);
  int n = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n < 1)
    throw ValidationError("HIBP_LAB_THREADS must be a positive integer, got \"" + s + "\"");
  return n;
}

double log_mean_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(v.size()));
}

json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

Estimator parse_estimator(const std::string& s) {
  if (s == "exact") return Estimator::Exact;
  if (s == "gibbs") return Estimator::Gibbs;
  throw ValidationError("--estimator must be \"exact\" or \"gibbs\", got \"" + s + "\"");
}

std::string estimator_name(Estimator e) { return e == Estimator::Exact ? "exact" : "gibbs"; }

std::string default_posterior_path(const std::string& chains_path) {
  const std::string ext = ".csv";
  if (chains_path.size() > ext.size() && chains_path.compare(chains_path.size() - ext.size(), ext.size(), ext) == 0)
    return chains_path.substr(0, chains_path.size() - ext.size()) + ".posterior.json";
  return chains_path + ".posterior.json";
}

std::string prior_description(const McmcOptions& o) {
  std::ostringstream s;
  s << "alpha and alpha_j ~ Uniform(-5, 1) on the natural scale; ";
  if (o.log_theta_sd > 0.0)
    s << "log theta0 and log theta_j ~ Normal(0, " << format_real(o.log_theta_sd) << "^2); ";
  else
    s << "flat prior on log theta0 and log theta_j; ";
  s << "zeta, zeta_j, beta_j fixed at the data values. Sampler: Gibbs sweep over X, then adaptive Gaussian "
       "random-walk MH on (log theta, u) with u = logit((alpha + 5) / 6), one block for (theta0, alpha), one per "
       "group";
  if (o.joint_block) s << ", plus one joint block over all hyperparameters";
  s << "; Robbins-Monro scale and covariance adaptation toward acceptance " << format_real(o.target_accept)
    << " during burn-in only.";
  return s.str();
}

json simulate_summary(long r, long total, const std::string& out) {
  json s;
  s["features"] = r;
  s["total_count"] = total;
  s["out"] = out;
  return s;
}

// Counts per group for plotting and overlap, summing subgroups of a
// hierarchical data set.
AggregatedData category_counts(const HhibpDataset& d) {
  AggregatedData a;
  for (int j = 0; j < d.spec.J(); ++j) {
    long M = 0;
    for (const GroupSpec& g : d.spec.subgroups[j]) M += g.M;
    a.M.push_back(M);
    std::vector<long> row(static_cast<std::size_t>(d.draw.r), 0);
    for (const auto& sub : d.draw.agg[j])
      for (long k = 0; k < d.draw.r; ++k) row[k] += sub[k];
    a.m.push_back(std::move(row));
  }
  return a;
}

struct CountSeries {
  std::string name;
  std::vector<long> counts;
};

std::vector<CountSeries> data_series(const std::string& text, ModelKind* model) {
  *model = peek_model(text);
  std::vector<CountSeries> out;
  if (is_hierarchical(*model)) {
    HhibpDataset d = parse_hhibp_dataset(text);
    for (int j = 0; j < d.spec.J(); ++j)
      for (std::size_t s = 0; s < d.draw.agg[j].size(); ++s)
        out.push_back({"group_" + std::to_string(j) + "_" + std::to_string(s), d.draw.agg[j][s]});
  } else {
    HibpDataset d = parse_hibp_dataset(text);
    for (int j = 0; j < d.spec.J(); ++j) out.push_back({"group_" + std::to_string(j), d.draw.agg[j]});
  }
  return out;
}

AggregatedData any_counts(const std::string& text) {
  if (is_hierarchical(peek_model(text))) return category_counts(parse_hhibp_dataset(text));
  HibpDataset d = parse_hibp_dataset(text);
  return aggregate(d.draw, d.spec);
}

std::vector<TrainState> load_train(const std::string& data_path, const std::string& posterior_path,
                                   HibpDataset* data) {
  *data = parse_hibp_dataset(read_file(data_path));
  PosteriorFile p = parse_posterior(read_file(posterior_path));
  return train_states(*data, p);
}

void check_test_set(const TestSet& t, const HibpDataset& d) {
  require(t.model == d.model, "test set model differs from the data model");
  for (std::size_t i = 0; i < t.docs.size(); ++i)
    require(static_cast<long>(t.docs[i].counts.size()) == d.draw.r,
            "test document " + std::to_string(i) + " has " + std::to_string(t.docs[i].counts.size()) +
                " training-feature counts, data has " + std::to_string(d.draw.r));
}

// --- commands --------------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

json cmd_simulate(const Common& c, const std::string& test_out) {
  ExperimentConfig cfg = load_config(c.config, c.seed);
  RngStream rng(cfg.seed, kStreamSimulate);
  json s;
  s["command"] = "simulate";
  s["model"] = model_name(cfg.model);
  s["seed"] = cfg.seed;
  if (is_hierarchical(cfg.model)) {
    require(test_out.empty(), "--test-out is only supported for gg-gg-poisson");
    HhibpDataset d{cfg.model, cfg.hhibp, sample_hhibp(cfg.hhibp, rng, cfg.keep_occurrences)};
    write_file(c.out, to_json(d));
    long total = 0;
    for (const auto& cat : d.draw.agg)
      for (const auto& sub : cat) total += std::accumulate(sub.begin(), sub.end(), 0L);
    s.update(simulate_summary(d.draw.r, total, c.out));
    return s;
  }
  HibpDataset d;
  d.model = cfg.model;
  d.spec = cfg.hibp;
  d.draw = sample_hibp(cfg.hibp, rng, cfg.keep_occurrences);
  write_file(c.out, to_json(d));
  long total = 0;
  for (const auto& row : d.draw.agg) total += std::accumulate(row.begin(), row.end(), 0L);
  s.update(simulate_summary(d.draw.r, total, c.out));

  if (!test_out.empty()) {
    require(cfg.model == ModelKind::GgGgPoisson, "--test-out is only supported for gg-gg-poisson");
    const long n = cfg.classify.n_test_per_group;
    require(n > 0, "--test-out needs classify.n_test_per_group > 0 in the config");
    TrainState truth{cfg.hibp, aggregate(d.draw, cfg.hibp), d.draw.X, {}};
    const RngStream base(cfg.seed, kStreamTestDocs);
    TestSet t;
    t.model = cfg.model;
    for (int j = 0; j < cfg.hibp.J(); ++j)
      for (long i = 0; i < n; ++i) {
        RngStream r = base.substream(static_cast<std::uint64_t>(j * n + i));
        PredictiveBreakdown b = predict_sample(truth, j, r);
        t.docs.push_back(TestDoc{b.counts, b.new_counts});
        t.labels.push_back(j);
      }
    write_file(test_out, to_json(t));
    s["test_docs"] = t.docs.size();
    s["test_out"] = test_out;
  }
  return s;
}

json cmd_infer(const Common& c, const std::string& data_path, std::string posterior_out) {
  HibpDataset d = parse_hibp_dataset(read_file(data_path));
  require(d.model == ModelKind::GgGgPoisson, "infer supports gg-gg-poisson data only, got " + model_name(d.model));
  ExperimentConfig cfg = load_config(c.config, c.seed);
  require(cfg.model == d.model, "config model " + model_name(cfg.model) + " differs from data model " +
                                    model_name(d.model));

  HibpSpec start = d.spec;
  start.baseline.theta = cfg.init.theta0;
  start.baseline.alpha = cfg.init.alpha;
  for (GroupSpec& g : start.groups) {
    g.prior.theta = cfg.init.theta;
    g.prior.alpha = cfg.init.alpha_j;
  }
  McmcOptions o = cfg.mcmc;
  o.threads = resolve_threads(c.threads);
  validate(o);
  const long retained = o.iters > o.burnin ? (o.iters - o.burnin) / o.thin : 1;
  o.latent_every = std::max(1L, retained / cfg.classify.posterior_samples);

  ChainSummary cs = run_chains(start, aggregate(d.draw, d.spec), o, RngStream(cfg.seed, kStreamInfer));
  if (posterior_out.empty()) posterior_out = default_posterior_path(c.out);
  write_file(c.out, chains_csv(cs));
  PosteriorFile p = posterior_from_chains(cs, prior_description(o));
  p.model = d.model;
  write_file(posterior_out, to_json(p));

  json s;
  s["command"] = "infer";
  s["model"] = model_name(d.model);
  s["seed"] = cfg.seed;
  s["chains"] = o.chains;
  s["iters"] = o.iters;
  s["burnin"] = o.burnin;
  s["thin"] = o.thin;
  s["retained_per_chain"] = cs.chains.empty() ? 0 : cs.chains[0].iteration.size();
  s["posterior_samples"] = p.samples.size();
  json rhat, mean;
  for (std::size_t i = 0; i < cs.names.size(); ++i) {
    rhat[cs.names[i]] = cs.rhat[i] ? real_or_null(*cs.rhat[i]) : json(nullptr);
    double m = 0.0;
    std::size_t n = 0;
    for (const ChainSamples& ch : cs.chains) {
      for (double x : ch.values[i]) m += x;
      n += ch.values[i].size();
    }
    mean[cs.names[i]] = m / static_cast<double>(n);
  }
  s["rhat"] = rhat;
  s["posterior_mean"] = mean;
  json acc = json::array();
  for (const ChainSamples& ch : cs.chains) acc.push_back(ch.acceptance);
  s["acceptance"] = acc;
  s["prior"] = p.prior;
  s["out"] = c.out;
  s["posterior_out"] = posterior_out;
  return s;
}

json cmd_diagnose(const Common& c, const std::string& chains_path) {
  ChainTable t = parse_chains_csv(read_file(chains_path));
  const std::size_t C = t.values.size();
  json params;
  for (std::size_t p = 0; p < t.names.size(); ++p) {
    std::vector<std::vector<double>> per_chain;
    std::vector<double> pooled;
    for (std::size_t ch = 0; ch < C; ++ch) {
      per_chain.push_back(t.values[ch][p]);
      pooled.insert(pooled.end(), t.values[ch][p].begin(), t.values[ch][p].end());
    }
    json e;
    if (C >= 2) {
      try {
        e["rhat"] = gelman_rubin(per_chain);
      } catch (const NumericError& err) {
        throw NumericError("R-hat for " + t.names[p] + " is undefined: " + err.what());
      }
    } else {
      e["rhat"] = nullptr;
    }
    const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
    double var = 0.0;
    for (double x : pooled) var += (x - mean) * (x - mean);
    e["mean"] = mean;
    e["sd"] = pooled.size() > 1 ? std::sqrt(var / static_cast<double>(pooled.size() - 1)) : 0.0;
    e["q025"] = quantile(pooled, 0.025);
    e["q50"] = quantile(pooled, 0.5);
    e["q975"] = quantile(pooled, 0.975);
    params[t.names[p]] = e;
  }
  json s;
  s["command"] = "diagnose";
  s["chains"] = C;
  s["samples_per_chain"] = C == 0 ? 0 : t.iteration[0].size();
  s["parameters"] = params;
  if (!c.out.empty()) {
    write_file(c.out, s.dump(1) + "\n");
    s["out"] = c.out;
  }
  return s;
}

struct PredictArgs {
  std::string data, posterior, tests, estimator = "exact";
  long doc = 0;
  int group = 0;
  int sweeps = 200;
  int burnin = 50;
};

json cmd_predict(const Common& c, const PredictArgs& a) {
  HibpDataset d;
  std::vector<TrainState> states = load_train(a.data, a.posterior, &d);
  TestSet t = parse_test_set(read_file(a.tests));
  check_test_set(t, d);
  require(a.doc >= 0 && a.doc < static_cast<long>(t.docs.size()),
          "--doc " + std::to_string(a.doc) + " is outside the test set of " + std::to_string(t.docs.size()));
  require(a.group >= 0 && a.group < d.spec.J(), "--group must be in [0, " + std::to_string(d.spec.J()) + ")");
  const Estimator est = parse_estimator(a.estimator);
  const TestDoc& doc = t.docs[static_cast<std::size_t>(a.doc)];
  const RngStream base(c.seed.value_or(0), kStreamPredict);

  std::vector<double> per;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (est == Estimator::Exact) {
      per.push_back(log_predictive_exact(states[i], doc, a.group));
    } else {
      RngStream r = base.substream(i);
      per.push_back(log_predictive_gibbs(states[i], doc, a.group, a.sweeps, a.burnin, r).log_mean);
    }
  }
  json s;
  s["command"] = "predict";
  s["doc"] = a.doc;
  s["group"] = a.group;
  s["estimator"] = estimator_name(est);
  s["log_predictive"] = real_or_null(log_mean_exp(per));
  json ps = json::array();
  for (double x : per) ps.push_back(real_or_null(x));
  s["per_sample"] = ps;
  if (!c.out.empty()) {
    write_file(c.out, s.dump(1) + "\n");
    s["out"] = c.out;
  }
  return s;
}

struct ClassifyArgs {
  std::string data, posterior, tests, estimator;
};

json cmd_classify(const Common& c, const ClassifyArgs& a) {
  HibpDataset d;
  std::vector<TrainState> states = load_train(a.data, a.posterior, &d);
  TestSet t = parse_test_set(read_file(a.tests));
  check_test_set(t, d);
  ClassifyOptions opts;
  std::uint64_t seed = c.seed.value_or(0);
  if (!c.config.empty()) {
    ExperimentConfig cfg = load_config(c.config, c.seed);
    opts = cfg.classify.opts;
    seed = cfg.seed;
  }
  if (!a.estimator.empty()) opts.estimator = parse_estimator(a.estimator);
  const int threads = resolve_threads(c.threads);

  std::vector<ClassifyResult> res =
      classify_many(states, t.docs, RngStream(seed, kStreamClassify), opts, threads);
  long correct = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (res[i].group == t.labels[i]) ++correct;
    json lp = json::array();
    for (double x : res[i].log_predictive) lp.push_back(real_or_null(x));
    rows.push_back(json{{"label", t.labels[i]}, {"predicted", res[i].group}, {"log_predictive", lp}});
  }
  json s;
  s["command"] = "classify";
  s["model"] = model_name(d.model);
  s["seed"] = seed;
  s["estimator"] = estimator_name(opts.estimator);
  s["posterior_samples"] = states.size();
  s["docs"] = res.size();
  s["accuracy"] = res.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(res.size());
  s["overlap"] = overlap(aggregate(d.draw, d.spec));
  s["data_alpha"] = d.spec.baseline.alpha;
  json file = s;
  file["results"] = rows;
  write_file(c.out, file.dump(1) + "\n");
  s["out"] = c.out;
  return s;
}

json cmd_overlap(const Common& c, const std::string& data_path) {
  AggregatedData a = any_counts(read_file(data_path));
  json s;
  s["command"] = "overlap";
  s["groups"] = a.J();
  s["features"] = a.r();
  s["overlap"] = overlap(a);
  if (!c.out.empty()) {
    write_file(c.out, s.dump(1) + "\n");
    s["out"] = c.out;
  }
  return s;
}

void csv_row(std::ostringstream& o, const std::string& x, const std::string& y, const std::string& series, long rep) {
  o << x << ',' << y << ',' << series << ',' << rep << '\n';
}

json cmd_plot_data(const Common& c, const std::string& kind, const std::vector<std::string>& inputs, long top) {
  require(!inputs.empty(), "plot-data needs at least one --input");
  std::ostringstream o;
  o << "x,y,series,replicate\n";
  long rows = 0;
  for (std::size_t rep = 0; rep < inputs.size(); ++rep) {
    const std::string text = read_file(inputs[rep]);
    const long r_id = static_cast<long>(rep);
    if (kind == "counts") {
      ModelKind model;
      std::vector<CountSeries> series = data_series(text, &model);
      const std::size_t r = series.empty() ? 0 : series[0].counts.size();
      std::vector<long> total(r, 0);
      for (const CountSeries& s : series)
        for (std::size_t k = 0; k < r; ++k) total[k] += s.counts[k];
      std::vector<std::size_t> order(r);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total[a] > total[b]; });
      const std::size_t keep = std::min<std::size_t>(r, static_cast<std::size_t>(std::max(0L, top)));
      for (const CountSeries& s : series)
        for (std::size_t i = 0; i < keep; ++i, ++rows)
          csv_row(o, std::to_string(i + 1), std::to_string(s.counts[order[i]]), s.name, r_id);
    } else if (kind == "trace") {
      ChainTable t = parse_chains_csv(text);
      for (std::size_t ch = 0; ch < t.values.size(); ++ch) {
        for (std::size_t p = 0; p < t.names.size(); ++p)
          for (std::size_t i = 0; i < t.iteration[ch].size(); ++i, ++rows)
            csv_row(o, std::to_string(t.iteration[ch][i]), format_real(t.values[ch][p][i]), t.names[p],
                    static_cast<long>(ch));
        for (std::size_t i = 0; i < t.iteration[ch].size(); ++i, ++rows)
          csv_row(o, std::to_string(t.iteration[ch][i]), format_real(t.loglik[ch][i]), "loglik",
                  static_cast<long>(ch));
      }
    } else if (kind == "classify") {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::exception& e) {
        throw IoError(inputs[rep] + ": " + e.what());
      }
      require(j.is_object() && j.value("command", "") == "classify" && j.contains("accuracy") &&
                  j.contains("overlap") && j.contains("data_alpha"),
              inputs[rep] + " is not a classify result file");
      const std::string x = format_real(j["data_alpha"].get<double>());
      csv_row(o, x, format_real(j["accuracy"].get<double>()), "accuracy", r_id);
      csv_row(o, x, format_real(j["overlap"].get<double>()), "overlap", r_id);
      rows += 2;
    } else {
      throw ValidationError("--kind must be counts, trace or classify, got \"" + kind + "\"");
    }
  }
  write_file(c.out, o.str());
  json s;
  s["command"] = "plot-data";
  s["kind"] = kind;
  s["inputs"] = inputs.size();
  s["rows"] = rows;
  s["out"] = c.out;
  return s;
}

void add_common(CLI::App* sub, Common& c, bool config, bool seed, bool out_required, bool threads) {
  if (config) sub->add_option("--config", c.config, "experiment config (JSON)");
  if (seed) sub->add_option("--seed", c.seed, "run seed, overrides the config");
  auto* o = sub->add_option("--out", c.out, "output path");
  if (out_required) o->required();
  if (threads) sub->add_option("--threads", c.threads, "worker threads (default HIBP_LAB_THREADS or 1)");
}

int fail(std::ostream& out, std::ostream& err, int code, const std::string& msg) {
  err << "hibp-lab: " << msg << "\n";
  json e;
  e["error"] = msg;
  e["exit_code"] = code;
  out << e.dump() << "\n";
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation, inference and prediction workbench for hierarchical Indian buffet processes"};
  app.name("hibp-lab");
  app.require_subcommand(1);

  Common c;
  std::string test_out, data, posterior_out, chains, kind = "counts";
  std::vector<std::string> inputs;
  long top = 100;
  PredictArgs pa;
  ClassifyArgs ca;

  auto* sim = app.add_subcommand("simulate", "draw a data set (and optionally test documents) from a config");
  add_common(sim, c, true, true, true, false);
  sim->get_option("--config")->required();
  sim->add_option("--test-out", test_out, "write classify.n_test_per_group test documents per group here");

  auto* inf = app.add_subcommand("infer", "run MCMC over the hyperparameters and latent counts");
  add_common(inf, c, true, true, true, true);
  inf->get_option("--config")->required();
  inf->add_option("--data", data, "data file")->required();
  inf->add_option("--posterior-out", posterior_out, "posterior sample file (default <out>.posterior.json)");

  auto* dia = app.add_subcommand("diagnose", "Gelman-Rubin and posterior summaries of a chains CSV");
  add_common(dia, c, false, false, false, false);
  dia->add_option("--chains", chains, "chains CSV written by infer")->required();

  auto* pre = app.add_subcommand("predict", "log predictive probability of one test document under one group");
  add_common(pre, c, false, true, false, false);
  pre->add_option("--data", pa.data, "training data file")->required();
  pre->add_option("--posterior", pa.posterior, "posterior file written by infer")->required();
  pre->add_option("--tests", pa.tests, "test set file")->required();
  pre->add_option("--doc", pa.doc, "document index in the test set (default 0)");
  pre->add_option("--group", pa.group, "group index, 0-based")->required();
  pre->add_option("--estimator", pa.estimator, "exact or gibbs (default exact)");
  pre->add_option("--sweeps", pa.sweeps, "Gibbs sweeps (gibbs estimator)");
  pre->add_option("--burnin", pa.burnin, "Gibbs burn-in sweeps (gibbs estimator)");

  auto* cla = app.add_subcommand("classify", "assign each test document to its most probable group");
  add_common(cla, c, true, true, true, true);
  cla->add_option("--data", ca.data, "training data file")->required();
  cla->add_option("--posterior", ca.posterior, "posterior file written by infer")->required();
  cla->add_option("--tests", ca.tests, "test set file")->required();
  cla->add_option("--estimator", ca.estimator, "exact or gibbs, overrides the config");

  auto* ovl = app.add_subcommand("overlap", "mean fraction of features shared by pairs of groups");
  add_common(ovl, c, false, false, false, false);
  ovl->add_option("--data", data, "data file")->required();

  auto* plot = app.add_subcommand("plot-data", "long-format CSV (x, y, series, replicate) for external plotting");
  add_common(plot, c, false, false, true, false);
  plot->add_option("--kind", kind, "counts (data files), trace (chains CSV) or classify (classify results)");
  plot->add_option("--input", inputs, "input files, one replicate each")->required();
  plot->add_option("--top", top, "features kept by --kind counts (default 100)");

  std::vector<std::string> argv_s{"hibp-lab"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_s) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return fail(out, err, kExitValidation, e.what());
  }

  try {
    json s;
    if (sim->parsed()) s = cmd_simulate(c, test_out);
    else if (inf->parsed()) s = cmd_infer(c, data, posterior_out);
    else if (dia->parsed()) s = cmd_diagnose(c, chains);
    else if (pre->parsed()) s = cmd_predict(c, pa);
    else if (cla->parsed()) s = cmd_classify(c, ca);
    else if (ovl->parsed()) s = cmd_overlap(c, data);
    else s = cmd_plot_data(c, kind, inputs, top);
    out << s.dump(1) << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    return fail(out, err, kExitValidation, e.what());
  } catch (const IoError& e) {
    return fail(out, err, kExitIo, e.what());
  } catch (const NumericError& e) {
    return fail(out, err, kExitNumeric, e.what());
  } catch (const std::exception& e) {
    return fail(out, err, kExitInternal, e.what());
  }
}

}  // namespace hibp
