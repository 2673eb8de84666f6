#include "hibp/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "hibp/errors.hpp"
#include "json.hpp"

namespace hibp {

using json = nlohmann::ordered_json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(what + ": malformed JSON (" + e.what() + ")");
  }
}

void allow_keys(const json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

std::string path_of(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError("missing field " + path_of(where, key));
  return *it;
}

double real_of(const json& v, const std::string& name) {
  require(v.is_number(), name + " must be a number");
  return v.get<double>();
}

long int_of(const json& v, const std::string& name) {
  require(v.is_number_integer(), name + " must be an integer");
  return v.get<long>();
}

double get_real(const json& j, const std::string& key, const std::string& where, std::optional<double> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    throw ValidationError("missing field " + path_of(where, key));
  }
  return real_of(j.at(key), path_of(where, key));
}

long get_int(const json& j, const std::string& key, const std::string& where, std::optional<long> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    throw ValidationError("missing field " + path_of(where, key));
  }
  return int_of(j.at(key), path_of(where, key));
}

bool get_bool(const json& j, const std::string& key, const std::string& where, bool def) {
  if (!j.contains(key)) return def;
  require(j.at(key).is_boolean(), path_of(where, key) + " must be true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  require(v.is_string(), path_of(where, key) + " must be a string");
  return v.get<std::string>();
}

std::vector<long> int_vector(const json& v, const std::string& name) {
  require(v.is_array(), name + " must be an array");
  std::vector<long> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(int_of(v[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

CountMatrix int_matrix(const json& v, const std::string& name) {
  require(v.is_array(), name + " must be an array");
  CountMatrix out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(int_vector(v[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> real_vector(const json& v, const std::string& name) {
  require(v.is_array(), name + " must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(real_of(v[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

std::pair<double, double> range_of(const json& v, const std::string& name) {
  std::vector<double> r = real_vector(v, name);
  require(r.size() == 2 && r[0] <= r[1], name + " must be [low, high] with low <= high");
  return {r[0], r[1]};
}

// Sparse "i,j,..." keyed maps.
std::vector<long> parse_key(const std::string& key, std::size_t parts, const std::string& where) {
  std::vector<long> out;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    std::size_t end = key.find(',', pos);
    if (end == std::string::npos) end = key.size();
    long v = 0;
    auto [p, ec] = std::from_chars(key.data() + pos, key.data() + end, v);
    if (ec != std::errc() || p != key.data() + end || v < 0)
      throw ValidationError(where + ": bad index key '" + key + "'");
    out.push_back(v);
    pos = end + 1;
  }
  if (out.size() != parts) throw ValidationError(where + ": bad index key '" + key + "'");
  return out;
}

std::string make_key(std::initializer_list<long> idx) {
  std::string s;
  for (long i : idx) {
    if (!s.empty()) s += ',';
    s += std::to_string(i);
  }
  return s;
}

json gg_json(const GGParams& p) { return json{{"alpha", p.alpha}, {"zeta", p.zeta}, {"theta", p.theta}}; }

GGParams parse_gg(const json& j, const std::string& where) {
  allow_keys(j, {"alpha", "zeta", "theta"}, where);
  GGParams p;
  p.alpha = get_real(j, "alpha", where);
  p.zeta = get_real(j, "zeta", where, 1.0);
  p.theta = get_real(j, "theta", where);
  return p;
}

json group_json(const GroupSpec& g) {
  if (g.slab.is_poisson())
    return json{{"alpha", g.prior.alpha}, {"zeta", g.prior.zeta}, {"theta", g.prior.theta}, {"beta", g.slab.beta},
                {"M", g.M}};
  return json{{"alpha_b", g.slab.alpha_b}, {"beta_b", g.slab.beta_b}, {"theta_b", g.slab.theta_b}, {"M", g.M}};
}

GroupSpec parse_group(const json& j, bool bernoulli, const std::string& where) {
  GroupSpec g;
  if (bernoulli) {
    allow_keys(j, {"alpha_b", "beta_b", "theta_b", "M"}, where);
    g.slab = SlabSpec::bernoulli(get_real(j, "alpha_b", where), get_real(j, "beta_b", where),
                                 get_real(j, "theta_b", where));
  } else {
    allow_keys(j, {"alpha", "zeta", "theta", "beta", "M"}, where);
    g.prior.alpha = get_real(j, "alpha", where);
    g.prior.zeta = get_real(j, "zeta", where, 1.0);
    g.prior.theta = get_real(j, "theta", where);
    g.slab = SlabSpec::poisson(get_real(j, "beta", where, 1.0));
  }
  g.M = get_int(j, "M", where);
  require(g.M >= 0, path_of(where, "M") + " must be >= 0");
  return g;
}

std::vector<GroupSpec> parse_random_groups(const json& j, bool bernoulli, RngStream rng, const std::string& where) {
  require(!bernoulli, where + " is only available for Poisson slabs");
  allow_keys(j, {"J", "M", "theta", "alpha", "zeta", "beta"}, where);
  const long J = get_int(j, "J", where);
  require(J >= 1, path_of(where, "J") + " must be >= 1");
  const long M = get_int(j, "M", where);
  auto th = range_of(field(j, "theta", where), path_of(where, "theta"));
  auto al = range_of(field(j, "alpha", where), path_of(where, "alpha"));
  const double zeta = get_real(j, "zeta", where, 1.0), beta = get_real(j, "beta", where, 1.0);
  std::vector<GroupSpec> out;
  for (long g = 0; g < J; ++g) {
    GroupSpec s;
    s.prior.alpha = al.first + (al.second - al.first) * rng.uniform();
    s.prior.zeta = zeta;
    s.prior.theta = th.first + (th.second - th.first) * rng.uniform();
    s.slab = SlabSpec::poisson(beta);
    s.M = M;
    out.push_back(s);
  }
  return out;
}

json spec_json(const HibpSpec& s) {
  json groups = json::array();
  for (const GroupSpec& g : s.groups) groups.push_back(group_json(g));
  return json{{"gamma0", s.gamma0}, {"baseline", gg_json(s.baseline)}, {"groups", groups}};
}

json spec_json(const HhibpSpec& s) {
  json cats = json::array(), subs = json::array();
  for (const GGParams& c : s.categories) cats.push_back(gg_json(c));
  for (const auto& row : s.subgroups) {
    json r = json::array();
    for (const GroupSpec& g : row) r.push_back(group_json(g));
    subs.push_back(r);
  }
  return json{{"gamma0", s.gamma0}, {"baseline", gg_json(s.baseline)}, {"categories", cats}, {"subgroups", subs}};
}

HibpSpec parse_hibp_spec(const json& j, bool bernoulli, const std::string& where) {
  allow_keys(j, {"gamma0", "baseline", "groups"}, where);
  HibpSpec s;
  s.gamma0 = get_real(j, "gamma0", where, 1.0);
  s.baseline = parse_gg(field(j, "baseline", where), path_of(where, "baseline"));
  const json& g = field(j, "groups", where);
  require(g.is_array(), path_of(where, "groups") + " must be an array");
  for (std::size_t i = 0; i < g.size(); ++i)
    s.groups.push_back(parse_group(g[i], bernoulli, path_of(where, "groups[" + std::to_string(i) + "]")));
  validate(s);
  return s;
}

HhibpSpec parse_hhibp_spec(const json& j, bool bernoulli, const std::string& where) {
  allow_keys(j, {"gamma0", "baseline", "categories", "subgroups"}, where);
  HhibpSpec s;
  s.gamma0 = get_real(j, "gamma0", where, 1.0);
  s.baseline = parse_gg(field(j, "baseline", where), path_of(where, "baseline"));
  const json& c = field(j, "categories", where);
  require(c.is_array(), path_of(where, "categories") + " must be an array");
  for (std::size_t i = 0; i < c.size(); ++i)
    s.categories.push_back(parse_gg(c[i], path_of(where, "categories[" + std::to_string(i) + "]")));
  const json& sg = field(j, "subgroups", where);
  require(sg.is_array(), path_of(where, "subgroups") + " must be an array");
  for (std::size_t i = 0; i < sg.size(); ++i) {
    require(sg[i].is_array(), path_of(where, "subgroups[" + std::to_string(i) + "]") + " must be an array");
    std::vector<GroupSpec> row;
    for (std::size_t d = 0; d < sg[i].size(); ++d)
      row.push_back(parse_group(sg[i][d], bernoulli,
                                path_of(where, "subgroups[" + std::to_string(i) + "][" + std::to_string(d) + "]")));
    s.subgroups.push_back(row);
  }
  validate(s);
  return s;
}

ModelKind model_of(const json& j, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  return parse_model_kind(get_string(j, "model", where));
}

}  // namespace

std::string model_name(ModelKind m) {
  switch (m) {
    case ModelKind::GgGgPoisson:
      return "gg-gg-poisson";
    case ModelKind::GgSbpBernoulli:
      return "gg-sbp-bernoulli";
    case ModelKind::GgGgGgPoisson:
      return "gg-gg-gg-poisson";
    case ModelKind::GgGgSbpBernoulli:
      return "gg-gg-sbp-bernoulli";
  }
  return "";
}

ModelKind parse_model_kind(const std::string& name) {
  for (ModelKind m : {ModelKind::GgGgPoisson, ModelKind::GgSbpBernoulli, ModelKind::GgGgGgPoisson,
                      ModelKind::GgGgSbpBernoulli})
    if (model_name(m) == name) return m;
  throw ValidationError("model: unknown model '" + name +
                        "' (expected gg-gg-poisson, gg-sbp-bernoulli, gg-gg-gg-poisson or gg-gg-sbp-bernoulli)");
}

bool is_hierarchical(ModelKind m) { return m == ModelKind::GgGgGgPoisson || m == ModelKind::GgGgSbpBernoulli; }

bool is_bernoulli(ModelKind m) { return m == ModelKind::GgSbpBernoulli || m == ModelKind::GgGgSbpBernoulli; }

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j = parse_json(text, "config");
  allow_keys(j,
             {"model", "seed", "gamma0", "baseline", "groups", "random_groups", "categories", "subgroups",
              "keep_occurrences", "mcmc", "classify"},
             "config");
  ExperimentConfig c;
  c.model = model_of(j, "config");
  const bool bern = is_bernoulli(c.model);
  const long seed = get_int(j, "seed", "", 0);
  require(seed >= 0, "seed must be >= 0");
  c.seed = seed_override ? *seed_override : static_cast<std::uint64_t>(seed);
  c.keep_occurrences = get_bool(j, "keep_occurrences", "", false);

  if (is_hierarchical(c.model)) {
    require(!j.contains("groups") && !j.contains("random_groups"),
            "groups/random_groups belong to two-level models; use categories and subgroups");
    json s{{"gamma0", j.value("gamma0", json(1.0))},
           {"baseline", field(j, "baseline", "")},
           {"categories", field(j, "categories", "")},
           {"subgroups", field(j, "subgroups", "")}};
    c.hhibp = parse_hhibp_spec(s, bern, "");
  } else {
    require(!j.contains("categories") && !j.contains("subgroups"),
            "categories/subgroups belong to three-level models; use groups");
    require(j.contains("groups") != j.contains("random_groups"), "give exactly one of groups and random_groups");
    json s{{"gamma0", j.value("gamma0", json(1.0))}, {"baseline", field(j, "baseline", "")}};
    if (j.contains("groups")) {
      s["groups"] = j.at("groups");
      c.hibp = parse_hibp_spec(s, bern, "");
    } else {
      s["groups"] = json::array();
      auto groups = parse_random_groups(j.at("random_groups"), bern, RngStream(c.seed, 0x67726f7570ULL),
                                        "random_groups");
      c.hibp.gamma0 = get_real(s, "gamma0", "");
      c.hibp.baseline = parse_gg(s.at("baseline"), "baseline");
      c.hibp.groups = groups;
      validate(c.hibp);
    }
  }

  if (j.contains("mcmc")) {
    const json& m = j.at("mcmc");
    allow_keys(m,
               {"iters", "burnin", "chains", "thin", "init_step", "init_jitter", "target_accept", "log_theta_sd",
                "joint_block", "init"},
               "mcmc");
    c.mcmc.iters = get_int(m, "iters", "mcmc", c.mcmc.iters);
    c.mcmc.burnin = get_int(m, "burnin", "mcmc", c.mcmc.iters / 2);
    c.mcmc.chains = static_cast<int>(get_int(m, "chains", "mcmc", c.mcmc.chains));
    c.mcmc.thin = get_int(m, "thin", "mcmc", c.mcmc.thin);
    c.mcmc.init_step = get_real(m, "init_step", "mcmc", c.mcmc.init_step);
    c.mcmc.init_jitter = get_real(m, "init_jitter", "mcmc", 0.5);
    c.mcmc.target_accept = get_real(m, "target_accept", "mcmc", c.mcmc.target_accept);
    c.mcmc.log_theta_sd = get_real(m, "log_theta_sd", "mcmc", c.mcmc.log_theta_sd);
    c.mcmc.joint_block = get_bool(m, "joint_block", "mcmc", c.mcmc.joint_block);
    if (m.contains("init")) {
      const json& i = m.at("init");
      allow_keys(i, {"theta0", "alpha", "theta", "alpha_j"}, "mcmc.init");
      c.init.theta0 = get_real(i, "theta0", "mcmc.init", c.init.theta0);
      c.init.alpha = get_real(i, "alpha", "mcmc.init", c.init.alpha);
      c.init.theta = get_real(i, "theta", "mcmc.init", c.init.theta);
      c.init.alpha_j = get_real(i, "alpha_j", "mcmc.init", c.init.alpha_j);
    }
  } else {
    c.mcmc.init_jitter = 0.5;
  }
  validate(c.mcmc);
  for (double th : {c.init.theta0, c.init.theta}) require(th > 0.0 && std::isfinite(th), "mcmc.init thetas must be > 0");
  for (double a : {c.init.alpha, c.init.alpha_j})
    require(a > kAlphaMin && a < 1.0, "mcmc.init alphas must lie in (" + std::to_string(kAlphaMin) + ", 1)");

  if (j.contains("classify")) {
    const json& k = j.at("classify");
    allow_keys(k, {"n_test_per_group", "estimator", "sweeps", "burnin", "posterior_samples"}, "classify");
    c.classify.n_test_per_group = get_int(k, "n_test_per_group", "classify", 0);
    require(c.classify.n_test_per_group >= 0, "classify.n_test_per_group must be >= 0");
    if (k.contains("estimator")) {
      const std::string e = get_string(k, "estimator", "classify");
      if (e == "exact")
        c.classify.opts.estimator = Estimator::Exact;
      else if (e == "gibbs")
        c.classify.opts.estimator = Estimator::Gibbs;
      else
        throw ValidationError("classify.estimator must be \"exact\" or \"gibbs\"");
    }
    c.classify.opts.sweeps = static_cast<int>(get_int(k, "sweeps", "classify", c.classify.opts.sweeps));
    c.classify.opts.burnin = static_cast<int>(get_int(k, "burnin", "classify", c.classify.opts.burnin));
    require(c.classify.opts.sweeps > c.classify.opts.burnin && c.classify.opts.burnin >= 0,
            "classify: need 0 <= burnin < sweeps");
    c.classify.posterior_samples = get_int(k, "posterior_samples", "classify", c.classify.posterior_samples);
    require(c.classify.posterior_samples >= 1, "classify.posterior_samples must be >= 1");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  return parse_config(read_file(path), seed_override);
}

std::string to_json(const HibpDataset& d) {
  const HibpDraw& w = d.draw;
  const int J = d.spec.J();
  json o;
  o["model"] = model_name(d.model);
  o["J"] = J;
  json M = json::array();
  for (const GroupSpec& g : d.spec.groups) M.push_back(g.M);
  o["M"] = M;
  o["features"] = w.r;
  o["spec"] = spec_json(d.spec);
  if (!w.labels.empty()) o["labels"] = w.labels;
  if (d.has_latents) o["X"] = w.X;
  o["agg_counts"] = w.agg;
  if (d.has_doc_totals) {
    json t = json::object();
    for (int j = 0; j < J; ++j)
      for (long k = 0; k < w.r; ++k)
        if (w.agg[j][k] > 0) t[make_key({j, k})] = w.doc_totals[j][k];
    o["doc_totals"] = t;
  }
  if (w.has_occurrences) {
    json t = json::object();
    for (int j = 0; j < J; ++j)
      for (long k = 0; k < w.r; ++k)
        if (!w.occurrences[j][k].empty()) t[make_key({j, k})] = w.occurrences[j][k];
    o["doc_counts"] = t;
  }
  return o.dump(1) + "\n";
}

ModelKind peek_model(const std::string& text) { return model_of(parse_json(text, "input"), "input"); }

HibpDataset parse_hibp_dataset(const std::string& text) {
  json o = parse_json(text, "data file");
  allow_keys(o, {"model", "J", "M", "features", "spec", "labels", "X", "agg_counts", "doc_totals", "doc_counts"},
             "data file");
  HibpDataset d;
  d.model = model_of(o, "data file");
  require(!is_hierarchical(d.model), "data file holds a three-level model; expected " + model_name(ModelKind::GgGgPoisson) +
                                         " or " + model_name(ModelKind::GgSbpBernoulli));
  d.spec = parse_hibp_spec(field(o, "spec", ""), is_bernoulli(d.model), "spec");
  const int J = d.spec.J();
  require(get_int(o, "J", "") == J, "J differs from spec");
  std::vector<long> M = int_vector(field(o, "M", ""), "M");
  require(static_cast<int>(M.size()) == J, "M must have J entries");
  for (int j = 0; j < J; ++j) require(M[j] == d.spec.groups[j].M, "M differs from spec");
  HibpDraw& w = d.draw;
  w.r = get_int(o, "features", "");
  require(w.r >= 0, "features must be >= 0");
  w.agg = int_matrix(field(o, "agg_counts", ""), "agg_counts");
  require(static_cast<int>(w.agg.size()) == J, "agg_counts must have J rows");
  for (const auto& row : w.agg) require(static_cast<long>(row.size()) == w.r, "agg_counts rows must have r entries");
  if (o.contains("labels")) {
    const json& l = o.at("labels");
    require(l.is_array(), "labels must be an array");
    for (const json& x : l) {
      require(x.is_number_unsigned() || (x.is_number_integer() && x.get<long>() >= 0),
              "labels must be non-negative integers");
      w.labels.push_back(x.get<std::uint64_t>());
    }
  }
  d.has_latents = o.contains("X");
  if (d.has_latents) {
    w.X = int_matrix(o.at("X"), "X");
  } else {
    w.X.assign(J, std::vector<long>(w.r, 0));
  }
  d.has_doc_totals = o.contains("doc_totals");
  w.doc_totals.assign(J, {});
  if (d.has_doc_totals) {
    for (int j = 0; j < J; ++j) w.doc_totals[j].assign(w.r, std::vector<long>(d.spec.groups[j].M, 0));
    const json& t = o.at("doc_totals");
    require(t.is_object(), "doc_totals must be an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      auto idx = parse_key(it.key(), 2, "doc_totals");
      require(idx[0] < J && idx[1] < w.r, "doc_totals: index out of range");
      std::vector<long> v = int_vector(it.value(), "doc_totals." + it.key());
      require(static_cast<long>(v.size()) == d.spec.groups[idx[0]].M, "doc_totals." + it.key() + " must have M_j entries");
      long sum = 0;
      for (long x : v) {
        require(x >= 0, "doc_totals entries must be >= 0");
        sum += x;
      }
      require(sum == w.agg[idx[0]][idx[1]], "doc_totals." + it.key() + " does not sum to agg_counts");
      w.doc_totals[idx[0]][idx[1]] = std::move(v);
    }
    for (int j = 0; j < J; ++j)
      for (long k = 0; k < w.r; ++k)
        if (w.agg[j][k] > 0) require(t.contains(make_key({j, k})), "doc_totals: missing entry " + make_key({j, k}));
  }
  if (o.contains("doc_counts")) {
    w.has_occurrences = true;
    w.occurrences.assign(J, std::vector<CountMatrix>(w.r));
    const json& t = o.at("doc_counts");
    require(t.is_object(), "doc_counts must be an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      auto idx = parse_key(it.key(), 2, "doc_counts");
      require(idx[0] < J && idx[1] < w.r, "doc_counts: index out of range");
      w.occurrences[idx[0]][idx[1]] = int_matrix(it.value(), "doc_counts." + it.key());
    }
  }
  if (d.has_latents) {
    check_draw(d.spec, w);
  } else {
    require(!w.has_occurrences, "doc_counts need the latent counts X");
    validate(aggregate(w, d.spec), d.spec);
  }
  return d;
}

std::string to_json(const HhibpDataset& d) {
  const HhibpDraw& w = d.draw;
  const int J = d.spec.J();
  json o;
  o["model"] = model_name(d.model);
  o["J"] = J;
  json D = json::array(), M = json::array();
  for (const auto& row : d.spec.subgroups) {
    D.push_back(row.size());
    json m = json::array();
    for (const GroupSpec& g : row) m.push_back(g.M);
    M.push_back(m);
  }
  o["D"] = D;
  o["M"] = M;
  o["features"] = w.r;
  o["spec"] = spec_json(d.spec);
  if (!w.labels.empty()) o["labels"] = w.labels;
  o["Xhat"] = w.Xhat;
  json C = json::object();
  for (int j = 0; j < J; ++j)
    for (long k = 0; k < w.r; ++k)
      if (!w.C[j][k].empty()) C[make_key({j, k})] = w.C[j][k];
  o["C"] = C;
  o["Nhat"] = w.Nhat;
  o["agg_counts"] = w.agg;
  json t = json::object();
  for (int j = 0; j < J; ++j)
    for (std::size_t dd = 0; dd < d.spec.subgroups[j].size(); ++dd)
      for (long k = 0; k < w.r; ++k)
        if (w.agg[j][dd][k] > 0) t[make_key({j, static_cast<long>(dd), k})] = w.doc_totals[j][dd][k];
  o["doc_totals"] = t;
  if (w.has_occurrences) {
    json oc = json::object();
    for (int j = 0; j < J; ++j)
      for (std::size_t dd = 0; dd < d.spec.subgroups[j].size(); ++dd)
        for (long k = 0; k < w.r; ++k)
          if (!w.occurrences[j][dd][k].empty()) oc[make_key({j, static_cast<long>(dd), k})] = w.occurrences[j][dd][k];
    o["doc_counts"] = oc;
  }
  return o.dump(1) + "\n";
}

HhibpDataset parse_hhibp_dataset(const std::string& text) {
  json o = parse_json(text, "data file");
  allow_keys(o,
             {"model", "J", "D", "M", "features", "spec", "labels", "Xhat", "C", "Nhat", "agg_counts", "doc_totals",
              "doc_counts"},
             "data file");
  HhibpDataset d;
  d.model = model_of(o, "data file");
  require(is_hierarchical(d.model), "data file holds a two-level model; expected a three-level one");
  d.spec = parse_hhibp_spec(field(o, "spec", ""), is_bernoulli(d.model), "spec");
  const int J = d.spec.J();
  require(get_int(o, "J", "") == J, "J differs from spec");
  std::vector<long> D = int_vector(field(o, "D", ""), "D");
  CountMatrix M = int_matrix(field(o, "M", ""), "M");
  require(static_cast<int>(D.size()) == J && static_cast<int>(M.size()) == J, "D and M must have J entries");
  for (int j = 0; j < J; ++j) {
    require(D[j] == static_cast<long>(d.spec.subgroups[j].size()), "D differs from spec");
    require(static_cast<long>(M[j].size()) == D[j], "M rows must have D_j entries");
    for (long dd = 0; dd < D[j]; ++dd) require(M[j][dd] == d.spec.subgroups[j][dd].M, "M differs from spec");
  }
  HhibpDraw& w = d.draw;
  w.r = get_int(o, "features", "");
  require(w.r >= 0, "features must be >= 0");
  if (o.contains("labels")) {
    const json& l = o.at("labels");
    require(l.is_array(), "labels must be an array");
    for (const json& x : l) {
      require(x.is_number_unsigned() || (x.is_number_integer() && x.get<long>() >= 0),
              "labels must be non-negative integers");
      w.labels.push_back(x.get<std::uint64_t>());
    }
  }
  w.Xhat = int_matrix(field(o, "Xhat", ""), "Xhat");
  require(static_cast<int>(w.Xhat.size()) == J, "Xhat must have J rows");
  for (const auto& row : w.Xhat) require(static_cast<long>(row.size()) == w.r, "Xhat rows must have r entries");
  w.C.assign(J, Count3(w.r));
  const json& C = field(o, "C", "");
  require(C.is_object(), "C must be an object");
  for (auto it = C.begin(); it != C.end(); ++it) {
    auto idx = parse_key(it.key(), 2, "C");
    require(idx[0] < J && idx[1] < w.r, "C: index out of range");
    w.C[idx[0]][idx[1]] = int_matrix(it.value(), "C." + it.key());
  }
  const json& N = field(o, "Nhat", "");
  const json& A = field(o, "agg_counts", "");
  require(N.is_array() && A.is_array() && static_cast<int>(N.size()) == J && static_cast<int>(A.size()) == J,
          "Nhat and agg_counts must have J entries");
  for (int j = 0; j < J; ++j) {
    w.Nhat.push_back(int_matrix(N[j], "Nhat[" + std::to_string(j) + "]"));
    w.agg.push_back(int_matrix(A[j], "agg_counts[" + std::to_string(j) + "]"));
    require(static_cast<long>(w.Nhat[j].size()) == D[j] && static_cast<long>(w.agg[j].size()) == D[j],
            "Nhat and agg_counts need D_j rows per category");
    for (long dd = 0; dd < D[j]; ++dd)
      require(static_cast<long>(w.Nhat[j][dd].size()) == w.r && static_cast<long>(w.agg[j][dd].size()) == w.r,
              "Nhat and agg_counts rows must have r entries");
  }
  w.doc_totals.assign(J, {});
  for (int j = 0; j < J; ++j)
    for (long dd = 0; dd < D[j]; ++dd) w.doc_totals[j].push_back(CountMatrix(w.r, std::vector<long>(M[j][dd], 0)));
  const json& T = field(o, "doc_totals", "");
  require(T.is_object(), "doc_totals must be an object");
  for (auto it = T.begin(); it != T.end(); ++it) {
    auto idx = parse_key(it.key(), 3, "doc_totals");
    require(idx[0] < J && idx[1] < D[idx[0]] && idx[2] < w.r, "doc_totals: index out of range");
    std::vector<long> v = int_vector(it.value(), "doc_totals." + it.key());
    require(static_cast<long>(v.size()) == M[idx[0]][idx[1]], "doc_totals." + it.key() + " must have M entries");
    long sum = 0;
    for (long x : v) {
      require(x >= 0, "doc_totals entries must be >= 0");
      sum += x;
    }
    require(sum == w.agg[idx[0]][idx[1]][idx[2]], "doc_totals." + it.key() + " does not sum to agg_counts");
    w.doc_totals[idx[0]][idx[1]][idx[2]] = std::move(v);
  }
  if (o.contains("doc_counts")) {
    w.has_occurrences = true;
    w.occurrences.assign(J, {});
    for (int j = 0; j < J; ++j) w.occurrences[j].assign(D[j], Count3(w.r));
    const json& oc = o.at("doc_counts");
    require(oc.is_object(), "doc_counts must be an object");
    for (auto it = oc.begin(); it != oc.end(); ++it) {
      auto idx = parse_key(it.key(), 3, "doc_counts");
      require(idx[0] < J && idx[1] < D[idx[0]] && idx[2] < w.r, "doc_counts: index out of range");
      w.occurrences[idx[0]][idx[1]][idx[2]] = int_matrix(it.value(), "doc_counts." + it.key());
    }
  }
  check_draw(d.spec, w);
  return d;
}

PosteriorFile posterior_from_chains(const ChainSummary& s, const std::string& prior) {
  PosteriorFile p;
  p.names = s.names;
  p.prior = prior;
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const ChainSamples& ch = s.chains[c];
    for (std::size_t i = 0; i < ch.latent_index.size(); ++i) {
      const std::size_t t = ch.latent_index[i];
      PosteriorSample ps;
      ps.chain = static_cast<int>(c);
      ps.iteration = ch.iteration[t];
      for (const auto& v : ch.values) ps.values.push_back(v[t]);
      ps.X = ch.latents[i];
      p.samples.push_back(std::move(ps));
    }
  }
  return p;
}

std::string to_json(const PosteriorFile& p) {
  json o;
  o["model"] = model_name(p.model);
  o["names"] = p.names;
  o["prior"] = p.prior;
  json s = json::array();
  for (const PosteriorSample& x : p.samples)
    s.push_back(json{{"chain", x.chain}, {"iteration", x.iteration}, {"values", x.values}, {"X", x.X}});
  o["samples"] = s;
  return o.dump(1) + "\n";
}

PosteriorFile parse_posterior(const std::string& text) {
  json o = parse_json(text, "posterior file");
  allow_keys(o, {"model", "names", "prior", "samples"}, "posterior file");
  PosteriorFile p;
  p.model = model_of(o, "posterior file");
  const json& n = field(o, "names", "");
  require(n.is_array(), "names must be an array");
  for (const json& x : n) {
    require(x.is_string(), "names must be strings");
    p.names.push_back(x.get<std::string>());
  }
  if (o.contains("prior")) {
    require(o.at("prior").is_string(), "prior must be a string");
    p.prior = o.at("prior").get<std::string>();
  }
  const json& s = field(o, "samples", "");
  require(s.is_array(), "samples must be an array");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string w = "samples[" + std::to_string(i) + "]";
    allow_keys(s[i], {"chain", "iteration", "values", "X"}, w);
    PosteriorSample x;
    x.chain = static_cast<int>(get_int(s[i], "chain", w));
    x.iteration = get_int(s[i], "iteration", w);
    x.values = real_vector(field(s[i], "values", w), w + ".values");
    require(x.values.size() == p.names.size(), w + ".values length differs from names");
    if (!s[i].contains("X")) throw ValidationError(w + ": missing latents X");
    x.X = int_matrix(s[i].at("X"), w + ".X");
    p.samples.push_back(std::move(x));
  }
  return p;
}

std::vector<TrainState> train_states(const HibpDataset& d, const PosteriorFile& p) {
  require(d.model == ModelKind::GgGgPoisson, "prediction from posterior samples needs a gg-gg-poisson model");
  require(p.model == d.model, "posterior model differs from the data model");
  const int J = d.spec.J();
  require(p.names == hyper_names(J), "posterior parameter names do not match the data's group count");
  require(!p.samples.empty(), "posterior file holds no samples with latents");
  AggregatedData data = aggregate(d.draw, d.spec);
  std::vector<TrainState> out;
  for (const PosteriorSample& s : p.samples) {
    TrainState t;
    t.spec = d.spec;
    t.spec.baseline.theta = s.values[0];
    t.spec.baseline.alpha = s.values[1];
    for (int j = 0; j < J; ++j) {
      t.spec.groups[j].prior.theta = s.values[2 + 2 * j];
      t.spec.groups[j].prior.alpha = s.values[3 + 2 * j];
    }
    t.data = data;
    t.X = s.X;
    validate(t);
    out.push_back(std::move(t));
  }
  return out;
}

std::string format_real(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw NumericError("format_real failed");
  return std::string(buf, p);
}

std::string chains_csv(const ChainSummary& s) {
  std::string out = "iteration,chain";
  for (const std::string& n : s.names) out += "," + n;
  out += ",loglik\n";
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const ChainSamples& ch = s.chains[c];
    for (std::size_t t = 0; t < ch.iteration.size(); ++t) {
      out += std::to_string(ch.iteration[t]) + "," + std::to_string(c);
      for (const auto& v : ch.values) out += "," + format_real(v[t]);
      out += "," + format_real(ch.loglik[t]) + "\n";
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    out.push_back(line.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw IoError("chains CSV: bad number '" + s + "' on line " + std::to_string(line));
  return v;
}

}  // namespace

ChainTable parse_chains_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t ln = 0;
  ChainTable t;
  if (!std::getline(in, line)) throw IoError("chains CSV: empty file");
  ++ln;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> head = split_csv_line(line);
  if (head.size() < 4 || head[0] != "iteration" || head[1] != "chain" || head.back() != "loglik")
    throw IoError("chains CSV: header must be iteration,chain,<parameters...>,loglik");
  t.names.assign(head.begin() + 2, head.end() - 1);
  const std::size_t P = t.names.size();
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != head.size())
      throw IoError("chains CSV: line " + std::to_string(ln) + " has " + std::to_string(f.size()) + " fields, expected " +
                    std::to_string(head.size()));
    const long it = parse_number<long>(f[0], ln);
    const long c = parse_number<long>(f[1], ln);
    if (c < 0 || c > static_cast<long>(t.iteration.size()) || c + 1 < static_cast<long>(t.iteration.size()))
      throw IoError("chains CSV: chain ids must appear in order 0, 1, ... (line " + std::to_string(ln) + ")");
    if (c == static_cast<long>(t.iteration.size())) {
      t.iteration.emplace_back();
      t.values.emplace_back(P);
      t.loglik.emplace_back();
    }
    t.iteration[c].push_back(it);
    for (std::size_t p = 0; p < P; ++p) t.values[c][p].push_back(parse_number<double>(f[2 + p], ln));
    t.loglik[c].push_back(parse_number<double>(f.back(), ln));
  }
  if (t.iteration.empty()) throw IoError("chains CSV: no data rows");
  return t;
}

std::string to_json(const TestSet& t) {
  json o;
  o["model"] = model_name(t.model);
  json docs = json::array();
  for (std::size_t i = 0; i < t.docs.size(); ++i) {
    json d;
    if (i < t.labels.size()) d["group"] = t.labels[i];
    d["counts"] = t.docs[i].counts;
    d["new_counts"] = t.docs[i].new_counts;
    docs.push_back(d);
  }
  o["docs"] = docs;
  return o.dump(1) + "\n";
}

TestSet parse_test_set(const std::string& text) {
  json o = parse_json(text, "test set");
  allow_keys(o, {"model", "docs"}, "test set");
  TestSet t;
  t.model = model_of(o, "test set");
  const json& docs = field(o, "docs", "");
  require(docs.is_array(), "docs must be an array");
  bool labelled = true;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string w = "docs[" + std::to_string(i) + "]";
    allow_keys(docs[i], {"group", "counts", "new_counts"}, w);
    TestDoc d;
    d.counts = int_vector(field(docs[i], "counts", w), w + ".counts");
    d.new_counts = docs[i].contains("new_counts") ? int_vector(docs[i].at("new_counts"), w + ".new_counts")
                                                  : std::vector<long>{};
    if (docs[i].contains("group")) {
      t.labels.push_back(static_cast<int>(get_int(docs[i], "group", w)));
    } else {
      labelled = false;
    }
    t.docs.push_back(std::move(d));
  }
  if (!labelled) t.labels.clear();
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  out.close();
  if (!out) throw IoError("error writing " + path);
}

}  // namespace hibp
