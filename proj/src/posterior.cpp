#include "hibp/posterior.hpp"

#include "hibp/errors.hpp"

namespace hibp {

namespace {

JumpLaw gamma_law(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw NumericError("posterior: non-positive Gamma parameter");
  return JumpLaw{JumpLaw::Kind::Gamma, shape, rate};
}

// Posterior law of a slab jump carrying total m (n occurrences summed).
JumpLaw slab_law(const GroupSpec& g, long m, long n) {
  if (g.slab.is_poisson())
    return gamma_law(static_cast<double>(m) - g.prior.alpha * static_cast<double>(n),
                     g.slab.beta * static_cast<double>(g.M) + g.prior.zeta);
  require(n == 1, "posterior: Bernoulli slabs need occurrence-level totals");
  const double M = static_cast<double>(g.M), x = static_cast<double>(m);
  return JumpLaw{JumpLaw::Kind::Beta, x - g.slab.alpha_b, M - x + g.slab.beta_b + g.slab.alpha_b};
}

GGParams tilt(const GGParams& p, double by) { return GGParams{p.alpha, p.zeta + by, p.theta}; }

}  // namespace

double JumpLaw::mean() const { return kind == Kind::Gamma ? a / b : a / (a + b); }

double JumpLaw::sample(RngStream& rng) const { return kind == Kind::Gamma ? rng.gamma(a) / b : rng.beta(a, b); }

PosteriorHibp posterior_hibp(const HibpSpec& spec, const AggregatedData& data, const CountMatrix& X,
                             const std::vector<CountMatrix>* occurrence_totals) {
  validate(data, spec);
  const int J = spec.J();
  const long r = data.r();
  require(static_cast<int>(X.size()) == J, "posterior: X must have one row per group");
  HibpRates rates = hibp_rates(spec);
  PosteriorHibp post;
  post.tilted_baseline = tilt(spec.baseline, rates.kappa);
  for (const auto& g : spec.groups)
    post.tilted_groups.push_back(g.slab.is_poisson() ? tilt(g.prior, g.slab.beta * static_cast<double>(g.M)) : g.prior);
  post.group_jump_laws.assign(J, std::vector<std::vector<JumpLaw>>(r));
  post.aggregated_slabs = occurrence_totals == nullptr;
  for (long k = 0; k < r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) {
      require(static_cast<long>(X[j].size()) == r, "posterior: X row length differs from r");
      const long n = X[j][k], m = data.m[j][k];
      require(n >= 0 && (n == 0 ? m == 0 : m >= n), "posterior: latent counts outside the support of the data");
      nk += n;
      if (n == 0) continue;
      const GroupSpec& g = spec.groups[j];
      auto& laws = post.group_jump_laws[j][k];
      if (occurrence_totals != nullptr) {
        const auto& tot = occurrence_totals->at(j).at(k);
        require(static_cast<long>(tot.size()) == n, "posterior: occurrence totals differ in number from X");
        for (long a : tot) laws.push_back(slab_law(g, a, 1));
      } else {
        require(g.slab.is_poisson(), "posterior: Bernoulli slabs need occurrence-level totals");
        laws.push_back(slab_law(g, m, n));
      }
    }
    require(nk >= 1, "posterior: feature with no occurrences");
    post.fixed_jumps.push_back(gamma_law(static_cast<double>(nk) - spec.baseline.alpha, post.tilted_baseline.zeta));
  }
  return post;
}

PosteriorHibp posterior_hibp(const HibpSpec& spec, const HibpDraw& draw) {
  check_draw(spec, draw);
  AggregatedData data = aggregate(draw, spec);
  if (!draw.has_occurrences) return posterior_hibp(spec, data, draw.X);
  std::vector<CountMatrix> tot(spec.J(), CountMatrix(draw.r));
  for (int j = 0; j < spec.J(); ++j)
    for (long k = 0; k < draw.r; ++k)
      for (const auto& a : draw.occurrences[j][k]) {
        long s = 0;
        for (long x : a) s += x;
        tot[j][k].push_back(s);
      }
  return posterior_hibp(spec, data, draw.X, &tot);
}

PosteriorHhibp posterior_hhibp(const HhibpSpec& spec, const HhibpDraw& draw) {
  check_draw(spec, draw);
  HhibpTilts tilts = hhibp_tilts(spec);
  const int J = spec.J();
  PosteriorHhibp post;
  post.tilted_baseline = GGParams{spec.baseline.alpha, tilts.zeta0, spec.baseline.theta};
  for (int j = 0; j < J; ++j) {
    const GGParams& c = spec.categories[j];
    post.tilted_categories.push_back(GGParams{c.alpha, tilts.zeta_cat[j], c.theta});
  }
  post.category_jumps.assign(J, std::vector<std::vector<JumpLaw>>(draw.r));
  post.subgroup_jump_laws.resize(J);
  for (int j = 0; j < J; ++j) post.subgroup_jump_laws[j].assign(spec.subgroups[j].size(), std::vector<std::vector<JumpLaw>>(draw.r));
  for (long k = 0; k < draw.r; ++k) {
    long nk = 0;
    for (int j = 0; j < J; ++j) {
      nk += draw.Xhat[j][k];
      for (const auto& row : draw.C[j][k]) {
        long c = 0;
        for (long x : row) c += x;
        post.category_jumps[j][k].push_back(gamma_law(static_cast<double>(c) - spec.categories[j].alpha, tilts.zeta_cat[j]));
      }
      for (std::size_t d = 0; d < spec.subgroups[j].size(); ++d) {
        const GroupSpec& g = spec.subgroups[j][d];
        const long n = draw.Nhat[j][d][k];
        if (n == 0) continue;
        auto& laws = post.subgroup_jump_laws[j][d][k];
        if (draw.has_occurrences) {
          for (const auto& a : draw.occurrences[j][d][k]) {
            long s = 0;
            for (long x : a) s += x;
            laws.push_back(slab_law(g, s, 1));
          }
        } else {
          require(g.slab.is_poisson(), "posterior: Bernoulli slabs need occurrence-level slab vectors");
          laws.push_back(slab_law(g, draw.agg[j][d][k], n));
        }
      }
    }
    post.fixed_jumps.push_back(gamma_law(static_cast<double>(nk) - spec.baseline.alpha, tilts.zeta0));
  }
  return post;
}

HibpJumps sample_posterior_jumps(const PosteriorHibp& post, RngStream& rng) {
  HibpJumps out;
  for (const auto& law : post.fixed_jumps) out.baseline.push_back(law.sample(rng));
  out.slab.resize(post.group_jump_laws.size());
  for (std::size_t j = 0; j < post.group_jump_laws.size(); ++j)
    for (const auto& laws : post.group_jump_laws[j]) {
      std::vector<double> v;
      for (const auto& law : laws) v.push_back(law.sample(rng));
      out.slab[j].push_back(std::move(v));
    }
  return out;
}

HhibpJumps sample_posterior_jumps(const PosteriorHhibp& post, RngStream& rng) {
  HhibpJumps out;
  for (const auto& law : post.fixed_jumps) out.baseline.push_back(law.sample(rng));
  out.category.resize(post.category_jumps.size());
  for (std::size_t j = 0; j < post.category_jumps.size(); ++j)
    for (const auto& laws : post.category_jumps[j]) {
      std::vector<double> v;
      for (const auto& law : laws) v.push_back(law.sample(rng));
      out.category[j].push_back(std::move(v));
    }
  out.slab.resize(post.subgroup_jump_laws.size());
  for (std::size_t j = 0; j < post.subgroup_jump_laws.size(); ++j) {
    out.slab[j].resize(post.subgroup_jump_laws[j].size());
    for (std::size_t d = 0; d < post.subgroup_jump_laws[j].size(); ++d)
      for (const auto& laws : post.subgroup_jump_laws[j][d]) {
        std::vector<double> v;
        for (const auto& law : laws) v.push_back(law.sample(rng));
        out.slab[j][d].push_back(std::move(v));
      }
  }
  return out;
}

}  // namespace hibp
