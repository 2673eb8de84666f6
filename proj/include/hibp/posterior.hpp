#ifndef HIBP_POSTERIOR_HPP
#define HIBP_POSTERIOR_HPP

#include <vector>

#include "hibp/hhibp.hpp"
#include "hibp/hibp.hpp"

namespace hibp {

// Law of one posterior jump: Gamma(shape a, rate b) or Beta(a, b).
struct JumpLaw {
  enum class Kind { Gamma, Beta };
  Kind kind = Kind::Gamma;
  double a = 1.0;
  double b = 1.0;
  double mean() const;
  double sample(RngStream& rng) const;
};

// Posterior of the baseline and group processes given the latents. The
// continuous parts stay GG with tilted zeta and are kept as parameters only.
struct PosteriorHibp {
  GGParams tilted_baseline;                // zeta_J = zeta + kappa
  std::vector<GGParams> tilted_groups;     // zeta_j + beta_j M_j for Poisson slabs
  std::vector<JumpLaw> fixed_jumps;        // per feature, Gamma(n_k - alpha, zeta_J)
  // [j][k]: one law per occurrence, or a single law for the summed slab jump
  // when only aggregated counts are known (Poisson slabs).
  std::vector<std::vector<std::vector<JumpLaw>>> group_jump_laws;
  bool aggregated_slabs = false;
};

PosteriorHibp posterior_hibp(const HibpSpec& spec, const HibpDraw& draw);

// Data with latent occurrence counts X. Bernoulli groups need per-occurrence
// totals occurrence_totals[j][k][l].
PosteriorHibp posterior_hibp(const HibpSpec& spec, const AggregatedData& data, const CountMatrix& X,
                             const std::vector<CountMatrix>* occurrence_totals = nullptr);

struct PosteriorHhibp {
  GGParams tilted_baseline;                       // zeta_{0,J}
  std::vector<GGParams> tilted_categories;        // zeta_{j,D_j}
  std::vector<JumpLaw> fixed_jumps;               // L_k
  std::vector<std::vector<std::vector<JumpLaw>>> category_jumps;  // [j][k][l] L_{j,k,l}
  // [j][d][k]: per occurrence, or one summed law for Poisson aggregates.
  std::vector<std::vector<std::vector<std::vector<JumpLaw>>>> subgroup_jump_laws;
};

PosteriorHhibp posterior_hhibp(const HhibpSpec& spec, const HhibpDraw& draw);

HibpJumps sample_posterior_jumps(const PosteriorHibp& post, RngStream& rng);
HhibpJumps sample_posterior_jumps(const PosteriorHhibp& post, RngStream& rng);

}  // namespace hibp

#endif  // HIBP_POSTERIOR_HPP
