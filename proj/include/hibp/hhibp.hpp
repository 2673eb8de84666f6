#ifndef HIBP_HHIBP_HPP
#define HIBP_HHIBP_HPP

#include <optional>
#include <vector>

#include "hibp/hibp.hpp"

namespace hibp {

using Count3 = std::vector<CountMatrix>;
using Count4 = std::vector<Count3>;

// Three-level hierarchy: baseline, categories j in [J] with GG priors, and
// subgroups d in [D_j] that emit documents through a slab law.
struct HhibpSpec {
  GGParams baseline;
  double gamma0 = 1.0;
  std::vector<GGParams> categories;
  std::vector<std::vector<GroupSpec>> subgroups;  // [j][d]
  int J() const { return static_cast<int>(categories.size()); }
};

void validate(const HhibpSpec& spec);

struct HhibpRates {
  std::vector<std::vector<double>> psi;  // [j][d] psi_{d,j}(M_{d,j})
  std::vector<double> psi_sum;           // [j] sum_d psi_{d,j}
  std::vector<double> cat_rate;          // [j] theta_j Psi_{alpha_j,zeta_j}(psi_sum_j)
  double kappa = 0.0;                    // sum_j cat_rate_j
  double phi = 0.0;                      // gamma0 theta0 Psi_{alpha,zeta}(kappa)
};

HhibpRates hhibp_rates(const HhibpSpec& spec);

// Exponential tilts of the baseline and category processes after observing
// the current documents.
struct HhibpTilts {
  double zeta0 = 0.0;               // zeta + sum_j cat_rate_j
  std::vector<double> zeta_cat;     // zeta_j + sum_d psi_{d,j}
};

HhibpTilts hhibp_tilts(const HhibpSpec& spec);

// Xhat[j][k]: category-level tables of feature k. C[j][k][l][d]: occurrences
// in subgroup d seated at table l. Nhat[j][d][k] = sum_l C[j][k][l][d].
// agg[j][d][k] sums slab values; doc_totals[j][d][k][i] splits them by
// document; occurrences[j][d][k][o][i] is kept on request.
struct HhibpDraw {
  long r = 0;
  std::vector<std::uint64_t> labels;
  CountMatrix Xhat;
  Count4 C;
  Count3 Nhat;
  Count3 agg;
  Count4 doc_totals;
  bool has_occurrences = false;
  std::vector<Count4> occurrences;
};

HhibpDraw sample_hhibp(const HhibpSpec& spec, RngStream& rng, bool keep_occurrences = false);

void check_draw(const HhibpSpec& spec, const HhibpDraw& draw);

// Log density of (r, Xhat, C, occurrence slab vectors), dropping 1/r! and
// the label factors exactly as log_marginal_full does.
double log_marginal_hhibp(const HhibpSpec& spec, const HhibpDraw& draw);

// Realized posterior jumps: baseline[k] = L_k, category[j][k][l] = L_{j,k,l},
// slab[j][d][k] per occurrence (or one summed jump for Poisson aggregates).
struct HhibpJumps {
  std::vector<double> baseline;
  std::vector<std::vector<std::vector<double>>> category;
  std::vector<std::vector<std::vector<std::vector<double>>>> slab;
};

// Where the next document goes. j == J opens a new category (d must be 0 and
// both new_category and new_subgroup are required); d == D_j opens a new
// subgroup of category j (new_subgroup required). New subgroups start with
// zero documents.
struct HhibpTarget {
  int j = 0;
  int d = 0;
  std::optional<GGParams> new_category;
  std::optional<GroupSpec> new_subgroup;
};

struct HhibpPrediction {
  double phi = 0.0;  // Poisson rate of brand-new features
  double t = 0.0;    // category-level rate theta_j Psi_{alpha_j, zeta_{j,D_j}}(gamma)
  double gamma = 0.0;
  double q = 0.0;    // NB success probability for new tables at observed features
  double q3 = 0.0;   // NB success probability for new occurrences at observed tables
  // Brand-new features: per feature, the number of new tables, occurrences
  // and the resulting count in the document.
  std::vector<long> new_tables, new_occurrences, new_counts;
  // Observed features k in [r].
  std::vector<long> revived_tables, revived_occurrences, revived_counts;
  std::vector<long> table_occurrences, table_counts;
  std::vector<long> repeat_counts;
  std::vector<long> counts;  // revived + table + repeat counts per observed feature
};

// Draw the next document of the target subgroup. Without jumps the
// observed-feature blocks use their negative binomial closed forms; with
// jumps they are drawn as Poisson mixtures given the realized values.
HhibpPrediction hhibp_predict_sample(const HhibpSpec& spec, const HhibpDraw& draw, const HhibpTarget& target,
                                     RngStream& rng, const HhibpJumps* jumps = nullptr);

}  // namespace hibp

#endif  // HIBP_HHIBP_HPP
