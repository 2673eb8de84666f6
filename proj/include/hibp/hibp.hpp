#ifndef HIBP_HIBP_HPP
#define HIBP_HIBP_HPP

#include <cstdint>
#include <vector>

#include "hibp/countdists.hpp"
#include "hibp/ggmath.hpp"
#include "hibp/rng.hpp"

namespace hibp {

using CountMatrix = std::vector<std::vector<long>>;

// One bottom-level group: its prior (GG, used with Poisson slabs), its slab
// law and its number of documents.
struct GroupSpec {
  GGParams prior;
  SlabSpec slab;
  long M = 0;
};

struct HibpSpec {
  GGParams baseline;
  double gamma0 = 1.0;
  std::vector<GroupSpec> groups;
  int J() const { return static_cast<int>(groups.size()); }
};

void validate(const GroupSpec& g, const std::string& where);
void validate(const HibpSpec& spec);

struct HibpRates {
  std::vector<double> psi;  // psi_j(M_j)
  double kappa = 0.0;       // sum_j psi_j
  double phi = 0.0;         // gamma0 theta0 Psi_{alpha,zeta}(kappa)
};

HibpRates hibp_rates(const HibpSpec& spec);

// A realization of the two-level process. X[j][k] counts the occurrences of
// feature k in group j; agg[j][k] sums their slab values over documents and
// doc_totals[j][k][i] is the per-document split. Occurrence-level slab
// vectors occurrences[j][k][l][i] are kept only on request.
struct HibpDraw {
  long r = 0;
  std::vector<std::uint64_t> labels;
  CountMatrix X;
  CountMatrix agg;
  std::vector<CountMatrix> doc_totals;
  bool has_occurrences = false;
  std::vector<std::vector<CountMatrix>> occurrences;
};

// Observed group-aggregated counts m[j][k] for r features.
struct AggregatedData {
  std::vector<long> M;
  CountMatrix m;
  long r() const { return m.empty() ? 0 : static_cast<long>(m[0].size()); }
  int J() const { return static_cast<int>(m.size()); }
};

AggregatedData aggregate(const HibpDraw& draw, const HibpSpec& spec);
void validate(const AggregatedData& data, const HibpSpec& spec);

HibpDraw sample_hibp(const HibpSpec& spec, RngStream& rng, bool keep_occurrences = false);

std::vector<long> sample_slab_vector(const GroupSpec& group, RngStream& rng);

// Per-document sum of n independent slab vectors. Cheaper than n calls to
// sample_slab_vector for Poisson slabs; the draw sequence differs.
std::vector<long> sample_slab_sum(const GroupSpec& group, long n, RngStream& rng);

// log probability of one occurrence's per-document slab vector.
double slab_vector_log_pmf(const GroupSpec& group, const std::vector<long>& a);

// log P(slab total = m) for one occurrence.
double slab_total_log_pmf(const GroupSpec& group, long m);

// log P(sum of n occurrence totals = m); n = 0 is the point mass at 0.
// For Poisson slabs `table` must be built with the group's alpha (or null).
double slab_sum_log_pmf(const GroupSpec& group, long m, long n, const StirlingTable* table = nullptr);

// Success probability of the truncated NB law of an occurrence total,
// beta M / (beta M + zeta) for a Poisson slab.
double slab_tnb_p(const GroupSpec& group);

// Log density of (r, X, occurrence slab vectors). The 1/r! and label
// factors G0(dy_k) are dropped, i.e. this is the density of an ordered
// list of labelled columns; summing exp(.)/r! over all draws gives 1.
double log_marginal_full(const HibpSpec& spec, const HibpDraw& draw);

// Same convention for (r, X, aggregated counts m). Impossible
// configurations return -inf.
double log_marginal_aggregated(const HibpSpec& spec, const AggregatedData& data, const CountMatrix& X);

void check_draw(const HibpSpec& spec, const HibpDraw& draw);

// Realized posterior jump sizes at the observed features: baseline[k] for
// the baseline atom and slab[j][k] for the group-level slab jumps (one per
// occurrence, or a single summed jump when only aggregates are known).
struct HibpJumps {
  std::vector<double> baseline;
  std::vector<std::vector<std::vector<double>>> slab;
};

}  // namespace hibp

#endif  // HIBP_HIBP_HPP
