#ifndef HIBP_INFERENCE_HPP
#define HIBP_INFERENCE_HPP

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hibp/hibp.hpp"

namespace hibp {

// Lower end of the alpha range reached by the transform
//   alpha = kAlphaMin + (1 - kAlphaMin) sigmoid(u).
inline constexpr double kAlphaMin = -5.0;

double alpha_from_u(double u);
double u_from_alpha(double alpha);
// log d alpha / d u
double alpha_log_jacobian(double u);

// Unconstrained coordinates (log theta0, u(alpha), log theta_1, u(alpha_1), ...).
std::vector<double> to_unconstrained(const HibpSpec& spec);
// Replace theta/alpha of `tmpl` by the values encoded in `u`; zeta, beta
// and M are kept.
HibpSpec from_unconstrained(const HibpSpec& tmpl, const std::vector<double>& u);

// Parameter names in the order of to_unconstrained.
std::vector<std::string> hyper_names(int J);
// Natural-scale values in the same order.
std::vector<double> hyper_values(const HibpSpec& spec);

struct McmcOptions {
  long iters = 1000;
  long burnin = 500;
  long thin = 1;
  int chains = 3;
  int threads = 1;
  double target_accept = 0.3;
  double init_step = 0.1;    // initial proposal scale on the unconstrained axes
  double init_jitter = 0.0;  // sd of per-chain dispersion of the start
  double log_theta_sd = 3.0;  // normal prior sd on every log theta; 0 = flat
  bool joint_block = true;    // extra adaptive move over all hypers per iteration
  long latent_every = 0;      // keep X at every latent_every-th retained sample; 0 = never
  bool sample_hypers = true;
};

void validate(const McmcOptions& opts);

// Latent counts n_jk = 1 wherever m_jk > 0.
CountMatrix init_latents_ones(const AggregatedData& data);

// Gibbs/MH state of one chain of the GG-GG-Poisson model. Hypers live on
// the unconstrained scale. Priors: log theta ~ N(0, log_theta_sd^2), or
// flat when the sd is 0, and alpha uniform on (kAlphaMin, 1), so the alpha
// Jacobian enters the target.
//
// With a flat log-theta prior the posterior is improper: the likelihood
// tends to a constant along theta0 c^-alpha, theta_j c as c grows.
class ChainState {
 public:
  ChainState(const HibpSpec& spec, const AggregatedData& data, CountMatrix X, RngStream rng,
             double log_theta_sd = 3.0, bool joint_block = true);

  const HibpSpec& spec() const { return spec_; }
  const AggregatedData& data() const { return data_; }
  const CountMatrix& X() const { return X_; }
  const std::vector<double>& u() const { return u_; }
  double loglik() const { return loglik_; }
  long iteration() const { return iteration_; }
  RngStream& rng() { return rng_; }

  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  // Block 0 is (theta0, alpha), block j+1 is (theta_j, alpha_j); the
  // optional block J+1 moves all coordinates together.
  double acceptance_rate(int block) const;
  // Current proposal sd per unconstrained coordinate in the per-group blocks.
  std::vector<double> step_sizes() const;

  // Log posterior on the unconstrained scale at the current X, up to a constant.
  double log_target(const std::vector<double>& u) const;
  double log_prior(const std::vector<double>& u) const;
  // log of the MH ratio for a symmetric move u -> v at the current X.
  double log_accept_ratio(const std::vector<double>& u, const std::vector<double>& v) const;

  // Normalized log P(X_jk = n | rest) for n = 1..m_jk.
  std::vector<double> gibbs_log_probs(int j, long k) const;

  void gibbs_sweep();
  void mh_step(bool adapt);
  void step(bool adapt, bool sample_hypers = true);

  void set_step_scale(double s);
  void set_target_accept(double a);
  void reset_counters();

 private:
  struct Block {
    std::vector<int> coords;
    std::vector<double> chol;  // lower-triangular d x d, row major
    double log_scale = 0.0;
    long proposed = 0, accepted = 0;
    long seen = 0;
    bool learned = false;
    std::vector<double> mean, m2;  // running mean and d x d scatter
  };
  struct Eval {
    double loglik = kNegInf;
    double sum_lg = 0.0;
    std::vector<double> psi, sum_ls;
  };

  void refresh();
  void ensure_full_table(int j);
  double base_term(double theta0, double alpha, double kappa, double sum_lg) const;
  double group_term(int j, double theta, double alpha, double sum_ls) const;
  double psi_j(int j, double theta, double alpha) const;
  double sum_log_s(int j, double alpha) const;
  double sum_lgamma_nk(double alpha) const;
  // Likelihood at v reusing cached pieces for coordinates equal to u_.
  Eval evaluate(const std::vector<double>& v) const;
  void adapt_block(Block& b, bool accepted);

  HibpSpec spec_;
  AggregatedData data_;
  CountMatrix X_;
  RngStream rng_;
  std::vector<double> u_;
  long iteration_ = 0;
  double loglik_ = 0.0;
  double target_ = 0.3;
  double log_theta_sd_ = 3.0;

  std::vector<long> nk_;
  long N_ = 0;
  std::vector<long> Nj_, Mj_;
  std::vector<double> lfact_j_;  // sum_k lgamma(m_jk + 1)
  std::vector<double> psi_;      // psi_j(M_j)
  std::vector<double> sum_ls_;   // sum_k log S_{alpha_j}(m_jk, n_jk)
  double sum_lg_ = 0.0;          // sum_k lgamma(n_k - alpha)
  std::vector<std::vector<int>> rows_;  // distinct positive m_jk per group
  std::vector<int> m_max_;
  std::vector<std::shared_ptr<const StirlingTable>> full_;
  std::vector<Block> blocks_;
  std::vector<double> buf_;
};

// Free-function spellings of the chain updates.
void gibbs_sweep_X(ChainState& state);
void mh_step_hypers(ChainState& state, bool adapt);

struct ChainSamples {
  std::vector<long> iteration;
  std::vector<std::vector<double>> values;  // [param][t], natural scale
  std::vector<double> loglik;
  std::vector<double> acceptance;  // per block
  std::vector<double> step_sizes;  // per unconstrained coordinate, final
  std::vector<std::size_t> latent_index;  // positions in `iteration` with a stored X
  std::vector<CountMatrix> latents;
};

struct ChainSummary {
  std::vector<std::string> names;
  std::vector<ChainSamples> chains;
  std::vector<std::optional<double>> rhat;  // per parameter; empty when undefined
};

// Runs opts.chains independent chains; chain c uses rng.substream(c) and
// starts at `start` dispersed by opts.init_jitter on the unconstrained
// scale. Retained iterations are burnin < i <= iters with (i - burnin) a
// multiple of thin; when none qualify the final state is kept.
ChainSummary run_chains(const HibpSpec& start, const AggregatedData& data, const McmcOptions& opts,
                        const RngStream& rng, const CountMatrix* X0 = nullptr);

// Classic split R-hat: each chain is cut in half and the halves are
// compared by between/within variance.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

// Linear-interpolation sample quantile, p in [0, 1].
double quantile(std::vector<double> v, double p);

}  // namespace hibp

#endif  // HIBP_INFERENCE_HPP
