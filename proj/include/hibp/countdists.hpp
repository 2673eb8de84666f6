#ifndef HIBP_COUNTDISTS_HPP
#define HIBP_COUNTDISTS_HPP

#include <vector>

#include "hibp/ggmath.hpp"
#include "hibp/rng.hpp"

namespace hibp {

// Multivariate mixed zero-truncated Poisson: H0 from the size-biased GG
// density (1 - e^{-s kappa}) tau(s) / Psi(kappa), total ~ tPoisson(H0 kappa),
// split multinomially with pi_j = kappa_j / kappa. Only alpha and zeta of
// `mixing` are used.
struct MtPParams {
  std::vector<double> kappas;
  GGParams mixing;
  double kappa() const;
};

void validate(const MtPParams& p);

double mtp_univariate_log_pmf(long m, double kappa, const GGParams& mixing);
double mtp_log_pmf(const MtPParams& p, const std::vector<long>& m);
std::vector<long> mtp_sample(const MtPParams& p, RngStream& rng);
long mtp_sample_total(double kappa, const GGParams& mixing, RngStream& rng);

double sample_h0(double kappa, const GGParams& mixing, RngStream& rng);
double sample_h0(const MtPParams& p, RngStream& rng);
// The U factor of H0 = Gamma(1-alpha) * U, supported on (1/(zeta+kappa), 1/zeta).
double sample_h0_u(double kappa, const GGParams& mixing, RngStream& rng);

double tpoisson_log_pmf(long m, double lambda);
long tpoisson_sample(double lambda, RngStream& rng);

double poisson_log_pmf(long k, double mean);

// NB(x | r, q) = Gamma(x+r)/(x! Gamma(r)) q^x (1-q)^r.
double nb_log_pmf(long x, double r, double q);

// Zero-truncated negative binomial with index alpha < 1, p in (0,1]
// (p = 1 only for alpha > 0):
//   Gamma(m-alpha)/(m! Gamma(1-alpha)) p^m alpha / (1 - (1-p)^alpha).
double trunc_nb_log_pmf(long m, double alpha, double p);

// Draw from the truncated NB above: sequential inverse CDF when the mean is
// small, the mixed truncated Poisson construction otherwise.
long trunc_nb_sample(double alpha, double p, RngStream& rng);

// Same draw with the normalizer computed once, for repeated draws at fixed (alpha, p).
class TruncNbSampler {
 public:
  TruncNbSampler(double alpha, double p);
  long operator()(RngStream& rng) const;

 private:
  double alpha_, p_, pmf1_;
  bool inverse_;
};

// Law of the sum of n iid truncated negative binomials:
//   1{m>=n} p^m / (1-(1-p)^alpha)^n n! alpha^n S_alpha(m,n) / m!.
// Pass a table holding row m (and columns up to n) to avoid rebuilding it.
double sum_trunc_nb_log_pmf(long m, long n, double alpha, double p, const StirlingTable* table = nullptr);

// Zero-truncated Binomial mixed over a stable-beta tilted success rate.
double trbinom_sb_log_pmf(long m, long M, double alpha_b, double beta_b);
long trbinom_sb_sample(long M, double alpha_b, double beta_b, RngStream& rng);

// Generalized Zipf-Mandelbrot: P(m) proportional to Gamma(beta+alpha+m-1)/Gamma(beta+m), m in [M].
double gzp_log_pmf(long m, long M, double beta, double alpha);
long gzp_sample(long M, double beta, double alpha, RngStream& rng);

// Zero-truncated Binomial(M, p).
long tbinomial_sample(long M, double p, RngStream& rng);

}  // namespace hibp

#endif  // HIBP_COUNTDISTS_HPP
