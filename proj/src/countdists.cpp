#include "hibp/countdists.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "hibp/errors.hpp"

namespace hibp {

double MtPParams::kappa() const {
  double s = 0.0;
  for (double k : kappas) s += k;
  return s;
}

void validate(const MtPParams& p) {
  validate(p.mixing, "MtP mixing");
  require(!p.kappas.empty(), "MtP: kappas must be non-empty");
  for (double k : p.kappas) require(k >= 0.0 && std::isfinite(k), "MtP: kappas must be finite and >= 0");
  require(p.kappa() > 0.0, "MtP: at least one kappa must be positive");
}

double mtp_univariate_log_pmf(long m, double kappa, const GGParams& mixing) {
  validate(mixing, "MtP mixing");
  require(kappa > 0.0 && std::isfinite(kappa), "MtP: kappa must be positive");
  if (m < 1) throw ValidationError("MtP: support starts at 1");
  const double a = mixing.alpha;
  const double z = mixing.zeta;
  const double dm = static_cast<double>(m);
  const double lk = std::log(kappa);
  const double lkz = std::log(kappa + z);
  const double psi = laplace_exponent(a, z, kappa);
  if (a > 0.0) {
    // kappa^m (kappa+zeta)^(alpha-m) / ((kappa+zeta)^alpha - zeta^alpha)
    //   * alpha Gamma(m-alpha) / (m! Gamma(1-alpha))
    return dm * lk + (a - dm) * lkz - std::log(a * psi) + std::log(a) + lgam(dm - a) - lgam(dm + 1.0) -
           lgam(1.0 - a);
  }
  if (a == 0.0) {
    // kappa^m (kappa+zeta)^(-m) / (m log(1 + kappa/zeta))
    return dm * (lk - lkz) - std::log(dm) - std::log(psi);
  }
  // alpha = -delta: kappa^m (kappa+zeta)^(-(delta+m)) / (zeta^-delta - (kappa+zeta)^-delta)
  //   * Gamma(m+delta) / (m! Gamma(delta))
  const double d = -a;
  return dm * lk - (d + dm) * lkz - std::log(d * psi) + lgam(dm + d) - lgam(dm + 1.0) - lgam(d);
}

double mtp_log_pmf(const MtPParams& p, const std::vector<long>& m) {
  validate(p);
  require(m.size() == p.kappas.size(), "MtP: count vector has wrong length");
  long total = 0;
  for (long x : m) {
    require(x >= 0, "MtP: counts must be >= 0");
    total += x;
  }
  if (total < 1) throw ValidationError("MtP: all-zero count vector is outside the support");
  const double kappa = p.kappa();
  double lp = log_factorial(total);
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (m[j] == 0) continue;
    if (p.kappas[j] == 0.0) return kNegInf;
    lp += static_cast<double>(m[j]) * std::log(p.kappas[j] / kappa) - log_factorial(m[j]);
  }
  return lp + mtp_univariate_log_pmf(total, kappa, p.mixing);
}

double sample_h0_u(double kappa, const GGParams& mixing, RngStream& rng) {
  const double a = mixing.alpha;
  const double z = mixing.zeta;
  const double v = rng.uniform();
  double lu;
  if (a == 0.0) {
    lu = -std::log(z + kappa) + v * std::log1p(kappa / z);
  } else if (z == 0.0) {
    lu = -std::log(kappa) - std::log1p(-v) / a;
  } else {
    const double l = -std::log1p(kappa / z);
    lu = -std::log(z + kappa) - std::log1p(v * std::expm1(a * l)) / a;
  }
  return std::exp(lu);
}

double sample_h0(double kappa, const GGParams& mixing, RngStream& rng) {
  validate(mixing, "H0 mixing");
  require(kappa > 0.0, "H0: kappa must be positive");
  double g = rng.gamma(1.0 - mixing.alpha);
  return g * sample_h0_u(kappa, mixing, rng);
}

double sample_h0(const MtPParams& p, RngStream& rng) { return sample_h0(p.kappa(), p.mixing, rng); }

long mtp_sample_total(double kappa, const GGParams& mixing, RngStream& rng) {
  double h = sample_h0(kappa, mixing, rng);
  return tpoisson_sample(h * kappa, rng);
}

std::vector<long> mtp_sample(const MtPParams& p, RngStream& rng) {
  validate(p);
  long total = mtp_sample_total(p.kappa(), p.mixing, rng);
  if (p.kappas.size() == 1) return {total};
  return rng.multinomial(total, p.kappas);
}

double tpoisson_log_pmf(long m, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "tPoisson: lambda must be positive");
  if (m < 1) return kNegInf;
  return static_cast<double>(m) * std::log(lambda) - lambda - log_factorial(m) - std::log(-std::expm1(-lambda));
}

long tpoisson_sample(double lambda, RngStream& rng) {
  require(lambda > 0.0 && std::isfinite(lambda), "tPoisson: lambda must be positive");
  if (lambda > 30.0) {
    for (;;) {
      long x = rng.poisson(lambda);
      if (x > 0) return x;
    }
  }
  // Sequential inverse CDF over {1, 2, ...}.
  double p = std::exp(-lambda) * lambda / -std::expm1(-lambda);
  double u = rng.uniform();
  double cum = p;
  long m = 1;
  while (u > cum) {
    ++m;
    p *= lambda / static_cast<double>(m);
    if (p <= 0.0) break;
    cum += p;
  }
  return m;
}

double poisson_log_pmf(long k, double mean) {
  if (k < 0) return kNegInf;
  if (mean == 0.0) return k == 0 ? 0.0 : kNegInf;
  return static_cast<double>(k) * std::log(mean) - mean - log_factorial(k);
}

double nb_log_pmf(long x, double r, double q) {
  require(r > 0.0 && q >= 0.0 && q < 1.0, "NB: need r > 0 and q in [0,1)");
  if (x < 0) return kNegInf;
  if (q == 0.0) return x == 0 ? 0.0 : kNegInf;
  const double dx = static_cast<double>(x);
  return lgam(dx + r) - lgam(r) - lgam(dx + 1.0) + dx * std::log(q) + r * std::log1p(-q);
}

namespace {

void check_tnb(double alpha, double p) {
  require(std::isfinite(alpha) && alpha < 1.0, "truncated NB: alpha must be < 1");
  require(p > 0.0 && p <= 1.0, "truncated NB: p must lie in (0,1]");
  require(p < 1.0 || alpha > 0.0, "truncated NB: p = 1 requires alpha > 0");
}

}  // namespace

double trunc_nb_log_pmf(long m, double alpha, double p) {
  check_tnb(alpha, p);
  if (m < 1) throw ValidationError("truncated NB: support starts at 1");
  const double dm = static_cast<double>(m);
  return lgam(dm - alpha) - lgam(1.0 - alpha) - lgam(dm + 1.0) + dm * std::log(p) - log_tnb_norm(alpha, p);
}

TruncNbSampler::TruncNbSampler(double alpha, double p) : alpha_(alpha), p_(p), pmf1_(0.0), inverse_(false) {
  check_tnb(alpha, p);
  if (p == 1.0) return;
  const double log_norm = log_tnb_norm(alpha, p);
  // mean = p (1-p)^(alpha-1) alpha / (1 - (1-p)^alpha)
  const double mean = std::exp(std::log(p) + (alpha - 1.0) * std::log1p(-p) - log_norm);
  inverse_ = mean <= 64.0;
  pmf1_ = std::exp(std::log(p) - log_norm);
}

long TruncNbSampler::operator()(RngStream& rng) const {
  if (inverse_) {
    const double u = rng.uniform();
    double pmf = pmf1_;
    double cum = pmf;
    long m = 1;
    while (u > cum && pmf > 1e-300) {
      const double dm = static_cast<double>(m);
      pmf *= (dm - alpha_) / (dm + 1.0) * p_;
      cum += pmf;
      ++m;
    }
    if (u <= cum) return m;
  }
  // kappa / (kappa + 1) = p with zeta = 1; zeta = 0 when p = 1.
  if (p_ < 1.0) return mtp_sample_total(p_ / (1.0 - p_), GGParams{alpha_, 1.0, 1.0}, rng);
  return mtp_sample_total(1.0, GGParams{alpha_, 0.0, 1.0}, rng);
}

long trunc_nb_sample(double alpha, double p, RngStream& rng) { return TruncNbSampler(alpha, p)(rng); }

double sum_trunc_nb_log_pmf(long m, long n, double alpha, double p, const StirlingTable* table) {
  check_tnb(alpha, p);
  require(n >= 1, "sum of truncated NB: n must be >= 1");
  if (m < n) return kNegInf;
  double ls;
  if (table != nullptr) {
    ls = table->log_s(static_cast<int>(m), static_cast<int>(n));
  } else {
    StirlingTable t(alpha, static_cast<int>(m), static_cast<int>(n), {static_cast<int>(m)});
    ls = t.log_s(static_cast<int>(m), static_cast<int>(n));
  }
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  return dm * std::log(p) - dn * log_tnb_norm(alpha, p) + lgam(dn + 1.0) + ls - lgam(dm + 1.0);
}

namespace {

void check_sb(long M, double alpha_b, double beta_b) {
  require(M >= 1, "stable-beta law: M must be >= 1");
  validate(SlabSpec::bernoulli(alpha_b, beta_b, 1.0), "stable-beta law");
}

double gzp_log_weight(long m, double beta, double alpha) {
  return lgam(beta + alpha + static_cast<double>(m) - 1.0) - lgam(beta + static_cast<double>(m));
}

double gzp_log_norm(long M, double beta, double alpha) {
  std::vector<double> w(static_cast<std::size_t>(M));
  for (long k = 1; k <= M; ++k) w[k - 1] = gzp_log_weight(k, beta, alpha);
  return log_sum_exp(w);
}

}  // namespace

double gzp_log_pmf(long m, long M, double beta, double alpha) {
  check_sb(M, alpha, beta);
  if (m < 1 || m > M) throw ValidationError("GZP: m must lie in [1, M]");
  return gzp_log_weight(m, beta, alpha) - gzp_log_norm(M, beta, alpha);
}

long gzp_sample(long M, double beta, double alpha, RngStream& rng) {
  check_sb(M, alpha, beta);
  std::vector<double> w(static_cast<std::size_t>(M));
  for (long k = 1; k <= M; ++k) w[k - 1] = gzp_log_weight(k, beta, alpha);
  return static_cast<long>(rng.categorical_log(w)) + 1;
}

double trbinom_sb_log_pmf(long m, long M, double alpha_b, double beta_b) {
  check_sb(M, alpha_b, beta_b);
  if (m < 1 || m > M) return kNegInf;
  const double dm = static_cast<double>(m);
  const double dM = static_cast<double>(M);
  return log_binomial(M, m) + lgam(dm - alpha_b) + lgam(dM - dm + beta_b + alpha_b) - lgam(1.0 - alpha_b) -
         lgam(dM + beta_b) - gzp_log_norm(M, beta_b, alpha_b);
}

long tbinomial_sample(long M, double p, RngStream& rng) {
  require(M >= 1 && p > 0.0 && p <= 1.0, "zero-truncated binomial: need M >= 1 and p in (0,1]");
  const double log_q = std::log1p(-p);
  const double p0 = std::exp(static_cast<double>(M) * log_q);
  if (p0 < 0.5) {
    for (;;) {
      long x = rng.binomial(M, p);
      if (x > 0) return x;
    }
  }
  // Inverse CDF over [1, M]; mass near 1 dominates here.
  const double norm = -std::expm1(static_cast<double>(M) * log_q);
  const double u = rng.uniform() * norm;
  double cum = 0.0;
  for (long m = 1; m <= M; ++m) {
    cum += std::exp(log_binomial(M, m) + static_cast<double>(m) * std::log(p) +
                    static_cast<double>(M - m) * log_q);
    if (u < cum) return m;
  }
  return 1;
}

long trbinom_sb_sample(long M, double alpha_b, double beta_b, RngStream& rng) {
  check_sb(M, alpha_b, beta_b);
  long z = gzp_sample(M, beta_b, alpha_b, rng);
  double p = rng.beta(1.0 - alpha_b, beta_b + alpha_b + static_cast<double>(z) - 1.0);
  if (p <= 0.0) p = std::numeric_limits<double>::min();
  return tbinomial_sample(M, p, rng);
}

}  // namespace hibp
