#ifndef HIBP_GGMATH_HPP
#define HIBP_GGMATH_HPP

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace hibp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Largest admissible stability index; alpha -> 1 degenerates.
inline constexpr double kAlphaMax = 1.0 - 1e-6;

// Generalized gamma Levy density theta / Gamma(1-alpha) s^(-alpha-1) e^(-zeta s).
// Valid when 0 < alpha < 1 and zeta >= 0, or alpha <= 0 and zeta > 0.
struct GGParams {
  double alpha = 0.0;
  double zeta = 1.0;
  double theta = 1.0;
};

struct SlabSpec {
  enum class Family { Poisson, Bernoulli };
  Family family = Family::Poisson;
  double beta = 1.0;     // Poisson rate multiplier
  double alpha_b = 0.0;  // stable-beta discount, in [0,1)
  double beta_b = 1.0;   // stable-beta concentration, > -alpha_b
  double theta_b = 1.0;  // stable-beta mass

  static SlabSpec poisson(double beta);
  static SlabSpec bernoulli(double alpha_b, double beta_b, double theta_b);
  bool is_poisson() const { return family == Family::Poisson; }
};

void validate(const GGParams& p, std::string_view where = "GGParams");
void validate(const SlabSpec& s, std::string_view where = "SlabSpec");
bool is_valid(const GGParams& p);

// Thread-safe log-gamma.
double lgam(double x);
double log_factorial(long n);
double log_binomial(long n, long k);
double log_add_exp(double a, double b);
double log_sum_exp(const std::vector<double>& v);

// Psi_{alpha,zeta}(t) = int_0^inf (1 - e^{-ts}) s^{-alpha-1} e^{-zeta s} ds / Gamma(1-alpha).
double laplace_exponent(double alpha, double zeta, double t);
double laplace_exponent(const GGParams& p, double t);

// Rate of distinct feature selections after M documents. For a Poisson slab
// the prior is GG; for a Bernoulli slab the stable-beta parameters live in
// the slab spec and `prior` is ignored.
double psi_rate(const GGParams& prior, const SlabSpec& slab, long M);

// psi_rate(M+1) - psi_rate(M), evaluated in closed form.
double gamma_increment(const GGParams& prior, const SlabSpec& slab, long M);

// log of (1 - (1-p)^alpha) / alpha, with the alpha = 0 limit -log(1-p).
double log_tnb_norm(double alpha, double p);

// Generalized Stirling numbers S_alpha(m, n), 1 <= n <= m:
//   S(m,1) = Gamma(m-alpha)/Gamma(1-alpha), S(m,m) = 1,
//   S(m+1,n) = (m - alpha n) S(m,n) + S(m,n-1).
// Rows are computed in linear scale with a log exponent per block of eight
// columns; only the rows in `keep_rows` are stored (all rows when empty).
class StirlingTable {
 public:
  StirlingTable(double alpha, int m_max, int n_max = -1, std::vector<int> keep_rows = {});

  double alpha() const { return alpha_; }
  int m_max() const { return m_max_; }
  int n_max() const { return n_max_; }
  bool has_row(int m) const;

  // log S_alpha(m, n); -inf when n > m or n < 1 (and 0 for m = n = 0).
  double log_s(int m, int n) const;

 private:
  static constexpr int kBlock = 8;
  double alpha_;
  int m_max_;
  int n_max_;
  std::vector<std::int64_t> row_offset_;    // per m, offset into mant_ or -1
  std::vector<std::int64_t> block_offset_;  // per m, offset into scale_
  std::vector<double> mant_;
  std::vector<double> scale_;
};

// Per-chain cache of full-width tables keyed by alpha.
class StirlingCache {
 public:
  std::shared_ptr<const StirlingTable> get(double alpha, int m_max);
  void clear() { tables_.clear(); }

 private:
  std::map<double, std::shared_ptr<const StirlingTable>> tables_;
};

}  // namespace hibp

#endif  // HIBP_GGMATH_HPP
