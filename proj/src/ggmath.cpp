#include "hibp/ggmath.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hibp/errors.hpp"

namespace hibp {

SlabSpec SlabSpec::poisson(double beta) {
  SlabSpec s;
  s.family = Family::Poisson;
  s.beta = beta;
  return s;
}

SlabSpec SlabSpec::bernoulli(double alpha_b, double beta_b, double theta_b) {
  SlabSpec s;
  s.family = Family::Bernoulli;
  s.alpha_b = alpha_b;
  s.beta_b = beta_b;
  s.theta_b = theta_b;
  return s;
}

bool is_valid(const GGParams& p) {
  if (!std::isfinite(p.alpha) || !std::isfinite(p.zeta) || !std::isfinite(p.theta)) return false;
  if (!(p.theta > 0.0)) return false;
  if (p.alpha > 0.0) return p.alpha <= kAlphaMax && p.zeta >= 0.0;
  return p.zeta > 0.0;
}

void validate(const GGParams& p, std::string_view where) {
  if (is_valid(p)) return;
  std::ostringstream os;
  os << where << ": invalid generalized gamma parameters (alpha=" << p.alpha << ", zeta=" << p.zeta
     << ", theta=" << p.theta << "); need theta > 0 and either 0 < alpha < 1 with zeta >= 0"
     << " or alpha <= 0 with zeta > 0";
  throw ValidationError(os.str());
}

void validate(const SlabSpec& s, std::string_view where) {
  if (s.is_poisson()) {
    if (!(s.beta > 0.0) || !std::isfinite(s.beta)) throw ValidationError(std::string(where) + ": Poisson slab needs beta > 0");
    return;
  }
  if (!(s.alpha_b >= 0.0 && s.alpha_b <= kAlphaMax))
    throw ValidationError(std::string(where) + ": stable-beta alpha_b must lie in [0,1)");
  if (!(s.beta_b > -s.alpha_b) || !std::isfinite(s.beta_b))
    throw ValidationError(std::string(where) + ": stable-beta beta_b must exceed -alpha_b");
  if (!(s.theta_b > 0.0) || !std::isfinite(s.theta_b))
    throw ValidationError(std::string(where) + ": stable-beta theta_b must be positive");
}

double lgam(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_factorial(long n) { return lgam(static_cast<double>(n) + 1.0); }

double log_binomial(long n, long k) {
  if (k < 0 || k > n) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double laplace_exponent(double alpha, double zeta, double t) {
  GGParams p{alpha, zeta, 1.0};
  validate(p, "laplace_exponent");
  if (!(t >= 0.0)) throw ValidationError("laplace_exponent: t must be >= 0");
  if (t == 0.0) return 0.0;
  if (alpha == 0.0) return std::log1p(t / zeta);
  if (zeta == 0.0) return std::pow(t, alpha) / alpha;
  // (1/alpha)((t+zeta)^alpha - zeta^alpha) for 0 < alpha < 1 and
  // (1/delta)(zeta^-delta - (t+zeta)^-delta) for alpha = -delta < 0 share
  // this factored form.
  return std::pow(zeta, alpha) * std::expm1(alpha * std::log1p(t / zeta)) / alpha;
}

double laplace_exponent(const GGParams& p, double t) { return laplace_exponent(p.alpha, p.zeta, t); }

namespace {

double sbp_term(const SlabSpec& s, long i) {
  // Gamma(1-a) Gamma(b+a+i-1) / Gamma(b+i)
  return std::exp(lgam(1.0 - s.alpha_b) + lgam(s.beta_b + s.alpha_b + i - 1.0) - lgam(s.beta_b + i));
}

}  // namespace

double psi_rate(const GGParams& prior, const SlabSpec& slab, long M) {
  require(M >= 0, "psi_rate: M must be >= 0");
  validate(slab);
  if (M == 0) return 0.0;
  if (slab.is_poisson()) {
    validate(prior, "psi_rate prior");
    return prior.theta * laplace_exponent(prior, slab.beta * static_cast<double>(M));
  }
  double s = 0.0;
  for (long i = 1; i <= M; ++i) s += sbp_term(slab, i);
  return slab.theta_b * s;
}

double gamma_increment(const GGParams& prior, const SlabSpec& slab, long M) {
  require(M >= 0, "gamma_increment: M must be >= 0");
  validate(slab);
  if (slab.is_poisson()) {
    validate(prior, "gamma_increment prior");
    double z = prior.zeta + slab.beta * static_cast<double>(M);
    return prior.theta * laplace_exponent(prior.alpha, z, slab.beta);
  }
  return slab.theta_b * sbp_term(slab, M + 1);
}

double log_tnb_norm(double alpha, double p) {
  double l = std::log1p(-p);
  if (alpha == 0.0) return std::log(-l);
  return std::log(-std::expm1(alpha * l) / alpha);
}

// ---------------------------------------------------------------------------

StirlingTable::StirlingTable(double alpha, int m_max, int n_max, std::vector<int> keep_rows)
    : alpha_(alpha), m_max_(m_max), n_max_(n_max < 0 ? m_max : std::min(n_max, m_max)) {
  require(alpha < 1.0 && std::isfinite(alpha), "StirlingTable: alpha must be finite and < 1");
  require(m_max >= 0, "StirlingTable: m_max must be >= 0");
  std::vector<char> keep(static_cast<std::size_t>(m_max) + 1, keep_rows.empty() ? 1 : 0);
  for (int m : keep_rows) {
    require(m >= 0 && m <= m_max, "StirlingTable: kept row out of range");
    keep[m] = 1;
  }
  row_offset_.assign(static_cast<std::size_t>(m_max) + 1, -1);
  block_offset_.assign(static_cast<std::size_t>(m_max) + 1, -1);
  if (m_max == 0 || n_max_ == 0) return;

  const int w_max = n_max_;
  const int b_max = (w_max + kBlock - 1) / kBlock;
  std::vector<double> cur(w_max, 0.0), nxt(w_max, 0.0);
  std::vector<double> cur_s(b_max, 0.0), nxt_s(b_max, 0.0);
  // link[b] = exp(s[b-1] - s[b]) carries the last entry of block b-1 into
  // block b; it only changes when one of the two blocks is rescaled.
  std::vector<double> link(b_max, 1.0);
  cur[0] = 1.0;  // S(1,1)
  int cur_w = 1;

  std::size_t total = 0, total_b = 0;
  for (int m = 1; m <= m_max; ++m)
    if (keep[m]) {
      const int w = std::min(m, w_max);
      total += static_cast<std::size_t>(w);
      total_b += static_cast<std::size_t>((w + kBlock - 1) / kBlock);
    }
  mant_.reserve(total);
  scale_.reserve(total_b);

  auto store = [&](int m, int w) {
    if (!keep[m]) return;
    row_offset_[m] = static_cast<std::int64_t>(mant_.size());
    block_offset_[m] = static_cast<std::int64_t>(scale_.size());
    mant_.insert(mant_.end(), cur.begin(), cur.begin() + w);
    scale_.insert(scale_.end(), cur_s.begin(), cur_s.begin() + (w + kBlock - 1) / kBlock);
  };
  store(1, 1);

  for (int m = 1; m < m_max; ++m) {
    const int nw = std::min(m + 1, w_max);
    const int nb = (nw + kBlock - 1) / kBlock;
    const int cb = (cur_w + kBlock - 1) / kBlock;
    const double dm = static_cast<double>(m);
    bool rescaled = false;
    for (int b = 0; b < nb; ++b) {
      const int lo = b * kBlock;
      const int hi = std::min(nw, lo + kBlock);
      double s;
      if (b < cb) {
        s = cur_s[b];
        double left = b > 0 ? cur[lo - 1] * link[b] : 0.0;
        const int top = std::min(hi, cur_w);
        for (int i = lo; i < top; ++i) {
          const double v = cur[i];
          nxt[i] = (dm - alpha * static_cast<double>(i + 1)) * v + left;
          left = v;
        }
        // S(m+1, m+1) = S(m, m) when the row grows inside this block
        for (int i = top; i < hi; ++i) {
          nxt[i] = left;
          left = 0.0;
        }
      } else {
        // A block that did not exist in row m holds only S(m+1, m+1) = S(m, m).
        s = cur_s[b - 1];
        nxt[lo] = cur[lo - 1];
        for (int i = lo + 1; i < hi; ++i) nxt[i] = 0.0;
        rescaled = true;
      }
      double mx = 0.0;
      for (int i = lo; i < hi; ++i) mx = std::max(mx, nxt[i]);
      if (!(mx > 0.0) || !std::isfinite(mx)) throw NumericError("StirlingTable: block lost to under/overflow");
      if (mx > 1e100 || mx < 1e-100) {
        const double inv = 1.0 / mx;
        for (int i = lo; i < hi; ++i) nxt[i] *= inv;
        s += std::log(mx);
        rescaled = true;
      }
      nxt_s[b] = s;
    }
    std::swap(cur, nxt);
    std::swap(cur_s, nxt_s);
    cur_w = nw;
    if (rescaled)
      for (int b = 1; b < nb; ++b) link[b] = std::exp(cur_s[b - 1] - cur_s[b]);
    store(m + 1, nw);
  }
}

bool StirlingTable::has_row(int m) const {
  return m >= 0 && m <= m_max_ && (m == 0 || row_offset_[m] >= 0);
}

double StirlingTable::log_s(int m, int n) const {
  if (m == 0 && n == 0) return 0.0;
  if (n < 1 || n > m) return kNegInf;
  if (m > m_max_ || n > n_max_) throw ValidationError("StirlingTable: index outside computed range");
  std::int64_t off = row_offset_[m];
  if (off < 0) throw ValidationError("StirlingTable: requested row was not retained");
  return scale_[block_offset_[m] + (n - 1) / kBlock] + std::log(mant_[off + n - 1]);
}

std::shared_ptr<const StirlingTable> StirlingCache::get(double alpha, int m_max) {
  auto it = tables_.find(alpha);
  if (it != tables_.end() && it->second->m_max() >= m_max) return it->second;
  if (tables_.size() >= 16) tables_.clear();
  auto t = std::make_shared<const StirlingTable>(alpha, m_max);
  tables_[alpha] = t;
  return t;
}

}  // namespace hibp
