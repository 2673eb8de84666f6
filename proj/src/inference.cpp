#include "hibp/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "hibp/errors.hpp"

namespace hibp {

namespace {

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

double log_sigmoid(double u) { return u >= 0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }

}  // namespace

double alpha_from_u(double u) {
  return u > 0 ? 1.0 - (1.0 - kAlphaMin) * sigmoid(-u) : kAlphaMin + (1.0 - kAlphaMin) * sigmoid(u);
}

double u_from_alpha(double alpha) {
  require(alpha > kAlphaMin && alpha < 1.0, "alpha outside (" + std::to_string(kAlphaMin) + ", 1)");
  const double s = (alpha - kAlphaMin) / (1.0 - kAlphaMin);
  return std::log(s) - std::log1p(-s);
}

double alpha_log_jacobian(double u) { return std::log(1.0 - kAlphaMin) + log_sigmoid(u) + log_sigmoid(-u); }

std::vector<double> to_unconstrained(const HibpSpec& spec) {
  std::vector<double> u{std::log(spec.baseline.theta), u_from_alpha(spec.baseline.alpha)};
  for (const GroupSpec& g : spec.groups) {
    u.push_back(std::log(g.prior.theta));
    u.push_back(u_from_alpha(g.prior.alpha));
  }
  return u;
}

HibpSpec from_unconstrained(const HibpSpec& tmpl, const std::vector<double>& u) {
  require(u.size() == 2 * tmpl.groups.size() + 2, "from_unconstrained: wrong vector length");
  HibpSpec s = tmpl;
  s.baseline.theta = std::exp(u[0]);
  s.baseline.alpha = alpha_from_u(u[1]);
  for (std::size_t j = 0; j < s.groups.size(); ++j) {
    s.groups[j].prior.theta = std::exp(u[2 + 2 * j]);
    s.groups[j].prior.alpha = alpha_from_u(u[3 + 2 * j]);
  }
  return s;
}

std::vector<std::string> hyper_names(int J) {
  std::vector<std::string> n{"theta0", "alpha"};
  for (int j = 1; j <= J; ++j) {
    n.push_back("theta_" + std::to_string(j));
    n.push_back("alpha_" + std::to_string(j));
  }
  return n;
}

std::vector<double> hyper_values(const HibpSpec& spec) {
  std::vector<double> v{spec.baseline.theta, spec.baseline.alpha};
  for (const GroupSpec& g : spec.groups) {
    v.push_back(g.prior.theta);
    v.push_back(g.prior.alpha);
  }
  return v;
}

void validate(const McmcOptions& o) {
  require(o.iters >= 0, "mcmc.iters must be >= 0");
  require(o.burnin >= 0 && o.burnin <= o.iters, "mcmc.burnin must lie in [0, iters]");
  require(o.thin >= 1, "mcmc.thin must be >= 1");
  require(o.chains >= 1, "mcmc.chains must be >= 1");
  require(o.threads >= 1, "threads must be >= 1");
  require(o.target_accept > 0.0 && o.target_accept < 1.0, "mcmc.target_accept must lie in (0, 1)");
  require(o.init_step > 0.0 && std::isfinite(o.init_step), "mcmc.init_step must be > 0");
  require(o.init_jitter >= 0.0 && std::isfinite(o.init_jitter), "mcmc.init_jitter must be >= 0");
  require(o.log_theta_sd >= 0.0 && std::isfinite(o.log_theta_sd), "mcmc.log_theta_sd must be >= 0");
  require(o.latent_every >= 0, "mcmc.latent_every must be >= 0");
}

CountMatrix init_latents_ones(const AggregatedData& data) {
  CountMatrix X = data.m;
  for (auto& row : X)
    for (long& x : row) x = x > 0 ? 1 : 0;
  return X;
}

ChainState::ChainState(const HibpSpec& spec, const AggregatedData& data, CountMatrix X, RngStream rng,
                       double log_theta_sd, bool joint_block)
    : spec_(spec), data_(data), X_(std::move(X)), rng_(rng), log_theta_sd_(log_theta_sd) {
  require(log_theta_sd >= 0.0 && std::isfinite(log_theta_sd), "log_theta_sd must be >= 0");
  validate(spec_);
  validate(data_, spec_);
  const int J = spec_.J();
  const long r = data_.r();
  require(J >= 1, "inference needs at least one group");
  require(spec_.baseline.alpha > kAlphaMin, "baseline alpha must exceed " + std::to_string(kAlphaMin));
  for (const GroupSpec& g : spec_.groups) {
    require(g.slab.is_poisson(), "inference supports Poisson slabs only");
    require(g.M >= 1, "inference needs M_j >= 1 in every group");
    require(g.prior.alpha > kAlphaMin, "group alpha must exceed " + std::to_string(kAlphaMin));
  }
  require(static_cast<int>(X_.size()) == J, "X must have one row per group");
  rows_.assign(J, {});
  m_max_.assign(J, 0);
  for (int j = 0; j < J; ++j) {
    require(static_cast<long>(X_[j].size()) == r, "X row length differs from r");
    for (long k = 0; k < r; ++k) {
      const long m = data_.m[j][k], n = X_[j][k];
      require(m <= (1L << 30), "counts too large for Stirling tables");
      if (m == 0) {
        require(n == 0, "X must be 0 where m is 0");
      } else {
        require(n >= 1 && n <= m, "X must lie in [1, m] where m > 0");
        rows_[j].push_back(static_cast<int>(m));
        m_max_[j] = std::max(m_max_[j], static_cast<int>(m));
      }
    }
    std::sort(rows_[j].begin(), rows_[j].end());
    rows_[j].erase(std::unique(rows_[j].begin(), rows_[j].end()), rows_[j].end());
  }
  for (long k = 0; k < r; ++k) {
    long s = 0;
    for (int j = 0; j < J; ++j) s += data_.m[j][k];
    require(s > 0, "every feature must be observed at least once");
  }
  u_ = to_unconstrained(spec_);
  spec_ = from_unconstrained(spec_, u_);
  full_.assign(J, nullptr);
  auto make_block = [](std::vector<int> coords) {
    Block b;
    const std::size_t d = coords.size();
    b.coords = std::move(coords);
    b.chol.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) b.chol[i * d + i] = 1.0;
    b.mean.assign(d, 0.0);
    b.m2.assign(d * d, 0.0);
    return b;
  };
  for (int b = 0; b <= J; ++b) blocks_.push_back(make_block({2 * b, 2 * b + 1}));
  if (joint_block) {
    std::vector<int> all(u_.size());
    std::iota(all.begin(), all.end(), 0);
    blocks_.push_back(make_block(all));
  }
  set_step_scale(0.1);
  Nj_.assign(J, 0);
  Mj_.assign(J, 0);
  lfact_j_.assign(J, 0.0);
  psi_.assign(J, 0.0);
  sum_ls_.assign(J, 0.0);
  for (int j = 0; j < J; ++j)
    for (long k = 0; k < r; ++k) {
      Mj_[j] += data_.m[j][k];
      lfact_j_[j] += lgam(static_cast<double>(data_.m[j][k]) + 1.0);
    }
  for (int j = 0; j < J; ++j) psi_[j] = psi_j(j, spec_.groups[j].prior.theta, spec_.groups[j].prior.alpha);
  refresh();
}

double ChainState::psi_j(int j, double theta, double alpha) const {
  const GroupSpec& g = spec_.groups[j];
  return theta * laplace_exponent(alpha, g.prior.zeta, g.slab.beta * static_cast<double>(g.M));
}

double ChainState::base_term(double theta0, double alpha, double kappa, double sum_lg) const {
  const double zeta = spec_.baseline.zeta;
  const double r = static_cast<double>(data_.r());
  const double g0t0 = spec_.gamma0 * theta0;
  double v = -g0t0 * laplace_exponent(alpha, zeta, kappa);
  if (r == 0) return v;
  return v + r * std::log(g0t0) + sum_lg - r * lgam(1.0 - alpha) +
         (alpha * r - static_cast<double>(N_)) * std::log(kappa + zeta);
}

double ChainState::group_term(int j, double theta, double alpha, double sum_ls) const {
  const GroupSpec& g = spec_.groups[j];
  const double bm = g.slab.beta * static_cast<double>(g.M);
  const double N = static_cast<double>(Nj_[j]), m = static_cast<double>(Mj_[j]);
  if (Nj_[j] == 0) return 0.0;
  return N * std::log(theta) + m * std::log(bm) - (m - alpha * N) * std::log(bm + g.prior.zeta) + sum_ls -
         lfact_j_[j];
}

double ChainState::sum_lgamma_nk(double alpha) const {
  double s = 0.0;
  for (long n : nk_) s += lgam(static_cast<double>(n) - alpha);
  return s;
}

double ChainState::sum_log_s(int j, double alpha) const {
  if (rows_[j].empty()) return 0.0;
  const long r = data_.r();
  std::shared_ptr<const StirlingTable> t;
  if (full_[j] && full_[j]->alpha() == alpha) {
    t = full_[j];
  } else {
    int n_max = 0;
    for (long k = 0; k < r; ++k) n_max = std::max(n_max, static_cast<int>(X_[j][k]));
    t = std::make_shared<const StirlingTable>(alpha, m_max_[j], n_max, rows_[j]);
  }
  double s = 0.0;
  for (long k = 0; k < r; ++k)
    if (X_[j][k] > 0) s += t->log_s(static_cast<int>(data_.m[j][k]), static_cast<int>(X_[j][k]));
  return s;
}

void ChainState::refresh() {
  const int J = spec_.J();
  const long r = data_.r();
  nk_.assign(r, 0);
  N_ = 0;
  for (int j = 0; j < J; ++j) {
    Nj_[j] = 0;
    for (long k = 0; k < r; ++k) {
      nk_[k] += X_[j][k];
      Nj_[j] += X_[j][k];
    }
    N_ += Nj_[j];
  }
  sum_lg_ = sum_lgamma_nk(spec_.baseline.alpha);
  const double kappa = std::accumulate(psi_.begin(), psi_.end(), 0.0);
  loglik_ = base_term(spec_.baseline.theta, spec_.baseline.alpha, kappa, sum_lg_);
  for (int j = 0; j < J; ++j) {
    sum_ls_[j] = sum_log_s(j, spec_.groups[j].prior.alpha);
    loglik_ += group_term(j, spec_.groups[j].prior.theta, spec_.groups[j].prior.alpha, sum_ls_[j]);
  }
  if (!std::isfinite(loglik_)) throw NumericError("chain log-likelihood is not finite");
}

void ChainState::ensure_full_table(int j) {
  const double alpha = spec_.groups[j].prior.alpha;
  if (rows_[j].empty()) return;
  if (full_[j] && full_[j]->alpha() == alpha) return;
  full_[j] = std::make_shared<const StirlingTable>(alpha, m_max_[j], m_max_[j], rows_[j]);
}

double ChainState::acceptance_rate(int block) const {
  require(block >= 0 && block < n_blocks(), "acceptance_rate: block out of range");
  const Block& b = blocks_[block];
  return b.proposed == 0 ? 0.0 : static_cast<double>(b.accepted) / static_cast<double>(b.proposed);
}

std::vector<double> ChainState::step_sizes() const {
  std::vector<double> s;
  for (int b = 0; b <= spec_.J(); ++b) {
    const Block& blk = blocks_[b];
    const double e = std::exp(blk.log_scale);
    s.push_back(e * std::abs(blk.chol[0]));
    s.push_back(e * std::hypot(blk.chol[2], blk.chol[3]));
  }
  return s;
}

void ChainState::set_step_scale(double s) {
  require(s > 0.0, "step scale must be > 0");
  for (Block& b : blocks_) b.log_scale = std::log(s * std::sqrt(2.0 / static_cast<double>(b.coords.size())));
}

void ChainState::set_target_accept(double a) {
  require(a > 0.0 && a < 1.0, "target acceptance must lie in (0, 1)");
  target_ = a;
}

void ChainState::reset_counters() {
  for (Block& b : blocks_) b.proposed = b.accepted = 0;
}

double ChainState::log_target(const std::vector<double>& u) const {
  const double prior = log_prior(u);
  if (prior == kNegInf) return kNegInf;
  const int J = spec_.J();
  const double alpha = alpha_from_u(u[1]);
  double kappa = 0.0, lp = prior;
  for (int j = 0; j < J; ++j) {
    const double th = std::exp(u[2 + 2 * j]), a = alpha_from_u(u[3 + 2 * j]);
    kappa += psi_j(j, th, a);
    lp += group_term(j, th, a, sum_log_s(j, a));
  }
  return lp + base_term(std::exp(u[0]), alpha, kappa, sum_lgamma_nk(alpha));
}

double ChainState::log_prior(const std::vector<double>& u) const {
  require(u.size() == u_.size(), "log_prior: wrong vector length");
  double lp = 0.0;
  for (std::size_t i = 0; i < u.size(); i += 2) {
    if (log_theta_sd_ > 0.0) lp -= 0.5 * (u[i] / log_theta_sd_) * (u[i] / log_theta_sd_);
    const double a = alpha_from_u(u[i + 1]);
    if (!(a > kAlphaMin && a <= kAlphaMax) || !std::isfinite(u[i])) return kNegInf;
    lp += alpha_log_jacobian(u[i + 1]);
  }
  return lp;
}

double ChainState::log_accept_ratio(const std::vector<double>& u, const std::vector<double>& v) const {
  return log_target(v) - log_target(u);
}

std::vector<double> ChainState::gibbs_log_probs(int j, long k) const {
  require(j >= 0 && j < spec_.J() && k >= 0 && k < data_.r(), "gibbs_log_probs: index out of range");
  const long m = data_.m[j][k];
  require(m > 0, "gibbs_log_probs: m_jk is 0, so n_jk = 0");
  const GroupSpec& g = spec_.groups[j];
  const double alpha = spec_.baseline.alpha, aj = g.prior.alpha;
  std::shared_ptr<const StirlingTable> t = full_[j];
  if (!t || t->alpha() != aj) t = std::make_shared<const StirlingTable>(aj, m_max_[j], m_max_[j], rows_[j]);
  const double kappa = std::accumulate(psi_.begin(), psi_.end(), 0.0);
  const double lin = std::log(g.prior.theta) + aj * std::log(g.slab.beta * static_cast<double>(g.M) + g.prior.zeta) -
                     std::log(kappa + spec_.baseline.zeta);
  const double c = static_cast<double>(nk_[k] - X_[j][k]);
  std::vector<double> lw(m);
  for (long n = 1; n <= m; ++n)
    lw[n - 1] = static_cast<double>(n) * lin + lgam(c + static_cast<double>(n) - alpha) +
                t->log_s(static_cast<int>(m), static_cast<int>(n));
  const double z = log_sum_exp(lw);
  for (double& x : lw) x -= z;
  return lw;
}

void ChainState::gibbs_sweep() {
  const int J = spec_.J();
  const long r = data_.r();
  const double alpha = spec_.baseline.alpha;
  const double kappa = std::accumulate(psi_.begin(), psi_.end(), 0.0);
  const double lk = std::log(kappa + spec_.baseline.zeta);
  for (int j = 0; j < J; ++j) {
    if (rows_[j].empty()) continue;
    ensure_full_table(j);
    const StirlingTable& t = *full_[j];
    const GroupSpec& g = spec_.groups[j];
    const double lin = std::log(g.prior.theta) +
                       g.prior.alpha * std::log(g.slab.beta * static_cast<double>(g.M) + g.prior.zeta) - lk;
    for (long k = 0; k < r; ++k) {
      const long m = data_.m[j][k];
      if (m == 0) continue;
      if (m == 1) continue;  // n = 1 is forced
      const double c = static_cast<double>(nk_[k] - X_[j][k]);
      buf_.resize(m);
      double mx = kNegInf;
      for (long n = 1; n <= m; ++n) {
        const double v = static_cast<double>(n) * lin + lgam(c + static_cast<double>(n) - alpha) +
                         t.log_s(static_cast<int>(m), static_cast<int>(n));
        buf_[n - 1] = v;
        mx = std::max(mx, v);
      }
      double tot = 0.0;
      for (long n = 0; n < m; ++n) tot += (buf_[n] = std::exp(buf_[n] - mx));
      double x = rng_.uniform() * tot;
      long pick = m;
      for (long n = 0; n < m; ++n) {
        x -= buf_[n];
        if (x <= 0.0) {
          pick = n + 1;
          break;
        }
      }
      nk_[k] += pick - X_[j][k];
      X_[j][k] = pick;
    }
  }
  refresh();
}

void ChainState::adapt_block(Block& b, bool accepted) {
  const std::size_t d = b.coords.size();
  ++b.seen;
  const double t = static_cast<double>(b.seen);
  b.log_scale += std::pow(t, -0.6) * ((accepted ? 1.0 : 0.0) - target_);
  std::vector<double> dx(d);
  for (std::size_t i = 0; i < d; ++i) {
    dx[i] = u_[b.coords[i]] - b.mean[i];
    b.mean[i] += dx[i] / t;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) b.m2[i * d + k] += dx[i] * (u_[b.coords[k]] - b.mean[k]);
  if (b.seen < 400 || b.seen % 200 != 0) return;
  // Cholesky of the sample covariance; keep the old factor if it fails.
  std::vector<double> L(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) {
      double v = b.m2[i * d + k] / (t - 1.0) + (i == k ? 1e-10 : 0.0);
      for (std::size_t l = 0; l < k; ++l) v -= L[i * d + l] * L[k * d + l];
      if (i == k) {
        if (!(v > 0.0) || !std::isfinite(v)) return;
        L[i * d + i] = std::sqrt(v);
      } else {
        L[i * d + k] = v / L[k * d + k];
      }
    }
  b.chol = std::move(L);
  if (!b.learned) b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  b.learned = true;
}

ChainState::Eval ChainState::evaluate(const std::vector<double>& v) const {
  const int J = spec_.J();
  Eval e;
  const double alpha = alpha_from_u(v[1]);
  if (!(alpha > kAlphaMin && alpha <= kAlphaMax)) return e;
  e.sum_lg = v[1] == u_[1] ? sum_lg_ : sum_lgamma_nk(alpha);
  e.psi = psi_;
  e.sum_ls = sum_ls_;
  double groups = 0.0;
  for (int j = 0; j < J; ++j) {
    const GroupSpec& g = spec_.groups[j];
    double th = g.prior.theta, a = g.prior.alpha;
    if (v[2 + 2 * j] != u_[2 + 2 * j] || v[3 + 2 * j] != u_[3 + 2 * j]) {
      th = std::exp(v[2 + 2 * j]);
      a = alpha_from_u(v[3 + 2 * j]);
      if (!(a > kAlphaMin && a <= kAlphaMax)) return e;
      e.psi[j] = psi_j(j, th, a);
      if (a != g.prior.alpha) e.sum_ls[j] = sum_log_s(j, a);
    }
    groups += group_term(j, th, a, e.sum_ls[j]);
  }
  const double kappa = std::accumulate(e.psi.begin(), e.psi.end(), 0.0);
  e.loglik = groups + base_term(std::exp(v[0]), alpha, kappa, e.sum_lg);
  return e;
}

void ChainState::mh_step(bool adapt) {
  double lp_cur = log_prior(u_);
  std::vector<double> z;
  for (Block& blk : blocks_) {
    const std::size_t d = blk.coords.size();
    z.resize(d);
    for (double& x : z) x = rng_.normal();
    const double e = std::exp(blk.log_scale);
    std::vector<double> v = u_;
    for (std::size_t i = 0; i < d; ++i) {
      double step = 0.0;
      for (std::size_t k = 0; k <= i; ++k) step += blk.chol[i * d + k] * z[k];
      v[blk.coords[i]] += e * step;
    }
    ++blk.proposed;
    bool acc = false;
    const double lp_new = log_prior(v);
    if (lp_new > kNegInf) {
      Eval ev = evaluate(v);
      const double lr = ev.loglik - loglik_ + lp_new - lp_cur;
      if (std::isfinite(lr) && (lr >= 0.0 || std::log(rng_.uniform()) < lr)) {
        acc = true;
        u_ = std::move(v);
        spec_ = from_unconstrained(spec_, u_);
        psi_ = std::move(ev.psi);
        sum_ls_ = std::move(ev.sum_ls);
        sum_lg_ = ev.sum_lg;
        loglik_ = ev.loglik;
        lp_cur = lp_new;
      }
    }
    if (acc) ++blk.accepted;
    if (adapt) adapt_block(blk, acc);
  }
}

void ChainState::step(bool adapt, bool sample_hypers) {
  gibbs_sweep();
  if (sample_hypers) mh_step(adapt);
  ++iteration_;
}

void gibbs_sweep_X(ChainState& state) { state.gibbs_sweep(); }

void mh_step_hypers(ChainState& state, bool adapt) { state.mh_step(adapt); }

namespace {

ChainSamples run_one(const HibpSpec& start, const AggregatedData& data, const McmcOptions& opts, RngStream rng,
                     const CountMatrix* X0) {
  std::vector<double> u = to_unconstrained(start);
  if (opts.init_jitter > 0.0)
    for (double& x : u) x += opts.init_jitter * rng.normal();
  HibpSpec spec = from_unconstrained(start, u);
  ChainState st(spec, data, X0 ? *X0 : init_latents_ones(data), rng.substream(1), opts.log_theta_sd,
                opts.joint_block);
  st.set_step_scale(opts.init_step);
  st.set_target_accept(opts.target_accept);

  ChainSamples out;
  const std::size_t P = u.size();
  out.values.assign(P, {});
  auto record = [&](long it) {
    out.iteration.push_back(it);
    std::vector<double> v = hyper_values(st.spec());
    for (std::size_t p = 0; p < P; ++p) out.values[p].push_back(v[p]);
    if (opts.latent_every > 0 && (out.iteration.size() - 1) % static_cast<std::size_t>(opts.latent_every) == 0) {
      out.latent_index.push_back(out.iteration.size() - 1);
      out.latents.push_back(st.X());
    }
    out.loglik.push_back(st.loglik());
  };
  for (long i = 1; i <= opts.iters; ++i) {
    const bool burning = i <= opts.burnin;
    st.step(burning, opts.sample_hypers);
    if (i == opts.burnin) st.reset_counters();
    if (!burning && (i - opts.burnin) % opts.thin == 0) record(i);
  }
  if (out.iteration.empty()) record(opts.iters);
  for (int b = 0; b < st.n_blocks(); ++b) out.acceptance.push_back(st.acceptance_rate(b));
  out.step_sizes = st.step_sizes();
  return out;
}

}  // namespace

ChainSummary run_chains(const HibpSpec& start, const AggregatedData& data, const McmcOptions& opts,
                        const RngStream& rng, const CountMatrix* X0) {
  validate(opts);
  ChainSummary s;
  s.names = hyper_names(start.J());
  s.chains.resize(opts.chains);
  std::vector<std::exception_ptr> errors(opts.chains);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c; (c = next.fetch_add(1)) < opts.chains;) {
      try {
        s.chains[c] = run_one(start, data, opts, rng.substream(static_cast<std::uint64_t>(c)), X0);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int nt = std::min(opts.threads, opts.chains);
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t p = 0; p < s.names.size(); ++p) {
    std::vector<std::vector<double>> per;
    for (const ChainSamples& c : s.chains) per.push_back(c.values[p]);
    try {
      s.rhat.emplace_back(gelman_rubin(per));
    } catch (const std::exception&) {
      s.rhat.emplace_back(std::nullopt);
    }
  }
  return s;
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  require(chains.size() >= 2, "gelman_rubin needs at least 2 chains");
  const std::size_t n = chains[0].size();
  for (const auto& c : chains) {
    require(c.size() == n, "gelman_rubin: chains differ in length");
    for (double x : c) require(std::isfinite(x), "gelman_rubin: non-finite sample");
  }
  require(n >= 4, "gelman_rubin needs at least 4 samples per chain");
  const std::size_t h = n / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains)
    for (std::size_t start : {std::size_t{0}, n - h}) {
      double mu = 0.0;
      for (std::size_t i = 0; i < h; ++i) mu += c[start + i];
      mu /= static_cast<double>(h);
      double v = 0.0;
      for (std::size_t i = 0; i < h; ++i) v += (c[start + i] - mu) * (c[start + i] - mu);
      means.push_back(mu);
      vars.push_back(v / static_cast<double>(h - 1));
    }
  const double hd = static_cast<double>(h), k = static_cast<double>(means.size());
  const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / k;
  if (!(W > 0.0)) throw NumericError("gelman_rubin: within-chain variance is zero (constant chains)");
  const double mbar = std::accumulate(means.begin(), means.end(), 0.0) / k;
  double B = 0.0;
  for (double mu : means) B += (mu - mbar) * (mu - mbar);
  B *= hd / (k - 1.0);
  const double var_plus = (hd - 1.0) / hd * W + B / hd;
  return std::sqrt(var_plus / W);
}

double quantile(std::vector<double> v, double p) {
  require(!v.empty(), "quantile of an empty sample");
  require(p >= 0.0 && p <= 1.0, "quantile: p must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace hibp
