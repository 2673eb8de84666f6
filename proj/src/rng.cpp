#include "hibp/rng.hpp"

#include <cmath>
#include <limits>

#include "hibp/errors.hpp"

namespace hibp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  eng_.seed(seq);
}

RngStream RngStream::substream(std::uint64_t key) const {
  return RngStream(seed_, splitmix64(stream_ ^ splitmix64(key + 0x632be59bd9b4e019ULL)));
}

double RngStream::uniform() {
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(eng_);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw ValidationError("gamma: shape must be positive");
  std::gamma_distribution<double> d(shape, 1.0);
  double x = d(eng_);
  // Tiny shapes can underflow to zero; fall back to the log-scale identity
  // G(a) = G(a+1) U^(1/a).
  if (x <= 0.0) {
    std::gamma_distribution<double> d1(shape + 1.0, 1.0);
    double lg = std::log(d1(eng_)) + std::log(uniform()) / shape;
    x = std::exp(lg);
    if (x <= 0.0) x = std::numeric_limits<double>::min();
  }
  return x;
}

double RngStream::beta(double a, double b) {
  double x = gamma(a);
  double y = gamma(b);
  return x / (x + y);
}

long RngStream::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) throw ValidationError("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  std::poisson_distribution<long> d(mean);
  return d(eng_);
}

long RngStream::binomial(long n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long> d(n, p);
  return d(eng_);
}

long RngStream::negative_binomial(double r, double q) {
  if (!(r > 0.0) || !(q >= 0.0 && q < 1.0)) throw ValidationError("negative_binomial: need r > 0, q in [0,1)");
  if (q == 0.0) return 0;
  double lam = gamma(r) * q / (1.0 - q);
  return poisson(lam);
}

std::vector<long> RngStream::multinomial(long n, const std::vector<double>& probs) {
  std::vector<long> out(probs.size(), 0);
  double rest = 0.0;
  for (double p : probs) rest += p;
  long left = n;
  for (std::size_t i = 0; i < probs.size() && left > 0; ++i) {
    if (i + 1 == probs.size()) {
      out[i] = left;
      break;
    }
    double p = rest > 0.0 ? probs[i] / rest : 0.0;
    long x = binomial(left, std::min(1.0, p));
    out[i] = x;
    left -= x;
    rest -= probs[i];
  }
  return out;
}

std::size_t RngStream::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("categorical: weights do not sum to a positive finite value");
  double u = uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t RngStream::categorical_log(const std::vector<double>& log_weights) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) mx = std::max(mx, w);
  if (!std::isfinite(mx)) throw NumericError("categorical_log: no finite weight");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - mx);
  return categorical(w);
}

}  // namespace hibp
