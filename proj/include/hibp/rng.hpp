#ifndef HIBP_RNG_HPP
#define HIBP_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace hibp {

// Reproducible random stream identified by (seed, stream id). Two streams
// with the same pair produce the same sequence in any process.
class RngStream {
 public:
  RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  // Independent child stream, deterministic in (seed, stream, key).
  RngStream substream(std::uint64_t key) const;

  double uniform();            // (0,1), never 0 or 1
  double normal();
  double gamma(double shape);  // unit rate
  double beta(double a, double b);
  long poisson(double mean);
  long binomial(long n, double p);
  // Negative binomial with real shape r and success probability q, counting
  // successes: P(x) = Gamma(x+r)/(x! Gamma(r)) q^x (1-q)^r.
  long negative_binomial(double r, double q);
  std::vector<long> multinomial(long n, const std::vector<double>& probs);
  std::size_t categorical(const std::vector<double>& weights);
  // Index drawn from unnormalized log weights.
  std::size_t categorical_log(const std::vector<double>& log_weights);

  std::mt19937_64& engine() { return eng_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 eng_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hibp

#endif  // HIBP_RNG_HPP
