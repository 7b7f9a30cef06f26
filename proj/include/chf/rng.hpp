#pragma once

#include <cstdint>

#include "chf/core.hpp"

namespace chf {

// Counter-based generator: draw k of stream s is a pure function of
// (seed, s, k). Copies are independent and cheap.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();                        // standard normal
  Vec normal_vec(int n, double sd = 1.0);
  Mat normal_mat(int rows, int cols, double sd = 1.0);
  Vec uniform_vec(int n, double lo, double hi);
  bool bernoulli(double p) { return uniform() < p; }

  // A child generator with its own stream; does not advance this one.
  Rng split(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z);

// Random helpers used across tests and experiments.
Mat random_orthogonal(Rng& rng, int n);
Mat random_spd(Rng& rng, int n, double min_eig, double max_eig);

}  // namespace chf
