// common/rng.hpp
//
// Deterministic random numbers with explicitly pinned algorithms.
// std::mt19937_64 is portable but the std distributions are not
// (uniform_real/normal are implementation defined), so every draw here is
// built by hand from raw 64-bit words: xoshiro256++ for bits, a 53-bit
// mantissa trick for uniforms, Box-Muller for normals.  Streams are forked
// by hashing (base seed, stream id) with splitmix64, which keeps child
// streams independent of how much the parent has been consumed.

#pragma once

#include <cstdint>

namespace sea {

uint64_t splitmix64(uint64_t x);

// Order-sensitive combine of several words into one seed.
uint64_t hash_seed(uint64_t a, uint64_t b);
uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c);
uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d);

class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).  n must be positive.
  int64_t uniform_int(int64_t n);

  // Standard normal via Box-Muller; pairs are drawn lazily and the spare
  // is cached, so the sequence is a pure function of the seed.
  double normal();
  double normal(double mean, double sd);

  // Child stream: depends only on the ORIGINAL seed and the stream id,
  // never on how much this generator has already produced.
  Rng fork(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sea
