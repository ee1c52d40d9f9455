#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mdlae {

// Deterministic RNG with named substreams.  Every run derives all of its
// randomness from one master seed: substream("init"), substream("shuffle"),
// substream("noise") and so on give independent, reproducible streams, so
// adding draws in one place never perturbs another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double a, double b);  // [a, b)
  int uniform_int(int lo, int hi);     // inclusive bounds
  double gauss();                      // standard normal, polar method

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mdlae
