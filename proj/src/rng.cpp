#include "mdlae/rng.hpp"

#include <cmath>

namespace mdlae {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), eng_(mix(seed)) {}

Rng Rng::substream(std::string_view name) const {
  return Rng(mix(fnv1a(name, seed_ ^ 0xcbf29ce484222325ull)));
}

Rng Rng::substream(std::string_view name, std::uint64_t index) const {
  return Rng(mix(fnv1a(name, seed_ ^ 0xcbf29ce484222325ull) + 0x9e3779b97f4a7c15ull * (index + 1)));
}

std::uint64_t Rng::next_u64() { return eng_(); }

double Rng::uniform() {
  // 53 random bits into [0, 1)
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(eng_() % span);
}

double Rng::gauss() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double k = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * k;
  has_spare_ = true;
  return u * k;
}

}  // namespace mdlae
