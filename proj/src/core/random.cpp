#include "core/random.hpp"

#include <cmath>
#include <numbers>

namespace qdpost {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace

std::uint64_t derive_key(std::uint64_t key, std::uint64_t salt) {
  // salt * odd constant is injective in salt; the splitmix finalizer then
  // decorrelates neighbouring salts.
  std::uint64_t x = key ^ (salt * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
  std::uint64_t a = splitmix64(x);
  std::uint64_t b = splitmix64(x);
  return a ^ rotl(b, 32);
}

RandomStream::RandomStream(std::uint64_t key) : key_(key) {
  std::uint64_t x = key;
  for (auto& s : state_) s = splitmix64(x);
  // all-zero state is the one fixed point of xoshiro; unreachable in
  // practice but cheap to rule out
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

RandomStream RandomStream::substream(std::uint64_t salt) const {
  return RandomStream(derive_key(key_, salt));
}

std::uint64_t RandomStream::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::exponential(double mean) {
  // uniform() < 1 strictly, so the argument of log1p stays in (-1, 0]
  return -mean * std::log1p(-uniform());
}

double RandomStream::normal(double mean, double sigma) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  std::uint64_t n = 0;
  while (mean > 30.0) {
    // Poisson(a + b) = Poisson(a) + Poisson(b) for independent draws
    const double half = mean * 0.5;
    n += poisson(half);
    mean -= half;
  }
  const double limit = std::exp(-mean);
  double prod = uniform();
  while (prod > limit) {
    ++n;
    prod *= uniform();
  }
  return n;
}

}  // namespace qdpost
