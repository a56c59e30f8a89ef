#include "mkvsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "mkvsim/errors.hpp"

namespace mkvsim {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Absorb one word into a 128-bit digest (two interleaved splitmix chains).
void absorb(std::array<std::uint64_t, 2>& id, std::uint64_t w) {
  std::uint64_t a = id[0] ^ w;
  std::uint64_t b = id[1] + rotl(w, 29);
  id[0] = splitmix64(a) + id[1];
  id[1] = splitmix64(b) ^ id[0];
}

}  // namespace

RngStream RngStream::from_root(std::uint64_t root) {
  RngStream s;
  s.id_ = {0x6d6b7673696d0000ull, 0x9368b1c372f7b5a3ull};
  absorb(s.id_, root);
  s.seed_from_id();
  return s;
}

RngStream RngStream::derive(std::string_view component, std::uint64_t index) const {
  RngStream child;
  child.id_ = id_;
  // Pack the component name into words, length-prefixed so ("ab",0) and ("a",0)
  // cannot collide with ("a",...) continuations.
  absorb(child.id_, 0xc0de0001ull ^ (std::uint64_t(component.size()) << 32));
  std::uint64_t w = 0;
  int k = 0;
  for (unsigned char ch : component) {
    w |= std::uint64_t(ch) << (8 * k);
    if (++k == 8) {
      absorb(child.id_, w);
      w = 0;
      k = 0;
    }
  }
  if (k > 0) absorb(child.id_, w);
  absorb(child.id_, index);
  child.seed_from_id();
  return child;
}

void RngStream::seed_from_id() {
  std::uint64_t x = id_[0] ^ rotl(id_[1], 17);
  for (auto& word : s_) word = splitmix64(x);
  // xoshiro requires a nonzero state; splitmix output is never all-zero in
  // practice, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ull;
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  // Box-Muller; u must be > 0 for the log.
  double u;
  do {
    u = uniform01();
  } while (u == 0.0);
  double v = uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

void RngStream::normals(std::span<double> out) {
  for (auto& x : out) x = normal();
}

double RngStream::exponential(double rate) {
  require(rate > 0.0, errc::invalid_argument, "exponential rate must be positive");
  double u;
  do {
    u = uniform01();
  } while (u == 0.0);
  return -std::log(u) / rate;
}

std::uint64_t RngStream::poisson(double mean) {
  require(mean >= 0.0, errc::invalid_argument, "poisson mean must be nonnegative");
  require(mean < 700.0, errc::invalid_argument, "poisson mean too large for inversion sampling");
  if (mean == 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  double u = uniform01();
  std::uint64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / double(k);
    cdf += p;
    if (p < 1e-18 && double(k) > mean) break;  // tail exhausted by rounding
  }
  return k;
}

}  // namespace mkvsim
