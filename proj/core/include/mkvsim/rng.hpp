#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace mkvsim {

// Splittable counter-keyed stream on top of xoshiro256++.
//
// Streams are identified by a 128-bit digest of (root seed, label path), where a
// label path is a chain of (component, index) pairs, e.g.
//   from_root(seed).derive("replicate", 3).derive("omega1", 17)
// Distinct paths give independent streams; the same path gives the same bit
// sequence on every platform. Sampling helpers are hand-rolled because the
// std::* distributions are implementation-defined and would break cross-platform
// reproducibility.
class RngStream {
public:
  static RngStream from_root(std::uint64_t root);

  // Pure: does not advance or disturb *this.
  RngStream derive(std::string_view component, std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform on [0,1) with 53 random bits.
  double uniform01();

  // Standard normal via Box-Muller, one value per call (no cached spare, so
  // consumption is position-independent).
  double normal();

  void normals(std::span<double> out);

  // Exponential with the given rate, by inverse CDF.
  double exponential(double rate);

  // Poisson by inversion; requires mean < 700 (exp underflow guard).
  std::uint64_t poisson(double mean);

  std::uint64_t id_hi() const { return id_[0]; }
  std::uint64_t id_lo() const { return id_[1]; }

private:
  RngStream() = default;
  void seed_from_id();

  std::array<std::uint64_t, 2> id_{};  // digest of (root, label path)
  std::array<std::uint64_t, 4> s_{};   // xoshiro256++ state
};

}
