#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mkvsim/rng.hpp"

namespace mkvsim {

enum class MarkLaw { point_mass, uniform_box, gaussian, two_point };

// Named distribution on R^d with analytic moments. Doubles as the mark law of a
// jump measure and as an initial law for particles.
struct LawSpec {
  MarkLaw kind = MarkLaw::point_mass;
  int dim = 1;
  std::vector<double> a;  // point: value; uniform_box: lower corner; gaussian: mean; two_point: first atom
  std::vector<double> b;  // uniform_box: upper corner; two_point: second atom
  double sd = 1.0;        // gaussian: isotropic standard deviation
  double prob = 0.5;      // two_point: probability of atom a

  static LawSpec point(std::vector<double> value);
  static LawSpec uniform_box(std::vector<double> lo, std::vector<double> hi);
  static LawSpec gaussian(std::vector<double> mean, double sd);
  static LawSpec two_point(std::vector<double> a, std::vector<double> b, double prob);

  void sample(RngStream& stream, std::span<double> out) const;
  std::vector<double> mean() const;
  // E|Z|^2 (full squared norm, all coordinates).
  double second_moment() const;
  // E|Z|; closed form for point/two_point in any d, gaussian and uniform_box in d = 1.
  double abs_moment() const;
};

struct EnvelopeSpec {
  double offset = 0.0;
  double slope = 0.0;
  double operator()(double mark_norm) const { return offset + slope * mark_norm; }
};

// Finite-activity jump measure: total rate plus normalized mark law.
struct JumpSpec {
  double rate = 0.0;  // lambda(R^d), must be finite and positive for active jumps
  LawSpec marks;
  std::optional<EnvelopeSpec> envelope;

  int dim() const { return marks.dim; }
  // Moments of the normalized mark law.
  std::vector<double> mark_mean() const { return marks.mean(); }
  double mark_second_moment() const { return marks.second_moment(); }
};

struct JumpBatch {
  int dim = 1;
  std::vector<double> times;  // increasing, within the sampled step
  std::vector<double> marks;  // count x dim, row-major

  std::size_t count() const { return times.size(); }
  std::span<const double> mark(std::size_t k) const {
    return {marks.data() + k * std::size_t(dim), std::size_t(dim)};
  }
};

// Compound-Poisson batch on [t0, t0+h): count ~ Poisson(rate*h), times uniform
// in the step (sorted), marks i.i.d. from the mark law.
JumpBatch sample_jump_batch(const JumpSpec& spec, double t0, double h, RngStream& stream);

// sum_j f(z_j) - h * integral(f dlambda); the caller supplies f at the batch
// marks and the closed-form (or quadrature) compensator integral.
double compensate_integral(const JumpBatch& batch, std::span<const double> f_at_marks,
                           double integral_f_dlambda, double h);

}
