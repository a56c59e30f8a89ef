#include "mkvsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mkvsim/errors.hpp"

namespace mkvsim {

namespace {

void check_dim(const LawSpec& law) {
  require(law.dim >= 1, errc::invalid_argument, "law dimension must be >= 1");
  auto need = [&](const std::vector<double>& v, const char* name) {
    require(int(v.size()) == law.dim, errc::dimension_mismatch,
            std::string("law parameter '") + name + "' has wrong dimension");
  };
  switch (law.kind) {
    case MarkLaw::point_mass: need(law.a, "value"); break;
    case MarkLaw::uniform_box:
      need(law.a, "lo");
      need(law.b, "hi");
      for (int c = 0; c < law.dim; ++c)
        require(law.a[c] <= law.b[c], errc::invalid_argument, "uniform box has lo > hi");
      break;
    case MarkLaw::gaussian:
      need(law.a, "mean");
      require(law.sd >= 0.0, errc::invalid_argument, "gaussian sd must be nonnegative");
      break;
    case MarkLaw::two_point:
      need(law.a, "a");
      need(law.b, "b");
      require(law.prob >= 0.0 && law.prob <= 1.0, errc::invalid_argument,
              "two_point probability outside [0,1]");
      break;
  }
}

double sqnorm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(const std::vector<double>& v) { return std::sqrt(sqnorm(v)); }

}  // namespace

LawSpec LawSpec::point(std::vector<double> value) {
  LawSpec l;
  l.kind = MarkLaw::point_mass;
  l.dim = int(value.size());
  l.a = std::move(value);
  check_dim(l);
  return l;
}

LawSpec LawSpec::uniform_box(std::vector<double> lo, std::vector<double> hi) {
  LawSpec l;
  l.kind = MarkLaw::uniform_box;
  l.dim = int(lo.size());
  l.a = std::move(lo);
  l.b = std::move(hi);
  check_dim(l);
  return l;
}

LawSpec LawSpec::gaussian(std::vector<double> mean, double sd) {
  LawSpec l;
  l.kind = MarkLaw::gaussian;
  l.dim = int(mean.size());
  l.a = std::move(mean);
  l.sd = sd;
  check_dim(l);
  return l;
}

LawSpec LawSpec::two_point(std::vector<double> a, std::vector<double> b, double prob) {
  LawSpec l;
  l.kind = MarkLaw::two_point;
  l.dim = int(a.size());
  l.a = std::move(a);
  l.b = std::move(b);
  l.prob = prob;
  check_dim(l);
  return l;
}

void LawSpec::sample(RngStream& stream, std::span<double> out) const {
  require(int(out.size()) == dim, errc::dimension_mismatch, "sample output has wrong dimension");
  switch (kind) {
    case MarkLaw::point_mass:
      std::copy(a.begin(), a.end(), out.begin());
      break;
    case MarkLaw::uniform_box:
      for (int c = 0; c < dim; ++c) out[c] = a[c] + (b[c] - a[c]) * stream.uniform01();
      break;
    case MarkLaw::gaussian:
      for (int c = 0; c < dim; ++c) out[c] = a[c] + sd * stream.normal();
      break;
    case MarkLaw::two_point: {
      const auto& atom = (stream.uniform01() < prob) ? a : b;
      std::copy(atom.begin(), atom.end(), out.begin());
      break;
    }
  }
}

std::vector<double> LawSpec::mean() const {
  switch (kind) {
    case MarkLaw::point_mass:
      return a;
    case MarkLaw::uniform_box: {
      std::vector<double> m(dim);
      for (int c = 0; c < dim; ++c) m[c] = 0.5 * (a[c] + b[c]);
      return m;
    }
    case MarkLaw::gaussian:
      return a;
    case MarkLaw::two_point: {
      std::vector<double> m(dim);
      for (int c = 0; c < dim; ++c) m[c] = prob * a[c] + (1.0 - prob) * b[c];
      return m;
    }
  }
  return {};
}

double LawSpec::second_moment() const {
  switch (kind) {
    case MarkLaw::point_mass:
      return sqnorm(a);
    case MarkLaw::uniform_box: {
      // E z_c^2 = (lo^2 + lo*hi + hi^2)/3 per coordinate.
      double s = 0.0;
      for (int c = 0; c < dim; ++c)
        s += (a[c] * a[c] + a[c] * b[c] + b[c] * b[c]) / 3.0;
      return s;
    }
    case MarkLaw::gaussian:
      return sqnorm(a) + double(dim) * sd * sd;
    case MarkLaw::two_point:
      return prob * sqnorm(a) + (1.0 - prob) * sqnorm(b);
  }
  return 0.0;
}

double LawSpec::abs_moment() const {
  switch (kind) {
    case MarkLaw::point_mass:
      return norm(a);
    case MarkLaw::two_point:
      return prob * norm(a) + (1.0 - prob) * norm(b);
    case MarkLaw::uniform_box: {
      require(dim == 1, errc::invalid_argument, "uniform_box abs moment only available in d=1");
      double lo = a[0], hi = b[0];
      if (hi == lo) return std::fabs(lo);
      // integral of |z| over [lo,hi] is (hi|hi| - lo|lo|)/2
      return (hi * std::fabs(hi) - lo * std::fabs(lo)) / (2.0 * (hi - lo));
    }
    case MarkLaw::gaussian: {
      require(dim == 1, errc::invalid_argument, "gaussian abs moment only available in d=1");
      // folded normal mean
      double m = a[0], s = sd;
      if (s == 0.0) return std::fabs(m);
      return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2.0 * s * s)) +
             m * std::erf(m / (s * std::numbers::sqrt2));
    }
  }
  return 0.0;
}

JumpBatch sample_jump_batch(const JumpSpec& spec, double t0, double h, RngStream& stream) {
  require(h > 0.0, errc::invalid_argument, "jump batch step must be positive");
  require(spec.rate >= 0.0, errc::invalid_argument, "jump rate must be nonnegative");
  JumpBatch batch;
  batch.dim = spec.dim();
  if (spec.rate == 0.0) return batch;
  std::uint64_t k = stream.poisson(spec.rate * h);
  batch.times.resize(k);
  for (auto& t : batch.times) t = t0 + h * stream.uniform01();
  std::sort(batch.times.begin(), batch.times.end());
  batch.marks.resize(k * std::size_t(batch.dim));
  for (std::uint64_t j = 0; j < k; ++j)
    spec.marks.sample(stream, {batch.marks.data() + j * std::size_t(batch.dim),
                               std::size_t(batch.dim)});
  return batch;
}

double compensate_integral(const JumpBatch& batch, std::span<const double> f_at_marks,
                           double integral_f_dlambda, double h) {
  require(f_at_marks.size() == batch.count(), errc::length_mismatch,
          "integrand values do not match batch marks");
  double s = 0.0;
  for (double v : f_at_marks) s += v;
  return s - h * integral_f_dlambda;
}

}  // namespace mkvsim
