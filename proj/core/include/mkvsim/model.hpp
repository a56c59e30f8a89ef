#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mkvsim/ctmc.hpp"
#include "mkvsim/noise.hpp"

namespace mkvsim {

// Read-only functional access to an equal-weight point cloud. Mean and second
// moment are precomputed once per view; kernel expectations stream over the
// backing points.
class MeasureView {
public:
  MeasureView(std::span<const double> flat, std::size_t count, int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return count_; }
  std::span<const double> mean() const { return {mean_.data(), mean_.size()}; }
  // integral |x|^2 mu(dx)
  double second_moment() const { return m2_; }
  std::span<const double> point(std::size_t k) const {
    return {flat_.data() + k * std::size_t(dim_), std::size_t(dim_)};
  }

  // E_mu[phi(X)]; phi: span<const double> -> double
  template <class F>
  double expect(F&& phi) const {
    double s = 0.0;
    for (std::size_t k = 0; k < count_; ++k) s += phi(point(k));
    return s / double(count_);
  }

private:
  std::span<const double> flat_;
  std::size_t count_;
  int dim_;
  std::vector<double> mean_;
  double m2_ = 0.0;
};

// Coefficient triple (b, sigma, g) with state indexing and measure dependence
// through MeasureView functionals. Evaluation is pure and reentrant.
class Coefficients {
public:
  virtual ~Coefficients() = default;

  int dim() const { return dim_; }
  int states() const { return states_; }
  const JumpSpec& jumps() const { return jumps_; }
  bool g_state_free() const { return g_state_free_; }

  virtual void drift(std::span<const double> x, const MeasureView& mu, int i,
                     std::span<double> out) const = 0;
  // out is dim x dim, row-major
  virtual void diffusion(std::span<const double> x, const MeasureView& mu, int i,
                         std::span<double> out) const = 0;
  virtual void jump_coeff(std::span<const double> x, const MeasureView& mu, int i,
                          std::span<const double> z, std::span<double> out) const = 0;

  // integral g(x, mu, i, z) lambda(dz), the per-unit-time compensator drift.
  // Default: fixed-node Monte Carlo quadrature over marks drawn once at
  // construction; built-ins override with closed forms.
  virtual void jump_compensator(std::span<const double> x, const MeasureView& mu, int i,
                                std::span<double> out) const;

protected:
  Coefficients(int dim, int states, JumpSpec jumps, bool g_state_free);

private:
  int dim_;
  int states_;
  JumpSpec jumps_;
  bool g_state_free_;
  std::vector<double> quad_marks_;  // [nodes][dim], for the default compensator
};

using ParamTable = std::map<std::string, std::vector<double>>;

// Gallery: "switching-mf-ou" (b = a_i(mean - x) + c_i, sigma = s_i I,
// g = gamma_i z), "switching-mf-ou-gxmu" (adds kappa (mean - x)|z| to g),
// "constant" (state-indexed constants). Unknown names and unknown or
// wrongly-sized parameters are rejected.
std::shared_ptr<Coefficients> builtin_model(const std::string& name, const ParamTable& params,
                                            int dim, int states, JumpSpec jumps);

// pi-weighted coefficient sums over the states. jump_coeff (and its
// compensator) additionally require the base g to be state-free.
class AveragedCoefficients : public Coefficients {
public:
  AveragedCoefficients(std::shared_ptr<const Coefficients> base, ProbVector pi);

  void drift(std::span<const double> x, const MeasureView& mu, int i,
             std::span<double> out) const override;
  void diffusion(std::span<const double> x, const MeasureView& mu, int i,
                 std::span<double> out) const override;
  void jump_coeff(std::span<const double> x, const MeasureView& mu, int i,
                  std::span<const double> z, std::span<double> out) const override;
  void jump_compensator(std::span<const double> x, const MeasureView& mu, int i,
                        std::span<double> out) const override;

  const ProbVector& pi() const { return pi_; }

private:
  std::shared_ptr<const Coefficients> base_;
  ProbVector pi_;
};

std::shared_ptr<AveragedCoefficients> average(std::shared_ptr<const Coefficients> coeffs,
                                              const ProbVector& pi);

struct AssumptionReport {
  double k1 = 0.0;  // max probe ratio for the Lipschitz condition
  double k2 = 0.0;  // max probe ratio for the growth condition
  bool envelope_declared = false;
  bool envelope_ok = true;
  int probes = 0;
  // worst-case witnesses for the k1 estimate
  std::vector<double> k1_x, k1_y;
  int k1_state = 0;
};

// Monte Carlo probing of the Lipschitz and growth conditions plus the declared
// jump envelope; raises EnvelopeViolated with the witness (i, z) on failure.
// Also cross-checks the g_state_free flag on random inputs.
AssumptionReport validate_assumptions(const Coefficients& coeffs, int probes, double radius,
                                      const RngStream& stream);

}
