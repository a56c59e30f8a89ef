#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mkvsim/ctmc.hpp"
#include "mkvsim/measures.hpp"
#include "mkvsim/model.hpp"
#include "mkvsim/noise.hpp"

namespace mkvsim {

// Uniform step grid refined by chain switching times: no substep straddles a
// switch, so the left-endpoint state convention is exact.
struct TimeGrid {
  double horizon = 0.0;
  double base_step = 0.0;
  std::vector<double> times;  // 0 = t_0 < ... < t_K = horizon

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }

  static TimeGrid uniform(double horizon, double step);
  static TimeGrid with_chain(double horizon, double step, const ChainPath& chain);
  // Union of the two grids' times (shared horizon required).
  static TimeGrid merge(const TimeGrid& a, const TimeGrid& b);
};

struct ParticleEnsemble {
  int count = 0;
  int dim = 1;
  TimeGrid grid;
  std::shared_ptr<const ChainPath> chain;  // null for averaged (constant-environment) runs
  std::vector<double> traj;                // [time][particle * dim]

  std::span<const double> slab(std::size_t t_index) const {
    const std::size_t w = std::size_t(count) * dim;
    return {traj.data() + t_index * w, w};
  }
  std::span<const double> state(std::size_t t_index, int k) const {
    return {traj.data() + t_index * std::size_t(count) * dim + std::size_t(k) * dim,
            std::size_t(dim)};
  }
  MeasureView view_at(std::size_t t_index) const {
    return MeasureView(slab(t_index), std::size_t(count), dim);
  }
  EmpiricalMeasure measure_at(std::size_t t_index) const;
};

struct SimConfig {
  int count = 1;           // particles
  double horizon = 1.0;
  double step = 1e-3;
  double eps = 1.0;        // chain time scale
  int chain_start = 0;
  LawSpec initial;
  std::uint64_t root = 0;  // root seed
  int workers = 1;
};

// Single explicit Euler substep with left-endpoint freezing:
// out = x + b dt + sigma dW + sum_j g(z_j) - dt * integral(g dlambda).
// dW is the raw Brownian increment over the substep.
void euler_step(const Coefficients& coeffs, std::span<const double> x, const MeasureView& mu,
                int state, std::span<const double> dW, const JumpBatch& jumps, double dt,
                std::span<double> out);

// N-particle system with mean-field interaction: one chain path (streams
// ("omega0",0)), particle k driven by ("omega1",k) Brownian, ("omega1-jump",k)
// jump, and ("omega1-init",k) initial-value streams; the measure argument is
// the ensemble's own empirical measure at the substep's left endpoint.
ParticleEnsemble run_particle_system(const Coefficients& coeffs, const QMatrix& q,
                                     const SimConfig& cfg);
// Same, on an explicit chain path (degenerate controls, Picard inner runs).
ParticleEnsemble run_particle_system(const Coefficients& coeffs,
                                     std::shared_ptr<const ChainPath> chain,
                                     const SimConfig& cfg);

// System of size cfg.count plus auxiliary of size aux_count >= cfg.count on the
// same chain path and grid; auxiliary particles k < cfg.count reuse the system
// particles' streams and initial values (synchronous coupling), the rest use
// fresh streams. The auxiliary's measure argument is its own size-M cloud.
std::pair<ParticleEnsemble, ParticleEnsemble> run_auxiliary_coupled(const Coefficients& coeffs,
                                                                    const QMatrix& q,
                                                                    const SimConfig& cfg,
                                                                    int aux_count);
std::pair<ParticleEnsemble, ParticleEnsemble> run_auxiliary_coupled(
    const Coefficients& coeffs, std::shared_ptr<const ChainPath> chain, const SimConfig& cfg,
    int aux_count);

// Averaged (constant-environment) McKean-Vlasov proxy on pi-averaged
// coefficients; stream labels match run_particle_system so a run with the same
// root is synchronously coupled. An optional partner grid forces the substeps
// of the Y^eps run it will be compared with.
ParticleEnsemble run_averaged(const AveragedCoefficients& coeffs, const SimConfig& cfg,
                              const TimeGrid* partner_grid = nullptr);

struct MeasureFlow {
  int count = 0;
  int dim = 1;
  TimeGrid grid;
  std::vector<double> data;  // [time][count * dim]

  std::span<const double> slab(std::size_t t_index) const {
    const std::size_t w = std::size_t(count) * dim;
    return {data.data() + t_index * w, w};
  }
  MeasureView view_at(std::size_t t_index) const {
    return MeasureView(slab(t_index), std::size_t(count), dim);
  }
};

struct PicardResult {
  MeasureFlow flow;
  std::vector<double> distances;  // sup-t W2 between successive flows, per iteration
  int iterations = 0;
};

struct PicardConfig {
  int count = 256;  // M paths defining the empirical flow
  double horizon = 1.0;
  double step = 1e-3;
  double tol = 1e-2;
  int max_iterations = 15;
  LawSpec initial;
  std::uint64_t root = 0;
  int workers = 1;
  std::size_t assignment_cap = 512;  // flow-distance cloud cap for d >= 2
};

// Fixed-point iteration of the decoupling map on one chain path: solve M
// decoupled paths against the frozen flow, read off the next empirical flow,
// stop when the sup-t W2 between successive flows drops below tol. The same
// per-particle streams are replayed every iteration. Requires a state-free g.
PicardResult picard_solve(const Coefficients& coeffs, std::shared_ptr<const ChainPath> chain,
                          const PicardConfig& cfg);

}
