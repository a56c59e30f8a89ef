#include "mkvsim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mkvsim/errors.hpp"

namespace mkvsim {

namespace {

void append_dedup(std::vector<double>& times, double t) {
  if (!times.empty() && t - times.back() < 1e-12) return;
  times.push_back(t);
}

struct EngineScratch {
  std::vector<double> b, sigma, comp, g, dw, next;
  JumpBatch batch;

  explicit EngineScratch(int d)
      : b(d), sigma(std::size_t(d) * d), comp(d), g(d), dw(d), next(d) {
    batch.dim = d;
  }
};

// Compound-Poisson batch sampled into reused storage; consumption pattern is
// identical to sample_jump_batch.
void fill_jump_batch(const JumpSpec& spec, double t0, double dt, RngStream& stream,
                     JumpBatch& batch) {
  batch.times.clear();
  batch.marks.clear();
  if (spec.rate == 0.0) return;
  const int d = spec.dim();
  std::uint64_t k = stream.poisson(spec.rate * dt);
  batch.times.resize(k);
  for (auto& t : batch.times) t = t0 + dt * stream.uniform01();
  std::sort(batch.times.begin(), batch.times.end());
  batch.marks.resize(k * std::size_t(d));
  for (std::uint64_t j = 0; j < k; ++j)
    spec.marks.sample(stream, {batch.marks.data() + j * std::size_t(d), std::size_t(d)});
}

void euler_step_scratch(const Coefficients& coeffs, std::span<const double> x,
                        const MeasureView& mu, int state, std::span<const double> dw,
                        const JumpBatch& jumps, double dt, EngineScratch& s,
                        std::span<double> out) {
  const int d = coeffs.dim();
  coeffs.drift(x, mu, state, {s.b.data(), s.b.size()});
  coeffs.diffusion(x, mu, state, {s.sigma.data(), s.sigma.size()});
  coeffs.jump_compensator(x, mu, state, {s.comp.data(), s.comp.size()});
  for (int c = 0; c < d; ++c) out[c] = x[c] + (s.b[c] - s.comp[c]) * dt;
  for (int r = 0; r < d; ++r) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += s.sigma[std::size_t(r) * d + c] * dw[c];
    out[r] += acc;
  }
  for (std::size_t j = 0; j < jumps.count(); ++j) {
    coeffs.jump_coeff(x, mu, state, jumps.mark(j), {s.g.data(), s.g.size()});
    for (int c = 0; c < d; ++c) out[c] += s.g[c];
  }
  for (int c = 0; c < d; ++c)
    require(std::isfinite(out[c]), errc::non_finite_state, "state became non-finite");
}

struct ParticleStreams {
  RngStream bm, jump;
};

std::vector<ParticleStreams> make_streams(std::uint64_t root, int count) {
  auto base = RngStream::from_root(root);
  std::vector<ParticleStreams> s;
  s.reserve(count);
  for (int k = 0; k < count; ++k)
    s.push_back({base.derive("omega1", std::uint64_t(k)),
                 base.derive("omega1-jump", std::uint64_t(k))});
  return s;
}

void draw_initial(const LawSpec& initial, std::uint64_t root, int count, int dim,
                  std::span<double> out) {
  auto base = RngStream::from_root(root);
  for (int k = 0; k < count; ++k) {
    auto s = base.derive("omega1-init", std::uint64_t(k));
    initial.sample(s, out.subspan(std::size_t(k) * dim, std::size_t(dim)));
  }
}

}  // namespace

TimeGrid TimeGrid::uniform(double horizon, double step) {
  require(horizon > 0.0, errc::invalid_argument, "horizon must be positive");
  require(step > 0.0, errc::invalid_argument, "step must be positive");
  TimeGrid g;
  g.horizon = horizon;
  g.base_step = step;
  const std::size_t k = std::size_t(std::ceil(horizon / step - 1e-9));
  g.times.reserve(k + 1);
  g.times.push_back(0.0);
  for (std::size_t j = 1; j < k; ++j) append_dedup(g.times, double(j) * step);
  append_dedup(g.times, horizon);
  return g;
}

TimeGrid TimeGrid::with_chain(double horizon, double step, const ChainPath& chain) {
  TimeGrid base = uniform(horizon, step);
  TimeGrid g;
  g.horizon = horizon;
  g.base_step = step;
  g.times.reserve(base.times.size() + chain.jump_times.size());
  std::size_t i = 0, j = 0;
  while (i < base.times.size() || j < chain.jump_times.size()) {
    double t;
    if (j >= chain.jump_times.size() ||
        (i < base.times.size() && base.times[i] <= chain.jump_times[j]))
      t = base.times[i++];
    else
      t = chain.jump_times[j++];
    if (t > horizon) continue;
    append_dedup(g.times, t);
  }
  if (g.times.back() < horizon) g.times.push_back(horizon);
  return g;
}

TimeGrid TimeGrid::merge(const TimeGrid& a, const TimeGrid& b) {
  require(std::fabs(a.horizon - b.horizon) <= 1e-12, errc::grid_mismatch,
          "grids have different horizons");
  TimeGrid g;
  g.horizon = a.horizon;
  g.base_step = std::min(a.base_step, b.base_step);
  std::size_t i = 0, j = 0;
  while (i < a.times.size() || j < b.times.size()) {
    double t;
    if (j >= b.times.size() || (i < a.times.size() && a.times[i] <= b.times[j]))
      t = a.times[i++];
    else
      t = b.times[j++];
    append_dedup(g.times, t);
  }
  return g;
}

EmpiricalMeasure ParticleEnsemble::measure_at(std::size_t t_index) const {
  auto s = slab(t_index);
  return EmpiricalMeasure::from_flat(dim, std::vector<double>(s.begin(), s.end()));
}

void euler_step(const Coefficients& coeffs, std::span<const double> x, const MeasureView& mu,
                int state, std::span<const double> dW, const JumpBatch& jumps, double dt,
                std::span<double> out) {
  require(dt > 0.0, errc::invalid_argument, "substep must be positive");
  EngineScratch s(coeffs.dim());
  euler_step_scratch(coeffs, x, mu, state, dW, jumps, dt, s, out);
}

namespace {

void advance_ensemble(const Coefficients& coeffs, const ChainPath* chain, const TimeGrid& grid,
                      int count, std::uint64_t root, const LawSpec& initial,
                      std::vector<double>& traj, const std::vector<double>* frozen_flow = nullptr,
                      int flow_count = 0) {
  const int d = coeffs.dim();
  require(initial.dim == d, errc::dimension_mismatch,
          "initial law dimension does not match the model");
  const std::size_t width = std::size_t(count) * d;
  const std::size_t ntimes = grid.times.size();
  traj.assign(ntimes * width, 0.0);
  draw_initial(initial, root, count, d, {traj.data(), width});

  auto streams = make_streams(root, count);
  EngineScratch scratch(d);
  const std::size_t flow_width = frozen_flow ? std::size_t(flow_count) * d : 0;

  for (std::size_t j = 0; j + 1 < ntimes; ++j) {
    const double t = grid.times[j];
    const double dt = grid.times[j + 1] - grid.times[j];
    const int state = chain ? chain->state_at(t) : 0;
    const double sdt = std::sqrt(dt);
    MeasureView mu = frozen_flow
                         ? MeasureView({frozen_flow->data() + j * flow_width, flow_width},
                                       std::size_t(flow_count), d)
                         : MeasureView({traj.data() + j * width, width}, std::size_t(count), d);
    double* cur = traj.data() + j * width;
    double* nxt = traj.data() + (j + 1) * width;
    for (int k = 0; k < count; ++k) {
      for (int c = 0; c < d; ++c) scratch.dw[c] = streams[k].bm.normal() * sdt;
      fill_jump_batch(coeffs.jumps(), t, dt, streams[k].jump, scratch.batch);
      try {
        euler_step_scratch(coeffs, {cur + std::size_t(k) * d, std::size_t(d)}, mu, state,
                           {scratch.dw.data(), scratch.dw.size()}, scratch.batch, dt, scratch,
                           {nxt + std::size_t(k) * d, std::size_t(d)});
      } catch (const Error& e) {
        if (e.code() != errc::non_finite_state) throw;
        raise(errc::non_finite_state, "particle " + std::to_string(k) + " at t = " +
                                          std::to_string(grid.times[j + 1]));
      }
    }
  }
}

}  // namespace

ParticleEnsemble run_particle_system(const Coefficients& coeffs,
                                     std::shared_ptr<const ChainPath> chain,
                                     const SimConfig& cfg) {
  require(cfg.count >= 1, errc::invalid_argument, "particle count must be >= 1");
  require(chain != nullptr, errc::invalid_argument, "chain path is required");
  ParticleEnsemble e;
  e.count = cfg.count;
  e.dim = coeffs.dim();
  e.chain = chain;
  e.grid = TimeGrid::with_chain(cfg.horizon, cfg.step, *chain);
  advance_ensemble(coeffs, chain.get(), e.grid, cfg.count, cfg.root, cfg.initial, e.traj);
  return e;
}

ParticleEnsemble run_particle_system(const Coefficients& coeffs, const QMatrix& q,
                                     const SimConfig& cfg) {
  auto cs = RngStream::from_root(cfg.root).derive("omega0", 0);
  auto chain = std::make_shared<ChainPath>(
      sample_path(q, cfg.chain_start, cfg.horizon, cfg.eps, cs));
  return run_particle_system(coeffs, std::move(chain), cfg);
}

std::pair<ParticleEnsemble, ParticleEnsemble> run_auxiliary_coupled(
    const Coefficients& coeffs, std::shared_ptr<const ChainPath> chain, const SimConfig& cfg,
    int aux_count) {
  require(aux_count >= cfg.count, errc::invalid_argument,
          "auxiliary ensemble must be at least as large as the system");
  ParticleEnsemble sys = run_particle_system(coeffs, chain, cfg);
  SimConfig aux_cfg = cfg;
  aux_cfg.count = aux_count;
  ParticleEnsemble aux;
  aux.count = aux_count;
  aux.dim = coeffs.dim();
  aux.chain = chain;
  aux.grid = sys.grid;
  advance_ensemble(coeffs, chain.get(), aux.grid, aux_count, cfg.root, cfg.initial, aux.traj);
  return {std::move(sys), std::move(aux)};
}

std::pair<ParticleEnsemble, ParticleEnsemble> run_auxiliary_coupled(const Coefficients& coeffs,
                                                                    const QMatrix& q,
                                                                    const SimConfig& cfg,
                                                                    int aux_count) {
  auto cs = RngStream::from_root(cfg.root).derive("omega0", 0);
  auto chain = std::make_shared<ChainPath>(
      sample_path(q, cfg.chain_start, cfg.horizon, cfg.eps, cs));
  return run_auxiliary_coupled(coeffs, std::move(chain), cfg, aux_count);
}

ParticleEnsemble run_averaged(const AveragedCoefficients& coeffs, const SimConfig& cfg,
                              const TimeGrid* partner_grid) {
  require(cfg.count >= 1, errc::invalid_argument, "particle count must be >= 1");
  ParticleEnsemble e;
  e.count = cfg.count;
  e.dim = coeffs.dim();
  if (partner_grid) {
    require(std::fabs(partner_grid->horizon - cfg.horizon) <= 1e-12, errc::grid_mismatch,
            "partner grid horizon does not match the run horizon");
    e.grid = *partner_grid;
  } else {
    e.grid = TimeGrid::uniform(cfg.horizon, cfg.step);
  }
  advance_ensemble(coeffs, nullptr, e.grid, cfg.count, cfg.root, cfg.initial, e.traj);
  return e;
}

PicardResult picard_solve(const Coefficients& coeffs, std::shared_ptr<const ChainPath> chain,
                          const PicardConfig& cfg) {
  require(chain != nullptr, errc::invalid_argument, "chain path is required");
  require(coeffs.g_state_free(), errc::g_not_state_free,
          "the decoupling iteration requires a state-free g");
  require(cfg.tol > 0.0, errc::invalid_argument, "tolerance must be positive");
  require(cfg.count >= 2, errc::invalid_argument, "flow needs at least 2 paths");
  require(cfg.max_iterations >= 1, errc::invalid_argument, "need at least one iteration");
  if (coeffs.dim() >= 2)
    require(std::size_t(cfg.count) <= cfg.assignment_cap, errc::too_large,
            "flow size exceeds the exact-transport cap for d >= 2");

  const int d = coeffs.dim();
  const TimeGrid grid = TimeGrid::with_chain(cfg.horizon, cfg.step, *chain);
  const std::size_t width = std::size_t(cfg.count) * d;
  const std::size_t ntimes = grid.times.size();

  // constant initial flow from the particles' own initial draws
  std::vector<double> cur(ntimes * width);
  draw_initial(cfg.initial, cfg.root, cfg.count, d, {cur.data(), width});
  for (std::size_t j = 1; j < ntimes; ++j)
    std::copy_n(cur.data(), width, cur.data() + j * width);

  auto apply_psi = [&](const std::vector<double>& flow, std::vector<double>& out) {
    advance_ensemble(coeffs, chain.get(), grid, cfg.count, cfg.root, cfg.initial, out, &flow,
                     cfg.count);
  };

  auto flow_distance = [&](const std::vector<double>& fa, const std::vector<double>& fb) {
    double worst = 0.0;
    for (std::size_t j = 0; j < ntimes; ++j) {
      auto a = EmpiricalMeasure::from_flat(
          d, std::vector<double>(fa.data() + j * width, fa.data() + (j + 1) * width));
      auto b = EmpiricalMeasure::from_flat(
          d, std::vector<double>(fb.data() + j * width, fb.data() + (j + 1) * width));
      double dist = (d == 1) ? w2_1d(a, b) : w2_assignment(a, b, cfg.assignment_cap);
      worst = std::max(worst, dist);
    }
    return worst;
  };

  std::vector<double> next(ntimes * width);
  apply_psi(cur, next);  // initialization pass, not counted
  cur.swap(next);

  PicardResult res;
  for (int n = 1; n <= cfg.max_iterations; ++n) {
    apply_psi(cur, next);
    double dist = flow_distance(cur, next);
    res.distances.push_back(dist);
    cur.swap(next);
    if (dist < cfg.tol) {
      res.iterations = n;
      res.flow.count = cfg.count;
      res.flow.dim = d;
      res.flow.grid = grid;
      res.flow.data = std::move(cur);
      return res;
    }
  }
  std::string seq;
  for (double v : res.distances) seq += (seq.empty() ? "" : ", ") + std::to_string(v);
  raise(errc::no_convergence,
        "decoupling iteration did not reach tol = " + std::to_string(cfg.tol) + " in " +
            std::to_string(cfg.max_iterations) + " iterations (distances: " + seq + ")");
}

}  // namespace mkvsim
