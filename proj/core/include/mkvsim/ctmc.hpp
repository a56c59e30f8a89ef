#pragma once

#include <span>
#include <vector>

#include "mkvsim/rng.hpp"

namespace mkvsim {

// Conservative irreducible transition rate matrix on a finite state space.
struct QMatrix {
  int size = 0;
  std::vector<double> rates;  // size x size, row-major, rows sum to zero

  double rate(int i, int j) const { return rates[std::size_t(i) * size + j]; }
  // Total jump rate out of state i, |q_ii|.
  double exit_rate(int i) const { return -rate(i, i); }
};

// Accepts either a full conservative matrix or off-diagonal rates only (all
// diagonal entries zero); in the latter case the diagonal is recomputed as the
// negative off-diagonal row sum. Validates nonnegativity of off-diagonal rates,
// conservativeness, and irreducibility (strong connectivity of the positive-rate
// digraph).
QMatrix build_qmatrix(const std::vector<std::vector<double>>& rates);

struct ProbVector {
  std::vector<double> w;

  int size() const { return int(w.size()); }
  static ProbVector indicator(int size, int i);
  static ProbVector uniform(int size);
};

// Unique invariant measure: pi Q = 0, sum pi = 1, via a dense solve of the
// transposed system with the normalization row appended.
ProbVector invariant_measure(const QMatrix& q);

// P_t = exp(tQ) by uniformization; entrywise nonnegative, rows sum to 1.
// Row-major size x size.
std::vector<double> transition_matrix(const QMatrix& q, double t);

// sum_i |p_i - q_i|, in [0, 2].
double tv_distance(const ProbVector& p, const ProbVector& q);

struct ErgodicProfile {
  std::vector<double> times;
  std::vector<double> tv;  // times.size() x size, row-major: tv[t*size + i] = ||P_t(i,.) - pi||_var
  double decay_rate = 0.0; // fitted exponential rate of the state-maximum curve
  int states = 0;

  double at(std::size_t t_index, int state) const { return tv[t_index * states + state]; }
};

ErgodicProfile ergodic_profile(const QMatrix& q, std::span<const double> grid);

// Piecewise-constant cadlag path of the switching chain on [0, horizon].
struct ChainPath {
  int initial_state = 0;
  std::vector<double> jump_times;  // strictly increasing, in (0, horizon]
  std::vector<int> states;         // state after each jump
  double horizon = 0.0;
  double time_scale = 1.0;         // the path is distributed as generator Q/time_scale

  // Cadlag evaluation: state at time t (post-jump at jump times).
  int state_at(double t) const;
  // Left limit: state just before t.
  int state_before(double t) const;
  std::size_t jump_count() const { return jump_times.size(); }

  // Degenerate path holding one state over the whole horizon.
  static ChainPath frozen(int i0, double horizon);
};

// Gillespie simulation of the chain with generator Q/eps started at i0.
ChainPath sample_path(const QMatrix& q, int i0, double horizon, double eps, RngStream& stream);

}
