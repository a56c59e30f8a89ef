#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mkvsim/measures.hpp"
#include "mkvsim/model.hpp"
#include "mkvsim/simulate.hpp"

namespace mkvsim {

struct RateFit {
  std::vector<double> xs, ys, ses;
  double slope = 0.0;
  double intercept = 0.0;      // in log space
  double residual_norm = 0.0;  // rms log residual
};

// Unweighted OLS on (log x, log y); SEs are carried through for reporting only.
RateFit rate_fit(std::span<const double> xs, std::span<const double> ys,
                 std::span<const double> ses);

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct AggregateRow {
  double x = 0.0;      // N or eps
  double error = 0.0;  // replicate mean
  double se = 0.0;     // replicate standard error
};

struct ExperimentReport {
  std::string kind;
  std::vector<AggregateRow> table;
  RateFit fit;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  std::vector<std::vector<double>> raw;  // [abscissa][replicate]
  double elapsed_seconds = 0.0;

  bool passed() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
};

struct ChaosConfig {
  std::vector<int> particle_counts;  // increasing, >= 3 values
  double horizon = 1.0;
  double step = 1e-3;
  int replicates = 16;
  int m_factor = 4;
  double slope_threshold = -0.4;
  int stat_particles = 32;  // fixed particle subset for the pathwise statistic
  LawSpec initial;
  std::uint64_t root = 0;
  int workers = 1;
};

// Propagation-of-chaos rates: pathwise sup-distance statistic and terminal
// empirical-W2 statistic against the auxiliary proxy law, with the coupling
// inequality checked on every replicate.
ExperimentReport chaos_experiment(std::shared_ptr<const Coefficients> coeffs, const QMatrix& q,
                                  const ChaosConfig& cfg);

struct AveragingConfig {
  std::vector<double> eps_list;  // decreasing
  double horizon = 1.0;
  double step = 1e-3;
  int replicates = 32;
  int proxy_size = 256;  // ensemble size standing in for the law
  double final_fraction = 0.2;
  LawSpec initial;
  std::uint64_t root = 0;
  int workers = 1;
};

// Two-time-scale averaging: E|Y_T^eps - Ybar_T|^2 under synchronous coupling,
// decreasing in eps; the coupling inequality checked on every replicate.
ExperimentReport averaging_experiment(std::shared_ptr<const Coefficients> coeffs, const QMatrix& q,
                                      const AveragingConfig& cfg);

struct CoupledClouds {
  EmpiricalMeasure a, b;  // index-paired
};

// W2(a,b)^2 <= mean |a_k - b_k|^2 + 1e-10 for every pair; a violation signals
// a transport-solver bug, not a modeling failure.
ExperimentReport lemma31_check(std::span<const CoupledClouds> pairs);

struct Fg14Config {
  LawSpec law;
  std::vector<int> sample_counts;
  int replicates = 16;
  int reference_size = 100000;
  double slope_threshold = -0.4;
  std::uint64_t root = 0;
  int workers = 1;
};

// Empirical-measure convergence rate: E[W2^2(mu_N, reference)] vs N. d = 1
// compares against the full reference via the quantile coupling; d >= 2 against
// the reference subsampled to N by exact assignment.
ExperimentReport fg14_experiment(const Fg14Config& cfg);

}
