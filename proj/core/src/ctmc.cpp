#include "mkvsim/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "mkvsim/errors.hpp"

namespace mkvsim {

namespace {

// Strong connectivity of the positive-rate digraph: BFS forward and backward
// from state 0 must each reach every state.
bool strongly_connected(const QMatrix& q) {
  const int m = q.size;
  auto reach = [&](bool transpose) {
    std::vector<char> seen(m, 0);
    std::queue<int> bfs;
    bfs.push(0);
    seen[0] = 1;
    int visited = 1;
    while (!bfs.empty()) {
      int i = bfs.front();
      bfs.pop();
      for (int j = 0; j < m; ++j) {
        if (j == i || seen[j]) continue;
        double r = transpose ? q.rate(j, i) : q.rate(i, j);
        if (r > 0.0) {
          seen[j] = 1;
          ++visited;
          bfs.push(j);
        }
      }
    }
    return visited == m;
  };
  return reach(false) && reach(true);
}

// Least squares for the (m+1) x m system (Q^T; 1...1) pi = (0; 1) via normal
// equations with partial-pivot elimination. m is desk-scale, conditioning is a
// non-issue.
std::vector<double> solve_stationary(const QMatrix& q) {
  const int m = q.size;
  std::vector<double> ata(std::size_t(m) * m, 0.0), atb(m, 0.0);
  auto entry = [&](int row, int col) -> double {
    if (row < m) return q.rate(col, row);  // Q^T
    return 1.0;                            // normalization row
  };
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double s = 0.0;
      for (int r = 0; r <= m; ++r) s += entry(r, a) * entry(r, b);
      ata[std::size_t(a) * m + b] = s;
    }
  for (int a = 0; a < m; ++a) atb[a] = entry(m, a);  // rhs is e_{m} so A^T b is the ones row

  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::fabs(ata[std::size_t(r) * m + col]) > std::fabs(ata[std::size_t(piv) * m + col]))
        piv = r;
    if (piv != col) {
      for (int c = 0; c < m; ++c)
        std::swap(ata[std::size_t(col) * m + c], ata[std::size_t(piv) * m + c]);
      std::swap(atb[col], atb[piv]);
    }
    double d = ata[std::size_t(col) * m + col];
    require(std::fabs(d) > 1e-300, errc::solve_failed, "stationary system is singular");
    for (int r = col + 1; r < m; ++r) {
      double f = ata[std::size_t(r) * m + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < m; ++c)
        ata[std::size_t(r) * m + c] -= f * ata[std::size_t(col) * m + c];
      atb[r] -= f * atb[col];
    }
  }
  std::vector<double> x(m);
  for (int r = m - 1; r >= 0; --r) {
    double s = atb[r];
    for (int c = r + 1; c < m; ++c) s -= ata[std::size_t(r) * m + c] * x[c];
    x[r] = s / ata[std::size_t(r) * m + r];
  }
  return x;
}

}  // namespace

QMatrix build_qmatrix(const std::vector<std::vector<double>>& rates) {
  const int m = int(rates.size());
  require(m >= 2, errc::invalid_argument, "rate matrix must have size >= 2");
  for (const auto& row : rates)
    require(int(row.size()) == m, errc::invalid_argument, "rate matrix must be square");

  bool all_diag_zero = true;
  bool any_offdiag_positive = false;
  for (int i = 0; i < m; ++i) {
    if (rates[i][i] != 0.0) all_diag_zero = false;
    for (int j = 0; j < m; ++j)
      if (j != i && rates[i][j] > 0.0) any_offdiag_positive = true;
  }
  const bool offdiag_form = all_diag_zero && any_offdiag_positive;

  QMatrix q;
  q.size = m;
  q.rates.assign(std::size_t(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    double offsum = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      double r = rates[i][j];
      require(r >= 0.0, errc::negative_rate, "off-diagonal rate is negative");
      q.rates[std::size_t(i) * m + j] = r;
      offsum += r;
    }
    if (offdiag_form) {
      q.rates[std::size_t(i) * m + i] = -offsum;
    } else {
      double rowsum = rates[i][i] + offsum;
      require(std::fabs(rowsum) <= 1e-9, errc::non_conservative,
              "row " + std::to_string(i) + " sums to " + std::to_string(rowsum));
      q.rates[std::size_t(i) * m + i] = -offsum;  // exact conservativeness
    }
  }
  require(strongly_connected(q), errc::reducible, "positive-rate digraph is not strongly connected");
  return q;
}

ProbVector ProbVector::indicator(int size, int i) {
  ProbVector p;
  p.w.assign(size, 0.0);
  p.w.at(i) = 1.0;
  return p;
}

ProbVector ProbVector::uniform(int size) {
  ProbVector p;
  p.w.assign(size, 1.0 / size);
  return p;
}

ProbVector invariant_measure(const QMatrix& q) {
  auto x = solve_stationary(q);
  double total = 0.0;
  for (auto& v : x) {
    if (v < 0.0 && v > -1e-12) v = 0.0;  // least-squares rounding
    total += v;
  }
  require(total > 0.0, errc::solve_failed, "stationary solve produced a nonpositive vector");
  for (auto& v : x) v /= total;
  // residual check: pi Q = 0
  for (int j = 0; j < q.size; ++j) {
    double r = 0.0;
    for (int i = 0; i < q.size; ++i) r += x[i] * q.rate(i, j);
    require(std::fabs(r) <= 1e-10, errc::solve_failed, "stationary residual exceeds tolerance");
  }
  ProbVector pi;
  pi.w = std::move(x);
  return pi;
}

std::vector<double> transition_matrix(const QMatrix& q, double t) {
  require(t >= 0.0, errc::invalid_argument, "time must be nonnegative");
  const int m = q.size;
  std::vector<double> p(std::size_t(m) * m, 0.0);
  double lambda = 0.0;
  for (int i = 0; i < m; ++i) lambda = std::max(lambda, q.exit_rate(i));
  if (t == 0.0 || lambda == 0.0) {
    for (int i = 0; i < m; ++i) p[std::size_t(i) * m + i] = 1.0;
    return p;
  }

  // Keep the Poisson mean moderate; halve t and square the semigroup otherwise.
  // Squaring a stochastic matrix stays stochastic, so positivity survives.
  if (lambda * t > 40.0) {
    auto half = transition_matrix(q, t / 2.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int k = 0; k < m; ++k)
          s += half[std::size_t(i) * m + k] * half[std::size_t(k) * m + j];
        p[std::size_t(i) * m + j] = s;
      }
    return p;
  }

  // Uniformization: P_t = sum_k pois(k; lambda t) J^k with J = I + Q/lambda.
  std::vector<double> jump(std::size_t(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      jump[std::size_t(i) * m + j] = (i == j ? 1.0 : 0.0) + q.rate(i, j) / lambda;

  const double mu = lambda * t;
  double term = std::exp(-mu);
  double cum = term;
  std::vector<double> power(std::size_t(m) * m, 0.0), next(std::size_t(m) * m);
  for (int i = 0; i < m; ++i) power[std::size_t(i) * m + i] = 1.0;
  for (std::size_t idx = 0; idx < p.size(); ++idx) p[idx] = term * power[idx];
  int k = 0;
  while (1.0 - cum >= 1e-14) {
    ++k;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int l = 0; l < m; ++l)
          s += power[std::size_t(i) * m + l] * jump[std::size_t(l) * m + j];
        next[std::size_t(i) * m + j] = s;
      }
    power.swap(next);
    term *= mu / double(k);
    cum += term;
    for (std::size_t idx = 0; idx < p.size(); ++idx) p[idx] += term * power[idx];
  }
  for (auto& x : p)
    if (x < 0.0) x = 0.0;  // clamp -1e-17 style rounding
  return p;
}

double tv_distance(const ProbVector& p, const ProbVector& q) {
  require(p.w.size() == q.w.size(), errc::length_mismatch, "probability vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.w.size(); ++i) s += std::fabs(p.w[i] - q.w[i]);
  return s;
}

ErgodicProfile ergodic_profile(const QMatrix& q, std::span<const double> grid) {
  require(grid.size() >= 3, errc::invalid_argument, "ergodic profile needs at least 3 grid times");
  for (std::size_t k = 1; k < grid.size(); ++k)
    require(grid[k] > grid[k - 1], errc::invalid_argument, "grid times must be increasing");

  const int m = q.size;
  auto pi = invariant_measure(q);
  ErgodicProfile prof;
  prof.states = m;
  prof.times.assign(grid.begin(), grid.end());
  prof.tv.resize(grid.size() * std::size_t(m));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto pt = transition_matrix(q, grid[k]);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += std::fabs(pt[std::size_t(i) * m + j] - pi.w[j]);
      prof.tv[k * std::size_t(m) + i] = s;
    }
  }

  // exponential fit on the state-maximum curve, skipping values at rounding level
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double mx = 0.0;
    for (int i = 0; i < m; ++i) mx = std::max(mx, prof.at(k, i));
    if (mx <= 1e-250) continue;
    double x = grid[k], y = std::log(mx);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0.0)
    prof.decay_rate = -((n * sxy - sx * sy) / (n * sxx - sx * sx));
  return prof;
}

int ChainPath::state_at(double t) const {
  // last jump with time <= t
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_state;
  return states[std::size_t(it - jump_times.begin()) - 1];
}

int ChainPath::state_before(double t) const {
  auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_state;
  return states[std::size_t(it - jump_times.begin()) - 1];
}

ChainPath ChainPath::frozen(int i0, double horizon) {
  ChainPath p;
  p.initial_state = i0;
  p.horizon = horizon;
  return p;
}

ChainPath sample_path(const QMatrix& q, int i0, double horizon, double eps, RngStream& stream) {
  require(horizon > 0.0, errc::invalid_argument, "horizon must be positive");
  require(eps > 0.0, errc::invalid_argument, "time scale must be positive");
  require(i0 >= 0 && i0 < q.size, errc::invalid_argument, "initial state out of range");

  ChainPath path;
  path.initial_state = i0;
  path.horizon = horizon;
  path.time_scale = eps;
  double t = 0.0;
  int i = i0;
  for (;;) {
    double r = q.exit_rate(i);  // positive for every state of an irreducible chain
    t += stream.exponential(r / eps);
    if (t > horizon) break;
    double u = stream.uniform01() * r;
    double cum = 0.0;
    int j = -1;
    for (int cand = 0; cand < q.size; ++cand) {
      if (cand == i) continue;
      cum += q.rate(i, cand);
      if (u < cum) {
        j = cand;
        break;
      }
    }
    if (j < 0) {  // u landed on the last positive sliver by rounding
      for (int cand = q.size - 1; cand >= 0; --cand)
        if (cand != i && q.rate(i, cand) > 0.0) {
          j = cand;
          break;
        }
    }
    path.jump_times.push_back(t);
    path.states.push_back(j);
    i = j;
  }
  return path;
}

}  // namespace mkvsim
