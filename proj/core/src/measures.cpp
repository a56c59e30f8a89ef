#include "mkvsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mkvsim/errors.hpp"

namespace mkvsim {

namespace {

void check_pair(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool equal_sizes) {
  require(a.dim == b.dim, errc::dimension_mismatch, "clouds have different dimensions");
  require(a.size() >= 1 && b.size() >= 1, errc::invalid_argument, "clouds must be nonempty");
  if (equal_sizes)
    require(a.size() == b.size(), errc::size_mismatch, "clouds have different sizes");
}

// ---- exact assignment (Jonker-Volgenant shortest augmenting path) ----
//
// Costs are evaluated on the fly, one source row at a time, against the target
// cloud stored coordinate-major so the row sweep vectorizes. Displaced rows in
// the augmenting row reduction go to the next sweep (re-running them in the
// same sweep degenerates into an unscaled auction). The Dijkstra scan keeps a
// compacted todo list and fuses relaxation with the next min extraction.

struct AssignmentScratch {
  std::vector<std::vector<double>> target_cm;  // [dim][n]
  std::vector<double> crow, v, dist, dist_at_scan;
  std::vector<int> rowsol, colsol, vrow, matches, pred, scanned, todo, freerows, newfree;
};

void cost_row(const double* a, const AssignmentScratch& s, int n, int d, bool squared,
              double* out) {
  {
    const double* b0 = s.target_cm[0].data();
    const double a0 = a[0];
    for (int j = 0; j < n; ++j) {
      double t = a0 - b0[j];
      out[j] = t * t;
    }
  }
  for (int c = 1; c < d; ++c) {
    const double* bc = s.target_cm[c].data();
    const double ac = a[c];
    for (int j = 0; j < n; ++j) {
      double t = ac - bc[j];
      out[j] += t * t;
    }
  }
  if (!squared)
    for (int j = 0; j < n; ++j) out[j] = std::sqrt(out[j]);
}

// Returns the minimal total cost; optimal pairing left in s.rowsol.
double solve_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool squared,
                        AssignmentScratch& s) {
  const int n = int(a.size());
  const int d = a.dim;
  const double inf = std::numeric_limits<double>::infinity();
  const double* src = a.points.data();

  s.target_cm.assign(d, std::vector<double>(n));
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < d; ++c) s.target_cm[c][j] = b.points[std::size_t(j) * d + c];
  s.crow.resize(n);
  s.v.assign(n, inf);
  s.vrow.assign(n, -1);
  s.rowsol.assign(n, -1);
  s.colsol.assign(n, -1);
  s.matches.assign(n, 0);

  // column reduction
  for (int i = 0; i < n; ++i) {
    cost_row(src + std::size_t(i) * d, s, n, d, squared, s.crow.data());
    for (int j = 0; j < n; ++j)
      if (s.crow[j] < s.v[j]) {
        s.v[j] = s.crow[j];
        s.vrow[j] = i;
      }
  }
  for (int j = n - 1; j >= 0; --j) {
    int i = s.vrow[j];
    if (s.matches[i]++ == 0) {
      s.rowsol[i] = j;
      s.colsol[j] = i;
    }
  }

  // reduction transfer
  s.freerows.clear();
  for (int i = 0; i < n; ++i) {
    if (s.matches[i] == 0) {
      s.freerows.push_back(i);
    } else if (s.matches[i] == 1 && n > 1) {
      int j1 = s.rowsol[i];
      cost_row(src + std::size_t(i) * d, s, n, d, squared, s.crow.data());
      double mn = inf;
      for (int j = 0; j < n; ++j)
        if (j != j1) mn = std::min(mn, s.crow[j] - s.v[j]);
      s.v[j1] -= mn;
    }
  }

  // augmenting row reduction
  for (int sweep = 0; sweep < 8 && !s.freerows.empty(); ++sweep) {
    s.newfree.clear();
    for (int f : s.freerows) {
      cost_row(src + std::size_t(f) * d, s, n, d, squared, s.crow.data());
      double umin = inf, usub = inf;
      int j1 = -1, j2 = -1;
      for (int j = 0; j < n; ++j) {
        double c = s.crow[j] - s.v[j];
        if (c < usub) {
          if (c >= umin) {
            usub = c;
            j2 = j;
          } else {
            usub = umin;
            j2 = j1;
            umin = c;
            j1 = j;
          }
        }
      }
      int displaced = s.colsol[j1];
      if (umin < usub) {
        s.v[j1] -= usub - umin;
      } else if (displaced >= 0) {
        j1 = j2;
        displaced = s.colsol[j1];
      }
      s.rowsol[f] = j1;
      s.colsol[j1] = f;
      if (displaced >= 0) {
        s.rowsol[displaced] = -1;
        s.newfree.push_back(displaced);
      }
    }
    s.freerows.swap(s.newfree);
  }

  // shortest augmenting paths for the remainder
  s.dist.resize(n);
  s.dist_at_scan.resize(n);
  s.pred.resize(n);
  s.todo.resize(n);
  for (int f : s.freerows) {
    cost_row(src + std::size_t(f) * d, s, n, d, squared, s.crow.data());
    int ntodo = n, bestpos = 0;
    double best = inf;
    for (int j = 0; j < n; ++j) {
      s.dist[j] = s.crow[j] - s.v[j];
      s.pred[j] = f;
      s.todo[j] = j;
      if (s.dist[j] < best) {
        best = s.dist[j];
        bestpos = j;
      }
    }
    s.scanned.clear();
    int endj = -1;
    double mind = 0.0;
    for (;;) {
      int jmin = s.todo[bestpos];
      mind = best;
      s.todo[bestpos] = s.todo[--ntodo];
      s.dist_at_scan[jmin] = mind;
      s.scanned.push_back(jmin);
      if (s.colsol[jmin] < 0) {
        endj = jmin;
        break;
      }
      int i = s.colsol[jmin];
      cost_row(src + std::size_t(i) * d, s, n, d, squared, s.crow.data());
      double off = mind - (s.crow[jmin] - s.v[jmin]);
      best = inf;
      bestpos = 0;
      for (int p = 0; p < ntodo; ++p) {
        int j = s.todo[p];
        double nd = off + s.crow[j] - s.v[j];
        if (nd < s.dist[j]) {
          s.dist[j] = nd;
          s.pred[j] = i;
        }
        if (s.dist[j] < best) {
          best = s.dist[j];
          bestpos = p;
        }
      }
    }
    for (int j : s.scanned)
      if (j != endj) s.v[j] += s.dist_at_scan[j] - mind;
    int j = endj;
    for (;;) {
      int i = s.pred[j];
      s.colsol[j] = i;
      int nextj = s.rowsol[i];
      s.rowsol[i] = j;
      if (i == f) break;
      j = nextj;
    }
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* p = src + std::size_t(i) * d;
    double sq = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = p[c] - s.target_cm[c][s.rowsol[i]];
      sq += t * t;
    }
    total += squared ? sq : std::sqrt(sq);
  }
  return total;
}

double assignment_mean_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool squared,
                            std::size_t max_size) {
  check_pair(a, b, true);
  require(a.size() <= max_size, errc::too_large,
          "cloud size " + std::to_string(a.size()) + " exceeds assignment limit " +
              std::to_string(max_size));
  AssignmentScratch scratch;
  return solve_assignment(a, b, squared, scratch) / double(a.size());
}

}  // namespace

EmpiricalMeasure EmpiricalMeasure::from_flat(int dim, std::vector<double> pts) {
  require(dim >= 1, errc::invalid_argument, "dimension must be >= 1");
  require(!pts.empty() && pts.size() % std::size_t(dim) == 0, errc::invalid_argument,
          "point buffer size is not a multiple of the dimension");
  for (double x : pts)
    require(std::isfinite(x), errc::invalid_argument, "cloud contains a non-finite coordinate");
  EmpiricalMeasure m;
  m.dim = dim;
  m.points = std::move(pts);
  return m;
}

double w2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  check_pair(a, b, true);
  require(a.dim == 1, errc::dimension_mismatch, "w2_1d requires dimension 1");
  std::vector<double> xs(a.points), ys(b.points);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double t = xs[i] - ys[i];
    s += t * t;
  }
  return std::sqrt(s / double(xs.size()));
}

double w2_1d_quantile(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  check_pair(a, b, false);
  require(a.dim == 1, errc::dimension_mismatch, "w2_1d_quantile requires dimension 1");
  std::vector<double> xs(a.points), ys(b.points);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const std::size_t n = xs.size(), m = ys.size();
  // integrate (F_a^{-1}(u) - F_b^{-1}(u))^2 du over the merged step breakpoints;
  // breakpoint comparisons in exact integer arithmetic
  double s = 0.0, u = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    const unsigned long long lhs = (unsigned long long)(i + 1) * m;
    const unsigned long long rhs = (unsigned long long)(j + 1) * n;
    double unext = (lhs <= rhs) ? double(i + 1) / double(n) : double(j + 1) / double(m);
    double t = xs[i] - ys[j];
    s += (unext - u) * t * t;
    u = unext;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return std::sqrt(s);
}

double w2_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t max_size) {
  return std::sqrt(assignment_mean_cost(a, b, true, max_size));
}

double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t max_size) {
  return assignment_mean_cost(a, b, false, max_size);
}

double coupling_upper_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  check_pair(a, b, true);
  double s = 0.0;
  const int d = a.dim;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (int c = 0; c < d; ++c) {
      double t = a.points[k * std::size_t(d) + c] - b.points[k * std::size_t(d) + c];
      s += t * t;
    }
  }
  return s / double(a.size());
}

}  // namespace mkvsim
