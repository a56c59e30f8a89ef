#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mkvsim {

// Equal-weight point cloud in R^d.
struct EmpiricalMeasure {
  int dim = 1;
  std::vector<double> points;  // n x dim, row-major

  std::size_t size() const { return points.size() / std::size_t(dim); }
  std::span<const double> point(std::size_t k) const {
    return {points.data() + k * std::size_t(dim), std::size_t(dim)};
  }

  // Validates n >= 1 and finiteness of every coordinate.
  static EmpiricalMeasure from_flat(int dim, std::vector<double> pts);
};

// Exact W2 for equal-size 1-D clouds: RMS difference of order statistics.
double w2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Exact W2 for 1-D clouds of arbitrary (possibly different) sizes, via the
// quantile-function coupling.
double w2_1d_quantile(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Exact W2 in any dimension: minimum over permutations of the mean squared
// Euclidean cost (shortest-augmenting-path assignment), square-rooted.
double w2_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                     std::size_t max_size = 2000);

// Exact W1: minimum over permutations of the mean Euclidean cost.
double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                     std::size_t max_size = 2000);

// (1/n) sum |a_k - b_k|^2 for index-paired clouds: the squared-W2 upper bound
// given by the diagonal coupling.
double coupling_upper_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

}
