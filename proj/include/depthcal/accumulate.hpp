// Compensated (Neumaier) summation, used wherever a mean must stay stable
// under input permutations and thread partitioning.
#pragma once

#include <cmath>

namespace depthcal {

struct NeumaierSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }

  // Folds another partial sum in (partials are combined in a fixed order).
  void merge(const NeumaierSum& other) {
    add(other.sum);
    compensation += other.compensation;
  }

  double result() const { return sum + compensation; }
};

}  // namespace depthcal
