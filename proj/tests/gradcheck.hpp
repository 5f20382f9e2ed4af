// Central-difference gradient oracle shared by the unit and acceptance tests.
#pragma once

#include "isac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace isac::testing {

struct GradReport {
  double max_rel = 0.0;
  long checked = 0;
};

// Relative error with a unit floor on the denominator so near-zero gradients compare absolutely.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// `f` must rebuild the graph from the current leaf values and return a 1x1 root.
// `stride` > 1 checks every stride-th entry of each leaf (for large parameter sets).
inline GradReport gradcheck(const std::function<ad::NodePtr()>& f, const std::vector<ad::NodePtr>& leaves,
                            double h = 1e-6, long stride = 1) {
  ad::zero_grad(leaves);
  ad::backward(f());
  std::vector<Grid> analytic;
  for (const auto& l : leaves) analytic.push_back(l->grad);

  GradReport rep;
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    Grid& v = leaves[p]->value;
    for (Index i = 0; i < v.size(); i += stride) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double up = f()->value(0, 0);
      v.data()[i] = orig - h;
      const double down = f()->value(0, 0);
      v.data()[i] = orig;
      rep.max_rel = std::max(rep.max_rel, rel_err(analytic[p].data()[i], (up - down) / (2 * h)));
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace isac::testing
