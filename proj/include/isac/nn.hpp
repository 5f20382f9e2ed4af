#pragma once

#include "isac/autodiff.hpp"
#include "isac/channel.hpp"

#include <string>
#include <vector>

namespace isac {

struct Layer {
  ad::NodePtr W;  // out x in
  ad::NodePtr b;  // out x 1
  ad::Activation act = ad::Activation::Linear;
};

/// Fully-connected stack. Weights start uniform in +-sqrt(6 / (fan_in + fan_out)), biases at zero.
struct Mlp {
  std::string name;
  std::vector<Layer> layers;

  static Mlp make(std::string name, const std::vector<int>& widths,
                  const std::vector<ad::Activation>& acts, Rng& rng);

  ad::NodePtr forward(const ad::NodePtr& x) const;
  std::vector<ad::NodePtr> params() const;
  std::vector<int> widths() const;
  void set_zero();
};

/// Draws a Glorot-uniform grid for a layer with the given fan-in and fan-out.
Grid glorot_uniform(Index rows, Index cols, Rng& rng);

}  // namespace isac
