#include "isac/nn.hpp"

#include <cmath>

namespace isac {

Grid glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Grid g(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) g(r, c) = dist(rng);
  return g;
}

Mlp Mlp::make(std::string name, const std::vector<int>& widths, const std::vector<ad::Activation>& acts,
              Rng& rng) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1)
    throw DimensionError("Mlp::make(" + name + "): need one activation per layer");
  Mlp m;
  m.name = std::move(name);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string tag = m.name + ".l" + std::to_string(l);
    m.layers.push_back({ad::leaf(glorot_uniform(widths[l + 1], widths[l], rng), tag + ".W"),
                        ad::leaf(Grid::Zero(widths[l + 1], 1), tag + ".b"), acts[l]});
  }
  return m;
}

ad::NodePtr Mlp::forward(const ad::NodePtr& x) const {
  ad::NodePtr h = x;
  for (const auto& layer : layers) h = ad::activation(layer.act, ad::linear(layer.W, layer.b, h));
  return h;
}

std::vector<ad::NodePtr> Mlp::params() const {
  std::vector<ad::NodePtr> out;
  for (const auto& l : layers) {
    out.push_back(l.W);
    out.push_back(l.b);
  }
  return out;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().W->cols()));
  for (const auto& l : layers) w.push_back(static_cast<int>(l.W->rows()));
  return w;
}

void Mlp::set_zero() {
  for (auto& l : layers) {
    l.W->value.setZero();
    l.b->value.setZero();
  }
}

}  // namespace isac
