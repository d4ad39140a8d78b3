#include "miltext/adadelta.hpp"

#include <cmath>

namespace miltext {

AdadeltaState::AdadeltaState(AdadeltaConfig cfg) : cfg_(cfg) {
  if (cfg_.rho < 0.0 || cfg_.rho >= 1.0) throw Error("adadelta: rho must be in [0,1)");
  if (cfg_.epsilon <= 0.0) throw Error("adadelta: epsilon must be positive");
  if (cfg_.learning_rate <= 0.0) throw Error("adadelta: learning rate must be positive");
}

void AdadeltaState::step(ModelParams& params, const GradMap& grads) {
  double clip_scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
      for (double v : g.values) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
  }

  for (Parameter& p : params) {
    if (!p.trainable) continue;
    auto git = grads.find(p.name);
    if (git == grads.end()) throw Error("adadelta: missing gradient for parameter '" + p.name + "'");
    const Tensor& g = git->second;

    auto [eg_it, inserted] = sq_grad_.try_emplace(p.name, Tensor::zeros(p.tensor.shape));
    auto [eu_it, inserted2] = sq_update_.try_emplace(p.name, Tensor::zeros(p.tensor.shape));
    Tensor& eg = eg_it->second;
    Tensor& eu = eu_it->second;
    if (!g.same_shape(eg))
      throw Error("adadelta: gradient shape " + g.shape_str() + " does not match accumulator " + eg.shape_str() +
                  " for '" + p.name + "'");

    double rho = cfg_.rho, eps = cfg_.epsilon, lr = cfg_.learning_rate;
    for (size_t i = 0; i < g.values.size(); ++i) {
      double gv = g.values[i] * clip_scale;
      eg.values[i] = rho * eg.values[i] + (1.0 - rho) * gv * gv;
      double delta = -std::sqrt(eu.values[i] + eps) / std::sqrt(eg.values[i] + eps) * gv;
      eu.values[i] = rho * eu.values[i] + (1.0 - rho) * delta * delta;
      p.tensor.values[i] += lr * delta;
    }
  }
}

}  // namespace miltext
