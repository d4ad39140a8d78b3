#pragma once

#include <map>

#include "miltext/params.hpp"
#include "miltext/tape.hpp"

namespace miltext {

struct AdadeltaConfig {
  double learning_rate = 0.005;
  double rho = 0.95;
  double epsilon = 1e-6;
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables
};

// Adadelta accumulators for one model. Owns the running averages of squared
// gradients and squared updates, one pair per trainable parameter.
class AdadeltaState {
 public:
  explicit AdadeltaState(AdadeltaConfig cfg = {});

  // Applies one update: accumulators first, then the RMS-scaled step times
  // the learning rate. Throws if a trainable parameter has no gradient or
  // the gradient shape disagrees with the accumulator.
  void step(ModelParams& params, const GradMap& grads);

  const AdadeltaConfig& config() const { return cfg_; }
  const Tensor& sq_grad(const std::string& name) const { return sq_grad_.at(name); }
  const Tensor& sq_update(const std::string& name) const { return sq_update_.at(name); }

 private:
  AdadeltaConfig cfg_;
  std::map<std::string, Tensor> sq_grad_;
  std::map<std::string, Tensor> sq_update_;
};

}  // namespace miltext
