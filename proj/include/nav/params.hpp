#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nav/errors.hpp"

namespace nav {

// Named trainable parameters with additively accumulated gradients and Adam
// moment state. Values are read-shared during rollouts; gradient merge and
// the optimizer step are a single-writer phase.
class ParamStore {
 public:
  struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;  // Adam first moment
    std::vector<double> v;  // Adam second moment
  };

  int add(std::string name, std::vector<int> shape, std::vector<double> init);
  int count() const { return static_cast<int>(params_.size()); }
  Param& at(int pid) { return params_[static_cast<size_t>(pid)]; }
  const Param& at(int pid) const { return params_[static_cast<size_t>(pid)]; }
  int find(const std::string& name) const;  // -1 if absent

  void zero_grads();
  double grad_norm() const;
  // Scales all gradients by max_norm/norm when norm exceeds max_norm.
  void clip_grad_norm(double max_norm);

  // Standard Adam with bias correction; increments the shared step counter.
  // Throws DivergenceError naming the parameter on non-finite gradients.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  std::int64_t adam_steps() const { return step_; }
  void set_adam_steps(std::int64_t s) { step_ = s; }

  std::int64_t total_values() const;

 private:
  std::vector<Param> params_;
  std::int64_t step_ = 0;
};

}  // namespace nav
