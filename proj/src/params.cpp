#include "nav/params.hpp"

#include <cmath>

namespace nav {

int ParamStore::add(std::string name, std::vector<int> shape, std::vector<double> init) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  if (n != static_cast<std::int64_t>(init.size()))
    throw ShapeError("ParamStore::add(" + name + "): init size does not match shape");
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value = std::move(init);
  p.grad.assign(p.value.size(), 0.0);
  p.m.assign(p.value.size(), 0.0);
  p.v.assign(p.value.size(), 0.0);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

void ParamStore::zero_grads() {
  for (auto& p : params_)
    for (auto& g : p.grad) g = 0.0;
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad) s += g * g;
  return std::sqrt(s);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double f = max_norm / norm;
  for (auto& p : params_)
    for (auto& g : p.grad) g *= f;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  if (lr <= 0.0) throw ConfigError("adam_step: lr must be positive");
  for (const auto& p : params_)
    for (double g : p.grad)
      if (!std::isfinite(g))
        throw DivergenceError("adam_step: non-finite gradient in parameter '" + p.name + "'");
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& p : params_) {
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
      p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::int64_t ParamStore::total_values() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::int64_t>(p.value.size());
  return n;
}

}  // namespace nav
