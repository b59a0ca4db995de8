#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../nn/parameter.hpp"

namespace gcanfuse {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam moments with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta)
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(const nn::ParamRefs& params, double lr) {
    for (const auto* p : params)
      if (!p->grad.allFinite())
        throw NumericError("AdamW: non-finite gradient in " + p->name);
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (m_.size() != params.size()) throw UsageError("AdamW: parameter set changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::Parameter& p = *params[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
      auto m_hat = m_[i].array() / c1;
      auto v_hat = v_[i].array() / c2;
      p.value.array() -=
          lr * (m_hat / (v_hat.sqrt() + cfg_.eps) + cfg_.weight_decay * p.value.array());
    }
  }

  std::size_t steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<nn::Mat> m_, v_;
  std::size_t t_ = 0;
};

/// Linear warm-up from 0 to base_lr over warmup_steps, then linear decay to 0
/// at total_steps.
struct LrSchedule {
  double base_lr = 2e-5;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
};

inline double lr_at(std::size_t step, const LrSchedule& s) {
  if (step < s.warmup_steps)
    return s.base_lr * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
  if (step >= s.total_steps) return 0.0;
  return s.base_lr * (static_cast<double>(s.total_steps - step) /
                      static_cast<double>(s.total_steps - s.warmup_steps));
}

}  // namespace gcanfuse
