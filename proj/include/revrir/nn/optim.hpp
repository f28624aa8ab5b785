#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "revrir/nn/layers.hpp"

namespace revrir::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay Adam:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWOptions options = {});

  /// One update at learning rate `lr`. Every parameter must carry a gradient.
  void step(double lr);
  void zero_grad();

  std::size_t step_count() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<NamedTensor>& params() const { return params_; }

  /// Moment buffers as named records ("<param>.m", "<param>.v") plus "step".
  std::vector<std::pair<std::string, std::vector<double>>> state() const;
  void load_state(const std::vector<std::pair<std::string, std::vector<double>>>& records);

 private:
  std::vector<NamedTensor> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

enum class ScheduleKind { LinearWarmup, Polynomial };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::LinearWarmup;
  double base_lr = 1e-3;
  std::size_t total_steps = 1;
  double warmup_ratio = 0.0;
  double power = 1.0;

  std::size_t warmup_steps() const;
  void validate() const;
};

/// LinearWarmup: 0 -> base over round(ratio*total) steps, then linearly to 0
/// at `total`. Polynomial: base * (1 - step/total)^power.
double lr_at(const LrSchedule& schedule, std::size_t step);

}  // namespace revrir::nn
