#include "revrir/nn/optim.hpp"

#include <cmath>

#include "revrir/error.hpp"

namespace revrir::nn {

AdamW::AdamW(std::vector<NamedTensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  for (const auto& p : params_) {
    require(p.tensor.has_grad(), ErrorKind::State, "parameter '" + p.name + "' has no gradient");
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    auto values = t.mutable_values();
    const auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= lr * (m_hat / (std::sqrt(v_hat) + options_.epsilon) +
                         options_.weight_decay * values[i]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::pair<std::string, std::vector<double>>> AdamW::state() const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.push_back({"step", {static_cast<double>(step_)}});
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out.push_back({params_[k].name + ".m", m_[k]});
    out.push_back({params_[k].name + ".v", v_[k]});
  }
  return out;
}

void AdamW::load_state(const std::vector<std::pair<std::string, std::vector<double>>>& records) {
  for (const auto& [name, values] : records) {
    if (name == "step") {
      require(values.size() == 1, ErrorKind::Format, "malformed optimizer step record");
      step_ = static_cast<std::size_t>(values[0]);
      continue;
    }
    bool matched = false;
    for (std::size_t k = 0; k < params_.size() && !matched; ++k) {
      for (auto [suffix, buf] : {std::pair{".m", &m_[k]}, std::pair{".v", &v_[k]}}) {
        if (name == params_[k].name + suffix) {
          require(values.size() == buf->size(), ErrorKind::Format,
                  "optimizer record '" + name + "' has the wrong size");
          *buf = values;
          matched = true;
          break;
        }
      }
    }
    require(matched, ErrorKind::Format, "unknown optimizer record '" + name + "'");
  }
}

std::size_t LrSchedule::warmup_steps() const {
  return static_cast<std::size_t>(std::llround(warmup_ratio * static_cast<double>(total_steps)));
}

void LrSchedule::validate() const {
  require(base_lr >= 0, ErrorKind::Validation, "learning rate must be non-negative");
  require(total_steps >= 1, ErrorKind::Validation, "schedule needs at least one step");
  require(warmup_ratio >= 0 && warmup_ratio <= 1, ErrorKind::Validation,
          "warmup ratio must lie in [0, 1]");
  require(kind != ScheduleKind::Polynomial || power > 0, ErrorKind::Validation,
          "polynomial power must be positive");
}

double lr_at(const LrSchedule& s, std::size_t step) {
  s.validate();
  require(step <= s.total_steps, ErrorKind::Validation,
          "step " + std::to_string(step) + " beyond schedule length " +
              std::to_string(s.total_steps));
  const double total = static_cast<double>(s.total_steps);
  const double t = static_cast<double>(step);
  if (s.kind == ScheduleKind::Polynomial) {
    return s.base_lr * std::pow(1.0 - t / total, s.power);
  }
  const std::size_t warm = s.warmup_steps();
  if (step < warm) return s.base_lr * t / static_cast<double>(warm);
  if (warm == s.total_steps) return s.base_lr;
  return s.base_lr * (total - t) / (total - static_cast<double>(warm));
}

}  // namespace revrir::nn
