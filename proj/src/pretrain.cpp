#include "revrir/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "revrir/contrastive.hpp"
#include "revrir/error.hpp"

namespace revrir::joint {

void PairedFeatures::validate() const {
  require(!labels.empty(), ErrorKind::Validation, "empty dataset");
  require(speech.size() == labels.size() && rir.size() == labels.size(), ErrorKind::Validation,
          "paired features are misaligned");
}

DualEncoder::DualEncoder(const SpeechEncoderConfig& speech_config,
                         const RirEncoderConfig& rir_config, double initial_tau,
                         std::uint64_t seed)
    : speech([&] {
        Rng rng(derive_seed(seed, 1));
        return SpeechEncoder(speech_config, rng);
      }()),
      rir([&] {
        Rng rng(derive_seed(seed, 2));
        return RirEncoder(rir_config, rng);
      }()),
      temperature(initial_tau) {
  require(speech.embedding_dim() == rir.embedding_dim(), ErrorKind::Validation,
          "speech and RIR encoders must share the embedding dimension");
}

void DualEncoder::set_training(bool training) {
  speech.set_training(training);
  rir.set_training(training);
}

std::vector<nn::NamedTensor> DualEncoder::encoder_parameters() const {
  auto params = speech.parameters("speech.");
  auto r = rir.parameters("rir.");
  params.insert(params.end(), r.begin(), r.end());
  return params;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const int> labels,
                                                    std::size_t batch_size,
                                                    BatchSampler sampler, Rng& rng) {
  require(batch_size >= 1, ErrorKind::Validation, "batch size must be positive");
  std::vector<std::vector<std::size_t>> batches;
  if (sampler == BatchSampler::Uniform) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size) {
      batches.emplace_back(order.begin() + static_cast<long>(start),
                           order.begin() + static_cast<long>(start + batch_size));
    }
    return batches;
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (auto& [label, items] : by_class) rng.shuffle(std::span<std::size_t>(items));
  while (true) {
    std::vector<int> open;
    for (const auto& [label, items] : by_class) {
      if (!items.empty()) open.push_back(label);
    }
    if (open.size() < batch_size) break;
    rng.shuffle(std::span<int>(open));
    std::vector<std::size_t> batch;
    for (std::size_t k = 0; k < batch_size; ++k) {
      auto& items = by_class[open[k]];
      batch.push_back(items.back());
      items.pop_back();
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace {

nn::Tensor forward_loss(DualEncoder& model, const PairedFeatures& data,
                        std::span<const std::size_t> items) {
  std::vector<const std::vector<double>*> speech, rir;
  std::vector<int> labels;
  for (std::size_t i : items) {
    speech.push_back(&data.speech[i]);
    rir.push_back(&data.rir[i]);
    labels.push_back(data.labels[i]);
  }
  const nn::Tensor e1 = model.speech.embed(speech);
  const nn::Tensor e2 = model.rir.embed(rir);
  return contrastive_loss(e1, e2, model.temperature.log_tau(), labels);
}

}  // namespace

double batch_loss(DualEncoder& model, const PairedFeatures& data,
                  std::span<const std::size_t> items) {
  return forward_loss(model, data, items).item();
}

double evaluate_loss(DualEncoder& model, const PairedFeatures& data, std::size_t batch_size,
                     std::uint64_t seed) {
  data.validate();
  const bool was = model.speech.training();
  model.set_training(false);
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    total += batch_loss(model, data,
                        std::span<const std::size_t>(order.data() + start, end - start));
    ++count;
  }
  model.set_training(was);
  return total / static_cast<double>(count);
}

PretrainResult pretrain(DualEncoder& model, const PairedFeatures& train,
                        const PairedFeatures& val, const PretrainConfig& config) {
  train.validate();
  val.validate();
  require(config.epochs >= 1, ErrorKind::Validation, "pre-training needs at least one epoch");
  require(config.batch_size >= 2 && config.batch_size <= train.size(), ErrorKind::Validation,
          "batch size must be in [2, training set size]");

  Rng rng(derive_seed(config.seed, 0x70726574));
  // Step count is fixed by a dry run of the sampler so the schedule knows
  // its length up front.
  std::vector<std::vector<std::vector<std::size_t>>> plan;
  std::size_t total = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    plan.push_back(epoch_batches(train.labels, config.batch_size, config.sampler, rng));
    total += plan.back().size();
  }
  if (config.max_steps > 0) total = std::min(total, config.max_steps);
  require(total > 0, ErrorKind::Validation, "sampler produced no batches");

  nn::LrSchedule schedule;
  schedule.kind = nn::ScheduleKind::LinearWarmup;
  schedule.base_lr = config.lr;
  schedule.total_steps = total;
  schedule.warmup_ratio = config.warmup_ratio;

  nn::AdamW encoder_opt(model.encoder_parameters(), {.weight_decay = config.weight_decay});
  nn::AdamW tau_opt(model.temperature.parameters("temperature."), {.weight_decay = 0.0});

  PretrainResult result;
  const std::uint64_t val_seed = derive_seed(config.seed, 0x76616c);
  std::size_t step = 0;
  for (std::size_t e = 0; e < plan.size() && step < total; ++e) {
    model.set_training(true);
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (const auto& batch : plan[e]) {
      if (step >= total) break;
      encoder_opt.zero_grad();
      tau_opt.zero_grad();
      nn::Tensor loss = forward_loss(model, train, batch);
      const double value = loss.item();
      if (step == 0) result.initial_train_loss = value;
      loss.backward();
      const double lr = nn::lr_at(schedule, step);
      encoder_opt.step(lr);
      tau_opt.step(lr);
      model.temperature.clamp();
      result.curve.push_back({step, "train", value});
      epoch_sum += value;
      ++epoch_steps;
      ++step;
    }
    if (epoch_steps > 0) result.final_train_loss = epoch_sum / static_cast<double>(epoch_steps);
    const double v = evaluate_loss(model, val, config.batch_size, val_seed);
    require(std::isfinite(v), ErrorKind::Numeric, "non-finite validation loss");
    result.curve.push_back({step, "val", v});
  }
  model.set_training(false);
  result.steps = step;
  return result;
}

}  // namespace revrir::joint
