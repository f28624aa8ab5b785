#include "revrir/finetune.hpp"

#include <algorithm>
#include <cmath>

#include "revrir/error.hpp"
#include "revrir/nn/optim.hpp"
#include "revrir/pretrain.hpp"

namespace revrir::tasks {

const char* to_string(EncoderChoice choice) {
  return choice == EncoderChoice::Speech ? "speech" : "rir";
}

EncoderChoice encoder_choice_from_string(const std::string& name) {
  if (name == "speech") return EncoderChoice::Speech;
  if (name == "rir") return EncoderChoice::Rir;
  fail(ErrorKind::Config, "unknown encoder '" + name + "' (expected speech or rir)");
}

ClassifierHead::ClassifierHead(std::size_t embedding_dim, std::size_t classes, Rng& rng)
    : linear_(embedding_dim, classes, rng) {
  require(classes >= 1, ErrorKind::Validation, "classifier head needs at least one class");
}

void ClassifierHead::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
                             std::vector<nn::NamedTensor>& buffers) const {
  linear_.collect(prefix, params, buffers);
}

void FinetuneConfig::validate() const {
  require(batch_size >= 1, ErrorKind::Validation, "fine-tune batch size must be >= 1");
  require(epochs >= 1, ErrorKind::Validation, "fine-tune needs at least one epoch");
  require(lr > 0 && std::isfinite(lr), ErrorKind::Validation, "fine-tune lr must be positive");
  require(power > 0, ErrorKind::Validation, "polynomial power must be positive");
}

namespace {

void check_labels(std::span<const int> labels, std::size_t classes, const char* split) {
  require(!labels.empty(), ErrorKind::Validation, std::string(split) + " set is empty");
  for (int y : labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::Validation,
            std::string(split) + " label " + std::to_string(y) + " outside [0, " +
                std::to_string(classes) + ")");
  }
}

nn::Tensor rows_of(const Matrix& m, std::span<const std::size_t> items) {
  std::vector<double> v;
  v.reserve(items.size() * m.cols);
  for (std::size_t i : items) {
    const auto r = m.row(i);
    v.insert(v.end(), r.begin(), r.end());
  }
  return nn::Tensor({items.size(), m.cols}, std::move(v));
}

/// Shared loop: `embed_batch` yields the head input for a batch of indices.
template <typename EmbedBatch, typename ValAccuracy>
FinetuneResult run(ClassifierHead& head, std::vector<nn::NamedTensor> params,
                   std::span<const int> labels, const FinetuneConfig& config,
                   EmbedBatch&& embed_batch, ValAccuracy&& val_accuracy) {
  const std::size_t batch = std::min(config.batch_size, labels.size());
  Rng rng(derive_seed(config.seed, 0x66696e65));
  std::vector<std::vector<std::vector<std::size_t>>> plan;
  std::size_t total = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    plan.push_back(joint::epoch_batches(labels, batch, joint::BatchSampler::Uniform, rng));
    total += plan.back().size();
  }
  nn::LrSchedule schedule;
  schedule.kind = nn::ScheduleKind::Polynomial;
  schedule.base_lr = config.lr;
  schedule.total_steps = total;
  schedule.power = config.power;
  nn::AdamW opt(std::move(params), {.weight_decay = config.weight_decay});

  FinetuneResult result;
  std::size_t step = 0;
  for (std::size_t e = 0; e < plan.size(); ++e) {
    double sum = 0.0;
    for (const auto& items : plan[e]) {
      opt.zero_grad();
      std::vector<int> y;
      for (std::size_t i : items) y.push_back(labels[i]);
      nn::Tensor loss = nn::softmax_cross_entropy(head.forward(embed_batch(items)), y);
      const double value = loss.item();
      require(std::isfinite(value), ErrorKind::Numeric, "non-finite fine-tune loss");
      loss.backward();
      opt.step(nn::lr_at(schedule, step));
      sum += value;
      ++step;
    }
    result.history.push_back(
        {e + 1, sum / static_cast<double>(std::max<std::size_t>(plan[e].size(), 1)),
         val_accuracy()});
  }
  result.steps = step;
  return result;
}

double accuracy(std::span<const int> p, std::span<const int> y) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += p[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace

FinetuneResult finetune_head(ClassifierHead& head, const Matrix& train,
                             std::span<const int> train_labels, const Matrix& val,
                             std::span<const int> val_labels, const FinetuneConfig& config) {
  config.validate();
  check_labels(train_labels, head.classes(), "training");
  check_labels(val_labels, head.classes(), "validation");
  require(train.rows == train_labels.size() && val.rows == val_labels.size(),
          ErrorKind::Validation, "embeddings and labels are misaligned");
  require(train.cols == head.embedding_dim() && val.cols == head.embedding_dim(),
          ErrorKind::Validation, "embedding width does not match the head");
  return run(
      head, head.parameters("head."), train_labels, config,
      [&](std::span<const std::size_t> items) { return rows_of(train, items); },
      [&] { return accuracy(predict(head, val), val_labels); });
}

FinetuneResult finetune(joint::Encoder& encoder, ClassifierHead& head,
                        const LabeledFeatures& train, const LabeledFeatures& val,
                        const FinetuneConfig& config) {
  config.validate();
  check_labels(train.labels, head.classes(), "training");
  check_labels(val.labels, head.classes(), "validation");
  require(train.inputs.size() == train.size() && val.inputs.size() == val.size(),
          ErrorKind::Validation, "features and labels are misaligned");
  require(encoder.embedding_dim() == head.embedding_dim(), ErrorKind::Validation,
          "encoder embedding dimension " + std::to_string(encoder.embedding_dim()) +
              " does not match head input " + std::to_string(head.embedding_dim()));

  auto val_accuracy = [&] {
    return accuracy(predict(encoder, head, val.inputs), val.labels);
  };

  if (config.freeze_encoder) {
    const bool was = encoder.training();
    encoder.set_frozen(true);
    encoder.set_training(false);
    FinetuneResult r;
    if (config.use_cache) {
      const Matrix train_emb = joint::embed_all(encoder, train.inputs);
      const Matrix val_emb = joint::embed_all(encoder, val.inputs);
      r = finetune_head(head, train_emb, train.labels, val_emb, val.labels, config);
    } else {
      r = run(
          head, head.parameters("head."), train.labels, config,
          [&](std::span<const std::size_t> items) {
            std::vector<const std::vector<double>*> ptrs;
            for (std::size_t i : items) ptrs.push_back(&train.inputs[i]);
            return encoder.embed(ptrs).detach();
          },
          val_accuracy);
    }
    encoder.set_frozen(false);
    encoder.set_training(was);
    return r;
  }

  encoder.set_frozen(false);
  auto params = encoder.parameters("encoder.");
  const auto head_params = head.parameters("head.");
  params.insert(params.end(), head_params.begin(), head_params.end());
  auto r = run(
      head, std::move(params), train.labels, config,
      [&](std::span<const std::size_t> items) {
        encoder.set_training(true);
        std::vector<const std::vector<double>*> ptrs;
        for (std::size_t i : items) ptrs.push_back(&train.inputs[i]);
        return encoder.embed(ptrs);
      },
      val_accuracy);
  encoder.set_training(false);
  return r;
}

std::vector<int> predict(const ClassifierHead& head, const Matrix& embeddings) {
  require(embeddings.cols == head.embedding_dim(), ErrorKind::Validation,
          "embedding width does not match the head");
  std::vector<std::size_t> all(embeddings.rows);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return nn::argmax_rows(head.forward(rows_of(embeddings, all)));
}

std::vector<int> predict(joint::Encoder& encoder, const ClassifierHead& head,
                         std::span<const std::vector<double>> features) {
  return predict(head, joint::embed_all(encoder, features));
}

}  // namespace revrir::tasks
