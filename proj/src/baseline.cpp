#include "revrir/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "revrir/dsp.hpp"
#include "revrir/error.hpp"
#include "revrir/nn/optim.hpp"
#include "revrir/pretrain.hpp"

namespace revrir::tasks {
namespace {

double sample_kurtosis(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(v.size());
  m4 /= static_cast<double>(v.size());
  // A constant sequence has no defined kurtosis; report 0 for it.
  return m2 > 0 ? m4 / (m2 * m2) : 0.0;
}

std::size_t peak_index(std::span<const double> h) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (std::abs(h[i]) > std::abs(h[best])) best = i;
  }
  return best;
}

}  // namespace

Band baseline_band(int k) {
  require(k >= 1 && k <= kBaselineBands, ErrorKind::Validation, "band index must be in 1..5");
  return {50.0 * k, 200.0 * k};
}

std::vector<std::string> baseline_feature_names() {
  static const char* per_band[] = {"decay_db_per_s", "energy_fraction", "spectral_kurtosis",
                                   "spectral_std_db", "modal_peaks"};
  std::vector<std::string> names;
  for (int k = 1; k <= kBaselineBands; ++k) {
    for (const char* n : per_band) names.push_back("band" + std::to_string(k) + "_" + n);
  }
  for (const char* n : {"early_density", "drr_db", "decay_db_per_s", "kurtosis",
                        "temporal_centroid_s"}) {
    names.emplace_back(n);
  }
  return names;
}

double schroeder_decay_rate(std::span<const double> h, double sample_rate) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  require(acc > 0, ErrorKind::Feature, "decay rate undefined for a silent response");
  // Fit between the first drop below -5 dB and the first drop below -25 dB.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = edc[i] > 0 ? 10.0 * std::log10(edc[i] / acc) : -1e9;
    if (db > -5.0) continue;
    if (db < -25.0) break;
    const double t = static_cast<double>(i) / sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  require(n >= 2, ErrorKind::Feature, "decay curve has too few points between -5 and -25 dB");
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  require(denom > 0, ErrorKind::Feature, "degenerate decay fit");
  return (dn * sxy - sx * sy) / denom;
}

RirFeatureVector baseline_features(const sim::Rir& rir) {
  const auto& h = rir.samples;
  const double fs = rir.sample_rate;
  require(!h.empty(), ErrorKind::Feature, "empty RIR");
  require(std::any_of(h.begin(), h.end(), [](double v) { return v != 0.0; }), ErrorKind::Feature,
          "silent RIR has no defined decay");
  for (double v : h) require(std::isfinite(v), ErrorKind::Feature, "non-finite RIR sample");

  RirFeatureVector f{};
  const std::size_t n = dsp::next_power_of_two(h.size());
  const auto spectrum = dsp::fft_real(h, n);
  std::vector<double> mag(spectrum.size()), db(spectrum.size());
  double total_energy = 0.0;
  for (std::size_t b = 0; b < spectrum.size(); ++b) {
    mag[b] = std::abs(spectrum[b]);
    db[b] = 20.0 * std::log10(std::max(mag[b], 1e-300));
    total_energy += mag[b] * mag[b];
  }
  require(total_energy > 0, ErrorKind::Feature, "RIR spectrum carries no energy");

  const std::size_t n_filter = dsp::next_power_of_two(2 * h.size());
  const auto wide = dsp::fft_real(h, n_filter);

  for (int k = 1; k <= kBaselineBands; ++k) {
    const Band band = baseline_band(k);
    const auto bin_of = [&](double hz, std::size_t size) {
      return static_cast<std::size_t>(std::ceil(hz * static_cast<double>(size) / fs));
    };
    const std::size_t lo = bin_of(band.lo_hz, n);
    const std::size_t hi = std::min(spectrum.size() - 1,
                                    static_cast<std::size_t>(std::floor(band.hi_hz * n / fs)));
    require(hi > lo + 1, ErrorKind::Feature, "band " + std::to_string(k) + " has too few bins");
    const std::size_t base = 5 * static_cast<std::size_t>(k - 1);

    // Band-limited response for the decay rate.
    std::vector<dsp::Complex> masked(wide.size(), dsp::Complex(0.0, 0.0));
    const std::size_t wlo = bin_of(band.lo_hz, n_filter);
    const std::size_t whi =
        std::min(wide.size() - 1, static_cast<std::size_t>(std::floor(band.hi_hz * n_filter / fs)));
    for (std::size_t b = wlo; b <= whi; ++b) masked[b] = wide[b];
    auto hb = dsp::ifft_real(masked, n_filter);
    hb.resize(h.size());
    f[base + 0] = schroeder_decay_rate(hb, fs);

    double band_energy = 0.0;
    double mean_db = 0.0;
    for (std::size_t b = lo; b <= hi; ++b) {
      band_energy += mag[b] * mag[b];
      mean_db += db[b];
    }
    const double count = static_cast<double>(hi - lo + 1);
    mean_db /= count;
    f[base + 1] = band_energy / total_energy;
    f[base + 2] = sample_kurtosis(std::span<const double>(mag.data() + lo, hi - lo + 1));
    double var_db = 0.0;
    for (std::size_t b = lo; b <= hi; ++b) var_db += (db[b] - mean_db) * (db[b] - mean_db);
    f[base + 3] = std::sqrt(var_db / count);
    int peaks = 0;
    for (std::size_t b = lo; b <= hi; ++b) {
      if (b == 0 || b + 1 >= db.size()) continue;
      if (db[b] > db[b - 1] && db[b] >= db[b + 1] && db[b] > mean_db) ++peaks;
    }
    f[base + 4] = peaks;
  }

  const std::size_t t0 = peak_index(h);
  const double peak = std::abs(h[t0]);
  const double threshold = peak * 1e-2;  // -40 dB
  const std::size_t early_end =
      std::min(h.size() - 1, t0 + static_cast<std::size_t>(std::llround(0.05 * fs)));
  int arrivals = 0;
  for (std::size_t i = t0; i <= early_end; ++i) {
    const double a = std::abs(h[i]);
    const double prev = i > 0 ? std::abs(h[i - 1]) : 0.0;
    const double next = i + 1 < h.size() ? std::abs(h[i + 1]) : 0.0;
    if (a >= threshold && a > prev && a >= next) ++arrivals;
  }
  f[25] = arrivals;

  const auto half = static_cast<std::size_t>(std::llround(0.0025 * fs));
  double direct = 0.0, energy = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double e = h[i] * h[i];
    energy += e;
    weighted += e * static_cast<double>(i) / fs;
    if (i + half >= t0 && i <= t0 + half) direct += e;
  }
  const double reverberant = std::max(energy - direct, direct * 1e-12);
  f[26] = 10.0 * std::log10(direct / reverberant);
  f[27] = schroeder_decay_rate(h, fs);
  f[28] = sample_kurtosis(h);
  f[29] = weighted / energy;
  return f;
}

Matrix baseline_feature_matrix(std::span<const sim::Rir> rirs, int jobs) {
  Matrix out(rirs.size(), kBaselineFeatureCount);
  auto one = [&](std::size_t i) {
    RirFeatureVector f;
    try {
      f = baseline_features(rirs[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "RIR " + std::to_string(i) + ": " + e.what());
    }
    for (std::size_t j = 0; j < f.size(); ++j) {
      require(std::isfinite(f[j]), ErrorKind::Data,
              "RIR " + std::to_string(i) + " has a non-finite feature " +
                  baseline_feature_names()[j]);
      out(i, j) = f[j];
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                              std::max<std::size_t>(rirs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < rirs.size(); ++i) one(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < rirs.size(); i += workers) one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<std::size_t> baseline_widths(std::size_t classes, const BaselineConfig& config) {
  require(classes >= 1 && config.reference_classes >= 1, ErrorKind::Validation,
          "class counts must be positive");
  std::vector<std::size_t> widths;
  for (std::size_t w : config.reference_widths) {
    const std::size_t scaled = (w * classes + config.reference_classes - 1) / config.reference_classes;
    widths.push_back(std::max(scaled, std::min(classes, w)));
  }
  return widths;
}

BaselineClassifier::BaselineClassifier(std::size_t classes, const BaselineConfig& config)
    : dropout_(config.dropout, derive_seed(config.seed, 3)),
      mean_(nn::Tensor::zeros({kBaselineFeatureCount})),
      inv_std_(nn::Tensor::full({kBaselineFeatureCount}, 1.0)) {
  Rng rng(derive_seed(config.seed, 1));
  std::size_t in = kBaselineFeatureCount;
  for (std::size_t w : baseline_widths(classes, config)) {
    layers_.emplace_back(in, w, rng);
    in = w;
  }
  layers_.emplace_back(in, classes, rng);
}

void BaselineClassifier::fit_standardizer(const Matrix& x) {
  require(x.rows >= 1 && x.cols == kBaselineFeatureCount, ErrorKind::Validation,
          "standardizer needs a non-empty 30-column feature matrix");
  auto mean = mean_.mutable_values();
  auto inv = inv_std_.mutable_values();
  for (std::size_t j = 0; j < x.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
    m /= static_cast<double>(x.rows);
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    const double sd = std::sqrt(v / static_cast<double>(x.rows));
    mean[j] = m;
    inv[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

nn::Tensor BaselineClassifier::forward(const Matrix& x) {
  require(x.cols == kBaselineFeatureCount, ErrorKind::Validation,
          "baseline input must have 30 columns");
  std::vector<double> z(x.data.size());
  const auto& mean = mean_.values();
  const auto& inv = inv_std_.values();
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) z[i * x.cols + j] = (x(i, j) - mean[j]) * inv[j];
  }
  nn::Tensor h({x.rows, x.cols}, std::move(z));
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    dropout_.set_training(training_);
    h = dropout_.forward(nn::relu(layers_[l].forward(h)));
  }
  return layers_.back().forward(h);
}

std::vector<int> BaselineClassifier::predict(const Matrix& x) {
  const bool was = training_;
  training_ = false;
  auto out = nn::argmax_rows(forward(x));
  training_ = was;
  return out;
}

void BaselineClassifier::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
                                 std::vector<nn::NamedTensor>& buffers) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].collect(prefix + "layer" + std::to_string(l) + ".", params, buffers);
  }
  buffers.push_back({prefix + "feature_mean", mean_});
  buffers.push_back({prefix + "feature_inv_std", inv_std_});
}

BaselineResult baseline_train_eval(BaselineClassifier& model, const Matrix& train_x,
                                   std::span<const int> train_y, const Matrix& val_x,
                                   std::span<const int> val_y, const BaselineConfig& config) {
  require(train_x.rows == train_y.size() && val_x.rows == val_y.size(), ErrorKind::Validation,
          "baseline features and labels are misaligned");
  require(!train_y.empty() && !val_y.empty(), ErrorKind::Validation, "baseline split is empty");
  require(config.epochs >= 1 && config.batch_size >= 2, ErrorKind::Validation,
          "baseline needs >= 1 epoch and batch size >= 2");
  for (auto* ys : {&train_y, &val_y}) {
    for (int y : *ys) {
      require(y >= 0 && static_cast<std::size_t>(y) < model.classes(), ErrorKind::Validation,
              "baseline label out of range");
    }
  }
  model.fit_standardizer(train_x);

  const std::size_t batch = std::min(config.batch_size, train_y.size());
  Rng rng(derive_seed(config.seed, 2));
  std::vector<std::vector<std::vector<std::size_t>>> plan;
  std::size_t total = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    plan.push_back(joint::epoch_batches(train_y, batch, joint::BatchSampler::Uniform, rng));
    total += plan.back().size();
  }
  nn::LrSchedule schedule;
  schedule.kind = nn::ScheduleKind::LinearWarmup;
  schedule.base_lr = config.lr;
  schedule.total_steps = total;
  schedule.warmup_ratio = config.warmup_ratio;
  nn::AdamW opt(model.parameters("baseline."), {.weight_decay = config.weight_decay});

  BaselineResult result;
  std::size_t step = 0;
  model.set_training(true);
  for (const auto& epoch : plan) {
    double sum = 0.0;
    for (const auto& items : epoch) {
      Matrix xb(items.size(), train_x.cols);
      std::vector<int> yb;
      for (std::size_t r = 0; r < items.size(); ++r) {
        std::copy(train_x.row(items[r]).begin(), train_x.row(items[r]).end(), xb.row(r).begin());
        yb.push_back(train_y[items[r]]);
      }
      opt.zero_grad();
      nn::Tensor loss = nn::softmax_cross_entropy(model.forward(xb), yb);
      require(std::isfinite(loss.item()), ErrorKind::Numeric, "non-finite baseline loss");
      sum += loss.item();
      loss.backward();
      opt.step(nn::lr_at(schedule, step++));
    }
    result.epoch_losses.push_back(sum / static_cast<double>(std::max<std::size_t>(epoch.size(), 1)));
  }
  model.set_training(false);
  result.predictions = model.predict(val_x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < val_y.size(); ++i) hits += result.predictions[i] == val_y[i];
  result.accuracy = static_cast<double>(hits) / static_cast<double>(val_y.size());
  return result;
}

}  // namespace revrir::tasks
