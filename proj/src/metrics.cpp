#include "revrir/metrics.hpp"

#include <cmath>

#include "revrir/error.hpp"

namespace revrir::tasks {

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), ErrorKind::Validation,
          "predictions and labels differ in length");
  require(!labels.empty(), ErrorKind::Validation, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t classes, std::vector<std::string> class_names) {
  require(predictions.size() == labels.size(), ErrorKind::Validation,
          "predictions and labels differ in length");
  require(classes >= 1, ErrorKind::Validation, "confusion matrix needs at least one class");
  if (class_names.empty()) {
    for (std::size_t c = 0; c < classes; ++c) class_names.push_back(std::to_string(c));
  }
  require(class_names.size() == classes, ErrorKind::Validation, "class name count mismatch");
  ConfusionMatrix cm;
  cm.values = Matrix(classes, classes);
  cm.class_names = std::move(class_names);
  cm.support.assign(classes, 0);
  const auto in_range = [classes](int v) { return v >= 0 && static_cast<std::size_t>(v) < classes; };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(in_range(labels[i]) && in_range(predictions[i]), ErrorKind::Validation,
            "class id outside [0, " + std::to_string(classes) + ") at item " + std::to_string(i));
    const auto t = static_cast<std::size_t>(labels[i]);
    cm.values(t, static_cast<std::size_t>(predictions[i])) += 1.0;
    ++cm.support[t];
  }
  for (std::size_t r = 0; r < classes; ++r) {
    if (cm.support[r] == 0) continue;
    for (double& v : cm.values.row(r)) v /= static_cast<double>(cm.support[r]);
  }
  return cm;
}

std::vector<int> collapse_to_types(std::span<const int> room_ids, const catalog::Catalog& catalog) {
  std::vector<int> out;
  out.reserve(room_ids.size());
  for (int id : room_ids) {
    require(id >= 0 && static_cast<std::size_t>(id) < catalog.size(), ErrorKind::Lookup,
            "room class " + std::to_string(id) + " is not in the catalog");
    out.push_back(static_cast<int>(catalog.room_type_of(id)));
  }
  return out;
}

std::vector<std::string> type_names() {
  std::vector<std::string> names;
  for (auto t : catalog::kRoomTypes) names.emplace_back(catalog::to_string(t));
  return names;
}

std::vector<std::string> room_names(const catalog::Catalog& catalog) {
  std::vector<std::string> names;
  for (const auto& r : catalog.rooms()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s-%gx%gx%g", catalog::to_string(r.type), r.width.meters(),
                  r.depth.meters(), r.height.meters());
    names.emplace_back(buf);
  }
  return names;
}

MeanStd mean_std(std::span<const double> values) {
  require(!values.empty(), ErrorKind::Validation, "mean of an empty set");
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return {m, std::sqrt(s / static_cast<double>(values.size()))};
}

}  // namespace revrir::tasks
