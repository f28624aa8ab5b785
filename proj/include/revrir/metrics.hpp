#pragma once

#include <span>
#include <string>
#include <vector>

#include "revrir/catalog.hpp"
#include "revrir/matrix.hpp"

namespace revrir::tasks {

/// Fraction of exact matches.
double top1_accuracy(std::span<const int> predictions, std::span<const int> labels);

struct ConfusionMatrix {
  /// values(i, j): fraction of true-class-i items predicted as j.
  Matrix values;
  std::vector<std::string> class_names;
  /// Items per true class. Rows with zero support are left at zero.
  std::vector<std::size_t> support;

  std::size_t size() const { return values.rows; }
  bool row_has_support(std::size_t i) const { return support[i] > 0; }
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t classes, std::vector<std::string> class_names = {});

/// Maps room-class ids to room-type ids (0 small, 1 large, 2 hall).
std::vector<int> collapse_to_types(std::span<const int> room_ids, const catalog::Catalog& catalog);

std::vector<std::string> type_names();
std::vector<std::string> room_names(const catalog::Catalog& catalog);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

}  // namespace revrir::tasks
