#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fibersense/features/features.hpp"

namespace fibersense::features {

/// One training example. Rows also carry the feature-order hash so a dataset
/// built by an older feature set is rejected instead of silently misread.
struct FeatureRow {
  FeatureVector features;
  std::string label;
  std::uint64_t source_event_id = 0;
  double t_s = 0.0;
  std::string feature_order_hash = feature_order_hash_hex();
};

struct LabeledDataset {
  std::vector<FeatureRow> rows;

  /// Distinct labels in ascending order.
  std::vector<std::string> classes() const;
};

nlohmann::json to_json(const FeatureRow& row);
/// Throws DatasetError on a missing field, wrong feature count or non-number.
FeatureRow feature_row_from_json(const nlohmann::json& j);

void write_dataset(const std::filesystem::path& path, const LabeledDataset& data);
/// Blank lines are skipped. Throws DatasetError naming the line on bad rows
/// and when rows disagree on the feature-order hash.
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace fibersense::features
