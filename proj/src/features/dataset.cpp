#include "fibersense/features/dataset.hpp"

#include <fstream>
#include <set>

#include "fibersense/errors.hpp"

namespace fibersense::features {

std::vector<std::string> LabeledDataset::classes() const {
  std::set<std::string> labels;
  for (const auto& r : rows) labels.insert(r.label);
  return {labels.begin(), labels.end()};
}

nlohmann::json to_json(const FeatureRow& row) {
  return {
      {"features", row.features.values},
      {"label", row.label},
      {"source_event_id", row.source_event_id},
      {"t_s", row.t_s},
      {"feature_order_hash", row.feature_order_hash},
  };
}

FeatureRow feature_row_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DatasetError("dataset row is not an object");
  const auto it = j.find("features");
  if (it == j.end() || !it->is_array() || it->size() != kFeatureCount) {
    throw DatasetError("dataset row needs a 'features' array of " + std::to_string(kFeatureCount) +
                       " numbers");
  }
  FeatureRow row;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!(*it)[i].is_number()) throw DatasetError("feature " + std::to_string(i) + " is not a number");
    row.features.values[i] = (*it)[i].get<double>();
  }
  const auto label = j.find("label");
  if (label == j.end() || !label->is_string()) throw DatasetError("dataset row needs a 'label'");
  row.label = label->get<std::string>();
  row.source_event_id = j.value("source_event_id", std::uint64_t{0});
  row.t_s = j.value("t_s", 0.0);
  row.feature_order_hash = j.value("feature_order_hash", feature_order_hash_hex());
  return row;
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
  for (const auto& row : data.rows) out << to_json(row).dump() << '\n';
  if (!out) throw DatasetError("write to " + path.string() + " failed");
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  LabeledDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      data.rows.push_back(feature_row_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (data.rows.back().feature_order_hash != data.rows.front().feature_order_hash) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": feature order hash differs from the first row");
    }
  }
  return data;
}

}  // namespace fibersense::features
