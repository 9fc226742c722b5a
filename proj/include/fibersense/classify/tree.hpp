#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fibersense/features/dataset.hpp"

namespace fibersense::classify {

/// Split nodes send values > threshold right.
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<std::uint64_t> counts;  // per class, leaves only

  bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
  std::size_t max_depth = 6;
  std::size_t min_leaf = 3;
};

struct TrainMeta {
  std::size_t n_samples = 0;
  std::size_t max_depth = 6;
  std::size_t min_leaf = 3;
  std::uint64_t seed = 0;  // training is deterministic; recorded for provenance

  bool operator==(const TrainMeta&) const = default;
};

struct TreeModel {
  std::vector<std::string> classes;
  std::string feature_order_hash;
  TrainMeta train_meta;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Throws ModelError unless the nodes form one rooted binary tree within
  /// max_depth, with in-range children and nonempty leaves.
  void validate() const;
  std::size_t depth() const;
  bool operator==(const TreeModel&) const = default;
};

/// Dense training matrix; y holds indices into `classes`.
struct TrainingSet {
  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
  std::vector<std::string> classes;
  std::size_t n_features = 0;
};

/// Model class order: the event classes when every label is one of them,
/// otherwise the labels sorted. Throws DatasetError on mixed hashes.
TrainingSet to_training_set(const features::LabeledDataset& data);

/// 1 - sum p_i^2. Throws ArgumentError when all counts are zero.
double gini(std::span<const std::uint64_t> counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

inline constexpr double kMinGain = 1e-12;

/// Best Gini-gain split of `rows` over every feature and every midpoint of
/// consecutive distinct values. Ties (within kMinGain) keep the lower feature,
/// then the lower threshold. nullopt when the best gain is <= kMinGain.
std::optional<Split> best_split(const TrainingSet& data, std::span<const std::size_t> rows);

/// Greedy recursive CART. A node is a leaf when pure, at max_depth, holding
/// fewer than 2 * min_leaf rows, or without a positive-gain split. Throws
/// DatasetError when there are fewer than 2 * min_leaf rows.
TreeModel train_tree(const TrainingSet& data, const TreeParams& params = {});
TreeModel train_tree(const features::LabeledDataset& data, const TreeParams& params = {});

struct Prediction {
  std::string label;
  double confidence = 0.0;
  std::vector<double> distribution;  // Laplace-smoothed, in model class order
  std::size_t leaf = 0;
};

/// Index of the leaf `v` routes to. Throws InputError on non-finite values or
/// when a split references a feature `v` does not have.
std::size_t route(const TreeModel& model, std::span<const double> v);
Prediction predict(const TreeModel& model, std::span<const double> v);
/// Checks the vector's feature-order hash against the model first (ModelError).
Prediction predict(const TreeModel& model, const features::FeatureVector& v,
                   const std::string& feature_order_hash = features::feature_order_hash_hex());

/// Majority over the last `window` labels; ties go to the most recent label.
/// Throws ArgumentError on empty history.
std::string smooth_labels(std::span<const std::string> history, std::size_t window = 5);

nlohmann::json to_json(const TreeModel& model);
/// Throws ModelError on malformed or structurally invalid models.
TreeModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TreeModel& model);
TreeModel load_model(const std::filesystem::path& path);

}  // namespace fibersense::classify
