#include "fibersense/classify/tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "fibersense/errors.hpp"
#include "fibersense/labels.hpp"

namespace fibersense::classify {

double gini(std::span<const std::uint64_t> counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw ArgumentError("gini of an empty set");
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

TrainingSet to_training_set(const features::LabeledDataset& data) {
  TrainingSet set;
  set.n_features = features::kFeatureCount;
  const auto labels = data.classes();
  const bool event_classes = std::all_of(labels.begin(), labels.end(), [](const std::string& l) {
    return std::find(kEventClasses.begin(), kEventClasses.end(), l) != kEventClasses.end();
  });
  if (event_classes) {
    set.classes.assign(kEventClasses.begin(), kEventClasses.end());
  } else {
    set.classes = labels;
  }
  for (const auto& row : data.rows) {
    if (row.feature_order_hash != data.rows.front().feature_order_hash) {
      throw DatasetError("dataset rows disagree on the feature order hash");
    }
    set.x.emplace_back(row.features.values.begin(), row.features.values.end());
    set.y.push_back(static_cast<std::size_t>(
        std::find(set.classes.begin(), set.classes.end(), row.label) - set.classes.begin()));
  }
  return set;
}

std::optional<Split> best_split(const TrainingSet& data, std::span<const std::size_t> rows) {
  const std::size_t k = data.classes.size();
  std::vector<std::uint64_t> parent(k, 0);
  for (auto r : rows) ++parent[data.y[r]];
  if (rows.empty()) return std::nullopt;
  const double parent_impurity = gini(parent);
  const auto n = static_cast<double>(rows.size());

  std::optional<Split> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<std::uint64_t> left(k);
  std::vector<std::uint64_t> right(k);
  for (std::size_t f = 0; f < data.n_features; ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.x[a][f] < data.x[b][f]; });
    std::fill(left.begin(), left.end(), 0);
    right = parent;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      ++left[data.y[order[i]]];
      --right[data.y[order[i]]];
      const double lo = data.x[order[i]][f];
      const double hi = data.x[order[i + 1]][f];
      if (!(lo < hi)) continue;
      double threshold = lo + (hi - lo) / 2.0;
      if (!(threshold < hi)) threshold = lo;
      const auto n_left = static_cast<double>(i + 1);
      const double gain =
          parent_impurity - (n_left / n) * gini(left) - ((n - n_left) / n) * gini(right);
      if (!best || gain > best->gain + kMinGain) best = Split{f, threshold, gain};
    }
  }
  if (!best || best->gain <= kMinGain) return std::nullopt;
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const TreeParams& params) : data_(data), params_(params) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> rows(data_.y.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  std::size_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t index = nodes_.size();
    nodes_.emplace_back();
    std::vector<std::uint64_t> counts(data_.classes.size(), 0);
    for (auto r : rows) ++counts[data_.y[r]];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;

    std::optional<Split> split;
    if (!pure && depth < params_.max_depth && rows.size() >= 2 * params_.min_leaf) {
      split = best_split(data_, rows);
    }
    if (!split) {
      nodes_[index].counts = std::move(counts);
      return index;
    }

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (auto r : rows) {
      (data_.x[r][split->feature] > split->threshold ? right_rows : left_rows).push_back(r);
    }
    const std::size_t left = grow(left_rows, depth + 1);
    const std::size_t right = grow(right_rows, depth + 1);
    auto& node = nodes_[index];
    node.leaf = false;
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  const TrainingSet& data_;
  const TreeParams& params_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

TreeModel train_tree(const TrainingSet& data, const TreeParams& params) {
  if (data.x.size() != data.y.size()) throw DatasetError("feature and label counts differ");
  if (data.classes.empty()) throw DatasetError("dataset has no classes");
  if (params.max_depth == 0 || params.min_leaf == 0) {
    throw ArgumentError("max_depth and min_leaf must be positive");
  }
  if (data.y.empty() || data.y.size() < 2 * params.min_leaf) {
    throw DatasetError("training needs at least 2 * min_leaf = " +
                       std::to_string(2 * params.min_leaf) + " rows, got " +
                       std::to_string(data.y.size()));
  }
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    if (data.y[i] >= data.classes.size()) throw DatasetError("label index out of range");
    if (data.x[i].size() != data.n_features) throw DatasetError("row has the wrong feature count");
    for (double v : data.x[i]) {
      if (!std::isfinite(v)) throw DatasetError("non-finite feature in row " + std::to_string(i));
    }
  }
  TreeModel model;
  model.classes = data.classes;
  model.train_meta = {data.y.size(), params.max_depth, params.min_leaf, 0};
  model.nodes = TreeBuilder(data, params).build();
  return model;
}

TreeModel train_tree(const features::LabeledDataset& data, const TreeParams& params) {
  auto model = train_tree(to_training_set(data), params);
  model.feature_order_hash = data.rows.front().feature_order_hash;
  return model;
}

void TreeModel::validate() const {
  if (classes.empty()) throw ModelError("model has no classes");
  if (nodes.empty()) throw ModelError("model has no nodes");
  std::vector<char> seen(nodes.size(), 0);
  // (node, depth) worklist; a node reached twice means a cycle or shared child.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t visited = 0;
  while (!stack.empty()) {
    const auto [i, depth] = stack.back();
    stack.pop_back();
    if (i >= nodes.size()) throw ModelError("child index " + std::to_string(i) + " out of range");
    if (seen[i]) throw ModelError("node " + std::to_string(i) + " is reachable twice");
    seen[i] = 1;
    ++visited;
    const auto& node = nodes[i];
    if (node.leaf) {
      if (node.counts.size() != classes.size()) throw ModelError("leaf counts do not match classes");
      if (std::all_of(node.counts.begin(), node.counts.end(), [](auto c) { return c == 0; })) {
        throw ModelError("leaf " + std::to_string(i) + " has no samples");
      }
      continue;
    }
    if (depth + 1 > train_meta.max_depth) throw ModelError("tree deeper than max_depth");
    if (!std::isfinite(node.threshold)) throw ModelError("non-finite threshold");
    stack.emplace_back(node.right, depth + 1);
    stack.emplace_back(node.left, depth + 1);
  }
  if (visited != nodes.size()) throw ModelError("model has unreachable nodes");
}

std::size_t TreeModel::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].leaf) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

std::size_t route(const TreeModel& model, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError("feature vector has a non-finite value");
  }
  std::size_t i = 0;
  while (!model.nodes.at(i).leaf) {
    const auto& node = model.nodes[i];
    if (node.feature >= v.size()) {
      throw InputError("split on feature " + std::to_string(node.feature) + " but vector has " +
                       std::to_string(v.size()));
    }
    i = v[node.feature] > node.threshold ? node.right : node.left;
  }
  return i;
}

Prediction predict(const TreeModel& model, std::span<const double> v) {
  Prediction p;
  p.leaf = route(model, v);
  const auto& counts = model.nodes[p.leaf].counts;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0) +
                       static_cast<double>(model.classes.size());
  p.distribution.reserve(counts.size());
  std::size_t best = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    p.distribution.push_back((static_cast<double>(counts[c]) + 1.0) / total);
    const bool higher = counts[c] > counts[best];
    const bool tie_earlier = counts[c] == counts[best] && model.classes[c] < model.classes[best];
    if (higher || tie_earlier) best = c;
  }
  p.label = model.classes[best];
  p.confidence = p.distribution[best];
  return p;
}

Prediction predict(const TreeModel& model, const features::FeatureVector& v,
                   const std::string& feature_order_hash) {
  if (feature_order_hash != model.feature_order_hash) {
    throw ModelError("feature order hash " + feature_order_hash + " does not match model hash " +
                     model.feature_order_hash);
  }
  return predict(model, std::span<const double>(v.values));
}

std::string smooth_labels(std::span<const std::string> history, std::size_t window) {
  if (history.empty()) throw ArgumentError("smooth_labels needs a nonempty history");
  window = std::max<std::size_t>(window, 1);
  const auto recent = history.subspan(history.size() - std::min(window, history.size()));
  std::map<std::string, std::size_t> votes;
  for (const auto& l : recent) ++votes[l];
  std::size_t top = 0;
  for (const auto& [label, n] : votes) top = std::max(top, n);
  // Walk backwards so the most recent of the tied labels wins.
  for (auto it = recent.rbegin(); it != recent.rend(); ++it) {
    if (votes[*it] == top) return *it;
  }
  return recent.back();
}

nlohmann::json to_json(const TreeModel& model) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : model.nodes) {
    if (n.leaf) {
      nodes.push_back({{"counts", n.counts}});
    } else {
      nodes.push_back({{"f", n.feature}, {"thr", n.threshold}, {"l", n.left}, {"r", n.right}});
    }
  }
  return {
      {"classes", model.classes},
      {"feature_order_hash", model.feature_order_hash},
      {"train_meta",
       {{"n_samples", model.train_meta.n_samples},
        {"max_depth", model.train_meta.max_depth},
        {"min_leaf", model.train_meta.min_leaf},
        {"seed", model.train_meta.seed}}},
      {"nodes", std::move(nodes)},
  };
}

TreeModel model_from_json(const nlohmann::json& j) {
  TreeModel model;
  try {
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.feature_order_hash = j.at("feature_order_hash").get<std::string>();
    const auto& meta = j.at("train_meta");
    model.train_meta.n_samples = meta.at("n_samples").get<std::size_t>();
    model.train_meta.max_depth = meta.at("max_depth").get<std::size_t>();
    model.train_meta.min_leaf = meta.at("min_leaf").get<std::size_t>();
    model.train_meta.seed = meta.value("seed", std::uint64_t{0});
    for (const auto& jn : j.at("nodes")) {
      TreeNode n;
      if (jn.contains("counts")) {
        n.counts = jn.at("counts").get<std::vector<std::uint64_t>>();
      } else {
        n.leaf = false;
        n.feature = jn.at("f").get<std::size_t>();
        n.threshold = jn.at("thr").get<double>();
        n.left = jn.at("l").get<std::size_t>();
        n.right = jn.at("r").get<std::size_t>();
      }
      model.nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const TreeModel& model) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot open " + path.string() + " for writing");
  out << to_json(model).dump(1) << '\n';
  if (!out) throw ModelError("write to " + path.string() + " failed");
}

TreeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

}  // namespace fibersense::classify
