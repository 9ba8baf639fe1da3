#pragma once

// Model files. Layout (little-endian, see docs/formats.md):
//
//   magic "CMQM", version u16 = 1
//   K u32, feature_dim u32, segment dims 3 x u32, iterations u32
//   config: learning_rate f64, max_depth u32, min_samples_leaf u32,
//           l2_leaf_reg f64, seed i64
//   class_labels K x f64, base_scores K x f64
//   iterations * K trees, round-major:
//     node_count u32, then per node:
//       feature i32 (-1 = leaf), threshold f64, left u32, right u32, value f64
//
// Serialization is canonical: a loaded model re-saves to identical bytes.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cmqe/binary_io.hpp"
#include "cmqe/error.hpp"
#include "cmqe/gbdt.hpp"

namespace cmqe {

inline constexpr std::string_view kModelMagic = "CMQM";
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string encode_model(const BoostedEnsemble& model) {
  const std::size_t k_count = model.num_classes();
  if (k_count < 2 || model.base_scores.size() != k_count || model.feature_dim == 0 ||
      model.trees.size() != static_cast<std::size_t>(model.config.iterations) * k_count) {
    throw DataError("refusing to save an inconsistent model");
  }
  std::string out;
  io::append_bytes(out, kModelMagic);
  io::append_le<std::uint16_t>(out, kModelVersion);
  io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(k_count));
  io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_dim));
  for (auto d : model.segment_dims) io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  io::append_le<std::uint32_t>(out, model.config.iterations);
  io::append_le<double>(out, model.config.learning_rate);
  io::append_le<std::uint32_t>(out, model.config.max_depth);
  io::append_le<std::uint32_t>(out, model.config.min_samples_leaf);
  io::append_le<double>(out, model.config.l2_leaf_reg);
  io::append_le<std::int64_t>(out, model.config.seed);
  for (double l : model.class_labels) io::append_le<double>(out, l);
  for (double b : model.base_scores) io::append_le<double>(out, b);
  for (const auto& tree : model.trees) {
    io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      io::append_le<std::int32_t>(out, node.feature);
      io::append_le<double>(out, node.threshold);
      io::append_le<std::uint32_t>(out, node.left);
      io::append_le<std::uint32_t>(out, node.right);
      io::append_le<double>(out, node.value);
    }
  }
  return out;
}

inline BoostedEnsemble decode_model(std::string_view bytes) {
  io::Reader in(bytes);
  if (in.read_bytes(4, "magic") != kModelMagic) throw FormatError("bad magic, not a model file", 0);
  const auto version_at = in.offset();
  const auto version = in.read<std::uint16_t>("version");
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version), version_at);
  }
  BoostedEnsemble model;
  const auto k_at = in.offset();
  const auto k_count = in.read<std::uint32_t>("class count");
  if (k_count < 2) throw FormatError("model must have at least two classes", k_at);
  const auto dim_at = in.offset();
  model.feature_dim = in.read<std::uint32_t>("feature_dim");
  if (model.feature_dim == 0) throw FormatError("feature_dim must be positive", dim_at);
  const auto seg_at = in.offset();
  for (auto& d : model.segment_dims) d = in.read<std::uint32_t>("segment dims");
  const auto seg_sum = model.segment_dims[0] + model.segment_dims[1] + model.segment_dims[2];
  if (seg_sum != 0 && seg_sum != model.feature_dim) {
    throw FormatError("segment dims do not add up to feature_dim", seg_at);
  }
  auto& c = model.config;
  c.iterations = in.read<std::uint32_t>("iterations");
  const auto cfg_at = in.offset();
  c.learning_rate = in.read<double>("learning_rate");
  c.max_depth = in.read<std::uint32_t>("max_depth");
  c.min_samples_leaf = in.read<std::uint32_t>("min_samples_leaf");
  c.l2_leaf_reg = in.read<double>("l2_leaf_reg");
  c.seed = in.read<std::int64_t>("seed");
  try {
    validate(c);
  } catch (const UsageError& e) {
    throw FormatError(std::string("invalid config echo: ") + e.what(), cfg_at);
  }

  const auto labels_at = in.offset();
  model.class_labels.resize(k_count);
  for (auto& l : model.class_labels) l = in.read<double>("class labels");
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!std::isfinite(model.class_labels[k]) || (k > 0 && !(model.class_labels[k - 1] < model.class_labels[k]))) {
      throw FormatError("class labels must be finite and strictly increasing", labels_at);
    }
  }
  model.base_scores.resize(k_count);
  for (auto& b : model.base_scores) {
    const auto at = in.offset();
    b = in.read<double>("base scores");
    if (!std::isfinite(b)) throw FormatError("non-finite base score", at);
  }

  const std::uint64_t tree_count = static_cast<std::uint64_t>(c.iterations) * k_count;
  model.trees.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(tree_count, in.remaining() / 4)));
  for (std::uint64_t t = 0; t < tree_count; ++t) {
    const auto tree_at = in.offset();
    const auto node_count = in.read<std::uint32_t>("node_count");
    if (node_count == 0) throw FormatError("tree with no nodes", tree_at);
    if (node_count > in.remaining() / 28) throw FormatError("truncated tree", in.offset());
    std::vector<TreeNode> nodes(node_count);
    for (std::uint32_t j = 0; j < node_count; ++j) {
      const auto node_at = in.offset();
      auto& node = nodes[j];
      node.feature = in.read<std::int32_t>("node feature");
      node.threshold = in.read<double>("node threshold");
      node.left = in.read<std::uint32_t>("node left");
      node.right = in.read<std::uint32_t>("node right");
      node.value = in.read<double>("node value");
      if (node.is_leaf()) {
        if (node.feature != -1 || !std::isfinite(node.value)) throw FormatError("malformed leaf", node_at);
      } else {
        // Children always follow their parent, which rules out cycles.
        if (static_cast<std::size_t>(node.feature) >= model.feature_dim || !std::isfinite(node.threshold) ||
            node.left <= j || node.right <= j || node.left >= node_count || node.right >= node_count ||
            node.left == node.right) {
          throw FormatError("malformed internal node", node_at);
        }
      }
    }
    RegressionTree tree(std::move(nodes));
    if (tree.depth() > c.max_depth) throw FormatError("tree deeper than max_depth", tree_at);
    model.trees.push_back(std::move(tree));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last tree", in.offset());
  return model;
}

inline void save_model(const BoostedEnsemble& model, const std::filesystem::path& path) {
  io::write_file(path, encode_model(model));
}

inline BoostedEnsemble load_model(const std::filesystem::path& path) {
  try {
    return decode_model(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

}  // namespace cmqe
