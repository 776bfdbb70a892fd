#pragma once

#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vsgg/geometry.hpp"
#include "vsgg/rng.hpp"
#include "vsgg/scene.hpp"
#include "vsgg/tensor.hpp"

namespace vsgg {

constexpr int kDefaultNMax = 100;
constexpr int kDefaultEmbeddingDim = 128;
constexpr int kPaddingIdentity = -1;

// Which pieces of the pair embedding are populated; the excluded components
// are zeroed so the embedding width stays fixed (used by the feature-ablation
// rows).
struct PairComponentMask {
  bool subject_feature = true;
  bool union_feature = true;
  bool subject_box = true;
};

// Padded (n_max, n_max, D) relation tensor plus slot bookkeeping. Slots
// >= valid_count hold unit-gaussian padding and carry no identity.
template <typename T>
struct AdjacencyTensor {
  Tensor<T> data;             // (n_max, n_max, D)
  int valid_count = 0;
  std::vector<int> slot_map;  // slot -> persistent identity, kPaddingIdentity for padding
  int frame_index = 0;

  int n_max() const { return data.shape[0]; }
  int dim() const { return data.shape[2]; }
};

// 9-element geometric descriptor of a normalized box:
// (x1, y1, x2, y2, cx, cy, w, h, w*h).
inline std::array<double, 9> box_descriptor(const Box& box) {
  return {box.x, box.y, box.x2(), box.y2(), box.cx(), box.cy(), box.w, box.h,
          box.area()};
}

// Fixed (non-learned) sinusoidal expansion of the geometric descriptor to
// d_box dims: [sin(W r); cos(W r)] with a frozen projection W.
inline std::vector<double> box_to_feature(const Box& box, int image_width,
                                          int image_height, int d_box = 32) {
  (void)image_width;
  (void)image_height;  // coordinates are normalized; kept for the call contract
  if (box.w <= 0.0 || box.h <= 0.0)
    throw std::invalid_argument("box_to_feature: degenerate box (w or h <= 0)");
  if (d_box < 2 || d_box % 2 != 0)
    throw std::invalid_argument("box_to_feature: d_box must be a positive even number");

  const std::array<double, 9> raw = box_descriptor(box);
  const int half = d_box / 2;
  // Frozen projection keyed only by d_box.
  thread_local std::vector<double> proj;
  thread_local int proj_dbox = -1;
  if (proj_dbox != d_box) {
    Rng rng = Rng::from_key(0, {kTagBoxExpansion, static_cast<uint64_t>(d_box)});
    proj.assign(static_cast<size_t>(half) * 9, 0.0);
    for (double& v : proj) v = rng.normal(0.0, 2.0);
    proj_dbox = d_box;
  }

  std::vector<double> out(d_box);
  for (int k = 0; k < half; ++k) {
    double z = 0.0;
    for (int m = 0; m < 9; ++m) z += proj[static_cast<size_t>(k) * 9 + m] * raw[m];
    out[k] = std::sin(z);
    out[half + k] = std::cos(z);
  }
  return out;
}

// Ordered concatenation [F_subject; F_union; F_subject_box]. The subject's
// instance and box features go with row index i, so (i, j) and (j, i) differ.
template <typename T>
std::vector<T> pair_embedding(const std::vector<double>& subject_feature,
                              const std::vector<double>& union_feature,
                              const std::vector<double>& subject_box_feature,
                              const PairComponentMask& mask = {}) {
  if (subject_feature.size() != union_feature.size())
    throw std::invalid_argument("pair_embedding: object/union feature dims differ");
  std::vector<T> out;
  out.reserve(subject_feature.size() * 2 + subject_box_feature.size());
  for (double v : subject_feature)
    out.push_back(mask.subject_feature ? static_cast<T>(v) : T{0});
  for (double v : union_feature)
    out.push_back(mask.union_feature ? static_cast<T>(v) : T{0});
  for (double v : subject_box_feature)
    out.push_back(mask.subject_box ? static_cast<T>(v) : T{0});
  return out;
}

namespace detail {

template <typename T>
void fill_padding(AdjacencyTensor<T>& adj, Rng& rng) {
  const int n_max = adj.n_max();
  const int d = adj.dim();
  const int n = adj.valid_count;
  for (int i = 0; i < n_max; ++i)
    for (int j = 0; j < n_max; ++j) {
      if (i < n && j < n) continue;
      for (int c = 0; c < d; ++c) adj.data.at3(i, j, c) = static_cast<T>(rng.normal());
    }
}

template <typename T>
void write_entry(AdjacencyTensor<T>& adj, int i, int j, const std::vector<T>& e) {
  for (int c = 0; c < adj.dim(); ++c) adj.data.at3(i, j, c) = e[c];
}

}  // namespace detail

// Builds A^t from detector output. The valid block holds pair embeddings for
// every ordered pair (the diagonal uses the self union box); everything else
// is unit-gaussian padding drawn from `padding_rng` only.
template <typename T>
AdjacencyTensor<T> assemble_adjacency(const FrameObservation& obs, int n_max,
                                      Rng& padding_rng, int d_box = 32,
                                      const PairComponentMask& mask = {},
                                      int embedding_dim = -1) {
  const int n = obs.object_count();
  if (n > n_max)
    throw std::invalid_argument("assemble_adjacency: frame has " + std::to_string(n) +
                                " objects but n_max is " + std::to_string(n_max));
  const int d_obj = n > 0 ? static_cast<int>(obs.object_features[0].size()) : 0;
  int dim = n > 0 ? 2 * d_obj + d_box : embedding_dim;
  if (dim <= 0)
    throw std::invalid_argument(
        "assemble_adjacency: empty frame needs an explicit embedding_dim");
  if (embedding_dim > 0 && dim != embedding_dim)
    throw std::invalid_argument("assemble_adjacency: embedding dim mismatch, got " +
                                std::to_string(dim) + " expected " +
                                std::to_string(embedding_dim));

  AdjacencyTensor<T> adj;
  adj.frame_index = obs.frame_index;
  adj.valid_count = n;
  adj.slot_map.assign(n_max, kPaddingIdentity);
  for (int i = 0; i < n; ++i) adj.slot_map[i] = i;
  adj.data = Tensor<T>({n_max, n_max, dim});

  for (int i = 0; i < n; ++i) {
    const std::vector<double> box_feat = box_to_feature(obs.boxes[i], 0, 0, d_box);
    for (int j = 0; j < n; ++j) {
      const auto entry = pair_embedding<T>(obs.object_features[i], obs.union_feature(i, j),
                                           box_feat, mask);
      if (static_cast<int>(entry.size()) != dim)
        throw std::invalid_argument("assemble_adjacency: embedding dim mismatch");
      detail::write_entry(adj, i, j, entry);
    }
  }
  detail::fill_padding(adj, padding_rng);
  return adj;
}

// Ground-truth tensor: features derived from ground-truth boxes; ordered
// pairs without a ground-truth predicate stay zero ("empty entries"), the
// diagonal included. Padding is gaussian as in assemble_adjacency.
template <typename T>
AdjacencyTensor<T> assemble_gt_adjacency(const GroundTruthGraph& gt,
                                         const FeatureSynth& synth, int n_max,
                                         Rng& padding_rng, int d_box = 32,
                                         const PairComponentMask& mask = {}) {
  const int n = static_cast<int>(gt.boxes.size());
  if (n > n_max)
    throw std::invalid_argument("assemble_gt_adjacency: frame has " + std::to_string(n) +
                                " objects but n_max is " + std::to_string(n_max));
  const int d = 2 * synth.d_obj() + d_box;

  AdjacencyTensor<T> adj;
  adj.frame_index = gt.frame_index;
  adj.valid_count = n;
  adj.slot_map.assign(n_max, kPaddingIdentity);
  for (int i = 0; i < n; ++i) adj.slot_map[i] = i;
  adj.data = Tensor<T>({n_max, n_max, d});

  std::set<std::pair<int, int>> related;
  for (const auto& t : gt.triplets) related.insert({t[0], t[2]});

  for (int i = 0; i < n; ++i) {
    std::vector<double> box_feat;  // lazily built; many rows may be all-empty
    const std::vector<double> obj_feat =
        synth.object_feature(gt.video_id, gt.frame_index, i, gt.boxes[i], gt.labels[i]);
    for (int j = 0; j < n; ++j) {
      if (i == j || !related.count({i, j})) continue;
      if (box_feat.empty()) box_feat = box_to_feature(gt.boxes[i], 0, 0, d_box);
      const std::vector<double> uf =
          synth.union_feature(gt.video_id, gt.frame_index, i, j, gt.boxes[i], gt.boxes[j],
                              gt.labels[i], gt.labels[j]);
      detail::write_entry(adj, i, j, pair_embedding<T>(obj_feat, uf, box_feat, mask));
    }
  }
  detail::fill_padding(adj, padding_rng);
  return adj;
}

// Debug dump: rank header (u32 count + u32 dims) followed by row-major
// float32 payload.
template <typename T>
std::string tensor_to_blob(const Tensor<T>& t) {
  std::string out;
  const uint32_t rank = static_cast<uint32_t>(t.shape.size());
  out.append(reinterpret_cast<const char*>(&rank), 4);
  for (int d : t.shape) {
    const uint32_t v = static_cast<uint32_t>(d);
    out.append(reinterpret_cast<const char*>(&v), 4);
  }
  for (const T& v : t.data) {
    const float f = static_cast<float>(v);
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
  return out;
}

}  // namespace vsgg
