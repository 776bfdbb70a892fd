#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsgg/graph.hpp"
#include "vsgg/rng.hpp"
#include "vsgg/tensor.hpp"

namespace vsgg {

constexpr double kNewObjectSimilarity = 0.2;
constexpr int kDefaultMotionHistory = 8;

// Per-slot ring buffer of box centers over the last H frames, enough to
// evaluate the pairwise approach speed.
class MotionMemory {
 public:
  MotionMemory() = default;
  MotionMemory(int n_slots, int capacity, double frame_interval)
      : capacity_(capacity), dt_(frame_interval), slots_(n_slots) {}

  int capacity() const { return capacity_; }
  double frame_interval() const { return dt_; }
  int slot_count() const { return static_cast<int>(slots_.size()); }

  // Frame indices must be strictly increasing per slot.
  void record(int slot, int frame_index, double cx, double cy);

  struct Entry {
    int frame_index = -1;
    double cx = 0.0, cy = 0.0;
  };

  // Latest entry at exactly `frame_index`, if present.
  std::optional<Entry> at(int slot, int frame_index) const;
  // Most recent entry strictly earlier than `frame_index`.
  std::optional<Entry> before(int slot, int frame_index) const;

  const std::vector<std::vector<Entry>>& raw() const { return slots_; }
  std::vector<std::vector<Entry>>& raw() { return slots_; }

  size_t byte_size() const {
    return sizeof(MotionMemory) +
           slots_.size() * (sizeof(std::vector<Entry>) + capacity_ * sizeof(Entry));
  }

 private:
  int capacity_ = kDefaultMotionHistory;
  double dt_ = 1.0;
  std::vector<std::vector<Entry>> slots_;
};

struct SpeedSample {
  double value = 0.0;
  bool cold = false;  // insufficient history; value forced to 0
};

// v = (d_t - d_prev) / elapsed seconds, negative when approaching. Uses the
// nearest stored earlier frame shared by both slots and rescales by the
// actual elapsed time; cold start yields 0.
SpeedSample approach_speed(const MotionMemory& memory, int slot_i, int slot_j,
                           int frame_index);

// (n_max, n_max) matrix of approach speeds for the valid slots, zero padded.
Tensor<double> build_speed_matrix(const MotionMemory& memory, int valid_count,
                                  int n_max, int frame_index);

// A_k[i, j, :] += v[i, j], the scalar broadcast across all channels. An
// optional per-channel scale replaces the uniform broadcast (ablation knob).
template <typename T>
void inject_motion(Tensor<T>& a_k, const Tensor<double>& v,
                   const std::vector<double>* channel_scale = nullptr) {
  if (a_k.shape.size() != 3 || v.shape.size() != 2 || a_k.shape[0] != v.shape[0] ||
      a_k.shape[1] != v.shape[1])
    throw std::invalid_argument("inject_motion: incompatible shapes " + a_k.shape_str() +
                                " vs " + v.shape_str());
  if (!v.all_finite()) throw std::invalid_argument("inject_motion: non-finite speeds");
  const int rows = a_k.shape[0], cols = a_k.shape[1], d = a_k.shape[2];
  if (channel_scale && static_cast<int>(channel_scale->size()) != d)
    throw std::invalid_argument("inject_motion: channel scale size mismatch");
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double s = v.at2(i, j);
      if (s == 0.0) continue;
      for (int c = 0; c < d; ++c)
        a_k.at3(i, j, c) += static_cast<T>(channel_scale ? s * (*channel_scale)[c] : s);
    }
}

struct SlotAssignment {
  // Per current-frame object: assigned prior slot, or -1 when new.
  std::vector<int> slot_of_object;
  std::vector<int> new_objects;  // indices into the current frame, ascending
};

// Cosine-similarity matching against the previous frame's per-slot features.
// An object is new when its best similarity is below the threshold; matches
// are greedy by descending similarity, each prior slot used at most once,
// ties broken by the lower slot index.
SlotAssignment detect_new_objects(
    const std::vector<std::vector<double>>& features_now,
    const std::vector<std::vector<double>>& features_prev,
    double threshold = kNewObjectSimilarity);

// Promotes padding slots to valid slots for freshly appeared objects: the
// promoted rows/columns are rebuilt with pair embeddings against every valid
// slot (diagonal included), and slot bookkeeping is updated.
// `slot_obs` maps slots to observation indices for existing slots; new
// objects are appended in ascending observation order.
template <typename T>
void refresh_padding(AdjacencyTensor<T>& adj, const std::vector<int>& new_object_indices,
                     const FrameObservation& obs, const std::vector<int>& slot_obs,
                     int d_box, const PairComponentMask& mask = {}) {
  if (new_object_indices.empty()) return;
  const int wanted = adj.valid_count + static_cast<int>(new_object_indices.size());
  if (wanted > adj.n_max())
    throw std::invalid_argument("refresh_padding: " + std::to_string(wanted) +
                                " objects exceed n_max " + std::to_string(adj.n_max()));

  std::vector<int> slot_to_obs = slot_obs;
  slot_to_obs.resize(adj.n_max(), -1);

  for (int obj : new_object_indices) {
    const int slot = adj.valid_count;
    slot_to_obs[slot] = obj;
    adj.slot_map[slot] = obj;  // caller overwrites with a persistent identity
    adj.valid_count += 1;

    const std::vector<double> box_feat = box_to_feature(obs.boxes[obj], 0, 0, d_box);
    for (int other = 0; other < adj.valid_count; ++other) {
      const int other_obj = slot_to_obs[other];
      // new slot as subject
      const auto row_entry = pair_embedding<T>(
          obs.object_features[obj], obs.union_feature(obj, other_obj), box_feat, mask);
      for (int c = 0; c < adj.dim(); ++c) adj.data.at3(slot, other, c) = row_entry[c];
      if (other == slot) continue;
      // new slot as object
      const std::vector<double> other_box_feat =
          box_to_feature(obs.boxes[other_obj], 0, 0, d_box);
      const auto col_entry =
          pair_embedding<T>(obs.object_features[other_obj],
                            obs.union_feature(other_obj, obj), other_box_feat, mask);
      for (int c = 0; c < adj.dim(); ++c) adj.data.at3(other, slot, c) = col_entry[c];
    }
  }
}

}  // namespace vsgg
