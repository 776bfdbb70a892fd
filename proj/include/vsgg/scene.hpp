#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vsgg/geometry.hpp"
#include "vsgg/rng.hpp"
#include "vsgg/taxonomy.hpp"

namespace vsgg {

// Generator configuration. Same config (including seed) always produces a
// byte-identical dataset.
struct SceneConfig {
  int num_videos = 8;
  int frames_per_video = 5;
  int image_width = 640;
  int image_height = 480;
  int min_objects = 2;
  int max_objects = 6;
  int object_classes = 35;
  int predicate_classes = 25;
  uint64_t rng_seed = 1;
  double frame_interval = 0.2;  // seconds per frame

  // Feature synthesizer dimensions; pair embedding width D = 2*d_obj + d_box.
  int d_obj = 48;
  int d_box = 32;
  double feature_noise = 0.02;   // bounded per-dim noise on synthesized features
  double positional_amp = 0.35;  // positional encoding amplitude

  // Simulated detector imperfections.
  double box_jitter_sigma = 0.01;  // gaussian jitter on detected boxes
  double score_noise = 0.1;        // one-hot mixed with uniform at this rate

  // Trajectory shaping.
  double static_fraction = 0.25;  // chance an object stays put
  double min_speed = 0.02;        // units/s for moving objects
  double max_speed = 0.10;
  double trajectory_jitter = 0.003;  // per-frame positional jitter sigma
  double late_entry_prob = 0.0;      // chance an object enters after frame 0

  RuleParams rules;  // includes the long-tail skew knob

  int embedding_dim() const { return 2 * d_obj + d_box; }
  // Throws std::invalid_argument with a diagnostic on the first violation.
  void validate() const;
};

// Per-frame detector stand-in: boxes, class scores and synthesized features,
// exactly the surface an off-the-shelf detector would provide.
struct FrameObservation {
  int video_id = 0;
  int frame_index = 0;
  std::vector<Box> boxes;                            // detected (jittered) boxes
  std::vector<int> class_labels;                     // ground-truth class per object
  std::vector<std::vector<double>> class_scores;     // per-object distribution
  std::vector<std::vector<double>> object_features;  // per-object, d_obj
  // Ordered-pair union features, indexed (i * n + j), diagonal included.
  std::vector<std::vector<double>> union_features;

  int object_count() const { return static_cast<int>(boxes.size()); }
  const std::vector<double>& union_feature(int i, int j) const {
    return union_features[static_cast<size_t>(i) * boxes.size() + j];
  }
};

struct GroundTruthGraph {
  int video_id = 0;
  int frame_index = 0;
  std::vector<Box> boxes;  // true boxes
  std::vector<int> labels;
  // Ordered (subject, predicate, object) triplets, subject != object.
  std::vector<std::array<int, 3>> triplets;
};

struct VideoSample {
  int video_id = 0;
  std::vector<FrameObservation> observations;
  std::vector<GroundTruthGraph> truths;
};

// Deterministic replacement for ROIAlign features: a fixed class embedding
// plus a smooth positional encoding of the box plus bounded keyed noise.
// Noise streams are keyed by (seed, video, frame, slot), so recomputing a
// feature for the same box yields the same vector regardless of call order.
class FeatureSynth {
 public:
  FeatureSynth(uint64_t seed, int d_obj, int num_classes, double noise_amp,
               double positional_amp);

  int d_obj() const { return d_obj_; }
  int num_classes() const { return num_classes_; }

  const std::vector<double>& class_embedding(int label) const;
  std::vector<double> positional_encoding(const Box& box) const;

  std::vector<double> object_feature(int video, int frame, int slot, const Box& box,
                                     int label) const;
  std::vector<double> union_feature(int video, int frame, int subject_slot,
                                    int object_slot, const Box& subject_box,
                                    const Box& object_box, int subject_label,
                                    int object_label) const;

  // Matches the explicit-stream signature used by tests: embedding + encoding
  // + bounded noise drawn from the supplied stream.
  std::vector<double> synth_features(const Box& box, int label, Rng& stream) const;

 private:
  uint64_t seed_;
  int d_obj_;
  int num_classes_;
  double noise_amp_;
  double positional_amp_;
  std::vector<std::vector<double>> class_table_;  // orthonormal rows
  std::vector<double> pos_freq_;                  // (d_obj, 4) row-major
  std::vector<double> pos_phase_;                 // (d_obj)
};

// Generates the full dataset. Objects follow linear-plus-jitter trajectories
// with reflective walls; predicates come from the geometric rules; every
// frame carries at least one triplet from the unskewed head classes.
std::vector<VideoSample> generate_dataset(const SceneConfig& config);

// Re-derives the triplet set of a frame from stored ground-truth boxes
// (prev == nullptr for the first frame). Objects present in the previous
// frame are identified by index; freshly entered objects have no history.
std::vector<std::array<int, 3>> derive_triplets(const GroundTruthGraph& frame,
                                                const GroundTruthGraph* prev,
                                                const SceneConfig& config);

}  // namespace vsgg
