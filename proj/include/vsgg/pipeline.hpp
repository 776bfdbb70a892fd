#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsgg/config.hpp"
#include "vsgg/dataset_io.hpp"
#include "vsgg/eval.hpp"
#include "vsgg/graph.hpp"
#include "vsgg/readout.hpp"
#include "vsgg/temporal.hpp"
#include "vsgg/unet.hpp"

namespace vsgg {

// Mutable per-stream state for online inference. Its size is a function of
// (n_max, D, d_obj, history) only — never of how many frames have passed.
struct OnlineState {
  int n_max = 0;
  int dim = 0;
  int d_obj = 0;
  int frames_seen = 0;
  int last_frame_index = -1;
  int valid_slots = 0;
  Tensor<float> prev_clean;                        // (n_max, n_max, D)
  std::vector<int> slot_ident;                     // n_max, -1 free
  std::vector<std::vector<double>> slot_features;  // n_max x d_obj
  MotionMemory memory;
  Rng padding_rng;

  static OnlineState init(const RunConfig& config);

  size_t byte_size() const;

  // Versioned binary snapshot; round-trips exactly (resumable streaming).
  std::string serialize() const;
  static OnlineState deserialize(const std::string& bytes);
};

struct FrameResult {
  SceneGraphPrediction prediction;
  AdjacencyTensor<float> denoised;  // slot_map carries persistent identities
};

// Frame-by-frame inference: slot assignment, adjacency assembly with padding
// refresh for new instances, motion injection, conditioned denoising, and
// graph readout. Frames must arrive strictly in order.
class StreamPipeline {
 public:
  StreamPipeline(const RunConfig& config, DenoiserUNet<float>& net,
                 const ReadoutHeads<float>* heads);

  FrameResult process_frame(OnlineState& state, const FrameObservation& obs) const;

  // Denoise only (no readout); used by the stage-2 trainer.
  AdjacencyTensor<float> denoise_frame(OnlineState& state,
                                       const FrameObservation& obs) const;

 private:
  const RunConfig& cfg_;
  DenoiserUNet<float>& net_;
  const ReadoutHeads<float>* heads_;
  NoiseSchedule sched_;
};

// Rebuilds a detector-style observation from ground-truth boxes/labels (the
// PredCLS/SGCLS input surface). Features come from the same keyed synthesizer
// streams, so with zero detector jitter this equals the stored observation.
FrameObservation observation_from_gt(const GroundTruthGraph& gt,
                                     const FeatureSynth& synth,
                                     const SceneConfig& config);

// Prediction interchange JSONL: a header line, then one record per frame
// with slots (identity, label scores, box), per-pair predicate scores, and
// top-k ranked triplets for both constraint modes.
void write_predictions(const std::string& path, Protocol protocol,
                       const std::vector<SceneGraphPrediction>& predictions,
                       const EvalConfig& eval_config);

std::vector<SceneGraphPrediction> read_predictions(const std::string& path,
                                                   Protocol* protocol_out = nullptr);

}  // namespace vsgg
