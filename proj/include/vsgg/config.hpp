#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsgg/eval.hpp"
#include "vsgg/graph.hpp"
#include "vsgg/readout.hpp"
#include "vsgg/scene.hpp"
#include "vsgg/schedule.hpp"
#include "vsgg/unet.hpp"

namespace vsgg {

struct TemporalConfig {
  bool conditioning = true;      // condition the denoiser on A^{t-1,0}
  bool motion_injection = true;  // add the approach-speed matrix per step
  int history = 8;               // motion memory depth
  double similarity_threshold = 0.2;
  // Optional per-channel scale for the injected speed; empty = uniform
  // broadcast.
  std::vector<double> motion_channel_scale;
};

struct Stage1Config {
  double lr = 1e-4;
  int batch_pairs = 2048;  // pair embeddings per optimizer step
  int epochs = 100;
  int clip_frames = 5;
};

struct Stage2Config {
  double lr = 1e-5;
  int batch_frames = 8;
  int epochs = 10;
  double decay_factor = 0.2;  // single mid-run lr decay (x 1/5)
  double weight_decay = 0.01;
};

struct RunConfig {
  uint64_t seed = 7;
  int n_max = kDefaultNMax;
  int resize_longer_edge = 720;  // kept for real-data readers; no-op here
  SceneConfig scene;
  DiffusionConfig diffusion;
  UNetConfig unet;
  HeadsConfig heads;
  TemporalConfig temporal;
  Stage1Config stage1;
  Stage2Config stage2;
  EvalConfig eval;
  PairComponentMask feature_mask;  // adjacency feature-component ablation

  // Fills the dimensions that follow from the scene config and validates
  // everything; call after parsing.
  void resolve();

  int embedding_dim() const { return scene.embedding_dim(); }
};

RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

// Artifact root: --out arguments are relative to this when set. Reads the
// VSGG_ARTIFACTS environment variable, "." when unset.
std::string artifact_root();
std::string under_artifact_root(const std::string& path);

}  // namespace vsgg
