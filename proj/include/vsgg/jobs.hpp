#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsgg/config.hpp"
#include "vsgg/eval.hpp"
#include "vsgg/train.hpp"

namespace vsgg {

// Pipeline stages shared by the CLI and the ablation runner. Every stage is a
// pure function of (inputs on disk, config, seeds) and writes deterministic
// bytes.

// Generates and writes the dataset; returns the output directory.
std::string job_synth(const RunConfig& config, const std::string& out_dir);

TrainResult job_train_stage1(const RunConfig& config, const std::string& data_dir,
                             const std::string& out_checkpoint,
                             const std::string& resume_from = "");

TrainResult job_train_stage2(const RunConfig& config, const std::string& data_dir,
                             const std::string& stage1_checkpoint,
                             const std::string& out_checkpoint);

struct InferStats {
  int frames = 0;
  int videos = 0;
  size_t peak_state_bytes = 0;
  bool state_bytes_constant = true;  // per-frame state size never changed
};

// Online inference over the dataset with the checkpointed model; writes the
// prediction JSONL and optionally a state-size audit JSON.
InferStats job_infer(const std::string& data_dir, const std::string& stage2_checkpoint,
                     Protocol protocol, const std::string& out_predictions,
                     const std::string& audit_path = "");

// Ranks + scores predictions against the dataset; writes the report (JSON and
// optional CSV). Report invariants are asserted by the writer.
EvalRun job_eval(const std::string& data_dir, const std::string& predictions_path,
                 const EvalConfig& eval_config, const std::string& out_json,
                 const std::string& out_csv = "");

// One toggle axis of the ablation grid; values are config fragments.
struct AblationSpec {
  std::vector<bool> conditioning;       // L_T_VSGG vs L_VSGG
  std::vector<bool> motion;             // motion injection on/off
  std::vector<int> steps;               // diffusion step count K
  std::vector<int> depth;               // U-Net depth
  std::vector<std::string> readout;     // "row" | "element"
  std::vector<std::string> features;    // "all", "union_only", "no_box"
  std::vector<uint64_t> seeds;          // replicate seeds
  Protocol protocol = Protocol::kSgCls;
};

AblationSpec ablation_spec_from_json(const std::string& json_text);

struct AblationRow {
  std::string label;
  bool conditioning = true;
  bool motion = false;
  int steps = 0;
  int depth = 0;
  std::string readout;
  std::string features;
  uint64_t seed = 0;
  EvalRun result;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string csv;   // paper-style table layout, means over seeds
  std::string json;  // full per-seed detail
};

// Trains/evaluates every toggle combination with shared seeds. Stage-1
// checkpoints are cached per (stage-1-relevant config, seed) so rows that
// share a denoiser do not retrain it.
AblationTable run_ablation(const RunConfig& base_config, const AblationSpec& spec,
                           const std::string& work_dir);

}  // namespace vsgg
