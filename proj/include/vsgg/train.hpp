#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vsgg/checkpoint.hpp"
#include "vsgg/config.hpp"
#include "vsgg/dataset_io.hpp"
#include "vsgg/pipeline.hpp"
#include "vsgg/readout.hpp"
#include "vsgg/unet.hpp"

namespace vsgg {

struct StepLog {
  int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  std::vector<StepLog> steps;
  std::string checkpoint_path;
  bool diverged = false;
  int clips_per_step = 0;  // stage-1 batch derivation echo
};

// Stage 1: pre-trains the denoiser on ground-truth tensors with temporal
// conditioning (or unconditioned when the config disables it). Saves a
// resumable checkpoint after every epoch; a NaN loss aborts and leaves the
// last good checkpoint in place.
TrainResult train_stage1(const Dataset& dataset, const RunConfig& config,
                         const std::string& out_checkpoint,
                         const std::string& resume_from = "");

// Stage 2: freezes the denoiser, caches the denoised tensor of every frame
// once (the denoiser output is constant for fixed inputs), then trains the
// readout heads. Asserts the denoiser checksum is untouched.
TrainResult train_stage2(const Dataset& dataset, const std::string& stage1_checkpoint,
                         const RunConfig& config, const std::string& out_checkpoint);

// Checkpoint plumbing shared by the trainers and the CLI.
Checkpoint make_stage1_checkpoint(DenoiserUNet<float>& net,
                                  nn::AdamOptimizer<float>& opt, const RunConfig& config,
                                  int next_epoch);
void restore_stage1_checkpoint(const Checkpoint& ckpt, DenoiserUNet<float>& net,
                               nn::AdamOptimizer<float>* opt, int* next_epoch);

Checkpoint make_stage2_checkpoint(DenoiserUNet<float>& net, ReadoutHeads<float>& heads,
                                  const RunConfig& config);
void restore_stage2_checkpoint(const Checkpoint& ckpt, DenoiserUNet<float>& net,
                               ReadoutHeads<float>& heads);

RunConfig config_from_checkpoint(const Checkpoint& ckpt);

void write_loss_log(const std::string& csv_path, const std::vector<StepLog>& steps);

}  // namespace vsgg
