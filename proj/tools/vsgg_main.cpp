// vsgg: synthetic video scene graph pipeline driver.
//
// Subcommands: synth, train-stage1, train-stage2, infer, eval, ablate.
// Relative output paths resolve under $VSGG_ARTIFACTS (default ".").
// Exit code 0 only on full success.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "vsgg/config.hpp"
#include "vsgg/dataset_io.hpp"
#include "vsgg/jobs.hpp"

namespace {

vsgg::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) {
    vsgg::RunConfig cfg;
    cfg.resolve();
    return cfg;
  }
  return vsgg::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-driven online video scene graph pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, resume_path, stage1_path, ckpt_path;
  std::string protocol_name = "sgdet", audit_path, csv_path, spec_path, pred_path;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config_path, "run config JSON");
  synth->add_option("--out", out_path, "output dataset directory")->required();

  auto* t1 = app.add_subcommand("train-stage1", "pre-train the denoiser");
  t1->add_option("--config", config_path, "run config JSON");
  t1->add_option("--data", data_dir, "dataset directory")->required();
  t1->add_option("--out", out_path, "output checkpoint path")->required();
  t1->add_option("--resume", resume_path, "resume from checkpoint");

  auto* t2 = app.add_subcommand("train-stage2", "train the readout heads");
  t2->add_option("--config", config_path, "run config JSON");
  t2->add_option("--data", data_dir, "dataset directory")->required();
  t2->add_option("--stage1", stage1_path, "stage-1 checkpoint")->required();
  t2->add_option("--out", out_path, "output checkpoint path")->required();

  auto* infer = app.add_subcommand("infer", "online streaming inference");
  infer->add_option("--data", data_dir, "dataset directory")->required();
  infer->add_option("--checkpoint", ckpt_path, "stage-2 checkpoint")->required();
  infer->add_option("--protocol", protocol_name, "predcls | sgcls | sgdet");
  infer->add_option("--out", out_path, "output prediction JSONL")->required();
  infer->add_option("--audit", audit_path, "state-size audit JSON");

  auto* eval = app.add_subcommand("eval", "score predictions");
  eval->add_option("--config", config_path, "run config JSON (for eval ks)");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--pred", pred_path, "prediction JSONL")->required();
  eval->add_option("--out", out_path, "report JSON path")->required();
  eval->add_option("--csv", csv_path, "optional CSV table path");

  auto* ablate = app.add_subcommand("ablate", "run a toggle-grid ablation");
  ablate->add_option("--config", config_path, "base run config JSON");
  ablate->add_option("--spec", spec_path, "ablation spec JSON")->required();
  ablate->add_option("--out", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      vsgg::RunConfig cfg = load_config_or_default(config_path);
      const std::string dir = vsgg::under_artifact_root(out_path);
      vsgg::job_synth(cfg, dir);
      std::printf("dataset written to %s\n", dir.c_str());
    } else if (t1->parsed()) {
      vsgg::RunConfig cfg = load_config_or_default(config_path);
      const auto result = vsgg::job_train_stage1(
          cfg, data_dir, vsgg::under_artifact_root(out_path), resume_path);
      if (result.diverged) {
        std::fprintf(stderr,
                     "stage-1 loss went non-finite; last good checkpoint kept at %s\n",
                     result.checkpoint_path.c_str());
        return 1;
      }
      std::printf("stage-1 done: %zu epochs, %d clips/step, final loss %.6f\n",
                  result.epoch_losses.size(), result.clips_per_step,
                  result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back());
    } else if (t2->parsed()) {
      vsgg::RunConfig cfg = load_config_or_default(config_path);
      const auto result = vsgg::job_train_stage2(cfg, data_dir, stage1_path,
                                                 vsgg::under_artifact_root(out_path));
      if (result.diverged) {
        std::fprintf(stderr, "stage-2 loss went non-finite\n");
        return 1;
      }
      std::printf("stage-2 done: %zu epochs, final loss %.6f\n",
                  result.epoch_losses.size(),
                  result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back());
    } else if (infer->parsed()) {
      const auto stats = vsgg::job_infer(data_dir, ckpt_path,
                                         vsgg::protocol_from_name(protocol_name),
                                         vsgg::under_artifact_root(out_path),
                                         audit_path.empty()
                                             ? ""
                                             : vsgg::under_artifact_root(audit_path));
      std::printf("inferred %d frames over %d videos; peak state %zu bytes\n",
                  stats.frames, stats.videos, stats.peak_state_bytes);
    } else if (eval->parsed()) {
      vsgg::RunConfig cfg = load_config_or_default(config_path);
      const auto run = vsgg::job_eval(
          data_dir, pred_path, cfg.eval, vsgg::under_artifact_root(out_path),
          csv_path.empty() ? "" : vsgg::under_artifact_root(csv_path));
      std::printf("eval done: R@%d with=%.4f without=%.4f\n", cfg.eval.ks.front(),
                  run.with_constraint.recall.front(),
                  run.without_constraint.recall.front());
    } else if (ablate->parsed()) {
      vsgg::RunConfig cfg = load_config_or_default(config_path);
      const auto spec =
          vsgg::ablation_spec_from_json(vsgg::read_file(spec_path));
      const auto table =
          vsgg::run_ablation(cfg, spec, vsgg::under_artifact_root(out_path));
      std::printf("%s", table.csv.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
