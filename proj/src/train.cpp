#include "vsgg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vsgg/graph.hpp"
#include "vsgg/losses.hpp"

namespace vsgg {
namespace {

void scale_grads(const nn::ParamRefs<float>& params, double factor) {
  for (nn::Param<float>* p : params)
    for (float& g : p->g) g = static_cast<float>(g * factor);
}

// Sorted sample of `count` distinct frame indices out of [0, frames).
std::vector<int> sample_clip_frames(int frames, int count, Rng& rng) {
  std::vector<int> idx(frames);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void pack_optimizer(Checkpoint& ckpt, nn::AdamOptimizer<float>& opt,
                    const nn::ParamRefs<float>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    ckpt.add_blob("opt.m." + params[i]->name, params[i]->shape, opt.moment_m(i));
    ckpt.add_blob("opt.v." + params[i]->name, params[i]->shape, opt.moment_v(i));
  }
  ckpt.scalars["opt.step"] = std::to_string(opt.step_count());
}

void unpack_optimizer(const Checkpoint& ckpt, nn::AdamOptimizer<float>& opt,
                      const nn::ParamRefs<float>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    const CheckpointBlob* m = ckpt.find("opt.m." + params[i]->name);
    const CheckpointBlob* v = ckpt.find("opt.v." + params[i]->name);
    if (m == nullptr || v == nullptr)
      throw std::runtime_error("checkpoint: missing optimizer state for " +
                               params[i]->name);
    opt.moment_m(i) = m->data;
    opt.moment_v(i) = v->data;
  }
  opt.set_step_count(std::stoll(ckpt.scalars.at("opt.step")));
}

}  // namespace

Checkpoint make_stage1_checkpoint(DenoiserUNet<float>& net,
                                  nn::AdamOptimizer<float>& opt, const RunConfig& config,
                                  int next_epoch) {
  Checkpoint ckpt;
  ckpt.kind = "stage1";
  ckpt.config_json = run_config_to_json(config);
  ckpt.scalars["next_epoch"] = std::to_string(next_epoch);
  ckpt.pack_params(net.params());
  pack_optimizer(ckpt, opt, net.params());
  return ckpt;
}

void restore_stage1_checkpoint(const Checkpoint& ckpt, DenoiserUNet<float>& net,
                               nn::AdamOptimizer<float>* opt, int* next_epoch) {
  ckpt.unpack_params(net.params());
  if (opt != nullptr) unpack_optimizer(ckpt, *opt, net.params());
  if (next_epoch != nullptr) *next_epoch = std::stoi(ckpt.scalars.at("next_epoch"));
}

Checkpoint make_stage2_checkpoint(DenoiserUNet<float>& net, ReadoutHeads<float>& heads,
                                  const RunConfig& config) {
  Checkpoint ckpt;
  ckpt.kind = "stage2";
  ckpt.config_json = run_config_to_json(config);
  ckpt.pack_params(net.params());
  ckpt.pack_params(heads.params());
  return ckpt;
}

void restore_stage2_checkpoint(const Checkpoint& ckpt, DenoiserUNet<float>& net,
                               ReadoutHeads<float>& heads) {
  ckpt.unpack_params(net.params());
  ckpt.unpack_params(heads.params());
}

RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config_json.empty())
    throw std::runtime_error("checkpoint carries no config echo");
  return run_config_from_json(ckpt.config_json);
}

void write_loss_log(const std::string& csv_path, const std::vector<StepLog>& steps) {
  std::string out = "step,epoch,loss,lr\n";
  char buf[96];
  for (const StepLog& s : steps) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g,%.9g\n",
                  static_cast<long long>(s.step), s.epoch, s.loss, s.lr);
    out += buf;
  }
  write_file(csv_path, out);
}

TrainResult train_stage1(const Dataset& dataset, const RunConfig& config,
                         const std::string& out_checkpoint,
                         const std::string& resume_from) {
  const SceneConfig& scene = dataset.config;
  const FeatureSynth synth = dataset.make_synth();
  const NoiseSchedule sched = make_schedule(config.diffusion);

  UNetConfig unet_cfg = config.unet;
  unet_cfg.channels = scene.embedding_dim();
  DenoiserUNet<float> net(unet_cfg);
  nn::AdamOptimizer<float> opt;
  opt.attach(net.params());

  int start_epoch = 0;
  if (!resume_from.empty())
    restore_stage1_checkpoint(Checkpoint::load(resume_from), net, &opt, &start_epoch);

  TrainResult result;
  const int clip_len = std::min(config.stage1.clip_frames, scene.frames_per_video);
  const int pairs_per_clip = clip_len * config.n_max * config.n_max;
  result.clips_per_step = std::max(1, config.stage1.batch_pairs / pairs_per_clip);

  const int num_videos = static_cast<int>(dataset.videos.size());
  int64_t step = opt.step_count();

  for (int epoch = start_epoch; epoch < config.stage1.epochs; ++epoch) {
    std::vector<int> order(num_videos);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::from_key(config.seed, {kTagTraining, kTagShuffle,
                                                  static_cast<uint64_t>(epoch)});
    shuffle_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    int epoch_terms = 0;

    for (int pos = 0; pos < num_videos; pos += result.clips_per_step) {
      net.zero_grad();
      double batch_loss = 0.0;
      int batch_terms = 0;

      const int batch_end = std::min(pos + result.clips_per_step, num_videos);
      for (int b = pos; b < batch_end; ++b) {
        const VideoSample& video = dataset.videos[order[b]];
        Rng clip_rng = Rng::from_key(
            config.seed, {kTagTraining, static_cast<uint64_t>(epoch),
                          static_cast<uint64_t>(video.video_id), kTagTrajectory});
        const std::vector<int> frames = sample_clip_frames(
            static_cast<int>(video.truths.size()), clip_len, clip_rng);

        // Padding is resampled per forward pass (training augmentation).
        Rng pad_rng = Rng::from_key(config.seed,
                                    {kTagTraining, kTagPadding,
                                     static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(video.video_id)});
        std::vector<Tensor<float>> clip;
        for (int f : frames)
          clip.push_back(assemble_gt_adjacency<float>(video.truths[f], synth,
                                                      config.n_max, pad_rng,
                                                      scene.d_box, config.feature_mask)
                             .data);

        for (int t = 0; t < static_cast<int>(clip.size()); ++t) {
          Rng loss_rng = Rng::from_key(
              config.seed, {kTagLoss, static_cast<uint64_t>(epoch),
                            static_cast<uint64_t>(video.video_id),
                            static_cast<uint64_t>(t)});
          const Tensor<float>* cond =
              (config.temporal.conditioning && t > 0) ? &clip[t - 1] : nullptr;
          double loss;
          if (config.temporal.conditioning)
            loss = loss_t_vsgg<float>(clip[t], cond, net, sched, loss_rng, true);
          else
            loss = loss_vsgg<float>(clip[t], net, sched, loss_rng, true);
          batch_loss += loss;
          ++batch_terms;
        }
      }

      const double mean_loss = batch_loss / batch_terms;
      if (!std::isfinite(mean_loss)) {
        result.diverged = true;
        result.checkpoint_path = out_checkpoint;
        return result;  // last good per-epoch checkpoint stays on disk
      }
      scale_grads(net.params(), 1.0 / batch_terms);
      opt.step(net.params(), config.stage1.lr);
      ++step;

      result.steps.push_back(StepLog{step, epoch, mean_loss, config.stage1.lr});
      epoch_loss += batch_loss;
      epoch_terms += batch_terms;
    }

    result.epoch_losses.push_back(epoch_terms > 0 ? epoch_loss / epoch_terms : 0.0);
    make_stage1_checkpoint(net, opt, config, epoch + 1).save(out_checkpoint);
  }

  if (config.stage1.epochs == 0 || start_epoch >= config.stage1.epochs)
    make_stage1_checkpoint(net, opt, config, start_epoch).save(out_checkpoint);
  result.checkpoint_path = out_checkpoint;
  return result;
}

TrainResult train_stage2(const Dataset& dataset, const std::string& stage1_checkpoint,
                         const RunConfig& config, const std::string& out_checkpoint) {
  const Checkpoint s1 = Checkpoint::load(stage1_checkpoint);
  if (s1.kind != "stage1")
    throw std::runtime_error("train_stage2: expected a stage1 checkpoint");

  UNetConfig unet_cfg = config.unet;
  unet_cfg.channels = dataset.config.embedding_dim();
  DenoiserUNet<float> net(unet_cfg);
  s1.unpack_params(net.params());
  const uint64_t frozen_checksum = param_checksum(net.params());

  // The denoiser is frozen, so each frame's denoised tensor is a constant;
  // run the online pipeline once and cache the outputs.
  StreamPipeline pipeline(config, net, nullptr);
  struct CachedFrame {
    AdjacencyTensor<float> a0;
    const GroundTruthGraph* gt;
  };
  std::vector<CachedFrame> cache;
  for (const VideoSample& video : dataset.videos) {
    OnlineState state = OnlineState::init(config);
    for (size_t f = 0; f < video.observations.size(); ++f)
      cache.push_back(CachedFrame{pipeline.denoise_frame(state, video.observations[f]),
                                  &video.truths[f]});
  }

  HeadsConfig heads_cfg = config.heads;
  heads_cfg.dim = dataset.config.embedding_dim();
  heads_cfg.predicate_classes = dataset.config.predicate_classes;
  heads_cfg.object_classes = dataset.config.object_classes;
  ReadoutHeads<float> heads(heads_cfg);
  nn::AdamOptimizer<float> opt;
  opt.weight_decay = config.stage2.weight_decay;
  opt.attach(heads.params());

  TrainResult result;
  const int frames = static_cast<int>(cache.size());
  const int steps_per_epoch =
      (frames + config.stage2.batch_frames - 1) / config.stage2.batch_frames;
  const int64_t total_steps =
      static_cast<int64_t>(steps_per_epoch) * config.stage2.epochs;
  const int64_t decay_step = total_steps / 2;  // single mid-run decay
  int64_t step = 0;

  for (int epoch = 0; epoch < config.stage2.epochs; ++epoch) {
    std::vector<int> order(frames);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::from_key(config.seed, {kTagTraining, kTagShuffle, kTagStage2,
                                                  static_cast<uint64_t>(epoch)});
    shuffle_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (int pos = 0; pos < frames; pos += config.stage2.batch_frames) {
      heads.zero_grad();
      double batch_loss = 0.0;
      int batch_count = 0;
      const int batch_end = std::min(pos + config.stage2.batch_frames, frames);
      for (int b = pos; b < batch_end; ++b) {
        const CachedFrame& frame = cache[order[b]];
        batch_loss += stage2_loss(heads, frame.a0, *frame.gt, true).total;
        ++batch_count;
      }
      const double mean_loss = batch_loss / batch_count;
      if (!std::isfinite(mean_loss)) {
        result.diverged = true;
        result.checkpoint_path = out_checkpoint;
        return result;
      }
      scale_grads(heads.params(), 1.0 / batch_count);
      const double lr = step >= decay_step
                            ? config.stage2.lr * config.stage2.decay_factor
                            : config.stage2.lr;
      opt.step(heads.params(), lr);
      ++step;
      result.steps.push_back(StepLog{step, epoch, mean_loss, lr});
      epoch_loss += mean_loss;
      ++epoch_batches;
    }
    result.epoch_losses.push_back(epoch_batches > 0 ? epoch_loss / epoch_batches : 0.0);
  }

  if (param_checksum(net.params()) != frozen_checksum)
    throw std::logic_error("train_stage2: frozen denoiser was modified");

  make_stage2_checkpoint(net, heads, config).save(out_checkpoint);
  result.checkpoint_path = out_checkpoint;
  return result;
}

}  // namespace vsgg
