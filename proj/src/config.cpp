#include "vsgg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include "json.hpp"
#include "vsgg/dataset_io.hpp"
#include "vsgg/jsonw.hpp"

namespace vsgg {
namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::resolve() {
  scene.validate();
  if (n_max < scene.max_objects)
    throw std::invalid_argument("config: n_max must be >= scene.max_objects");
  unet.channels = scene.embedding_dim();
  unet.validate();
  heads.dim = scene.embedding_dim();
  heads.predicate_classes = scene.predicate_classes;
  heads.object_classes = scene.object_classes;
  make_schedule(diffusion);  // validates endpoints and step counts
  eval.validate();
  if (stage1.lr <= 0.0 || stage2.lr <= 0.0)
    throw std::invalid_argument("config: learning rates must be positive");
  if (stage1.epochs < 0 || stage2.epochs < 0)
    throw std::invalid_argument("config: epochs must be >= 0");
  if (stage1.batch_pairs < 1 || stage2.batch_frames < 1)
    throw std::invalid_argument("config: batch sizes must be positive");
  if (stage1.clip_frames < 1 || stage1.clip_frames > scene.frames_per_video)
    throw std::invalid_argument("config: clip_frames must fit the video length");
  if (temporal.history < 2)
    throw std::invalid_argument("config: motion history must be >= 2");
  if (!temporal.motion_channel_scale.empty() &&
      static_cast<int>(temporal.motion_channel_scale.size()) != scene.embedding_dim())
    throw std::invalid_argument("config: motion_channel_scale must have D entries");
  if (stage2.decay_factor <= 0.0 || stage2.decay_factor > 1.0)
    throw std::invalid_argument("config: decay_factor must lie in (0, 1]");
}

RunConfig run_config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunConfig c;
  maybe(j, "seed", c.seed);
  maybe(j, "n_max", c.n_max);
  maybe(j, "resize_longer_edge", c.resize_longer_edge);
  if (j.contains("scene")) c.scene = scene_config_from_json(j.at("scene").dump());
  if (j.contains("diffusion")) {
    const json& d = j.at("diffusion");
    maybe(d, "steps", c.diffusion.steps);
    maybe(d, "beta_start", c.diffusion.beta_start);
    maybe(d, "beta_end", c.diffusion.beta_end);
    maybe(d, "reverse_steps", c.diffusion.reverse_steps);
  }
  if (j.contains("unet")) {
    const json& u = j.at("unet");
    maybe(u, "depth", c.unet.depth);
    maybe(u, "widths", c.unet.widths);
    maybe(u, "emb_dim", c.unet.emb_dim);
    maybe(u, "emb_hidden", c.unet.emb_hidden);
    maybe(u, "norm_groups", c.unet.norm_groups);
    maybe(u, "init_seed", c.unet.init_seed);
    if (u.contains("condition"))
      c.unet.condition = condition_mode_from_name(u.at("condition").get<std::string>());
  }
  if (j.contains("heads")) {
    const json& h = j.at("heads");
    maybe(h, "hidden", c.heads.hidden);
    maybe(h, "init_seed", c.heads.init_seed);
    if (h.contains("readout"))
      c.heads.mode = readout_mode_from_name(h.at("readout").get<std::string>());
  }
  if (j.contains("temporal")) {
    const json& t = j.at("temporal");
    maybe(t, "conditioning", c.temporal.conditioning);
    maybe(t, "motion_injection", c.temporal.motion_injection);
    maybe(t, "history", c.temporal.history);
    maybe(t, "similarity_threshold", c.temporal.similarity_threshold);
    maybe(t, "motion_channel_scale", c.temporal.motion_channel_scale);
  }
  if (j.contains("stage1")) {
    const json& s = j.at("stage1");
    maybe(s, "lr", c.stage1.lr);
    maybe(s, "batch_pairs", c.stage1.batch_pairs);
    maybe(s, "epochs", c.stage1.epochs);
    maybe(s, "clip_frames", c.stage1.clip_frames);
  }
  if (j.contains("stage2")) {
    const json& s = j.at("stage2");
    maybe(s, "lr", c.stage2.lr);
    maybe(s, "batch_frames", c.stage2.batch_frames);
    maybe(s, "epochs", c.stage2.epochs);
    maybe(s, "decay_factor", c.stage2.decay_factor);
    maybe(s, "weight_decay", c.stage2.weight_decay);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    maybe(e, "ks", c.eval.ks);
    maybe(e, "iou_threshold", c.eval.iou_threshold);
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    maybe(f, "subject_feature", c.feature_mask.subject_feature);
    maybe(f, "union_feature", c.feature_mask.union_feature);
    maybe(f, "subject_box", c.feature_mask.subject_box);
  }
  c.resolve();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  JsonWriter w;
  w.begin_object();
  w.key("seed").value(static_cast<uint64_t>(c.seed)).comma();
  w.key("n_max").value(c.n_max).comma();
  w.key("resize_longer_edge").value(c.resize_longer_edge).comma();
  w.key("embedding_dim").value(c.scene.embedding_dim()).comma();
  w.key("scene").raw(scene_config_to_json(c.scene)).comma();
  w.key("diffusion").begin_object();
  w.key("steps").value(c.diffusion.steps).comma();
  w.key("beta_start").value(c.diffusion.beta_start).comma();
  w.key("beta_end").value(c.diffusion.beta_end).comma();
  w.key("reverse_steps").value(c.diffusion.resolved_reverse_steps());
  w.end_object().comma();
  w.key("unet").begin_object();
  w.key("depth").value(c.unet.depth).comma();
  w.key("widths").array(c.unet.widths).comma();
  w.key("emb_dim").value(c.unet.emb_dim).comma();
  w.key("emb_hidden").value(c.unet.emb_hidden).comma();
  w.key("norm_groups").value(c.unet.norm_groups).comma();
  w.key("condition").value(condition_mode_name(c.unet.condition)).comma();
  w.key("init_seed").value(static_cast<uint64_t>(c.unet.init_seed));
  w.end_object().comma();
  w.key("heads").begin_object();
  w.key("hidden").value(c.heads.hidden).comma();
  w.key("readout").value(readout_mode_name(c.heads.mode)).comma();
  w.key("init_seed").value(static_cast<uint64_t>(c.heads.init_seed));
  w.end_object().comma();
  w.key("temporal").begin_object();
  w.key("conditioning").value(c.temporal.conditioning).comma();
  w.key("motion_injection").value(c.temporal.motion_injection).comma();
  w.key("history").value(c.temporal.history).comma();
  w.key("similarity_threshold").value(c.temporal.similarity_threshold).comma();
  w.key("motion_channel_scale").array(c.temporal.motion_channel_scale);
  w.end_object().comma();
  w.key("stage1").begin_object();
  w.key("lr").value(c.stage1.lr).comma();
  w.key("batch_pairs").value(c.stage1.batch_pairs).comma();
  w.key("epochs").value(c.stage1.epochs).comma();
  w.key("clip_frames").value(c.stage1.clip_frames);
  w.end_object().comma();
  w.key("stage2").begin_object();
  w.key("lr").value(c.stage2.lr).comma();
  w.key("batch_frames").value(c.stage2.batch_frames).comma();
  w.key("epochs").value(c.stage2.epochs).comma();
  w.key("decay_factor").value(c.stage2.decay_factor).comma();
  w.key("weight_decay").value(c.stage2.weight_decay);
  w.end_object().comma();
  w.key("eval").begin_object();
  w.key("ks").array(c.eval.ks).comma();
  w.key("iou_threshold").value(c.eval.iou_threshold);
  w.end_object().comma();
  w.key("features").begin_object();
  w.key("subject_feature").value(c.feature_mask.subject_feature).comma();
  w.key("union_feature").value(c.feature_mask.union_feature).comma();
  w.key("subject_box").value(c.feature_mask.subject_box);
  w.end_object();
  w.end_object();
  return w.take();
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_file(path));
}

std::string artifact_root() {
  const char* env = std::getenv("VSGG_ARTIFACTS");
  if (env != nullptr && env[0] != '\0') return env;
  return ".";
}

std::string under_artifact_root(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(artifact_root()) / p).string();
}

}  // namespace vsgg
