#include "vsgg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsgg {
namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("scene config: " + msg);
}

// Reflects v into [lo, hi].
double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(v - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return t <= span ? lo + t : hi - (t - span);
}

struct ObjectTrack {
  int label = 0;
  double w = 0.1, h = 0.1;
  double cx0 = 0.5, cy0 = 0.5;
  double vx = 0.0, vy = 0.0;
  int entry_frame = 0;
  std::vector<double> jitter_x, jitter_y;  // per-frame trajectory jitter

  Box box_at(int frame, double dt) const {
    const double t = frame * dt;
    Box b;
    b.w = w;
    b.h = h;
    const double cx = reflect(cx0 + vx * t + jitter_x[frame], w / 2.0, 1.0 - w / 2.0);
    const double cy = reflect(cy0 + vy * t + jitter_y[frame], h / 2.0, 1.0 - h / 2.0);
    b.x = cx - w / 2.0;
    b.y = cy - h / 2.0;
    return b;
  }
};

std::vector<ObjectTrack> sample_tracks(const SceneConfig& cfg, Rng& rng) {
  const int n = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  std::vector<ObjectTrack> tracks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ObjectTrack& t = tracks[i];
    t.label = rng.uniform_int(0, cfg.object_classes - 1);
    t.w = rng.uniform(0.08, 0.25);
    t.h = rng.uniform(0.08, 0.25);
    t.cx0 = rng.uniform(t.w / 2.0, 1.0 - t.w / 2.0);
    t.cy0 = rng.uniform(t.h / 2.0, 1.0 - t.h / 2.0);
    if (rng.uniform() >= cfg.static_fraction) {
      const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
      const double heading = rng.uniform(0.0, 2.0 * kPi);
      t.vx = speed * std::cos(heading);
      t.vy = speed * std::sin(heading);
    }
    // First two objects are always present from frame 0.
    if (i >= 2 && rng.uniform() < cfg.late_entry_prob)
      t.entry_frame = rng.uniform_int(1, cfg.frames_per_video - 1);
    t.jitter_x.resize(cfg.frames_per_video);
    t.jitter_y.resize(cfg.frames_per_video);
    for (int f = 0; f < cfg.frames_per_video; ++f) {
      t.jitter_x[f] = rng.normal(0.0, cfg.trajectory_jitter);
      t.jitter_y[f] = rng.normal(0.0, cfg.trajectory_jitter);
    }
  }
  // Object identity is the index within the video; keep entries ordered so a
  // frame always holds a prefix of the track list.
  std::stable_sort(tracks.begin(), tracks.end(),
                   [](const ObjectTrack& a, const ObjectTrack& b) {
                     return a.entry_frame < b.entry_frame;
                   });
  return tracks;
}

Box jitter_box(const Box& b, double sigma, Rng& rng) {
  Box out = b;
  out.x += rng.normal(0.0, sigma);
  out.y += rng.normal(0.0, sigma);
  out.w = std::max(0.01, b.w + rng.normal(0.0, sigma));
  out.h = std::max(0.01, b.h + rng.normal(0.0, sigma));
  out.x = std::clamp(out.x, 0.0, 1.0 - out.w);
  out.y = std::clamp(out.y, 0.0, 1.0 - out.h);
  return out;
}

PairGeometry pair_geometry(const GroundTruthGraph& frame, const GroundTruthGraph* prev,
                           int i, int j, double dt) {
  PairGeometry g;
  g.subj = frame.boxes[i];
  g.obj = frame.boxes[j];
  g.dt = dt;
  if (prev != nullptr && i < static_cast<int>(prev->boxes.size()) &&
      j < static_cast<int>(prev->boxes.size())) {
    g.has_prev = true;
    g.subj_prev = prev->boxes[i];
    g.obj_prev = prev->boxes[j];
  }
  return g;
}

// A frame is acceptable when it has at least one triplet whose class ignores
// the skew knob, so retry decisions do not depend on the skew setting. A
// frame where no active head rule can fire at all (a motion-only taxonomy on
// the first frame) passes vacuously; evaluation skips empty frames anyway.
bool frame_has_head_triplet(const GroundTruthGraph& frame, const GroundTruthGraph* prev,
                            const SceneConfig& cfg) {
  const int head = std::min(cfg.predicate_classes, kUnskewedClassCount);
  if (prev == nullptr) {
    bool any_static_rule = false;
    for (int id = 0; id < head; ++id)
      if (!predicate_taxonomy()[id].needs_motion) any_static_rule = true;
    if (!any_static_rule) return true;
  }
  const int n = static_cast<int>(frame.boxes.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const PairGeometry g = pair_geometry(frame, prev, i, j, cfg.frame_interval);
      for (int id = 0; id < head; ++id)
        if (predicate_holds(id, g, cfg.rules)) return true;
    }
  return false;
}

}  // namespace

void SceneConfig::validate() const {
  require(num_videos >= 1, "num_videos must be positive");
  require(frames_per_video >= 2, "frames_per_video must be at least 2");
  require(image_width > 0 && image_height > 0, "image size must be positive");
  require(min_objects >= 2, "min_objects must be at least 2");
  require(max_objects >= min_objects, "max_objects must be >= min_objects");
  require(object_classes >= 2, "object_classes must be at least 2");
  require(predicate_classes >= 1 &&
              predicate_classes <= static_cast<int>(predicate_taxonomy().size()),
          "predicate_classes must fit the taxonomy");
  require(frame_interval > 0.0, "frame_interval must be positive");
  require(d_obj >= 4 && d_box >= 4, "feature dims too small");
  require(d_box % 2 == 0, "d_box must be even for the sinusoidal expansion");
  require(object_classes <= d_obj,
          "object_classes must not exceed d_obj (class embeddings are orthonormal)");
  require(feature_noise >= 0.0 && positional_amp >= 0.0, "amplitudes must be >= 0");
  require(box_jitter_sigma >= 0.0 && score_noise >= 0.0 && score_noise <= 1.0,
          "detector noise out of range");
  require(static_fraction >= 0.0 && static_fraction <= 1.0, "static_fraction in [0,1]");
  require(min_speed >= 0.0 && max_speed >= min_speed, "speed range invalid");
  require(late_entry_prob >= 0.0 && late_entry_prob <= 1.0, "late_entry_prob in [0,1]");
  require(rules.skew >= 0.0 && rules.skew <= 1.0, "skew must be in [0,1]");
}

FeatureSynth::FeatureSynth(uint64_t seed, int d_obj, int num_classes, double noise_amp,
                           double positional_amp)
    : seed_(seed),
      d_obj_(d_obj),
      num_classes_(num_classes),
      noise_amp_(noise_amp),
      positional_amp_(positional_amp) {
  if (num_classes > d_obj)
    throw std::invalid_argument("FeatureSynth: num_classes must be <= d_obj");

  // Class table: Gram-Schmidt over a fixed gaussian draw keyed only by the
  // dimensions, giving exactly orthonormal class directions.
  Rng table_rng = Rng::from_key(0, {kTagClassTable, static_cast<uint64_t>(d_obj),
                                    static_cast<uint64_t>(num_classes)});
  class_table_.assign(num_classes, std::vector<double>(d_obj, 0.0));
  for (int c = 0; c < num_classes; ++c) {
    auto& row = class_table_[c];
    while (true) {
      for (double& v : row) v = table_rng.normal();
      for (int p = 0; p < c; ++p) {
        double dot = 0.0;
        for (int k = 0; k < d_obj; ++k) dot += row[k] * class_table_[p][k];
        for (int k = 0; k < d_obj; ++k) row[k] -= dot * class_table_[p][k];
      }
      double norm = 0.0;
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (double& v : row) v /= norm;
        break;
      }
    }
  }

  // Smooth positional encoding: amp * sin(W * (cx, cy, w, h) + phase).
  Rng pos_rng = Rng::from_key(0, {kTagPositional, static_cast<uint64_t>(d_obj)});
  pos_freq_.resize(static_cast<size_t>(d_obj) * 4);
  pos_phase_.resize(d_obj);
  for (double& v : pos_freq_) v = pos_rng.normal(0.0, 3.0);
  for (double& v : pos_phase_) v = pos_rng.uniform(0.0, 2.0 * kPi);
}

const std::vector<double>& FeatureSynth::class_embedding(int label) const {
  if (label < 0 || label >= num_classes_)
    throw std::invalid_argument("class_embedding: label out of range");
  return class_table_[label];
}

std::vector<double> FeatureSynth::positional_encoding(const Box& box) const {
  std::vector<double> out(d_obj_);
  const double in[4] = {box.cx(), box.cy(), box.w, box.h};
  for (int k = 0; k < d_obj_; ++k) {
    double z = pos_phase_[k];
    for (int m = 0; m < 4; ++m) z += pos_freq_[static_cast<size_t>(k) * 4 + m] * in[m];
    out[k] = positional_amp_ * std::sin(z);
  }
  return out;
}

std::vector<double> FeatureSynth::synth_features(const Box& box, int label,
                                                 Rng& stream) const {
  if (!box.valid_normalized())
    throw std::invalid_argument("synth_features: box not a valid normalized box");
  std::vector<double> out = positional_encoding(box);
  const auto& cls = class_embedding(label);
  for (int k = 0; k < d_obj_; ++k)
    out[k] += cls[k] + stream.uniform(-noise_amp_, noise_amp_);
  return out;
}

std::vector<double> FeatureSynth::object_feature(int video, int frame, int slot,
                                                 const Box& box, int label) const {
  Rng stream = Rng::from_key(
      seed_, {kTagObjectNoise, static_cast<uint64_t>(video), static_cast<uint64_t>(frame),
              static_cast<uint64_t>(slot)});
  return synth_features(box, label, stream);
}

std::vector<double> FeatureSynth::union_feature(int video, int frame, int subject_slot,
                                                int object_slot, const Box& subject_box,
                                                const Box& object_box, int subject_label,
                                                int object_label) const {
  const Box ub = union_box(subject_box, object_box);
  Rng stream = Rng::from_key(
      seed_, {kTagUnionNoise, static_cast<uint64_t>(video), static_cast<uint64_t>(frame),
              static_cast<uint64_t>(subject_slot), static_cast<uint64_t>(object_slot)});
  // Subject-conditioned: the subject class dominates, so (i, j) != (j, i).
  std::vector<double> out = positional_encoding(ub);
  const auto& cs = class_embedding(subject_label);
  const auto& co = class_embedding(object_label);
  for (int k = 0; k < d_obj_; ++k)
    out[k] += 0.5 * cs[k] + 0.25 * co[k] + stream.uniform(-noise_amp_, noise_amp_);
  return out;
}

std::vector<std::array<int, 3>> derive_triplets(const GroundTruthGraph& frame,
                                                const GroundTruthGraph* prev,
                                                const SceneConfig& config) {
  std::vector<std::array<int, 3>> out;
  const int n = static_cast<int>(frame.boxes.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const PairGeometry g = pair_geometry(frame, prev, i, j, config.frame_interval);
      for (int id : active_predicates(g, config.rules, config.predicate_classes))
        out.push_back({i, id, j});
    }
  return out;
}

std::vector<VideoSample> generate_dataset(const SceneConfig& config) {
  config.validate();
  FeatureSynth synth(config.rng_seed, config.d_obj, config.object_classes,
                     config.feature_noise, config.positional_amp);

  std::vector<VideoSample> videos;
  videos.reserve(config.num_videos);

  for (int v = 0; v < config.num_videos; ++v) {
    std::vector<ObjectTrack> tracks;
    std::vector<GroundTruthGraph> truths;

    // Resample a video until every frame carries a head-class triplet; the
    // attempt index keys the stream so retries stay deterministic.
    for (uint64_t attempt = 0;; ++attempt) {
      Rng traj_rng = Rng::from_key(config.rng_seed, {kTagVideo, static_cast<uint64_t>(v),
                                                     kTagTrajectory, kTagRetry + attempt});
      tracks = sample_tracks(config, traj_rng);
      truths.assign(config.frames_per_video, GroundTruthGraph{});
      bool ok = true;
      for (int f = 0; f < config.frames_per_video && ok; ++f) {
        GroundTruthGraph& gt = truths[f];
        gt.video_id = v;
        gt.frame_index = f;
        for (const ObjectTrack& t : tracks) {
          if (t.entry_frame > f) break;  // entries are ordered by construction
          gt.boxes.push_back(t.box_at(f, config.frame_interval));
          gt.labels.push_back(t.label);
        }
        const GroundTruthGraph* prev = f > 0 ? &truths[f - 1] : nullptr;
        gt.triplets = derive_triplets(gt, prev, config);
        ok = frame_has_head_triplet(gt, prev, config);
      }
      if (ok) break;
      if (attempt > 200)
        throw std::runtime_error("generate_dataset: could not satisfy frame coverage");
    }

    VideoSample sample;
    sample.video_id = v;
    sample.truths = std::move(truths);

    Rng det_rng = Rng::from_key(config.rng_seed, {kTagVideo, static_cast<uint64_t>(v),
                                                  kTagDetector});
    for (int f = 0; f < config.frames_per_video; ++f) {
      const GroundTruthGraph& gt = sample.truths[f];
      FrameObservation obs;
      obs.video_id = v;
      obs.frame_index = f;
      const int n = static_cast<int>(gt.boxes.size());
      for (int i = 0; i < n; ++i) {
        obs.boxes.push_back(jitter_box(gt.boxes[i], config.box_jitter_sigma, det_rng));
        obs.class_labels.push_back(gt.labels[i]);
        std::vector<double> scores(config.object_classes,
                                   config.score_noise / config.object_classes);
        scores[gt.labels[i]] += 1.0 - config.score_noise;
        obs.class_scores.push_back(std::move(scores));
      }
      for (int i = 0; i < n; ++i)
        obs.object_features.push_back(
            synth.object_feature(v, f, i, obs.boxes[i], gt.labels[i]));
      obs.union_features.resize(static_cast<size_t>(n) * n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          obs.union_features[static_cast<size_t>(i) * n + j] =
              synth.union_feature(v, f, i, j, obs.boxes[i], obs.boxes[j], gt.labels[i],
                                  gt.labels[j]);
      sample.observations.push_back(std::move(obs));
    }
    videos.push_back(std::move(sample));
  }
  return videos;
}

}  // namespace vsgg
