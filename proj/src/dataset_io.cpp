#include "vsgg/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vsgg/jsonw.hpp"

namespace vsgg {
namespace {

using nlohmann::json;

void write_box(JsonWriter& w, const Box& b) {
  w.begin_array().value(b.x).comma().value(b.y).comma().value(b.w).comma().value(b.h);
  w.end_array();
}

Box parse_box(const json& j) {
  return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
             j.at(3).get<double>()};
}

void scene_config_to_writer(JsonWriter& w, const SceneConfig& c) {
  w.begin_object();
  w.key("num_videos").value(c.num_videos).comma();
  w.key("frames_per_video").value(c.frames_per_video).comma();
  w.key("image_width").value(c.image_width).comma();
  w.key("image_height").value(c.image_height).comma();
  w.key("min_objects").value(c.min_objects).comma();
  w.key("max_objects").value(c.max_objects).comma();
  w.key("object_classes").value(c.object_classes).comma();
  w.key("predicate_classes").value(c.predicate_classes).comma();
  w.key("rng_seed").value(static_cast<uint64_t>(c.rng_seed)).comma();
  w.key("frame_interval").value(c.frame_interval).comma();
  w.key("d_obj").value(c.d_obj).comma();
  w.key("d_box").value(c.d_box).comma();
  w.key("feature_noise").value(c.feature_noise).comma();
  w.key("positional_amp").value(c.positional_amp).comma();
  w.key("box_jitter_sigma").value(c.box_jitter_sigma).comma();
  w.key("score_noise").value(c.score_noise).comma();
  w.key("static_fraction").value(c.static_fraction).comma();
  w.key("min_speed").value(c.min_speed).comma();
  w.key("max_speed").value(c.max_speed).comma();
  w.key("trajectory_jitter").value(c.trajectory_jitter).comma();
  w.key("late_entry_prob").value(c.late_entry_prob).comma();
  w.key("rules").begin_object();
  w.key("side_margin").value(c.rules.side_margin).comma();
  w.key("approach_margin").value(c.rules.approach_margin).comma();
  w.key("near_distance").value(c.rules.near_distance).comma();
  w.key("far_distance").value(c.rules.far_distance).comma();
  w.key("touch_iou").value(c.rules.touch_iou).comma();
  w.key("cover_iou").value(c.rules.cover_iou).comma();
  w.key("align_window").value(c.rules.align_window).comma();
  w.key("size_ratio").value(c.rules.size_ratio).comma();
  w.key("heading_cos").value(c.rules.heading_cos).comma();
  w.key("min_speed").value(c.rules.min_speed).comma();
  w.key("speed_match").value(c.rules.speed_match).comma();
  w.key("speed_gap").value(c.rules.speed_gap).comma();
  w.key("meet_distance").value(c.rules.meet_distance).comma();
  w.key("pass_speed").value(c.rules.pass_speed).comma();
  w.key("stack_window").value(c.rules.stack_window).comma();
  w.key("skew").value(c.rules.skew);
  w.end_object();
  w.end_object();
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string scene_config_to_json(const SceneConfig& config) {
  JsonWriter w;
  scene_config_to_writer(w, config);
  return w.take();
}

SceneConfig scene_config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  SceneConfig c;
  maybe(j, "num_videos", c.num_videos);
  maybe(j, "frames_per_video", c.frames_per_video);
  maybe(j, "image_width", c.image_width);
  maybe(j, "image_height", c.image_height);
  maybe(j, "min_objects", c.min_objects);
  maybe(j, "max_objects", c.max_objects);
  maybe(j, "object_classes", c.object_classes);
  maybe(j, "predicate_classes", c.predicate_classes);
  maybe(j, "rng_seed", c.rng_seed);
  maybe(j, "frame_interval", c.frame_interval);
  maybe(j, "d_obj", c.d_obj);
  maybe(j, "d_box", c.d_box);
  maybe(j, "feature_noise", c.feature_noise);
  maybe(j, "positional_amp", c.positional_amp);
  maybe(j, "box_jitter_sigma", c.box_jitter_sigma);
  maybe(j, "score_noise", c.score_noise);
  maybe(j, "static_fraction", c.static_fraction);
  maybe(j, "min_speed", c.min_speed);
  maybe(j, "max_speed", c.max_speed);
  maybe(j, "trajectory_jitter", c.trajectory_jitter);
  maybe(j, "late_entry_prob", c.late_entry_prob);
  if (j.contains("rules")) {
    const json& r = j.at("rules");
    maybe(r, "side_margin", c.rules.side_margin);
    maybe(r, "approach_margin", c.rules.approach_margin);
    maybe(r, "near_distance", c.rules.near_distance);
    maybe(r, "far_distance", c.rules.far_distance);
    maybe(r, "touch_iou", c.rules.touch_iou);
    maybe(r, "cover_iou", c.rules.cover_iou);
    maybe(r, "align_window", c.rules.align_window);
    maybe(r, "size_ratio", c.rules.size_ratio);
    maybe(r, "heading_cos", c.rules.heading_cos);
    maybe(r, "min_speed", c.rules.min_speed);
    maybe(r, "speed_match", c.rules.speed_match);
    maybe(r, "speed_gap", c.rules.speed_gap);
    maybe(r, "meet_distance", c.rules.meet_distance);
    maybe(r, "pass_speed", c.rules.pass_speed);
    maybe(r, "stack_window", c.rules.stack_window);
    maybe(r, "skew", c.rules.skew);
  }
  return c;
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const std::string& dir, const SceneConfig& config,
                   const std::vector<VideoSample>& videos) {
  JsonWriter m;
  m.begin_object();
  m.key("format_version").value(1).comma();
  m.key("kind").value("vsgg-synthetic-dataset").comma();
  m.key("config").raw(scene_config_to_json(config)).comma();
  m.key("taxonomy").begin_array();
  const auto& defs = predicate_taxonomy();
  for (int i = 0; i < config.predicate_classes; ++i) {
    if (i) m.comma();
    m.begin_object();
    m.key("id").value(defs[i].id).comma();
    m.key("name").value(defs[i].name).comma();
    m.key("group").value(group_name(defs[i].group));
    m.end_object();
  }
  m.end_array();
  m.end_object();
  write_file(dir + "/manifest.json", m.take() + "\n");

  std::string lines;
  for (const VideoSample& video : videos) {
    for (size_t f = 0; f < video.observations.size(); ++f) {
      const FrameObservation& obs = video.observations[f];
      const GroundTruthGraph& gt = video.truths[f];
      const int n = obs.object_count();
      JsonWriter w;
      w.begin_object();
      w.key("video_id").value(obs.video_id).comma();
      w.key("frame_index").value(obs.frame_index).comma();
      w.key("boxes").begin_object();
      w.key("det").begin_array();
      for (int i = 0; i < n; ++i) {
        if (i) w.comma();
        write_box(w, obs.boxes[i]);
      }
      w.end_array().comma();
      w.key("gt").begin_array();
      for (int i = 0; i < n; ++i) {
        if (i) w.comma();
        write_box(w, gt.boxes[i]);
      }
      w.end_array();
      w.end_object().comma();
      w.key("labels").array(gt.labels).comma();
      w.key("scores").begin_array();
      for (int i = 0; i < n; ++i) {
        if (i) w.comma();
        w.array(obs.class_scores[i]);
      }
      w.end_array().comma();
      w.key("features").begin_array();
      for (int i = 0; i < n; ++i) {
        if (i) w.comma();
        w.array(obs.object_features[i]);
      }
      w.end_array().comma();
      w.key("unions").begin_array();
      for (size_t i = 0; i < obs.union_features.size(); ++i) {
        if (i) w.comma();
        w.array(obs.union_features[i]);
      }
      w.end_array().comma();
      w.key("triplets").begin_array();
      for (size_t i = 0; i < gt.triplets.size(); ++i) {
        if (i) w.comma();
        w.begin_array()
            .value(gt.triplets[i][0])
            .comma()
            .value(gt.triplets[i][1])
            .comma()
            .value(gt.triplets[i][2])
            .end_array();
      }
      w.end_array();
      w.end_object();
      lines += w.take();
      lines += "\n";
    }
  }
  write_file(dir + "/data.jsonl", lines);
}

Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  const json manifest = json::parse(read_file(dir + "/manifest.json"));
  ds.config = scene_config_from_json(manifest.at("config").dump());

  std::ifstream in(dir + "/data.jsonl");
  if (!in) throw std::runtime_error("cannot open dataset: " + dir + "/data.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const int video_id = j.at("video_id").get<int>();
    if (ds.videos.empty() || ds.videos.back().video_id != video_id) {
      ds.videos.push_back(VideoSample{});
      ds.videos.back().video_id = video_id;
    }
    VideoSample& video = ds.videos.back();

    FrameObservation obs;
    GroundTruthGraph gt;
    obs.video_id = gt.video_id = video_id;
    obs.frame_index = gt.frame_index = j.at("frame_index").get<int>();
    for (const json& b : j.at("boxes").at("det")) obs.boxes.push_back(parse_box(b));
    for (const json& b : j.at("boxes").at("gt")) gt.boxes.push_back(parse_box(b));
    for (const json& l : j.at("labels")) {
      obs.class_labels.push_back(l.get<int>());
      gt.labels.push_back(l.get<int>());
    }
    for (const json& s : j.at("scores"))
      obs.class_scores.push_back(s.get<std::vector<double>>());
    for (const json& f : j.at("features"))
      obs.object_features.push_back(f.get<std::vector<double>>());
    for (const json& u : j.at("unions"))
      obs.union_features.push_back(u.get<std::vector<double>>());
    for (const json& t : j.at("triplets"))
      gt.triplets.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});

    video.observations.push_back(std::move(obs));
    video.truths.push_back(std::move(gt));
  }
  return ds;
}

}  // namespace vsgg
