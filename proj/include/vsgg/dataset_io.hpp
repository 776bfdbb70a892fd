#pragma once

#include <string>
#include <vector>

#include "vsgg/scene.hpp"

namespace vsgg {

// On-disk dataset layout:
//   <dir>/manifest.json  taxonomy + full config echo
//   <dir>/data.jsonl     one record per frame, keys
//                        {video_id, frame_index, boxes, labels, scores,
//                         features, unions, triplets}
// "boxes" holds both detector and ground-truth boxes ({"det": ..., "gt": ...});
// floats carry 9 significant digits. Writing is byte-deterministic.
void write_dataset(const std::string& dir, const SceneConfig& config,
                   const std::vector<VideoSample>& videos);

struct Dataset {
  SceneConfig config;
  std::vector<VideoSample> videos;

  FeatureSynth make_synth() const {
    return FeatureSynth(config.rng_seed, config.d_obj, config.object_classes,
                        config.feature_noise, config.positional_amp);
  }
};

Dataset read_dataset(const std::string& dir);

SceneConfig scene_config_from_json(const std::string& json_text);
std::string scene_config_to_json(const SceneConfig& config);

// Writes `text` to `path`, creating parent directories. Throws on failure.
void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace vsgg
