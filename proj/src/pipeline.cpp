#include "vsgg/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "json.hpp"
#include "vsgg/jsonw.hpp"

namespace vsgg {
namespace {

constexpr char kStateMagic[8] = {'V', 'S', 'G', 'G', 'S', 'T', 'A', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& bytes, size_t& off) {
  if (off + sizeof(T) > bytes.size())
    throw std::runtime_error("state snapshot: truncated");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

OnlineState OnlineState::init(const RunConfig& config) {
  OnlineState s;
  s.n_max = config.n_max;
  s.dim = config.embedding_dim();
  s.d_obj = config.scene.d_obj;
  s.prev_clean = Tensor<float>({s.n_max, s.n_max, s.dim});
  s.slot_ident.assign(s.n_max, kPaddingIdentity);
  s.slot_features.assign(s.n_max, std::vector<double>(s.d_obj, 0.0));
  s.memory = MotionMemory(s.n_max, config.temporal.history, config.scene.frame_interval);
  s.padding_rng = Rng::from_key(config.seed, {kTagPadding});
  return s;
}

size_t OnlineState::byte_size() const {
  // Logical size: every container is capacity-bounded by construction.
  size_t bytes = sizeof(OnlineState);
  bytes += prev_clean.data.size() * sizeof(float);
  bytes += slot_ident.size() * sizeof(int);
  for (const auto& f : slot_features) bytes += f.size() * sizeof(double);
  bytes += memory.byte_size();
  return bytes;
}

std::string OnlineState::serialize() const {
  std::string out(kStateMagic, sizeof(kStateMagic));
  put<int32_t>(out, 1);  // version
  put<int32_t>(out, n_max);
  put<int32_t>(out, dim);
  put<int32_t>(out, d_obj);
  put<int32_t>(out, frames_seen);
  put<int32_t>(out, last_frame_index);
  put<int32_t>(out, valid_slots);
  put<int32_t>(out, memory.capacity());
  put<double>(out, memory.frame_interval());
  for (uint64_t w : padding_rng.state()) put<uint64_t>(out, w);
  for (float v : prev_clean.data) put<float>(out, v);
  for (int v : slot_ident) put<int32_t>(out, v);
  for (const auto& f : slot_features)
    for (double v : f) put<double>(out, v);
  for (const auto& buf : memory.raw()) {
    put<int32_t>(out, static_cast<int32_t>(buf.size()));
    for (const auto& e : buf) {
      put<int32_t>(out, e.frame_index);
      put<double>(out, e.cx);
      put<double>(out, e.cy);
    }
  }
  return out;
}

OnlineState OnlineState::deserialize(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kStateMagic, 8) != 0)
    throw std::runtime_error("state snapshot: bad magic");
  size_t off = 8;
  const int version = take<int32_t>(bytes, off);
  if (version != 1) throw std::runtime_error("state snapshot: unknown version");

  OnlineState s;
  s.n_max = take<int32_t>(bytes, off);
  s.dim = take<int32_t>(bytes, off);
  s.d_obj = take<int32_t>(bytes, off);
  s.frames_seen = take<int32_t>(bytes, off);
  s.last_frame_index = take<int32_t>(bytes, off);
  s.valid_slots = take<int32_t>(bytes, off);
  const int capacity = take<int32_t>(bytes, off);
  const double dt = take<double>(bytes, off);
  std::array<uint64_t, 4> rng_state;
  for (uint64_t& w : rng_state) w = take<uint64_t>(bytes, off);
  s.padding_rng.set_state(rng_state);

  s.prev_clean = Tensor<float>({s.n_max, s.n_max, s.dim});
  for (float& v : s.prev_clean.data) v = take<float>(bytes, off);
  s.slot_ident.resize(s.n_max);
  for (int& v : s.slot_ident) v = take<int32_t>(bytes, off);
  s.slot_features.assign(s.n_max, std::vector<double>(s.d_obj, 0.0));
  for (auto& f : s.slot_features)
    for (double& v : f) v = take<double>(bytes, off);
  s.memory = MotionMemory(s.n_max, capacity, dt);
  for (auto& buf : s.memory.raw()) {
    const int count = take<int32_t>(bytes, off);
    for (int i = 0; i < count; ++i) {
      MotionMemory::Entry e;
      e.frame_index = take<int32_t>(bytes, off);
      e.cx = take<double>(bytes, off);
      e.cy = take<double>(bytes, off);
      buf.push_back(e);
    }
  }
  return s;
}

StreamPipeline::StreamPipeline(const RunConfig& config, DenoiserUNet<float>& net,
                               const ReadoutHeads<float>* heads)
    : cfg_(config), net_(net), heads_(heads), sched_(make_schedule(config.diffusion)) {}

AdjacencyTensor<float> StreamPipeline::denoise_frame(OnlineState& state,
                                                     const FrameObservation& obs) const {
  if (obs.frame_index <= state.last_frame_index)
    throw std::invalid_argument("stream: out-of-order frame " +
                                std::to_string(obs.frame_index) + " after " +
                                std::to_string(state.last_frame_index));

  // Slot assignment against the previous frame's per-slot features.
  const int n_now = obs.object_count();
  SlotAssignment assign;
  if (state.frames_seen == 0 || state.valid_slots == 0) {
    assign.slot_of_object.assign(n_now, -1);
    for (int o = 0; o < n_now; ++o) assign.new_objects.push_back(o);
  } else {
    std::vector<std::vector<double>> prev_feats(
        state.slot_features.begin(), state.slot_features.begin() + state.valid_slots);
    assign = detect_new_objects(obs.object_features, prev_feats,
                                cfg_.temporal.similarity_threshold);
  }

  // Slot-ordered view: existing slots first, new objects appended. Streams
  // with vanishing objects are out of contract.
  const int old_valid = state.frames_seen == 0 ? 0 : state.valid_slots;
  std::vector<int> slot_to_obs(old_valid, -1);
  for (int o = 0; o < n_now; ++o) {
    const int s = assign.slot_of_object[o];
    if (s >= 0) slot_to_obs[s] = o;
  }
  for (int s = 0; s < old_valid; ++s)
    if (slot_to_obs[s] < 0)
      throw std::runtime_error("stream: slot " + std::to_string(s) +
                               " lost its object (objects must persist)");
  for (int o : assign.new_objects) slot_to_obs.push_back(o);
  const int n_slots = static_cast<int>(slot_to_obs.size());
  if (n_slots > cfg_.n_max)
    throw std::runtime_error("stream: object count exceeds n_max");

  // Reorder the observation into slot order.
  FrameObservation view;
  view.video_id = obs.video_id;
  view.frame_index = obs.frame_index;
  view.union_features.resize(static_cast<size_t>(n_slots) * n_slots);
  for (int s = 0; s < n_slots; ++s) {
    const int o = slot_to_obs[s];
    view.boxes.push_back(obs.boxes[o]);
    view.class_labels.push_back(obs.class_labels[o]);
    view.class_scores.push_back(obs.class_scores[o]);
    view.object_features.push_back(obs.object_features[o]);
  }
  for (int si = 0; si < n_slots; ++si)
    for (int sj = 0; sj < n_slots; ++sj)
      view.union_features[static_cast<size_t>(si) * n_slots + sj] =
          obs.union_feature(slot_to_obs[si], slot_to_obs[sj]);

  // Assemble over the already-known slots, then claim padding slots for the
  // new instances.
  FrameObservation known = view;
  known.boxes.resize(old_valid);
  known.class_labels.resize(old_valid);
  known.class_scores.resize(old_valid);
  known.object_features.resize(old_valid);
  known.union_features.clear();
  for (int si = 0; si < old_valid; ++si)
    for (int sj = 0; sj < old_valid; ++sj)
      known.union_features.push_back(
          view.union_features[static_cast<size_t>(si) * n_slots + sj]);

  AdjacencyTensor<float> adj = assemble_adjacency<float>(
      known, cfg_.n_max, state.padding_rng, cfg_.scene.d_box, cfg_.feature_mask,
      cfg_.embedding_dim());
  adj.frame_index = obs.frame_index;

  std::vector<int> slot_obs_map(old_valid);
  for (int s = 0; s < old_valid; ++s) slot_obs_map[s] = s;
  std::vector<int> new_view_indices;
  for (int s = old_valid; s < n_slots; ++s) new_view_indices.push_back(s);
  refresh_padding(adj, new_view_indices, view, slot_obs_map, cfg_.scene.d_box,
                  cfg_.feature_mask);

  // Persistent identities: slots are allocated once and never recycled.
  for (int s = old_valid; s < n_slots; ++s) state.slot_ident[s] = s;
  for (int s = 0; s < n_slots; ++s) adj.slot_map[s] = state.slot_ident[s];

  // Motion memory update, then the pairwise speed matrix at this frame.
  for (int s = 0; s < n_slots; ++s)
    state.memory.record(s, obs.frame_index, view.boxes[s].cx(), view.boxes[s].cy());
  const Tensor<double> speeds =
      build_speed_matrix(state.memory, n_slots, cfg_.n_max, obs.frame_index);

  StepHook<float> hook;
  if (cfg_.temporal.motion_injection) {
    const std::vector<double>* scale = cfg_.temporal.motion_channel_scale.empty()
                                           ? nullptr
                                           : &cfg_.temporal.motion_channel_scale;
    hook = [&speeds, scale](Tensor<float>& a, int) { inject_motion(a, speeds, scale); };
  }

  const Tensor<float>* condition =
      (cfg_.temporal.conditioning && state.frames_seen > 0) ? &state.prev_clean : nullptr;
  Tensor<float> clean = denoise_loop<float>(adj.data, condition, sched_, net_,
                                            cfg_.diffusion.resolved_reverse_steps(), hook);

  AdjacencyTensor<float> denoised;
  denoised.data = clean;
  denoised.valid_count = n_slots;
  denoised.slot_map = adj.slot_map;
  denoised.frame_index = obs.frame_index;

  // State update; memory stays constant in the stream length.
  state.prev_clean = std::move(clean);
  state.valid_slots = n_slots;
  for (int s = 0; s < n_slots; ++s) state.slot_features[s] = view.object_features[s];
  state.frames_seen += 1;
  state.last_frame_index = obs.frame_index;
  return denoised;
}

FrameResult StreamPipeline::process_frame(OnlineState& state,
                                          const FrameObservation& obs) const {
  if (heads_ == nullptr)
    throw std::logic_error("stream: readout heads required for process_frame");
  FrameResult out;
  out.denoised = denoise_frame(state, obs);

  const AdjacencyTensor<float>& a0 = out.denoised;
  SceneGraphPrediction& pred = out.prediction;
  pred.video_id = obs.video_id;
  pred.frame_index = obs.frame_index;
  pred.n_slots = a0.valid_count;
  pred.identities.assign(a0.slot_map.begin(), a0.slot_map.begin() + a0.valid_count);
  pred.predicate_scores.resize(static_cast<size_t>(pred.n_slots) * pred.n_slots);
  for (int i = 0; i < pred.n_slots; ++i)
    for (int j = 0; j < pred.n_slots; ++j) {
      if (i == j) continue;
      pred.predicate_scores[static_cast<size_t>(i) * pred.n_slots + j] =
          heads_->predicate_distribution(heads_->entry_of(a0, i, j));
    }
  for (int i = 0; i < pred.n_slots; ++i) {
    pred.object_scores.push_back(heads_->object_distribution(a0, i));
    pred.boxes.push_back(heads_->regress_box(a0, i));
  }
  return out;
}

FrameObservation observation_from_gt(const GroundTruthGraph& gt,
                                     const FeatureSynth& synth,
                                     const SceneConfig& config) {
  FrameObservation obs;
  obs.video_id = gt.video_id;
  obs.frame_index = gt.frame_index;
  obs.boxes = gt.boxes;
  obs.class_labels = gt.labels;
  const int n = static_cast<int>(gt.boxes.size());
  for (int i = 0; i < n; ++i) {
    std::vector<double> scores(config.object_classes, 0.0);
    scores[gt.labels[i]] = 1.0;
    obs.class_scores.push_back(std::move(scores));
    obs.object_features.push_back(
        synth.object_feature(gt.video_id, gt.frame_index, i, gt.boxes[i], gt.labels[i]));
  }
  obs.union_features.resize(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      obs.union_features[static_cast<size_t>(i) * n + j] =
          synth.union_feature(gt.video_id, gt.frame_index, i, j, gt.boxes[i], gt.boxes[j],
                              gt.labels[i], gt.labels[j]);
  return obs;
}

void write_predictions(const std::string& path, Protocol protocol,
                       const std::vector<SceneGraphPrediction>& predictions,
                       const EvalConfig& eval_config) {
  std::string out;
  {
    JsonWriter w;
    w.begin_object();
    w.key("kind").value("vsgg-predictions").comma();
    w.key("protocol").value(protocol_name(protocol)).comma();
    w.key("frames").value(static_cast<int>(predictions.size()));
    w.end_object();
    out += w.take();
    out += "\n";
  }
  const int k_max = eval_config.ks.empty() ? 50 : eval_config.ks.back();
  const bool pred_only = protocol == Protocol::kPredCls;

  for (const SceneGraphPrediction& p : predictions) {
    JsonWriter w;
    w.begin_object();
    w.key("video_id").value(p.video_id).comma();
    w.key("frame_index").value(p.frame_index).comma();
    w.key("slots").begin_array();
    for (int s = 0; s < p.n_slots; ++s) {
      if (s) w.comma();
      w.begin_object();
      w.key("identity").value(p.identities[s]).comma();
      w.key("scores").array(p.object_scores[s]).comma();
      w.key("box")
          .begin_array()
          .value(p.boxes[s].x)
          .comma()
          .value(p.boxes[s].y)
          .comma()
          .value(p.boxes[s].w)
          .comma()
          .value(p.boxes[s].h)
          .end_array();
      w.end_object();
    }
    w.end_array().comma();
    w.key("pairs").begin_array();
    bool first = true;
    for (int i = 0; i < p.n_slots; ++i)
      for (int j = 0; j < p.n_slots; ++j) {
        if (i == j) continue;
        if (!first) w.comma();
        first = false;
        w.begin_object();
        w.key("s").value(i).comma();
        w.key("o").value(j).comma();
        w.key("scores").array(p.pair_scores(i, j));
        w.end_object();
      }
    w.end_array().comma();

    const auto dump_ranked = [&](const char* key, ConstraintMode mode) {
      const auto ranked = rank_triplets(p, mode, pred_only);
      w.key(key).begin_array();
      const int limit = std::min<int>(k_max, static_cast<int>(ranked.size()));
      for (int r = 0; r < limit; ++r) {
        if (r) w.comma();
        w.begin_array()
            .value(ranked[r].subject_slot)
            .comma()
            .value(ranked[r].object_slot)
            .comma()
            .value(ranked[r].predicate)
            .comma()
            .value(ranked[r].score)
            .end_array();
      }
      w.end_array();
    };
    dump_ranked("triplets", ConstraintMode::kWithout);
    w.comma();
    dump_ranked("triplets_constrained", ConstraintMode::kWith);
    w.end_object();
    out += w.take();
    out += "\n";
  }
  write_file(path, out);
}

std::vector<SceneGraphPrediction> read_predictions(const std::string& path,
                                                   Protocol* protocol_out) {
  const std::string text = read_file(path);
  std::vector<SceneGraphPrediction> out;
  size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    if (!header_seen) {
      header_seen = true;
      if (j.value("kind", "") != "vsgg-predictions")
        throw std::runtime_error("predictions: missing header line");
      if (protocol_out != nullptr)
        *protocol_out = protocol_from_name(j.at("protocol").get<std::string>());
      continue;
    }
    SceneGraphPrediction p;
    p.video_id = j.at("video_id").get<int>();
    p.frame_index = j.at("frame_index").get<int>();
    const auto& slots = j.at("slots");
    p.n_slots = static_cast<int>(slots.size());
    for (const auto& s : slots) {
      p.identities.push_back(s.at("identity").get<int>());
      p.object_scores.push_back(s.at("scores").get<std::vector<double>>());
      const auto& b = s.at("box");
      p.boxes.push_back(Box{b.at(0).get<double>(), b.at(1).get<double>(),
                            b.at(2).get<double>(), b.at(3).get<double>()});
    }
    p.predicate_scores.resize(static_cast<size_t>(p.n_slots) * p.n_slots);
    for (const auto& pair : j.at("pairs")) {
      const int i = pair.at("s").get<int>();
      const int jj = pair.at("o").get<int>();
      p.predicate_scores[static_cast<size_t>(i) * p.n_slots + jj] =
          pair.at("scores").get<std::vector<double>>();
    }
    out.push_back(std::move(p));
  }
  if (!header_seen) throw std::runtime_error("predictions: empty file");
  return out;
}

}  // namespace vsgg
