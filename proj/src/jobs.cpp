#include "vsgg/jobs.hpp"

#include <algorithm>
#include <filesystem>

#include "json.hpp"
#include "vsgg/jsonw.hpp"
#include "vsgg/pipeline.hpp"
#include "vsgg/plot.hpp"

namespace vsgg {

std::string job_synth(const RunConfig& config, const std::string& out_dir) {
  const auto videos = generate_dataset(config.scene);
  write_dataset(out_dir, config.scene, videos);
  return out_dir;
}

TrainResult job_train_stage1(const RunConfig& config, const std::string& data_dir,
                             const std::string& out_checkpoint,
                             const std::string& resume_from) {
  const Dataset ds = read_dataset(data_dir);
  TrainResult result = train_stage1(ds, config, out_checkpoint, resume_from);
  write_loss_log(out_checkpoint + ".loss.csv", result.steps);
  PlotSeries series{"stage1 loss", {}, {}};
  for (const StepLog& s : result.steps) {
    series.xs.push_back(static_cast<double>(s.step));
    series.ys.push_back(s.loss);
  }
  write_svg_chart(out_checkpoint + ".loss.svg", "Stage 1 training loss", "step",
                  "loss", {series});
  return result;
}

TrainResult job_train_stage2(const RunConfig& config, const std::string& data_dir,
                             const std::string& stage1_checkpoint,
                             const std::string& out_checkpoint) {
  const Dataset ds = read_dataset(data_dir);
  TrainResult result = train_stage2(ds, stage1_checkpoint, config, out_checkpoint);
  write_loss_log(out_checkpoint + ".loss.csv", result.steps);
  PlotSeries series{"stage2 loss", {}, {}};
  for (const StepLog& s : result.steps) {
    series.xs.push_back(static_cast<double>(s.step));
    series.ys.push_back(s.loss);
  }
  write_svg_chart(out_checkpoint + ".loss.svg", "Stage 2 training loss", "step",
                  "loss", {series});
  return result;
}

InferStats job_infer(const std::string& data_dir, const std::string& stage2_checkpoint,
                     Protocol protocol, const std::string& out_predictions,
                     const std::string& audit_path) {
  const Checkpoint ckpt = Checkpoint::load(stage2_checkpoint);
  if (ckpt.kind != "stage2")
    throw std::runtime_error("infer: expected a stage2 checkpoint");
  const RunConfig config = config_from_checkpoint(ckpt);
  const Dataset ds = read_dataset(data_dir);
  const FeatureSynth synth = ds.make_synth();

  UNetConfig unet_cfg = config.unet;
  unet_cfg.channels = ds.config.embedding_dim();
  DenoiserUNet<float> net(unet_cfg);
  HeadsConfig heads_cfg = config.heads;
  heads_cfg.dim = ds.config.embedding_dim();
  heads_cfg.predicate_classes = ds.config.predicate_classes;
  heads_cfg.object_classes = ds.config.object_classes;
  ReadoutHeads<float> heads(heads_cfg);
  restore_stage2_checkpoint(ckpt, net, heads);

  StreamPipeline pipeline(config, net, &heads);
  InferStats stats;
  std::vector<SceneGraphPrediction> predictions;
  std::optional<size_t> steady_state_size;

  for (const VideoSample& video : ds.videos) {
    OnlineState state = OnlineState::init(config);
    ++stats.videos;
    for (size_t f = 0; f < video.observations.size(); ++f) {
      // Frames arrive strictly in order; box source depends on the protocol.
      const FrameObservation obs =
          protocol == Protocol::kSgDet
              ? video.observations[f]
              : observation_from_gt(video.truths[f], synth, ds.config);
      FrameResult result = pipeline.process_frame(state, obs);
      predictions.push_back(std::move(result.prediction));
      ++stats.frames;
      const size_t bytes = state.byte_size();
      stats.peak_state_bytes = std::max(stats.peak_state_bytes, bytes);
      if (steady_state_size.has_value() && bytes != *steady_state_size)
        stats.state_bytes_constant = false;
      steady_state_size = bytes;
    }
  }

  EvalConfig eval_cfg;  // ks echo for the convenience top-k dump
  write_predictions(out_predictions, protocol, predictions, eval_cfg);

  if (!audit_path.empty()) {
    JsonWriter w;
    w.begin_object();
    w.key("frames").value(stats.frames).comma();
    w.key("videos").value(stats.videos).comma();
    w.key("peak_state_bytes").value(static_cast<uint64_t>(stats.peak_state_bytes))
        .comma();
    w.key("state_bytes_constant").value(stats.state_bytes_constant);
    w.end_object();
    write_file(audit_path, w.take() + "\n");
  }
  return stats;
}

EvalRun job_eval(const std::string& data_dir, const std::string& predictions_path,
                 const EvalConfig& eval_config, const std::string& out_json,
                 const std::string& out_csv) {
  const Dataset ds = read_dataset(data_dir);
  Protocol protocol = Protocol::kSgDet;
  const std::vector<SceneGraphPrediction> preds =
      read_predictions(predictions_path, &protocol);

  std::map<std::pair<int, int>, const GroundTruthGraph*> gt_index;
  for (const VideoSample& video : ds.videos)
    for (const GroundTruthGraph& gt : video.truths)
      gt_index[{gt.video_id, gt.frame_index}] = &gt;

  std::vector<FrameGroundTruth> gts;
  for (const SceneGraphPrediction& p : preds) {
    const auto it = gt_index.find({p.video_id, p.frame_index});
    if (it == gt_index.end())
      throw std::runtime_error("eval: prediction for unknown frame");
    gts.push_back(map_ground_truth(*it->second, p));
  }

  const EvalRun run = evaluate_frames(preds, gts, protocol, eval_config);
  write_file(out_json, report_to_json(run, eval_config) + "\n");
  if (!out_csv.empty()) write_file(out_csv, report_to_csv(run));

  // recall-vs-K chart next to the report
  PlotSeries with{"with constraint", {}, {}}, without{"without constraint", {}, {}};
  for (size_t i = 0; i < eval_config.ks.size(); ++i) {
    with.xs.push_back(eval_config.ks[i]);
    with.ys.push_back(run.with_constraint.recall[i]);
    without.xs.push_back(eval_config.ks[i]);
    without.ys.push_back(run.without_constraint.recall[i]);
  }
  write_svg_chart(out_json + ".svg", "Recall@K", "K", "recall", {with, without});
  return run;
}

AblationSpec ablation_spec_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  AblationSpec spec;
  if (j.contains("conditioning"))
    spec.conditioning = j.at("conditioning").get<std::vector<bool>>();
  if (j.contains("motion")) spec.motion = j.at("motion").get<std::vector<bool>>();
  if (j.contains("steps")) spec.steps = j.at("steps").get<std::vector<int>>();
  if (j.contains("depth")) spec.depth = j.at("depth").get<std::vector<int>>();
  if (j.contains("readout"))
    spec.readout = j.at("readout").get<std::vector<std::string>>();
  if (j.contains("features"))
    spec.features = j.at("features").get<std::vector<std::string>>();
  if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("protocol"))
    spec.protocol = protocol_from_name(j.at("protocol").get<std::string>());
  return spec;
}

namespace {

PairComponentMask mask_from_name(const std::string& name) {
  if (name == "all") return PairComponentMask{true, true, true};
  if (name == "union_only") return PairComponentMask{false, true, false};
  if (name == "no_box") return PairComponentMask{true, true, false};
  throw std::invalid_argument("ablation: unknown feature set " + name);
}

std::vector<int> default_widths(int depth, const std::vector<int>& base) {
  std::vector<int> widths;
  for (int i = 0; i < depth; ++i)
    widths.push_back(i < static_cast<int>(base.size()) ? base[i]
                                                       : base.back() * (1 << (i - static_cast<int>(base.size()) + 1)));
  return widths;
}

}  // namespace

AblationTable run_ablation(const RunConfig& base_config, const AblationSpec& spec,
                           const std::string& work_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(work_dir);

  const auto axis = [](auto values, auto fallback) {
    return values.empty() ? decltype(values){fallback} : values;
  };
  const auto conditioning =
      axis(spec.conditioning, base_config.temporal.conditioning);
  const auto motion = axis(spec.motion, base_config.temporal.motion_injection);
  const auto steps = axis(spec.steps, base_config.diffusion.steps);
  const auto depth = axis(spec.depth, base_config.unet.depth);
  const auto readout =
      axis(spec.readout, std::string(readout_mode_name(base_config.heads.mode)));
  const auto features = axis(spec.features, std::string("all"));
  const auto seeds = axis(spec.seeds, base_config.seed);

  AblationTable table;
  std::map<std::string, std::string> stage1_cache;  // key -> checkpoint path
  std::map<uint64_t, std::string> dataset_cache;    // seed -> dataset dir
  int row_id = 0;

  for (bool cond : conditioning)
    for (bool mot : motion)
      for (int k : steps)
        for (int d : depth)
          for (const std::string& ro : readout)
            for (const std::string& fe : features)
              for (uint64_t seed : seeds) {
                RunConfig cfg = base_config;
                cfg.seed = seed;
                cfg.scene.rng_seed = seed;
                cfg.temporal.conditioning = cond;
                cfg.temporal.motion_injection = mot;
                cfg.diffusion.steps = k;
                cfg.diffusion.reverse_steps = k;
                cfg.unet.depth = d;
                cfg.unet.widths = default_widths(d, base_config.unet.widths);
                cfg.heads.mode = readout_mode_from_name(ro);
                cfg.feature_mask = mask_from_name(fe);
                cfg.resolve();

                std::string& data_dir = dataset_cache[seed];
                if (data_dir.empty()) {
                  data_dir = work_dir + "/data_seed" + std::to_string(seed);
                  job_synth(cfg, data_dir);
                }

                // Stage 1 ignores motion injection and readout mode.
                const std::string s1_key =
                    std::to_string(cond) + "_" + std::to_string(k) + "_" +
                    std::to_string(d) + "_" + fe + "_" + std::to_string(seed);
                std::string& s1_path = stage1_cache[s1_key];
                if (s1_path.empty()) {
                  s1_path = work_dir + "/stage1_" + s1_key + ".ckpt";
                  // deterministic path: reuse a checkpoint from an earlier
                  // invocation over the same work dir
                  if (!fs::exists(s1_path)) job_train_stage1(cfg, data_dir, s1_path);
                }

                const std::string tag = "row" + std::to_string(row_id++);
                const std::string s2_path = work_dir + "/" + tag + "_stage2.ckpt";
                job_train_stage2(cfg, data_dir, s1_path, s2_path);
                const std::string pred_path = work_dir + "/" + tag + "_pred.jsonl";
                job_infer(data_dir, s2_path, spec.protocol, pred_path);

                AblationRow row;
                row.conditioning = cond;
                row.motion = mot;
                row.steps = k;
                row.depth = d;
                row.readout = ro;
                row.features = fe;
                row.seed = seed;
                row.label = tag;
                row.result = job_eval(data_dir, pred_path, cfg.eval,
                                      work_dir + "/" + tag + "_report.json");
                table.rows.push_back(std::move(row));
              }

  // Paper-style table: one line per toggle combination, means over seeds.
  std::map<std::string, std::vector<const AblationRow*>> grouped;
  std::vector<std::string> group_order;
  for (const AblationRow& row : table.rows) {
    const std::string key = std::string(row.conditioning ? "T_VSGG" : "VSGG") + "," +
                            (row.motion ? "motion" : "-") + ",K=" +
                            std::to_string(row.steps) + ",L=" +
                            std::to_string(row.depth) + "," + row.readout + "," +
                            row.features;
    if (!grouped.count(key)) group_order.push_back(key);
    grouped[key].push_back(&row);
  }

  std::string csv =
      "objective,motion,steps,depth,readout,features,seeds";
  const std::vector<int>& ks = base_config.eval.ks;
  for (int k : ks) csv += ",R@" + std::to_string(k) + "_with";
  for (int k : ks) csv += ",R@" + std::to_string(k) + "_without";
  csv += "\n";
  for (const std::string& key : group_order) {
    const auto& rows = grouped[key];
    csv += key + "," + std::to_string(rows.size());
    for (size_t ki = 0; ki < ks.size(); ++ki) {
      double mean = 0.0;
      for (const AblationRow* r : rows) mean += r->result.with_constraint.recall[ki];
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.9g", mean / rows.size());
      csv += buf;
    }
    for (size_t ki = 0; ki < ks.size(); ++ki) {
      double mean = 0.0;
      for (const AblationRow* r : rows) mean += r->result.without_constraint.recall[ki];
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.9g", mean / rows.size());
      csv += buf;
    }
    csv += "\n";
  }
  table.csv = csv;

  JsonWriter w;
  w.begin_object();
  w.key("kind").value("vsgg-ablation").comma();
  w.key("protocol").value(protocol_name(spec.protocol)).comma();
  w.key("rows").begin_array();
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const AblationRow& row = table.rows[i];
    if (i) w.comma();
    w.begin_object();
    w.key("label").value(row.label).comma();
    w.key("conditioning").value(row.conditioning).comma();
    w.key("motion").value(row.motion).comma();
    w.key("steps").value(row.steps).comma();
    w.key("depth").value(row.depth).comma();
    w.key("readout").value(row.readout).comma();
    w.key("features").value(row.features).comma();
    w.key("seed").value(row.seed).comma();
    w.key("recall_with").array(row.result.with_constraint.recall).comma();
    w.key("recall_without").array(row.result.without_constraint.recall).comma();
    w.key("mean_recall_with").array(row.result.with_constraint.mean_recall);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  table.json = w.take();

  write_file(work_dir + "/ablation.csv", table.csv);
  write_file(work_dir + "/ablation.json", table.json + "\n");
  return table;
}

}  // namespace vsgg
