#include "vsgg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vsgg/jsonw.hpp"

namespace vsgg {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kPredCls: return "predcls";
    case Protocol::kSgCls: return "sgcls";
    case Protocol::kSgDet: return "sgdet";
  }
  return "unknown";
}

Protocol protocol_from_name(const std::string& s) {
  if (s == "predcls") return Protocol::kPredCls;
  if (s == "sgcls") return Protocol::kSgCls;
  if (s == "sgdet") return Protocol::kSgDet;
  throw std::invalid_argument("unknown protocol: " + s);
}

const char* constraint_name(ConstraintMode m) {
  return m == ConstraintMode::kWith ? "with" : "without";
}

void EvalConfig::validate() const {
  if (ks.empty()) throw std::invalid_argument("eval: ks must not be empty");
  for (size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw std::invalid_argument("eval: ks must be positive");
    if (i > 0 && ks[i] <= ks[i - 1])
      throw std::invalid_argument("eval: ks must be ascending");
  }
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("eval: iou_threshold must lie in (0, 1]");
}

FrameGroundTruth map_ground_truth(const GroundTruthGraph& gt,
                                  const SceneGraphPrediction& pred) {
  std::map<int, int> slot_of;
  for (int s = 0; s < pred.n_slots; ++s) slot_of[pred.identities[s]] = s;

  FrameGroundTruth out;
  out.labels.assign(pred.n_slots, -1);
  out.boxes.assign(pred.n_slots, Box{});
  for (size_t ident = 0; ident < gt.labels.size(); ++ident) {
    const auto it = slot_of.find(static_cast<int>(ident));
    if (it == slot_of.end()) continue;
    out.labels[it->second] = gt.labels[ident];
    out.boxes[it->second] = gt.boxes[ident];
  }
  for (const auto& t : gt.triplets) {
    const auto si = slot_of.find(t[0]);
    const auto oi = slot_of.find(t[2]);
    out.triplets.push_back({si == slot_of.end() ? -1 : si->second, t[1],
                            oi == slot_of.end() ? -1 : oi->second});
  }
  return out;
}

std::vector<RankedTriplet> rank_triplets(
    const SceneGraphPrediction& pred, ConstraintMode mode, bool predicate_score_only,
    const std::set<std::pair<int, int>>* pair_filter) {
  std::vector<RankedTriplet> out;
  const int n = pred.n_slots;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (pair_filter && !pair_filter->count({i, j})) continue;
      const auto& scores = pred.pair_scores(i, j);
      if (scores.empty()) continue;
      double label_factor = 1.0;
      if (!predicate_score_only) {
        const auto& ss = pred.object_scores[i];
        const auto& os = pred.object_scores[j];
        label_factor = *std::max_element(ss.begin(), ss.end()) *
                       *std::max_element(os.begin(), os.end());
      }
      if (mode == ConstraintMode::kWith) {
        int best = 0;
        for (int p = 1; p < static_cast<int>(scores.size()); ++p)
          if (scores[p] > scores[best]) best = p;
        out.push_back(RankedTriplet{i, j, best, scores[best] * label_factor});
      } else {
        for (int p = 0; p < static_cast<int>(scores.size()); ++p)
          out.push_back(RankedTriplet{i, j, p, scores[p] * label_factor});
      }
    }

  const auto pair_index = [n](const RankedTriplet& t) {
    return t.subject_slot * n + t.object_slot;
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const RankedTriplet& a, const RankedTriplet& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (pair_index(a) != pair_index(b))
                       return pair_index(a) < pair_index(b);
                     return a.predicate < b.predicate;
                   });
  return out;
}

namespace {

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

bool triplet_hits(const RankedTriplet& cand, const std::array<int, 3>& gt,
                  const SceneGraphPrediction& pred, const FrameGroundTruth& truth,
                  Protocol protocol, double iou_threshold,
                  const std::vector<int>& pred_labels) {
  if (cand.predicate != gt[1]) return false;
  const int gs = gt[0], go = gt[2];
  if (gs < 0 || go < 0) return false;

  switch (protocol) {
    case Protocol::kPredCls:
      return cand.subject_slot == gs && cand.object_slot == go;
    case Protocol::kSgCls:
      return cand.subject_slot == gs && cand.object_slot == go &&
             pred_labels[gs] == truth.labels[gs] && pred_labels[go] == truth.labels[go];
    case Protocol::kSgDet:
      return pred_labels[cand.subject_slot] == truth.labels[gs] &&
             pred_labels[cand.object_slot] == truth.labels[go] &&
             iou(pred.boxes[cand.subject_slot], truth.boxes[gs]) > iou_threshold &&
             iou(pred.boxes[cand.object_slot], truth.boxes[go]) > iou_threshold;
  }
  return false;
}

}  // namespace

FrameRecall recall_at_k(const std::vector<RankedTriplet>& ranked,
                        const SceneGraphPrediction& pred, const FrameGroundTruth& gt,
                        int k, Protocol protocol, double iou_threshold) {
  FrameRecall out;
  out.gt_count = static_cast<int>(gt.triplets.size());
  for (const auto& t : gt.triplets) out.class_gt[t[1]] += 1;
  if (out.gt_count == 0) return out;

  std::vector<int> pred_labels(pred.n_slots, -1);
  for (int s = 0; s < pred.n_slots; ++s)
    if (!pred.object_scores[s].empty()) pred_labels[s] = argmax(pred.object_scores[s]);

  const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
  std::vector<bool> matched(gt.triplets.size(), false);
  for (int r = 0; r < limit; ++r) {
    for (size_t g = 0; g < gt.triplets.size(); ++g) {
      if (matched[g]) continue;
      if (triplet_hits(ranked[r], gt.triplets[g], pred, gt, protocol, iou_threshold,
                       pred_labels)) {
        matched[g] = true;
        out.hits += 1;
        out.class_hits[gt.triplets[g][1]] += 1;
        break;  // each prediction matches at most one gt triplet
      }
    }
  }
  out.recall = static_cast<double>(out.hits) / out.gt_count;
  return out;
}

MetricReport aggregate(const std::vector<std::vector<FrameRecall>>& per_frame_per_k,
                       const std::vector<int>& ks, Protocol protocol,
                       ConstraintMode mode, int videos, int frames_skipped) {
  MetricReport report;
  report.protocol = protocol;
  report.mode = mode;
  report.ks = ks;
  report.videos = videos;
  report.frames_skipped = frames_skipped;
  report.recall.assign(ks.size(), 0.0);
  report.mean_recall.assign(ks.size(), 0.0);

  for (size_t ki = 0; ki < ks.size(); ++ki) {
    int frames = 0;
    double sum = 0.0;
    std::map<int, int> class_gt, class_hits;
    for (const auto& frame : per_frame_per_k) {
      const FrameRecall& fr = frame[ki];
      if (fr.gt_count == 0) continue;
      ++frames;
      sum += fr.recall;
      for (const auto& [cls, cnt] : fr.class_gt) class_gt[cls] += cnt;
      for (const auto& [cls, cnt] : fr.class_hits) class_hits[cls] += cnt;
    }
    report.frames_evaluated = frames;
    report.recall[ki] = frames > 0 ? sum / frames : 0.0;

    double mr = 0.0;
    int classes = 0;
    for (const auto& [cls, cnt] : class_gt) {
      const double r = static_cast<double>(class_hits.count(cls) ? class_hits[cls] : 0) /
                       cnt;
      report.per_class_recall[cls].resize(ks.size(), 0.0);
      report.per_class_recall[cls][ki] = r;
      mr += r;
      ++classes;
    }
    report.mean_recall[ki] = classes > 0 ? mr / classes : 0.0;
  }
  return report;
}

EvalRun evaluate_frames(const std::vector<SceneGraphPrediction>& preds,
                        const std::vector<FrameGroundTruth>& gts, Protocol protocol,
                        const EvalConfig& config) {
  config.validate();
  if (preds.size() != gts.size())
    throw std::invalid_argument("evaluate_frames: prediction/gt count mismatch");

  std::set<int> videos;
  int skipped = 0;
  std::vector<std::vector<FrameRecall>> with_rows, without_rows;
  for (size_t f = 0; f < preds.size(); ++f) {
    videos.insert(preds[f].video_id);
    if (gts[f].triplets.empty()) {
      ++skipped;
      continue;
    }
    std::set<std::pair<int, int>> gt_pairs;
    for (const auto& t : gts[f].triplets)
      if (t[0] >= 0 && t[2] >= 0) gt_pairs.insert({t[0], t[2]});
    const bool pred_only = protocol == Protocol::kPredCls;
    const auto* filter = protocol == Protocol::kPredCls ? &gt_pairs : nullptr;

    const auto ranked_with =
        rank_triplets(preds[f], ConstraintMode::kWith, pred_only, filter);
    const auto ranked_without =
        rank_triplets(preds[f], ConstraintMode::kWithout, pred_only, filter);

    std::vector<FrameRecall> wrow, wout;
    for (int k : config.ks) {
      wrow.push_back(
          recall_at_k(ranked_with, preds[f], gts[f], k, protocol, config.iou_threshold));
      wout.push_back(recall_at_k(ranked_without, preds[f], gts[f], k, protocol,
                                 config.iou_threshold));
    }
    with_rows.push_back(std::move(wrow));
    without_rows.push_back(std::move(wout));
  }

  EvalRun run;
  run.with_constraint =
      aggregate(with_rows, config.ks, protocol, ConstraintMode::kWith,
                static_cast<int>(videos.size()), skipped);
  run.without_constraint =
      aggregate(without_rows, config.ks, protocol, ConstraintMode::kWithout,
                static_cast<int>(videos.size()), skipped);
  return run;
}

namespace {

void check_invariants(const EvalRun& run) {
  const auto check_monotone = [](const MetricReport& r) {
    for (size_t i = 1; i < r.recall.size(); ++i)
      if (r.recall[i] + 1e-12 < r.recall[i - 1])
        throw std::logic_error("metric invariant violated: R@K decreased in K");
  };
  check_monotone(run.with_constraint);
  check_monotone(run.without_constraint);
  for (size_t i = 0; i < run.with_constraint.recall.size(); ++i)
    if (run.with_constraint.recall[i] > run.without_constraint.recall[i] + 1e-12)
      throw std::logic_error(
          "metric invariant violated: with-constraint R@K exceeds without-constraint");
}

void report_json(JsonWriter& w, const MetricReport& r) {
  w.begin_object();
  w.key("protocol").value(protocol_name(r.protocol)).comma();
  w.key("constraint").value(constraint_name(r.mode)).comma();
  w.key("ks").array(r.ks).comma();
  w.key("recall").array(r.recall).comma();
  w.key("mean_recall").array(r.mean_recall).comma();
  w.key("per_class_recall").begin_object();
  bool first = true;
  for (const auto& [cls, vals] : r.per_class_recall) {
    if (!first) w.comma();
    first = false;
    w.key(std::to_string(cls).c_str()).array(vals);
  }
  w.end_object().comma();
  w.key("frames_evaluated").value(r.frames_evaluated).comma();
  w.key("frames_skipped_empty_gt").value(r.frames_skipped).comma();
  w.key("videos").value(r.videos);
  w.end_object();
}

}  // namespace

std::string report_to_json(const EvalRun& run, const EvalConfig& config) {
  check_invariants(run);
  JsonWriter w;
  w.begin_object();
  w.key("kind").value("vsgg-metric-report").comma();
  w.key("iou_threshold").value(config.iou_threshold).comma();
  // Conventions are part of the report so numbers are self-describing.
  w.key("averaging")
      .value("R@K averages per-frame recall over frames with ground truth; "
             "mR@K pools per-class hits over frames, then averages classes")
      .comma();
  w.key("with_constraint");
  report_json(w, run.with_constraint);
  w.comma();
  w.key("without_constraint");
  report_json(w, run.without_constraint);
  w.end_object();
  return w.take();
}

std::string report_to_csv(const EvalRun& run) {
  check_invariants(run);
  std::string out = "protocol,constraint";
  for (int k : run.with_constraint.ks)
    out += ",R@" + std::to_string(k) + ",mR@" + std::to_string(k);
  out += "\n";
  const auto row = [&](const MetricReport& r) {
    std::string line = std::string(protocol_name(r.protocol)) + "," +
                       constraint_name(r.mode);
    char buf[64];
    for (size_t i = 0; i < r.ks.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g", r.recall[i], r.mean_recall[i]);
      line += buf;
    }
    return line + "\n";
  };
  out += row(run.with_constraint);
  out += row(run.without_constraint);
  return out;
}

}  // namespace vsgg
