#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vsgg/geometry.hpp"
#include "vsgg/scene.hpp"

namespace vsgg {

enum class Protocol { kPredCls, kSgCls, kSgDet };
enum class ConstraintMode { kWith, kWithout };

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& s);
const char* constraint_name(ConstraintMode m);

struct EvalConfig {
  std::vector<int> ks = {10, 20, 50};
  double iou_threshold = 0.5;

  void validate() const;
};

// Decoded per-frame prediction in slot space.
struct SceneGraphPrediction {
  int video_id = 0;
  int frame_index = 0;
  int n_slots = 0;
  std::vector<int> identities;  // slot -> persistent identity
  // Ordered-pair predicate distributions, indexed (i * n_slots + j); the
  // diagonal rows stay empty.
  std::vector<std::vector<double>> predicate_scores;
  std::vector<std::vector<double>> object_scores;  // per slot
  std::vector<Box> boxes;                          // per slot

  const std::vector<double>& pair_scores(int i, int j) const {
    return predicate_scores[static_cast<size_t>(i) * n_slots + j];
  }
};

// Ground truth for one frame, mapped into the prediction's slot space
// (slot -1 when an identity has no slot).
struct FrameGroundTruth {
  std::vector<std::array<int, 3>> triplets;  // (subject_slot, predicate, object_slot)
  std::vector<int> labels;                   // per slot, -1 unknown
  std::vector<Box> boxes;                    // per slot, ground-truth boxes
};

FrameGroundTruth map_ground_truth(const GroundTruthGraph& gt,
                                  const SceneGraphPrediction& pred);

struct RankedTriplet {
  int subject_slot = 0;
  int object_slot = 0;
  int predicate = 0;
  double score = 0.0;
};

// Candidate ranking. With-constraint keeps only the top predicate per
// ordered pair; without-constraint enumerates every (pair, predicate).
// Scores compose the subject/object label probabilities unless
// `predicate_score_only` (the PredCLS convention). `pair_filter`, when given,
// restricts candidates to those ordered pairs (PredCLS ranks ground-truth
// pairs only). Ties break on (pair index, predicate id).
std::vector<RankedTriplet> rank_triplets(
    const SceneGraphPrediction& pred, ConstraintMode mode, bool predicate_score_only,
    const std::set<std::pair<int, int>>* pair_filter = nullptr);

struct FrameRecall {
  double recall = 0.0;
  int gt_count = 0;
  int hits = 0;
  std::map<int, int> class_gt;    // predicate class -> gt instances
  std::map<int, int> class_hits;  // predicate class -> matched instances
};

// Greedy one-to-one matching in rank order over the top-k candidates.
// PredCLS requires the exact gt pair; SGCLS additionally checks predicted
// labels; SGDET checks labels plus IoU > threshold against gt boxes.
FrameRecall recall_at_k(const std::vector<RankedTriplet>& ranked,
                        const SceneGraphPrediction& pred, const FrameGroundTruth& gt,
                        int k, Protocol protocol, double iou_threshold);

struct MetricReport {
  Protocol protocol = Protocol::kPredCls;
  ConstraintMode mode = ConstraintMode::kWith;
  std::vector<int> ks;
  std::vector<double> recall;       // R@K, per-frame average
  std::vector<double> mean_recall;  // mR@K, unweighted over classes with gt
  std::map<int, std::vector<double>> per_class_recall;  // class -> per-K recall
  int frames_evaluated = 0;
  int frames_skipped = 0;  // empty ground truth
  int videos = 0;
};

// Per-frame recall averaging for R@K; pooled class tallies for mR@K.
MetricReport aggregate(const std::vector<std::vector<FrameRecall>>& per_frame_per_k,
                       const std::vector<int>& ks, Protocol protocol,
                       ConstraintMode mode, int videos, int frames_skipped);

// Runs ranking + recall over a stream of (prediction, ground truth) frames
// for one protocol and both constraint modes.
struct EvalRun {
  MetricReport with_constraint;
  MetricReport without_constraint;
};

EvalRun evaluate_frames(const std::vector<SceneGraphPrediction>& preds,
                        const std::vector<FrameGroundTruth>& gts, Protocol protocol,
                        const EvalConfig& config);

// Serializes reports as JSON (plus an optional CSV table) and enforces the
// run invariants: R@K non-decreasing in K and with-constraint <= without
// at every K. Violations throw std::logic_error.
std::string report_to_json(const EvalRun& run, const EvalConfig& config);
std::string report_to_csv(const EvalRun& run);

}  // namespace vsgg
