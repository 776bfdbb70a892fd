#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "vsgg/eval.hpp"

using namespace vsgg;

namespace {

SceneGraphPrediction random_prediction(int n_slots, int preds, int objs, Rng& rng) {
  SceneGraphPrediction p;
  p.n_slots = n_slots;
  for (int i = 0; i < n_slots; ++i) p.identities.push_back(i);
  p.predicate_scores.resize(static_cast<size_t>(n_slots) * n_slots);
  for (int i = 0; i < n_slots; ++i)
    for (int j = 0; j < n_slots; ++j) {
      if (i == j) continue;
      std::vector<double> s(preds);
      double sum = 0.0;
      for (double& v : s) {
        v = rng.uniform(0.001, 1.0);
        sum += v;
      }
      for (double& v : s) v /= sum;
      p.predicate_scores[static_cast<size_t>(i) * n_slots + j] = s;
    }
  for (int i = 0; i < n_slots; ++i) {
    std::vector<double> s(objs);
    double sum = 0.0;
    for (double& v : s) {
      v = rng.uniform(0.001, 1.0);
      sum += v;
    }
    for (double& v : s) v /= sum;
    p.object_scores.push_back(s);
    p.boxes.push_back(Box{rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6),
                          rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4)});
  }
  return p;
}

// Independent ranking: enumerate candidates, full sort with a separately
// written comparator.
std::vector<RankedTriplet> oracle_rank(const SceneGraphPrediction& p,
                                       ConstraintMode mode, bool pred_only) {
  std::vector<RankedTriplet> all;
  for (int i = 0; i < p.n_slots; ++i)
    for (int j = 0; j < p.n_slots; ++j) {
      if (i == j || p.pair_scores(i, j).empty()) continue;
      double factor = 1.0;
      if (!pred_only) {
        double ms = 0.0, mo = 0.0;
        for (double v : p.object_scores[i]) ms = std::max(ms, v);
        for (double v : p.object_scores[j]) mo = std::max(mo, v);
        factor = ms * mo;
      }
      const auto& scores = p.pair_scores(i, j);
      if (mode == ConstraintMode::kWith) {
        int best = 0;
        for (int c = 1; c < static_cast<int>(scores.size()); ++c)
          if (scores[c] > scores[best]) best = c;
        all.push_back({i, j, best, scores[best] * factor});
      } else {
        for (int c = 0; c < static_cast<int>(scores.size()); ++c)
          all.push_back({i, j, c, scores[c] * factor});
      }
    }
  std::sort(all.begin(), all.end(), [&](const RankedTriplet& a, const RankedTriplet& b) {
    if (a.score != b.score) return a.score > b.score;
    const int pa = a.subject_slot * p.n_slots + a.object_slot;
    const int pb = b.subject_slot * p.n_slots + b.object_slot;
    if (pa != pb) return pa < pb;
    return a.predicate < b.predicate;
  });
  return all;
}

// Straight-line reimplementation of the greedy matcher.
int oracle_hits(const std::vector<RankedTriplet>& ranked,
                const SceneGraphPrediction& pred, const FrameGroundTruth& gt, int k,
                Protocol protocol, double iou_thr) {
  std::vector<int> labels(pred.n_slots, -1);
  for (int s = 0; s < pred.n_slots; ++s) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(pred.object_scores[s].size()); ++c)
      if (pred.object_scores[s][c] > pred.object_scores[s][best]) best = c;
    labels[s] = best;
  }
  std::vector<bool> used(gt.triplets.size(), false);
  int hits = 0;
  for (int r = 0; r < std::min<int>(k, ranked.size()); ++r) {
    const RankedTriplet& c = ranked[r];
    for (size_t g = 0; g < gt.triplets.size(); ++g) {
      if (used[g]) continue;
      const auto& t = gt.triplets[g];
      if (c.predicate != t[1] || t[0] < 0 || t[2] < 0) continue;
      bool hit = false;
      if (protocol == Protocol::kPredCls)
        hit = c.subject_slot == t[0] && c.object_slot == t[2];
      else if (protocol == Protocol::kSgCls)
        hit = c.subject_slot == t[0] && c.object_slot == t[2] &&
              labels[t[0]] == gt.labels[t[0]] && labels[t[2]] == gt.labels[t[2]];
      else
        hit = labels[c.subject_slot] == gt.labels[t[0]] &&
              labels[c.object_slot] == gt.labels[t[2]] &&
              iou(pred.boxes[c.subject_slot], gt.boxes[t[0]]) > iou_thr &&
              iou(pred.boxes[c.object_slot], gt.boxes[t[2]]) > iou_thr;
      if (hit) {
        used[g] = true;
        ++hits;
        break;
      }
    }
  }
  return hits;
}

FrameGroundTruth random_gt(const SceneGraphPrediction& pred, int preds, int objs,
                           Rng& rng) {
  FrameGroundTruth gt;
  gt.labels.resize(pred.n_slots);
  gt.boxes.resize(pred.n_slots);
  for (int s = 0; s < pred.n_slots; ++s) {
    gt.labels[s] = rng.uniform_int(0, objs - 1);
    gt.boxes[s] = Box{rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6),
                      rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4)};
  }
  const int n_triplets = rng.uniform_int(1, 6);
  for (int t = 0; t < n_triplets; ++t) {
    const int s = rng.uniform_int(0, pred.n_slots - 1);
    int o = rng.uniform_int(0, pred.n_slots - 1);
    if (o == s) o = (o + 1) % pred.n_slots;
    gt.triplets.push_back({s, rng.uniform_int(0, preds - 1), o});
  }
  return gt;
}

}  // namespace

TEST_CASE("candidate counts: 2 pairs x 25 predicates") {
  Rng rng(1);
  SceneGraphPrediction p = random_prediction(2, 25, 4, rng);
  CHECK(rank_triplets(p, ConstraintMode::kWithout, true).size() == 50);
  CHECK(rank_triplets(p, ConstraintMode::kWith, true).size() == 2);
}

TEST_CASE("ranking equals the brute-force sort oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(2, 4);
    const SceneGraphPrediction p = random_prediction(n, 6, 5, rng);
    for (ConstraintMode mode : {ConstraintMode::kWith, ConstraintMode::kWithout})
      for (bool pred_only : {true, false}) {
        const auto got = rank_triplets(p, mode, pred_only);
        const auto expect = oracle_rank(p, mode, pred_only);
        REQUIRE(got.size() == expect.size());
        for (size_t i = 0; i < got.size(); ++i) {
          CHECK(got[i].subject_slot == expect[i].subject_slot);
          CHECK(got[i].object_slot == expect[i].object_slot);
          CHECK(got[i].predicate == expect[i].predicate);
          CHECK(got[i].score == expect[i].score);
        }
      }
  }
}

TEST_CASE("recall counts hits out of ground truth") {
  // 2 gt triplets, exactly one matched in the top-10 -> 0.5
  SceneGraphPrediction p;
  p.n_slots = 3;
  p.identities = {0, 1, 2};
  p.predicate_scores.resize(9);
  const auto set_pair = [&](int i, int j, std::vector<double> s) {
    p.predicate_scores[static_cast<size_t>(i) * 3 + j] = std::move(s);
  };
  set_pair(0, 1, {0.9, 0.02, 0.35});
  set_pair(1, 0, {0.1, 0.8, 0.1});
  set_pair(0, 2, {0.3, 0.3, 0.4});
  set_pair(2, 0, {0.3, 0.4, 0.3});
  set_pair(1, 2, {0.5, 0.2, 0.3});
  set_pair(2, 1, {0.2, 0.5, 0.3});
  for (int s = 0; s < 3; ++s) {
    p.object_scores.push_back({1.0, 0.0});
    p.boxes.push_back(Box{0.1, 0.1, 0.2, 0.2});
  }
  FrameGroundTruth gt;
  gt.labels = {0, 0, 0};
  gt.boxes = {Box{0.1, 0.1, 0.2, 0.2}, Box{0.1, 0.1, 0.2, 0.2}, Box{0.1, 0.1, 0.2, 0.2}};
  gt.triplets = {{0, 0, 1}, {0, 2, 1}};  // pair (0,1) twice with different predicates

  const auto ranked = rank_triplets(p, ConstraintMode::kWith, true);
  const FrameRecall r = recall_at_k(ranked, p, gt, 10, Protocol::kPredCls, 0.5);
  CHECK(r.gt_count == 2);
  CHECK(r.hits == 1);  // with-constraint keeps only class 0 for pair (0,1)
  CHECK(r.recall == doctest::Approx(0.5));

  // without constraint both fit in the top-10
  const auto ranked_wo = rank_triplets(p, ConstraintMode::kWithout, true);
  CHECK(recall_at_k(ranked_wo, p, gt, 10, Protocol::kPredCls, 0.5).recall ==
        doctest::Approx(1.0));
}

TEST_CASE("perfect predictions give recall 1 at K >= |gt|") {
  Rng rng(3);
  const int n = 4, preds = 6;
  SceneGraphPrediction p = random_prediction(n, preds, 4, rng);
  FrameGroundTruth gt = random_gt(p, preds, 4, rng);
  // overwrite pair scores so every gt triplet is the pair's top predicate
  for (const auto& t : gt.triplets) {
    auto& scores = p.predicate_scores[static_cast<size_t>(t[0]) * n + t[2]];
    for (double& v : scores) v = 0.001;
    scores[t[1]] = 1.0;
  }
  const auto ranked = rank_triplets(p, ConstraintMode::kWithout, true);
  const FrameRecall r =
      recall_at_k(ranked, p, gt, static_cast<int>(ranked.size()), Protocol::kPredCls, 0.5);
  CHECK(r.recall == doctest::Approx(1.0));
}

TEST_CASE("recall equals the exhaustive matcher on randomized frames") {
  Rng rng(4);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = rng.uniform_int(2, 4);
    const int preds = 5, objs = 3;
    SceneGraphPrediction p = random_prediction(n, preds, objs, rng);
    FrameGroundTruth gt = random_gt(p, preds, objs, rng);
    for (Protocol proto : {Protocol::kPredCls, Protocol::kSgCls, Protocol::kSgDet})
      for (ConstraintMode mode : {ConstraintMode::kWith, ConstraintMode::kWithout}) {
        const bool pred_only = proto == Protocol::kPredCls;
        const auto ranked = rank_triplets(p, mode, pred_only);
        for (int k : {1, 5, 10}) {
          const FrameRecall got = recall_at_k(ranked, p, gt, k, proto, 0.5);
          const int expect = oracle_hits(ranked, p, gt, k, proto, 0.5);
          CHECK(got.hits == expect);  // exact equality, no tolerance
        }
      }
  }
}

TEST_CASE("recall is monotone in K and scale-invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(2, 4);
    SceneGraphPrediction p = random_prediction(n, 5, 3, rng);
    const FrameGroundTruth gt = random_gt(p, 5, 3, rng);
    const auto ranked = rank_triplets(p, ConstraintMode::kWithout, false);
    double prev = 0.0;
    for (int k = 1; k <= static_cast<int>(ranked.size()); ++k) {
      const double r = recall_at_k(ranked, p, gt, k, Protocol::kSgCls, 0.5).recall;
      CHECK(r >= prev - 1e-12);
      prev = r;
    }

    // multiplying every score by a positive constant preserves the ranking
    SceneGraphPrediction scaled = p;
    for (auto& s : scaled.predicate_scores)
      for (double& v : s) v *= 7.25;
    const auto ranked_scaled = rank_triplets(scaled, ConstraintMode::kWithout, false);
    for (int k : {3, 7}) {
      CHECK(recall_at_k(ranked, p, gt, k, Protocol::kSgCls, 0.5).recall ==
            recall_at_k(ranked_scaled, scaled, gt, k, Protocol::kSgCls, 0.5).recall);
    }
  }
}

TEST_CASE("a SGDET hit implies SGCLS and PredCLS hits on gt slots") {
  // prediction aligned with gt on the same slots, correct labels and boxes
  SceneGraphPrediction p;
  p.n_slots = 2;
  p.identities = {0, 1};
  p.predicate_scores.resize(4);
  p.predicate_scores[1] = {0.1, 0.9};
  p.predicate_scores[2] = {0.6, 0.4};
  p.object_scores = {{0.9, 0.1}, {0.2, 0.8}};
  p.boxes = {Box{0.1, 0.1, 0.2, 0.2}, Box{0.5, 0.5, 0.2, 0.2}};

  FrameGroundTruth gt;
  gt.labels = {0, 1};
  gt.boxes = p.boxes;  // boxes substituted by gt
  gt.triplets = {{0, 1, 1}};

  for (Protocol proto : {Protocol::kSgDet, Protocol::kSgCls, Protocol::kPredCls}) {
    const auto ranked = rank_triplets(p, ConstraintMode::kWith, false);
    CHECK(recall_at_k(ranked, p, gt, 5, proto, 0.5).hits == 1);
  }
}

TEST_CASE("aggregate: single frame, unweighted class mean, pooled oracle") {
  // frame recalls assembled by hand
  FrameRecall f1;
  f1.recall = 0.5;
  f1.gt_count = 2;
  f1.hits = 1;
  f1.class_gt[0] = 1;
  f1.class_gt[1] = 1;
  f1.class_hits[0] = 1;

  MetricReport single = aggregate({{f1}}, {10}, Protocol::kPredCls,
                                  ConstraintMode::kWith, 1, 0);
  CHECK(single.recall[0] == doctest::Approx(0.5));

  // two classes, recalls 1.0 and 0.0, different frequencies -> mR = 0.5
  FrameRecall f2;
  f2.recall = 0.6;
  f2.gt_count = 5;
  f2.class_gt[0] = 1;
  f2.class_hits[0] = 1;
  f2.class_gt[1] = 4;  // all missed
  MetricReport two = aggregate({{f2}}, {10}, Protocol::kPredCls,
                               ConstraintMode::kWith, 1, 0);
  CHECK(two.mean_recall[0] == doctest::Approx(0.5));

  // pooled class tallies against a direct recomputation over a mini-dataset
  Rng rng(6);
  std::vector<std::vector<FrameRecall>> frames;
  std::map<int, int> want_gt, want_hits;
  double want_recall_sum = 0.0;
  int want_frames = 0;
  for (int f = 0; f < 20; ++f) {
    FrameRecall fr;
    fr.gt_count = rng.uniform_int(0, 4);
    for (int g = 0; g < fr.gt_count; ++g) {
      const int cls = rng.uniform_int(0, 3);
      fr.class_gt[cls] += 1;
      want_gt[cls] += 1;
      if (rng.uniform() < 0.5) {
        fr.class_hits[cls] += 1;
        fr.hits += 1;
        want_hits[cls] += 1;
      }
    }
    if (fr.gt_count > 0) {
      fr.recall = static_cast<double>(fr.hits) / fr.gt_count;
      want_recall_sum += fr.recall;
      ++want_frames;
    }
    frames.push_back({fr});
  }
  const MetricReport rep =
      aggregate(frames, {10}, Protocol::kSgCls, ConstraintMode::kWith, 1, 0);
  CHECK(rep.recall[0] == doctest::Approx(want_recall_sum / want_frames));
  double mr = 0.0;
  int classes = 0;
  for (const auto& [cls, cnt] : want_gt) {
    mr += static_cast<double>(want_hits.count(cls) ? want_hits[cls] : 0) / cnt;
    ++classes;
  }
  CHECK(rep.mean_recall[0] == doctest::Approx(mr / classes));
}

TEST_CASE("report writer enforces the run invariants and emits both formats") {
  // Confident predictions: each pair's top predicate carries 0.95 of the
  // mass, so every runner-up scores below any pair's top candidate and the
  // with-constraint list is a prefix of the without-constraint list (the
  // with <= without relation then holds at every K).
  Rng rng(7);
  std::vector<SceneGraphPrediction> preds;
  std::vector<FrameGroundTruth> gts;
  for (int f = 0; f < 12; ++f) {
    SceneGraphPrediction p = random_prediction(rng.uniform_int(2, 4), 5, 3, rng);
    for (auto& scores : p.predicate_scores) {
      if (scores.empty()) continue;
      int best = 0;
      for (int c = 1; c < static_cast<int>(scores.size()); ++c)
        if (scores[c] > scores[best]) best = c;
      double rest = 0.0;
      for (int c = 0; c < static_cast<int>(scores.size()); ++c)
        if (c != best) rest += scores[c];
      for (int c = 0; c < static_cast<int>(scores.size()); ++c)
        scores[c] = c == best ? 0.95 : 0.05 * scores[c] / rest;
    }
    p.video_id = f / 4;
    p.frame_index = f % 4;
    gts.push_back(random_gt(p, 5, 3, rng));
    preds.push_back(std::move(p));
  }
  EvalConfig cfg;
  cfg.ks = {5, 10, 20};
  const EvalRun run = evaluate_frames(preds, gts, Protocol::kSgCls, cfg);
  const std::string json = report_to_json(run, cfg);
  CHECK(json.find("\"with_constraint\"") != std::string::npos);
  CHECK(json.find("R@K averages per-frame recall") != std::string::npos);
  const std::string csv = report_to_csv(run);
  CHECK(csv.find("R@5") != std::string::npos);

  // a doctored run that violates monotonicity is rejected
  EvalRun bad = run;
  bad.with_constraint.recall = {0.9, 0.5, 0.4};
  CHECK_THROWS_AS(report_to_json(bad, cfg), std::logic_error);
  EvalRun worse = run;
  worse.with_constraint.recall = worse.without_constraint.recall;
  for (double& v : worse.with_constraint.recall) v += 0.5;
  CHECK_THROWS_AS(report_to_csv(worse), std::logic_error);
}

TEST_CASE("eval config validation") {
  EvalConfig cfg;
  cfg.ks = {10, 5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.ks = {5, 10};
  cfg.iou_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
