#pragma once

#include <string>
#include <vector>

#include "vsgg/geometry.hpp"

namespace vsgg {

enum class PredicateGroup { kAttention, kSpatial, kContact };

struct PredicateDef {
  int id = 0;
  std::string name;
  PredicateGroup group = PredicateGroup::kSpatial;
  bool needs_motion = false;  // rule reads the previous frame's boxes
  bool skewable = false;      // long-tail knob narrows this rule's window
};

const char* group_name(PredicateGroup g);

// Fixed, versioned predicate taxonomy. A config with predicate_classes = P
// activates the first P entries; ids are manifest positions.
const std::vector<PredicateDef>& predicate_taxonomy();

// Thresholds behind the geometric rules. Echoed into the dataset manifest so
// stored triplets can be re-derived exactly from stored boxes.
// Window sizes are tuned so a typical pair triggers one or two predicates,
// not half the taxonomy; heavily overlapping windows saturate recall@K with
// near-duplicate triplets.
struct RuleParams {
  double side_margin = 0.18;       // left/right/above/below center margin
  double approach_margin = 0.005;  // minimum distance change for approaching/receding
  double near_distance = 0.18;
  double far_distance = 0.80;
  double touch_iou = 0.12;         // touching: 0 < iou <= touch_iou
  double cover_iou = 0.40;         // covering: iou > cover_iou
  double align_window = 0.05;      // same_row / same_column center window
  double size_ratio = 2.0;         // larger/smaller area ratio
  double heading_cos = 0.80;       // watching/following direction alignment
  double min_speed = 0.01;         // units/s below which an object counts as still
  double speed_match = 0.01;       // moving_with relative-velocity window
  double speed_gap = 0.02;         // faster_than speed difference
  double meet_distance = 0.20;     // meeting: approaching within this range
  double pass_speed = 0.05;        // passing_by relative speed
  double stack_window = 0.05;      // stacked_on horizontal alignment
  double skew = 0.0;               // long-tail strength in [0, 1]
};

// Pairwise geometry snapshot handed to the rules. prev_* is unavailable for
// the first frame or freshly entered objects.
struct PairGeometry {
  Box subj;
  Box obj;
  bool has_prev = false;
  Box subj_prev;
  Box obj_prev;
  double dt = 1.0;  // seconds between frames
};

// Evaluates one predicate rule for an ordered (subject, object) pair.
bool predicate_holds(int predicate_id, const PairGeometry& g, const RuleParams& p);

// All active predicates that hold for the pair, ascending by id.
std::vector<int> active_predicates(const PairGeometry& g, const RuleParams& p,
                                   int num_classes);

// Ids < this bound ignore the skew knob; the generator's per-frame coverage
// guarantee is checked against these classes only, which keeps the sampled
// geometry invariant across skew settings.
inline constexpr int kUnskewedClassCount = 8;

}  // namespace vsgg
