#include "vsgg/taxonomy.hpp"

#include <cmath>
#include <stdexcept>

namespace vsgg {
namespace {

struct Velocity {
  double vx = 0.0;
  double vy = 0.0;
  double speed() const { return std::sqrt(vx * vx + vy * vy); }
};

Velocity velocity_of(const Box& now, const Box& prev, double dt) {
  return Velocity{(now.cx() - prev.cx()) / dt, (now.cy() - prev.cy()) / dt};
}

double cosine(double ax, double ay, double bx, double by) {
  const double na = std::sqrt(ax * ax + ay * ay);
  const double nb = std::sqrt(bx * bx + by * by);
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return (ax * bx + ay * by) / (na * nb);
}

// Skew strictness for class c: 0 for head classes, ramping to `skew` for the
// last manifest entry. Every skewable rule below shrinks its trigger window
// monotonically in this value, so trigger sets are nested across skews.
double strictness(int id, double skew) {
  if (id < kUnskewedClassCount) return 0.0;
  const int total = static_cast<int>(predicate_taxonomy().size());
  const double rank = static_cast<double>(id - kUnskewedClassCount + 1) /
                      static_cast<double>(total - kUnskewedClassCount);
  return skew * rank;
}

}  // namespace

const char* group_name(PredicateGroup g) {
  switch (g) {
    case PredicateGroup::kAttention: return "attention";
    case PredicateGroup::kSpatial: return "spatial";
    case PredicateGroup::kContact: return "contact";
  }
  return "unknown";
}

const std::vector<PredicateDef>& predicate_taxonomy() {
  static const std::vector<PredicateDef> table = {
      {0, "approaching", PredicateGroup::kAttention, true, false},
      {1, "receding", PredicateGroup::kAttention, true, false},
      {2, "left_of", PredicateGroup::kSpatial, false, false},
      {3, "right_of", PredicateGroup::kSpatial, false, false},
      {4, "above", PredicateGroup::kSpatial, false, false},
      {5, "below", PredicateGroup::kSpatial, false, false},
      {6, "overlapping", PredicateGroup::kSpatial, false, false},
      {7, "near", PredicateGroup::kSpatial, false, false},
      {8, "far_from", PredicateGroup::kSpatial, false, true},
      {9, "inside", PredicateGroup::kContact, false, true},
      {10, "surrounding", PredicateGroup::kContact, false, true},
      {11, "touching", PredicateGroup::kContact, false, true},
      {12, "covering", PredicateGroup::kContact, false, true},
      {13, "same_row", PredicateGroup::kSpatial, false, true},
      {14, "same_column", PredicateGroup::kSpatial, false, true},
      {15, "larger_than", PredicateGroup::kAttention, false, true},
      {16, "smaller_than", PredicateGroup::kAttention, false, true},
      {17, "watching", PredicateGroup::kAttention, true, true},
      {18, "following", PredicateGroup::kAttention, true, true},
      {19, "moving_with", PredicateGroup::kAttention, true, true},
      {20, "faster_than", PredicateGroup::kAttention, true, true},
      {21, "chasing", PredicateGroup::kContact, true, true},
      {22, "meeting", PredicateGroup::kContact, true, true},
      {23, "passing_by", PredicateGroup::kContact, true, true},
      {24, "stacked_on", PredicateGroup::kContact, false, true},
  };
  return table;
}

bool predicate_holds(int id, const PairGeometry& g, const RuleParams& p) {
  const auto& defs = predicate_taxonomy();
  if (id < 0 || id >= static_cast<int>(defs.size()))
    throw std::invalid_argument("predicate_holds: unknown predicate id " +
                                std::to_string(id));
  if (defs[id].needs_motion && !g.has_prev) return false;

  const double s = strictness(id, p.skew);
  const double d = center_distance(g.subj, g.obj);
  const double ov = iou(g.subj, g.obj);

  // Motion quantities (only touched when has_prev holds).
  double dd = 0.0;
  Velocity vi, vj;
  if (g.has_prev) {
    dd = d - center_distance(g.subj_prev, g.obj_prev);
    vi = velocity_of(g.subj, g.subj_prev, g.dt);
    vj = velocity_of(g.obj, g.obj_prev, g.dt);
  }

  switch (id) {
    case 0:  // approaching
      return dd < -p.approach_margin;
    case 1:  // receding
      return dd > p.approach_margin;
    case 2:  // left_of
      return g.subj.cx() < g.obj.cx() - p.side_margin;
    case 3:  // right_of
      return g.subj.cx() > g.obj.cx() + p.side_margin;
    case 4:  // above
      return g.subj.cy() < g.obj.cy() - p.side_margin;
    case 5:  // below
      return g.subj.cy() > g.obj.cy() + p.side_margin;
    case 6:  // overlapping
      return ov > 0.0;
    case 7:  // near
      return d < p.near_distance;
    case 8:  // far_from
      return d > p.far_distance + 0.3 * s;
    case 9:  // inside
      return contains(g.obj, g.subj, 0.005 + 0.05 * s);
    case 10:  // surrounding
      return contains(g.subj, g.obj, 0.005 + 0.05 * s);
    case 11:  // touching
      return ov > 0.0 && ov <= p.touch_iou * (1.0 - 0.9 * s);
    case 12:  // covering
      return ov > p.cover_iou + 0.4 * s;
    case 13:  // same_row
      return std::abs(g.subj.cy() - g.obj.cy()) < p.align_window * (1.0 - 0.9 * s);
    case 14:  // same_column
      return std::abs(g.subj.cx() - g.obj.cx()) < p.align_window * (1.0 - 0.9 * s);
    case 15:  // larger_than
      return g.subj.area() > (p.size_ratio + 3.0 * s) * g.obj.area();
    case 16:  // smaller_than
      return g.obj.area() > (p.size_ratio + 3.0 * s) * g.subj.area();
    case 17:  // watching: subject heading toward the object
      return vi.speed() > p.min_speed &&
             cosine(vi.vx, vi.vy, g.obj.cx() - g.subj.cx(), g.obj.cy() - g.subj.cy()) >
                 p.heading_cos + 0.15 * s;
    case 18:  // following: aligned headings, subject behind along its velocity
      return vi.speed() > p.min_speed && vj.speed() > p.min_speed &&
             cosine(vi.vx, vi.vy, vj.vx, vj.vy) > p.heading_cos + 0.15 * s &&
             cosine(vi.vx, vi.vy, g.obj.cx() - g.subj.cx(), g.obj.cy() - g.subj.cy()) > 0.0;
    case 19: {  // moving_with
      const double rel = std::sqrt((vi.vx - vj.vx) * (vi.vx - vj.vx) +
                                   (vi.vy - vj.vy) * (vi.vy - vj.vy));
      return vi.speed() > p.min_speed && vj.speed() > p.min_speed &&
             rel < p.speed_match * (1.0 - 0.9 * s);
    }
    case 20:  // faster_than
      return vi.speed() > vj.speed() + p.speed_gap + 0.05 * s;
    case 21:  // chasing = watching while closing in
      return predicate_holds(17, g, p) && dd < -p.approach_margin;
    case 22:  // meeting
      return dd < -p.approach_margin && d < p.meet_distance * (1.0 - 0.9 * s);
    case 23: {  // passing_by
      const double rel = std::sqrt((vi.vx - vj.vx) * (vi.vx - vj.vx) +
                                   (vi.vy - vj.vy) * (vi.vy - vj.vy));
      return g.has_prev && d < p.near_distance && ov == 0.0 &&
             rel > p.pass_speed + 0.1 * s;
    }
    case 24:  // stacked_on
      return ov > 0.0 &&
             std::abs(g.subj.cx() - g.obj.cx()) < p.stack_window * (1.0 - 0.9 * s) &&
             g.subj.cy() > g.obj.cy();
  }
  return false;
}

std::vector<int> active_predicates(const PairGeometry& g, const RuleParams& p,
                                   int num_classes) {
  const int total = static_cast<int>(predicate_taxonomy().size());
  if (num_classes < 1 || num_classes > total)
    throw std::invalid_argument("active_predicates: predicate_classes out of range");
  std::vector<int> out;
  for (int id = 0; id < num_classes; ++id)
    if (predicate_holds(id, g, p)) out.push_back(id);
  return out;
}

}  // namespace vsgg
