#include "vsgg/temporal.hpp"

#include <algorithm>
#include <cmath>

namespace vsgg {

void MotionMemory::record(int slot, int frame_index, double cx, double cy) {
  if (slot < 0 || slot >= slot_count())
    throw std::invalid_argument("motion memory: slot out of range");
  auto& buf = slots_[slot];
  if (!buf.empty() && buf.back().frame_index >= frame_index)
    throw std::invalid_argument("motion memory: frame indices must increase");
  if (static_cast<int>(buf.size()) == capacity_) buf.erase(buf.begin());
  buf.push_back(Entry{frame_index, cx, cy});
}

std::optional<MotionMemory::Entry> MotionMemory::at(int slot, int frame_index) const {
  if (slot < 0 || slot >= slot_count()) return std::nullopt;
  for (const Entry& e : slots_[slot])
    if (e.frame_index == frame_index) return e;
  return std::nullopt;
}

std::optional<MotionMemory::Entry> MotionMemory::before(int slot, int frame_index) const {
  if (slot < 0 || slot >= slot_count()) return std::nullopt;
  std::optional<Entry> best;
  for (const Entry& e : slots_[slot])
    if (e.frame_index < frame_index && (!best || e.frame_index > best->frame_index))
      best = e;
  return best;
}

SpeedSample approach_speed(const MotionMemory& memory, int slot_i, int slot_j,
                           int frame_index) {
  if (slot_i == slot_j) return SpeedSample{0.0, false};  // self distance stays 0
  const auto now_i = memory.at(slot_i, frame_index);
  const auto now_j = memory.at(slot_j, frame_index);
  if (!now_i || !now_j) return SpeedSample{0.0, true};

  // Most recent earlier frame recorded for both slots.
  const auto prev_i = memory.before(slot_i, frame_index);
  const auto prev_j = memory.before(slot_j, frame_index);
  if (!prev_i || !prev_j) return SpeedSample{0.0, true};
  const int shared = std::min(prev_i->frame_index, prev_j->frame_index);
  const auto pi = memory.at(slot_i, shared);
  const auto pj = memory.at(slot_j, shared);
  if (!pi || !pj) return SpeedSample{0.0, true};

  const double d_now = std::hypot(now_i->cx - now_j->cx, now_i->cy - now_j->cy);
  const double d_prev = std::hypot(pi->cx - pj->cx, pi->cy - pj->cy);
  const double elapsed = (frame_index - shared) * memory.frame_interval();
  if (elapsed <= 0.0) return SpeedSample{0.0, true};
  return SpeedSample{(d_now - d_prev) / elapsed, false};
}

Tensor<double> build_speed_matrix(const MotionMemory& memory, int valid_count, int n_max,
                                  int frame_index) {
  Tensor<double> v({n_max, n_max});
  const int n = std::min(valid_count, n_max);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      v.at2(i, j) = approach_speed(memory, i, j, frame_index).value;
  return v;
}

namespace {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

SlotAssignment detect_new_objects(const std::vector<std::vector<double>>& features_now,
                                  const std::vector<std::vector<double>>& features_prev,
                                  double threshold) {
  const int n_now = static_cast<int>(features_now.size());
  const int n_prev = static_cast<int>(features_prev.size());
  SlotAssignment out;
  out.slot_of_object.assign(n_now, -1);

  if (n_prev == 0) {  // empty prior frame: everything is new
    for (int i = 0; i < n_now; ++i) out.new_objects.push_back(i);
    return out;
  }

  struct Cand {
    double sim;
    int obj;
    int slot;
  };
  std::vector<Cand> cands;
  std::vector<double> best_sim(n_now, -1.0);
  for (int o = 0; o < n_now; ++o)
    for (int s = 0; s < n_prev; ++s) {
      const double sim = cosine_similarity(features_now[o], features_prev[s]);
      best_sim[o] = std::max(best_sim[o], sim);
      if (sim >= threshold) cands.push_back(Cand{sim, o, s});
    }

  // Greedy by descending similarity; ties prefer the lower slot index, then
  // the lower object index, keeping the order fully deterministic.
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.slot != b.slot) return a.slot < b.slot;
    return a.obj < b.obj;
  });
  std::vector<bool> slot_used(n_prev, false);
  for (const Cand& c : cands) {
    if (slot_used[c.slot] || out.slot_of_object[c.obj] != -1) continue;
    out.slot_of_object[c.obj] = c.slot;
    slot_used[c.slot] = true;
  }
  for (int o = 0; o < n_now; ++o)
    if (out.slot_of_object[o] == -1) out.new_objects.push_back(o);
  return out;
}

}  // namespace vsgg
