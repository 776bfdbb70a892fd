#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsgg/graph.hpp"
#include "vsgg/nn.hpp"
#include "vsgg/scene.hpp"

namespace vsgg {

enum class ReadoutMode { kRow, kElement };

inline const char* readout_mode_name(ReadoutMode m) {
  return m == ReadoutMode::kRow ? "row" : "element";
}

inline ReadoutMode readout_mode_from_name(const std::string& s) {
  if (s == "row") return ReadoutMode::kRow;
  if (s == "element") return ReadoutMode::kElement;
  throw std::invalid_argument("unknown readout mode: " + s);
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace nn {

// Two affine layers with a rectifier, matching the 1x1-conv projector heads
// applied to per-entry vectors. Stateless apply; backward recomputes the
// hidden activation so the layer can serve many entries per frame.
template <typename T>
struct Mlp2 {
  Linear<T> fc1, fc2;

  void build(const std::string& name, int in, int hidden, int out, Rng& rng) {
    fc1.build(name + ".fc1", in, hidden, rng);
    fc2.build(name + ".fc2", hidden, out, rng);
  }

  void collect(ParamRefs<T>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }

  std::vector<T> apply(const std::vector<T>& x) const {
    std::vector<T> h = fc1.apply(x);
    for (T& v : h) v = v > T{0} ? v : T{0};
    return fc2.apply(h);
  }

  std::vector<T> accumulate(const std::vector<T>& x, const std::vector<T>& gy) {
    const std::vector<T> pre = fc1.apply(x);
    std::vector<T> h = pre;
    for (T& v : h) v = v > T{0} ? v : T{0};
    std::vector<T> gh = fc2.accumulate(h, gy);
    for (size_t i = 0; i < gh.size(); ++i)
      if (pre[i] <= T{0}) gh[i] = T{0};
    return fc1.accumulate(x, gh);
  }
};

}  // namespace nn

struct HeadsConfig {
  int dim = 128;  // entry width D
  int predicate_classes = 25;
  int object_classes = 35;
  int hidden = 256;
  ReadoutMode mode = ReadoutMode::kRow;
  uint64_t init_seed = 2;
};

// Decoders over the denoised tensor: per-pair predicate classifier, and
// row-aggregated object classifier / box regressor.
template <typename T>
class ReadoutHeads {
 public:
  explicit ReadoutHeads(const HeadsConfig& config) : cfg_(config) {
    if (cfg_.dim < 1 || cfg_.predicate_classes < 1 || cfg_.object_classes < 1 ||
        cfg_.hidden < 1)
      throw std::invalid_argument("readout heads: non-positive dimension");
    Rng rng = Rng::from_key(cfg_.init_seed, {kTagInit});
    f_pred_.build("heads.pred", cfg_.dim, cfg_.hidden, cfg_.predicate_classes, rng);
    f_obj_.build("heads.obj", cfg_.dim, cfg_.hidden, cfg_.object_classes, rng);
    f_box_.build("heads.box", cfg_.dim, cfg_.hidden, 4, rng);
    f_pred_.collect(params_);
    f_obj_.collect(params_);
    f_box_.collect(params_);
  }

  const HeadsConfig& config() const { return cfg_; }
  nn::ParamRefs<T>& params() { return params_; }
  void zero_grad() { nn::zero_grads(params_); }

  nn::Mlp2<T>& f_pred() { return f_pred_; }
  nn::Mlp2<T>& f_obj() { return f_obj_; }
  nn::Mlp2<T>& f_box() { return f_box_; }

  std::vector<T> entry_of(const AdjacencyTensor<T>& a, int i, int j) const {
    std::vector<T> e(cfg_.dim);
    for (int c = 0; c < cfg_.dim; ++c) e[c] = a.data.at3(i, j, c);
    return e;
  }

  // Row aggregate for subject i over valid off-diagonal entries: mean in row
  // mode, the first valid entry in element mode. Throws when the row has no
  // valid partner.
  std::vector<T> aggregate_row(const AdjacencyTensor<T>& a, int i) const {
    if (i < 0 || i >= a.valid_count)
      throw std::invalid_argument("aggregate_row: slot outside valid block");
    std::vector<T> agg(cfg_.dim, T{0});
    int count = 0;
    for (int j = 0; j < a.valid_count; ++j) {
      if (j == i) continue;
      if (cfg_.mode == ReadoutMode::kElement) {
        for (int c = 0; c < cfg_.dim; ++c) agg[c] = a.data.at3(i, j, c);
        return agg;
      }
      for (int c = 0; c < cfg_.dim; ++c)
        agg[c] += a.data.at3(i, j, c);
      ++count;
    }
    if (count == 0)
      throw std::invalid_argument("aggregate_row: no valid entries for slot " +
                                  std::to_string(i));
    for (T& v : agg) v = static_cast<T>(static_cast<double>(v) / count);
    return agg;
  }

  std::vector<double> predicate_distribution(const std::vector<T>& entry) const {
    const std::vector<T> logits = f_pred_.apply(entry);
    std::vector<double> lg(logits.begin(), logits.end());
    return softmax(lg);
  }

  std::vector<double> object_distribution(const AdjacencyTensor<T>& a, int i) const {
    const std::vector<T> logits = f_obj_.apply(aggregate_row(a, i));
    std::vector<double> lg(logits.begin(), logits.end());
    return softmax(lg);
  }

  Box regress_box(const AdjacencyTensor<T>& a, int i) const {
    const std::vector<T> z = f_box_.apply(aggregate_row(a, i));
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    return Box{sig(static_cast<double>(z[0])), sig(static_cast<double>(z[1])),
               sig(static_cast<double>(z[2])), sig(static_cast<double>(z[3]))};
  }

 private:
  HeadsConfig cfg_;
  nn::Mlp2<T> f_pred_, f_obj_, f_box_;
  nn::ParamRefs<T> params_;
};

// Spec'd op surfaces over the heads.
template <typename T>
std::vector<double> predict_predicate(const ReadoutHeads<T>& heads,
                                      const std::vector<T>& entry) {
  return heads.predicate_distribution(entry);
}

template <typename T>
std::vector<double> predict_object(const ReadoutHeads<T>& heads,
                                   const AdjacencyTensor<T>& a, int row) {
  return heads.object_distribution(a, row);
}

inline double smooth_l1(double d) {
  const double ad = std::abs(d);
  return ad < 1.0 ? 0.5 * d * d : ad - 0.5;
}

inline double smooth_l1_grad(double d) {
  if (d > 1.0) return 1.0;
  if (d < -1.0) return -1.0;
  return d;
}

struct Stage2Loss {
  double total = 0.0;
  double pred_cls = 0.0;
  double obj_cls = 0.0;
  double box_reg = 0.0;
  int pred_terms = 0;
  int obj_terms = 0;
  int skipped = 0;  // gt terms without an aligned slot
};

// Stage-2 objective L = L_pred_cls + L_obj_cls + 0.5 L_box_reg over one frame.
// Predicate CE runs over ground-truth pairs, object CE and smooth-L1 box
// regression over valid slots; A^{t,0} is treated as a constant, so gradients
// reach only the heads.
template <typename T>
Stage2Loss stage2_loss(ReadoutHeads<T>& heads, const AdjacencyTensor<T>& a0,
                       const GroundTruthGraph& gt, bool backprop = false) {
  const HeadsConfig& cfg = heads.config();
  Stage2Loss out;

  // identity -> slot
  std::vector<int> slot_of(gt.boxes.size(), -1);
  for (int s = 0; s < a0.valid_count; ++s) {
    const int ident = a0.slot_map[s];
    if (ident >= 0 && ident < static_cast<int>(slot_of.size())) slot_of[ident] = s;
  }

  struct PredTerm {
    std::vector<T> entry;
    std::vector<double> probs;
    int label;
  };
  std::vector<PredTerm> pred_terms;
  for (const auto& t : gt.triplets) {
    const int si = slot_of[t[0]];
    const int oi = slot_of[t[2]];
    if (si < 0 || oi < 0) {
      ++out.skipped;
      continue;
    }
    PredTerm term;
    term.entry = heads.entry_of(a0, si, oi);
    term.probs = heads.predicate_distribution(term.entry);
    term.label = t[1];
    out.pred_cls += -std::log(std::max(term.probs[term.label], 1e-300));
    pred_terms.push_back(std::move(term));
  }
  out.pred_terms = static_cast<int>(pred_terms.size());
  if (out.pred_terms > 0) out.pred_cls /= out.pred_terms;

  struct SlotTerm {
    std::vector<T> agg;
    std::vector<double> obj_probs;
    int label;
    std::vector<T> box_z;
    Box gt_box;
  };
  std::vector<SlotTerm> slot_terms;
  for (int ident = 0; ident < static_cast<int>(gt.labels.size()); ++ident) {
    const int s = slot_of[ident];
    if (s < 0) {
      ++out.skipped;
      continue;
    }
    SlotTerm term;
    term.agg = heads.aggregate_row(a0, s);
    const std::vector<T> logits = heads.f_obj().apply(term.agg);
    std::vector<double> lg(logits.begin(), logits.end());
    term.obj_probs = softmax(lg);
    term.label = gt.labels[ident];
    term.box_z = heads.f_box().apply(term.agg);
    term.gt_box = gt.boxes[ident];
    out.obj_cls += -std::log(std::max(term.obj_probs[term.label], 1e-300));
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double pb[4] = {sig(term.box_z[0]), sig(term.box_z[1]), sig(term.box_z[2]),
                          sig(term.box_z[3])};
    const double gb[4] = {term.gt_box.x, term.gt_box.y, term.gt_box.w, term.gt_box.h};
    for (int c = 0; c < 4; ++c) out.box_reg += smooth_l1(pb[c] - gb[c]);
    slot_terms.push_back(std::move(term));
  }
  out.obj_terms = static_cast<int>(slot_terms.size());
  if (out.obj_terms > 0) {
    out.obj_cls /= out.obj_terms;
    out.box_reg /= out.obj_terms * 4;
  }

  out.total = out.pred_cls + out.obj_cls + 0.5 * out.box_reg;

  if (backprop) {
    for (const PredTerm& term : pred_terms) {
      std::vector<T> dlogits(cfg.predicate_classes);
      for (int c = 0; c < cfg.predicate_classes; ++c)
        dlogits[c] = static_cast<T>(
            (term.probs[c] - (c == term.label ? 1.0 : 0.0)) / out.pred_terms);
      heads.f_pred().accumulate(term.entry, dlogits);
    }
    for (const SlotTerm& term : slot_terms) {
      std::vector<T> dlogits(cfg.object_classes);
      for (int c = 0; c < cfg.object_classes; ++c)
        dlogits[c] = static_cast<T>(
            (term.obj_probs[c] - (c == term.label ? 1.0 : 0.0)) / out.obj_terms);
      heads.f_obj().accumulate(term.agg, dlogits);

      std::vector<T> dz(4);
      auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
      const double gb[4] = {term.gt_box.x, term.gt_box.y, term.gt_box.w, term.gt_box.h};
      for (int c = 0; c < 4; ++c) {
        const double s = sig(static_cast<double>(term.box_z[c]));
        // 0.5 is the stage-2 box weight from the training objective.
        dz[c] = static_cast<T>(0.5 * smooth_l1_grad(s - gb[c]) * s * (1.0 - s) /
                               (out.obj_terms * 4));
      }
      heads.f_box().accumulate(term.agg, dz);
    }
  }
  return out;
}

}  // namespace vsgg
