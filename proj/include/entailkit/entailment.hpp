#pragma once

#include <optional>
#include <string>
#include <vector>

#include "entailkit/encoders.hpp"

namespace entailkit {

// Input forms. The model is trained on the unified multi-modal form: textual
// entailment carries a plain black placeholder image, visual entailment an
// empty premise string.
enum class TaskForm { TEXT_TEXT, IMAGE_TEXT, IMAGE_TEXT_TEXT };

struct Indicators {
  bool t = false, v = false, m = false;
};

inline Indicators indicators_for(TaskForm form) {
  switch (form) {
    case TaskForm::TEXT_TEXT: return {true, false, false};
    case TaskForm::IMAGE_TEXT: return {false, true, false};
    case TaskForm::IMAGE_TEXT_TEXT: return {true, true, true};
  }
  return {};
}

struct EntailmentExample {
  std::optional<PatchGrid> premise_image;  // empty => black placeholder
  std::string premise_text;
  std::string hypothesis;
  int label = 0;  // 1 = entailment
  TaskForm task_form = TaskForm::IMAGE_TEXT_TEXT;

  Indicators indicators() const { return indicators_for(task_form); }

  void validate() const {
    if (label != 0 && label != 1) throw ValidationError("EntailmentExample: label not binary");
    if (task_form == TaskForm::TEXT_TEXT && premise_image &&
        !std::all_of(premise_image->pixels.begin(), premise_image->pixels.end(),
                     [](double v) { return v == 0.0; }))
      throw ValidationError("EntailmentExample: TEXT_TEXT requires the black placeholder image");
    if (task_form == TaskForm::IMAGE_TEXT && !premise_text.empty())
      throw ValidationError("EntailmentExample: IMAGE_TEXT requires an empty premise text");
    if (task_form != TaskForm::TEXT_TEXT && !premise_image)
      throw ValidationError("EntailmentExample: missing premise image");
  }

};

enum class Decision { ENTAIL, NON_ENTAIL };

struct EntailmentVerdict {
  double p_entail = 0.0;
  Decision decision = Decision::NON_ENTAIL;
  double threshold = 0.5;
  std::string branch;
};

inline EntailmentVerdict make_verdict(double p_entail, double threshold,
                                      const std::string& branch) {
  return {p_entail, p_entail >= threshold ? Decision::ENTAIL : Decision::NON_ENTAIL, threshold,
          branch};
}

// ---- model ----

inline ParamSet init_entailment_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamSet params(seed);
  Rng rng(seed);
  init_text_encoder(params, "bert", cfg, rng);
  init_image_encoder(params, "vit", cfg, rng);
  init_cross_encoder(params, "cross", cfg, rng);
  std::size_t d = cfg.hidden_dim;
  detail::init_affine(params, "gate.t", d, d, rng);
  detail::init_affine(params, "gate.v", d, d, rng);
  for (const char* head : {"head_t", "head_v", "head_m"}) {
    detail::init_affine(params, std::string(head) + ".1", d, d, rng);
    detail::init_affine(params, std::string(head) + ".2", d, d, rng);
    detail::init_affine(params, std::string(head) + ".out", d, 2, rng);
  }
  return params;
}

// Two hidden ReLU layers, then a 2-way softmax.
inline Var classify_head(Var h, ParamSet& params, const std::string& prefix) {
  Var x = relu(detail::affine_p(params, prefix + ".1", h));
  x = relu(detail::affine_p(params, prefix + ".2", x));
  return softmax_rows(detail::affine_p(params, prefix + ".out", x));
}

// Gate unit: h_m = sigmoid(Wt ht + bt) * ht + sigmoid(Wv hv + bv) * hv,
// products element-wise.
inline Var gate_fuse(Var h_t, Var h_v, ParamSet& params) {
  Var g_t = sigmoid(detail::affine_p(params, "gate.t", h_t));
  Var g_v = sigmoid(detail::affine_p(params, "gate.v", h_v));
  return add(mul(g_t, h_t), mul(g_v, h_v));
}

struct ExampleForward {
  Var h_t, h_v, h_m;
  Var p_t, p_v, p_m;  // softmax pairs (p_non_entail, p_entail)
};

struct BranchSelect {
  bool textual = true, visual = true, multimodal = true;
};

// Runs the unified graph for one example. Branches can be skipped when their
// loss is indicator-gated off; gradients are identical either way.
inline ExampleForward forward_example(const EntailmentExample& ex, ParamSet& params,
                                      const ModelConfig& cfg, BranchSelect sel = {}) {
  ex.validate();
  ExampleForward out;
  TokenSequence hyp = tokenize(ex.hypothesis, cfg);
  if (sel.textual || sel.multimodal) {
    TokenSequence packed = pack_pair(tokenize(ex.premise_text, cfg), hyp, cfg);
    out.h_t = encode_text(packed, params, "bert", cfg).h;
    if (sel.textual) out.p_t = classify_head(out.h_t, params, "head_t");
  }
  if (sel.visual || sel.multimodal) {
    ImageEncoding img = ex.premise_image
                            ? encode_image(*ex.premise_image, params, "vit", cfg)
                            : encode_image(PatchGrid::black(cfg), params, "vit", cfg);
    out.h_v = cross_encode(img.patch_states, hyp, params, "cross", cfg);
    if (sel.visual) out.p_v = classify_head(out.h_v, params, "head_v");
  }
  if (sel.multimodal) {
    out.h_m = gate_fuse(out.h_t, out.h_v, params);
    out.p_m = classify_head(out.h_m, params, "head_m");
  }
  return out;
}

struct LossBreakdown {
  double l_t = 0.0, l_v = 0.0, l_m = 0.0, l_all = 0.0;
  // per-example indicator-gated branch losses, for decomposition audits
  std::vector<double> per_example_t, per_example_v, per_example_m;
  Var loss;  // the scalar used for backward
};

// Eq. 12 joint loss: negative log-likelihood per branch, indicator-gated and
// summed over the batch. Inactive branches are skipped, which yields the same
// (exactly zero) gradients as evaluating and gating them.
inline LossBreakdown joint_loss(const std::vector<EntailmentExample>& batch, ParamSet& params,
                                const ModelConfig& cfg) {
  if (batch.empty()) throw ValidationError("joint_loss: empty batch");
  LossBreakdown bd;
  Var l_t, l_v, l_m;
  auto accumulate = [](Var& acc, Var term) { acc = acc ? add(acc, term) : term; };
  for (const auto& ex : batch) {
    Indicators th = ex.indicators();
    BranchSelect sel{th.t, th.v, th.m};
    ExampleForward fwd = forward_example(ex, params, cfg, sel);
    std::size_t target = static_cast<std::size_t>(ex.label);
    double nt = 0.0, nv = 0.0, nm = 0.0;
    if (th.t) {
      Var nll = nll_of_prob_row(fwd.p_t, target);
      nt = nll->value.data[0];
      accumulate(l_t, nll);
    }
    if (th.v) {
      Var nll = nll_of_prob_row(fwd.p_v, target);
      nv = nll->value.data[0];
      accumulate(l_v, nll);
    }
    if (th.m) {
      Var nll = nll_of_prob_row(fwd.p_m, target);
      nm = nll->value.data[0];
      accumulate(l_m, nll);
    }
    bd.per_example_t.push_back(nt);
    bd.per_example_v.push_back(nv);
    bd.per_example_m.push_back(nm);
  }
  Var total;
  for (Var part : {l_t, l_v, l_m})
    if (part) total = total ? add(total, part) : part;
  bd.l_t = l_t ? l_t->value.data[0] : 0.0;
  bd.l_v = l_v ? l_v->value.data[0] : 0.0;
  bd.l_m = l_m ? l_m->value.data[0] : 0.0;
  bd.l_all = total->value.data[0];
  bd.loss = total;
  return bd;
}

// Verdict for one example; the head matches the task form.
inline EntailmentVerdict predict(const EntailmentExample& ex, ParamSet& params,
                                 const ModelConfig& cfg, double threshold = 0.5) {
  Indicators th = ex.indicators();
  BranchSelect sel{th.t || th.m, th.v || th.m, th.m};
  ExampleForward fwd = forward_example(ex, params, cfg, sel);
  switch (ex.task_form) {
    case TaskForm::TEXT_TEXT:
      return make_verdict(fwd.p_t->value.data[1], threshold, "textual");
    case TaskForm::IMAGE_TEXT:
      return make_verdict(fwd.p_v->value.data[1], threshold, "visual");
    case TaskForm::IMAGE_TEXT_TEXT:
      return make_verdict(fwd.p_m->value.data[1], threshold, "multimodal");
  }
  throw ValidationError("predict: unknown task form");
}

}  // namespace entailkit
