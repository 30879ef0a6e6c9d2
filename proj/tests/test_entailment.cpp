#include <catch2/catch_amalgamated.hpp>

#include "entailkit/entailment.hpp"

using namespace entailkit;

namespace {

ModelConfig tiny() { return ModelConfig::tiny(); }

PatchGrid random_image(const ModelConfig& cfg, Rng& rng) {
  PatchGrid g = PatchGrid::black(cfg);
  for (auto& v : g.pixels) v = rng.uniform();
  return g;
}

EntailmentExample text_text_example(const std::string& premise, const std::string& hyp,
                                    int label) {
  EntailmentExample ex;
  ex.premise_text = premise;
  ex.hypothesis = hyp;
  ex.label = label;
  ex.task_form = TaskForm::TEXT_TEXT;
  return ex;
}

EntailmentExample image_text_example(const ModelConfig& cfg, Rng& rng, const std::string& hyp,
                                     int label) {
  EntailmentExample ex;
  ex.premise_image = random_image(cfg, rng);
  ex.hypothesis = hyp;
  ex.label = label;
  ex.task_form = TaskForm::IMAGE_TEXT;
  return ex;
}

EntailmentExample multimodal_example(const ModelConfig& cfg, Rng& rng,
                                     const std::string& premise, const std::string& hyp,
                                     int label) {
  EntailmentExample ex;
  ex.premise_image = random_image(cfg, rng);
  ex.premise_text = premise;
  ex.hypothesis = hyp;
  ex.label = label;
  ex.task_form = TaskForm::IMAGE_TEXT_TEXT;
  return ex;
}

}  // namespace

TEST_CASE("classify_head with zero weights is uniform") {
  ModelConfig cfg = tiny();
  std::size_t d = cfg.hidden_dim;
  ParamSet params;
  params.ensure("head.1.w", Tensor::zeros({d, d}));
  params.ensure("head.1.b", Tensor::zeros({d}));
  params.ensure("head.2.w", Tensor::zeros({d, d}));
  params.ensure("head.2.b", Tensor::zeros({d}));
  params.ensure("head.out.w", Tensor::zeros({d, 2}));
  params.ensure("head.out.b", Tensor::zeros({2}));
  Rng rng(1);
  Var h = constant(random_gaussian({d}, 1.0, rng));
  Var p = classify_head(h, params, "head");
  CHECK(p->value.data[0] == Catch::Approx(0.5));
  CHECK(p->value.data[1] == Catch::Approx(0.5));
}

TEST_CASE("classify_head outputs lie strictly in (0,1) and pass finite differences") {
  ModelConfig cfg = tiny();
  std::size_t d = cfg.hidden_dim;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParamSet params(seed);
    Rng rng(seed);
    detail::init_affine(params, "head.1", d, d, rng);
    detail::init_affine(params, "head.2", d, d, rng);
    detail::init_affine(params, "head.out", d, 2, rng);
    params.ensure("h", random_gaussian({d}, 1.0, rng));
    Var p = classify_head(params.get("h"), params, "head");
    CHECK(p->value.data[0] > 0.0);
    CHECK(p->value.data[0] < 1.0);
    CHECK(p->value.data[1] > 0.0);
    CHECK(p->value.data[1] < 1.0);
    GraphFn graph = [&](ParamSet& ps, const std::map<std::string, Tensor>&) {
      Var probs = classify_head(ps.get("h"), ps, "head");
      return std::map<std::string, Var>{{"loss", nll_of_prob_row(probs, 1)}};
    };
    CHECK(finite_diff_check(graph, params, {}, "loss") < 1e-5);
  }
}

TEST_CASE("gate_fuse closed-form cases") {
  ModelConfig cfg = tiny();
  std::size_t d = cfg.hidden_dim;
  ParamSet params;
  params.ensure("gate.t.w", Tensor::zeros({d, d}));
  params.ensure("gate.t.b", Tensor::zeros({d}));
  params.ensure("gate.v.w", Tensor::zeros({d, d}));
  params.ensure("gate.v.b", Tensor::zeros({d}));
  Rng rng(2);
  Tensor ht = random_gaussian({d}, 1.0, rng);
  Tensor hv = random_gaussian({d}, 1.0, rng);
  Var hm = gate_fuse(constant(ht), constant(hv), params);
  for (std::size_t i = 0; i < d; ++i)
    CHECK(hm->value.data[i] == Catch::Approx(0.5 * (ht.data[i] + hv.data[i])));

  // zero hidden states fuse to zero regardless of parameters
  ParamSet params2(3);
  Rng rng2(3);
  detail::init_affine(params2, "gate.t", d, d, rng2);
  detail::init_affine(params2, "gate.v", d, d, rng2);
  Var zero = gate_fuse(constant(Tensor::zeros({d})), constant(Tensor::zeros({d})), params2);
  for (double v : zero->value.data) CHECK(v == 0.0);
}

TEST_CASE("gate_fuse matches an independent scalar computation") {
  ModelConfig cfg = tiny();
  std::size_t d = cfg.hidden_dim;
  ParamSet params(5);
  Rng rng(5);
  detail::init_affine(params, "gate.t", d, d, rng);
  detail::init_affine(params, "gate.v", d, d, rng);
  Tensor ht = random_gaussian({d}, 1.0, rng);
  Tensor hv = random_gaussian({d}, 1.0, rng);
  Var hm = gate_fuse(constant(ht), constant(hv), params);

  const Tensor& wt = params.get("gate.t.w")->value;
  const Tensor& bt = params.get("gate.t.b")->value;
  const Tensor& wv = params.get("gate.v.w")->value;
  const Tensor& bv = params.get("gate.v.b")->value;
  for (std::size_t j = 0; j < d; ++j) {
    double zt = bt.data[j], zv = bv.data[j];
    for (std::size_t i = 0; i < d; ++i) {
      zt += ht.data[i] * wt.at(i, j);
      zv += hv.data[i] * wv.at(i, j);
    }
    double gt = 1.0 / (1.0 + std::exp(-zt));
    double gv = 1.0 / (1.0 + std::exp(-zv));
    CHECK(hm->value.data[j] == Catch::Approx(gt * ht.data[j] + gv * hv.data[j]).epsilon(1e-12));
    CHECK(gt > 0.0);
    CHECK(gt < 1.0);
    CHECK(gv > 0.0);
    CHECK(gv < 1.0);
  }
}

TEST_CASE("gate fusion graph passes finite differences") {
  ModelConfig cfg = tiny();
  std::size_t d = cfg.hidden_dim;
  ParamSet params(7);
  Rng rng(7);
  detail::init_affine(params, "gate.t", d, d, rng);
  detail::init_affine(params, "gate.v", d, d, rng);
  params.ensure("ht", random_gaussian({d}, 1.0, rng));
  params.ensure("hv", random_gaussian({d}, 1.0, rng));
  GraphFn graph = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
    Var hm = gate_fuse(p.get("ht"), p.get("hv"), p);
    return std::map<std::string, Var>{{"loss", sum(sigmoid(hm))}};
  };
  CHECK(finite_diff_check(graph, params, {}, "loss") < 1e-5);
}

TEST_CASE("indicator gating matches the task form") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 11);
  Rng rng(11);

  std::vector<EntailmentExample> tt{text_text_example("premise words", "hypothesis words", 1)};
  LossBreakdown bd = joint_loss(tt, params, cfg);
  CHECK(bd.l_t > 0.0);
  CHECK(bd.l_v == 0.0);
  CHECK(bd.l_m == 0.0);
  CHECK(bd.l_all == bd.l_t);

  std::vector<EntailmentExample> it{image_text_example(cfg, rng, "visual hypothesis", 0)};
  bd = joint_loss(it, params, cfg);
  CHECK(bd.l_v > 0.0);
  CHECK(bd.l_t == 0.0);
  CHECK(bd.l_all == bd.l_v);

  std::vector<EntailmentExample> mm{
      multimodal_example(cfg, rng, "premise words", "hypothesis", 1)};
  bd = joint_loss(mm, params, cfg);
  CHECK(bd.l_t > 0.0);
  CHECK(bd.l_v > 0.0);
  CHECK(bd.l_m > 0.0);
  CHECK(bd.l_all == Catch::Approx(bd.l_t + bd.l_v + bd.l_m).epsilon(1e-14));
}

TEST_CASE("single example at uniform output yields ln 2") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 13);
  // zero the textual head: softmax over zero logits is uniform
  for (const char* n : {"head_t.1.w", "head_t.1.b", "head_t.2.w", "head_t.2.b", "head_t.out.w",
                        "head_t.out.b"})
    std::fill(params.get(n)->value.data.begin(), params.get(n)->value.data.end(), 0.0);
  std::vector<EntailmentExample> batch{text_text_example("p", "h", 1)};
  LossBreakdown bd = joint_loss(batch, params, cfg);
  CHECK(bd.l_all == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mixed batch loss decomposes exactly") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 17);
  Rng rng(17);
  std::vector<EntailmentExample> batch;
  batch.push_back(text_text_example("one premise", "one hypothesis", 1));
  batch.push_back(image_text_example(cfg, rng, "img hypothesis", 0));
  batch.push_back(multimodal_example(cfg, rng, "mm premise", "mm hypothesis", 1));
  batch.push_back(text_text_example("two premise", "two hypothesis", 0));
  LossBreakdown bd = joint_loss(batch, params, cfg);

  double recomputed = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    recomputed += bd.per_example_t[i] + bd.per_example_v[i] + bd.per_example_m[i];
  CHECK(std::abs(bd.l_all - recomputed) <= 1e-12 * std::abs(bd.l_all));
  CHECK(bd.l_t >= 0.0);
  CHECK(bd.l_v >= 0.0);
  CHECK(bd.l_m >= 0.0);
}

TEST_CASE("text-only batch leaves every visual parameter gradient at zero") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 19);
  std::vector<EntailmentExample> batch{text_text_example("a b", "c d", 1),
                                       text_text_example("e f", "g h", 0)};
  LossBreakdown bd = joint_loss(batch, params, cfg);
  params.zero_grad();
  backward(bd.loss);
  std::size_t checked = 0;
  for (auto& [name, v] : params.items()) {
    bool visual = name.rfind("vit.", 0) == 0 || name.rfind("cross.", 0) == 0 ||
                  name.rfind("head_v.", 0) == 0 || name.rfind("gate.", 0) == 0 ||
                  name.rfind("head_m.", 0) == 0;
    if (!visual) continue;
    ++checked;
    for (double g : v->grad.data) REQUIRE(g == 0.0);
  }
  CHECK(checked > 0);
  // and the textual path did receive gradient
  double norm = 0.0;
  for (double g : params.get("bert.tok_emb")->grad.data) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("full multi-modal graph passes finite differences") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 23);
  Rng rng(23);
  std::vector<EntailmentExample> batch{
      multimodal_example(cfg, rng, "tiny premise", "tiny hypothesis", 1)};
  GraphFn graph = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
    LossBreakdown bd = joint_loss(batch, p, cfg);
    return std::map<std::string, Var>{{"loss", bd.loss}};
  };
  CHECK(finite_diff_check(graph, params, {}, "loss") < 1e-4);
}

TEST_CASE("predict follows the threshold convention") {
  CHECK(make_verdict(0.5, 0.5, "x").decision == Decision::ENTAIL);
  CHECK(make_verdict(0.49, 0.5, "x").decision == Decision::NON_ENTAIL);
  CHECK(make_verdict(0.51, 0.5, "x").decision == Decision::ENTAIL);

  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 29);
  Rng rng(29);
  EntailmentExample ex = multimodal_example(cfg, rng, "p words", "h words", 1);
  EntailmentVerdict v = predict(ex, params, cfg);
  CHECK(v.branch == "multimodal");
  // at threshold 0.5 the decision agrees with the argmax of the softmax pair
  ExampleForward fwd = forward_example(ex, params, cfg);
  bool argmax_entail = fwd.p_m->value.data[1] >= fwd.p_m->value.data[0];
  CHECK((v.decision == Decision::ENTAIL) == argmax_entail);
}

TEST_CASE("malformed examples are rejected") {
  ModelConfig cfg = tiny();
  ParamSet params = init_entailment_model(cfg, 31);
  EntailmentExample bad;
  bad.task_form = TaskForm::IMAGE_TEXT;
  bad.premise_text = "should be empty";
  bad.premise_image = PatchGrid::black(cfg);
  bad.hypothesis = "h";
  CHECK_THROWS_AS(forward_example(bad, params, cfg), ValidationError);

  CHECK_THROWS_AS(joint_loss({}, params, cfg), ValidationError);
}
