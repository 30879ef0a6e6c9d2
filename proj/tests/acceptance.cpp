// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
// argv[1] (optional) is the path to the command-line tool, used by the
// determinism criterion.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "entailkit/experiment.hpp"
#include "entailkit/metrics.hpp"
#include "entailkit/trainstrat.hpp"

using namespace entailkit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

// reduced geometry: big enough to learn the synthetic task, small enough for
// a CPU-only end-to-end run
ModelConfig experiment_model() {
  ModelConfig cfg;
  cfg.hidden_dim = 48;
  cfg.heads = 4;
  cfg.text_layers = 1;
  cfg.image_layers = 1;
  cfg.cross_layers = 1;
  // vocab large enough that distinct corpus words rarely share a hashed id;
  // at 256 the synthetic core vocabularies collide across clusters and cap
  // the learnable accuracy
  cfg.vocab_size = 2048;
  cfg.max_len = 32;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.ffn_mult = 2;
  return cfg;
}

// ---- criterion 1: F0.5 reference value ----
void criterion_1() {
  double f = f_beta(0.802, 0.743, 0.5);
  std::ostringstream d;
  d << "F0.5(0.802, 0.743) = " << f;
  report(1, "metric exactness", std::abs(f - 0.789) <= 0.001, d.str());
}

// ---- criterion 2: gradient suite, 20 seeds ----
void criterion_2() {
  ModelConfig cfg = ModelConfig::tiny();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    ParamSet params = init_entailment_model(cfg, seed);
    params.ensure("probe.h_t", random_gaussian({1, cfg.hidden_dim}, 0.7, rng));
    params.ensure("probe.h_v", random_gaussian({1, cfg.hidden_dim}, 0.7, rng));

    GraphFn heads = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
      Var pt = classify_head(p.get("probe.h_t"), p, "head_t");
      Var pv = classify_head(p.get("probe.h_v"), p, "head_v");
      return std::map<std::string, Var>{{"loss", add(nll_of_prob_row(pt, 1),
                                                     nll_of_prob_row(pv, 0))}};
    };
    GraphFn gate = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
      Var hm = gate_fuse(p.get("probe.h_t"), p.get("probe.h_v"), p);
      return std::map<std::string, Var>{
          {"loss", nll_of_prob_row(classify_head(hm, p, "head_m"), 1)}};
    };
    PatchGrid img = PatchGrid::black(cfg);
    for (auto& v : img.pixels) v = rng.uniform();
    EntailmentExample ex;
    ex.premise_image = img;
    ex.premise_text = "alpha beta gamma";
    ex.hypothesis = "delta epsilon";
    ex.label = 1;
    ex.task_form = TaskForm::IMAGE_TEXT_TEXT;
    GraphFn full = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
      return std::map<std::string, Var>{{"loss", joint_loss({ex}, p, cfg).loss}};
    };

    worst = std::max(worst, finite_diff_check(heads, params, {}, "loss"));
    worst = std::max(worst, finite_diff_check(gate, params, {}, "loss"));
    worst = std::max(worst, finite_diff_check(full, params, {}, "loss", 1e-6, 4));
  }
  std::ostringstream d;
  d << "max rel error " << worst;
  report(2, "gradient suite", worst < 1e-4, d.str());
}

// ---- criterion 3: loss decomposition and branch isolation ----
void criterion_3() {
  ModelConfig cfg = ModelConfig::tiny();
  Rng rng(3);
  ParamSet params = init_entailment_model(cfg, 3);
  auto random_example = [&](TaskForm form) {
    EntailmentExample ex;
    ex.task_form = form;
    ex.label = static_cast<int>(rng.index(2));
    ex.hypothesis = "h" + std::to_string(rng.next_u64() % 50);
    if (form != TaskForm::IMAGE_TEXT)
      ex.premise_text = "p" + std::to_string(rng.next_u64() % 50);
    if (form != TaskForm::TEXT_TEXT) {
      PatchGrid g = PatchGrid::black(cfg);
      for (auto& v : g.pixels) v = rng.uniform();
      ex.premise_image = g;
    }
    return ex;
  };

  bool decompose_ok = true;
  for (int trial = 0; trial < 100 && decompose_ok; ++trial) {
    std::vector<EntailmentExample> batch;
    std::size_t n = 2 + rng.index(5);
    for (std::size_t i = 0; i < n; ++i) {
      TaskForm form = static_cast<TaskForm>(rng.index(3));
      batch.push_back(random_example(form));
    }
    LossBreakdown bd = joint_loss(batch, params, cfg);
    double recomposed = bd.l_t + bd.l_v + bd.l_m;
    double denom = std::max(std::abs(bd.l_all), 1e-300);
    if (std::abs(recomposed - bd.l_all) / denom > 1e-12) decompose_ok = false;
    // per-example branch terms must recompose the branch sums too
    double st = 0.0, sv = 0.0, sm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      st += bd.per_example_t[i];
      sv += bd.per_example_v[i];
      sm += bd.per_example_m[i];
    }
    if (std::abs(st - bd.l_t) > 1e-9 || std::abs(sv - bd.l_v) > 1e-9 ||
        std::abs(sm - bd.l_m) > 1e-9)
      decompose_ok = false;
  }

  // text-only batch: exactly-zero gradients on every visual-branch parameter
  std::vector<EntailmentExample> text_batch;
  for (int i = 0; i < 4; ++i) text_batch.push_back(random_example(TaskForm::TEXT_TEXT));
  LossBreakdown bd = joint_loss(text_batch, params, cfg);
  params.zero_grad();
  backward(bd.loss);
  bool isolation_ok = true;
  for (const auto& [name, v] : params.items()) {
    bool visual = name.rfind("vit.", 0) == 0 || name.rfind("cross.", 0) == 0 ||
                  name.rfind("head_v.", 0) == 0 || name.rfind("gate.", 0) == 0 ||
                  name.rfind("head_m.", 0) == 0 || name.rfind("probe.", 0) == 0;
    for (double g : v->grad.data)
      if (visual && g != 0.0) isolation_ok = false;
  }
  report(3, "loss decomposition and isolation", decompose_ok && isolation_ok,
         decompose_ok ? (isolation_ok ? "" : "nonzero visual gradient in a text-only batch")
                      : "recomposition exceeded 1e-12 relative");
}

// ---- criterion 4: masking law ----
void criterion_4() {
  Rng rng(4);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    AttentionProfile p;
    p.scores.resize(16);
    double s = 0.0;
    for (auto& v : p.scores) {
      v = rng.uniform() + 1e-9;
      s += v;
    }
    for (auto& v : p.scores) v /= s;
    auto ids = top_attention_patches(p, 0.4);
    if (ids.size() != 6) ok = false;
    double min_sel = 1.0, max_unsel = 0.0;
    std::vector<bool> sel(16, false);
    for (auto id : ids) {
      sel[id] = true;
      min_sel = std::min(min_sel, p.scores[id]);
    }
    for (std::size_t i = 0; i < 16; ++i)
      if (!sel[i]) max_unsel = std::max(max_unsel, p.scores[i]);
    if (min_sel < max_unsel) ok = false;
  }

  // augment_batch caps appended negatives at 4
  ModelConfig cfg = ModelConfig::tiny();
  ParamSet params(44);
  Rng prng(44);
  init_image_encoder(params, "vit", cfg, prng);
  std::vector<EntailmentExample> batch;
  for (int i = 0; i < 10; ++i) {
    EntailmentExample ex;
    PatchGrid g = PatchGrid::black(cfg);
    for (auto& v : g.pixels) v = rng.uniform();
    ex.premise_image = g;
    ex.hypothesis = "h" + std::to_string(i);
    ex.label = 1;
    ex.task_form = TaskForm::IMAGE_TEXT;
    batch.push_back(ex);
  }
  MaskSpec spec;
  auto out = augment_batch(batch, spec, params, cfg);
  bool cap_ok = out.size() == batch.size() + 4;
  report(4, "masking law", ok && cap_ok,
         ok ? (cap_ok ? "" : "appended negatives not capped at 4") : "selection law violated");
}

// ---- criterion 5: training-strategy laws ----
void criterion_5() {
  bool plan_ok = true;
  for (std::uint64_t seed = 1; seed <= 100 && plan_ok; ++seed) {
    SyntheticSpec spec;
    Rng r(seed);
    spec.cluster_count = 2 + r.index(3);
    spec.images_per_cluster = 2 + r.index(4);
    spec.captions_per_image = 1 + r.index(3);
    spec.image_size = 16;
    spec.patch_size = 8;
    spec.seed = seed;
    SyntheticCorpus s = synth_generate(spec);
    EntailmentGraph g = graph_from_corpus(s.corpus);
    // random entailed edges
    std::vector<std::string> imgs, caps;
    for (const auto& [id, v] : s.corpus.images) imgs.push_back(id);
    for (const auto& [id, v] : s.corpus.captions) caps.push_back(id);
    for (int e = 0; e < 20; ++e) {
      const std::string& img = imgs[r.index(imgs.size())];
      const std::string& cap = caps[r.index(caps.size())];
      if (!s.corpus.is_gold(img, cap)) g.add_entailed(img, cap);
    }
    BatchPlan plan = plan_batches(s.corpus, g, 2 + r.index(4), 1e-3, 0.3, seed * 7);
    try {
      validate_plan(plan, g);
    } catch (const ValidationError&) {
      plan_ok = false;
    }
    for (const auto& b : plan.batches)
      if (b.lr_scale != 1.0 && b.lr_scale != 0.3) plan_ok = false;
  }

  // exact alpha scaling under plain gradient descent
  SyntheticSpec spec;
  spec.cluster_count = 3;
  spec.images_per_cluster = 4;
  spec.captions_per_image = 2;
  spec.image_size = 16;
  spec.patch_size = 8;
  SyntheticCorpus s = synth_generate(spec);
  ModelConfig mcfg = ModelConfig::tiny();
  mcfg.image_size = 16;
  std::vector<IdPair> batch{{"img0_0", "cap0_0_0"}, {"img1_0", "cap1_0_0"}};
  EntailmentGraph g0 = graph_from_corpus(s.corpus);
  std::map<std::string, Tensor> before;
  auto deltas = [&](double lr) {
    ParamSet params = init_dual_encoder(mcfg, {}, 9);
    before.clear();
    for (auto& [n, v] : params.items()) before[n] = v->value;
    SgdOptimizer sgd;
    contrastive_step(batch, s.corpus, params, mcfg, &g0, lr, sgd);
    std::map<std::string, Tensor> out;
    for (auto& [n, v] : params.items()) {
      Tensor d = v->value;
      for (std::size_t i = 0; i < d.numel(); ++i) d.data[i] -= before[n].data[i];
      out[n] = d;
    }
    return out;
  };
  auto unit = deltas(0.05);
  auto weak = deltas(0.3 * 0.05);
  bool scale_ok = true;
  for (auto& [n, d] : unit)
    for (std::size_t i = 0; i < d.numel(); ++i) {
      double expect = 0.3 * d.data[i];
      double got = weak[n].data[i];
      if (expect == 0.0) {
        if (got != 0.0) scale_ok = false;
      } else {
        // after-minus-before deltas round at ulp(parameter); normalize by the
        // parameter scale as well as the delta itself
        double denom = std::max(std::abs(expect), std::abs(before[n].data[i]));
        if (std::abs(got - expect) / denom > 1e-12) scale_ok = false;
      }
    }

  // >= 200-step audit: every planned negative pair passes the filter
  EntailmentGraph g = graph_from_corpus(s.corpus);
  for (const auto& [img, ic] : s.oracle.image_cluster)
    for (const auto& [cap, cc] : s.oracle.caption_cluster)
      if (ic == cc && !g.is_gold(img, cap)) g.add_entailed(img, cap);
  RetrievalTrainConfig rcfg;
  rcfg.batch_size = 2;
  rcfg.epochs = 9;  // 12 regular + 12 weak batches per epoch -> 216 steps
  rcfg.seed = 5;
  auto result = train_retrieval(s.corpus, g, mcfg, rcfg);
  bool audit_ok = result.log.size() >= 200;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < rcfg.epochs && audit_ok; ++epoch) {
    BatchPlan plan =
        plan_batches(s.corpus, g, rcfg.batch_size, rcfg.lr, rcfg.alpha, rcfg.seed + 977 * epoch);
    for (const auto& b : plan.batches) {
      std::size_t expect_masked = 0;
      for (std::size_t i = 0; i < b.pairs.size(); ++i)
        for (std::size_t j = 0; j < b.pairs.size(); ++j)
          if (i != j && !filter_negative(b.pairs[i].first, b.pairs[j].second, g)) ++expect_masked;
      if (result.log[step].masked_negatives != expect_masked) audit_ok = false;
      ++step;
    }
  }
  std::ostringstream d;
  d << result.log.size() << " audited steps";
  report(5, "training-strategy laws", plan_ok && scale_ok && audit_ok,
         plan_ok ? (scale_ok ? (audit_ok ? d.str() : "negative audit failed")
                             : "alpha scaling not exact")
                 : "plan validation failed");
}

// ---- criterion 6: metric oracles ----
void criterion_6() {
  Rng rng(6);
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    std::size_t queries = 1 + rng.index(20);
    std::size_t items = 5 + rng.index(26);
    RankedRun run;
    std::map<std::string, std::vector<std::string>> gold;
    std::set<std::pair<std::string, std::string>> entailed;
    for (std::size_t q = 0; q < queries; ++q) {
      std::string name = "q" + std::to_string(q);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < items; ++i) ids.push_back("i" + std::to_string(i));
      rng.shuffle(ids);
      run.ranked[name] = ids;
      gold[name] = {"i" + std::to_string(rng.index(items))};
      for (int e = 0; e < 4; ++e)
        entailed.insert({name, "i" + std::to_string(rng.index(items))});
    }
    EntailRelation rel = [&](const std::string& q, const std::string& item) {
      return entailed.count({q, item}) != 0;
    };
    std::size_t k = 1 + rng.index(items);

    // brute-force recounts straight from the definitions
    double r_naive = 0.0, e_naive = 0.0;
    for (const auto& [q, ranked] : run.ranked) {
      bool hit = false;
      double e_sum = 0.0;
      for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        bool is_gold = std::find(gold[q].begin(), gold[q].end(), ranked[i]) != gold[q].end();
        if (is_gold) hit = true;
        if (is_gold || rel(q, ranked[i])) e_sum += 1.0;
      }
      r_naive += hit ? 1.0 : 0.0;
      e_naive += e_sum / static_cast<double>(k);
    }
    r_naive /= static_cast<double>(queries);
    e_naive /= static_cast<double>(queries);
    if (std::abs(recall_at_k(run, gold, k) - r_naive) > 1e-12) ok = false;
    if (std::abs(entail_at_k(run, gold, rel, k) - e_naive) > 1e-12) ok = false;

    // reduction: gold-only relation at K=1 equals R@1
    EntailRelation none = [](const std::string&, const std::string&) { return false; };
    if (entail_at_k(run, gold, none, 1) != recall_at_k(run, gold, 1)) ok = false;
  }
  report(6, "metric oracles", ok);
}

// ---- criterion 7: synthetic end-to-end ----
void criterion_7() {
  SyntheticSpec spec;  // defaults: 8 clusters x 16 images x 5 captions
  SyntheticCorpus synth = synth_generate(spec);
  ModelConfig mcfg = experiment_model();

  // (a) classifier accuracy on held-out multi-modal pairs
  ExampleSplit split = make_entailment_examples(synth.corpus, synth.oracle, 8, 7);
  ParamSet classifier = init_entailment_model(mcfg, 7);
  EntailTrainConfig tcfg;
  tcfg.epochs = 15;
  tcfg.batch_size = 16;
  tcfg.lr = 3e-4;
  tcfg.seed = 7;
  tcfg.stop_accuracy = 0.97;
  auto log = train_entailment(split, classifier, mcfg, tcfg);
  double acc = log.back().held_out_accuracy;
  {
    std::ostringstream d;
    d << "held-out accuracy " << acc << " after " << log.size() << " epochs";
    report(7, "end-to-end (a) classifier accuracy", acc >= 0.95, d.str());
  }

  // (b) graph building: planted same-cluster candidates vs cross-cluster ones
  Rng rng(77);
  std::vector<CandidatePair> candidates;
  std::vector<bool> truth;
  std::vector<std::string> caps;
  for (const auto& [id, t] : synth.corpus.captions) caps.push_back(id);
  for (const auto& [img, g] : synth.corpus.images) {
    std::size_t planted = 0, off = 0;
    std::size_t guard = 0;
    while ((planted < 5 || off < 5) && guard++ < 500) {
      const std::string& cap = caps[rng.index(caps.size())];
      if (synth.corpus.is_gold(img, cap)) continue;
      bool same = synth.oracle.entailed(img, cap);
      if (same && planted >= 5) continue;
      if (!same && off >= 5) continue;
      candidates.push_back({img, cap, CandidateSource::TOP_K_RETRIEVAL});
      truth.push_back(same);
      (same ? planted : off)++;
    }
  }
  EntailmentGraph graph = graph_from_corpus(synth.corpus);
  std::size_t recovered = 0, true_total = 0, accepted = 0, false_accepted = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    EntailmentExample ex;
    ex.premise_image = synth.corpus.images.at(candidates[i].image);
    ex.premise_text = merge_premise_captions(synth.corpus, candidates[i].image);
    ex.hypothesis = synth.corpus.captions.at(candidates[i].caption);
    ex.task_form = TaskForm::IMAGE_TEXT_TEXT;
    bool accept = predict(ex, classifier, mcfg).decision == Decision::ENTAIL;
    if (truth[i]) ++true_total;
    if (accept) {
      ++accepted;
      if (truth[i])
        ++recovered;
      else
        ++false_accepted;
      graph.add_entailed(candidates[i].image, candidates[i].caption);
    }
  }
  double recovery = true_total ? static_cast<double>(recovered) / true_total : 0.0;
  double false_rate = accepted ? static_cast<double>(false_accepted) / accepted : 0.0;
  {
    std::ostringstream d;
    d << "recovery " << recovery << ", false-edge rate " << false_rate << " over "
      << candidates.size() << " candidates";
    report(7, "end-to-end (b) graph recovery", recovery >= 0.9 && false_rate <= 0.1, d.str());
  }

  // (c) strategy on vs off over 3 seeds: E@10 and R@1
  EntailRelation oracle_rel = [&](const std::string& q, const std::string& item) {
    return synth.oracle.entailed(q, item);
  };
  auto run_setting = [&](bool strategy, std::uint64_t seed, double& e10, double& r1) {
    RetrievalTrainConfig rcfg;
    rcfg.batch_size = 32;
    rcfg.lr = 1e-3;
    rcfg.alpha = 0.3;
    rcfg.epochs = 40;
    // weak-positive batches every 8th epoch: filtering provides the entailed
    // ranking benefit, while a lower cumulative weak-pull budget keeps the
    // entailed captions from overtaking gold at rank 1
    rcfg.weak_period = 8;
    rcfg.seed = seed;
    rcfg.strategy = strategy;
    auto result = train_retrieval(synth.corpus, graph, mcfg, rcfg);
    RankedRun run;
    run.ranked = rank_all(synth.corpus, result.params, mcfg);
    e10 = entail_at_k(run, synth.corpus.gold, oracle_rel, 10);
    r1 = recall_at_k(run, synth.corpus.gold, 1);
  };
  std::vector<double> e_on, e_off, r_on, r_off;
  for (std::uint64_t seed : {11, 22, 33}) {
    double e, r;
    run_setting(true, seed, e, r);
    e_on.push_back(e);
    r_on.push_back(r);
    run_setting(false, seed, e, r);
    e_off.push_back(e);
    r_off.push_back(r);
  }
  auto mean = [](const std::vector<double>& v) { return pairwise_mean(v); };
  auto stddev = [&](const std::vector<double>& v) {
    double m = mean(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  double de = mean(e_on) - mean(e_off);
  double dr = mean(r_on) - mean(r_off);
  {
    std::ostringstream d;
    d << "E@10 on " << mean(e_on) << "+/-" << stddev(e_on) << " vs off " << mean(e_off) << "+/-"
      << stddev(e_off) << "; R@1 on " << mean(r_on) << "+/-" << stddev(r_on) << " vs off "
      << mean(r_off) << "+/-" << stddev(r_off);
    report(7, "end-to-end (c) strategy effect", de >= 0.05 && dr >= -0.01, d.str());
  }
}

// ---- criterion 8: CLI determinism ----

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& cli, const std::string& args) {
  std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

void criterion_8(const std::string& cli) {
  if (cli.empty()) {
    report(8, "CLI determinism", false, "tool path not provided");
    return;
  }
  fs::path dir = fs::temp_directory_path() / "entailkit_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  bool ok = true;
  std::string detail;

  auto synth_args = [&](const std::string& sub) {
    return "synth --out " + (dir / sub / "corpus.ldjson").string() +
           " --clusters 3 --images-per-cluster 4 --captions-per-image 2 --seed 5";
  };
  if (run_cli(cli, synth_args("a")) != 0 || run_cli(cli, synth_args("b")) != 0) {
    ok = false;
    detail = "synth failed";
  }
  if (ok) {
    for (const std::string rel :
         {"corpus.ldjson", "corpus.ldjson.clusters.ldjson", "img0_0.f32", "img2_3.f32"}) {
      if (slurp(dir / "a" / rel) != slurp(dir / "b" / rel)) {
        ok = false;
        detail = rel + " differs between identical synth runs";
      }
    }
  }
  if (ok) {
    auto train_args = [&](const std::string& sub) {
      return "train-retrieval --corpus " + (dir / "a" / "corpus.ldjson").string() + " --out " +
             (dir / sub / "ret.ckpt").string() + " --run-out " + (dir / sub / "run.ldjson").string() +
             " --strategy on --alpha 0.3 --seed 9";
    };
    if (run_cli(cli, train_args("a")) != 0 || run_cli(cli, train_args("b")) != 0) {
      ok = false;
      detail = "train-retrieval failed";
    } else if (slurp(dir / "a" / "ret.ckpt") != slurp(dir / "b" / "ret.ckpt")) {
      ok = false;
      detail = "checkpoints differ between identical training runs";
    } else if (slurp(dir / "a" / "run.ldjson") != slurp(dir / "b" / "run.ldjson")) {
      ok = false;
      detail = "run files differ between identical training runs";
    }
  }
  if (ok) {
    auto eval_args = [&](const std::string& sub) {
      return "eval --corpus " + (dir / "a" / "corpus.ldjson").string() + " --run " +
             (dir / "a" / "run.ldjson").string() + " --clusters " +
             (dir / "a" / "corpus.ldjson.clusters.ldjson").string() + " --out " +
             (dir / sub / "report.json").string() + " --csv " + (dir / sub / "report.csv").string() +
             " --svg " + (dir / sub / "report.svg").string() + " --seed 9";
    };
    if (run_cli(cli, eval_args("a")) != 0 || run_cli(cli, eval_args("b")) != 0) {
      ok = false;
      detail = "eval failed";
    } else {
      for (const std::string rel : {"report.json", "report.csv", "report.svg"})
        if (slurp(dir / "a" / rel) != slurp(dir / "b" / rel)) {
          ok = false;
          detail = rel + " differs between identical eval runs";
        }
    }
  }
  fs::remove_all(dir);
  report(8, "CLI determinism", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8(cli);
  if (failures) {
    std::cout << failures << " criterion check(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all acceptance criteria passed" << std::endl;
  return 0;
}
