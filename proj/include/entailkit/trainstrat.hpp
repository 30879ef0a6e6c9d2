#pragma once

#include <algorithm>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "entailkit/datapipe.hpp"
#include "entailkit/optim.hpp"

namespace entailkit {

// ---- entailment graph ----

class EntailmentGraph {
 public:
  void add_gold(const std::string& image, const std::string& caption) {
    gold_.insert(key(image, caption));
    gold_edges_.push_back({image, caption});
  }

  // no-op if the pair is gold or already present
  void add_entailed(const std::string& image, const std::string& caption) {
    std::string k = key(image, caption);
    if (gold_.count(k) || entailed_.count(k)) return;
    entailed_.insert(k);
    entailed_edges_.push_back({image, caption});
  }

  bool is_gold(const std::string& image, const std::string& caption) const {
    return gold_.count(key(image, caption)) != 0;
  }
  bool is_entailed(const std::string& image, const std::string& caption) const {
    return entailed_.count(key(image, caption)) != 0;
  }
  bool contains(const std::string& image, const std::string& caption) const {
    return is_gold(image, caption) || is_entailed(image, caption);
  }

  const std::vector<std::pair<std::string, std::string>>& gold_edges() const {
    return gold_edges_;
  }
  const std::vector<std::pair<std::string, std::string>>& entailed_edges() const {
    return entailed_edges_;
  }

 private:
  static std::string key(const std::string& image, const std::string& caption) {
    return image + '\x1f' + caption;
  }
  std::unordered_set<std::string> gold_, entailed_;
  std::vector<std::pair<std::string, std::string>> gold_edges_, entailed_edges_;
};

// True iff the pair may serve as an in-batch negative.
inline bool filter_negative(const std::string& image, const std::string& caption,
                            const EntailmentGraph& graph) {
  return !graph.contains(image, caption);
}

inline EntailmentGraph graph_from_corpus(const RetrievalCorpus& corpus) {
  EntailmentGraph g;
  for (const auto& [img, caps] : corpus.gold)
    for (const auto& cap : caps) g.add_gold(img, cap);
  for (const auto& e : corpus.weak) g.add_entailed(e.image, e.caption);
  return g;
}

// Classify each candidate (premise = image + merged gold captions, hypothesis
// = candidate caption); ENTAIL verdicts become entailed edges. Gold edges are
// always present.
inline EntailmentGraph build_entailment_graph(const RetrievalCorpus& corpus,
                                              const std::vector<CandidatePair>& candidates,
                                              ParamSet& classifier, const ModelConfig& cfg,
                                              double threshold = 0.5) {
  EntailmentGraph g = graph_from_corpus(corpus);
  for (const auto& cand : candidates) {
    if (!corpus.images.count(cand.image) || !corpus.captions.count(cand.caption))
      throw ValidationError("build_entailment_graph: candidate references unknown ids");
    EntailmentExample ex;
    ex.premise_image = corpus.images.at(cand.image);
    ex.premise_text = merge_premise_captions(corpus, cand.image);
    ex.hypothesis = corpus.captions.at(cand.caption);
    ex.task_form = TaskForm::IMAGE_TEXT_TEXT;
    if (predict(ex, classifier, cfg, threshold).decision == Decision::ENTAIL)
      g.add_entailed(cand.image, cand.caption);
  }
  return g;
}

// ---- batch planning ----

using IdPair = std::pair<std::string, std::string>;  // (image, caption)

struct PlannedBatch {
  std::vector<IdPair> pairs;
  double lr_scale = 1.0;  // 1 for regular, alpha for weak
  bool weak = false;
};

struct BatchPlan {
  std::vector<PlannedBatch> batches;
  double base_lr = 0.0;
  double alpha = 0.3;
};

// Shuffled gold pairs chunked into regular batches; after each, one weak
// batch drawn preferentially from entailed edges incident to that batch's
// images and topped up from the remaining pool. Weak batches are omitted once
// the pool is empty.
inline BatchPlan plan_batches(const RetrievalCorpus& corpus, const EntailmentGraph& graph,
                              std::size_t batch_size, double base_lr, double alpha,
                              std::uint64_t seed) {
  if (batch_size < 2) throw ValidationError("plan_batches: batch_size must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("plan_batches: alpha must lie in (0,1)");
  Rng rng(seed);
  std::vector<IdPair> gold;
  for (const auto& [img, caps] : corpus.gold)
    for (const auto& cap : caps) gold.push_back({img, cap});
  rng.shuffle(gold);
  std::vector<IdPair> pool = graph.entailed_edges();
  rng.shuffle(pool);

  BatchPlan plan;
  plan.base_lr = base_lr;
  plan.alpha = alpha;
  for (std::size_t off = 0; off < gold.size(); off += batch_size) {
    PlannedBatch regular;
    regular.lr_scale = 1.0;
    for (std::size_t i = off; i < std::min(off + batch_size, gold.size()); ++i)
      regular.pairs.push_back(gold[i]);
    std::unordered_set<std::string> batch_images;
    for (const auto& p : regular.pairs) batch_images.insert(p.first);
    plan.batches.push_back(std::move(regular));

    PlannedBatch weak;
    weak.lr_scale = alpha;
    weak.weak = true;
    // preferential: entailed edges whose image appears in the regular batch
    for (std::size_t i = 0; i < pool.size() && weak.pairs.size() < batch_size;) {
      if (batch_images.count(pool[i].first)) {
        weak.pairs.push_back(pool[i]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
    while (weak.pairs.size() < batch_size && !pool.empty()) {
      weak.pairs.push_back(pool.front());
      pool.erase(pool.begin());
    }
    if (!weak.pairs.empty()) plan.batches.push_back(std::move(weak));
  }
  return plan;
}

// Structural validator: alternation, lr_scale assignment and batch contents.
inline void validate_plan(const BatchPlan& plan, const EntailmentGraph& graph) {
  bool prev_regular = false;
  for (const auto& b : plan.batches) {
    if (b.weak) {
      if (!prev_regular)
        throw ValidationError("BatchPlan: weak batch does not follow a regular batch");
      if (b.lr_scale != plan.alpha) throw ValidationError("BatchPlan: weak lr_scale != alpha");
      for (const auto& [img, cap] : b.pairs)
        if (!graph.is_entailed(img, cap))
          throw ValidationError("BatchPlan: weak batch contains a non-entailed pair");
      prev_regular = false;
    } else {
      if (b.lr_scale != 1.0) throw ValidationError("BatchPlan: regular lr_scale != 1");
      for (const auto& [img, cap] : b.pairs)
        if (!graph.is_gold(img, cap))
          throw ValidationError("BatchPlan: regular batch contains a non-gold pair");
      prev_regular = true;
    }
  }
}

// ---- reference dual encoder ----

// Minimal two-tower retrieval model: flattened patches -> MLP for images,
// mean token embedding -> MLP for texts, unit-norm embeddings, learnable
// temperature. Stands in for any retrieval model the strategy plugs into.
struct DualEncoderConfig {
  std::size_t embed_dim = 64;
  double init_temperature = 0.07;
};

inline ParamSet init_dual_encoder(const ModelConfig& mcfg, const DualEncoderConfig& cfg,
                                  std::uint64_t seed, bool zero_init = false) {
  ParamSet params(seed);
  Rng rng(seed);
  std::size_t in = mcfg.patch_count() * mcfg.patch_dim();
  std::size_t d = cfg.embed_dim;
  if (zero_init) {
    params.ensure("img.1.w", Tensor::zeros({in, d}));
    params.ensure("img.1.b", Tensor::zeros({d}));
    params.ensure("img.2.w", Tensor::zeros({d, d}));
    params.ensure("img.2.b", Tensor::zeros({d}));
    params.ensure("txt.emb", Tensor::zeros({mcfg.vocab_size, d}));
    params.ensure("txt.1.w", Tensor::zeros({d, d}));
    params.ensure("txt.1.b", Tensor::zeros({d}));
    params.ensure("txt.2.w", Tensor::zeros({d, d}));
    params.ensure("txt.2.b", Tensor::zeros({d}));
  } else {
    detail::init_affine(params, "img.1", in, d, rng);
    detail::init_affine(params, "img.2", d, d, rng);
    params.ensure("txt.emb", random_gaussian({mcfg.vocab_size, d}, 0.1, rng));
    detail::init_affine(params, "txt.1", d, d, rng);
    detail::init_affine(params, "txt.2", d, d, rng);
  }
  params.ensure("log_temp", Tensor::scalar(std::log(cfg.init_temperature)));
  return params;
}

inline Var embed_image_tower(const PatchGrid& grid, ParamSet& params, const ModelConfig& mcfg) {
  Tensor flat = patchify(grid);
  flat.shape = {1, flat.numel()};
  Var x = constant(std::move(flat));
  x = relu(detail::affine_p(params, "img.1", x));
  x = detail::affine_p(params, "img.2", x);
  return l2_normalize_rows(x);
}

inline Var embed_text_tower(const std::string& text, ParamSet& params, const ModelConfig& mcfg) {
  TokenSequence seq = tokenize(text, mcfg);
  std::size_t n = std::max<std::size_t>(seq.effective_len(), 1);
  std::vector<int> ids(seq.ids.begin(), seq.ids.begin() + n);
  Var x = mean_rows(embedding(params.get("txt.emb"), ids));
  x = reshape(x, {1, x->value.numel()});
  x = relu(detail::affine_p(params, "txt.1", x));
  x = detail::affine_p(params, "txt.2", x);
  return l2_normalize_rows(x);
}

struct ContrastiveResult {
  double loss = 0.0;
  std::size_t masked_negatives = 0;
};

// Symmetric in-batch softmax contrastive loss. Off-diagonal entries that are
// gold or entailed pairs are excluded from the denominators (-inf logits)
// when `filter` is set. A row whose negatives are all masked reduces to its
// positive term (loss 0 for that row).
inline Var contrastive_loss(const std::vector<IdPair>& batch, const RetrievalCorpus& corpus,
                            ParamSet& params, const ModelConfig& mcfg,
                            const EntailmentGraph* filter, ContrastiveResult* stats) {
  std::size_t b = batch.size();
  if (b == 0) throw ValidationError("contrastive_loss: empty batch");
  std::vector<Var> img_rows, txt_rows;
  for (const auto& [img, cap] : batch) {
    img_rows.push_back(embed_image_tower(corpus.images.at(img), params, mcfg));
    txt_rows.push_back(embed_text_tower(corpus.captions.at(cap), params, mcfg));
  }
  Var imgs = concat_rows(img_rows);
  Var txts = concat_rows(txt_rows);
  Var inv_temp = exp_op(scale(params.get("log_temp"), -1.0));
  Var sims = scale_by(matmul_nt(imgs, txts), inv_temp);  // [b x b], image x text

  Tensor mask = Tensor::zeros({b, b});
  std::size_t masked = 0;
  if (filter) {
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        if (i == j) continue;
        if (!filter_negative(batch[i].first, batch[j].second, *filter)) {
          mask.data[i * b + j] = -HUGE_VAL;
          ++masked;
        }
      }
  }
  if (stats) stats->masked_negatives = masked;

  Var i2t = softmax_rows(sims, &mask);
  // text-to-image direction: transpose roles; the mask transposes with it
  Var sims_t = scale_by(matmul_nt(txts, imgs), inv_temp);
  Tensor mask_t = Tensor::zeros({b, b});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) mask_t.data[j * b + i] = mask.data[i * b + j];
  Var t2i = softmax_rows(sims_t, &mask_t);

  Var loss;
  for (std::size_t i = 0; i < b; ++i) {
    Var term = add(nll_of_prob_row(i2t, i * b + i), nll_of_prob_row(t2i, i * b + i));
    loss = loss ? add(loss, term) : term;
  }
  loss = scale(loss, 0.5);
  if (stats) stats->loss = loss->value.data[0];
  return loss;
}

template <typename Optimizer>
inline ContrastiveResult contrastive_step(const std::vector<IdPair>& batch,
                                          const RetrievalCorpus& corpus, ParamSet& params,
                                          const ModelConfig& mcfg, const EntailmentGraph* filter,
                                          double lr_effective, Optimizer& opt) {
  ContrastiveResult stats;
  Var loss = contrastive_loss(batch, corpus, params, mcfg, filter, &stats);
  if (!std::isfinite(stats.loss))
    throw ValidationError("contrastive_step: divergence, loss = " +
                          std::to_string(stats.loss));
  params.zero_grad();
  backward(loss);
  opt.step(params, lr_effective);
  return stats;
}

// ---- training loop ----

struct RetrievalTrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double alpha = 0.3;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  bool strategy = true;  // negative filtering + weak-positive batches
  bool use_adamw = true;
  double weight_decay = 0.02;
  std::size_t embed_dim = 64;
  // upper bound on the learnable logit scale exp(-log_temp), applied after
  // each step (the usual contrastive-training stability clamp)
  double max_logit_scale = 100.0;
  // schedule weak-positive batches every Nth epoch (1 = every epoch);
  // negative filtering always uses the full graph
  std::size_t weak_period = 1;
};

struct StepLog {
  std::size_t step;
  std::string batch_kind;  // "regular" | "weak"
  double lr_effective;
  double loss;
  std::size_t masked_negatives;
};

struct RetrievalTrainResult {
  ParamSet params;
  std::vector<StepLog> log;
};

inline RetrievalTrainResult train_retrieval(const RetrievalCorpus& corpus,
                                            const EntailmentGraph& graph,
                                            const ModelConfig& mcfg,
                                            const RetrievalTrainConfig& cfg) {
  DualEncoderConfig dcfg;
  dcfg.embed_dim = cfg.embed_dim;
  RetrievalTrainResult result{init_dual_encoder(mcfg, dcfg, cfg.seed), {}};
  AdamWOptimizer adamw(cfg.weight_decay);
  SgdOptimizer sgd;
  EntailmentGraph empty;
  const EntailmentGraph& plan_graph = cfg.strategy ? graph : empty;
  std::size_t step = 0;
  if (cfg.weak_period == 0) throw ValidationError("train_retrieval: weak_period must be >= 1");
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    bool weak_epoch = epoch % cfg.weak_period == 0;
    BatchPlan plan = plan_batches(corpus, weak_epoch ? plan_graph : empty, cfg.batch_size,
                                  cfg.lr, cfg.alpha, cfg.seed + 977 * epoch);
    for (const auto& batch : plan.batches) {
      double lr_eff = cfg.lr * batch.lr_scale;
      const EntailmentGraph* filter = cfg.strategy ? &graph : nullptr;
      ContrastiveResult r =
          cfg.use_adamw
              ? contrastive_step(batch.pairs, corpus, result.params, mcfg, filter, lr_eff, adamw)
              : contrastive_step(batch.pairs, corpus, result.params, mcfg, filter, lr_eff, sgd);
      result.log.push_back(
          {step++, batch.weak ? "weak" : "regular", lr_eff, r.loss, r.masked_negatives});
      double& lt = result.params.get("log_temp")->value.data[0];
      double floor_lt = -std::log(cfg.max_logit_scale);
      if (lt < floor_lt) lt = floor_lt;
    }
  }
  return result;
}

// Full ranking of captions for one query image, descending similarity, ties
// broken by caption id ascending.
inline std::vector<std::string> rank_captions(const std::string& image_id,
                                              const RetrievalCorpus& corpus, ParamSet& params,
                                              const ModelConfig& mcfg) {
  Var img = embed_image_tower(corpus.images.at(image_id), params, mcfg);
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& [cap_id, text] : corpus.captions) {
    Var txt = embed_text_tower(text, params, mcfg);
    double s = 0.0;
    for (std::size_t i = 0; i < img->value.numel(); ++i)
      s += img->value.data[i] * txt->value.data[i];
    scored.push_back({s, cap_id});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [s, id] : scored) out.push_back(id);
  return out;
}

// Rankings for every image, with caption embeddings computed once.
inline std::map<std::string, std::vector<std::string>> rank_all(const RetrievalCorpus& corpus,
                                                                ParamSet& params,
                                                                const ModelConfig& mcfg) {
  std::vector<std::pair<std::string, std::vector<double>>> cap_embs;
  for (const auto& [cap_id, text] : corpus.captions) {
    Var t = embed_text_tower(text, params, mcfg);
    cap_embs.push_back({cap_id, t->value.data});
  }
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [img_id, grid] : corpus.images) {
    Var img = embed_image_tower(grid, params, mcfg);
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(cap_embs.size());
    for (const auto& [cap_id, emb] : cap_embs) {
      double s = 0.0;
      for (std::size_t i = 0; i < emb.size(); ++i) s += img->value.data[i] * emb[i];
      scored.push_back({s, cap_id});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    auto& ranked = out[img_id];
    for (auto& [s, id] : scored) ranked.push_back(id);
  }
  return out;
}

}  // namespace entailkit
