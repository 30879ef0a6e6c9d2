#pragma once

#include <string>
#include <vector>

#include "entailkit/augment.hpp"
#include "entailkit/datapipe.hpp"
#include "entailkit/metrics.hpp"
#include "entailkit/optim.hpp"

namespace entailkit {

// Turns a corpus with a known entailment oracle into a balanced mixed-form
// training set: every sampled (image, caption) pair is emitted in all three
// unified input forms, mirroring the indiscriminate data mixing the
// classifier is trained with.

struct ExampleSplit {
  std::vector<EntailmentExample> train, held_out;
};

inline ExampleSplit make_entailment_examples(const RetrievalCorpus& corpus,
                                             const ClusterOracle& oracle,
                                             std::size_t pairs_per_image, std::uint64_t seed,
                                             double held_out_fraction = 0.2) {
  Rng rng(seed);
  std::vector<std::string> cap_ids;
  for (const auto& [id, t] : corpus.captions) cap_ids.push_back(id);

  struct SampledPair {
    std::string image, caption;
    int label;
  };
  std::vector<SampledPair> pairs;
  for (const auto& [img, g] : corpus.images) {
    std::size_t made_pos = 0, made_neg = 0;
    std::size_t want = std::max<std::size_t>(pairs_per_image / 2, 1);
    std::size_t guard = 0;
    while ((made_pos < want || made_neg < want) && guard++ < 200) {
      const std::string& cap = cap_ids[rng.index(cap_ids.size())];
      int label = oracle.entailed(img, cap) ? 1 : 0;
      if (label == 1 && made_pos >= want) continue;
      if (label == 0 && made_neg >= want) continue;
      pairs.push_back({img, cap, label});
      (label == 1 ? made_pos : made_neg)++;
    }
  }
  rng.shuffle(pairs);

  ExampleSplit split;
  std::size_t held = static_cast<std::size_t>(held_out_fraction * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    std::string premise = merge_premise_captions(corpus, p.image);
    const std::string& hyp = corpus.captions.at(p.caption);
    const PatchGrid& img = corpus.images.at(p.image);

    EntailmentExample mm;
    mm.premise_image = img;
    mm.premise_text = premise;
    mm.hypothesis = hyp;
    mm.label = p.label;
    mm.task_form = TaskForm::IMAGE_TEXT_TEXT;

    if (i < held) {
      // held-out set uses the multi-modal form only: that is the head we score
      split.held_out.push_back(std::move(mm));
      continue;
    }
    EntailmentExample tt;
    tt.premise_text = premise;
    tt.hypothesis = hyp;
    tt.label = p.label;
    tt.task_form = TaskForm::TEXT_TEXT;
    EntailmentExample it;
    it.premise_image = img;
    it.hypothesis = hyp;
    it.label = p.label;
    it.task_form = TaskForm::IMAGE_TEXT;
    split.train.push_back(std::move(mm));
    split.train.push_back(std::move(tt));
    split.train.push_back(std::move(it));
  }
  return split;
}

struct EntailTrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.02;
  std::uint64_t seed = 1;
  bool augment = true;
  MaskSpec mask;
  double stop_accuracy = 1.01;  // early stop once held-out accuracy reaches this
};

struct EpochLog {
  std::size_t epoch;
  double mean_loss;
  double held_out_accuracy;
};

inline double evaluate_entailment_accuracy(const std::vector<EntailmentExample>& examples,
                                           ParamSet& params, const ModelConfig& cfg,
                                           double threshold = 0.5) {
  if (examples.empty()) throw ValidationError("evaluate_entailment_accuracy: no examples");
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    EntailmentVerdict v = predict(ex, params, cfg, threshold);
    int pred = v.decision == Decision::ENTAIL ? 1 : 0;
    if (pred == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

inline std::vector<EpochLog> train_entailment(const ExampleSplit& split, ParamSet& params,
                                              const ModelConfig& cfg,
                                              const EntailTrainConfig& tcfg) {
  AdamWOptimizer opt(tcfg.weight_decay);
  Rng rng(tcfg.seed);
  std::vector<EpochLog> log;
  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<double> losses;
    for (std::size_t off = 0; off < order.size(); off += tcfg.batch_size) {
      std::vector<EntailmentExample> batch;
      for (std::size_t i = off; i < std::min(off + tcfg.batch_size, order.size()); ++i)
        batch.push_back(split.train[order[i]]);
      if (tcfg.augment) batch = augment_batch(batch, tcfg.mask, params, cfg);
      LossBreakdown bd = joint_loss(batch, params, cfg);
      params.zero_grad();
      backward(bd.loss);
      opt.step(params, tcfg.lr);
      losses.push_back(bd.l_all / static_cast<double>(batch.size()));
    }
    double acc = split.held_out.empty()
                     ? 0.0
                     : evaluate_entailment_accuracy(split.held_out, params, cfg);
    log.push_back({epoch, pairwise_mean(losses), acc});
    if (acc >= tcfg.stop_accuracy) break;
  }
  return log;
}

}  // namespace entailkit
