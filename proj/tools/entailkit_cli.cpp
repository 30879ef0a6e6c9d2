#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entailkit/checkpoint.hpp"
#include "entailkit/experiment.hpp"
#include "entailkit/metrics.hpp"
#include "entailkit/trainstrat.hpp"

using namespace entailkit;
using nlohmann::json;

namespace {

// flat key=value config; unknown keys are rejected so typos surface early
struct CliConfig {
  std::size_t hidden_dim = 64;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double alpha = 0.3;
  double mask_ratio = 0.4;
  std::size_t mask_max_images = 4;
  double threshold = 0.5;
  std::uint64_t seed = 1;
  std::size_t epochs = 5;
};

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ValidationError("config: line " + std::to_string(lineno) + " is not key=value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "hidden_dim")
        cfg.hidden_dim = std::stoul(val);
      else if (key == "batch_size")
        cfg.batch_size = std::stoul(val);
      else if (key == "lr")
        cfg.lr = std::stod(val);
      else if (key == "alpha")
        cfg.alpha = std::stod(val);
      else if (key == "mask_ratio")
        cfg.mask_ratio = std::stod(val);
      else if (key == "mask_max_images")
        cfg.mask_max_images = std::stoul(val);
      else if (key == "threshold")
        cfg.threshold = std::stod(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else if (key == "epochs")
        cfg.epochs = std::stoul(val);
      else
        throw ValidationError("config: unknown key " + key);
    } catch (const std::invalid_argument&) {
      throw ValidationError("config: bad value for " + key);
    }
  }
  return cfg;
}

ModelConfig model_from(const CliConfig& cfg, const RetrievalCorpus* corpus = nullptr) {
  ModelConfig m;
  m.hidden_dim = cfg.hidden_dim;
  if (corpus && !corpus->images.empty()) {
    m.image_size = corpus->images.begin()->second.image_size;
    m.patch_size = corpus->images.begin()->second.patch_size;
  }
  m.validate();
  return m;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

void write_cluster_file(const SyntheticCorpus& synth, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path);
  std::map<std::string, int> imgs(synth.oracle.image_cluster.begin(),
                                  synth.oracle.image_cluster.end());
  std::map<std::string, int> caps(synth.oracle.caption_cluster.begin(),
                                  synth.oracle.caption_cluster.end());
  for (const auto& [id, k] : imgs)
    os << json{{"kind", "image"}, {"id", id}, {"cluster", k}}.dump() << "\n";
  for (const auto& [id, k] : caps)
    os << json{{"kind", "caption"}, {"id", id}, {"cluster", k}}.dump() << "\n";
}

ClusterOracle load_cluster_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("clusters: cannot open " + path);
  ClusterOracle oracle;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    std::string kind = rec.at("kind");
    if (kind == "image")
      oracle.image_cluster[rec.at("id")] = rec.at("cluster");
    else if (kind == "caption")
      oracle.caption_cluster[rec.at("id")] = rec.at("cluster");
    else
      throw ValidationError("clusters: unknown kind " + kind);
  }
  return oracle;
}

std::map<std::string, std::vector<std::string>> load_run_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("run: cannot open " + path);
  std::map<std::string, std::vector<std::string>> run;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    std::string q = rec.at("query_image_id");
    if (run.count(q)) throw ValidationError("run: duplicate query " + q);
    run[q] = rec.at("ranked_caption_ids").get<std::vector<std::string>>();
  }
  return run;
}

void write_run_file(const std::map<std::string, std::vector<std::string>>& run,
                    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path);
  for (const auto& [q, ids] : run)
    os << json{{"query_image_id", q}, {"ranked_caption_ids", ids}}.dump() << "\n";
}

std::set<std::pair<std::string, std::string>> load_pair_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("entail pairs: cannot open " + path);
  std::set<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    pairs.insert({rec.at("image"), rec.at("caption")});
  }
  return pairs;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

// ---- subcommands ----

int cmd_synth(const std::string& out, const std::string& clusters_out, SyntheticSpec spec) {
  SyntheticCorpus synth = synth_generate(spec);
  save_corpus(synth.corpus, out);
  std::string cpath = clusters_out.empty() ? out + ".clusters.ldjson" : clusters_out;
  write_cluster_file(synth, cpath);
  std::cout << "wrote " << synth.corpus.images.size() << " images, "
            << synth.corpus.captions.size() << " captions to " << out << "\n"
            << "cluster map: " << cpath << "\n";
  return 0;
}

int cmd_train_entail(const std::string& corpus_path, const std::string& clusters_path,
                     const std::string& out, const CliConfig& cfg, std::size_t pairs_per_image,
                     bool augment, double stop_accuracy) {
  RetrievalCorpus corpus = load_corpus(corpus_path);
  ClusterOracle oracle = load_cluster_file(clusters_path);
  ModelConfig mcfg = model_from(cfg, &corpus);
  ExampleSplit split = make_entailment_examples(corpus, oracle, pairs_per_image, cfg.seed);
  ParamSet params = init_entailment_model(mcfg, cfg.seed);

  EntailTrainConfig tcfg;
  tcfg.epochs = cfg.epochs;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lr = cfg.lr;
  tcfg.seed = cfg.seed;
  tcfg.augment = augment;
  tcfg.mask.ratio = cfg.mask_ratio;
  tcfg.mask.max_images_per_batch = cfg.mask_max_images;
  tcfg.stop_accuracy = stop_accuracy;

  auto log = train_entailment(split, params, mcfg, tcfg);
  for (const auto& e : log)
    std::cout << "epoch " << e.epoch << " loss " << fmt(e.mean_loss) << " held-out acc "
              << fmt(e.held_out_accuracy) << "\n";
  save_checkpoint(params, out);
  std::cout << "checkpoint: " << out << "\n";
  return 0;
}

int cmd_revise(const std::string& corpus_path, const std::string& model_path,
               const std::string& run_path, const std::string& out,
               const std::string& verdicts_path, const CliConfig& cfg, std::size_t k,
               double random_fraction) {
  RetrievalCorpus corpus = load_corpus(corpus_path);
  ParamSet params = load_checkpoint(model_path);
  ModelConfig mcfg = model_from(cfg, &corpus);
  auto run = load_run_file(run_path);
  auto candidates = generate_candidates(corpus, run, k, random_fraction, cfg.seed);
  RevisionResult result = revise_corpus(corpus, params, mcfg, candidates, cfg.threshold);
  save_corpus(result.corpus, out);
  if (!verdicts_path.empty()) {
    std::ofstream os(verdicts_path);
    if (!os) throw ValidationError("cannot open " + verdicts_path);
    for (const auto& v : result.verdicts)
      os << json{{"premise_image_id", v.pair.image},
                 {"hypothesis_id", v.pair.caption},
                 {"p_entail", v.verdict.p_entail},
                 {"decision", v.verdict.decision == Decision::ENTAIL ? "ENTAIL" : "NON_ENTAIL"},
                 {"threshold", v.verdict.threshold}}
                .dump()
         << "\n";
  }
  std::size_t added = result.corpus.weak.size() - corpus.weak.size();
  std::cout << "candidates " << candidates.size() << ", new weak edges " << added << "\n"
            << "revised corpus: " << out << "\n";
  return 0;
}

int cmd_train_retrieval(const std::string& corpus_path, const std::string& out,
                        const std::string& run_out, const CliConfig& cfg, bool strategy,
                        bool plain_sgd) {
  RetrievalCorpus corpus = load_corpus(corpus_path);
  ModelConfig mcfg = model_from(cfg, &corpus);
  EntailmentGraph graph = graph_from_corpus(corpus);

  RetrievalTrainConfig tcfg;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lr = cfg.lr;
  tcfg.alpha = cfg.alpha;
  tcfg.epochs = cfg.epochs;
  tcfg.seed = cfg.seed;
  tcfg.strategy = strategy;
  tcfg.use_adamw = !plain_sgd;

  auto result = train_retrieval(corpus, graph, mcfg, tcfg);
  for (const auto& s : result.log)
    if (s.step % 10 == 0 || s.step + 1 == result.log.size())
      std::cout << "step " << s.step << " " << s.batch_kind << " lr " << fmt(s.lr_effective)
                << " loss " << fmt(s.loss) << " masked " << s.masked_negatives << "\n";
  save_checkpoint(result.params, out);
  std::cout << "checkpoint: " << out << "\n";
  if (!run_out.empty()) {
    write_run_file(rank_all(corpus, result.params, mcfg), run_out);
    std::cout << "run: " << run_out << "\n";
  }
  return 0;
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path);
  os << "metric,value\n";
  for (const auto& [name, value] : report.metrics) os << name << "," << fmt(value) << "\n";
}

void write_report_svg(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path);
  const int bar_w = 60, gap = 20, h = 240, base = 200;
  int w = gap + static_cast<int>(report.metrics.size()) * (bar_w + gap);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  int x = gap;
  for (const auto& [name, value] : report.metrics) {
    int bh = static_cast<int>(value * 160.0 + 0.5);
    os << "  <rect x=\"" << x << "\" y=\"" << base - bh << "\" width=\"" << bar_w
       << "\" height=\"" << bh << "\" fill=\"steelblue\"/>\n";
    os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << base + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << name << "</text>\n";
    os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << base - bh - 4
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(value).substr(0, 6)
       << "</text>\n";
    x += bar_w + gap;
  }
  os << "</svg>\n";
}

int cmd_eval(const std::string& corpus_path, const std::string& run_path, const std::string& out,
             const std::string& csv_path, const std::string& svg_path,
             const std::string& clusters_path, const std::string& pairs_path,
             const std::vector<std::size_t>& ks, const CliConfig& cfg,
             const std::string& config_path) {
  RetrievalCorpus corpus = load_corpus(corpus_path);
  RankedRun run;
  run.ranked = load_run_file(run_path);
  run.validate(corpus);

  EntailRelation rel;
  if (!clusters_path.empty()) {
    auto oracle = std::make_shared<ClusterOracle>(load_cluster_file(clusters_path));
    rel = [oracle](const std::string& q, const std::string& item) {
      return oracle->entailed(q, item);
    };
  } else if (!pairs_path.empty()) {
    auto pairs = std::make_shared<std::set<std::pair<std::string, std::string>>>(
        load_pair_file(pairs_path));
    rel = [pairs](const std::string& q, const std::string& item) {
      return pairs->count({q, item}) != 0;
    };
  } else {
    auto graph = std::make_shared<EntailmentGraph>(graph_from_corpus(corpus));
    rel = [graph](const std::string& q, const std::string& item) {
      return graph->is_entailed(q, item);
    };
  }

  MetricsReport report;
  for (std::size_t k : ks) {
    report.metrics["R@" + std::to_string(k)] = recall_at_k(run, corpus.gold, k, &std::cerr);
    report.metrics["E@" + std::to_string(k)] = entail_at_k(run, corpus.gold, rel, k);
  }
  report.corpus_hash = hex64(fnv1a64_bytes(read_file_bytes(corpus_path)));
  report.config_hash =
      config_path.empty() ? "default" : hex64(fnv1a64_bytes(read_file_bytes(config_path)));
  report.seed = cfg.seed;

  json j{{"schema", kReportSchema},
         {"metrics", report.metrics},
         {"corpus_hash", report.corpus_hash},
         {"config_hash", report.config_hash},
         {"seed", report.seed}};
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    if (!os) throw ValidationError("cannot open " + out);
    os << j.dump(2) << "\n";
    std::cout << "report: " << out << "\n";
  }
  if (!csv_path.empty()) write_report_csv(report, csv_path);
  if (!svg_path.empty()) write_report_svg(report, svg_path);
  for (const auto& [name, value] : report.metrics)
    std::cout << name << " = " << fmt(value) << "\n";
  return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& json_out) {
  RetrievalCorpus corpus = load_corpus(corpus_path);
  CorpusStats st = corpus_stats(corpus);
  std::cout << "images " << corpus.images.size() << ", captions " << corpus.captions.size()
            << ", edges " << st.edge_count << " (weak " << corpus.weak.size() << ")\n"
            << "max captions per image " << st.max_captions_per_image
            << ", max images per caption " << st.max_images_per_caption << "\n"
            << "caption degree histogram:\n";
  for (const auto& [deg, n] : st.caption_degree_histogram)
    std::cout << "  degree " << deg << ": " << n << "\n";
  if (!json_out.empty()) {
    json j{{"edge_count", st.edge_count},
           {"max_captions_per_image", st.max_captions_per_image},
           {"max_images_per_caption", st.max_images_per_caption},
           {"caption_degree_histogram", st.caption_degree_histogram}};
    std::ofstream os(json_out);
    if (!os) throw ValidationError("cannot open " + json_out);
    os << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::size_t seeds, std::size_t max_components) {
  ModelConfig cfg = ModelConfig::tiny();
  double worst_head = 0.0, worst_gate = 0.0, worst_full = 0.0;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    ParamSet params = init_entailment_model(cfg, seed);
    params.ensure("probe.h_t", random_gaussian({1, cfg.hidden_dim}, 0.7, rng));
    params.ensure("probe.h_v", random_gaussian({1, cfg.hidden_dim}, 0.7, rng));

    GraphFn heads = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
      Var pt = classify_head(p.get("probe.h_t"), p, "head_t");
      Var pv = classify_head(p.get("probe.h_v"), p, "head_v");
      Var loss = add(nll_of_prob_row(pt, 1), nll_of_prob_row(pv, 0));
      return std::map<std::string, Var>{{"loss", loss}};
    };
    GraphFn gate = [&](ParamSet& p, const std::map<std::string, Tensor>&) {
      Var hm = gate_fuse(p.get("probe.h_t"), p.get("probe.h_v"), p);
      return std::map<std::string, Var>{{"loss", nll_of_prob_row(classify_head(hm, p, "head_m"), 1)}};
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

    worst_head = std::max(worst_head, finite_diff_check(heads, params, {}, "loss"));
    worst_gate = std::max(worst_gate, finite_diff_check(gate, params, {}, "loss"));
    worst_full =
        std::max(worst_full, finite_diff_check(full, params, {}, "loss", 1e-6, max_components));
  }
  double worst = std::max({worst_head, worst_gate, worst_full});
  std::cout << "classification heads: max rel error " << fmt(worst_head) << "\n"
            << "gate fusion:          max rel error " << fmt(worst_gate) << "\n"
            << "full joint graph:     max rel error " << fmt(worst_full) << "\n"
            << "overall max rel error " << fmt(worst) << " over " << seeds << " seeds\n";
  if (worst >= 1e-4) {
    std::cerr << "gradcheck FAILED (threshold 1e-4)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entailkit: multi-modal entailment classification and "
               "entailment-aware retrieval training"};
  app.require_subcommand(1);

  std::string config_path, corpus_path, clusters_path, pairs_path, model_path, run_path;
  std::string out_path, csv_path, svg_path, verdicts_path, run_out, json_out;
  std::string strategy = "on";
  std::uint64_t seed = 0;
  bool seed_set = false, no_augment = false, plain_sgd = false;
  double alpha = -1.0, stop_accuracy = 1.01, random_fraction = 0.5;
  std::size_t pairs_per_image = 4, cand_k = 10, gradcheck_seeds = 20, gradcheck_components = 4;
  std::vector<std::size_t> ks{1, 5, 10};
  SyntheticSpec spec;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a planted-cluster corpus");
  synth->add_option("--out", out_path, "manifest path to write")->required();
  synth->add_option("--clusters-out", clusters_path, "cluster map path");
  synth->add_option("--clusters", spec.cluster_count, "number of clusters");
  synth->add_option("--images-per-cluster", spec.images_per_cluster, "images per cluster");
  synth->add_option("--captions-per-image", spec.captions_per_image, "captions per image");
  synth->add_option("--image-size", spec.image_size, "image side length");
  synth->add_option("--patch-size", spec.patch_size, "patch side length");
  synth->add_option("--noise", spec.noise, "pixel noise amplitude");
  synth->add_option("--split", spec.split, "split name");
  synth->add_option("--seed", spec.seed, "generator seed");

  CLI::App* te = app.add_subcommand("train-entail", "train the entailment classifier");
  te->add_option("--corpus", corpus_path, "corpus manifest")->required();
  te->add_option("--clusters", clusters_path, "cluster map with entailment labels")->required();
  te->add_option("--out", out_path, "checkpoint path")->required();
  te->add_option("--pairs-per-image", pairs_per_image, "sampled pairs per image");
  te->add_option("--stop-accuracy", stop_accuracy, "early-stop held-out accuracy");
  te->add_flag("--no-augment", no_augment, "disable attention-guided masking");
  add_common(te);

  CLI::App* rv = app.add_subcommand("revise", "add classifier-verified weak edges");
  rv->add_option("--corpus", corpus_path, "corpus manifest")->required();
  rv->add_option("--model", model_path, "entailment classifier checkpoint")->required();
  rv->add_option("--run", run_path, "retrieval run used to source candidates")->required();
  rv->add_option("--out", out_path, "revised manifest path")->required();
  rv->add_option("--verdicts", verdicts_path, "verdict audit file");
  rv->add_option("--k", cand_k, "candidate pool depth per image");
  rv->add_option("--random-fraction", random_fraction, "extra random candidates");
  add_common(rv);

  CLI::App* tr = app.add_subcommand("train-retrieval", "train the retrieval dual encoder");
  tr->add_option("--corpus", corpus_path, "corpus manifest")->required();
  tr->add_option("--out", out_path, "checkpoint path")->required();
  tr->add_option("--run-out", run_out, "also write the full ranking run");
  tr->add_option("--strategy", strategy, "on|off: filtering + weak batches")
      ->check(CLI::IsMember({"on", "off"}));
  tr->add_option("--alpha", alpha, "weak-batch learning-rate factor");
  tr->add_flag("--sgd", plain_sgd, "plain gradient descent instead of AdamW");
  add_common(tr);

  CLI::App* ev = app.add_subcommand("eval", "score a run file");
  ev->add_option("--corpus", corpus_path, "corpus manifest")->required();
  ev->add_option("--run", run_path, "run file to score")->required();
  ev->add_option("--out", out_path, "report JSON path (stdout if omitted)");
  ev->add_option("--csv", csv_path, "metrics table as CSV");
  ev->add_option("--svg", svg_path, "metrics bar chart as SVG");
  ev->add_option("--clusters", clusters_path, "cluster map as the entailment relation");
  ev->add_option("--entail-pairs", pairs_path, "pair list as the entailment relation");
  ev->add_option("--k", ks, "cutoffs to evaluate");
  add_common(ev);

  CLI::App* st = app.add_subcommand("stats", "corpus degree statistics");
  st->add_option("--corpus", corpus_path, "corpus manifest")->required();
  st->add_option("--json", json_out, "also write stats as JSON");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc->add_option("--seeds", gradcheck_seeds, "number of random seeds");
  gc->add_option("--components", gradcheck_components,
                 "sampled components per tensor on the full graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CliConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (alpha >= 0.0) cfg.alpha = alpha;

    if (synth->parsed()) return cmd_synth(out_path, clusters_path, spec);
    if (te->parsed())
      return cmd_train_entail(corpus_path, clusters_path, out_path, cfg, pairs_per_image,
                              !no_augment, stop_accuracy);
    if (rv->parsed())
      return cmd_revise(corpus_path, model_path, run_path, out_path, verdicts_path, cfg, cand_k,
                        random_fraction);
    if (tr->parsed())
      return cmd_train_retrieval(corpus_path, out_path, run_out, cfg, strategy == "on",
                                 plain_sgd);
    if (ev->parsed())
      return cmd_eval(corpus_path, run_path, out_path, csv_path, svg_path, clusters_path,
                      pairs_path, ks, cfg, config_path);
    if (st->parsed()) return cmd_stats(corpus_path, json_out);
    if (gc->parsed()) return cmd_gradcheck(gradcheck_seeds, gradcheck_components);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
