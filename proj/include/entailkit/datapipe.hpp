#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "entailkit/entailment.hpp"
#include "entailkit/image_io.hpp"

namespace entailkit {

struct WeakEdge {
  std::string image, caption;
  double p_entail = 1.0;
};

// Retrieval corpus: images, captions, gold links, and optional weak
// (entailed) edges discovered by the classifier.
struct RetrievalCorpus {
  std::map<std::string, PatchGrid> images;
  std::map<std::string, std::string> captions;
  std::map<std::string, std::vector<std::string>> gold;  // image -> caption ids
  std::vector<WeakEdge> weak;
  std::string split = "train";

  bool is_gold(const std::string& image, const std::string& caption) const {
    auto it = gold.find(image);
    if (it == gold.end()) return false;
    for (const auto& c : it->second)
      if (c == caption) return true;
    return false;
  }

  bool has_weak(const std::string& image, const std::string& caption) const {
    for (const auto& e : weak)
      if (e.image == image && e.caption == caption) return true;
    return false;
  }

  void validate() const {
    for (const auto& [img, caps] : gold) {
      if (!images.count(img)) throw ValidationError("corpus: dangling image id " + img);
      std::set<std::string> seen;
      for (const auto& c : caps) {
        if (!captions.count(c)) throw ValidationError("corpus: dangling caption id " + c);
        if (!seen.insert(c).second)
          throw ValidationError("corpus: duplicate gold caption " + c + " for " + img);
      }
    }
    for (const auto& e : weak) {
      if (!images.count(e.image)) throw ValidationError("corpus: dangling image id " + e.image);
      if (!captions.count(e.caption))
        throw ValidationError("corpus: dangling caption id " + e.caption);
      if (is_gold(e.image, e.caption))
        throw ValidationError("corpus: weak edge duplicates gold pair " + e.image + "/" +
                              e.caption);
    }
  }
};

// ---- manifest (line-delimited JSON) ----

inline RetrievalCorpus load_corpus(const std::string& manifest_path,
                                   std::size_t patch_size = 8) {
  std::ifstream is(manifest_path);
  if (!is) throw ValidationError("load_corpus: cannot open " + manifest_path);
  auto base = std::filesystem::path(manifest_path).parent_path();
  RetrievalCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("load_corpus: bad JSON at line " + std::to_string(lineno) + ": " +
                            e.what());
    }
    std::string kind = rec.at("kind");
    if (kind == "meta") {
      if (rec.contains("split")) corpus.split = rec["split"];
    } else if (kind == "image") {
      std::string id = rec.at("id");
      if (corpus.images.count(id)) throw ValidationError("load_corpus: duplicate image id " + id);
      std::string path = (base / std::string(rec.at("path"))).string();
      if (!std::filesystem::exists(path))
        throw ValidationError("load_corpus: missing image file " + path);
      if (path.size() >= 4 && path.substr(path.size() - 4) == ".f32") {
        auto bytes = std::filesystem::file_size(path);
        auto n = static_cast<std::size_t>(std::sqrt(static_cast<double>(bytes / (4 * 3))) + 0.5);
        corpus.images[id] = read_f32(path, n, 3, patch_size);
      } else {
        corpus.images[id] = read_png(path, patch_size);
      }
    } else if (kind == "caption") {
      std::string id = rec.at("id");
      if (corpus.captions.count(id))
        throw ValidationError("load_corpus: duplicate caption id " + id);
      corpus.captions[id] = rec.at("text");
    } else if (kind == "gold") {
      std::string img = rec.at("image");
      for (const auto& c : rec.at("captions")) corpus.gold[img].push_back(c);
    } else if (kind == "weak") {
      corpus.weak.push_back({rec.at("image"), rec.at("caption"),
                             rec.value("p_entail", 1.0)});
    } else {
      throw ValidationError("load_corpus: unknown record kind " + kind);
    }
  }
  corpus.validate();
  return corpus;
}

// Writes the manifest plus one .f32 sidecar per image next to it.
inline void save_corpus(const RetrievalCorpus& corpus, const std::string& manifest_path) {
  corpus.validate();
  auto base = std::filesystem::path(manifest_path).parent_path();
  if (!base.empty()) std::filesystem::create_directories(base);
  std::ofstream os(manifest_path);
  if (!os) throw ValidationError("save_corpus: cannot open " + manifest_path);
  os << nlohmann::json{{"kind", "meta"}, {"split", corpus.split}}.dump() << "\n";
  for (const auto& [id, grid] : corpus.images) {
    std::string rel = id + ".f32";
    write_f32(grid, (base / rel).string());
    os << nlohmann::json{{"kind", "image"}, {"id", id}, {"path", rel}}.dump() << "\n";
  }
  for (const auto& [id, text] : corpus.captions)
    os << nlohmann::json{{"kind", "caption"}, {"id", id}, {"text", text}}.dump() << "\n";
  for (const auto& [img, caps] : corpus.gold)
    os << nlohmann::json{{"kind", "gold"}, {"image", img}, {"captions", caps}}.dump() << "\n";
  for (const auto& e : corpus.weak)
    os << nlohmann::json{{"kind", "weak"},
                         {"image", e.image},
                         {"caption", e.caption},
                         {"p_entail", e.p_entail}}
              .dump()
       << "\n";
}

// Gold captions of the image joined in stored order: the multi-modal premise
// text x^{p_t}.
inline std::string merge_premise_captions(const RetrievalCorpus& corpus,
                                          const std::string& image_id) {
  auto it = corpus.gold.find(image_id);
  if (it == corpus.gold.end() || !corpus.images.count(image_id))
    throw ValidationError("merge_premise_captions: unknown image " + image_id);
  std::string out;
  for (const auto& cap : it->second) {
    if (!out.empty()) out += ". ";
    out += corpus.captions.at(cap);
  }
  return out;
}

// ---- candidate generation (the annotation protocol as code) ----

enum class CandidateSource { TOP_K_RETRIEVAL, RANDOM };

struct CandidatePair {
  std::string image, caption;
  CandidateSource source = CandidateSource::TOP_K_RETRIEVAL;
};

// retrieval_scores: per image, caption ids ranked by descending score.
// Per round and per image, one caption is sampled uniformly from the image's
// top-k non-gold results; random_fraction extra uniformly random non-gold
// pairs are appended. Gold pairs and duplicates never appear.
inline std::vector<CandidatePair> generate_candidates(
    const RetrievalCorpus& corpus,
    const std::map<std::string, std::vector<std::string>>& retrieval_scores, std::size_t k,
    double random_fraction, std::uint64_t seed, std::size_t rounds = 3) {
  Rng rng(seed);
  std::vector<CandidatePair> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t round = 0; round < rounds; ++round) {
    for (const auto& [img, ranked] : retrieval_scores) {
      if (!corpus.images.count(img))
        throw ValidationError("generate_candidates: unknown image " + img);
      std::vector<std::string> pool;
      for (const auto& cap : ranked) {
        if (pool.size() >= k) break;
        if (!corpus.is_gold(img, cap)) pool.push_back(cap);
      }
      if (pool.empty()) continue;
      const std::string& cap = pool[rng.index(pool.size())];
      if (seen.insert({img, cap}).second)
        out.push_back({img, cap, CandidateSource::TOP_K_RETRIEVAL});
    }
  }
  std::vector<std::string> all_images, all_caps;
  for (const auto& [id, g] : corpus.images) all_images.push_back(id);
  for (const auto& [id, t] : corpus.captions) all_caps.push_back(id);
  std::size_t extra = static_cast<std::size_t>(random_fraction * out.size());
  for (std::size_t i = 0; i < extra && !all_images.empty() && !all_caps.empty();) {
    const std::string& img = all_images[rng.index(all_images.size())];
    const std::string& cap = all_caps[rng.index(all_caps.size())];
    if (corpus.is_gold(img, cap)) continue;
    if (!seen.insert({img, cap}).second) continue;
    out.push_back({img, cap, CandidateSource::RANDOM});
    ++i;
  }
  return out;
}

// ---- dataset revision ----

struct CandidateVerdict {
  CandidatePair pair;
  EntailmentVerdict verdict;
};

struct RevisionResult {
  RetrievalCorpus corpus;
  std::vector<CandidateVerdict> verdicts;  // every candidate, for audit
};

// Adds candidates classified ENTAIL as weak edges. Already-present weak edges
// are kept (revision is idempotent for a fixed classifier).
inline RevisionResult revise_corpus(const RetrievalCorpus& corpus, ParamSet& params,
                                    const ModelConfig& cfg,
                                    const std::vector<CandidatePair>& candidates,
                                    double threshold = 0.5) {
  RevisionResult result{corpus, {}};
  for (const auto& cand : candidates) {
    if (!corpus.images.count(cand.image) || !corpus.captions.count(cand.caption))
      throw ValidationError("revise_corpus: candidate references unknown ids");
    EntailmentExample ex;
    ex.premise_image = corpus.images.at(cand.image);
    ex.premise_text = merge_premise_captions(corpus, cand.image);
    ex.hypothesis = corpus.captions.at(cand.caption);
    ex.task_form = TaskForm::IMAGE_TEXT_TEXT;
    EntailmentVerdict v = predict(ex, params, cfg, threshold);
    result.verdicts.push_back({cand, v});
    if (v.decision == Decision::ENTAIL && !corpus.is_gold(cand.image, cand.caption) &&
        !result.corpus.has_weak(cand.image, cand.caption))
      result.corpus.weak.push_back({cand.image, cand.caption, v.p_entail});
  }
  result.corpus.validate();
  return result;
}

// ---- corpus statistics ----

struct CorpusStats {
  std::map<std::string, std::size_t> images_per_caption;  // gold + weak
  std::map<std::string, std::size_t> captions_per_image;
  std::size_t max_images_per_caption = 0;
  std::size_t max_captions_per_image = 0;
  std::map<std::size_t, std::size_t> caption_degree_histogram;
  std::size_t edge_count = 0;
};

inline CorpusStats corpus_stats(const RetrievalCorpus& corpus) {
  CorpusStats st;
  for (const auto& [id, t] : corpus.captions) st.images_per_caption[id] = 0;
  for (const auto& [id, g] : corpus.images) st.captions_per_image[id] = 0;
  auto count = [&](const std::string& img, const std::string& cap) {
    ++st.images_per_caption[cap];
    ++st.captions_per_image[img];
    ++st.edge_count;
  };
  for (const auto& [img, caps] : corpus.gold)
    for (const auto& cap : caps) count(img, cap);
  for (const auto& e : corpus.weak) count(e.image, e.caption);
  for (const auto& [cap, n] : st.images_per_caption) {
    st.max_images_per_caption = std::max(st.max_images_per_caption, n);
    ++st.caption_degree_histogram[n];
  }
  for (const auto& [img, n] : st.captions_per_image)
    st.max_captions_per_image = std::max(st.max_captions_per_image, n);
  return st;
}

// ---- synthetic planted-cluster corpus ----

struct SyntheticSpec {
  std::size_t cluster_count = 8;
  std::size_t images_per_cluster = 16;
  std::size_t captions_per_image = 5;
  std::size_t core_words_per_cluster = 12;
  std::size_t filler_words = 10;
  double noise = 0.08;
  std::uint64_t seed = 1;
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::string split = "train";
};

// Ground-truth entailment: a caption is entailed by an image iff the two come
// from the same planted cluster.
struct ClusterOracle {
  std::unordered_map<std::string, int> image_cluster;
  std::unordered_map<std::string, int> caption_cluster;

  bool entailed(const std::string& image, const std::string& caption) const {
    auto i = image_cluster.find(image);
    auto c = caption_cluster.find(caption);
    if (i == image_cluster.end() || c == caption_cluster.end())
      throw ValidationError("ClusterOracle: unknown id");
    return i->second == c->second;
  }
};

struct SyntheticCorpus {
  RetrievalCorpus corpus;
  ClusterOracle oracle;
};

namespace detail {

inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

// Each cluster owns a color pair and a binary patch pattern (the motif) plus
// a disjoint core vocabulary. Images are the motif with per-image brightness
// jitter and uniform pixel noise; captions mix core words with shared filler.
// Each image also carries a learnable identity: its index is encoded as a
// brightness bit code in the top row of patches, and its id appears as a word
// in each of its captions. Without it, images within a cluster would be
// near-duplicates and gold assignment within a cluster would be arbitrary,
// i.e. within-cluster retrieval would be unlearnable by construction.
// Pixels are quantized to float32 so saved corpora round-trip exactly.
inline SyntheticCorpus synth_generate(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  SyntheticCorpus out;
  out.corpus.split = spec.split;
  std::size_t side = spec.image_size / spec.patch_size;
  std::size_t patch_count = side * side;

  struct Motif {
    std::vector<int> pattern;       // one bit per patch
    double color_a[3], color_b[3];  // two cluster colors
  };
  std::vector<Motif> motifs(spec.cluster_count);
  for (auto& m : motifs) {
    m.pattern.resize(patch_count);
    for (auto& b : m.pattern) b = rng.index(2) ? 1 : 0;
    for (int c = 0; c < 3; ++c) {
      m.color_a[c] = rng.uniform(0.15, 0.9);
      m.color_b[c] = rng.uniform(0.15, 0.9);
    }
  }

  std::vector<std::string> filler(spec.filler_words);
  for (std::size_t f = 0; f < filler.size(); ++f) filler[f] = "filler" + std::to_string(f);

  for (std::size_t k = 0; k < spec.cluster_count; ++k) {
    std::vector<std::string> core(spec.core_words_per_cluster);
    for (std::size_t w = 0; w < core.size(); ++w)
      core[w] = "cluster" + std::to_string(k) + "word" + std::to_string(w);
    for (std::size_t i = 0; i < spec.images_per_cluster; ++i) {
      std::string img_id = "img" + std::to_string(k) + "_" + std::to_string(i);
      double jitter = rng.uniform(-0.05, 0.05);
      PatchGrid g;
      g.image_size = spec.image_size;
      g.channels = 3;
      g.patch_size = spec.patch_size;
      g.pixels.resize(spec.image_size * spec.image_size * 3);
      for (std::size_t y = 0; y < spec.image_size; ++y)
        for (std::size_t x = 0; x < spec.image_size; ++x) {
          std::size_t p = (y / spec.patch_size) * side + (x / spec.patch_size);
          const double* col =
              motifs[k].pattern[p] ? motifs[k].color_a : motifs[k].color_b;
          // identity bit code: top-row patch p brightens/darkens with bit p of i
          double ident = p < side ? ((i >> p) & 1 ? 0.22 : -0.22) : 0.0;
          for (std::size_t c = 0; c < 3; ++c) {
            double v = col[c] + jitter + ident + spec.noise * rng.uniform(-1.0, 1.0);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            g.pixels[(y * spec.image_size + x) * 3 + c] = detail::quantize_f32(v);
          }
        }
      out.corpus.images[img_id] = std::move(g);
      out.oracle.image_cluster[img_id] = static_cast<int>(k);
      for (std::size_t j = 0; j < spec.captions_per_image; ++j) {
        std::string cap_id = "cap" + std::to_string(k) + "_" + std::to_string(i) + "_" +
                             std::to_string(j);
        std::string text = "a " + filler[rng.index(filler.size())] + " " + img_id;
        std::size_t words = 3 + rng.index(2);
        for (std::size_t w = 0; w < words; ++w) text += " " + core[rng.index(core.size())];
        // repeat the subject id so it carries real weight in bag-of-words views
        text += " " + img_id + " " + filler[rng.index(filler.size())];
        out.corpus.captions[cap_id] = text;
        out.corpus.gold[img_id].push_back(cap_id);
        out.oracle.caption_cluster[cap_id] = static_cast<int>(k);
      }
    }
  }
  out.corpus.validate();
  return out;
}

}  // namespace entailkit
