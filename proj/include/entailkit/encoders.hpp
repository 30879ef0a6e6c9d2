#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "entailkit/autodiff.hpp"

namespace entailkit {

// Desk-scale model geometry. Shrunk uniformly from the usual 12-layer stacks
// so the full graph trains on a CPU in minutes.
struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;
  std::size_t text_layers = 2;
  std::size_t image_layers = 2;
  std::size_t cross_layers = 2;
  std::size_t vocab_size = 2048;
  std::size_t max_len = 64;
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::size_t ffn_mult = 4;

  std::size_t patch_count() const {
    std::size_t side = image_size / patch_size;
    return side * side;
  }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t ffn_dim() const { return ffn_mult * hidden_dim; }

  void validate() const {
    if (image_size % patch_size != 0)
      throw ValidationError("ModelConfig: image_size not divisible by patch_size");
    if (hidden_dim % heads != 0)
      throw ValidationError("ModelConfig: hidden_dim not divisible by heads");
    if (vocab_size < 8) throw ValidationError("ModelConfig: vocab_size too small");
  }

  // Tiny geometry for gradient checks: finite differences over every
  // parameter component stay fast.
  static ModelConfig tiny() {
    ModelConfig c;
    c.hidden_dim = 8;
    c.heads = 2;
    c.text_layers = 1;
    c.image_layers = 1;
    c.cross_layers = 1;
    c.vocab_size = 32;
    c.max_len = 8;
    c.image_size = 16;
    c.patch_size = 8;
    c.ffn_mult = 2;
    return c;
  }
};

// ---- tokenization ----

inline constexpr int kClsId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kPadId = 2;

struct TokenSequence {
  std::vector<int> ids;  // fixed length cfg.max_len, PAD-trailing

  std::size_t effective_len() const {
    std::size_t n = ids.size();
    while (n > 0 && ids[n - 1] == kPadId) --n;
    return n;
  }
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::vector<std::string> split_lower(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(cur), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

}  // namespace detail

// Hashing tokenizer: lowercase, whitespace split, words hashed into
// vocab_size-3 buckets offset past the special ids.
inline int hash_token(const std::string& word, const ModelConfig& cfg) {
  return static_cast<int>(detail::fnv1a64(word) % (cfg.vocab_size - 3)) + 3;
}

inline TokenSequence tokenize(const std::string& text, const ModelConfig& cfg) {
  TokenSequence seq;
  seq.ids.reserve(cfg.max_len);
  seq.ids.push_back(kClsId);
  for (const auto& w : detail::split_lower(text)) {
    if (seq.ids.size() >= cfg.max_len) break;
    seq.ids.push_back(hash_token(w, cfg));
  }
  seq.ids.resize(cfg.max_len, kPadId);
  return seq;
}

// Pack (premise, hypothesis) as [CLS] premise [SEP] hypothesis. Premise is
// truncated first when the pair overflows max_len.
inline TokenSequence pack_pair(const TokenSequence& premise, const TokenSequence& hypothesis,
                               const ModelConfig& cfg) {
  std::vector<int> p(premise.ids.begin() + 1, premise.ids.begin() + premise.effective_len());
  std::vector<int> h(hypothesis.ids.begin() + 1,
                     hypothesis.ids.begin() + hypothesis.effective_len());
  std::size_t budget = cfg.max_len - 2;  // CLS + SEP
  if (h.size() > budget) h.resize(budget);
  if (p.size() + h.size() > budget) p.resize(budget - h.size());
  TokenSequence out;
  out.ids.reserve(cfg.max_len);
  out.ids.push_back(kClsId);
  out.ids.insert(out.ids.end(), p.begin(), p.end());
  out.ids.push_back(kSepId);
  out.ids.insert(out.ids.end(), h.begin(), h.end());
  out.ids.resize(cfg.max_len, kPadId);
  return out;
}

// ---- images ----

struct PatchGrid {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::vector<double> pixels;  // H x W x C row-major, values in [0,1]

  static PatchGrid black(const ModelConfig& cfg) {
    PatchGrid g;
    g.image_size = cfg.image_size;
    g.channels = cfg.channels;
    g.patch_size = cfg.patch_size;
    g.pixels.assign(cfg.image_size * cfg.image_size * cfg.channels, 0.0);
    return g;
  }

  std::size_t patch_count() const {
    std::size_t side = image_size / patch_size;
    return side * side;
  }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  void validate() const {
    if (image_size % patch_size != 0)
      throw ValidationError("PatchGrid: image_size not divisible by patch_size");
    if (pixels.size() != image_size * image_size * channels)
      throw ValidationError("PatchGrid: pixel buffer size mismatch");
  }
};

// Patch raster order; within a patch, (row, col, channel) row-major.
inline Tensor patchify(const PatchGrid& g) {
  g.validate();
  std::size_t side = g.image_size / g.patch_size;
  Tensor out = Tensor::zeros({side * side, g.patch_dim()});
  for (std::size_t pr = 0; pr < side; ++pr)
    for (std::size_t pc = 0; pc < side; ++pc) {
      std::size_t p = pr * side + pc;
      std::size_t k = 0;
      for (std::size_t r = 0; r < g.patch_size; ++r)
        for (std::size_t c = 0; c < g.patch_size; ++c)
          for (std::size_t ch = 0; ch < g.channels; ++ch)
            out.data[p * g.patch_dim() + k++] =
                g.pixels[((pr * g.patch_size + r) * g.image_size + pc * g.patch_size + c) *
                             g.channels +
                         ch];
    }
  return out;
}

inline PatchGrid unpatchify(const Tensor& patches, std::size_t image_size,
                            std::size_t patch_size, std::size_t channels) {
  PatchGrid g;
  g.image_size = image_size;
  g.channels = channels;
  g.patch_size = patch_size;
  g.pixels.assign(image_size * image_size * channels, 0.0);
  std::size_t side = image_size / patch_size;
  std::size_t pd = patch_size * patch_size * channels;
  if (patches.rows() != side * side || patches.cols() != pd)
    throw ShapeError("unpatchify: patch tensor " + patches.shape_str() + " does not fit");
  for (std::size_t pr = 0; pr < side; ++pr)
    for (std::size_t pc = 0; pc < side; ++pc) {
      std::size_t p = pr * side + pc;
      std::size_t k = 0;
      for (std::size_t r = 0; r < patch_size; ++r)
        for (std::size_t c = 0; c < patch_size; ++c)
          for (std::size_t ch = 0; ch < channels; ++ch)
            g.pixels[((pr * patch_size + r) * image_size + pc * patch_size + c) * channels + ch] =
                patches.data[p * pd + k++];
    }
  return g;
}

// Per-patch saliency: attention from the summary position to each patch,
// head-averaged over the final layer and renormalized to sum to 1.
struct AttentionProfile {
  std::vector<double> scores;

  void validate() const {
    double s = 0.0;
    for (double v : scores) {
      if (v < 0.0) throw ValidationError("AttentionProfile: negative score");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("AttentionProfile: not normalized");
  }
};

// ---- parameter initialization ----

namespace detail {

inline void init_affine(ParamSet& params, const std::string& prefix, std::size_t in,
                        std::size_t out, Rng& rng) {
  double std = std::sqrt(2.0 / static_cast<double>(in + out));
  params.ensure(prefix + ".w", random_gaussian({in, out}, std, rng));
  // tiny random biases keep ReLU pre-activations off the exact kink, where
  // finite differences disagree with the subgradient convention
  params.ensure(prefix + ".b", random_gaussian({out}, 0.01, rng));
}

inline void init_layernorm(ParamSet& params, const std::string& prefix, std::size_t d) {
  Tensor gain = Tensor::zeros({d});
  for (auto& v : gain.data) v = 1.0;
  params.ensure(prefix + ".g", std::move(gain));
  params.ensure(prefix + ".b", Tensor::zeros({d}));
}

inline void init_block(ParamSet& params, const std::string& prefix, const ModelConfig& cfg,
                       Rng& rng, bool with_cross) {
  std::size_t d = cfg.hidden_dim;
  for (const char* name : {"q", "k", "v", "o"})
    init_affine(params, prefix + ".attn." + name, d, d, rng);
  init_layernorm(params, prefix + ".ln1", d);
  if (with_cross) {
    for (const char* name : {"q", "k", "v", "o"})
      init_affine(params, prefix + ".xattn." + name, d, d, rng);
    init_layernorm(params, prefix + ".lnx", d);
  }
  init_affine(params, prefix + ".ffn.1", d, cfg.ffn_dim(), rng);
  init_affine(params, prefix + ".ffn.2", cfg.ffn_dim(), d, rng);
  init_layernorm(params, prefix + ".ln2", d);
}

}  // namespace detail

inline void init_text_encoder(ParamSet& params, const std::string& prefix,
                              const ModelConfig& cfg, Rng& rng) {
  params.ensure(prefix + ".tok_emb", random_gaussian({cfg.vocab_size, cfg.hidden_dim}, 0.1, rng));
  params.ensure(prefix + ".pos_emb", random_gaussian({cfg.max_len, cfg.hidden_dim}, 0.1, rng));
  for (std::size_t i = 0; i < cfg.text_layers; ++i)
    detail::init_block(params, prefix + ".l" + std::to_string(i), cfg, rng, false);
}

inline void init_image_encoder(ParamSet& params, const std::string& prefix,
                               const ModelConfig& cfg, Rng& rng) {
  detail::init_affine(params, prefix + ".patch_proj", cfg.patch_dim(), cfg.hidden_dim, rng);
  params.ensure(prefix + ".summary", random_gaussian({1, cfg.hidden_dim}, 0.1, rng));
  params.ensure(prefix + ".pos_emb",
                random_gaussian({cfg.patch_count() + 1, cfg.hidden_dim}, 0.1, rng));
  for (std::size_t i = 0; i < cfg.image_layers; ++i)
    detail::init_block(params, prefix + ".l" + std::to_string(i), cfg, rng, false);
}

inline void init_cross_encoder(ParamSet& params, const std::string& prefix,
                               const ModelConfig& cfg, Rng& rng) {
  params.ensure(prefix + ".tok_emb", random_gaussian({cfg.vocab_size, cfg.hidden_dim}, 0.1, rng));
  params.ensure(prefix + ".pos_emb", random_gaussian({cfg.max_len, cfg.hidden_dim}, 0.1, rng));
  for (std::size_t i = 0; i < cfg.cross_layers; ++i)
    detail::init_block(params, prefix + ".l" + std::to_string(i), cfg, rng, true);
}

// ---- forward passes ----

namespace detail {

inline Var affine_p(ParamSet& params, const std::string& prefix, Var x) {
  return affine(x, params.get(prefix + ".w"), params.get(prefix + ".b"));
}

struct MhaOut {
  Var out;
  Tensor probs_head_avg;  // [nq x nk], head-averaged attention probabilities
};

// Multi-head attention; queries from x, keys/values from ctx.
inline MhaOut multi_head_attention(ParamSet& params, const std::string& prefix, Var x, Var ctx,
                                   const ModelConfig& cfg) {
  std::size_t dh = cfg.hidden_dim / cfg.heads;
  Var q = affine_p(params, prefix + ".q", x);
  Var k = affine_p(params, prefix + ".k", ctx);
  Var v = affine_p(params, prefix + ".v", ctx);
  std::vector<Var> heads;
  Tensor probs_avg = Tensor::zeros({x->value.rows(), ctx->value.rows()});
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var probs = softmax_rows(scores);
    for (std::size_t i = 0; i < probs_avg.numel(); ++i)
      probs_avg.data[i] += probs->value.data[i] / static_cast<double>(cfg.heads);
    heads.push_back(matmul(probs, vh));
  }
  return {affine_p(params, prefix + ".o", concat_cols(heads)), std::move(probs_avg)};
}

inline Var ffn(ParamSet& params, const std::string& prefix, Var x) {
  return affine_p(params, prefix + ".2", relu(affine_p(params, prefix + ".1", x)));
}

inline Var ln(ParamSet& params, const std::string& prefix, Var x) {
  return layer_norm_rows(x, params.get(prefix + ".g"), params.get(prefix + ".b"));
}

// Post-LN encoder block. When `cross_ctx` is set, a cross-attention sublayer
// runs between self-attention and the FFN.
inline MhaOut encoder_block(ParamSet& params, const std::string& prefix, Var x,
                            const ModelConfig& cfg, Var cross_ctx = nullptr) {
  MhaOut self = multi_head_attention(params, prefix + ".attn", x, x, cfg);
  x = ln(params, prefix + ".ln1", add(x, self.out));
  if (cross_ctx) {
    MhaOut cross = multi_head_attention(params, prefix + ".xattn", x, cross_ctx, cfg);
    x = ln(params, prefix + ".lnx", add(x, cross.out));
  }
  x = ln(params, prefix + ".ln2", add(x, ffn(params, prefix + ".ffn", x)));
  return {x, std::move(self.probs_head_avg)};
}

}  // namespace detail

struct TextEncoding {
  Var h;           // CLS-position state, [hidden_dim]
  Var all_states;  // [len x hidden_dim]
};

// Sequences are truncated to their effective (non-PAD) length before the
// stack runs; with PAD keys masked this is bit-identical to padding the
// computation, so downstream states are invariant to trailing PAD.
inline TextEncoding encode_text(const TokenSequence& seq, ParamSet& params,
                                const std::string& prefix, const ModelConfig& cfg) {
  std::size_t n = std::max<std::size_t>(seq.effective_len(), 1);
  std::vector<int> ids(seq.ids.begin(), seq.ids.begin() + n);
  Var x = add(embedding(params.get(prefix + ".tok_emb"), ids),
              slice_rows(params.get(prefix + ".pos_emb"), 0, n));
  for (std::size_t i = 0; i < cfg.text_layers; ++i)
    x = detail::encoder_block(params, prefix + ".l" + std::to_string(i), x, cfg).out;
  return {row_of(x, 0), x};
}

struct ImageEncoding {
  Var patch_states;       // [patch_count x hidden_dim]
  Var summary_state;      // [hidden_dim]
  AttentionProfile attn;  // summary -> patches, final layer, head-averaged
};

inline ImageEncoding encode_image(const PatchGrid& grid, ParamSet& params,
                                  const std::string& prefix, const ModelConfig& cfg) {
  Var patches = constant(patchify(grid));
  Var x = detail::affine_p(params, prefix + ".patch_proj", patches);
  x = concat_rows({params.get(prefix + ".summary"), x});
  x = add(x, slice_rows(params.get(prefix + ".pos_emb"), 0, grid.patch_count() + 1));
  Tensor last_probs;
  for (std::size_t i = 0; i < cfg.image_layers; ++i) {
    auto block = detail::encoder_block(params, prefix + ".l" + std::to_string(i), x, cfg);
    x = block.out;
    last_probs = std::move(block.probs_head_avg);
  }
  AttentionProfile profile;
  std::size_t np = grid.patch_count();
  profile.scores.resize(np);
  double total = 0.0;
  for (std::size_t j = 0; j < np; ++j) {
    profile.scores[j] = last_probs.data[j + 1];  // row 0 = summary; skip self
    total += profile.scores[j];
  }
  for (auto& v : profile.scores) v /= total;
  return {slice_rows(x, 1, np), row_of(x, 0), std::move(profile)};
}

// Cross-modal branch: the hypothesis alone runs through text blocks whose
// cross-attention attends onto the image patch states.
inline Var cross_encode(Var patch_states, const TokenSequence& hypothesis, ParamSet& params,
                        const std::string& prefix, const ModelConfig& cfg) {
  std::size_t n = std::max<std::size_t>(hypothesis.effective_len(), 1);
  std::vector<int> ids(hypothesis.ids.begin(), hypothesis.ids.begin() + n);
  Var x = add(embedding(params.get(prefix + ".tok_emb"), ids),
              slice_rows(params.get(prefix + ".pos_emb"), 0, n));
  for (std::size_t i = 0; i < cfg.cross_layers; ++i)
    x = detail::encoder_block(params, prefix + ".l" + std::to_string(i), x, cfg, patch_states)
            .out;
  return row_of(x, 0);
}

}  // namespace entailkit
