#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "entailkit/entailment.hpp"

namespace entailkit {

struct MaskSpec {
  double ratio = 0.4;
  std::size_t max_images_per_batch = 4;

  void validate() const {
    if (!(ratio > 0.0 && ratio < 1.0))
      throw ValidationError("MaskSpec: ratio must lie in (0,1)");
  }

  std::size_t mask_count(std::size_t patch_count) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(ratio * patch_count));
  }
};

// Patch ids with the highest attention scores; k = max(1, floor(ratio * n)).
// Ties break by ascending patch index.
inline std::vector<std::size_t> top_attention_patches(const AttentionProfile& attn,
                                                      double ratio) {
  MaskSpec spec;
  spec.ratio = ratio;
  spec.validate();
  attn.validate();
  std::size_t n = attn.scores.size();
  std::size_t k = spec.mask_count(n);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return attn.scores[a] > attn.scores[b];
  });
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Zero out the listed patches; every other pixel stays bit-identical.
inline PatchGrid mask_image(const PatchGrid& grid, const std::vector<std::size_t>& ids) {
  grid.validate();
  PatchGrid out = grid;
  std::size_t side = grid.image_size / grid.patch_size;
  for (std::size_t p : ids) {
    if (p >= grid.patch_count()) throw ValidationError("mask_image: patch id out of range");
    std::size_t pr = p / side, pc = p % side;
    for (std::size_t r = 0; r < grid.patch_size; ++r)
      for (std::size_t c = 0; c < grid.patch_size; ++c)
        for (std::size_t ch = 0; ch < grid.channels; ++ch)
          out.pixels[((pr * grid.patch_size + r) * grid.image_size + pc * grid.patch_size + c) *
                         grid.channels +
                     ch] = 0.0;
  }
  return out;
}

// Clone up to max_images_per_batch positive image-text examples (first in
// batch order), mask their most-attended patches and flip the label. The
// originals are untouched; negatives are appended.
inline std::vector<EntailmentExample> augment_batch(
    const std::vector<EntailmentExample>& batch, const MaskSpec& spec, ParamSet& params,
    const ModelConfig& cfg) {
  spec.validate();
  std::vector<EntailmentExample> out = batch;
  std::size_t taken = 0;
  for (const auto& ex : batch) {
    if (taken >= spec.max_images_per_batch) break;
    if (ex.label != 1 || !ex.premise_image) continue;
    if (ex.task_form == TaskForm::TEXT_TEXT) continue;
    ImageEncoding enc = encode_image(*ex.premise_image, params, "vit", cfg);
    auto ids = top_attention_patches(enc.attn, spec.ratio);
    EntailmentExample neg = ex;
    neg.premise_image = mask_image(*ex.premise_image, ids);
    neg.label = 0;
    out.push_back(std::move(neg));
    ++taken;
  }
  return out;
}

}  // namespace entailkit
