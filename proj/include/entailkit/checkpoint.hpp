#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "entailkit/autodiff.hpp"

namespace entailkit {

// Flat checkpoint archive: magic line, rng seed, then one record per
// parameter (name, shape, little-endian float64 payload). Names are stored in
// ParamSet order so files are byte-reproducible.

inline constexpr const char* kCheckpointMagic = "ENTAILKIT-CKPT-1";

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(os, bits);
}

inline double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline void save_checkpoint(const ParamSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, std::strlen(kCheckpointMagic));
  os.put('\n');
  detail::write_u64(os, params.rng_seed());
  detail::write_u64(os, params.items().size());
  for (const auto& [name, v] : params.items()) {
    detail::write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u64(os, v->value.shape.size());
    for (auto d : v->value.shape) detail::write_u64(os, d);
    for (double x : v->value.data) detail::write_f64(os, x);
  }
  if (!os) throw ValidationError("save_checkpoint: write failed for " + path);
}

inline ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("load_checkpoint: cannot open " + path);
  std::string magic(std::strlen(kCheckpointMagic), '\0');
  is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  char nl = 0;
  is.get(nl);
  if (magic != kCheckpointMagic || nl != '\n')
    throw ValidationError("load_checkpoint: bad magic in " + path);
  ParamSet params(detail::read_u64(is));
  std::uint64_t count = detail::read_u64(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t name_len = detail::read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t rank = detail::read_u64(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::read_u64(is);
    Tensor t = Tensor::zeros(shape);
    for (auto& x : t.data) x = detail::read_f64(is);
    if (!is) throw ValidationError("load_checkpoint: truncated file " + path);
    params.ensure(name, std::move(t));
  }
  return params;
}

}  // namespace entailkit
