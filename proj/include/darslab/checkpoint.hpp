#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "darslab/errors.hpp"
#include "darslab/policy.hpp"

namespace darslab {

struct Checkpoint {
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  Policy policy;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'D', 'L', 'A', 'B', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace detail

// Binary snapshot of (step, seed, weights). Written to a temp file and
// renamed into place, so an interrupted write never leaves a torn
// checkpoint behind.
inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint-write: cannot open " + tmp.string());
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_pod(out, ckpt.step);
    detail::write_pod(out, ckpt.seed);
    detail::write_pod(out, static_cast<std::uint32_t>(ckpt.policy.feature_dim));
    detail::write_pod(out, static_cast<std::uint32_t>(ckpt.policy.vocab_size));
    out.write(reinterpret_cast<const char*>(ckpt.policy.weights.data()),
              static_cast<std::streamsize>(ckpt.policy.weights.size() * sizeof(double)));
    if (!out) throw IoError("checkpoint-write: short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("checkpoint-write: rename failed: " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint-parse: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
    throw IoError("checkpoint-parse: bad magic in " + path.string());
  Checkpoint ckpt;
  std::uint32_t d = 0;
  std::uint32_t v = 0;
  detail::read_pod(in, ckpt.step);
  detail::read_pod(in, ckpt.seed);
  detail::read_pod(in, d);
  detail::read_pod(in, v);
  if (!in || d == 0 || v == 0 || d > (1u << 20) || v > (1u << 20))
    throw IoError("checkpoint-parse: bad header in " + path.string());
  ckpt.policy.feature_dim = static_cast<int>(d);
  ckpt.policy.vocab_size = static_cast<int>(v);
  ckpt.policy.weights.resize(static_cast<std::size_t>(d) * v);
  in.read(reinterpret_cast<char*>(ckpt.policy.weights.data()),
          static_cast<std::streamsize>(ckpt.policy.weights.size() * sizeof(double)));
  if (!in) throw IoError("checkpoint-parse: truncated weights in " + path.string());
  char extra;
  if (in.read(&extra, 1)) throw IoError("checkpoint-parse: trailing bytes in " + path.string());
  return ckpt;
}

}  // namespace darslab
