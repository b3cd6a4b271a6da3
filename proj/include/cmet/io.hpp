#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmet/datamodel.hpp"
#include "cmet/tensor.hpp"

// On-disk containers. Both share one envelope:
//   magic (4 bytes) | format version u32 LE | manifest length u64 LE |
//   manifest (UTF-8 JSON) | payload bytes
// Dataset files (.cmed, magic "CMED") carry float32 LE payloads; sample
// entries record byte offsets/lengths relative to the payload start, visual
// clips frame-major T x d_v. Checkpoints (.cmck, magic "CMCK") carry
// parameter and optimizer-moment blobs in the precision named by the
// manifest, plus step counter, RNG state, and a full config echo.

namespace cmet {

void write_dataset(const EmbeddingDataset& ds, const std::string& path);
EmbeddingDataset read_dataset(const std::string& path);

struct BlobEntry {
  std::string name;
  Shape shape;
  uint64_t off = 0;  // bytes from payload start
  uint64_t len = 0;  // bytes
};

struct Checkpoint {
  long long step = 0;
  long long adam_step = 0;
  std::string precision = "float32";  // float32 | float64
  std::array<uint64_t, 4> rng_state{};
  nlohmann::json config;  // full resolved run config
  std::vector<BlobEntry> params, adam_m, adam_v;
  std::vector<unsigned char> payload;

  // Appends the tensor's raw little-endian bytes and returns its entry.
  template <class S>
  BlobEntry append_blob(const std::string& name, const Tensor<S>& t);

  template <class S>
  Tensor<S> fetch(const BlobEntry& e) const;
};

void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace cmet
