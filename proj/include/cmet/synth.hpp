#pragma once

#include <cstdint>
#include <vector>

#include "cmet/config.hpp"
#include "cmet/datamodel.hpp"

// Synthetic world with a known cross-modal structure. Audio embeddings are
// content + a per-emotion offset u_e; visual frames are an identity base +
// the mapped offset vis(u_e). The map applies M (orthonormal rows times
// map_scale) and, when warp > 0, a fixed smooth elementwise bend, so the
// ground-truth visual semantic vector vis(u_j) - vis(u_i) is exactly known.

namespace cmet {

struct OracleWorld {
  WorldCfg cfg;
  uint64_t seed = 0;
  std::vector<double> emotion_offsets;  // E x d_a, row e = u_e
  std::vector<double> map;              // d_v x d_a, M
  std::vector<double> warp_proj;        // d_v x d_v, fixed matrix inside the warp
  std::vector<double> identity_bases;   // P x d_v, b_p
  std::vector<double> identity_content; // P x d_a, audio content per identity
  double min_offset_dist = 0;           // achieved min pairwise |u_i - u_j|

  const double* offset(int e) const { return emotion_offsets.data() + (size_t)e * cfg.d_a; }
  const double* base(int p) const { return identity_bases.data() + (size_t)p * cfg.d_v; }
  const double* content(int p) const { return identity_content.data() + (size_t)p * cfg.d_a; }

  // M x, then the optional warp: y_i += warp * sin((W y)_i)
  std::vector<double> visual_offset(int e) const;

  // Ground-truth visual semantic vector for i -> j, identical on every frame;
  // returns T x d_v frame-major.
  std::vector<double> oracle_sv(int i, int j) const;
};

OracleWorld gen_world(const WorldCfg& cfg, uint64_t seed);
EmbeddingDataset gen_dataset(const OracleWorld& world);

// Rebuilds the world recorded in a dataset's provenance note.
// Throws a config error when the provenance is not a synthetic-world record.
OracleWorld world_from_provenance(const std::string& provenance);

}  // namespace cmet
