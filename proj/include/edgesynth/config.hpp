#pragma once

#include <cstdint>
#include <string>

#include "edgesynth/common.hpp"

namespace edgesynth {

// Edge-preserving masked-autoencoder architecture. Defaults are a scale-down
// of the full-size 12-layer/128-dim encoder with 8-layer/64-dim decoders
// sharing their first three layers; every ratio is preserved and the full
// size stays reachable through config keys.
struct EdgeMaeConfig {
  int image_size = 64;
  int patch_size = 8;
  int enc_dim = 64;
  int enc_layers = 6;
  int enc_heads = 4;
  int dec_dim = 32;
  int dec_heads = 2;
  int dec_layers = 4;
  int dec_shared_layers = 2;
  double mask_ratio = 0.70;
  double lambda_imp = 5.0;
  double lambda_edge = 1.0;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  void validate() const;
  uint64_t hash() const;

  // 16x16 image, P=8 (2x2 token grid), 8-dim one-layer stacks; small enough
  // for elementwise finite differences over every tensor.
  static EdgeMaeConfig micro();
};

// Dual-branch multi-scale synthesizer. Stage layout is derived from the
// encoder grid: the large branch halves resolution down to a 2x2 bottleneck
// and the small branch runs one downsampling stage fewer.
struct MtNetConfig {
  int base_channels = 32;
  int window = 4;
  int head_dim = 16;

  void validate(const EdgeMaeConfig& enc) const;
  uint64_t hash() const;

  static MtNetConfig micro();
};

struct PretrainConfig {
  uint64_t seed = 7;
  int epochs = 60;
  int stage_switch_epoch = 0;  // 0 -> epochs / 2
  double lr = 5e-4;
  int batch = 16;
  int threads = 1;

  int resolved_stage_switch() const {
    return stage_switch_epoch > 0 ? stage_switch_epoch : epochs / 2;
  }
};

struct FinetuneConfig {
  uint64_t seed = 7;
  int epochs = 40;
  double lr = 3e-4;
  int batch = 8;
  double paired_ratio = 0.7;
  int freeze_layers = -1;  // -1 -> enc_layers / 2
  bool augment = true;
  int threads = 1;

  int resolved_freeze(const EdgeMaeConfig& enc) const {
    return freeze_layers >= 0 ? freeze_layers : enc.enc_layers / 2;
  }
};

uint64_t fnv1a64(const std::string& s);

}  // namespace edgesynth
