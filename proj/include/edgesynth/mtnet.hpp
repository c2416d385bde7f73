#pragma once

#include <string>
#include <vector>

#include "edgesynth/config.hpp"
#include "edgesynth/edgemae.hpp"

namespace edgesynth {

// Resolution/channel schedule derived from the encoder grid. The large
// branch starts at twice the encoder grid and halves down to a 2x2
// bottleneck, doubling channels at each patch merge; the small branch runs
// one downsampling stage fewer. Channels agree 2:1 across branches, so each
// decoder resolution r fuses the large skip at r with the small output at
// r/2.
struct StagePlan {
  struct Level {
    int res;
    int channels;
  };
  std::vector<Level> large;
  std::vector<Level> small;
};
StagePlan make_stage_plan(const EdgeMaeConfig& enc, const MtNetConfig& cfg);

ParamStore init_mt_net_params(const EdgeMaeConfig& enc, const MtNetConfig& cfg,
                              uint64_t seed);

void store_mt_config(ParamStore& s, const MtNetConfig& cfg);
MtNetConfig read_mt_config(const ParamStore& s, const EdgeMaeConfig& enc);

// Full-sequence encoder forward (no masking), tokens reshaped to the grid,
// plus a 2x bilinear upsample with half-pixel centers.
struct Pyramid {
  ag::VPtr f_small;  // [grid^2, enc_dim]
  ag::VPtr f_large;  // [(2*grid)^2, enc_dim]
};
Pyramid build_feature_pyramid(const Image& src, GraphParams& encP,
                              const EdgeMaeConfig& cfg);
Pyramid build_feature_pyramid_node(const ag::VPtr& patch_tokens,
                                   GraphParams& encP, const EdgeMaeConfig& cfg);

// Per-level branch outputs (after the level's two window-attention layers,
// before the merge into the next level).
struct BranchResult {
  std::vector<ag::VPtr> levels;
};
BranchResult run_branch(const ag::VPtr& feat, GraphParams& P,
                        const std::string& branch,
                        const std::vector<StagePlan::Level>& levels,
                        const MtNetConfig& cfg);

// Two-way channel softmax over pooled descriptors: a = e^l / (e^l + e^s),
// b = 1 - a, elementwise over the channel axis.
std::pair<ag::VPtr, ag::VPtr> channel_softmax_pair(const ag::VPtr& p_l,
                                                   const ag::VPtr& p_s);

// Dual-scale selective fusion: transposed-conv upsample of the small skip,
// two sigmoid spatial gates, channel softmax over pooled descriptors, and
// the convex per-channel blend of the gated features.
ag::VPtr dsf_fuse(const ag::VPtr& f_large, const ag::VPtr& f_small,
                  const ag::VPtr& f_dec, int res, GraphParams& P,
                  const std::string& prefix);

// Decoder over the recorded skips; returns the [H, W] synthesis in (0,1).
ag::VPtr decode_synthesis(const BranchResult& large, const BranchResult& small,
                          GraphParams& P, const StagePlan& plan,
                          const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg);

ag::VPtr mtnet_forward(const Image& src, GraphParams& encP, GraphParams& mtP,
                       const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg);

// Plain forward for the CLI/eval path; `store` holds enc.* and mt.* tensors.
Image synthesize(const Image& src, const ParamStore& store,
                 const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg);

}  // namespace edgesynth
