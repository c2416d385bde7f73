#pragma once

#include <string>
#include <vector>

#include "edgesynth/attention.hpp"
#include "edgesynth/config.hpp"
#include "edgesynth/image.hpp"
#include "edgesynth/mask.hpp"
#include "edgesynth/params.hpp"

namespace edgesynth {

// Fixed 2D sinusoidal position table: first half of the channels encodes the
// row coordinate, second half the column, interleaved sin/cos per frequency.
Tensor sincos_pos_embed_2d(int grid_h, int grid_w, int dim);

// Fresh parameter set (encoder + mask token + shared/task decoders), names
// prefixed enc./mae., plus the architecture hash under meta.enc_config_hash.
ParamStore init_edge_mae_params(const EdgeMaeConfig& cfg, uint64_t seed);

// Checkpoints carry their architecture so eval/synth/impute need no flags.
void store_enc_config(ParamStore& s, const EdgeMaeConfig& cfg);
EdgeMaeConfig read_enc_config(const ParamStore& s);

// Rows of `patch_tokens` are flattened patches; pos_rows gives each row's
// patch index in the full grid (drives the position table lookup).
struct EncoderResult {
  ag::VPtr tokens;                   // [rows, enc_dim], post final norm
  std::vector<ag::VPtr> per_layer;   // post-block outputs, one per layer
};
EncoderResult run_mae_encoder(const ag::VPtr& patch_tokens,
                              const std::vector<int>& pos_rows, GraphParams& P,
                              const EdgeMaeConfig& cfg);

// Graph-native patchify of an [H, W] image node; rows ordered like patchify().
ag::VPtr patchify_node(const ag::VPtr& image, int patch);
ag::VPtr unpatchify_node(const ag::VPtr& tokens, int grid_h, int grid_w,
                         int patch);

std::vector<int> visible_rows(const MaskPlan& mask);

// Masked pretraining forward: only visible patches enter the encoder.
EncoderResult encode_visible(const Image& img, const MaskPlan& mask,
                             GraphParams& P, const EdgeMaeConfig& cfg);

// Full sequence in encoder dim: encoded tokens at visible positions, the
// shared learnable mask token elsewhere; then one linear to dec_dim plus the
// decoder position table.
ag::VPtr assemble_decoder_tokens(const EncoderResult& encoded,
                                 const MaskPlan& mask, GraphParams& P,
                                 const EdgeMaeConfig& cfg);

// Task decoders share the first dec_shared_layers blocks (same tensors, so
// both heads push gradients into them). Outputs are sigmoid patch rows.
ag::VPtr run_shared_decoder(const ag::VPtr& tokens, GraphParams& P,
                            const EdgeMaeConfig& cfg);
ag::VPtr decode_imputation(const ag::VPtr& tokens, GraphParams& P,
                           const EdgeMaeConfig& cfg);
ag::VPtr decode_edge(const ag::VPtr& tokens, GraphParams& P,
                     const EdgeMaeConfig& cfg);

// Patch-wise two-stage loss. The imputation term averages over masked pixels
// only; the edge term covers the whole map. Both use the per-patch stage
// weight (2-alpha or 1+alpha) broadcast to every pixel of the patch.
ag::VPtr pretrain_loss(const ag::VPtr& imp_patches, const ag::VPtr& edge_patches,
                       const Tensor& target_patches,
                       const Tensor& edge_target_patches, const Tensor& alpha,
                       const MaskPlan& mask, int stage, double lambda_imp,
                       double lambda_edge);

// Full pretraining loss graph with caller-chosen targets (the gradient
// checker feeds synthetic targets with a guaranteed margin from L1 kinks).
// min_abs_residual, when given, is lowered to the smallest |prediction -
// target| across both terms.
ag::VPtr pretrain_loss_graph(const Image& x, const Tensor& target_patches,
                             const Tensor& edge_target_patches,
                             const MaskPlan& mask, int stage, GraphParams& P,
                             const EdgeMaeConfig& cfg,
                             double* min_abs_residual = nullptr);

// Standard self-supervised objective: y = x, edge target = Sobel(x).
ag::VPtr pretrain_sample_loss(const Image& img, const MaskPlan& mask, int stage,
                              GraphParams& P, const EdgeMaeConfig& cfg,
                              double* min_abs_residual = nullptr);

// Convenience no-grad forward for the CLI / tests.
struct MaeForward {
  Tensor imputed;  // [H, W], sigmoid range
  Tensor edge;
};
MaeForward mae_forward(const Image& img, const MaskPlan& mask,
                       const ParamStore& params, const EdgeMaeConfig& cfg);

}  // namespace edgesynth
