#pragma once

#include <vector>

#include "edgesynth/config.hpp"
#include "edgesynth/edgemae.hpp"
#include "edgesynth/mtnet.hpp"

namespace edgesynth {

// mean |yhat - y| over all pixels
ag::VPtr pixel_loss_node(const ag::VPtr& yhat, const Tensor& y);
double pixel_loss(const Tensor& yhat, const Tensor& y);

// Per-layer encoder activations of an image under a frozen encoder, as plain
// tensors (targets for the consistency term, cacheable per image).
std::vector<Tensor> encoder_layer_features(const Image& img,
                                           const ParamStore& frozen_enc,
                                           const EdgeMaeConfig& cfg);

// Sum over layers of mean |F_j(yhat) - F_j(y)|. Gradients flow into yhat
// only; the consistency encoder's weights stay fixed. min_abs_diff, when
// given, is lowered to the smallest |difference| seen in any layer term.
ag::VPtr feature_consistency_node(const ag::VPtr& yhat_image,
                                  const std::vector<Tensor>& target_features,
                                  GraphParams& frozenP, const EdgeMaeConfig& cfg,
                                  double* min_abs_diff = nullptr);
double feature_consistency_loss(const Image& yhat, const Image& y,
                                const ParamStore& frozen_enc,
                                const EdgeMaeConfig& cfg);

// pixel + feature consistency at unit weights
double finetune_loss(const Image& yhat, const Image& y,
                     const ParamStore& frozen_enc, const EdgeMaeConfig& cfg);

// Loss graph for one fine-tuning pair: synthesize target from source, then
// pixel + consistency terms against the target image and its cached frozen
// features. min_abs_residual (optional) reports the smallest |difference|
// entering any L1 term.
ag::VPtr finetune_sample_loss(const Image& src, const Image& target,
                              GraphParams& encP, GraphParams& mtP,
                              GraphParams& frozenP,
                              const std::vector<Tensor>& target_features,
                              const EdgeMaeConfig& enc_cfg,
                              const MtNetConfig& mt_cfg,
                              double* min_abs_residual = nullptr);

}  // namespace edgesynth
