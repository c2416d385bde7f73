#include "edgesynth/losses.hpp"

#include <cmath>

#include "edgesynth/patch.hpp"

namespace edgesynth {

ag::VPtr pixel_loss_node(const ag::VPtr& yhat, const Tensor& y) {
  ES_CHECK(yhat->val.same_shape(y), "pixel loss shape mismatch: " +
                                        yhat->val.shape_str() + " vs " +
                                        Tensor(y).shape_str());
  return ag::mean_all(ag::abs(ag::sub(yhat, ag::constant(y))));
}

double pixel_loss(const Tensor& yhat, const Tensor& y) {
  return pixel_loss_node(ag::constant(yhat), y)->val.data[0];
}

std::vector<Tensor> encoder_layer_features(const Image& img,
                                           const ParamStore& frozen_enc,
                                           const EdgeMaeConfig& cfg) {
  GraphParams P(frozen_enc, /*freeze_all=*/true);
  Tensor tokens = patchify(img, cfg.patch_size).tokens;
  std::vector<int> pos(static_cast<size_t>(cfg.n_patches()));
  for (int i = 0; i < cfg.n_patches(); ++i) pos[static_cast<size_t>(i)] = i;
  EncoderResult enc = run_mae_encoder(ag::constant(tokens), pos, P, cfg);
  std::vector<Tensor> feats;
  feats.reserve(enc.per_layer.size());
  for (const auto& l : enc.per_layer) feats.push_back(l->val);
  return feats;
}

ag::VPtr feature_consistency_node(const ag::VPtr& yhat_image,
                                  const std::vector<Tensor>& target_features,
                                  GraphParams& frozenP, const EdgeMaeConfig& cfg,
                                  double* min_abs_diff) {
  ag::VPtr tokens = patchify_node(yhat_image, cfg.patch_size);
  std::vector<int> pos(static_cast<size_t>(cfg.n_patches()));
  for (int i = 0; i < cfg.n_patches(); ++i) pos[static_cast<size_t>(i)] = i;
  EncoderResult enc = run_mae_encoder(tokens, pos, frozenP, cfg);
  ES_CHECK(enc.per_layer.size() == target_features.size(),
           "feature layer count mismatch");
  ag::VPtr total;
  for (size_t j = 0; j < target_features.size(); ++j) {
    ag::VPtr diff = ag::sub(enc.per_layer[j], ag::constant(target_features[j]));
    if (min_abs_diff)
      for (double v : diff->val.data)
        *min_abs_diff = std::min(*min_abs_diff, std::fabs(v));
    ag::VPtr term = ag::mean_all(ag::abs(diff));
    total = total ? ag::add(total, term) : term;
  }
  return total;
}

double feature_consistency_loss(const Image& yhat, const Image& y,
                                const ParamStore& frozen_enc,
                                const EdgeMaeConfig& cfg) {
  GraphParams P(frozen_enc, /*freeze_all=*/true);
  auto targets = encoder_layer_features(y, frozen_enc, cfg);
  return feature_consistency_node(ag::constant(yhat.to_tensor()), targets, P,
                                  cfg, nullptr)
      ->val.data[0];
}

double finetune_loss(const Image& yhat, const Image& y,
                     const ParamStore& frozen_enc, const EdgeMaeConfig& cfg) {
  return pixel_loss(yhat.to_tensor(), y.to_tensor()) +
         feature_consistency_loss(yhat, y, frozen_enc, cfg);
}

ag::VPtr finetune_sample_loss(const Image& src, const Image& target,
                              GraphParams& encP, GraphParams& mtP,
                              GraphParams& frozenP,
                              const std::vector<Tensor>& target_features,
                              const EdgeMaeConfig& enc_cfg,
                              const MtNetConfig& mt_cfg,
                              double* min_abs_residual) {
  ag::VPtr yhat = mtnet_forward(src, encP, mtP, enc_cfg, mt_cfg);
  ag::VPtr pix = pixel_loss_node(yhat, target.to_tensor());
  if (min_abs_residual) {
    Tensor yt = target.to_tensor();
    for (size_t i = 0; i < yt.data.size(); ++i)
      *min_abs_residual =
          std::min(*min_abs_residual, std::fabs(yhat->val.data[i] - yt.data[i]));
  }
  ag::VPtr feat = feature_consistency_node(yhat, target_features, frozenP,
                                           enc_cfg, min_abs_residual);
  return ag::add(pix, feat);
}

}  // namespace edgesynth
