#pragma once

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "edgesynth/config.hpp"
#include "edgesynth/losses.hpp"
#include "edgesynth/metrics.hpp"

namespace edgesynth {

// lr schedule shared by both stages: base for the first half of the epochs,
// base/10 for the rest.
double scheduled_lr(double base, int epoch, int epochs);

// Per-sample gradients computed independently (optionally across threads)
// and reduced strictly in sample order, so thread count never changes bytes.
std::pair<double, GradMap> batched_grads(
    int n, int threads,
    const std::function<std::pair<double, GradMap>(int)>& fn);

struct PretrainRunResult {
  std::vector<double> epoch_losses;
  int64_t steps = 0;
};

// Self-supervised pretraining over single-modality images (pairing not
// required); stage 1 before the switch epoch, stage 2 after.
PretrainRunResult pretrain_run(const std::vector<Image>& train_images,
                               ParamStore& params, const EdgeMaeConfig& cfg,
                               const PretrainConfig& tcfg,
                               std::ostream* log = nullptr);

// All single-modality train images of a manifest (the pretraining pool).
std::vector<Image> pretrain_pool(const DatasetManifest& manifest);

struct FinetunePair {
  Image src;
  Image tgt;
};
std::vector<FinetunePair> paired_pool(const DatasetManifest& manifest,
                                      Direction dir);

// enc.* copied from the pretraining checkpoint (first `freeze_layers` blocks
// and the patch embed frozen) plus freshly initialized mt.* tensors.
ParamStore make_finetune_store(const ParamStore& pretrained,
                               const EdgeMaeConfig& enc_cfg,
                               const MtNetConfig& mt_cfg, uint64_t seed,
                               int freeze_layers);

// enc.*-only copy of a checkpoint (the fixed feature-consistency encoder).
ParamStore extract_encoder(const ParamStore& pretrained);

struct FinetuneRunResult {
  std::vector<double> epoch_losses;
};

FinetuneRunResult finetune_run(const std::vector<FinetunePair>& pairs,
                               ParamStore& tune, const ParamStore& frozen_enc,
                               const EdgeMaeConfig& enc_cfg,
                               const MtNetConfig& mt_cfg,
                               const FinetuneConfig& tcfg,
                               std::ostream* log = nullptr);

// clip(contrast * px + brightness) on the source image only.
Image augment_image(const Image& img, double brightness, double contrast);

// Masked-pixel L1 of the imputation head vs. the mean-fill baseline, under
// identical deterministically drawn masks.
double masked_l1_model(const std::vector<Image>& images,
                       const ParamStore& params, const EdgeMaeConfig& cfg,
                       uint64_t mask_seed);
double masked_l1_meanfill(const std::vector<Image>& images,
                          const EdgeMaeConfig& cfg, uint64_t mask_seed);

}  // namespace edgesynth
