#include "edgesynth/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "edgesynth/edgemae.hpp"
#include "edgesynth/mtnet.hpp"

namespace edgesynth {

namespace {
constexpr uint64_t kShuffleTag = 0x73687566ULL;
constexpr uint64_t kMaskTag = 0x6d61736bULL;
constexpr uint64_t kAugTag = 0x617567ULL;

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = rng.uniform_int(i + 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return idx;
}
}  // namespace

double scheduled_lr(double base, int epoch, int epochs) {
  return epoch < (epochs + 1) / 2 ? base : base / 10.0;
}

std::pair<double, GradMap> batched_grads(
    int n, int threads,
    const std::function<std::pair<double, GradMap>(int)>& fn) {
  std::vector<std::pair<double, GradMap>> results(static_cast<size_t>(n));
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) results[static_cast<size_t>(i)] = fn(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t]() {
        for (int i = t; i < n; i += threads)
          results[static_cast<size_t>(i)] = fn(i);
      });
    for (auto& th : pool) th.join();
  }
  double loss_sum = 0.0;
  GradMap total;
  for (int i = 0; i < n; ++i) {  // fixed reduction order
    loss_sum += results[static_cast<size_t>(i)].first;
    for (auto& [name, g] : results[static_cast<size_t>(i)].second) {
      auto it = total.find(name);
      if (it == total.end()) {
        total.emplace(name, g);
      } else {
        for (size_t k = 0; k < g.data.size(); ++k)
          it->second.data[k] += g.data[k];
      }
    }
  }
  double inv = 1.0 / n;
  loss_sum *= inv;
  for (auto& [name, g] : total)
    for (auto& v : g.data) v *= inv;
  return {loss_sum, std::move(total)};
}

std::vector<Image> pretrain_pool(const DatasetManifest& manifest) {
  std::vector<Image> pool;
  for (const auto& e : manifest.entries)
    if (e.split == Split::Train) pool.push_back(manifest.load_image(e));
  return pool;
}

PretrainRunResult pretrain_run(const std::vector<Image>& train_images,
                               ParamStore& params, const EdgeMaeConfig& cfg,
                               const PretrainConfig& tcfg, std::ostream* log) {
  ES_CONFIG_CHECK(!train_images.empty(), "pretraining pool is empty");
  cfg.validate();
  int n = static_cast<int>(train_images.size());
  int switch_epoch = tcfg.resolved_stage_switch();
  PretrainRunResult result;
  int64_t t = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    int stage = epoch < switch_epoch ? 1 : 2;
    double lr = scheduled_lr(tcfg.lr, epoch, tcfg.epochs);
    Rng shuffle_rng(Rng::mix(Rng::mix(tcfg.seed, epoch), kShuffleTag));
    Rng mask_rng(Rng::mix(Rng::mix(tcfg.seed, epoch), kMaskTag));
    auto order = shuffled_indices(n, shuffle_rng);
    double epoch_loss = 0.0;
    int steps_in_epoch = 0;
    for (int b0 = 0; b0 < n; b0 += tcfg.batch) {
      int bsz = std::min(tcfg.batch, n - b0);
      std::vector<const Image*> batch(static_cast<size_t>(bsz));
      std::vector<MaskPlan> masks;
      masks.reserve(static_cast<size_t>(bsz));
      for (int i = 0; i < bsz; ++i) {
        batch[static_cast<size_t>(i)] =
            &train_images[static_cast<size_t>(order[static_cast<size_t>(b0 + i)])];
        masks.push_back(
            sample_mask(cfg.grid(), cfg.grid(), cfg.mask_ratio, mask_rng));
      }
      auto [loss, grads] = batched_grads(
          bsz, tcfg.threads, [&](int i) -> std::pair<double, GradMap> {
            GraphParams P(params);
            ag::VPtr l = pretrain_sample_loss(
                *batch[static_cast<size_t>(i)], masks[static_cast<size_t>(i)],
                stage, P, cfg);
            ag::backward(l);
            GradMap g;
            P.accumulate_grads(g);
            return {l->val.data[0], std::move(g)};
          });
      ES_CHECK(std::isfinite(loss),
               "non-finite pretraining loss at epoch " + std::to_string(epoch));
      adam_step(params, grads, lr, ++t);
      epoch_loss += loss;
      ++steps_in_epoch;
    }
    epoch_loss /= std::max(1, steps_in_epoch);
    result.epoch_losses.push_back(epoch_loss);
    if (log)
      *log << "pretrain epoch " << epoch << " stage " << stage << " lr " << lr
           << " loss " << epoch_loss << "\n";
  }
  result.steps = t;
  return result;
}

std::vector<FinetunePair> paired_pool(const DatasetManifest& manifest,
                                      Direction dir) {
  Modality src_mod = dir == Direction::AtoB ? Modality::A : Modality::B;
  Modality dst_mod = dir == Direction::AtoB ? Modality::B : Modality::A;
  std::vector<FinetunePair> pairs;
  auto ids = manifest.paired_ids(Split::Train);
  std::sort(ids.begin(), ids.end());
  for (uint32_t id : ids)
    pairs.push_back({manifest.load_image(id, src_mod),
                     manifest.load_image(id, dst_mod)});
  return pairs;
}

ParamStore make_finetune_store(const ParamStore& pretrained,
                               const EdgeMaeConfig& enc_cfg,
                               const MtNetConfig& mt_cfg, uint64_t seed,
                               int freeze_layers) {
  ES_CONFIG_CHECK(freeze_layers >= 0 && freeze_layers <= enc_cfg.enc_layers,
                  "freeze_layers out of range");
  auto want_hash = read_meta_u64(pretrained, "meta.enc_config_hash");
  if (want_hash && *want_hash != enc_cfg.hash())
    throw IoError("pretrained checkpoint was built with a different encoder "
                  "config (hash mismatch)");
  ParamStore tune = init_mt_net_params(enc_cfg, mt_cfg, seed);
  ParamStore reference = init_edge_mae_params(enc_cfg, seed);
  for (const auto& name : reference.names()) {
    if (name.rfind("enc.", 0) != 0) continue;
    if (!pretrained.has(name))
      throw IoError("pretrained checkpoint is missing tensor '" + name + "'");
    const Tensor& got = pretrained.at(name).value;
    if (got.shape != reference.at(name).value.shape)
      throw IoError("pretrained tensor '" + name + "' has shape " +
                    got.shape_str() + ", config wants " +
                    reference.at(name).value.shape_str());
    tune.add(name, got, /*trainable=*/true);
  }
  tune.set_trainable("enc.patch_embed.w", false);
  tune.set_trainable("enc.patch_embed.b", false);
  for (int i = 0; i < freeze_layers; ++i) {
    std::string px = "enc.blk" + std::to_string(i);
    for (const auto& name : tune.names())
      if (name.rfind(px + ".", 0) == 0) tune.set_trainable(name, false);
  }
  return tune;
}

ParamStore extract_encoder(const ParamStore& pretrained) {
  ParamStore enc;
  for (const auto& name : pretrained.names())
    if (name.rfind("enc.", 0) == 0 || name.rfind("meta.", 0) == 0)
      enc.add(name, pretrained.at(name).value, false);
  return enc;
}

Image augment_image(const Image& img, double brightness, double contrast) {
  Image out = img;
  for (auto& v : out.px) v = std::clamp(contrast * v + brightness, 0.0, 1.0);
  return out;
}

FinetuneRunResult finetune_run(const std::vector<FinetunePair>& pairs,
                               ParamStore& tune, const ParamStore& frozen_enc,
                               const EdgeMaeConfig& enc_cfg,
                               const MtNetConfig& mt_cfg,
                               const FinetuneConfig& tcfg, std::ostream* log) {
  ES_CONFIG_CHECK(!pairs.empty(), "paired fine-tuning subset is empty");
  int n = static_cast<int>(pairs.size());
  // target features under the fixed encoder never change; cache per pair
  std::vector<std::vector<Tensor>> target_feats;
  target_feats.reserve(static_cast<size_t>(n));
  for (const auto& p : pairs)
    target_feats.push_back(encoder_layer_features(p.tgt, frozen_enc, enc_cfg));

  FinetuneRunResult result;
  int64_t t = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    double lr = scheduled_lr(tcfg.lr, epoch, tcfg.epochs);
    Rng shuffle_rng(Rng::mix(Rng::mix(tcfg.seed, epoch), kShuffleTag));
    Rng aug_rng(Rng::mix(Rng::mix(tcfg.seed, epoch), kAugTag));
    auto order = shuffled_indices(n, shuffle_rng);
    double epoch_loss = 0.0;
    int steps_in_epoch = 0;
    for (int b0 = 0; b0 < n; b0 += tcfg.batch) {
      int bsz = std::min(tcfg.batch, n - b0);
      std::vector<int> pick(static_cast<size_t>(bsz));
      std::vector<Image> srcs(static_cast<size_t>(bsz));
      for (int i = 0; i < bsz; ++i) {
        int k = order[static_cast<size_t>(b0 + i)];
        pick[static_cast<size_t>(i)] = k;
        const Image& raw = pairs[static_cast<size_t>(k)].src;
        if (tcfg.augment) {
          double brightness = aug_rng.uniform(-0.1, 0.1);
          double contrast = aug_rng.uniform(0.9, 1.1);
          srcs[static_cast<size_t>(i)] = augment_image(raw, brightness, contrast);
        } else {
          srcs[static_cast<size_t>(i)] = raw;
        }
      }
      auto [loss, grads] = batched_grads(
          bsz, tcfg.threads, [&](int i) -> std::pair<double, GradMap> {
            int k = pick[static_cast<size_t>(i)];
            GraphParams encP(tune);
            GraphParams mtP(tune);
            GraphParams frozenP(frozen_enc, /*freeze_all=*/true);
            ag::VPtr l = finetune_sample_loss(
                srcs[static_cast<size_t>(i)], pairs[static_cast<size_t>(k)].tgt,
                encP, mtP, frozenP, target_feats[static_cast<size_t>(k)],
                enc_cfg, mt_cfg);
            ag::backward(l);
            GradMap g;
            encP.accumulate_grads(g);
            mtP.accumulate_grads(g);
            return {l->val.data[0], std::move(g)};
          });
      ES_CHECK(std::isfinite(loss),
               "non-finite fine-tune loss at epoch " + std::to_string(epoch));
      adam_step(tune, grads, lr, ++t);
      epoch_loss += loss;
      ++steps_in_epoch;
    }
    epoch_loss /= std::max(1, steps_in_epoch);
    result.epoch_losses.push_back(epoch_loss);
    if (log)
      *log << "finetune epoch " << epoch << " lr " << lr << " loss "
           << epoch_loss << "\n";
  }
  return result;
}

namespace {
std::vector<MaskPlan> eval_masks(int count, const EdgeMaeConfig& cfg,
                                 uint64_t mask_seed) {
  Rng rng(Rng::mix(mask_seed, kMaskTag));
  std::vector<MaskPlan> masks;
  masks.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    masks.push_back(sample_mask(cfg.grid(), cfg.grid(), cfg.mask_ratio, rng));
  return masks;
}

double masked_l1(const Image& img, const Tensor& filled, const MaskPlan& mask,
                 int patch) {
  double sum = 0.0;
  int cnt = 0;
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      if (!mask.masked(i / patch, j / patch)) continue;
      sum += std::fabs(img.at(i, j) - filled.at(i, j));
      ++cnt;
    }
  return cnt ? sum / cnt : 0.0;
}
}  // namespace

double masked_l1_model(const std::vector<Image>& images,
                       const ParamStore& params, const EdgeMaeConfig& cfg,
                       uint64_t mask_seed) {
  auto masks = eval_masks(static_cast<int>(images.size()), cfg, mask_seed);
  double total = 0.0;
  for (size_t i = 0; i < images.size(); ++i) {
    MaeForward fwd = mae_forward(images[i], masks[i], params, cfg);
    total += masked_l1(images[i], fwd.imputed, masks[i], cfg.patch_size);
  }
  return total / static_cast<double>(images.size());
}

double masked_l1_meanfill(const std::vector<Image>& images,
                          const EdgeMaeConfig& cfg, uint64_t mask_seed) {
  auto masks = eval_masks(static_cast<int>(images.size()), cfg, mask_seed);
  double total = 0.0;
  for (size_t i = 0; i < images.size(); ++i) {
    double mean = 0.0;
    for (double v : images[i].px) mean += v;
    mean /= static_cast<double>(images[i].px.size());
    Tensor filled = Tensor::full({images[i].h, images[i].w}, mean);
    total += masked_l1(images[i], filled, masks[i], cfg.patch_size);
  }
  return total / static_cast<double>(images.size());
}

}  // namespace edgesynth
