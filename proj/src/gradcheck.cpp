#include "edgesynth/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "edgesynth/edgemae.hpp"
#include "edgesynth/losses.hpp"
#include "edgesynth/mtnet.hpp"
#include "edgesynth/phantom.hpp"
#include "edgesynth/train.hpp"

namespace edgesynth {

namespace {
constexpr double kZeroFloor = 1e-8;    // both grads below this: treat as zero
constexpr double kMargin = 0.15;       // constructed |residual| at the base point
constexpr double kFeatMargin = 0.02;   // accepted min |feature residual|

// target = prediction +- margin with a seeded sign pattern; stays in [0,1]
// for sigmoid-range predictions, so every L1 term starts far from its kink.
Tensor offset_targets(const Tensor& pred, uint64_t seed) {
  Rng rng(seed);
  Tensor t = pred;
  for (auto& v : t.data) {
    double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    v = std::clamp(v + s * kMargin, 0.0, 1.0);
  }
  return t;
}
}  // namespace

std::vector<std::string> GradCheckReport::offenders(double tol) const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (r.max_rel_err > tol) out.push_back(r.name);
  return out;
}

GradCheckReport check_gradients(
    ParamStore& store, const std::function<ag::VPtr(GraphParams&)>& build,
    double step) {
  GradCheckReport report;
  GraphParams P(store);
  ag::VPtr loss = build(P);
  ag::backward(loss);
  GradMap analytic;
  P.accumulate_grads(analytic);

  auto eval = [&]() {
    GraphParams Q(store);
    return build(Q)->val.data[0];
  };

  // Per-tensor relative error ||a - fd||_2 / (||a||_2 + ||fd||_2). The
  // vector-level comparison keeps the O(step^2) truncation noise of
  // central differences on near-zero coordinates from drowning the signal,
  // while any systematic gradient error still dominates the norm.
  for (const auto& [name, grad] : analytic) {
    Param& p = store.at(name);
    GradCheckRow row{name, 0.0};
    double diff2 = 0.0, a2 = 0.0, fd2 = 0.0;
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      double saved = p.value.data[i];
      p.value.data[i] = saved + step;
      double f_plus = eval();
      p.value.data[i] = saved - step;
      double f_minus = eval();
      p.value.data[i] = saved;
      double fd = (f_plus - f_minus) / (2.0 * step);
      double a = grad.data[i];
      diff2 += (a - fd) * (a - fd);
      a2 += a * a;
      fd2 += fd * fd;
    }
    double denom = std::sqrt(a2) + std::sqrt(fd2);
    if (denom > kZeroFloor) row.max_rel_err = std::sqrt(diff2) / denom;
    report.worst = std::max(report.worst, row.max_rel_err);
    report.rows.push_back(std::move(row));
  }
  return report;
}

GradCheckReport grad_check_pretrain(int stage, uint64_t seed) {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, seed);
  Image img = render_base_anatomy(Rng::mix(seed, 0x1337), cfg.image_size,
                                  cfg.patch_size);
  Rng mask_rng(Rng::mix(seed, 0xa5a5));
  MaskPlan mask = sample_mask(cfg.grid(), cfg.grid(), cfg.mask_ratio, mask_rng);

  // probe forward, then park the targets kMargin away from the predictions
  Tensor imp0, edge0;
  {
    GraphParams P(params);
    EncoderResult enc = encode_visible(img, mask, P, cfg);
    ag::VPtr full = assemble_decoder_tokens(enc, mask, P, cfg);
    imp0 = decode_imputation(full, P, cfg)->val;
    edge0 = decode_edge(full, P, cfg)->val;
  }
  Tensor target = offset_targets(imp0, Rng::mix(seed, 0x7a67));
  Tensor edge_target = offset_targets(edge0, Rng::mix(seed, 0x7a68));

  auto report = check_gradients(params, [&](GraphParams& P) {
    return pretrain_loss_graph(img, target, edge_target, mask, stage, P, cfg);
  });
  report.label = "pretrain-stage" + std::to_string(stage);
  return report;
}

GradCheckReport grad_check_finetune(uint64_t seed) {
  EdgeMaeConfig enc_cfg = EdgeMaeConfig::micro();
  MtNetConfig mt_cfg = MtNetConfig::micro();
  for (int attempt = 0; attempt < 64; ++attempt) {
    uint64_t s = seed + static_cast<uint64_t>(attempt);
    ParamStore pretrained = init_edge_mae_params(enc_cfg, s);
    ParamStore frozen = extract_encoder(pretrained);
    int freeze = enc_cfg.enc_layers / 2;
    ParamStore tune =
        make_finetune_store(pretrained, enc_cfg, mt_cfg, Rng::mix(s, 5), freeze);
    Image src = render_base_anatomy(Rng::mix(s, 0xbeef), enc_cfg.image_size,
                                    enc_cfg.patch_size);
    src.modality = Modality::A;

    // synthesize once, then build the target image kMargin away from it
    Tensor yhat0;
    {
      GraphParams P(tune);
      yhat0 = mtnet_forward(src, P, P, enc_cfg, mt_cfg)->val;
    }
    Image tgt = Image::from_tensor(offset_targets(yhat0, Rng::mix(s, 0x7a69)),
                                   Modality::B, src.id);
    auto target_feats = encoder_layer_features(tgt, frozen, enc_cfg);

    // pixel residuals have the constructed margin; only the feature terms
    // need screening
    double min_resid = 1e300;
    {
      GraphParams P(tune);
      GraphParams frozenP(frozen, true);
      ag::VPtr yhat = mtnet_forward(src, P, P, enc_cfg, mt_cfg);
      feature_consistency_node(yhat, target_feats, frozenP, enc_cfg,
                               &min_resid);
    }
    if (min_resid < kFeatMargin) continue;

    auto report = check_gradients(tune, [&](GraphParams& P) {
      GraphParams frozenP(frozen, true);
      return finetune_sample_loss(src, tgt, P, P, frozenP, target_feats,
                                  enc_cfg, mt_cfg);
    });
    report.label = "finetune";
    return report;
  }
  throw CheckError("could not find kink-free finetune gradcheck data");
}

}  // namespace edgesynth
