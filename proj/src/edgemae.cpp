#include "edgesynth/edgemae.hpp"

#include <cmath>

#include "edgesynth/edge.hpp"
#include "edgesynth/patch.hpp"

namespace edgesynth {

Tensor sincos_pos_embed_2d(int grid_h, int grid_w, int dim) {
  ES_CHECK(dim % 4 == 0, "sincos table wants dim divisible by 4");
  int half = dim / 2;
  int freqs = half / 2;
  Tensor t({grid_h * grid_w, dim});
  for (int r = 0; r < grid_h; ++r) {
    for (int c = 0; c < grid_w; ++c) {
      int row = r * grid_w + c;
      for (int k = 0; k < freqs; ++k) {
        double omega = std::pow(10000.0, -2.0 * k / half);
        t.at(row, 2 * k) = std::sin(r * omega);
        t.at(row, 2 * k + 1) = std::cos(r * omega);
        t.at(row, half + 2 * k) = std::sin(c * omega);
        t.at(row, half + 2 * k + 1) = std::cos(c * omega);
      }
    }
  }
  return t;
}

ParamStore init_edge_mae_params(const EdgeMaeConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::mix(seed, 0xed6e5ae5ULL));
  ParamStore s;
  int pp = cfg.patch_size * cfg.patch_size;
  s.add("enc.patch_embed.w", init_linear_weight(rng, pp, cfg.enc_dim));
  s.add("enc.patch_embed.b", Tensor({1, cfg.enc_dim}));
  for (int i = 0; i < cfg.enc_layers; ++i)
    add_block_params(s, rng, "enc.blk" + std::to_string(i), cfg.enc_dim);

  s.add("mae.mask_token", init_uniform(rng, {1, cfg.enc_dim}, 0.02));
  s.add("mae.proj.w", init_linear_weight(rng, cfg.enc_dim, cfg.dec_dim));
  s.add("mae.proj.b", Tensor({1, cfg.dec_dim}));
  for (int i = 0; i < cfg.dec_shared_layers; ++i)
    add_block_params(s, rng, "mae.shared.blk" + std::to_string(i), cfg.dec_dim);
  int tail = cfg.dec_layers - cfg.dec_shared_layers;
  // tied head init: head = (patch_embed . proj)^T, so the imputation head
  // decodes routed patch content from the first step instead of having to
  // align itself with two random projections first
  Tensor tied({cfg.dec_dim, pp});
  {
    const Tensor& we = s.at("enc.patch_embed.w").value;   // [pp, D]
    const Tensor& wp = s.at("mae.proj.w").value;          // [D, dec]
    for (int d = 0; d < cfg.dec_dim; ++d)
      for (int p = 0; p < pp; ++p) {
        double acc = 0.0;
        for (int k = 0; k < cfg.enc_dim; ++k)
          acc += we.at(p, k) * wp.at(k, d);
        tied.at(d, p) = static_cast<double>(static_cast<float>(acc));
      }
  }
  for (const char* task : {"imp", "edge"}) {
    std::string px = std::string("mae.") + task;
    for (int i = 0; i < tail; ++i)
      add_block_params(s, rng, px + ".blk" + std::to_string(i), cfg.dec_dim);
    if (std::string(task) == "imp")
      s.add(px + ".head.w", tied);
    else
      s.add(px + ".head.w", init_linear_weight(rng, cfg.dec_dim, pp));
    s.add(px + ".head.b", Tensor({1, pp}));
  }
  store_meta_u64(s, "meta.enc_config_hash", cfg.hash());
  store_enc_config(s, cfg);
  return s;
}

void store_enc_config(ParamStore& s, const EdgeMaeConfig& cfg) {
  Tensor t({12}, {static_cast<double>(cfg.image_size),
                  static_cast<double>(cfg.patch_size),
                  static_cast<double>(cfg.enc_dim),
                  static_cast<double>(cfg.enc_layers),
                  static_cast<double>(cfg.enc_heads),
                  static_cast<double>(cfg.dec_dim),
                  static_cast<double>(cfg.dec_heads),
                  static_cast<double>(cfg.dec_layers),
                  static_cast<double>(cfg.dec_shared_layers),
                  static_cast<double>(static_cast<float>(cfg.mask_ratio)),
                  static_cast<double>(static_cast<float>(cfg.lambda_imp)),
                  static_cast<double>(static_cast<float>(cfg.lambda_edge))});
  if (s.has("meta.enc_config"))
    s.at("meta.enc_config").value = std::move(t);
  else
    s.add("meta.enc_config", std::move(t), false);
}

EdgeMaeConfig read_enc_config(const ParamStore& s) {
  if (!s.has("meta.enc_config"))
    throw IoError("checkpoint carries no meta.enc_config tensor");
  const Tensor& t = s.at("meta.enc_config").value;
  ES_CHECK(t.numel() == 12, "meta.enc_config has wrong size");
  EdgeMaeConfig cfg;
  cfg.image_size = static_cast<int>(t.data[0]);
  cfg.patch_size = static_cast<int>(t.data[1]);
  cfg.enc_dim = static_cast<int>(t.data[2]);
  cfg.enc_layers = static_cast<int>(t.data[3]);
  cfg.enc_heads = static_cast<int>(t.data[4]);
  cfg.dec_dim = static_cast<int>(t.data[5]);
  cfg.dec_heads = static_cast<int>(t.data[6]);
  cfg.dec_layers = static_cast<int>(t.data[7]);
  cfg.dec_shared_layers = static_cast<int>(t.data[8]);
  cfg.mask_ratio = t.data[9];
  cfg.lambda_imp = t.data[10];
  cfg.lambda_edge = t.data[11];
  cfg.validate();
  return cfg;
}

namespace {

Tensor rows_of(const Tensor& table, const std::vector<int>& rows) {
  Tensor out({static_cast<int>(rows.size()), table.cols()});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < table.cols(); ++j)
      out.at(static_cast<int>(i), j) = table.at(rows[i], j);
  return out;
}

}  // namespace

EncoderResult run_mae_encoder(const ag::VPtr& patch_tokens,
                              const std::vector<int>& pos_rows, GraphParams& P,
                              const EdgeMaeConfig& cfg) {
  ES_CHECK(patch_tokens->val.rows() == static_cast<int>(pos_rows.size()),
           "token/position count mismatch");
  Tensor table = sincos_pos_embed_2d(cfg.grid(), cfg.grid(), cfg.enc_dim);
  ag::VPtr x = ag::add_bias(ag::matmul(patch_tokens, P["enc.patch_embed.w"]),
                            P["enc.patch_embed.b"]);
  x = ag::add(x, ag::constant(rows_of(table, pos_rows)));
  EncoderResult res;
  for (int i = 0; i < cfg.enc_layers; ++i) {
    x = transformer_block(x, P, "enc.blk" + std::to_string(i), cfg.enc_heads);
    res.per_layer.push_back(x);
  }
  // the head side reads the raw pre-norm stream; a final LayerNorm here
  // would squash the intensity scale that smooth imagery rides on
  res.tokens = x;
  return res;
}

ag::VPtr patchify_node(const ag::VPtr& image, int patch) {
  ES_CHECK(image->val.rank() == 2, "patchify_node wants an [H, W] node");
  int h = image->val.shape[0];
  int w = image->val.shape[1];
  auto idx = patchify_index(h, w, patch);
  ag::VPtr flat = ag::reshape(image, {h * w, 1});
  ag::VPtr g = ag::gather_rows(flat, idx);
  return ag::reshape(g, {(h / patch) * (w / patch), patch * patch});
}

ag::VPtr unpatchify_node(const ag::VPtr& tokens, int grid_h, int grid_w,
                         int patch) {
  int h = grid_h * patch;
  int w = grid_w * patch;
  auto idx = patchify_index(h, w, patch);
  ag::VPtr flat = ag::reshape(tokens, {h * w, 1});
  ag::VPtr g = ag::gather_rows(flat, inverse_index(idx));
  return ag::reshape(g, {h, w});
}

std::vector<int> visible_rows(const MaskPlan& mask) {
  std::vector<int> rows;
  for (int i = 0; i < mask.n(); ++i)
    if (!mask.mask[static_cast<size_t>(i)]) rows.push_back(i);
  return rows;
}

EncoderResult encode_visible(const Image& img, const MaskPlan& mask,
                             GraphParams& P, const EdgeMaeConfig& cfg) {
  ES_CHECK(img.h == cfg.image_size && img.w == cfg.image_size,
           "image/config geometry mismatch");
  ES_CHECK(mask.grid_h == cfg.grid() && mask.grid_w == cfg.grid(),
           "mask/config geometry mismatch");
  PatchGrid grid = patchify(img, cfg.patch_size);
  auto rows = visible_rows(mask);
  // masked patches are dropped before anything touches the encoder
  ag::VPtr vis = ag::constant(rows_of(grid.tokens, rows));
  return run_mae_encoder(vis, rows, P, cfg);
}

ag::VPtr assemble_decoder_tokens(const EncoderResult& encoded,
                                 const MaskPlan& mask, GraphParams& P,
                                 const EdgeMaeConfig& cfg) {
  auto rows = visible_rows(mask);
  int n_vis = static_cast<int>(rows.size());
  ES_CHECK(encoded.tokens->val.rows() == n_vis, "encoded row count mismatch");
  // full sequence in encoder dim: visible tokens by rank, shared mask token
  // (row n_vis of the concat) everywhere else
  std::vector<int> pick(static_cast<size_t>(mask.n()), n_vis);
  for (int r = 0; r < n_vis; ++r) pick[static_cast<size_t>(rows[r])] = r;
  ag::VPtr full = ag::gather_rows(
      ag::concat_rows(encoded.tokens, P["mae.mask_token"]), pick);
  ag::VPtr x = ag::add_bias(ag::matmul(full, P["mae.proj.w"]), P["mae.proj.b"]);
  // the decoder table is scaled up so attention similarity is dominated by
  // position at the start of training (content norms stay smaller)
  Tensor table = sincos_pos_embed_2d(mask.grid_h, mask.grid_w, cfg.dec_dim);
  for (auto& v : table.data) v *= 3.0;
  return ag::add(x, ag::constant(table));
}

ag::VPtr run_shared_decoder(const ag::VPtr& tokens, GraphParams& P,
                            const EdgeMaeConfig& cfg) {
  ag::VPtr x = tokens;
  for (int i = 0; i < cfg.dec_shared_layers; ++i)
    x = transformer_block(x, P, "mae.shared.blk" + std::to_string(i),
                          cfg.dec_heads);
  return x;
}

namespace {
ag::VPtr decoder_tail(const ag::VPtr& shared, GraphParams& P,
                      const EdgeMaeConfig& cfg, const std::string& task) {
  std::string px = "mae." + task;
  ag::VPtr x = shared;
  int tail = cfg.dec_layers - cfg.dec_shared_layers;
  for (int i = 0; i < tail; ++i)
    x = transformer_block(x, P, px + ".blk" + std::to_string(i), cfg.dec_heads);
  x = ag::add_bias(ag::matmul(x, P[px + ".head.w"]), P[px + ".head.b"]);
  return ag::sigmoid(x);
}
}  // namespace

ag::VPtr decode_imputation(const ag::VPtr& tokens, GraphParams& P,
                           const EdgeMaeConfig& cfg) {
  return decoder_tail(run_shared_decoder(tokens, P, cfg), P, cfg, "imp");
}

ag::VPtr decode_edge(const ag::VPtr& tokens, GraphParams& P,
                     const EdgeMaeConfig& cfg) {
  return decoder_tail(run_shared_decoder(tokens, P, cfg), P, cfg, "edge");
}

ag::VPtr pretrain_loss(const ag::VPtr& imp_patches, const ag::VPtr& edge_patches,
                       const Tensor& target_patches,
                       const Tensor& edge_target_patches, const Tensor& alpha,
                       const MaskPlan& mask, int stage, double lambda_imp,
                       double lambda_edge) {
  ES_CONFIG_CHECK(stage == 1 || stage == 2, "stage must be 1 or 2");
  ES_CHECK(imp_patches->val.same_shape(target_patches) &&
               edge_patches->val.same_shape(edge_target_patches),
           "loss shape mismatch");
  int n = target_patches.rows();
  int pp = target_patches.cols();
  ES_CHECK(n == mask.n() && static_cast<int>(alpha.numel()) == n,
           "alpha/mask geometry mismatch");
  int masked_px = mask.masked_count() * pp;
  Tensor w_imp({n, pp});
  Tensor w_edge({n, pp});
  for (int r = 0; r < n; ++r) {
    double w = stage_weight(alpha.data[static_cast<size_t>(r)], stage);
    double wi = (mask.mask[static_cast<size_t>(r)] && masked_px > 0)
                    ? w / masked_px
                    : 0.0;
    double we = w / (static_cast<double>(n) * pp);
    for (int c = 0; c < pp; ++c) {
      w_imp.at(r, c) = wi;
      w_edge.at(r, c) = we;
    }
  }
  ag::VPtr imp_term =
      ag::weighted_sum(ag::abs(ag::sub(imp_patches, ag::constant(target_patches))),
                       w_imp);
  ag::VPtr edge_term = ag::weighted_sum(
      ag::abs(ag::sub(edge_patches, ag::constant(edge_target_patches))), w_edge);
  return ag::add(ag::scale(imp_term, lambda_imp),
                 ag::scale(edge_term, lambda_edge));
}

ag::VPtr pretrain_loss_graph(const Image& x, const Tensor& target_patches,
                             const Tensor& edge_target_patches,
                             const MaskPlan& mask, int stage, GraphParams& P,
                             const EdgeMaeConfig& cfg,
                             double* min_abs_residual) {
  EncoderResult enc = encode_visible(x, mask, P, cfg);
  ag::VPtr full = assemble_decoder_tokens(enc, mask, P, cfg);
  ag::VPtr shared = run_shared_decoder(full, P, cfg);
  ag::VPtr imp = decoder_tail(shared, P, cfg, "imp");
  ag::VPtr edge = decoder_tail(shared, P, cfg, "edge");
  Tensor alpha = compute_alpha(mask);
  if (min_abs_residual) {
    for (size_t i = 0; i < target_patches.data.size(); ++i)
      *min_abs_residual = std::min(
          *min_abs_residual,
          std::fabs(imp->val.data[i] - target_patches.data[i]));
    for (size_t i = 0; i < edge_target_patches.data.size(); ++i)
      *min_abs_residual = std::min(
          *min_abs_residual,
          std::fabs(edge->val.data[i] - edge_target_patches.data[i]));
  }
  return pretrain_loss(imp, edge, target_patches, edge_target_patches, alpha,
                       mask, stage, cfg.lambda_imp, cfg.lambda_edge);
}

ag::VPtr pretrain_sample_loss(const Image& img, const MaskPlan& mask, int stage,
                              GraphParams& P, const EdgeMaeConfig& cfg,
                              double* min_abs_residual) {
  Tensor target = patchify(img, cfg.patch_size).tokens;
  Tensor edge_target =
      patchify(sobel_edge_map(img.to_tensor()), cfg.patch_size).tokens;
  return pretrain_loss_graph(img, target, edge_target, mask, stage, P, cfg,
                             min_abs_residual);
}

MaeForward mae_forward(const Image& img, const MaskPlan& mask,
                       const ParamStore& params, const EdgeMaeConfig& cfg) {
  GraphParams P(params, /*freeze_all=*/true);
  EncoderResult enc = encode_visible(img, mask, P, cfg);
  ag::VPtr full = assemble_decoder_tokens(enc, mask, P, cfg);
  ag::VPtr shared = run_shared_decoder(full, P, cfg);
  int g = cfg.grid();
  MaeForward out;
  out.imputed = unpatchify_node(decoder_tail(shared, P, cfg, "imp"), g, g,
                                cfg.patch_size)
                    ->val;
  out.edge = unpatchify_node(decoder_tail(shared, P, cfg, "edge"), g, g,
                             cfg.patch_size)
                 ->val;
  return out;
}

}  // namespace edgesynth
