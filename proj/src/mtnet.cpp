#include "edgesynth/mtnet.hpp"

#include <cmath>

#include "edgesynth/patch.hpp"

namespace edgesynth {

StagePlan make_stage_plan(const EdgeMaeConfig& enc, const MtNetConfig& cfg) {
  cfg.validate(enc);
  StagePlan plan;
  int c = cfg.base_channels;
  for (int res = 2 * enc.grid(); res >= 2; res /= 2, c *= 2)
    plan.large.push_back({res, c});
  c = cfg.base_channels;
  for (int res = enc.grid(); res >= 2; res /= 2, c *= 2)
    plan.small.push_back({res, c});
  ES_CHECK(plan.large.size() == plan.small.size() + 1,
           "large branch must have exactly one extra stage");
  return plan;
}

namespace {

void add_branch_params(ParamStore& s, Rng& rng, const std::string& branch,
                       const std::vector<StagePlan::Level>& levels, int enc_dim,
                       int head_dim) {
  std::string px = "mt." + branch;
  s.add(px + ".proj.w", init_linear_weight(rng, enc_dim, levels[0].channels));
  s.add(px + ".proj.b", Tensor({1, levels[0].channels}));
  s.add(px + ".pos", init_uniform(rng, {levels[0].res * levels[0].res,
                                        levels[0].channels},
                                  0.02));
  for (size_t k = 0; k < levels.size(); ++k) {
    std::string lv = px + ".lv" + std::to_string(k);
    ES_CHECK(levels[k].channels % head_dim == 0,
             "stage channels not divisible by head_dim");
    add_block_params(s, rng, lv + ".blk0", levels[k].channels);
    add_block_params(s, rng, lv + ".blk1", levels[k].channels);
    if (k + 1 < levels.size()) {
      s.add(lv + ".merge.w", init_linear_weight(rng, 4 * levels[k].channels,
                                                2 * levels[k].channels));
      s.add(lv + ".merge.b", Tensor({1, 2 * levels[k].channels}));
    }
  }
}

}  // namespace

ParamStore init_mt_net_params(const EdgeMaeConfig& enc, const MtNetConfig& cfg,
                              uint64_t seed) {
  StagePlan plan = make_stage_plan(enc, cfg);
  Rng rng(Rng::mix(seed, 0x3a7e1ULL));
  ParamStore s;
  add_branch_params(s, rng, "large", plan.large, enc.enc_dim, cfg.head_dim);
  add_branch_params(s, rng, "small", plan.small, enc.enc_dim, cfg.head_dim);
  // decoder stages, shallow resolutions last
  for (size_t k = plan.large.size() - 1; k >= 1; --k) {
    int res = plan.large[k - 1].res;  // resolution after expanding
    int ch = plan.large[k - 1].channels;
    std::string px = "mt.up" + std::to_string(res);
    s.add(px + ".expand.w", init_linear_weight(rng, 2 * ch, 4 * ch));
    s.add(px + ".expand.b", Tensor({1, 4 * ch}));
    s.add(px + ".dsf.up.w", init_linear_weight(rng, 4 * ch, ch));
    s.add(px + ".dsf.up.b", Tensor({1, ch}));
    s.add(px + ".dsf.gate_l.w", init_linear_weight(rng, 2 * ch, 1));
    s.add(px + ".dsf.gate_l.b", Tensor({1, 1}));
    s.add(px + ".dsf.gate_s.w", init_linear_weight(rng, 2 * ch, 1));
    s.add(px + ".dsf.gate_s.b", Tensor({1, 1}));
    s.add(px + ".fuse.w", init_linear_weight(rng, 2 * ch, ch));
    s.add(px + ".fuse.b", Tensor({1, ch}));
    add_block_params(s, rng, px + ".blk0", ch);
    add_block_params(s, rng, px + ".blk1", ch);
  }
  int c0 = cfg.base_channels;
  s.add("mt.final.expand.w", init_linear_weight(rng, c0, 16 * c0));
  s.add("mt.final.expand.b", Tensor({1, 16 * c0}));
  s.add("mt.final.head.w", init_linear_weight(rng, c0, 1));
  s.add("mt.final.head.b", Tensor({1, 1}));
  store_meta_u64(s, "meta.enc_config_hash", enc.hash());
  store_meta_u64(s, "meta.mt_config_hash", cfg.hash());
  store_enc_config(s, enc);
  store_mt_config(s, cfg);
  return s;
}

void store_mt_config(ParamStore& s, const MtNetConfig& cfg) {
  Tensor t({3}, {static_cast<double>(cfg.base_channels),
                 static_cast<double>(cfg.window),
                 static_cast<double>(cfg.head_dim)});
  if (s.has("meta.mt_config"))
    s.at("meta.mt_config").value = std::move(t);
  else
    s.add("meta.mt_config", std::move(t), false);
}

MtNetConfig read_mt_config(const ParamStore& s, const EdgeMaeConfig& enc) {
  if (!s.has("meta.mt_config"))
    throw IoError("checkpoint carries no meta.mt_config tensor");
  const Tensor& t = s.at("meta.mt_config").value;
  ES_CHECK(t.numel() == 3, "meta.mt_config has wrong size");
  MtNetConfig cfg;
  cfg.base_channels = static_cast<int>(t.data[0]);
  cfg.window = static_cast<int>(t.data[1]);
  cfg.head_dim = static_cast<int>(t.data[2]);
  cfg.validate(enc);
  return cfg;
}

Pyramid build_feature_pyramid_node(const ag::VPtr& patch_tokens,
                                   GraphParams& encP,
                                   const EdgeMaeConfig& cfg) {
  int n = cfg.n_patches();
  ES_CHECK(patch_tokens->val.rows() == n, "expected the full patch sequence");
  std::vector<int> pos(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = i;
  EncoderResult enc = run_mae_encoder(patch_tokens, pos, encP, cfg);
  Pyramid pyr;
  pyr.f_small = enc.tokens;
  pyr.f_large = ag::upsample_bilinear_2x(enc.tokens, cfg.grid(), cfg.grid());
  return pyr;
}

Pyramid build_feature_pyramid(const Image& src, GraphParams& encP,
                              const EdgeMaeConfig& cfg) {
  ES_CHECK(src.h == cfg.image_size && src.w == cfg.image_size,
           "image/config geometry mismatch");
  Tensor tokens = patchify(src, cfg.patch_size).tokens;
  return build_feature_pyramid_node(ag::constant(tokens), encP, cfg);
}

namespace {

// 2x2 neighborhood concat: [TL, TR, BL, BR] per coarse cell, then linear.
ag::VPtr patch_merge(const ag::VPtr& x, int res, GraphParams& P,
                     const std::string& px) {
  int half = res / 2;
  std::vector<std::vector<int>> corner(4);
  for (auto& v : corner) v.reserve(static_cast<size_t>(half) * half);
  for (int i = 0; i < half; ++i)
    for (int j = 0; j < half; ++j) {
      corner[0].push_back((2 * i) * res + 2 * j);
      corner[1].push_back((2 * i) * res + 2 * j + 1);
      corner[2].push_back((2 * i + 1) * res + 2 * j);
      corner[3].push_back((2 * i + 1) * res + 2 * j + 1);
    }
  ag::VPtr cat = ag::gather_rows(x, corner[0]);
  for (int q = 1; q < 4; ++q)
    cat = ag::concat_cols(cat, ag::gather_rows(x, corner[q]));
  return ag::add_bias(ag::matmul(cat, P[px + ".merge.w"]), P[px + ".merge.b"]);
}

// linear C -> 2C, then each token becomes a 2x2 block of C/2-channel tokens
ag::VPtr patch_expand(const ag::VPtr& x, int res, GraphParams& P,
                      const std::string& px) {
  int c_in = x->val.cols();
  ag::VPtr y = ag::add_bias(ag::matmul(x, P[px + ".expand.w"]),
                            P[px + ".expand.b"]);
  y = ag::reshape(y, {res * res * 4, c_in / 2});
  int fine = 2 * res;
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(fine) * fine);
  for (int fi = 0; fi < fine; ++fi)
    for (int fj = 0; fj < fine; ++fj) {
      int i = fi / 2, j = fj / 2, q = (fi % 2) * 2 + (fj % 2);
      idx.push_back((i * res + j) * 4 + q);
    }
  return ag::gather_rows(y, idx);
}

ag::VPtr final_patch_expand4(const ag::VPtr& x, int res, GraphParams& P) {
  int c = x->val.cols();
  ag::VPtr y = ag::add_bias(ag::matmul(x, P["mt.final.expand.w"]),
                            P["mt.final.expand.b"]);
  y = ag::reshape(y, {res * res * 16, c});
  int fine = 4 * res;
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(fine) * fine);
  for (int fi = 0; fi < fine; ++fi)
    for (int fj = 0; fj < fine; ++fj) {
      int i = fi / 4, j = fj / 4, q = (fi % 4) * 4 + (fj % 4);
      idx.push_back((i * res + j) * 16 + q);
    }
  return ag::gather_rows(y, idx);
}

// stride-2 2x2 transposed convolution expressed as four pointwise linears
ag::VPtr conv_transpose_2x2(const ag::VPtr& x, int res_in, GraphParams& P,
                            const std::string& px) {
  int c = x->val.cols();
  std::vector<ag::VPtr> offs;
  offs.reserve(4);
  for (int q = 0; q < 4; ++q) {
    std::vector<int> wrows(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) wrows[static_cast<size_t>(i)] = q * c + i;
    offs.push_back(ag::matmul(x, ag::gather_rows(P[px + ".up.w"], wrows)));
  }
  ag::VPtr cat = offs[0];
  for (int q = 1; q < 4; ++q) cat = ag::concat_rows(cat, offs[q]);
  int fine = 2 * res_in;
  int cells = res_in * res_in;
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(fine) * fine);
  for (int fi = 0; fi < fine; ++fi)
    for (int fj = 0; fj < fine; ++fj) {
      int i = fi / 2, j = fj / 2, q = (fi % 2) * 2 + (fj % 2);
      idx.push_back(q * cells + i * res_in + j);
    }
  return ag::add_bias(ag::gather_rows(cat, idx), P[px + ".up.b"]);
}

}  // namespace

BranchResult run_branch(const ag::VPtr& feat, GraphParams& P,
                        const std::string& branch,
                        const std::vector<StagePlan::Level>& levels,
                        const MtNetConfig& cfg) {
  std::string px = "mt." + branch;
  ag::VPtr x = ag::add_bias(ag::matmul(feat, P[px + ".proj.w"]),
                            P[px + ".proj.b"]);
  x = ag::add(x, P[px + ".pos"]);
  BranchResult out;
  for (size_t k = 0; k < levels.size(); ++k) {
    std::string lv = px + ".lv" + std::to_string(k);
    int heads = levels[k].channels / cfg.head_dim;
    WindowSpec w0{levels[k].res, cfg.window, false};
    WindowSpec w1{levels[k].res, cfg.window, true};
    x = transformer_block(x, P, lv + ".blk0", heads, w0);
    x = transformer_block(x, P, lv + ".blk1", heads, w1);
    out.levels.push_back(x);
    if (k + 1 < levels.size()) x = patch_merge(x, levels[k].res, P, lv);
  }
  return out;
}

std::pair<ag::VPtr, ag::VPtr> channel_softmax_pair(const ag::VPtr& p_l,
                                                   const ag::VPtr& p_s) {
  ag::VPtr a = ag::sigmoid(ag::sub(p_l, p_s));
  ag::VPtr b = ag::add_scalar(ag::scale(a, -1.0), 1.0);
  return {a, b};
}

ag::VPtr dsf_fuse(const ag::VPtr& f_large, const ag::VPtr& f_small,
                  const ag::VPtr& f_dec, int res, GraphParams& P,
                  const std::string& prefix) {
  int c = f_large->val.cols();
  ES_CHECK(f_small->val.cols() == c && f_dec->val.cols() == c,
           "dsf channel mismatch");
  ES_CHECK(f_large->val.rows() == res * res && f_dec->val.rows() == res * res &&
               f_small->val.rows() == (res / 2) * (res / 2),
           "dsf spatial relation must be 2:1");
  ag::VPtr f_up = conv_transpose_2x2(f_small, res / 2, P, prefix);
  // spatial gates
  ag::VPtr m_a = ag::sigmoid(ag::add_bias(
      ag::matmul(ag::concat_cols(f_dec, f_large), P[prefix + ".gate_l.w"]),
      P[prefix + ".gate_l.b"]));
  ag::VPtr m_b = ag::sigmoid(ag::add_bias(
      ag::matmul(ag::concat_cols(f_dec, f_up), P[prefix + ".gate_s.w"]),
      P[prefix + ".gate_s.b"]));
  ag::VPtr f_l_att = ag::mul_colvec(f_large, m_a);
  ag::VPtr f_s_att = ag::mul_colvec(f_up, m_b);
  // channel softmax over pooled descriptors; a + b = 1 per channel
  ag::VPtr p_l = ag::global_avg_rows(f_l_att);
  ag::VPtr p_s = ag::global_avg_rows(f_s_att);
  auto [a_c, b_c] = channel_softmax_pair(p_l, p_s);
  return ag::add(ag::mul_rowvec(f_l_att, a_c), ag::mul_rowvec(f_s_att, b_c));
}

ag::VPtr decode_synthesis(const BranchResult& large, const BranchResult& small,
                          GraphParams& P, const StagePlan& plan,
                          const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg) {
  ag::VPtr x = large.levels.back();  // bottleneck
  for (size_t k = plan.large.size() - 1; k >= 1; --k) {
    int res = plan.large[k - 1].res;
    std::string px = "mt.up" + std::to_string(res);
    x = patch_expand(x, res / 2, P, px);
    ag::VPtr fused = dsf_fuse(large.levels[k - 1], small.levels[k - 1], x, res,
                              P, px + ".dsf");
    x = ag::add_bias(ag::matmul(ag::concat_cols(fused, x), P[px + ".fuse.w"]),
                     P[px + ".fuse.b"]);
    int heads = plan.large[k - 1].channels / cfg.head_dim;
    x = transformer_block(x, P, px + ".blk0", heads,
                          WindowSpec{res, cfg.window, false});
    x = transformer_block(x, P, px + ".blk1", heads,
                          WindowSpec{res, cfg.window, true});
  }
  int top_res = plan.large[0].res;
  x = final_patch_expand4(x, top_res, P);
  x = ag::sigmoid(ag::add_bias(ag::matmul(x, P["mt.final.head.w"]),
                               P["mt.final.head.b"]));
  int side = 4 * top_res;
  ES_CHECK(side == enc_cfg.image_size,
           "decoder output resolution mismatch");
  return ag::reshape(x, {side, side});
}

ag::VPtr mtnet_forward(const Image& src, GraphParams& encP, GraphParams& mtP,
                       const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg) {
  StagePlan plan = make_stage_plan(enc_cfg, cfg);
  Pyramid pyr = build_feature_pyramid(src, encP, enc_cfg);
  BranchResult lg = run_branch(pyr.f_large, mtP, "large", plan.large, cfg);
  BranchResult sm = run_branch(pyr.f_small, mtP, "small", plan.small, cfg);
  return decode_synthesis(lg, sm, mtP, plan, enc_cfg, cfg);
}

Image synthesize(const Image& src, const ParamStore& store,
                 const EdgeMaeConfig& enc_cfg, const MtNetConfig& cfg) {
  GraphParams P(store, /*freeze_all=*/true);
  ag::VPtr out = mtnet_forward(src, P, P, enc_cfg, cfg);
  Image img = Image::from_tensor(out->val,
                                 src.modality == Modality::A ? Modality::B
                                                             : Modality::A,
                                 src.id);
  return img;
}

}  // namespace edgesynth
