#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "edgesynth/edgemae.hpp"
#include "edgesynth/losses.hpp"
#include "edgesynth/mtnet.hpp"
#include "edgesynth/patch.hpp"
#include "edgesynth/phantom.hpp"
#include "edgesynth/train.hpp"

using namespace edgesynth;

namespace {

Image random_image(Rng& rng, int size) {
  Image img(size, size);
  for (auto& v : img.px) v = rng.uniform();
  return img;
}

MaskPlan manual_mask(int gh, int gw, std::vector<uint8_t> bits) {
  MaskPlan m;
  m.grid_h = gh;
  m.grid_w = gw;
  m.mask = std::move(bits);
  return m;
}

// plain-Tensor pre-norm full-attention block, written independently of the
// autodiff path; used as the oracle for window == grid attention
Tensor block_oracle(const Tensor& x, const ParamStore& s,
                    const std::string& px, int heads) {
  auto get = [&](const std::string& n) { return s.at(px + n).value; };
  int nrows = x.rows(), c = x.cols(), hd = c / heads;
  auto layer_norm = [&](const Tensor& in, const Tensor& g, const Tensor& b) {
    Tensor out = in;
    for (int i = 0; i < in.rows(); ++i) {
      double mu = 0, var = 0;
      for (int j = 0; j < c; ++j) mu += in.at(i, j);
      mu /= c;
      for (int j = 0; j < c; ++j) var += (in.at(i, j) - mu) * (in.at(i, j) - mu);
      var /= c;
      double is = 1.0 / std::sqrt(var + 1e-6);
      for (int j = 0; j < c; ++j)
        out.at(i, j) = (in.at(i, j) - mu) * is * g.data[j] + b.data[j];
    }
    return out;
  };
  auto linear = [&](const Tensor& in, const Tensor& w, const Tensor& b) {
    Tensor out({in.rows(), w.cols()});
    for (int i = 0; i < in.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) {
        double acc = b.data[j];
        for (int k = 0; k < in.cols(); ++k) acc += in.at(i, k) * w.at(k, j);
        out.at(i, j) = acc;
      }
    return out;
  };
  Tensor h = layer_norm(x, get(".ln1.g"), get(".ln1.b"));
  Tensor q = linear(h, get(".attn.wq"), get(".attn.bq"));
  Tensor k = linear(h, get(".attn.wk"), get(".attn.bk"));
  Tensor v = linear(h, get(".attn.wv"), get(".attn.bv"));
  Tensor att({nrows, c});
  for (int hh = 0; hh < heads; ++hh) {
    int off = hh * hd;
    for (int i = 0; i < nrows; ++i) {
      std::vector<double> score(static_cast<size_t>(nrows));
      double mx = -1e300;
      for (int j = 0; j < nrows; ++j) {
        double s2 = 0;
        for (int d = 0; d < hd; ++d) s2 += q.at(i, off + d) * k.at(j, off + d);
        score[static_cast<size_t>(j)] = s2 / std::sqrt(double(hd));
        mx = std::max(mx, score[static_cast<size_t>(j)]);
      }
      double z = 0;
      for (auto& sc : score) {
        sc = std::exp(sc - mx);
        z += sc;
      }
      for (int j = 0; j < nrows; ++j)
        for (int d = 0; d < hd; ++d)
          att.at(i, off + d) += score[static_cast<size_t>(j)] / z * v.at(j, off + d);
    }
  }
  Tensor o = linear(att, get(".attn.wo"), get(".attn.bo"));
  Tensor y = x;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += o.data[i];
  Tensor h2 = layer_norm(y, get(".ln2.g"), get(".ln2.b"));
  Tensor m1 = linear(h2, get(".mlp.w1"), get(".mlp.b1"));
  for (auto& vv : m1.data) vv = 0.5 * vv * (1.0 + std::erf(vv / std::sqrt(2.0)));
  Tensor m2 = linear(m1, get(".mlp.w2"), get(".mlp.b2"));
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += m2.data[i];
  return y;
}

}  // namespace

TEST_CASE("encode_visible shapes follow the mask ratio") {
  EdgeMaeConfig cfg;  // 64x64, P=8, D=64
  ParamStore params = init_edge_mae_params(cfg, 7);
  Rng rng(9);
  Image img = random_image(rng, 64);
  MaskPlan m70 = sample_mask(8, 8, 0.70, rng);
  GraphParams P(params, true);
  EncoderResult enc = encode_visible(img, m70, P, cfg);
  CHECK(enc.tokens->val.rows() == 20);  // 64 - floor(0.7*64)
  CHECK(enc.tokens->val.cols() == 64);
  CHECK(enc.per_layer.size() == 6);

  MaskPlan m75 = sample_mask(8, 8, 0.75, rng);
  GraphParams P2(params, true);
  CHECK(encode_visible(img, m75, P2, cfg).tokens->val.rows() == 16);
}

TEST_CASE("encoder is permutation-equivariant over tokens") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 3);
  Rng rng(11);
  Tensor tokens({3, cfg.patch_size * cfg.patch_size});
  for (auto& v : tokens.data) v = rng.uniform();
  std::vector<int> pos = {0, 1, 3};
  GraphParams P(params, true);
  Tensor out = run_mae_encoder(ag::constant(tokens), pos, P, cfg).tokens->val;

  std::vector<int> perm = {2, 0, 1};
  Tensor ptokens({3, tokens.cols()});
  std::vector<int> ppos(3);
  for (int i = 0; i < 3; ++i) {
    ppos[static_cast<size_t>(i)] = pos[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    for (int j = 0; j < tokens.cols(); ++j)
      ptokens.at(i, j) = tokens.at(perm[static_cast<size_t>(i)], j);
  }
  GraphParams P2(params, true);
  Tensor pout = run_mae_encoder(ag::constant(ptokens), ppos, P2, cfg).tokens->val;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < out.cols(); ++j)
      CHECK(pout.at(i, j) ==
            doctest::Approx(out.at(perm[static_cast<size_t>(i)], j))
                .epsilon(1e-12));
}

TEST_CASE("masking locality: masked patch pixels never reach the encoder") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 5);
  Rng rng(13);
  Image img = random_image(rng, cfg.image_size);
  MaskPlan mask = manual_mask(2, 2, {1, 0, 0, 1});
  GraphParams P(params, true);
  Tensor out1 = encode_visible(img, mask, P, cfg).tokens->val;

  Image tampered = img;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) tampered.at(i, j) = rng.uniform();  // patch 0
  for (int i = 8; i < 16; ++i)
    for (int j = 8; j < 16; ++j) tampered.at(i, j) = rng.uniform();  // patch 3
  GraphParams P2(params, true);
  Tensor out2 = encode_visible(tampered, mask, P2, cfg).tokens->val;
  CHECK(out1.data == out2.data);
}

TEST_CASE("assemble_decoder_tokens: full length, shared mask embedding") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 5);
  Rng rng(15);
  Image img = random_image(rng, cfg.image_size);
  MaskPlan mask = manual_mask(2, 2, {1, 0, 0, 1});
  GraphParams P(params, true);
  EncoderResult enc = encode_visible(img, mask, P, cfg);
  ag::VPtr full = assemble_decoder_tokens(enc, mask, P, cfg);
  CHECK(full->val.rows() == 4);
  CHECK(full->val.cols() == cfg.dec_dim);
  // masked rows 0 and 3 differ only by the position table
  Tensor table = sincos_pos_embed_2d(2, 2, cfg.dec_dim);
  for (int j = 0; j < cfg.dec_dim; ++j)
    CHECK(full->val.at(0, j) - table.at(0, j) ==
          doctest::Approx(full->val.at(3, j) - table.at(3, j)).epsilon(1e-12));

  // degenerate: all but one masked still forms a full sequence
  MaskPlan almost = manual_mask(2, 2, {1, 1, 0, 1});
  GraphParams P2(params, true);
  EncoderResult enc2 = encode_visible(img, almost, P2, cfg);
  CHECK(assemble_decoder_tokens(enc2, almost, P2, cfg)->val.rows() == 4);
}

TEST_CASE("decoders produce sigmoid-range images of the input shape") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 21);
  Rng rng(17);
  Image img = random_image(rng, cfg.image_size);
  Rng mrng(3);
  MaskPlan mask = sample_mask(2, 2, 0.5, mrng);
  MaeForward fwd = mae_forward(img, mask, params, cfg);
  CHECK(fwd.imputed.shape == std::vector<int>{16, 16});
  CHECK(fwd.edge.shape == std::vector<int>{16, 16});
  for (double v : fwd.imputed.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // stateless forward: identical inputs give identical outputs
  MaeForward fwd2 = mae_forward(img, mask, params, cfg);
  CHECK(fwd.imputed.data == fwd2.imputed.data);
  CHECK(fwd.edge.data == fwd2.edge.data);
}

TEST_CASE("mask token gradient is nonzero iff a patch is masked") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 23);
  Rng rng(19);
  Image img = random_image(rng, cfg.image_size);
  auto token_grad_norm = [&](const MaskPlan& mask) {
    GraphParams P(params);
    EncoderResult enc = encode_visible(img, mask, P, cfg);
    ag::VPtr full = assemble_decoder_tokens(enc, mask, P, cfg);
    ag::VPtr out = decode_imputation(full, P, cfg);
    ag::backward(ag::mean_all(out));
    GradMap g;
    P.accumulate_grads(g);
    double norm = 0;
    for (double v : g.at("mae.mask_token").data) norm += v * v;
    return norm;
  };
  CHECK(token_grad_norm(manual_mask(2, 2, {1, 0, 0, 0})) > 0.0);
  CHECK(token_grad_norm(manual_mask(2, 2, {0, 0, 0, 0})) == 0.0);
}

TEST_CASE("shared decoder blocks accumulate gradients from both heads") {
  EdgeMaeConfig cfg = EdgeMaeConfig::micro();
  ParamStore params = init_edge_mae_params(cfg, 29);
  Rng rng(23);
  Image img = random_image(rng, cfg.image_size);
  Rng mrng(5);
  MaskPlan mask = sample_mask(2, 2, 0.5, mrng);

  auto shared_grads = [&](double li, double le) {
    EdgeMaeConfig c = cfg;
    c.lambda_imp = li;
    c.lambda_edge = le;
    GraphParams P(params);
    ag::VPtr loss = pretrain_sample_loss(img, mask, 1, P, c);
    ag::backward(loss);
    GradMap g;
    P.accumulate_grads(g);
    return g.at("mae.shared.blk0.mlp.w1");
  };
  Tensor both = shared_grads(5.0, 1.0);
  Tensor imp_only = shared_grads(5.0, 0.0);
  Tensor edge_only = shared_grads(0.0, 1.0);
  double norm_imp = 0, norm_edge = 0;
  for (size_t i = 0; i < both.data.size(); ++i) {
    CHECK(both.data[i] ==
          doctest::Approx(imp_only.data[i] + edge_only.data[i]).epsilon(1e-9));
    norm_imp += imp_only.data[i] * imp_only.data[i];
    norm_edge += edge_only.data[i] * edge_only.data[i];
  }
  CHECK(norm_imp > 0.0);   // both heads really contribute
  CHECK(norm_edge > 0.0);
}

TEST_CASE("pretrain loss: zero at fit, lambda decomposition, alpha weighting") {
  MaskPlan mask = manual_mask(2, 2, {1, 1, 0, 0});
  Tensor alpha = compute_alpha(mask);
  Tensor pred({4, 64});
  Rng rng(29);
  for (auto& v : pred.data) v = rng.uniform(0.2, 0.8);
  Tensor edge_pred({4, 64});
  for (auto& v : edge_pred.data) v = rng.uniform(0.2, 0.8);

  SUBCASE("perfect predictions give zero loss") {
    ag::VPtr l = pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                               pred, edge_pred, alpha, mask, 1, 5.0, 1.0);
    CHECK(l->val.data[0] == 0.0);
  }
  SUBCASE("alpha == 0: constant masked error e gives lambda_imp * 2e") {
    Tensor zero_alpha({2, 2});
    Tensor target = pred;
    double e = 0.07;
    for (int r = 0; r < 2; ++r)  // masked rows 0,1
      for (int c = 0; c < 64; ++c) target.at(r, c) += e;
    ag::VPtr l = pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                               target, edge_pred, zero_alpha, mask, 1, 5.0, 1.0);
    CHECK(l->val.data[0] == doctest::Approx(5.0 * 2.0 * e).epsilon(1e-9));
  }
  SUBCASE("lambda_edge = 0 makes the loss blind to the edge prediction") {
    Tensor target = pred;
    target.data[0] += 0.3;
    Tensor other_edge = edge_pred;
    for (auto& v : other_edge.data) v = rng.uniform();
    ag::VPtr l1 = pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                                target, edge_pred, alpha, mask, 1, 5.0, 0.0);
    ag::VPtr l2 = pretrain_loss(ag::constant(pred), ag::constant(other_edge),
                                target, edge_pred, alpha, mask, 1, 5.0, 0.0);
    CHECK(l1->val.data[0] == l2->val.data[0]);
  }
  SUBCASE("stage 2 upweights errors on high-alpha patches") {
    Tensor target = pred;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 64; ++c)
        target.at(r, c) += 0.2 * alpha.data[static_cast<size_t>(r)];
    ag::VPtr s1 = pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                                target, edge_pred, alpha, mask, 1, 1.0, 1.0);
    ag::VPtr s2 = pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                                target, edge_pred, alpha, mask, 2, 1.0, 1.0);
    CHECK(s2->val.data[0] >= s1->val.data[0]);
  }
  SUBCASE("stage must be 1 or 2") {
    CHECK_THROWS_AS(pretrain_loss(ag::constant(pred), ag::constant(edge_pred),
                                  pred, edge_pred, alpha, mask, 3, 5.0, 1.0),
                    ConfigError);
  }
}

TEST_CASE("stage plan shapes and branch/bottleneck dimensions") {
  EdgeMaeConfig enc_cfg;  // grid 8
  MtNetConfig mt_cfg;     // C0 = 32
  StagePlan plan = make_stage_plan(enc_cfg, mt_cfg);
  REQUIRE(plan.large.size() == 4);
  REQUIRE(plan.small.size() == 3);
  CHECK(plan.large[0].res == 16);
  CHECK(plan.large[0].channels == 32);
  CHECK(plan.large[1].res == 8);
  CHECK(plan.large[1].channels == 64);
  CHECK(plan.large[2].res == 4);
  CHECK(plan.large[2].channels == 128);
  CHECK(plan.large[3].res == 2);
  CHECK(plan.large[3].channels == 256);
  CHECK(plan.small[0].res == 8);
  CHECK(plan.small[0].channels == 32);
  CHECK(plan.small[2].res == 2);
  CHECK(plan.small[2].channels == 128);

  ParamStore mae = init_edge_mae_params(enc_cfg, 7);
  ParamStore mt = init_mt_net_params(enc_cfg, mt_cfg, 7);
  Rng rng(31);
  Image img(64, 64);
  for (auto& v : img.px) v = rng.uniform();
  GraphParams encP(mae, true);
  GraphParams mtP(mt, true);
  Pyramid pyr = build_feature_pyramid(img, encP, enc_cfg);
  CHECK(pyr.f_small->val.rows() == 64);
  CHECK(pyr.f_small->val.cols() == 64);
  CHECK(pyr.f_large->val.rows() == 256);
  BranchResult lg = run_branch(pyr.f_large, mtP, "large", plan.large, mt_cfg);
  BranchResult sm = run_branch(pyr.f_small, mtP, "small", plan.small, mt_cfg);
  REQUIRE(lg.levels.size() == 4);
  CHECK(lg.levels[0]->val.rows() == 256);
  CHECK(lg.levels[0]->val.cols() == 32);
  CHECK(lg.levels[1]->val.rows() == 64);
  CHECK(lg.levels[1]->val.cols() == 64);
  CHECK(lg.levels[2]->val.rows() == 16);
  CHECK(lg.levels[2]->val.cols() == 128);
  CHECK(lg.levels[3]->val.rows() == 4);
  CHECK(lg.levels[3]->val.cols() == 256);  // bottleneck 2x2x256
  REQUIRE(sm.levels.size() == 3);
  CHECK(sm.levels[0]->val.rows() == 64);
  CHECK(sm.levels[2]->val.rows() == 4);
  CHECK(sm.levels[2]->val.cols() == 128);

  ag::VPtr out = decode_synthesis(lg, sm, mtP, plan, enc_cfg, mt_cfg);
  CHECK(out->val.shape == std::vector<int>{64, 64});
  for (double v : out->val.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("windowed attention with window == grid equals full attention") {
  ParamStore s;
  Rng rng(37);
  add_block_params(s, rng, "blk", 16);
  Tensor x({16, 16});  // 4x4 grid
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  GraphParams P(s, true);
  WindowSpec win{4, 4, false};
  Tensor windowed = transformer_block(ag::constant(x), P, "blk", 4, win)->val;
  Tensor oracle = block_oracle(x, s, "blk", 4);
  for (size_t i = 0; i < oracle.data.size(); ++i)
    CHECK(windowed.data[i] == doctest::Approx(oracle.data[i]).epsilon(1e-10));
}

TEST_CASE("shift collapses to a no-op when the grid fits one window") {
  ParamStore s;
  Rng rng(41);
  add_block_params(s, rng, "blk", 8);
  Tensor x({4, 8});  // 2x2 grid, window 4
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  GraphParams P(s, true);
  Tensor plain =
      transformer_block(ag::constant(x), P, "blk", 2, {2, 4, false})->val;
  GraphParams P2(s, true);
  Tensor shifted =
      transformer_block(ag::constant(x), P2, "blk", 2, {2, 4, true})->val;
  CHECK(plain.data == shifted.data);
}

TEST_CASE("channel softmax pair: convexity, argmax, shift invariance") {
  Rng rng(43);
  SUBCASE("hand values") {
    Tensor pl({1, 2}, {std::log(2.0), 1.0});
    Tensor ps({1, 2}, {0.0, 1.0});
    auto [a, b] = channel_softmax_pair(ag::constant(pl), ag::constant(ps));
    CHECK(a->val.data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(a->val.data[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b->val.data[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("properties on random descriptors") {
    for (int trial = 0; trial < 200; ++trial) {
      Tensor pl({1, 8}), ps({1, 8});
      for (auto& v : pl.data) v = rng.uniform(-4, 4);
      for (auto& v : ps.data) v = rng.uniform(-4, 4);
      auto [a, b] = channel_softmax_pair(ag::constant(pl), ag::constant(ps));
      double shift = rng.uniform(-3, 3);
      Tensor pl2 = pl, ps2 = ps;
      for (auto& v : pl2.data) v += shift;
      for (auto& v : ps2.data) v += shift;
      auto [a2, b2] = channel_softmax_pair(ag::constant(pl2), ag::constant(ps2));
      for (int i = 0; i < 8; ++i) {
        CHECK(a->val.data[i] + b->val.data[i] == doctest::Approx(1.0).epsilon(1e-12));
        bool l_wins = pl.data[i] > ps.data[i];
        if (pl.data[i] != ps.data[i])
          CHECK((a->val.data[i] > b->val.data[i]) == l_wins);
        CHECK(a2->val.data[i] == doctest::Approx(a->val.data[i]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("dsf_fuse blends gated features with convex channel weights") {
  EdgeMaeConfig enc_cfg = EdgeMaeConfig::micro();
  MtNetConfig mt_cfg = MtNetConfig::micro();
  ParamStore mt = init_mt_net_params(enc_cfg, mt_cfg, 11);
  Rng rng(47);
  int c = 8, res = 4;
  Tensor fl({res * res, c}), fs({(res / 2) * (res / 2), c}), fd({res * res, c});
  for (auto& v : fl.data) v = rng.uniform(-1, 1);
  for (auto& v : fs.data) v = rng.uniform(-1, 1);
  for (auto& v : fd.data) v = rng.uniform(-1, 1);
  GraphParams P(mt, true);
  ag::VPtr fused = dsf_fuse(ag::constant(fl), ag::constant(fs),
                            ag::constant(fd), res, P, "mt.up4.dsf");
  CHECK(fused->val.rows() == res * res);
  CHECK(fused->val.cols() == c);
  for (double v : fused->val.data) CHECK(std::isfinite(v));

  // zeroed skip inputs still give a valid finite forward
  GraphParams P2(mt, true);
  ag::VPtr z = dsf_fuse(ag::constant(Tensor({res * res, c})),
                        ag::constant(Tensor({(res / 2) * (res / 2), c})),
                        ag::constant(fd), res, P2, "mt.up4.dsf");
  for (double v : z->val.data) CHECK(std::isfinite(v));
}

TEST_CASE("synthesize: deterministic, in range, right shape") {
  EdgeMaeConfig enc_cfg = EdgeMaeConfig::micro();
  MtNetConfig mt_cfg = MtNetConfig::micro();
  ParamStore pre = init_edge_mae_params(enc_cfg, 51);
  ParamStore tune = make_finetune_store(pre, enc_cfg, mt_cfg, 52, 0);
  Rng rng(53);
  Image src = random_image(rng, enc_cfg.image_size);
  src.modality = Modality::A;
  Image out1 = synthesize(src, tune, enc_cfg, mt_cfg);
  Image out2 = synthesize(src, tune, enc_cfg, mt_cfg);
  CHECK(out1.px == out2.px);
  CHECK(out1.h == 16);
  CHECK(out1.modality == Modality::B);
  for (double v : out1.px) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("parameter count matches the config-derived closed form") {
  EdgeMaeConfig enc_cfg;
  MtNetConfig mt_cfg;
  ParamStore mt = init_mt_net_params(enc_cfg, mt_cfg, 7);
  auto block_params = [](int64_t c) {
    return 2 * c + 4 * (c * c + c) + 2 * c + (c * 4 * c + 4 * c) +
           (4 * c * c + c);
  };
  auto branch_params = [&](std::vector<int64_t> chans, int64_t res0, int64_t d) {
    int64_t total = d * chans[0] + chans[0];          // proj
    total += res0 * res0 * chans[0];                  // pos
    for (size_t k = 0; k < chans.size(); ++k) {
      total += 2 * block_params(chans[k]);
      if (k + 1 < chans.size())
        total += 4 * chans[k] * 2 * chans[k] + 2 * chans[k];  // merge
    }
    return total;
  };
  int64_t want = branch_params({32, 64, 128, 256}, 16, 64) +
                 branch_params({32, 64, 128}, 8, 64);
  for (int64_t ch : {128, 64, 32}) {  // decoder stages at res 4, 8, 16
    want += 2 * ch * 4 * ch + 4 * ch;          // expand
    want += 4 * ch * ch + ch;                  // dsf transposed conv
    want += 2 * (2 * ch + 1);                  // dsf gates
    want += 2 * ch * ch + ch;                  // fuse
    want += 2 * block_params(ch);
  }
  want += 32 * 512 + 512;  // final expand
  want += 32 + 1;          // head
  int64_t got = 0;
  for (const auto& name : mt.names())
    if (name.rfind("mt.", 0) == 0) got += mt.at(name).value.numel();
  CHECK(got == want);
}
