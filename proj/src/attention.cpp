#include "edgesynth/attention.hpp"

#include <cmath>
#include <numeric>

#include "edgesynth/common.hpp"

namespace edgesynth {

namespace {
constexpr double kMaskedLogit = -1e9;
}

std::vector<int> shift_partition_index(int res, int window, int shift) {
  ES_CHECK(res % window == 0, "grid not divisible by window");
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(res) * res);
  int nw = res / window;
  for (int wi = 0; wi < nw; ++wi)
    for (int wj = 0; wj < nw; ++wj)
      for (int li = 0; li < window; ++li)
        for (int lj = 0; lj < window; ++lj) {
          int gi = wi * window + li;
          int gj = wj * window + lj;
          // cyclic shift: shifted cell (gi,gj) reads original (gi+s, gj+s)
          int si = (gi + shift) % res;
          int sj = (gj + shift) % res;
          idx.push_back(si * res + sj);
        }
  return idx;
}

std::vector<int> inverse_index(const std::vector<int>& idx) {
  std::vector<int> inv(idx.size(), -1);
  for (size_t i = 0; i < idx.size(); ++i) inv[static_cast<size_t>(idx[i])] = static_cast<int>(i);
  return inv;
}

std::vector<Tensor> window_attention_masks(int res, int window, int shift) {
  // 3x3 region labels in the shifted frame; pairs from different regions
  // must not attend (they wrapped around the border).
  auto band = [&](int i) { return i < res - window ? 0 : (i < res - shift ? 1 : 2); };
  int nw = res / window;
  std::vector<Tensor> masks;
  masks.reserve(static_cast<size_t>(nw) * nw);
  int n = window * window;
  for (int wi = 0; wi < nw; ++wi)
    for (int wj = 0; wj < nw; ++wj) {
      std::vector<int> region(static_cast<size_t>(n));
      for (int li = 0; li < window; ++li)
        for (int lj = 0; lj < window; ++lj)
          region[static_cast<size_t>(li) * window + lj] =
              3 * band(wi * window + li) + band(wj * window + lj);
      Tensor m({n, n});
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          m.at(a, b) = region[static_cast<size_t>(a)] ==
                               region[static_cast<size_t>(b)]
                           ? 0.0
                           : kMaskedLogit;
      masks.push_back(std::move(m));
    }
  return masks;
}

namespace {

std::vector<int> iota_range(int start, int len) {
  std::vector<int> v(static_cast<size_t>(len));
  std::iota(v.begin(), v.end(), start);
  return v;
}

ag::VPtr attention(const ag::VPtr& h, GraphParams& P, const std::string& px,
                   int heads, const WindowSpec& win) {
  int n = h->val.rows();
  int c = h->val.cols();
  ES_CHECK(c % heads == 0, "dim not divisible by heads");
  int hd = c / heads;
  double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  ag::VPtr q = ag::add_bias(ag::matmul(h, P[px + ".attn.wq"]), P[px + ".attn.bq"]);
  ag::VPtr k = ag::add_bias(ag::matmul(h, P[px + ".attn.wk"]), P[px + ".attn.bk"]);
  ag::VPtr v = ag::add_bias(ag::matmul(h, P[px + ".attn.wv"]), P[px + ".attn.bv"]);

  int wlen = n;  // tokens per attention group
  int n_windows = 1;
  std::vector<int> perm, inv;
  std::vector<Tensor> masks;
  if (win.res > 0) {
    int w = std::min(win.window, win.res);
    int shift = (win.shifted && win.res > win.window) ? win.window / 2 : 0;
    ES_CHECK(win.res * win.res == n, "window grid row mismatch");
    wlen = w * w;
    n_windows = (win.res / w) * (win.res / w);
    if (!(w == win.res && shift == 0)) {
      perm = shift_partition_index(win.res, w, shift);
      inv = inverse_index(perm);
      q = ag::gather_rows(q, perm);
      k = ag::gather_rows(k, perm);
      v = ag::gather_rows(v, perm);
    }
    if (shift > 0) masks = window_attention_masks(win.res, w, shift);
  }

  std::vector<ag::VPtr> window_outs;
  window_outs.reserve(static_cast<size_t>(n_windows));
  for (int wk = 0; wk < n_windows; ++wk) {
    ag::VPtr qw = q, kw = k, vw = v;
    if (n_windows > 1) {
      auto range = iota_range(wk * wlen, wlen);
      qw = ag::gather_rows(q, range);
      kw = ag::gather_rows(k, range);
      vw = ag::gather_rows(v, range);
    }
    std::vector<ag::VPtr> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int hh = 0; hh < heads; ++hh) {
      ag::VPtr qh = ag::slice_cols(qw, hh * hd, (hh + 1) * hd);
      ag::VPtr kh = ag::slice_cols(kw, hh * hd, (hh + 1) * hd);
      ag::VPtr vh = ag::slice_cols(vw, hh * hd, (hh + 1) * hd);
      ag::VPtr scores = ag::scale(ag::matmul_nt(qh, kh), att_scale);
      if (!masks.empty())
        scores = ag::add(scores, ag::constant(masks[static_cast<size_t>(wk)]));
      ag::VPtr attn = ag::softmax_rows(scores);
      head_outs.push_back(ag::matmul(attn, vh));
    }
    ag::VPtr out = head_outs[0];
    for (size_t i = 1; i < head_outs.size(); ++i)
      out = ag::concat_cols(out, head_outs[i]);
    window_outs.push_back(out);
  }
  ag::VPtr merged = window_outs[0];
  for (size_t i = 1; i < window_outs.size(); ++i)
    merged = ag::concat_rows(merged, window_outs[i]);
  if (!inv.empty()) merged = ag::gather_rows(merged, inv);
  return ag::add_bias(ag::matmul(merged, P[px + ".attn.wo"]), P[px + ".attn.bo"]);
}

}  // namespace

ag::VPtr transformer_block(const ag::VPtr& x, GraphParams& P,
                           const std::string& prefix, int heads,
                           const WindowSpec& win) {
  ag::VPtr h = ag::layer_norm(x, P[prefix + ".ln1.g"], P[prefix + ".ln1.b"]);
  ag::VPtr y = ag::add(x, attention(h, P, prefix, heads, win));
  ag::VPtr h2 = ag::layer_norm(y, P[prefix + ".ln2.g"], P[prefix + ".ln2.b"]);
  ag::VPtr m = ag::add_bias(ag::matmul(h2, P[prefix + ".mlp.w1"]),
                            P[prefix + ".mlp.b1"]);
  m = ag::gelu(m);
  m = ag::add_bias(ag::matmul(m, P[prefix + ".mlp.w2"]), P[prefix + ".mlp.b2"]);
  return ag::add(y, m);
}

void add_block_params(ParamStore& s, Rng& rng, const std::string& prefix,
                      int dim) {
  s.add(prefix + ".ln1.g", Tensor::full({1, dim}, 1.0));
  s.add(prefix + ".ln1.b", Tensor({1, dim}));
  // q and k start as the same scaled identity: attention logits are then a
  // soft similarity kernel over the stream (position components make it
  // locality-biased), which short training schedules can sharpen quickly
  Tensor eye({dim, dim});
  for (int i = 0; i < dim; ++i) eye.at(i, i) = 1.0;
  Tensor qk_eye({dim, dim});
  for (int i = 0; i < dim; ++i) qk_eye.at(i, i) = 0.7;
  s.add(prefix + ".attn.wq", qk_eye);
  s.add(prefix + ".attn.wk", qk_eye);
  // identity value path: attention averages neighbor tokens in the stream
  // basis at init, so content routing works before any training
  s.add(prefix + ".attn.wv", eye);
  s.add(prefix + ".attn.wo", eye);
  for (const char* b : {"bq", "bk", "bv", "bo"})
    s.add(prefix + ".attn." + std::string(b), Tensor({1, dim}));
  s.add(prefix + ".ln2.g", Tensor::full({1, dim}, 1.0));
  s.add(prefix + ".ln2.b", Tensor({1, dim}));
  s.add(prefix + ".mlp.w1", init_linear_weight(rng, dim, 4 * dim));
  s.add(prefix + ".mlp.b1", Tensor({1, 4 * dim}));
  s.add(prefix + ".mlp.w2", Tensor({4 * dim, dim}));
  s.add(prefix + ".mlp.b2", Tensor({1, dim}));
}

}  // namespace edgesynth
