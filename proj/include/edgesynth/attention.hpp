#pragma once

#include <string>
#include <vector>

#include "edgesynth/autodiff.hpp"
#include "edgesynth/params.hpp"
#include "edgesynth/rng.hpp"

namespace edgesynth {

// res == 0: plain full attention over whatever rows are present (ViT style,
// works on non-grid token sets such as the visible subset).
// res > 0: rows are a res*res grid; attention runs inside window*window
// windows, cyclically shifted by window/2 on request (standard shifted-window
// scheme, with cross-region attention masked out). The shift collapses to a
// no-op when the grid does not exceed the window.
struct WindowSpec {
  int res = 0;
  int window = 0;
  bool shifted = false;
};

// Pre-norm block: x + Attn(LN(x)), then x + MLP(LN(x)); GELU, MLP ratio 4.
ag::VPtr transformer_block(const ag::VPtr& x, GraphParams& P,
                           const std::string& prefix, int heads,
                           const WindowSpec& win = {});

// Registers the block's tensors under `prefix` (ln1, attn.wq..bo, ln2, mlp.*).
void add_block_params(ParamStore& s, Rng& rng, const std::string& prefix,
                      int dim);

// Window bookkeeping, exposed for tests.
std::vector<int> shift_partition_index(int res, int window, int shift);
std::vector<int> inverse_index(const std::vector<int>& idx);
std::vector<Tensor> window_attention_masks(int res, int window, int shift);

}  // namespace edgesynth
