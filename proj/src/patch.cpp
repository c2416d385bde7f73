#include "edgesynth/patch.hpp"

#include "edgesynth/common.hpp"

namespace edgesynth {

std::vector<int> patchify_index(int h, int w, int p) {
  ES_CONFIG_CHECK(p > 0 && h % p == 0 && w % p == 0,
                  "image size must be divisible by the patch size");
  int gw = w / p;
  int gh = h / p;
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(h) * w);
  for (int r = 0; r < gh * gw; ++r) {
    int pi = (r / gw) * p;
    int pj = (r % gw) * p;
    for (int di = 0; di < p; ++di)
      for (int dj = 0; dj < p; ++dj) idx.push_back((pi + di) * w + (pj + dj));
  }
  return idx;
}

PatchGrid patchify(const Tensor& grid2d, int p) {
  ES_CHECK(grid2d.rank() == 2, "patchify wants a rank-2 grid");
  int h = grid2d.shape[0];
  int w = grid2d.shape[1];
  auto idx = patchify_index(h, w, p);
  PatchGrid g;
  g.grid_h = h / p;
  g.grid_w = w / p;
  g.patch = p;
  g.tokens = Tensor({g.grid_h * g.grid_w, p * p});
  for (size_t k = 0; k < idx.size(); ++k)
    g.tokens.data[k] = grid2d.data[static_cast<size_t>(idx[k])];
  return g;
}

PatchGrid patchify(const Image& img, int p) { return patchify(img.to_tensor(), p); }

Image unpatchify(const PatchGrid& g) {
  ES_CHECK(g.tokens.rows() == g.grid_h * g.grid_w &&
               g.tokens.cols() == g.patch * g.patch,
           "malformed patch grid");
  int h = g.grid_h * g.patch;
  int w = g.grid_w * g.patch;
  auto idx = patchify_index(h, w, g.patch);
  Image img(h, w);
  for (size_t k = 0; k < idx.size(); ++k)
    img.px[static_cast<size_t>(idx[k])] = g.tokens.data[k];
  return img;
}

}  // namespace edgesynth
