#pragma once

#include <vector>

#include "edgesynth/image.hpp"
#include "edgesynth/tensor.hpp"

namespace edgesynth {

// One flattened patch per row: row r holds patch (r / grid_w, r % grid_w),
// pixels in row-major order within the patch.
struct PatchGrid {
  Tensor tokens;  // [grid_h * grid_w, P*P]
  int grid_h = 0;
  int grid_w = 0;
  int patch = 0;
};

// Gather index such that tokens.data[k] = pixels[patchify_index(H,W,P)[k]].
// Shared by the plain path and the autodiff path so both agree bit-for-bit.
std::vector<int> patchify_index(int h, int w, int p);

PatchGrid patchify(const Image& img, int p);
PatchGrid patchify(const Tensor& grid2d, int p);
Image unpatchify(const PatchGrid& g);

}  // namespace edgesynth
