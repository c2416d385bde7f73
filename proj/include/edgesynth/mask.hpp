#pragma once

#include <cstdint>
#include <vector>

#include "edgesynth/rng.hpp"
#include "edgesynth/tensor.hpp"

namespace edgesynth {

// Per-patch binary mask; 1 = masked. Exactly floor(ratio * n) ones.
struct MaskPlan {
  std::vector<uint8_t> mask;  // grid_h * grid_w, row-major
  int grid_h = 0;
  int grid_w = 0;
  double ratio = 0.0;

  int n() const { return grid_h * grid_w; }
  int masked_count() const;
  bool masked(int r, int c) const {
    return mask[static_cast<size_t>(r) * grid_w + c] != 0;
  }
  Tensor to_tensor() const;  // 0/1 f32 grid, for NTF1 fixtures
};

// Partial Fisher-Yates over indices 0..n-1 on the shared splitmix64 stream;
// the first floor(ratio*n) slots of the shuffle are the masked set.
MaskPlan sample_mask(int grid_h, int grid_w, double ratio, Rng& rng);

// alpha(i,j) = mean of the mask over the 3x3 neighborhood clipped to the
// grid; border cells average over their 4 or 6 in-bounds neighbors.
Tensor compute_alpha(const MaskPlan& plan);

// Patch weight of the two pretraining stages: 2-alpha then 1+alpha.
double stage_weight(double alpha, int stage);

}  // namespace edgesynth
