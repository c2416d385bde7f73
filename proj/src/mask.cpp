#include "edgesynth/mask.hpp"

#include <cmath>
#include <numeric>

#include "edgesynth/common.hpp"

namespace edgesynth {

int MaskPlan::masked_count() const {
  int c = 0;
  for (uint8_t v : mask) c += v;
  return c;
}

Tensor MaskPlan::to_tensor() const {
  Tensor t({grid_h, grid_w});
  for (size_t i = 0; i < mask.size(); ++i) t.data[i] = mask[i] ? 1.0 : 0.0;
  return t;
}

MaskPlan sample_mask(int grid_h, int grid_w, double ratio, Rng& rng) {
  ES_CONFIG_CHECK(ratio > 0.0 && ratio < 1.0, "mask ratio must be in (0, 1)");
  ES_CHECK(grid_h > 0 && grid_w > 0, "empty grid");
  int n = grid_h * grid_w;
  int m = static_cast<int>(std::floor(ratio * n));
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    int j = i + rng.uniform_int(n - i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  MaskPlan plan;
  plan.grid_h = grid_h;
  plan.grid_w = grid_w;
  plan.ratio = ratio;
  plan.mask.assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < m; ++i) plan.mask[static_cast<size_t>(idx[i])] = 1;
  return plan;
}

Tensor compute_alpha(const MaskPlan& plan) {
  Tensor alpha({plan.grid_h, plan.grid_w});
  for (int i = 0; i < plan.grid_h; ++i) {
    for (int j = 0; j < plan.grid_w; ++j) {
      int sum = 0, cnt = 0;
      for (int di = -1; di <= 1; ++di) {
        int ii = i + di;
        if (ii < 0 || ii >= plan.grid_h) continue;
        for (int dj = -1; dj <= 1; ++dj) {
          int jj = j + dj;
          if (jj < 0 || jj >= plan.grid_w) continue;
          sum += plan.mask[static_cast<size_t>(ii) * plan.grid_w + jj];
          ++cnt;
        }
      }
      alpha.at(i, j) = static_cast<double>(sum) / cnt;
    }
  }
  return alpha;
}

double stage_weight(double alpha, int stage) {
  ES_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha out of [0,1]");
  ES_CONFIG_CHECK(stage == 1 || stage == 2, "stage must be 1 or 2");
  return stage == 1 ? 2.0 - alpha : 1.0 + alpha;
}

}  // namespace edgesynth
