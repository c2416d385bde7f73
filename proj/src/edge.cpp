#include "edgesynth/edge.hpp"

#include <algorithm>
#include <cmath>

#include "edgesynth/common.hpp"

namespace edgesynth {

EdgeDetector edge_detector_from_string(const std::string& s) {
  if (s == "sobel") return EdgeDetector::Sobel;
  if (s == "prewitt") return EdgeDetector::Prewitt;
  throw ConfigError("unknown edge detector: " + s + " (want sobel|prewitt)");
}

const char* edge_detector_name(EdgeDetector d) {
  return d == EdgeDetector::Sobel ? "sobel" : "prewitt";
}

namespace {

Tensor gradient_magnitude(const Tensor& img, double mid_weight, double norm) {
  ES_CHECK(img.rank() == 2, "edge map wants a rank-2 grid");
  int h = img.shape[0];
  int w = img.shape[1];
  auto px = [&](int i, int j) {
    i = std::clamp(i, 0, h - 1);  // replicate padding
    j = std::clamp(j, 0, w - 1);
    return img.at(i, j);
  };
  Tensor out({h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double gx = (px(i - 1, j + 1) - px(i - 1, j - 1)) +
                  mid_weight * (px(i, j + 1) - px(i, j - 1)) +
                  (px(i + 1, j + 1) - px(i + 1, j - 1));
      double gy = (px(i + 1, j - 1) - px(i - 1, j - 1)) +
                  mid_weight * (px(i + 1, j) - px(i - 1, j)) +
                  (px(i + 1, j + 1) - px(i - 1, j + 1));
      out.at(i, j) = std::clamp(std::sqrt(gx * gx + gy * gy) / norm, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

Tensor sobel_edge_map(const Tensor& img) {
  return gradient_magnitude(img, 2.0, 4.0 * std::sqrt(2.0));
}

Tensor prewitt_edge_map(const Tensor& img) {
  return gradient_magnitude(img, 1.0, 3.0 * std::sqrt(2.0));
}

Tensor edge_map(const Tensor& img, EdgeDetector d) {
  return d == EdgeDetector::Sobel ? sobel_edge_map(img) : prewitt_edge_map(img);
}

}  // namespace edgesynth
