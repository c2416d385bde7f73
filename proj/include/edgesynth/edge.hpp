#pragma once

#include "edgesynth/image.hpp"
#include "edgesynth/tensor.hpp"

namespace edgesynth {

enum class EdgeDetector { Sobel, Prewitt };

EdgeDetector edge_detector_from_string(const std::string& s);
const char* edge_detector_name(EdgeDetector d);

// 3x3 first-order gradient magnitude with replicate border padding, scaled by
// the analytic maximum for [0,1] inputs (4*sqrt(2) Sobel, 3*sqrt(2) Prewitt)
// and clipped, so edge targets live in the sigmoid output range.
Tensor sobel_edge_map(const Tensor& img);
Tensor prewitt_edge_map(const Tensor& img);
Tensor edge_map(const Tensor& img, EdgeDetector d);

inline Tensor edge_map(const Image& img, EdgeDetector d) {
  return edge_map(img.to_tensor(), d);
}

}  // namespace edgesynth
