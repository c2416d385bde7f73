#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgesynth/tensor.hpp"

namespace edgesynth {

enum class Modality { A, B };

inline const char* modality_name(Modality m) {
  return m == Modality::A ? "A" : "B";
}
Modality modality_from_string(const std::string& s);

// Single-channel 2D intensity grid in [0,1]; the unit of all synthesis I/O.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;  // row-major, h*w
  Modality modality = Modality::A;
  uint32_t id = 0;

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, 0.0) {}

  double& at(int i, int j) { return px[static_cast<size_t>(i) * w + j]; }
  double at(int i, int j) const { return px[static_cast<size_t>(i) * w + j]; }

  Tensor to_tensor() const { return Tensor({h, w}, px); }
  static Image from_tensor(const Tensor& t, Modality m = Modality::A,
                           uint32_t id = 0);
};

// P5 PGM, maxval 255, intensity = round(pixel * 255) clamped to [0,255].
void write_pgm(const std::filesystem::path& path, const Image& img);
void write_pgm(const std::filesystem::path& path, const Tensor& grid);

}  // namespace edgesynth
