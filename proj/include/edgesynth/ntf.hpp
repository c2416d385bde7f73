#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edgesynth/tensor.hpp"

namespace edgesynth {

// "NTF1" binary tensor file:
//   bytes 'N','T','F','1'
//   u32 little-endian rank
//   rank x u32 little-endian dims
//   payload f32 little-endian, row-major
std::vector<uint8_t> ntf_encode(const Tensor& t);
Tensor ntf_decode(const std::vector<uint8_t>& bytes, const std::string& origin);

void ntf_write(const std::filesystem::path& path, const Tensor& t);
Tensor ntf_read(const std::filesystem::path& path);

}  // namespace edgesynth
