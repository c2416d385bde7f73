#include "edgesynth/image.hpp"

#include <cmath>
#include <fstream>

#include "edgesynth/common.hpp"

namespace edgesynth {

Modality modality_from_string(const std::string& s) {
  if (s == "A") return Modality::A;
  if (s == "B") return Modality::B;
  throw ConfigError("unknown modality: " + s);
}

Image Image::from_tensor(const Tensor& t, Modality m, uint32_t id) {
  ES_CHECK(t.rank() == 2, "image tensor must be rank 2, got " + t.shape_str());
  Image img(t.shape[0], t.shape[1]);
  img.px = t.data;
  img.modality = m;
  img.id = id;
  return img;
}

void write_pgm(const std::filesystem::path& path, const Tensor& grid) {
  ES_CHECK(grid.rank() == 2, "pgm wants a rank-2 grid");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "P5\n" << grid.shape[1] << " " << grid.shape[0] << "\n255\n";
  for (double v : grid.data) {
    long q = std::lround(v * 255.0);
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    os.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  write_pgm(path, img.to_tensor());
}

}  // namespace edgesynth
