#include "edgesynth/ntf.hpp"

#include <cstring>
#include <fstream>

#include "edgesynth/common.hpp"

namespace edgesynth {

namespace {

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<uint8_t> ntf_encode(const Tensor& t) {
  std::vector<uint8_t> out;
  out.reserve(8 + 4 * t.shape.size() + 4 * t.data.size());
  out.push_back('N');
  out.push_back('T');
  out.push_back('F');
  out.push_back('1');
  put_u32le(out, static_cast<uint32_t>(t.shape.size()));
  for (int d : t.shape) {
    ES_CHECK(d >= 0, "negative dim");
    put_u32le(out, static_cast<uint32_t>(d));
  }
  for (double v : t.data) {
    float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
  return out;
}

Tensor ntf_decode(const std::vector<uint8_t>& bytes, const std::string& origin) {
  auto fail = [&](const std::string& why) -> Tensor {
    throw IoError("bad NTF1 data (" + why + "): " + origin);
  };
  if (bytes.size() < 8) return fail("truncated header");
  if (bytes[0] != 'N' || bytes[1] != 'T' || bytes[2] != 'F' || bytes[3] != '1')
    return fail("magic mismatch");
  uint32_t rank = get_u32le(bytes.data() + 4);
  if (rank > 8) return fail("implausible rank");
  if (bytes.size() < 8 + 4ull * rank) return fail("truncated dims");
  std::vector<int> shape(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = get_u32le(bytes.data() + 8 + 4 * i);
    shape[i] = static_cast<int>(d);
    numel *= d;
  }
  size_t expect = 8 + 4ull * rank + 4ull * numel;
  if (bytes.size() != expect) return fail("payload size mismatch");
  Tensor t(shape);
  const uint8_t* p = bytes.data() + 8 + 4 * rank;
  for (int64_t i = 0; i < numel; ++i, p += 4) {
    uint32_t bits = get_u32le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    t.data[static_cast<size_t>(i)] = static_cast<double>(f);
  }
  return t;
}

void ntf_write(const std::filesystem::path& path, const Tensor& t) {
  auto bytes = ntf_encode(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor ntf_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  return ntf_decode(bytes, path.string());
}

}  // namespace edgesynth
