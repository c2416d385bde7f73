#include "edgesynth/config.hpp"

#include <sstream>

namespace edgesynth {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void EdgeMaeConfig::validate() const {
  ES_CONFIG_CHECK(image_size >= 16, "image_size must be >= 16");
  ES_CONFIG_CHECK(patch_size > 0 && image_size % patch_size == 0,
                  "image_size must be divisible by patch_size");
  ES_CONFIG_CHECK(enc_dim > 0 && enc_dim % enc_heads == 0,
                  "enc_dim must be divisible by enc_heads");
  ES_CONFIG_CHECK(enc_dim % 4 == 0 && dec_dim % 4 == 0,
                  "embedding dims must be divisible by 4 (2D sincos table)");
  ES_CONFIG_CHECK(dec_dim > 0 && dec_dim % dec_heads == 0,
                  "dec_dim must be divisible by dec_heads");
  ES_CONFIG_CHECK(enc_layers >= 1 && dec_layers >= 1, "need at least 1 layer");
  ES_CONFIG_CHECK(dec_shared_layers >= 0 && dec_shared_layers < dec_layers,
                  "dec_shared_layers must be < dec_layers");
  ES_CONFIG_CHECK(mask_ratio > 0.0 && mask_ratio < 1.0,
                  "mask_ratio must be in (0, 1)");
}

uint64_t EdgeMaeConfig::hash() const {
  std::ostringstream os;
  os << "edge-mae;image_size=" << image_size << ";patch_size=" << patch_size
     << ";enc_dim=" << enc_dim << ";enc_layers=" << enc_layers
     << ";enc_heads=" << enc_heads << ";dec_dim=" << dec_dim
     << ";dec_heads=" << dec_heads << ";dec_layers=" << dec_layers
     << ";dec_shared_layers=" << dec_shared_layers;
  return fnv1a64(os.str());
}

EdgeMaeConfig EdgeMaeConfig::micro() {
  EdgeMaeConfig c;
  c.image_size = 16;
  c.patch_size = 8;
  c.enc_dim = 8;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.dec_dim = 8;
  c.dec_heads = 2;
  c.dec_layers = 2;
  c.dec_shared_layers = 1;
  c.mask_ratio = 0.5;
  return c;
}

void MtNetConfig::validate(const EdgeMaeConfig& enc) const {
  ES_CONFIG_CHECK(base_channels > 0 && base_channels % head_dim == 0,
                  "base_channels must be divisible by head_dim");
  ES_CONFIG_CHECK(window >= 2 && window % 2 == 0, "window must be even");
  int large = 2 * enc.grid();
  ES_CONFIG_CHECK(large >= 4 && (large & (large - 1)) == 0,
                  "token grid must be a power of two >= 2");
}

uint64_t MtNetConfig::hash() const {
  std::ostringstream os;
  os << "mt-net;base_channels=" << base_channels << ";window=" << window
     << ";head_dim=" << head_dim;
  return fnv1a64(os.str());
}

MtNetConfig MtNetConfig::micro() {
  MtNetConfig c;
  c.base_channels = 8;
  c.window = 4;
  c.head_dim = 4;
  return c;
}

}  // namespace edgesynth
