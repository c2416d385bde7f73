#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgesynth/image.hpp"
#include "edgesynth/rng.hpp"

namespace edgesynth {

enum class Split { Train, Test };

inline const char* split_name(Split s) {
  return s == Split::Train ? "train" : "test";
}

struct ManifestEntry {
  uint32_t id = 0;
  Modality modality = Modality::A;
  std::string rel_path;
  Split split = Split::Train;
  bool paired = true;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<uint32_t> ids(Split s) const;
  std::vector<uint32_t> paired_ids(Split s) const;
  const ManifestEntry& find(uint32_t id, Modality m) const;
  Image load_image(const ManifestEntry& e) const;
  Image load_image(uint32_t id, Modality m) const;
};

// One record per line: id<TAB>modality<TAB>relative_path<TAB>split<TAB>paired{0|1}
void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

// Deterministic "base tissue" map: a handful of rotated ellipses composited by
// per-pixel max, shaded by a smooth cosine bias field, clipped to [0,1].
Image render_base_anatomy(uint64_t seed, int size, int patch_size = 8);

// A keeps the base contrast; B = clip((1-base)^1.5) is a monotone nonlinear
// remap, so the A->B mapping is learnable but not the identity.
std::pair<Image, Image> derive_modalities(const Image& base);

DatasetManifest generate_dataset(uint64_t seed, int n_train, int n_test,
                                 int size, const std::filesystem::path& out_dir,
                                 int patch_size = 8);

// Marks the first floor(paired_ratio * n_train) train ids as paired. Every id
// stays usable as two independent single-modality images for pretraining.
DatasetManifest split_dataset(const DatasetManifest& m, double paired_ratio);

}  // namespace edgesynth
