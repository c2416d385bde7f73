#include "edgesynth/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edgesynth/common.hpp"
#include "edgesynth/ntf.hpp"

namespace edgesynth {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::string image_basename(uint32_t id, Modality m) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04u_%s", id, modality_name(m));
  return buf;
}
}  // namespace

std::vector<uint32_t> DatasetManifest::ids(Split s) const {
  std::vector<uint32_t> out;
  for (const auto& e : entries)
    if (e.split == s && e.modality == Modality::A) out.push_back(e.id);
  return out;
}

std::vector<uint32_t> DatasetManifest::paired_ids(Split s) const {
  std::vector<uint32_t> out;
  for (const auto& e : entries)
    if (e.split == s && e.modality == Modality::A && e.paired)
      out.push_back(e.id);
  return out;
}

const ManifestEntry& DatasetManifest::find(uint32_t id, Modality m) const {
  for (const auto& e : entries)
    if (e.id == id && e.modality == m) return e;
  throw IoError("manifest has no entry for id " + std::to_string(id) +
                " modality " + modality_name(m));
}

Image DatasetManifest::load_image(const ManifestEntry& e) const {
  Tensor t = ntf_read(root / e.rel_path);
  return Image::from_tensor(t, e.modality, e.id);
}

Image DatasetManifest::load_image(uint32_t id, Modality m) const {
  return load_image(find(id, m));
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + file.string());
  for (const auto& e : m.entries) {
    os << e.id << '\t' << modality_name(e.modality) << '\t' << e.rel_path
       << '\t' << split_name(e.split) << '\t' << (e.paired ? 1 : 0) << '\n';
  }
  if (!os) throw IoError("write failed: " + file.string());
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open: " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id_s, mod_s, path_s, split_s, paired_s;
    if (!std::getline(ls, id_s, '\t') || !std::getline(ls, mod_s, '\t') ||
        !std::getline(ls, path_s, '\t') || !std::getline(ls, split_s, '\t') ||
        !std::getline(ls, paired_s, '\t'))
      throw IoError("malformed manifest line " + std::to_string(lineno) +
                    " in " + file.string());
    ManifestEntry e;
    e.id = static_cast<uint32_t>(std::stoul(id_s));
    e.modality = modality_from_string(mod_s);
    e.rel_path = path_s;
    if (split_s == "train")
      e.split = Split::Train;
    else if (split_s == "test")
      e.split = Split::Test;
    else
      throw IoError("unknown split '" + split_s + "' in " + file.string());
    e.paired = paired_s == "1";
    m.entries.push_back(e);
  }
  return m;
}

Image render_base_anatomy(uint64_t seed, int size, int patch_size) {
  ES_CONFIG_CHECK(size >= 16, "image size must be >= 16");
  ES_CONFIG_CHECK(size % patch_size == 0,
                  "image size must be divisible by the patch size");
  Rng rng(seed);

  // Draw order is part of the format: k, then per-ellipse
  // (cx, cy, axis1, axis2, rotation, intensity), then bias (a, b).
  int k = 2 + rng.uniform_int(4);
  struct Ellipse {
    double cx, cy, a, b, cos_t, sin_t, intensity;
  };
  std::vector<Ellipse> ells(static_cast<size_t>(k));
  for (auto& e : ells) {
    e.cx = rng.uniform(0.0, size);
    e.cy = rng.uniform(0.0, size);
    e.a = rng.uniform(size / 8.0, size / 3.0);
    e.b = rng.uniform(size / 8.0, size / 3.0);
    double theta = rng.uniform(0.0, kPi);
    e.cos_t = std::cos(theta);
    e.sin_t = std::sin(theta);
    e.intensity = rng.uniform(0.2, 0.9);
  }
  double bias_a = rng.uniform(0.5, 2.0);
  double bias_b = rng.uniform(0.5, 2.0);

  Image img(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      double v = 0.0;
      for (const auto& e : ells) {
        double dx = i - e.cx;
        double dy = j - e.cy;
        double u = (dx * e.cos_t + dy * e.sin_t) / e.a;
        double w = (-dx * e.sin_t + dy * e.cos_t) / e.b;
        if (u * u + w * w <= 1.0) v = std::max(v, e.intensity);
      }
      double bias =
          0.85 + 0.15 * std::cos(2.0 * kPi * (bias_a * i + bias_b * j) / size);
      v = std::clamp(v * bias, 0.0, 1.0);
      // round through f32 so rendered pixels survive NTF1 round trips exactly
      img.at(i, j) = static_cast<double>(static_cast<float>(v));
    }
  }
  return img;
}

std::pair<Image, Image> derive_modalities(const Image& base) {
  Image a = base;
  a.modality = Modality::A;
  Image b(base.h, base.w);
  b.modality = Modality::B;
  b.id = base.id;
  for (size_t i = 0; i < base.px.size(); ++i) {
    double v = std::pow(1.0 - base.px[i], 1.5);
    b.px[i] = static_cast<double>(
        static_cast<float>(std::clamp(v, 0.0, 1.0)));
  }
  return {std::move(a), std::move(b)};
}

DatasetManifest generate_dataset(uint64_t seed, int n_train, int n_test,
                                 int size, const std::filesystem::path& out_dir,
                                 int patch_size) {
  ES_CONFIG_CHECK(n_train >= 0 && n_test >= 0, "negative dataset size");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir.string());

  DatasetManifest m;
  m.root = out_dir;
  int total = n_train + n_test;
  for (int i = 0; i < total; ++i) {
    uint32_t id = static_cast<uint32_t>(i);
    Split split = i < n_train ? Split::Train : Split::Test;
    Image base = render_base_anatomy(seed ^ id, size, patch_size);
    base.id = id;
    auto [a, b] = derive_modalities(base);
    for (const Image* img : {&a, &b}) {
      std::string name = image_basename(id, img->modality);
      ntf_write(out_dir / (name + ".ntf"), img->to_tensor());
      write_pgm(out_dir / (name + ".pgm"), *img);
      ManifestEntry e;
      e.id = id;
      e.modality = img->modality;
      e.rel_path = name + ".ntf";
      e.split = split;
      e.paired = true;
      m.entries.push_back(e);
    }
  }
  save_manifest(m, out_dir / "manifest.tsv");
  return m;
}

DatasetManifest split_dataset(const DatasetManifest& m, double paired_ratio) {
  ES_CONFIG_CHECK(paired_ratio > 0.0 && paired_ratio <= 1.0,
                  "paired_ratio must be in (0, 1]");
  DatasetManifest out = m;
  auto train_ids = out.ids(Split::Train);
  std::sort(train_ids.begin(), train_ids.end());
  size_t n_paired = static_cast<size_t>(
      std::floor(paired_ratio * static_cast<double>(train_ids.size())));
  std::vector<bool> keep(train_ids.size(), false);
  for (size_t i = 0; i < n_paired; ++i) keep[i] = true;
  for (auto& e : out.entries) {
    if (e.split != Split::Train) continue;
    auto it = std::lower_bound(train_ids.begin(), train_ids.end(), e.id);
    size_t rank = static_cast<size_t>(it - train_ids.begin());
    e.paired = keep[rank];
  }
  return out;
}

}  // namespace edgesynth
