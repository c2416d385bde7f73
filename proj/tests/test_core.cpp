#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "edgesynth/edge.hpp"
#include "edgesynth/mask.hpp"
#include "edgesynth/ntf.hpp"
#include "edgesynth/patch.hpp"
#include "edgesynth/phantom.hpp"
#include "edgesynth/rng.hpp"

using namespace edgesynth;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("edgesynth_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (auto& v : img.px) v = rng.uniform();
  return img;
}

// independent re-statement of the valid-neighbor average
double alpha_oracle(const MaskPlan& m, int i, int j) {
  double sum = 0.0;
  int cnt = 0;
  for (int ii = i - 1; ii <= i + 1; ++ii)
    for (int jj = j - 1; jj <= j + 1; ++jj)
      if (ii >= 0 && ii < m.grid_h && jj >= 0 && jj < m.grid_w) {
        sum += m.masked(ii, jj) ? 1.0 : 0.0;
        ++cnt;
      }
  return sum / cnt;
}

}  // namespace

TEST_CASE("splitmix64 stream is seed-deterministic") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  for (int i = 0; i < 1000; ++i) {
    double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("ntf round trip is f32-exact") {
  Tensor t({3, 4});
  Rng rng(1);
  for (auto& v : t.data) v = static_cast<double>(static_cast<float>(rng.uniform(-5, 5)));
  auto dir = temp_dir("ntf");
  ntf_write(dir / "t.ntf", t);
  Tensor back = ntf_read(dir / "t.ntf");
  CHECK(back.shape == t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);

  auto bytes = ntf_encode(t);
  CHECK(bytes[0] == 'N');
  CHECK(bytes[1] == 'T');
  CHECK(bytes[2] == 'F');
  CHECK(bytes[3] == '1');
  // u32le rank then dims
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == 3);
  CHECK(bytes[12] == 4);
  CHECK(bytes.size() == 8 + 8 + 4 * 12);

  bytes[2] = 'X';
  CHECK_THROWS_AS(ntf_decode(bytes, "corrupted"), IoError);
}

TEST_CASE("phantom rendering is deterministic and in range") {
  Image a = render_base_anatomy(7, 64);
  Image b = render_base_anatomy(7, 64);
  CHECK(a.px == b.px);
  for (double v : a.px) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(render_base_anatomy(7, 60), ConfigError);  // 60 % 8 != 0
}

TEST_CASE("phantom golden grid (seed 7, size 64)") {
  Image img = render_base_anatomy(7, 64);
  fs::path golden = fs::path(ES_TEST_DATA_DIR) / "phantom_seed7_64.ntf";
  REQUIRE_MESSAGE(fs::exists(golden), "golden file missing: run "
                                      "tools/regen_golden to create it");
  auto want = file_bytes(golden);
  auto got = ntf_encode(img.to_tensor());
  CHECK(got == want);
}

TEST_CASE("modality derivation endpoints and midpoint") {
  Image base(16, 16);
  base.px[0] = 0.0;
  base.px[1] = 1.0;
  base.px[2] = 0.5;
  auto [a, b] = derive_modalities(base);
  CHECK(a.px[0] == 0.0);
  CHECK(b.px[0] == doctest::Approx(1.0));
  CHECK(a.px[1] == 1.0);
  CHECK(b.px[1] == doctest::Approx(0.0));
  CHECK(b.px[2] == doctest::Approx(0.35355339).epsilon(1e-6));
  CHECK(a.modality == Modality::A);
  CHECK(b.modality == Modality::B);
}

TEST_CASE("generate_dataset writes a complete, reproducible directory") {
  auto d1 = temp_dir("gen1");
  auto d2 = temp_dir("gen2");
  DatasetManifest m1 = generate_dataset(7, 4, 2, 64, d1);
  DatasetManifest m2 = generate_dataset(7, 4, 2, 64, d2);
  CHECK(m1.entries.size() == 12);  // 6 ids x 2 modalities
  std::set<uint32_t> ids;
  for (const auto& e : m1.entries) ids.insert(e.id);
  CHECK(ids.size() == 6);
  for (const auto& e : m1.entries) {
    CHECK(fs::exists(d1 / e.rel_path));
    CHECK(file_bytes(d1 / e.rel_path) ==
          file_bytes(d2 / m2.find(e.id, e.modality).rel_path));
  }
  CHECK(file_bytes(d1 / "manifest.tsv") == file_bytes(d2 / "manifest.tsv"));

  // regenerated pairs satisfy B = clip((1-A)^1.5) exactly at f32 precision
  DatasetManifest loaded = load_manifest(d1 / "manifest.tsv");
  Image a = loaded.load_image(0, Modality::A);
  Image b = loaded.load_image(0, Modality::B);
  for (size_t i = 0; i < a.px.size(); ++i) {
    float want = static_cast<float>(std::pow(1.0 - a.px[i], 1.5));
    CHECK(static_cast<float>(b.px[i]) == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("split_dataset floor arithmetic and monotone pairing") {
  auto dir = temp_dir("split");
  DatasetManifest m = generate_dataset(7, 10, 2, 16, dir);
  DatasetManifest s75 = split_dataset(m, 0.75);
  CHECK(s75.paired_ids(Split::Train).size() == 7);
  DatasetManifest s1 = split_dataset(m, 1.0);
  CHECK(s1.paired_ids(Split::Train).size() == 10);
  // ratio 0.7 on 295 -> 206 paired
  DatasetManifest m295;
  m295.root = dir;
  for (uint32_t id = 0; id < 295; ++id)
    for (Modality mod : {Modality::A, Modality::B}) {
      ManifestEntry e;
      e.id = id;
      e.modality = mod;
      e.rel_path = "x.ntf";
      e.split = Split::Train;
      m295.entries.push_back(e);
    }
  CHECK(split_dataset(m295, 0.7).paired_ids(Split::Train).size() == 206);

  // monotone: paired set under r1 <= r2 is nested
  auto p30 = split_dataset(m, 0.3).paired_ids(Split::Train);
  auto p80 = split_dataset(m, 0.8).paired_ids(Split::Train);
  std::set<uint32_t> big(p80.begin(), p80.end());
  for (uint32_t id : p30) CHECK(big.count(id) == 1);

  CHECK_THROWS_AS(split_dataset(m, 0.0), ConfigError);
  CHECK_THROWS_AS(split_dataset(m, 1.5), ConfigError);
}

TEST_CASE("patchify shapes and exact inverse") {
  Rng rng(3);
  Image img = random_image(rng, 64, 64);
  PatchGrid g = patchify(img, 8);
  CHECK(g.tokens.rows() == 64);
  CHECK(g.tokens.cols() == 64);
  CHECK(g.grid_h == 8);

  // 256x256 with P=8 partitions into a 32x32 grid
  Image big = random_image(rng, 256, 256);
  PatchGrid gb = patchify(big, 8);
  CHECK(gb.grid_h == 32);
  CHECK(gb.grid_w == 32);

  for (int trial = 0; trial < 100; ++trial) {
    Image x = random_image(rng, 32, 32);
    Image back = unpatchify(patchify(x, 8));
    CHECK(back.px == x.px);
  }

  Image constant(16, 16);
  for (auto& v : constant.px) v = 0.25;
  PatchGrid gc = patchify(constant, 8);
  for (int r = 1; r < gc.tokens.rows(); ++r)
    for (int c = 0; c < gc.tokens.cols(); ++c)
      CHECK(gc.tokens.at(r, c) == gc.tokens.at(0, c));

  // single-patch image: the one token row is the image itself
  Image one = random_image(rng, 8, 8);
  PatchGrid g1 = patchify(one, 8);
  CHECK(g1.tokens.rows() == 1);
  CHECK(g1.tokens.data == one.px);

  CHECK_THROWS_AS(patchify(random_image(rng, 12, 12), 8), ConfigError);
}

TEST_CASE("mask cardinality, determinism and pinned sample") {
  Rng rng(7);
  MaskPlan m = sample_mask(8, 8, 0.70, rng);
  CHECK(m.masked_count() == 44);  // floor(0.7 * 64); 20 visible

  // floor is non-decreasing in ratio
  int prev = 0;
  for (double r = 0.05; r < 1.0; r += 0.05) {
    Rng rr(1);
    int c = sample_mask(8, 8, r, rr).masked_count();
    CHECK(c >= prev);
    prev = c;
  }

  Rng r1(7), r2(7);
  MaskPlan a = sample_mask(4, 4, 0.5, r1);
  MaskPlan b = sample_mask(4, 4, 0.5, r2);
  CHECK(a.mask == b.mask);
  CHECK(a.masked_count() == 8);
  // pinned by the reference Fisher-Yates run (seed 7, 4x4, ratio 0.5)
  std::set<int> masked;
  for (int i = 0; i < 16; ++i)
    if (a.mask[static_cast<size_t>(i)]) masked.insert(i);
  std::set<int> want = {1, 3, 4, 6, 7, 9, 10, 14};
  CHECK(masked == want);

  CHECK_THROWS_AS(sample_mask(4, 4, 0.0, r1), ConfigError);
  CHECK_THROWS_AS(sample_mask(4, 4, 1.0, r1), ConfigError);
}

TEST_CASE("alpha map matches the brute-force oracle exactly") {
  SUBCASE("all masked / all clear") {
    MaskPlan m;
    m.grid_h = m.grid_w = 4;
    m.mask.assign(16, 1);
    Tensor a = compute_alpha(m);
    for (double v : a.data) CHECK(v == 1.0);
    m.mask.assign(16, 0);
    a = compute_alpha(m);
    for (double v : a.data) CHECK(v == 0.0);
  }
  SUBCASE("2x2 single corner") {
    MaskPlan m;
    m.grid_h = m.grid_w = 2;
    m.mask = {1, 0, 0, 0};
    Tensor a = compute_alpha(m);
    for (double v : a.data) CHECK(v == 0.25);
  }
  SUBCASE("random plans, exact equality") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      MaskPlan m = sample_mask(8, 8, 0.05 + 0.9 * rng.uniform(), rng);
      Tensor a = compute_alpha(m);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          CHECK(a.at(i, j) == alpha_oracle(m, i, j));
          CHECK(a.at(i, j) >= 0.0);
          CHECK(a.at(i, j) <= 1.0);
        }
    }
  }
}

TEST_CASE("stage weights") {
  CHECK(stage_weight(0.5, 1) == 1.5);
  CHECK(stage_weight(0.5, 2) == 1.5);
  CHECK(stage_weight(1.0, 1) == 1.0);
  CHECK(stage_weight(1.0, 2) == 2.0);
  CHECK(stage_weight(0.25, 1) == 1.75);
  CHECK(stage_weight(0.25, 2) == 1.25);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform();
    CHECK(stage_weight(a, 1) + stage_weight(a, 2) == 3.0);
  }
  CHECK_THROWS_AS(stage_weight(1.5, 1), CheckError);
  CHECK_THROWS_AS(stage_weight(0.5, 3), ConfigError);
}

TEST_CASE("mean alpha over random masks tracks the ratio") {
  Rng rng(13);
  double ratio = 0.6;
  double total = 0.0;
  int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    MaskPlan m = sample_mask(8, 8, ratio, rng);
    Tensor a = compute_alpha(m);
    double s = 0.0;
    for (double v : a.data) s += v;
    total += s / a.numel();
  }
  CHECK(std::fabs(total / trials - ratio) < 0.02);
}

TEST_CASE("sobel and prewitt edge maps") {
  SUBCASE("constant image gives a zero map") {
    Tensor img = Tensor::full({16, 16}, 0.7);
    for (double v : sobel_edge_map(img).data) CHECK(v == 0.0);
    for (double v : prewitt_edge_map(img).data) CHECK(v == 0.0);
  }
  SUBCASE("horizontal ramp magnitudes") {
    Tensor img({16, 16});
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) img.at(i, j) = 0.1 * j;
    Tensor s = sobel_edge_map(img);
    Tensor p = prewitt_edge_map(img);
    // interior: Gx = 8*0.1 (Sobel), 6*0.1 (Prewitt); both normalize to the
    // same 0.141421
    for (int i = 2; i < 14; ++i)
      for (int j = 2; j < 14; ++j) {
        CHECK(s.at(i, j) == doctest::Approx(0.8 / (4 * std::sqrt(2.0))).epsilon(1e-9));
        CHECK(p.at(i, j) == doctest::Approx(0.6 / (3 * std::sqrt(2.0))).epsilon(1e-9));
      }
  }
  SUBCASE("transpose symmetry is exact") {
    Rng rng(17);
    Tensor img({12, 12});
    for (auto& v : img.data) v = rng.uniform();
    Tensor t({12, 12});
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) t.at(i, j) = img.at(j, i);
    Tensor a = sobel_edge_map(img);
    Tensor b = sobel_edge_map(t);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) CHECK(a.at(i, j) == b.at(j, i));
  }
  SUBCASE("range and rotation equivariance") {
    Rng rng(19);
    Tensor img({10, 10});
    for (auto& v : img.data) v = rng.uniform();
    Tensor e = sobel_edge_map(img);
    for (double v : e.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // rotate image by 90 degrees: rot(i,j) = img(n-1-j, i)
    int n = 10;
    Tensor rot({n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) rot.at(i, j) = img.at(n - 1 - j, i);
    Tensor er = sobel_edge_map(rot);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(er.at(i, j) == doctest::Approx(e.at(n - 1 - j, i)).epsilon(1e-12));
  }
  SUBCASE("linearity of the unnormalized magnitude") {
    Rng rng(23);
    Tensor img({10, 10});
    for (auto& v : img.data) v = 0.2 + 0.2 * rng.uniform();  // clip-free zone
    Tensor half = img;
    for (auto& v : half.data) v *= 0.5;
    Tensor e1 = sobel_edge_map(img);
    Tensor e2 = sobel_edge_map(half);
    for (size_t i = 0; i < e1.data.size(); ++i)
      CHECK(e1.data[i] == doctest::Approx(2.0 * e2.data[i]).epsilon(1e-9));
  }
}

TEST_CASE("pgm preview encoding") {
  Image img(2, 2);
  img.px = {0.0, 0.5, 1.0, 2.0};  // 2.0 clamps to 255
  auto dir = temp_dir("pgm");
  write_pgm(dir / "x.pgm", img);
  auto bytes = file_bytes(dir / "x.pgm");
  std::string header(bytes.begin(), bytes.begin() + 9);
  CHECK(header == "P5\n2 2\n25");
  CHECK(bytes[bytes.size() - 4] == 0);
  CHECK(bytes[bytes.size() - 3] == 128);  // round(0.5*255)
  CHECK(bytes[bytes.size() - 2] == 255);
  CHECK(bytes[bytes.size() - 1] == 255);
}
