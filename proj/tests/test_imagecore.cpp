#include <doctest.h>

#include <bit>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "beaconmap/image.hpp"
#include "beaconmap/imageio.hpp"
#include "oracles.hpp"

using namespace beaconmap;

namespace {

GrayImage random_gray(std::mt19937_64& rng, int w, int h) {
  GrayImage g(w, h);
  for (auto& p : g.pixels()) p = static_cast<std::uint8_t>(rng() & 0xff);
  return g;
}

BinaryImage random_binary(std::mt19937_64& rng, int w, int h, double density) {
  BinaryImage b(w, h);
  std::bernoulli_distribution on(density);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b.set(x, y, on(rng));
  return b;
}

// Labels are a relabelling of each other: same partition of the same pixels.
bool same_partition(const LabelImage& got, const std::vector<int>& want) {
  std::map<int, int> fwd, back;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const int a = got.labels[i], b = want[i];
    if ((a == 0) != (b == 0)) return false;
    if (a == 0) continue;
    auto [fi, fnew] = fwd.emplace(a, b);
    auto [bi, bnew] = back.emplace(b, a);
    if (fi->second != b || bi->second != a) return false;
  }
  return true;
}

// Local topological definition of a simple point on the 3x3 ring.
bool oracle_simple(int code) {
  // Ring order: N, NE, E, SE, S, SW, W, NW with offsets below.
  static const int off[8][2] = {{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
  BinaryImage fg(3, 3);
  for (int k = 0; k < 8; ++k)
    if (code & (1 << k)) fg.set(1 + off[k][0], 1 + off[k][1], true);
  // Foreground 8-components among ring pixels.
  const auto fl = oracle::flood_labels(fg, true, true);
  int fg_comps = 0;
  for (int v : fl) fg_comps = std::max(fg_comps, v);
  // Background 4-components of the ring (centre excluded) touching a
  // 4-neighbour of the centre.
  BinaryImage bg(3, 3, false);
  for (int k = 0; k < 8; ++k)
    if (!(code & (1 << k))) bg.set(1 + off[k][0], 1 + off[k][1], true);
  const auto bl = oracle::flood_labels(bg, true, false);
  std::set<int> touching;
  for (auto [x, y] : {std::pair{1, 0}, {2, 1}, {1, 2}, {0, 1}})
    if (bg.at(x, y)) touching.insert(bl[static_cast<std::size_t>(y) * 3 + x]);
  return fg_comps == 1 && touching.size() == 1;
}

}  // namespace

TEST_CASE("binarize marks dark pixels as foreground") {
  GrayImage g(4, 1, std::vector<std::uint8_t>{0, 127, 128, 255});
  const BinaryImage b = binarize(g);
  CHECK(b.at(0, 0));
  CHECK(b.at(1, 0));
  CHECK_FALSE(b.at(2, 0));
  CHECK_FALSE(b.at(3, 0));
  CHECK(binarize(g, ThresholdPolicy::fixed(1)).count() == 1);
}

TEST_CASE("otsu threshold separates a bimodal image") {
  GrayImage g(100, 10, 230);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 30; ++x) g.at(x, y) = 20;
  const int t = otsu_threshold(g);
  CHECK(t > 20);
  CHECK(t <= 230);
  CHECK(binarize(g, ThresholdPolicy::otsu()).count() == 300);
}

TEST_CASE("label_regions agrees with flood fill on random masks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryImage b = random_binary(rng, 5 + static_cast<int>(rng() % 60), 5 + static_cast<int>(rng() % 60),
                                        0.3 + 0.4 * (trial % 3) / 2.0);
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      for (auto target : {LabelTarget::Foreground, LabelTarget::FreeSpace}) {
        const LabelImage got = label_regions(b, target, conn);
        const auto want = oracle::flood_labels(b, target == LabelTarget::Foreground, conn == Connectivity::Eight);
        REQUIRE(same_partition(got, want));
        // Region statistics.
        std::vector<std::size_t> area(got.regions.size() + 1, 0);
        for (auto l : got.labels) area[static_cast<std::size_t>(l)]++;
        for (const auto& r : got.regions) {
          CHECK(r.area == area[static_cast<std::size_t>(r.label)]);
          CHECK(r.bbox.x0 <= r.bbox.x1);
          CHECK(r.bbox.y0 <= r.bbox.y1);
        }
      }
    }
  }
}

TEST_CASE("label_regions reports border contact and bounding boxes") {
  BinaryImage b(10, 10, false);
  oracle::fill_rect(b, 0, 0, 9, 0);  // top row, touches border
  oracle::fill_rect(b, 3, 3, 5, 6);  // interior block
  const LabelImage l = label_regions(b, LabelTarget::Foreground, Connectivity::Four);
  REQUIRE(l.regions.size() == 2);
  const auto& inner = l.regions[static_cast<std::size_t>(l.at(4, 4) - 1)];
  CHECK_FALSE(inner.touches_border);
  CHECK(inner.bbox == BoundingBox{3, 3, 5, 6});
  CHECK(inner.area == 12);
  CHECK(l.regions[static_cast<std::size_t>(l.at(0, 0) - 1)].touches_border);
  CHECK(l.mask(l.at(4, 4)).count() == 12);
}

TEST_CASE("dilate grows by a square") {
  std::mt19937_64 rng(5);
  const BinaryImage b = random_binary(rng, 30, 25, 0.05);
  for (int r : {0, 1, 3}) {
    const BinaryImage d = dilate(b, r);
    for (int y = 0; y < b.height(); ++y)
      for (int x = 0; x < b.width(); ++x) {
        bool want = false;
        for (int dy = -r; dy <= r && !want; ++dy)
          for (int dx = -r; dx <= r && !want; ++dx) want = b.get(x + dx, y + dy);
        REQUIRE(d.at(x, y) == want);
      }
  }
}

TEST_CASE("is_simple_point matches the topological definition for all 256 neighbourhoods") {
  static const int off[8][2] = {{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
  for (int code = 0; code < 256; ++code) {
    BinaryImage b(3, 3);
    b.set(1, 1, true);
    for (int k = 0; k < 8; ++k)
      if (code & (1 << k)) b.set(1 + off[k][0], 1 + off[k][1], true);
    INFO("code " << code);
    CHECK(is_simple_point(b, 1, 1) == oracle_simple(code));
    CHECK(neighbor_count(b, 1, 1) == std::popcount(static_cast<unsigned>(code)));
  }
}

TEST_CASE("thin keeps topology, is idempotent and one pixel wide") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 60; ++i) {
    // A background frame keeps the exterior a single component.
    const BinaryImage raw = oracle::random_corridor_mask(rng, 160);
    BinaryImage m(raw.width() + 4, raw.height() + 4);
    for (int y = 0; y < raw.height(); ++y)
      for (int x = 0; x < raw.width(); ++x) m.set(x + 2, y + 2, raw.at(x, y));
    const BinaryImage t = thin(m);
    INFO("mask " << i);
    CHECK(oracle::count_components8(t) == oracle::count_components8(m));
    // Holes survive: background 4-components are preserved too.
    const auto bg_m = oracle::flood_labels(m, false, false);
    const auto bg_t = oracle::flood_labels(t, false, false);
    CHECK(*std::max_element(bg_m.begin(), bg_m.end()) == *std::max_element(bg_t.begin(), bg_t.end()));
    CHECK(thin(t) == t);
    CHECK(oracle::max_width_one(t));
    // The skeleton is a subset of the input.
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (t.at(x, y)) REQUIRE(m.at(x, y));
  }
}

TEST_CASE("thin reduces a thick bar to its centre line") {
  BinaryImage b(60, 21);
  oracle::fill_rect(b, 5, 6, 54, 14);
  const BinaryImage t = thin(b);
  CHECK(oracle::count_components8(t) == 1);
  int rows_used = 0;
  for (int y = 0; y < t.height(); ++y) {
    bool any = false;
    for (int x = 0; x < t.width(); ++x) any = any || t.at(x, y);
    rows_used += any;
  }
  CHECK(rows_used <= 3);
  CHECK(t.get(30, 10));
}

TEST_CASE("distance transform is exact") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const BinaryImage b = random_binary(rng, 3 + static_cast<int>(rng() % 40), 3 + static_cast<int>(rng() % 40), 0.03);
    const auto got = distance_transform_sq(b);
    const auto want = oracle::brute_edt_sq(b);
    REQUIRE(got.size() == want.size());
    if (b.count() == 0) continue;
    for (std::size_t k = 0; k < got.size(); ++k) REQUIRE(got[k] == doctest::Approx(want[k]));
  }
}

TEST_CASE("resample and downsample") {
  std::mt19937_64 rng(8);
  GrayImage g = random_gray(rng, 12, 9);
  g.dpi_x = g.dpi_y = 200;
  CHECK(resample(g, 12, 9).pixels() == g.pixels());
  const GrayImage d = downsample(g, 3);
  CHECK(d.width() == 4);
  CHECK(d.height() == 3);
  CHECK(d.dpi_x == doctest::Approx(200.0 / 3));
  int sum = 0;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) sum += g.at(3 + x, 3 + y);
  CHECK(std::abs(d.at(1, 1) - sum / 9.0) <= 0.5 + 1e-9);
  // Uniform images stay uniform under any resize.
  const GrayImage flat(17, 11, 77);
  const GrayImage r = resample(flat, 6, 23);
  for (auto p : r.pixels()) CHECK(p == 77);
  CHECK_THROWS_AS(resample(g, 0, 3), DimensionError);
  CHECK_THROWS_AS(binarize(GrayImage{}), DimensionError);
}

TEST_CASE("image io round-trips PGM and PNG and rejects garbage") {
  std::mt19937_64 rng(21);
  const GrayImage g = random_gray(rng, 31, 17);
  const auto dir = std::filesystem::temp_directory_path() / "beaconmap-imageio-test";
  std::filesystem::create_directories(dir);
  save_pgm(g, dir / "a.pgm");
  save_png(g, dir / "a.png");
  CHECK(load_image(dir / "a.pgm").pixels() == g.pixels());
  CHECK(load_image(dir / "a.png").pixels() == g.pixels());
  CHECK_FALSE(load_image(dir / "a.png").has_dpi());
  GrayImage scanned = g;
  scanned.dpi_x = 200.0;
  scanned.dpi_y = 150.0;
  save_png(scanned, dir / "b.png");
  const GrayImage back = load_image(dir / "b.png");
  CHECK(back.pixels() == g.pixels());
  CHECK(back.dpi_x == 200.0);
  CHECK(back.dpi_y == 150.0);
  CHECK(decode_image(encode_pgm(g)).pixels() == g.pixels());
  // ASCII bitmap: 1 is black.
  const GrayImage pbm = decode_image("P1\n# comment\n3 2\n1 0 1\n0 1 0\n");
  CHECK(pbm.width() == 3);
  CHECK(pbm.at(0, 0) == 0);
  CHECK(pbm.at(1, 0) == 255);
  // Colour reduces to luminance.
  const GrayImage ppm = decode_image(std::string("P6\n1 1\n255\n") + std::string("\xff\xff\xff", 3));
  CHECK(ppm.at(0, 0) == 255);
  CHECK_THROWS_AS(decode_image("not an image"), IoError);
  CHECK_THROWS_AS(decode_image("P5\n4 4\n255\nab"), IoError);
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
  std::filesystem::remove_all(dir);
}
