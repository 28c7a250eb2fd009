#include <doctest.h>

#include <cmath>
#include <random>

#include "beaconmap/detect.hpp"
#include "beaconmap/synth.hpp"
#include "oracles.hpp"

using namespace beaconmap;

namespace {

GrayImage noise_image(std::mt19937_64& rng, int w, int h, int lo, int hi) {
  GrayImage g(w, h);
  std::uniform_int_distribution<int> d(lo, hi);
  for (auto& p : g.pixels()) p = static_cast<std::uint8_t>(d(rng));
  return g;
}

void paste(GrayImage& dst, const GrayImage& src, int x0, int y0) {
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) dst.at(x0 + x, y0 + y) = src.at(x, y);
}

const Template& door_template() {
  static const auto t = builtin_templates();
  for (const auto& x : t)
    if (x.kind == "door") return x;
  throw std::runtime_error("no door template");
}

}  // namespace

TEST_CASE("corner response equals the brute-force minimum eigenvalue") {
  std::mt19937_64 rng(4);
  const GrayImage g = noise_image(rng, 23, 17, 0, 255);
  const auto r = corner_response(g);
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const double want = oracle::brute_min_eigen(g, x, y);
      REQUIRE(r[static_cast<std::size_t>(y) * g.width() + x] ==
              doctest::Approx(want).epsilon(1e-4).scale(std::max(1.0, want)));
    }
}

TEST_CASE("detect_features returns spaced, sorted local maxima above the quality level") {
  std::mt19937_64 rng(12);
  GrayImage g(80, 60, 255);
  for (int i = 0; i < 12; ++i) {
    const int x = 5 + static_cast<int>(rng() % 60), y = 5 + static_cast<int>(rng() % 40);
    for (int yy = y; yy < y + 8; ++yy)
      for (int xx = x; xx < x + 10; ++xx) g.at(xx, yy) = 0;
  }
  const FeatureOptions opt{0.05, 6.0, 5};
  const auto f = detect_features(g, opt);
  REQUIRE_FALSE(f.empty());
  const auto r = corner_response(g);
  const float mx = *std::max_element(r.begin(), r.end());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i > 0) CHECK(f[i - 1].score >= f[i].score);
    CHECK(f[i].score > opt.quality * mx);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = f[i].x + dx, y = f[i].y + dy;
        if (x < 0 || y < 0 || x >= g.width() || y >= g.height()) continue;
        CHECK(r[static_cast<std::size_t>(y) * g.width() + x] <= f[i].score);
      }
    for (std::size_t j = 0; j < i; ++j)
      CHECK(std::hypot(f[i].x - f[j].x, f[i].y - f[j].y) >= opt.min_spacing);
  }
  CHECK(detect_features(GrayImage(10, 10, 128)).empty());
  CHECK_THROWS_AS(detect_features(GrayImage{}), DimensionError);
}

TEST_CASE("dihedral transforms form a group") {
  std::mt19937_64 rng(2);
  const GrayImage p = noise_image(rng, 7, 4, 0, 255);
  const GrayImage r1 = transform_patch(p, 1);
  CHECK(r1.width() == 4);
  CHECK(r1.height() == 7);
  // Clockwise quarter turn: (x, y) -> (h - 1 - y, x).
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) CHECK(r1.at(p.height() - 1 - y, x) == p.at(x, y));
  CHECK(transform_patch(transform_patch(transform_patch(r1, 1), 1), 1) == p);
  CHECK(transform_patch(transform_patch(p, 4), 4) == p);
  for (int k = 0; k < 4; ++k) {
    GrayImage turned = p;
    for (int i = 0; i < k; ++i) turned = transform_patch(turned, 1);
    CHECK(transform_patch(p, k) == turned);
    CHECK(transform_patch(p, 4 + k) == transform_patch(transform_patch(p, 4), k));
  }
}

TEST_CASE("match scorer equals the direct normalised SSD") {
  std::mt19937_64 rng(9);
  const GrayImage img = noise_image(rng, 40, 30, 0, 255);
  Template t{"t", "door", noise_image(rng, 9, 7, 0, 255)};
  t.rotations = false;
  const auto vars = make_variants(std::span<const Template>(&t, 1), MatchOptions{.scales = {1.0}});
  REQUIRE(vars.size() == 1);
  const MatchScorer s(img);
  for (int i = 0; i < 50; ++i) {
    const int x = static_cast<int>(rng() % 31), y = static_cast<int>(rng() % 23);
    const double want = oracle::direct_match_score(img, t.patch, x, y);
    CHECK(s.score(vars[0], x, y) == doctest::Approx(want).epsilon(1e-9));
    // An early exit still reports a value above the bound.
    if (want > 0.5) CHECK(s.score(vars[0], x, y, 0.5) > 0.5);
  }
  CHECK(std::isinf(s.score(vars[0], 35, 0)));
  const std::vector<double> a{1, 2, 3}, b{1, 0, 3}, c{1};
  CHECK(ssd(a, b) == 4.0);
  CHECK_THROWS_AS(ssd(a, c), DimensionError);
}

TEST_CASE("exhaustive search and feature-guided matching find an embedded symbol") {
  std::mt19937_64 rng(17);
  const Template& door = door_template();
  for (int orient : {0, 1, 2, 5, 7}) {
    INFO("orientation " << orient);
    GrayImage img = noise_image(rng, 160, 140, 235, 255);
    const GrayImage sym = transform_patch(door.patch, orient);
    const int x0 = 30 + static_cast<int>(rng() % 60), y0 = 20 + static_cast<int>(rng() % 50);
    paste(img, sym, x0, y0);
    // The true placement minimises the direct score over every window.
    double best = 1e300;
    int bx = -1, by = -1;
    for (int y = 0; y + sym.height() <= img.height(); y += 1)
      for (int x = 0; x + sym.width() <= img.width(); x += 1) {
        const double v = oracle::direct_match_score(img, sym, x, y);
        if (v < best) best = v, bx = x, by = y;
      }
    CHECK(bx == x0);
    CHECK(by == y0);
    const auto feats = detect_features(img);
    const auto cands = match_templates(img, feats, std::span<const Template>(&door, 1), MatchOptions{.scales = {1.0}});
    REQUIRE_FALSE(cands.empty());
    const auto& c = cands.front();
    CHECK(c.kind == "door");
    CHECK(std::abs(c.x - (x0 + sym.width() / 2)) <= 1);
    CHECK(std::abs(c.y - (y0 + sym.height() / 2)) <= 1);
    CHECK(c.score < 0.1);
  }
}

TEST_CASE("variants deduplicate symmetric orientations and honour the physical hint") {
  GrayImage sq(9, 9, 255);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) sq.at(x, y) = 0;
  Template t{"sq", "box", sq};
  t.mirror = true;
  CHECK(make_variants(std::span<const Template>(&t, 1), MatchOptions{}).size() == 3);
  t.physical_width_ft = 3.0;
  CHECK(template_base_scale(t, 200, 1.0 / 16) == doctest::Approx(3.0 * 200 / 16 / 9));
  CHECK(template_base_scale(t, 0, 1.0 / 16) == 1.0);
  const auto v = make_variants(std::span<const Template>(&t, 1), MatchOptions{.scales = {1.0}, .dpi = 200,
                                                                               .drawing_scale = 1.0 / 16});
  REQUIRE(v.size() == 1);
  CHECK(v[0].width % 2 == 1);
  CHECK(std::abs(v[0].width - 3.0 * 200 / 16) <= 1.0);
  Template flat{"flat", "box", GrayImage(5, 5, 200)};
  CHECK_THROWS_AS(make_variants(std::span<const Template>(&flat, 1), MatchOptions{}), TemplateError);
  Template big{"big", "box", sq};
  CHECK_THROWS_AS(match_templates(GrayImage(5, 5, 255), {}, std::span<const Template>(&big, 1)), TemplateError);
}

TEST_CASE("suppress_overlaps keeps the best of each neighbourhood") {
  std::mt19937_64 rng(31);
  std::vector<MatchCandidate> cands;
  for (int i = 0; i < 300; ++i) {
    MatchCandidate c;
    c.x = static_cast<int>(rng() % 200);
    c.y = static_cast<int>(rng() % 200);
    c.kind = rng() % 2 ? "door" : "stair";
    c.score = static_cast<double>(rng() % 1000) / 1000.0;
    c.width = 11 + static_cast<int>(rng() % 10);
    c.height = 11 + static_cast<int>(rng() % 10);
    cands.push_back(c);
  }
  for (bool same : {true, false}) {
    const auto kept = suppress_overlaps(cands, same);
    auto near = [&](const MatchCandidate& better, const MatchCandidate& c) {
      if (same && better.kind != c.kind) return false;
      const double r = std::min(better.width, better.height);
      return std::hypot(better.x - c.x, better.y - c.y) < r;
    };
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(near(kept[j], kept[i]));
    // Every dropped candidate is covered by a kept one at least as good.
    for (const auto& c : cands) {
      if (std::find(kept.begin(), kept.end(), c) != kept.end()) continue;
      bool covered = false;
      for (const auto& k : kept) covered = covered || (k.score <= c.score && near(k, c));
      CHECK(covered);
    }
  }
}

TEST_CASE("filter_by_region keeps candidates near the path") {
  IndoorPath path;
  path.mask = BinaryImage(50, 50);
  oracle::fill_rect(path.mask, 0, 20, 49, 29);
  std::vector<MatchCandidate> c(3);
  c[0].x = 10, c[0].y = 25;  // on the path
  c[1].x = 10, c[1].y = 16;  // 4 px off
  c[2].x = 10, c[2].y = 5;   // 15 px off
  CHECK(filter_by_region(c, path, 0.0).size() == 1);
  CHECK(filter_by_region(c, path, 5.0).size() == 2);
  CHECK(filter_by_region(c, path, std::numeric_limits<double>::infinity()).size() == 3);
}
