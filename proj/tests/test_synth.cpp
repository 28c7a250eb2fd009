#include <doctest.h>

#include "beaconmap/synth.hpp"
#include "oracles.hpp"

using namespace beaconmap;

namespace {

SynthOptions small_options(std::uint64_t seed) {
  SynthOptions so;
  so.width = 1000;
  so.height = 900;
  so.poi_count = 12;
  so.stair_fraction = 0.25;
  so.seed = seed;
  return so;
}

MatchCandidate cand(const std::string& kind, int x, int y) {
  MatchCandidate c;
  c.kind = kind;
  c.x = x;
  c.y = y;
  return c;
}

}  // namespace

TEST_CASE("builtin templates come from the plan renderer") {
  const auto t = builtin_templates();
  REQUIRE(t.size() == 2);
  for (const auto& x : t) {
    CHECK(x.patch.width() % 2 == 1);
    CHECK(x.patch.height() % 2 == 1);
    CHECK(x.physical_width_ft > 0.0);
    CHECK(x.rotations);
    if (x.kind == "door") {
      CHECK(x.patch == render_door());
      CHECK(x.mirror);
    } else {
      CHECK(x.kind == "stair");
      CHECK(x.patch == render_stair());
    }
  }
}

TEST_CASE("synthetic plans place every symbol where the truth says") {
  const SynthPlan sp = generate_plan(small_options(3));
  CHECK(sp.image.width() == 1000);
  CHECK(sp.image.height() == 900);
  CHECK(sp.meta.dpi == 200.0);
  CHECK(sp.meta.scale == doctest::Approx(1.0 / 16));
  // A small layout offers fewer door slots than requested.
  REQUIRE(sp.truth.size() <= 12);
  REQUIRE(sp.truth.size() >= 6);
  int stairs = 0;
  const auto t = builtin_templates();
  for (const auto& g : sp.truth) {
    stairs += g.kind == "stair";
    const Template& tpl = g.kind == "door" ? t[0].kind == "door" ? t[0] : t[1] : t[0].kind == "stair" ? t[0] : t[1];
    const GrayImage sym = transform_patch(tpl.patch, g.orientation);
    const int x0 = g.x - sym.width() / 2, y0 = g.y - sym.height() / 2;
    REQUIRE(x0 >= 0);
    REQUIRE(y0 >= 0);
    REQUIRE(x0 + sym.width() <= sp.image.width());
    REQUIRE(y0 + sym.height() <= sp.image.height());
    INFO(g.kind << " at " << g.x << "," << g.y << " orientation " << g.orientation);
    CHECK(oracle::direct_match_score(sp.image, sym, x0, y0) < 0.05);
  }
  CHECK(stairs == 3);
  // The default layout has room for every requested symbol.
  SynthOptions big;
  big.seed = 3;
  CHECK(generate_plan(big).truth.size() == static_cast<std::size_t>(big.poi_count));
}

TEST_CASE("generation is deterministic per seed") {
  const SynthPlan a = generate_plan(small_options(9));
  const SynthPlan b = generate_plan(small_options(9));
  const SynthPlan c = generate_plan(small_options(10));
  CHECK(a.image == b.image);
  CHECK(a.truth.size() == b.truth.size());
  CHECK_FALSE(a.image == c.image);
}

TEST_CASE("degrade shrinks the image, the dpi and the truth") {
  const SynthPlan sp = generate_plan(small_options(4));
  const SynthPlan d = degrade(sp, 2, 10.0, 1);
  CHECK(d.image.width() == 500);
  CHECK(d.image.height() == 450);
  CHECK(d.meta.dpi == 100.0);
  REQUIRE(d.truth.size() == sp.truth.size());
  for (std::size_t i = 0; i < d.truth.size(); ++i) CHECK(d.truth[i].x == sp.truth[i].x / 2);
  CHECK(degrade(sp, 2, 10.0, 1).image == d.image);
  CHECK(degrade(sp, 1, 0.0, 1).image == sp.image);
  CHECK_THROWS_AS(degrade(sp, 0, 0.0, 1), ValidationError);
}

TEST_CASE("score_detections matches one-to-one within the radius") {
  const std::vector<GroundTruth> truth = {{"door", 10, 10, 0}, {"door", 50, 10, 0}, {"stair", 100, 100, 0}};
  // Two candidates at the first door, one near the second, a stair called a
  // door, and nothing at the stair.
  const std::vector<MatchCandidate> cands = {cand("door", 11, 10), cand("door", 9, 12), cand("door", 53, 14),
                                             cand("door", 100, 100)};
  const DetectionScore s = score_detections(truth, cands, 6.0);
  CHECK(s.truth == 3);
  CHECK(s.correct == 2);
  CHECK(s.missed == 1);
  CHECK(s.redundant == 2);
  CHECK(s.recall() == doctest::Approx(2.0 / 3));
  CHECK(score_detections(truth, cands, 4.0).correct == 1);
  CHECK(score_detections({}, cands, 6.0).recall() == 1.0);
}

TEST_CASE("training patches hold both classes at the requested size") {
  const SynthPlan sp = generate_plan(small_options(6));
  const auto t = builtin_templates();
  TrainingOptions o;
  const auto patches = training_patches(sp, t, "door", o);
  int pos = 0, neg = 0;
  for (const auto& p : patches) {
    CHECK(p.patch.width() == o.patch_size);
    CHECK(p.patch.height() == o.patch_size);
    (p.label == 1 ? pos : neg)++;
  }
  CHECK(pos > 0);
  CHECK(neg > pos);
  const auto again = training_patches(sp, t, "door", o);
  REQUIRE(again.size() == patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) CHECK(again[i].patch == patches[i].patch);
}
