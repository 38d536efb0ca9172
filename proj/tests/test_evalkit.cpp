#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "p2b/evalkit.hpp"
#include "p2b/pcops/kernels.hpp"

using namespace p2b;
using namespace p2b::evalkit;
using pcops::make_box;

namespace {

// Monte-Carlo volume oracle: jittered stratified samples inside box a,
// counting hits in b (stratification keeps the noise well under 1e-3).
double mc_iou(const Box3D& a, const Box3D& b, int grid, Rng& rng) {
  long hits = 0;
  std::vector<Vec3> pt(1);
  for (int ix = 0; ix < grid; ++ix)
    for (int iy = 0; iy < grid; ++iy)
      for (int iz = 0; iz < grid; ++iz) {
        const double u = (ix + rng.uniform01()) / grid - 0.5;
        const double v = (iy + rng.uniform01()) / grid - 0.5;
        const double w = (iz + rng.uniform01()) / grid - 0.5;
        const Vec3 local{u * a.length, v * a.width, w * a.height};
        pt[0] = pcops::rot_z(local, a.heading) + a.center;
        if (pcops::points_in_box(pt, b, 0.0)[0]) ++hits;
      }
  const double va = a.length * a.width * a.height;
  const double vb = b.length * b.width * b.height;
  const double inter =
      va * static_cast<double>(hits) / (static_cast<double>(grid) * grid * grid);
  return inter / (va + vb - inter);
}

Box3D random_box(Rng& rng) {
  return make_box({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)},
                  rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5),
                  rng.uniform(-kPi, kPi));
}

}  // namespace

TEST_CASE("iou3d fixtures") {
  SUBCASE("identical boxes") {
    Box3D b = make_box({1, 2, 3}, 2, 1, 1.5, 0.7);
    CHECK(iou3d(b, b) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("disjoint boxes") {
    Box3D a = make_box({0, 0, 0}, 1, 1, 1, 0.0);
    Box3D b = make_box({100, 0, 0}, 1, 1, 1, 0.3);
    CHECK(iou3d(a, b) == 0.0);
  }
  SUBCASE("offset unit cubes") {
    Box3D a = make_box({0, 0, 0}, 1, 1, 1, 0.0);
    Box3D b = make_box({0.5, 0, 0}, 1, 1, 1, 0.0);
    CHECK(std::fabs(iou3d(a, b) - 1.0 / 3.0) < 1e-9);
  }
  SUBCASE("degenerate extents rejected") {
    Box3D a = make_box({0, 0, 0}, 1, 1, 1, 0.0);
    Box3D bad = a;
    bad.width = 0.0;
    CHECK_THROWS_AS(iou3d(a, bad), ContractError);
  }
}

TEST_CASE("iou3d properties") {
  Rng rng(123);
  SUBCASE("symmetric and bounded") {
    for (int t = 0; t < 50; ++t) {
      Rng r = rng.fork(t);
      Box3D a = random_box(r), b = random_box(r);
      const double ab = iou3d(a, b), ba = iou3d(b, a);
      CHECK(std::fabs(ab - ba) < 1e-9);
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
    }
  }
  SUBCASE("monotone non-increasing along one axis") {
    Box3D a = make_box({0, 0, 0}, 2, 1, 1, 0.4);
    double prev = 1.1;
    for (double off = 0.0; off <= 3.0; off += 0.1) {
      Box3D b = a;
      b.center.x += off;
      const double v = iou3d(a, b);
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
  }
  SUBCASE("agrees with the Monte-Carlo oracle on rotated pairs") {
    for (int t = 0; t < 20; ++t) {
      Rng r = rng.fork(1000 + t);
      Box3D a = random_box(r);
      Box3D b = a;
      b.center = b.center + Vec3{r.uniform(-0.5, 0.5), r.uniform(-0.5, 0.5), r.uniform(-0.3, 0.3)};
      b.heading = wrap_angle(b.heading + r.uniform(-0.8, 0.8));
      Rng mc = r.fork(1);
      CHECK(std::fabs(iou3d(a, b) - mc_iou(a, b, 100, mc)) < 1e-3);
    }
  }
}

TEST_CASE("center_error") {
  Box3D a = make_box({0, 0, 0}, 1, 1, 1, 0.0);
  Box3D b = make_box({3, 4, 0}, 1, 1, 1, 0.9);
  CHECK(center_error(a, a) == 0.0);
  CHECK(center_error(a, b) == doctest::Approx(5.0));
  CHECK(center_error(a, b) == center_error(b, a));
}

TEST_CASE("success and precision AUC") {
  CHECK(success_auc({1, 1, 1}) == doctest::Approx(100.0));
  CHECK(success_auc({0, 0}) == doctest::Approx(0.0));
  CHECK(success_auc({0.2, 0.6}) == doctest::Approx(40.0));
  CHECK_THROWS_AS(success_auc({}), DataError);

  CHECK(precision_auc({0, 0}) == doctest::Approx(100.0));
  CHECK(precision_auc({2.0, 5.0}) == doctest::Approx(0.0));
  CHECK(precision_auc({0.0, 1.0}) == doctest::Approx(75.0));
  CHECK_THROWS_AS(precision_auc({}), DataError);

  SUBCASE("precision monotone when an error grows") {
    std::vector<double> errs{0.3, 0.8, 1.4};
    const double base = precision_auc(errs);
    errs[1] = 1.1;
    CHECK(precision_auc(errs) <= base);
  }
}

TEST_CASE("histogram and buckets") {
  SUBCASE("single occupied bin, totals preserved") {
    std::vector<std::size_t> values(12, 50);
    auto counts = histogram_counts(values, {10, 30, 70, 100});
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    CHECK(total == values.size());
    CHECK(counts[2] == 12);  // [30, 70)
  }
  SUBCASE("one bucket equals overall success") {
    std::vector<std::vector<double>> ious{{0.5, 0.7}, {0.9, 0.3}};
    std::vector<std::size_t> initial{20, 25};
    auto rows = success_vs_initial_points(ious, initial, {100});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].success == doctest::Approx(success_auc({0.5, 0.7, 0.9, 0.3})));
    CHECK(rows[0].tracklets == 2);
  }
  SUBCASE("empty buckets are absent and counts partition") {
    std::vector<std::vector<double>> ious{{0.5}, {0.9}, {0.1}};
    std::vector<std::size_t> initial{5, 500, 7};
    auto rows = success_vs_initial_points(ious, initial, {10, 100});
    REQUIRE(rows.size() == 2);
    std::size_t total = 0;
    for (const auto& r : rows) total += r.tracklets;
    CHECK(total == 3);
  }
}
