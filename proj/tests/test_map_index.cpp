#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "depthcal/error.hpp"
#include "depthcal/map_index.hpp"
#include "depthcal/reference.hpp"
#include "test_support.hpp"

using namespace depthcal;
using testsupport::make_evaluated_map;
using testsupport::make_world;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Hand-built map: every point gets beams pointing from its origin to its
// position, all marked valid, poses sized to the largest scan id.
GlobalMap hand_map(const std::vector<Vec3>& positions,
                   const std::vector<Vec3>& origins,
                   const std::vector<uint32_t>& scan_ids) {
  GlobalMap map;
  const std::size_t n = positions.size();
  map.positions = positions;
  map.origins = origins;
  map.scan_ids = scan_ids;
  map.valid.assign(n, 1);
  map.gamma_used.assign(n, kNaN);
  uint32_t max_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 beam = positions[i] - origins[i];
    const double d = beam.norm();
    beam /= d;
    map.beam_dirs.push_back(beam);
    map.sensor_dirs.push_back(beam);
    map.sensor_origins.push_back(Vec3::Zero());
    map.raw_depths.push_back(d);
    map.source_index.push_back(static_cast<uint32_t>(i));
    max_id = std::max(max_id, scan_ids[i]);
  }
  map.poses.resize(max_id + 1);
  return map;
}

void freeze_all(GlobalMap& map, double radius) {
  FilterConfig cfg;
  cfg.radius = radius;
  freeze_neighborhoods(map, cfg);
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n,
                                double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

ScanCloud grid_scan(int nx, int ny, double spacing, double z) {
  ScanCloud scan;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const Vec3 p(ix * spacing, iy * spacing, z);
      scan.push_back(Vec3::Zero(), p.normalized(), p.norm());
    }
  }
  return scan;
}

}  // namespace

// ---------------------------------------------------------------------------
// FilterConfig
// ---------------------------------------------------------------------------

TEST_CASE("filter configuration rejects out-of-range thresholds") {
  FilterConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.radius = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.n_min = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.c0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.c0 = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.c1 = 0.8;
  cfg.c2 = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.c2 = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FilterConfig{};
  cfg.sigma_min = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// build_map / refresh_map
// ---------------------------------------------------------------------------

TEST_CASE("build_map concatenates scans in scan-major order") {
  ScanCloud a = grid_scan(5, 1, 0.3, 2.0);
  ScanCloud b = grid_scan(5, 1, 0.3, 3.0);
  std::vector<RigidTransform> poses(2);
  poses[1].translation = Vec3(0, 0, 1);
  const std::vector<PoseCorrection> zeros(2, Vec6::Zero());
  const GlobalMap map = build_map({a, b}, poses, zeros, BiasModel{});

  REQUIRE(map.size() == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(map.scan_ids[i] == 0);
    CHECK(map.scan_ids[i + 5] == 1);
    CHECK((map.positions[i] - a.point(i)).norm() == 0.0);
    CHECK((map.positions[i + 5] - (b.point(i) + Vec3(0, 0, 1))).norm() <
          1e-15);
    CHECK(map.origins[i] == Vec3::Zero());
    CHECK(map.origins[i + 5] == Vec3(0, 0, 1));
    CHECK(map.source_index[i] == map.source_index[i + 5]);
  }
  CHECK(map.raw_depths[0] == a.depths[0]);
  CHECK(std::isnan(map.gamma_used[0]));  // seeded from the scan's gamma
}

TEST_CASE("build_map applies pose corrections on the right") {
  ScanCloud a = grid_scan(3, 1, 0.3, 2.0);
  ScanCloud b = grid_scan(3, 1, 0.3, 2.0);
  std::vector<RigidTransform> poses(2);
  poses[0].rotation = rodrigues(Vec3(0.1, -0.2, 0.3));
  poses[0].translation = Vec3(1, 2, 3);
  std::vector<PoseCorrection> corr(2, Vec6::Zero());
  corr[0] << 0.01, -0.02, 0.03, 0.002, 0.001, -0.003;
  const GlobalMap map = build_map({a, b}, poses, corr, BiasModel{});
  const RigidTransform expect = compose(poses[0], exp_correction(corr[0]));
  CHECK((map.positions[0] - expect.apply(a.point(0))).norm() < 1e-14);
  CHECK((map.origins[0] - expect.translation).norm() < 1e-14);
  CHECK((map.beam_dirs[0] - expect.rotation * a.directions[0]).norm() < 1e-14);
}

TEST_CASE("build_map drops invalid points and refuses single scans") {
  ScanCloud a = grid_scan(4, 1, 0.3, 2.0);
  a.valid[1] = 0;
  ScanCloud b = grid_scan(4, 1, 0.3, 2.0);
  const std::vector<PoseCorrection> zeros(2, Vec6::Zero());
  const GlobalMap map =
      build_map({a, b}, std::vector<RigidTransform>(2), zeros, BiasModel{});
  CHECK(map.size() == 7);
  CHECK(map.source_index[0] == 0);
  CHECK(map.source_index[1] == 2);  // row 1 was invalid

  CHECK_THROWS_AS(build_map({a}, std::vector<RigidTransform>(1),
                            std::vector<PoseCorrection>(1, Vec6::Zero()),
                            BiasModel{}),
                  ConfigError);
  CHECK_THROWS_AS(build_map({a, b}, std::vector<RigidTransform>(1),
                            std::vector<PoseCorrection>(2, Vec6::Zero()),
                            BiasModel{}),
                  ConfigError);
}

TEST_CASE("build_map corrects depths for points with a usable gamma") {
  ScanCloud a = grid_scan(2, 1, 5.0, 10.0);
  a.gamma[0] = kPi / 3.0;
  ScanCloud b = grid_scan(2, 1, 5.0, 10.0);
  BiasModel m;
  m.kind = BiasKind::Polynomial;
  m.w = Vec2(0.01, 0.002);
  const std::vector<PoseCorrection> zeros(2, Vec6::Zero());
  const GlobalMap map =
      build_map({a, b}, std::vector<RigidTransform>(2), zeros, m);
  const double want = corrected_depth(m, a.depths[0], kPi / 3.0);
  CHECK(map.positions[0].norm() == doctest::Approx(want).epsilon(1e-14));
  CHECK(map.raw_depths[0] == a.depths[0]);  // raw depth kept for refresh
  CHECK(map.gamma_used[0] == kPi / 3.0);
}

TEST_CASE("refresh_map invalidates and revives points") {
  ScanCloud a = grid_scan(3, 1, 0.5, 1.0);
  ScanCloud b = grid_scan(3, 1, 0.5, 1.5);
  const std::vector<PoseCorrection> zeros(2, Vec6::Zero());
  GlobalMap map =
      build_map({a, b}, std::vector<RigidTransform>(2), zeros, BiasModel{});
  for (std::size_t i = 0; i < map.size(); ++i) map.gamma_used[i] = 1.2;
  const std::vector<Vec3> before = map.positions;

  // eps = d * 0.8 * 1.44 > d wipes out every point.
  BiasModel strong;
  strong.w = Vec2(0.8, 0.0);
  CHECK(refresh_map(map, zeros, strong) == map.size());
  for (std::size_t i = 0; i < map.size(); ++i) CHECK(map.valid[i] == 0);

  // The zero model brings every point back to its original position.
  CHECK(refresh_map(map, zeros, BiasModel{}) == 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK(map.valid[i] == 1);
    CHECK((map.positions[i] - before[i]).norm() == 0.0);
  }

  CHECK_THROWS_AS(
      refresh_map(map, std::vector<PoseCorrection>(1, Vec6::Zero()),
                  BiasModel{}),
      ConfigError);
}

// ---------------------------------------------------------------------------
// freeze_neighborhoods
// ---------------------------------------------------------------------------

TEST_CASE("an isolated point keeps only itself as neighbor") {
  GlobalMap map = hand_map({Vec3(0, 0, 0), Vec3(10, 0, 0)},
                           {Vec3(0, 0, 5), Vec3(10, 0, 5)}, {0, 1});
  freeze_all(map, 0.25);
  REQUIRE(map.neighbor_count(0) == 1);
  CHECK(map.neighbors_begin(0)[0] == 0);
  REQUIRE(map.neighbor_count(1) == 1);
  CHECK(map.neighbors_begin(1)[0] == 1);
}

TEST_CASE("3x3 grid neighbor counts at radius 1.5x spacing") {
  const double s = 0.1;
  std::vector<Vec3> pts;
  for (int ix = 0; ix < 3; ++ix) {
    for (int iy = 0; iy < 3; ++iy) {
      pts.emplace_back(ix * s, iy * s, 0.0);
    }
  }
  GlobalMap map = hand_map(pts, std::vector<Vec3>(9, Vec3(0, 0, 5)),
                           std::vector<uint32_t>(9, 0));
  freeze_all(map, 1.5 * s);
  CHECK(map.neighbor_count(4) == 9);  // center sees the whole grid
  CHECK(map.neighbor_count(0) == 4);  // corner: itself, two edges, center
  CHECK(map.neighbor_count(1) == 6);  // edge midpoint
  // Lists are sorted and contain the point itself.
  const uint32_t* nb = map.neighbors_begin(4);
  for (std::size_t s2 = 0; s2 + 1 < map.neighbor_count(4); ++s2) {
    CHECK(nb[s2] < nb[s2 + 1]);
  }
}

TEST_CASE("grid search equals brute force on random clouds") {
  std::mt19937_64 rng(41);
  const std::vector<Vec3> pts = random_points(rng, 1000, 1.0);
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(0, 0, 5)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 0.3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::vector<uint32_t> want = brute_force_neighbors(pts, i, 0.3);
    REQUIRE(map.neighbor_count(i) == want.size());
    for (std::size_t s = 0; s < want.size(); ++s) {
      CHECK(map.neighbors_begin(i)[s] == want[s]);
    }
  }
}

TEST_CASE("serial and parallel freezes produce identical structure") {
  std::mt19937_64 rng(42);
  const std::vector<Vec3> pts = random_points(rng, 700, 0.8);
  GlobalMap par = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(0, 0, 5)),
                           std::vector<uint32_t>(pts.size(), 0));
  GlobalMap ser = par;
  FilterConfig cfg;
  cfg.radius = 0.25;
  freeze_neighborhoods(par, cfg);
  reference::freeze_neighborhoods(ser, cfg);
  CHECK(par.neighbor_offsets == ser.neighbor_offsets);
  CHECK(par.neighbor_indices == ser.neighbor_indices);
  CHECK(par.frozen_radius == ser.frozen_radius);
}

TEST_CASE("neighbor relation is symmetric") {
  std::mt19937_64 rng(43);
  const std::vector<Vec3> pts = random_points(rng, 400, 0.6);
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(0, 0, 5)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 0.3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t s = 0; s < map.neighbor_count(i); ++s) {
      const uint32_t j = map.neighbors_begin(i)[s];
      const uint32_t* jb = map.neighbors_begin(j);
      const uint32_t* je = jb + map.neighbor_count(j);
      CHECK(std::find(jb, je, static_cast<uint32_t>(i)) != je);
    }
  }
}

TEST_CASE("points beyond the grid coordinate range are rejected") {
  GlobalMap map = hand_map({Vec3(0, 0, 1), Vec3(3.0e5, 0, 1)},
                           {Vec3::Zero(), Vec3::Zero()}, {0, 1});
  FilterConfig cfg;  // radius 0.25 -> cell coordinate 1.2e6 overflows
  CHECK_THROWS_AS(freeze_neighborhoods(map, cfg), InvalidParameterError);
}

// ---------------------------------------------------------------------------
// compute_local_stats
// ---------------------------------------------------------------------------

TEST_CASE("local statistics of the three-point worked example") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  GlobalMap map = hand_map(pts, std::vector<Vec3>(3, Vec3(0.2, 0.2, 5.0)),
                           {0, 1, 2});
  freeze_all(map, 5.0);
  compute_local_stats(map);

  const LocalStats& st = map.stats[0];
  REQUIRE(st.available);
  CHECK(st.neighbor_count == 3);
  CHECK((st.mean - Vec3(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-15);

  Mat3 want;
  want << 1.0 / 3, -1.0 / 6, 0,  //
      -1.0 / 6, 1.0 / 3, 0,      //
      0, 0, 0;
  CHECK((st.covariance - want).cwiseAbs().maxCoeff() < 1e-15);

  CHECK(std::abs(st.eigenvalues[0] - 0.0) < 1e-12);
  CHECK(std::abs(st.eigenvalues[1] - 1.0 / 6) < 1e-12);
  CHECK(std::abs(st.eigenvalues[2] - 1.0 / 2) < 1e-12);
  // The minimum-variance direction is the plane normal, up to sign.
  CHECK(std::abs(std::abs(st.min_direction.dot(Vec3(0, 0, 1))) - 1.0) < 1e-12);
  // Oriented toward the sensor above the plane.
  CHECK(st.normal.dot(Vec3(0, 0, 1)) > 0.0);
  // All three points share the neighborhood, hence the statistics.
  CHECK((map.stats[1].covariance - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("coplanar neighborhoods have vanishing smallest eigenvalue") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Mat3 tilt = rodrigues(Vec3(0.4, -0.3, 0.2));
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) {
    pts.push_back(tilt * Vec3(u(rng), u(rng), 0.0));
  }
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), tilt * Vec3(0, 0, 4)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 10.0);
  compute_local_stats(map);
  for (std::size_t i = 0; i < map.size(); ++i) {
    REQUIRE(map.stats[i].available);
    CHECK(map.stats[i].eigenvalues[0] < 1e-12);
    CHECK(map.stats[i].eigenvalues[0] >= 0.0);  // clamped
  }
}

TEST_CASE("normal incidence yields gamma = 0") {
  // Symmetric flat grid seen from straight above its center.
  ScanCloud dummy;
  std::vector<Vec3> pts;
  for (int ix = -2; ix <= 2; ++ix) {
    for (int iy = -2; iy <= 2; ++iy) {
      pts.emplace_back(0.05 * ix, 0.05 * iy, 0.0);
    }
  }
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(0, 0, 3)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 1.0);
  compute_local_stats(map);
  const std::size_t center = 12;  // (0,0,0)
  CHECK(map.stats[center].gamma < 1e-12);
  CHECK((map.stats[center].normal - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("oriented normals never point away from the sensor") {
  const testsupport::TestWorld w = make_world(45);
  GlobalMap map = make_evaluated_map(w);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.stats[i].available) continue;
    CHECK(map.stats[i].normal.dot(map.beam_dirs[i]) <= 1e-15);
    CHECK(map.stats[i].gamma >= 0.0);
    CHECK(map.stats[i].gamma <= kPi / 2.0);
  }
}

TEST_CASE("eigen decomposition properties on random neighborhoods") {
  std::mt19937_64 rng(46);
  const std::vector<Vec3> pts = random_points(rng, 600, 0.5);
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(0, 0, 5)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 0.3);
  compute_local_stats(map);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const LocalStats& st = map.stats[i];
    if (!st.available) continue;
    // Symmetry is structural.
    CHECK((st.covariance - st.covariance.transpose()).cwiseAbs().maxCoeff() ==
          0.0);
    // Sorted ascending, nonnegative.
    CHECK(st.eigenvalues[0] >= 0.0);
    CHECK(st.eigenvalues[0] <= st.eigenvalues[1]);
    CHECK(st.eigenvalues[1] <= st.eigenvalues[2]);
    // Trace identity.
    const double tr = st.covariance.trace();
    CHECK(std::abs(tr - st.eigenvalues.sum()) <=
          1e-9 * std::max(1.0, std::abs(tr)));
    // Eigenpair residual.
    CHECK((st.covariance * st.min_direction -
           st.eigenvalues[0] * st.min_direction)
              .norm() <= 1e-8 * std::max(st.eigenvalues[2], 1e-300));
    CHECK(std::abs(st.min_direction.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("statistics skip invalid members and small neighborhoods") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.1, 0, 0),
                                 Vec3(0, 0.1, 0), Vec3(0.1, 0.1, 0)};
  GlobalMap map = hand_map(pts, std::vector<Vec3>(4, Vec3(0, 0, 5)),
                           {0, 0, 0, 0});
  map.valid[3] = 0;
  freeze_all(map, 1.0);
  compute_local_stats(map);
  // Invalid member drops out of the count.
  CHECK(map.stats[0].neighbor_count == 3);
  CHECK(map.stats[0].available);
  // The invalid point itself gets no statistics.
  CHECK(!map.stats[3].available);

  map.valid[2] = 0;
  compute_local_stats(map);
  CHECK(map.stats[0].neighbor_count == 2);
  CHECK(!map.stats[0].available);  // fewer than three members
}

TEST_CASE("stats require frozen neighborhoods, filters require stats") {
  GlobalMap map = hand_map({Vec3(0, 0, 0), Vec3(1, 0, 0)},
                           {Vec3(0, 0, 5), Vec3(0, 0, 5)}, {0, 1});
  CHECK_THROWS_AS(compute_local_stats(map), InvalidParameterError);
  FilterConfig cfg;
  CHECK_THROWS_AS(apply_filters(map, cfg), InvalidParameterError);
}

// ---------------------------------------------------------------------------
// Viewpoint dispersion
// ---------------------------------------------------------------------------

TEST_CASE("single-viewpoint neighborhoods have zero dispersion") {
  std::mt19937_64 rng(47);
  const std::vector<Vec3> pts = random_points(rng, 30, 0.1);
  GlobalMap map = hand_map(pts, std::vector<Vec3>(pts.size(), Vec3(1, 2, 5)),
                           std::vector<uint32_t>(pts.size(), 0));
  freeze_all(map, 1.0);
  compute_local_stats(map);
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK(map.stats[i].sigma == 0.0);
  }
}

TEST_CASE("dispersion is the sample covariance trace of distinct origins") {
  // Two scans, origins 1 m apart: sigma = (2 * 0.5^2) / 1 = 0.5.
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.05, 0, 0),
                                 Vec3(0, 0.05, 0)};
  GlobalMap map =
      hand_map(pts, {Vec3(0, 0, 2), Vec3(1, 0, 2), Vec3(0, 0, 2)}, {0, 1, 0});
  freeze_all(map, 1.0);
  compute_local_stats(map);
  CHECK(map.stats[0].sigma == doctest::Approx(0.5).epsilon(1e-12));

  // Three origins at (0,0,0), (1,0,0), (0,1,0) (z shared): trace = 2/3 * 2.
  GlobalMap map3 =
      hand_map(pts, {Vec3(0, 0, 2), Vec3(1, 0, 2), Vec3(0, 1, 2)}, {0, 1, 2});
  freeze_all(map3, 1.0);
  compute_local_stats(map3);
  CHECK(map3.stats[0].sigma == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// adopt_estimated_gamma / apply_filters
// ---------------------------------------------------------------------------

TEST_CASE("gamma adoption only touches valid points with statistics") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.05, 0, 0),
                                 Vec3(0, 0.05, 0), Vec3(50, 0, 0)};
  GlobalMap map = hand_map(
      pts, {Vec3(0, 0, 2), Vec3(0.6, 0, 2), Vec3(0, 0.6, 2), Vec3(50, 0, 2)},
      {0, 1, 2, 0});
  freeze_all(map, 1.0);
  compute_local_stats(map);
  REQUIRE(map.stats[0].available);
  REQUIRE(!map.stats[3].available);  // isolated: one-member neighborhood
  adopt_estimated_gamma(map);
  CHECK(map.gamma_used[0] == map.stats[0].gamma);
  CHECK(std::isnan(map.gamma_used[3]));  // untouched
}

TEST_CASE("filter mask equals the naive predicate on a simulated world") {
  const testsupport::TestWorld w = make_world(48, 4);
  GlobalMap map = make_evaluated_map(w);
  const FilterConfig cfg;

  std::vector<uint8_t> naive(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.valid[i]) continue;
    const LocalStats& st = map.stats[i];
    if (st.neighbor_count < cfg.n_min) continue;
    const double l1 = st.eigenvalues[0], l2 = st.eigenvalues[1],
                 l3 = st.eigenvalues[2];
    const double r12 = l2 == 0.0 ? 0.0 : l1 / l2;
    const double r23 = l3 == 0.0 ? 0.0 : l2 / l3;
    if (r12 > cfg.c0) continue;
    if (r23 < cfg.c1 || r23 > cfg.c2) continue;
    if (st.sigma < cfg.sigma_min) continue;
    naive[i] = 1;
  }
  CHECK(map.mask == naive);
  // Some points must be selected and some rejected for the test to bite.
  std::size_t selected = 0;
  for (uint8_t b : map.mask) selected += b;
  CHECK(selected > 0);
  CHECK(selected < map.size());

  // The serial reference agrees bit for bit.
  GlobalMap ref = map;
  CHECK(reference::apply_filters(ref, cfg) == map.mask);
}

TEST_CASE("each filter rejects when its threshold is violated") {
  const testsupport::TestWorld w = make_world(49, 4);
  GlobalMap map = make_evaluated_map(w);
  FilterConfig cfg;

  // Raising n_min beyond any neighborhood size empties the mask.
  cfg.n_min = 100000;
  apply_filters(map, cfg);
  for (uint8_t b : map.mask) CHECK(b == 0);

  // sigma_min = 0 admits single-viewpoint surfaces.
  cfg = FilterConfig{};
  cfg.sigma_min = 0.0;
  const std::vector<uint8_t> loose = apply_filters(map, cfg);
  cfg.sigma_min = 1e9;
  const std::vector<uint8_t> tight = apply_filters(map, cfg);
  std::size_t loose_n = 0, tight_n = 0;
  for (uint8_t b : loose) loose_n += b;
  for (uint8_t b : tight) tight_n += b;
  CHECK(loose_n > 0);
  CHECK(tight_n == 0);
}

// ---------------------------------------------------------------------------
// Serial reference equality
// ---------------------------------------------------------------------------

TEST_CASE("serial and parallel statistics agree bit for bit") {
  const testsupport::TestWorld w = make_world(50, 3);
  GlobalMap par = make_evaluated_map(w);
  GlobalMap ser = par;
  compute_local_stats(par);
  reference::compute_local_stats(ser);
  REQUIRE(par.stats.size() == ser.stats.size());
  for (std::size_t i = 0; i < par.stats.size(); ++i) {
    const LocalStats& a = par.stats[i];
    const LocalStats& b = ser.stats[i];
    CHECK(a.available == b.available);
    CHECK(a.neighbor_count == b.neighbor_count);
    if (!a.available) continue;
    CHECK(a.mean == b.mean);
    CHECK(a.covariance == b.covariance);
    CHECK(a.eigenvalues == b.eigenvalues);
    CHECK(a.min_direction == b.min_direction);
    CHECK(a.normal == b.normal);
    CHECK(a.gamma == b.gamma);
    CHECK(a.sigma == b.sigma);
  }
}
