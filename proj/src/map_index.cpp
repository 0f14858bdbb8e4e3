#include "depthcal/map_index.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "depthcal/error.hpp"
#include "depthcal/threading.hpp"

namespace depthcal {

void FilterConfig::validate() const {
  if (!(radius > 0.0)) throw ConfigError("filter radius must be positive");
  if (n_min < 3) throw ConfigError("n_min must be at least 3");
  if (!(c0 > 0.0 && c0 <= 1.0)) throw ConfigError("c0 must be in (0, 1]");
  if (!(c1 >= 0.0 && c1 <= c2 && c2 <= 1.0)) {
    throw ConfigError("need 0 <= c1 <= c2 <= 1");
  }
  if (!(sigma_min >= 0.0)) throw ConfigError("sigma_min must be >= 0");
}

GlobalMap build_map(const std::vector<ScanCloud>& scans,
                    const std::vector<RigidTransform>& poses,
                    const std::vector<PoseCorrection>& corrections,
                    const BiasModel& model) {
  const std::size_t k_count = scans.size();
  if (k_count < 2) {
    throw ConfigError("map consistency needs multiple view-points (got " +
                      std::to_string(k_count) + " scan(s))");
  }
  if (poses.size() != k_count || corrections.size() != k_count) {
    throw ConfigError("scan, pose and correction counts differ");
  }

  GlobalMap map;
  map.poses = poses;
  std::size_t total = 0;
  for (const auto& scan : scans) total += scan.size();
  map.positions.reserve(total);
  map.origins.reserve(total);
  map.beam_dirs.reserve(total);
  map.scan_ids.reserve(total);
  map.source_index.reserve(total);
  map.sensor_origins.reserve(total);
  map.sensor_dirs.reserve(total);
  map.raw_depths.reserve(total);
  map.gamma_used.reserve(total);
  map.valid.reserve(total);

  for (std::size_t k = 0; k < k_count; ++k) {
    const ScanCloud& scan = scans[k];
    const RigidTransform t_hat = compose(poses[k], exp_correction(corrections[k]));
    for (std::size_t i = 0; i < scan.size(); ++i) {
      if (!scan.valid[i]) continue;
      const double d_hat = corrected_depth(model, scan.depths[i], scan.gamma[i]);
      if (d_hat <= 0.0) continue;
      const Vec3 corrected = scan.origins[i] + d_hat * scan.directions[i];
      map.positions.push_back(t_hat.apply(corrected));
      map.origins.push_back(t_hat.apply(scan.origins[i]));
      map.beam_dirs.push_back(t_hat.rotation * scan.directions[i]);
      map.scan_ids.push_back(static_cast<uint32_t>(k));
      map.source_index.push_back(scan.source_index[i]);
      map.sensor_origins.push_back(scan.origins[i]);
      map.sensor_dirs.push_back(scan.directions[i]);
      map.raw_depths.push_back(scan.depths[i]);
      map.gamma_used.push_back(scan.gamma[i]);
      map.valid.push_back(1);
    }
  }
  return map;
}

std::size_t refresh_map(GlobalMap& map,
                        const std::vector<PoseCorrection>& corrections,
                        const BiasModel& model) {
  const std::size_t k_count = map.poses.size();
  if (corrections.size() != k_count) {
    throw ConfigError("correction count does not match pose count");
  }
  std::vector<RigidTransform> t_hat(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    t_hat[k] = compose(map.poses[k], exp_correction(corrections[k]));
  }

  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(map.size());
  std::size_t invalidated = 0;
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    reduction(+ : invalidated)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const RigidTransform& t = t_hat[map.scan_ids[i]];
    const double d_hat =
        corrected_depth(model, map.raw_depths[i], map.gamma_used[i]);
    if (d_hat <= 0.0) {
      map.valid[i] = 0;
      ++invalidated;
      continue;
    }
    map.valid[i] = 1;
    const Vec3 corrected = map.sensor_origins[i] + d_hat * map.sensor_dirs[i];
    map.positions[i] = t.apply(corrected);
    map.origins[i] = t.apply(map.sensor_origins[i]);
    map.beam_dirs[i] = t.rotation * map.sensor_dirs[i];
  }
  return invalidated;
}

namespace {

// Exact fixed-radius grid. Cell coordinates are packed into one 64-bit key
// (21 signed bits per axis), so distinct cells never alias.
class RadiusGrid {
 public:
  RadiusGrid(const std::vector<Vec3>& points, double cell) : cell_(cell) {
    const std::size_t n = points.size();
    std::vector<std::pair<uint64_t, uint32_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
      keyed[i] = {key_of(points[i]), static_cast<uint32_t>(i)};
    }
    std::sort(keyed.begin(), keyed.end());
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = keyed[i].second;
    buckets_.reserve(n / 2 + 1);
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || keyed[i].first != keyed[begin].first) {
        buckets_.emplace(keyed[begin].first,
                         std::pair<uint32_t, uint32_t>(
                             static_cast<uint32_t>(begin),
                             static_cast<uint32_t>(i)));
        begin = i;
      }
    }
  }

  uint64_t key_of(const Vec3& p) const {
    return pack(coord(p.x()), coord(p.y()), coord(p.z()));
  }

  // All indices within `radius` of `center` (candidates from the 27
  // surrounding cells, verified by exact distance test), sorted ascending.
  void query(const std::vector<Vec3>& points, const Vec3& center,
             double radius, std::vector<uint32_t>& out) const {
    out.clear();
    const double r2 = radius * radius;
    const int64_t cx = coord(center.x());
    const int64_t cy = coord(center.y());
    const int64_t cz = coord(center.z());
    for (int64_t dx = -1; dx <= 1; ++dx) {
      for (int64_t dy = -1; dy <= 1; ++dy) {
        for (int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = buckets_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == buckets_.end()) continue;
          for (uint32_t s = it->second.first; s < it->second.second; ++s) {
            const uint32_t j = order_[s];
            if ((points[j] - center).squaredNorm() <= r2) out.push_back(j);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  int64_t coord(double v) const {
    const double c = std::floor(v / cell_);
    if (!(c >= -1048575.0 && c <= 1048575.0)) {
      throw InvalidParameterError("point coordinate out of grid range");
    }
    return static_cast<int64_t>(c);
  }

  static uint64_t pack(int64_t x, int64_t y, int64_t z) {
    const uint64_t bias = 1ull << 20;
    return ((static_cast<uint64_t>(x + bias) & 0x1FFFFF) << 42) |
           ((static_cast<uint64_t>(y + bias) & 0x1FFFFF) << 21) |
           (static_cast<uint64_t>(z + bias) & 0x1FFFFF);
  }

  double cell_;
  std::vector<uint32_t> order_;
  std::unordered_map<uint64_t, std::pair<uint32_t, uint32_t>> buckets_;
};

}  // namespace

void freeze_neighborhoods(GlobalMap& map, const FilterConfig& cfg) {
  cfg.validate();
  const std::size_t n = map.size();
  const RadiusGrid grid(map.positions, cfg.radius);

  std::vector<std::vector<uint32_t>> lists(n);
  const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    grid.query(map.positions, map.positions[i], cfg.radius, lists[i]);
  }

  map.neighbor_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    map.neighbor_offsets[i + 1] = map.neighbor_offsets[i] + lists[i].size();
  }
  map.neighbor_indices.resize(map.neighbor_offsets[n]);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(lists[i].begin(), lists[i].end(),
              map.neighbor_indices.begin() +
                  static_cast<std::ptrdiff_t>(map.neighbor_offsets[i]));
  }
  map.frozen_radius = cfg.radius;
}

LocalStats point_local_stats(const GlobalMap& map, std::size_t i) {
  LocalStats st;
  const uint32_t* nb = map.neighbors_begin(i);
  const std::size_t total = map.neighbor_count(i);

  Vec3 sum = Vec3::Zero();
  uint32_t count = 0;
  for (std::size_t s = 0; s < total; ++s) {
    const uint32_t j = nb[s];
    if (!map.valid[j]) continue;
    sum += map.positions[j];
    ++count;
  }
  st.neighbor_count = count;
  if (count < 3 || !map.valid[i]) {
    st.available = false;
    return st;
  }
  st.mean = sum / static_cast<double>(count);

  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (std::size_t s = 0; s < total; ++s) {
    const uint32_t j = nb[s];
    if (!map.valid[j]) continue;
    const Vec3 d = map.positions[j] - st.mean;
    xx += d.x() * d.x();
    xy += d.x() * d.y();
    xz += d.x() * d.z();
    yy += d.y() * d.y();
    yz += d.y() * d.z();
    zz += d.z() * d.z();
  }
  const double inv = 1.0 / static_cast<double>(count - 1);
  st.covariance << xx * inv, xy * inv, xz * inv,  //
      xy * inv, yy * inv, yz * inv,               //
      xz * inv, yz * inv, zz * inv;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(st.covariance);
  st.eigenvalues = eig.eigenvalues().cwiseMax(0.0);
  st.min_direction = eig.eigenvectors().col(0);

  const Vec3& beam = map.beam_dirs[i];
  st.normal =
      st.min_direction.dot(beam) > 0.0 ? -st.min_direction : st.min_direction;
  const double c = std::clamp(-st.normal.dot(beam), -1.0, 1.0);
  st.gamma = std::clamp(std::acos(c), 0.0, kPi / 2.0);

  // Viewpoint dispersion: sample covariance trace of the distinct sensor
  // origins (one per contributing scan) in the neighborhood.
  std::vector<uint32_t> seen_ids;
  std::vector<Vec3> origins;
  seen_ids.reserve(8);
  origins.reserve(8);
  for (std::size_t s = 0; s < total; ++s) {
    const uint32_t j = nb[s];
    if (!map.valid[j]) continue;
    const uint32_t id = map.scan_ids[j];
    if (std::find(seen_ids.begin(), seen_ids.end(), id) != seen_ids.end()) {
      continue;
    }
    seen_ids.push_back(id);
    origins.push_back(map.origins[j]);
  }
  if (origins.size() >= 2) {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& o : origins) centroid += o;
    centroid /= static_cast<double>(origins.size());
    double sq = 0.0;
    for (const Vec3& o : origins) sq += (o - centroid).squaredNorm();
    st.sigma = sq / static_cast<double>(origins.size() - 1);
  } else {
    st.sigma = 0.0;
  }
  st.available = true;
  return st;
}

void compute_local_stats(GlobalMap& map) {
  if (!map.neighborhoods_frozen()) {
    throw InvalidParameterError("compute_local_stats: freeze neighborhoods first");
  }
  const std::size_t n = map.size();
  map.stats.assign(n, LocalStats{});

  const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    map.stats[i] = point_local_stats(map, static_cast<std::size_t>(i));
  }
}

void adopt_estimated_gamma(GlobalMap& map) {
  const std::size_t n = map.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (map.valid[i] && map.stats[i].available) {
      map.gamma_used[i] = map.stats[i].gamma;
    }
  }
}

namespace {
inline double safe_ratio(double a, double b) { return b == 0.0 ? 0.0 : a / b; }
}  // namespace

std::vector<uint8_t> apply_filters(GlobalMap& map, const FilterConfig& cfg) {
  cfg.validate();
  if (map.stats.size() != map.size()) {
    throw InvalidParameterError("apply_filters: compute stats first");
  }
  const std::size_t n = map.size();
  map.mask.assign(n, 0);
  const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    if (!map.valid[i]) continue;
    const LocalStats& st = map.stats[i];
    if (st.neighbor_count < cfg.n_min) continue;
    const double r12 = safe_ratio(st.eigenvalues[0], st.eigenvalues[1]);
    const double r23 = safe_ratio(st.eigenvalues[1], st.eigenvalues[2]);
    if (!(r12 <= cfg.c0 && cfg.c1 <= r23 && r23 <= cfg.c2)) continue;
    if (!(st.sigma >= cfg.sigma_min)) continue;
    map.mask[i] = 1;
  }
  return map.mask;
}

std::vector<uint32_t> brute_force_neighbors(const std::vector<Vec3>& points,
                                            std::size_t i, double radius) {
  std::vector<uint32_t> out;
  const double r2 = radius * radius;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if ((points[j] - points[i]).squaredNorm() <= r2) {
      out.push_back(static_cast<uint32_t>(j));
    }
  }
  return out;
}

}  // namespace depthcal
