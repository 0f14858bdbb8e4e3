#include "depthcal/reference.hpp"

#include <cmath>

#include "depthcal/accumulate.hpp"
#include "depthcal/error.hpp"

namespace depthcal::reference {

void freeze_neighborhoods(GlobalMap& map, const FilterConfig& cfg) {
  cfg.validate();
  const std::size_t n = map.size();
  map.neighbor_offsets.assign(n + 1, 0);
  map.neighbor_indices.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const auto list = brute_force_neighbors(map.positions, i, cfg.radius);
    map.neighbor_indices.insert(map.neighbor_indices.end(), list.begin(),
                                list.end());
    map.neighbor_offsets[i + 1] = map.neighbor_indices.size();
  }
  map.frozen_radius = cfg.radius;
}

void compute_local_stats(GlobalMap& map) {
  if (!map.neighborhoods_frozen()) {
    throw InvalidParameterError(
        "reference::compute_local_stats: freeze neighborhoods first");
  }
  const std::size_t n = map.size();
  map.stats.assign(n, LocalStats{});

  // Same per-point arithmetic as the parallel kernel (the parallelism is
  // over points, so the serial schedule must reproduce it bit for bit);
  // only the loop scheduling differs.
  for (std::size_t i = 0; i < n; ++i) {
    map.stats[i] = point_local_stats(map, i);
  }
}

std::vector<uint8_t> apply_filters(GlobalMap& map, const FilterConfig& cfg) {
  cfg.validate();
  if (map.stats.size() != map.size()) {
    throw InvalidParameterError("reference::apply_filters: compute stats first");
  }
  const std::size_t n = map.size();
  map.mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.valid[i]) continue;
    const LocalStats& st = map.stats[i];

    const bool enough_neighbors = st.neighbor_count >= cfg.n_min;

    const double r12 = st.eigenvalues[1] == 0.0
                           ? 0.0
                           : st.eigenvalues[0] / st.eigenvalues[1];
    const double r23 = st.eigenvalues[2] == 0.0
                           ? 0.0
                           : st.eigenvalues[1] / st.eigenvalues[2];
    const bool flat = r12 <= cfg.c0 && cfg.c1 <= r23 && r23 <= cfg.c2;

    const bool dispersed = st.sigma >= cfg.sigma_min;

    if (enough_neighbors && flat && dispersed) map.mask[i] = 1;
  }
  return map.mask;
}

LossValue map_loss(const GlobalMap& map, LossKind kind) {
  if (!map.neighborhoods_frozen() || map.stats.size() != map.size() ||
      map.mask.size() != map.size()) {
    throw InvalidParameterError(
        "reference::map_loss: map statistics and mask must be computed");
  }
  NeumaierSum acc;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.mask[i]) continue;
    acc.add(point_loss(map.stats[i], kind));
    ++selected;
  }
  if (selected == 0) {
    throw EmptySelectionError("reference::map_loss: no points pass the filters");
  }
  return LossValue{acc.result() / static_cast<double>(selected), selected};
}

LossGradients map_loss_gradients(
    const GlobalMap& map, const BiasModel& model,
    const std::vector<PoseCorrection>& corrections, LossKind kind,
    const GradientRequest& request) {
  const std::size_t n = map.size();
  const std::size_t k_count = map.poses.size();
  if (corrections.size() != k_count) {
    throw InvalidParameterError(
        "reference::map_loss_gradients: correction count mismatch");
  }

  LossGradients out;
  const LossValue lv = reference::map_loss(map, kind);
  out.value = lv.value;
  out.selected = lv.selected;
  out.d_corrections.assign(k_count, Vec6::Zero());

  // Scatter pass: every masked neighborhood adds its per-member term to the
  // member's position gradient.
  std::vector<Vec3> pos_grad(n, Vec3::Zero());
  const double inv_selected = 1.0 / static_cast<double>(lv.selected);
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.mask[i]) continue;
    const LocalStats& st = map.stats[i];
    if (kind == LossKind::MinEigenvalue &&
        st.eigenvalues[1] - st.eigenvalues[0] < kEigengapMin) {
      ++out.skipped_eigengap;
      continue;
    }
    const double scale =
        2.0 / static_cast<double>(st.neighbor_count - 1) * inv_selected;
    const uint32_t* nb = map.neighbors_begin(i);
    const std::size_t total = map.neighbor_count(i);
    for (std::size_t s = 0; s < total; ++s) {
      const uint32_t j = nb[s];
      if (!map.valid[j]) continue;
      const Vec3 dev = map.positions[j] - st.mean;
      if (kind == LossKind::MinEigenvalue) {
        pos_grad[j] += (scale * st.min_direction.dot(dev)) * st.min_direction;
      } else {
        pos_grad[j] += scale * dev;
      }
    }
  }

  if (!request.weights && !request.poses) return out;

  // Chain pass with explicit Jacobian matrices.
  for (std::size_t j = 0; j < n; ++j) {
    if (!map.valid[j]) continue;
    const Vec3& g = pos_grad[j];
    const uint32_t k = map.scan_ids[j];
    if (request.weights && std::isfinite(map.gamma_used[j])) {
      const Vec2 deps =
          d_bias_d_weights(model, map.raw_depths[j], map.gamma_used[j]);
      const Mat3 r_hat =
          map.poses[k].rotation * rodrigues(corrections[k].tail<3>());
      const Mat32 d_point_d_w =
          -(r_hat * map.sensor_dirs[j]) * deps.transpose();
      out.d_weights += d_point_d_w.transpose() * g;
    }
    if (request.poses) {
      const double d_hat =
          corrected_depth(model, map.raw_depths[j], map.gamma_used[j]);
      const Vec3 c = map.sensor_origins[j] + d_hat * map.sensor_dirs[j];
      const Mat36 jac =
          d_transformed_point_d_correction(map.poses[k], corrections[k], c);
      out.d_corrections[k] += jac.transpose() * g;
    }
  }
  return out;
}

}  // namespace depthcal::reference
