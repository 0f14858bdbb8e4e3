#include "depthcal/consistency_loss.hpp"

#include <Eigen/Geometry>
#include <atomic>
#include <cmath>
#include <limits>

#include "depthcal/accumulate.hpp"
#include "depthcal/error.hpp"
#include "depthcal/threading.hpp"

namespace depthcal {

std::string to_string(LossKind kind) {
  return kind == LossKind::MinEigenvalue ? "min_eigenvalue" : "trace";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "min_eigenvalue") return LossKind::MinEigenvalue;
  if (name == "trace") return LossKind::Trace;
  throw FormatError("unknown loss kind: '" + name + "'");
}

double point_loss(const LocalStats& st, LossKind kind) {
  return kind == LossKind::MinEigenvalue ? st.eigenvalues[0]
                                         : st.covariance.trace();
}

namespace {
void require_evaluated(const GlobalMap& map, const char* who) {
  if (!map.neighborhoods_frozen() || map.stats.size() != map.size() ||
      map.mask.size() != map.size()) {
    throw InvalidParameterError(std::string(who) +
                                ": map statistics and mask must be computed");
  }
}
}  // namespace

LossValue map_loss(const GlobalMap& map, LossKind kind) {
  require_evaluated(map, "map_loss");
  const std::size_t n = map.size();
  const int workers = worker_count();

  std::vector<NeumaierSum> partial(workers);
  std::vector<std::size_t> counts(workers, 0);
#pragma omp parallel for schedule(static, 1) num_threads(workers)
  for (int t = 0; t < workers; ++t) {
    const std::size_t lo = n * static_cast<std::size_t>(t) / workers;
    const std::size_t hi = n * (static_cast<std::size_t>(t) + 1) / workers;
    NeumaierSum acc;
    std::size_t c = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!map.mask[i]) continue;
      acc.add(point_loss(map.stats[i], kind));
      ++c;
    }
    partial[t] = acc;
    counts[t] = c;
  }

  NeumaierSum total;
  std::size_t selected = 0;
  for (int t = 0; t < workers; ++t) {
    total.merge(partial[t]);
    selected += counts[t];
  }
  if (selected == 0) {
    throw EmptySelectionError("map_loss: no points pass the filters");
  }
  return LossValue{total.result() / static_cast<double>(selected), selected};
}

std::vector<double> point_losses(const GlobalMap& map, LossKind kind) {
  require_evaluated(map, "point_losses");
  std::vector<double> out(map.size(),
                          std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.mask[i]) out[i] = point_loss(map.stats[i], kind);
  }
  return out;
}

LossGradients map_loss_gradients(const GlobalMap& map, const BiasModel& model,
                                 const std::vector<PoseCorrection>& corrections,
                                 LossKind kind, const GradientRequest& request) {
  require_evaluated(map, "map_loss_gradients");
  const std::size_t n = map.size();
  const std::size_t k_count = map.poses.size();
  if (corrections.size() != k_count) {
    throw InvalidParameterError(
        "map_loss_gradients: correction count does not match pose count");
  }

  LossGradients out;
  const LossValue lv = map_loss(map, kind);
  out.value = lv.value;
  out.selected = lv.selected;
  out.d_corrections.assign(k_count, Vec6::Zero());

  // Neighborhoods contributing gradients. A masked point always contributes
  // its loss value, but under MinEigenvalue its gradient is dropped when the
  // eigenvector is ill-defined (lambda2 - lambda1 below the gap threshold).
  std::vector<uint8_t> use_grad(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.mask[i]) continue;
    if (kind == LossKind::MinEigenvalue &&
        map.stats[i].eigenvalues[1] - map.stats[i].eigenvalues[0] <
            kEigengapMin) {
      ++out.skipped_eigengap;
      continue;
    }
    use_grad[i] = 1;
  }

  // Phase 1: d loss / d position_j, gathered over the frozen lists. The
  // radius relation is symmetric, so the neighborhoods containing j are
  // exactly the neighborhoods of j's own list.
  std::vector<Vec3> pos_grad(n, Vec3::Zero());
  const double inv_selected = 1.0 / static_cast<double>(lv.selected);
  const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
  std::atomic<std::ptrdiff_t> first_bad{-1};
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t j = 0; j < sn; ++j) {
    if (!map.valid[j]) continue;
    const uint32_t* nb = map.neighbors_begin(static_cast<std::size_t>(j));
    const std::size_t total = map.neighbor_count(static_cast<std::size_t>(j));
    Vec3 g = Vec3::Zero();
    for (std::size_t s = 0; s < total; ++s) {
      const uint32_t i = nb[s];
      if (!use_grad[i]) continue;
      const LocalStats& st = map.stats[i];
      const double scale =
          2.0 / static_cast<double>(st.neighbor_count - 1) * inv_selected;
      const Vec3 dev = map.positions[j] - st.mean;
      if (kind == LossKind::MinEigenvalue) {
        g += (scale * st.min_direction.dot(dev)) * st.min_direction;
      } else {
        g += scale * dev;
      }
    }
    if (!g.allFinite()) {
      std::ptrdiff_t cur = first_bad.load();
      while ((cur < 0 || cur > j) && !first_bad.compare_exchange_weak(cur, j)) {
      }
    }
    pos_grad[j] = g;
  }
  if (first_bad.load() >= 0) {
    throw NumericalError("non-finite position gradient at map point " +
                         std::to_string(first_bad.load()));
  }

  if (!request.weights && !request.poses) return out;

  // Per-scan factors of the pose chain: with the correction p = [x, theta],
  // d(T0 exp(p) c)/dx = R0 and d/dtheta = -R0 R(theta) [c]x Jr(theta), so
  // Jac^T g = [R0^T g ; Jr^T (c x (Rhat^T g))].
  std::vector<Mat3> r0(k_count), r_hat(k_count), jr(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const Vec3 axis_angle = corrections[k].tail<3>();
    r0[k] = map.poses[k].rotation;
    r_hat[k] = r0[k] * rodrigues(axis_angle);
    jr[k] = so3_right_jacobian(axis_angle);
  }

  // Phase 2: chain position gradients to the parameters with per-chunk
  // accumulators combined in chunk order.
  const int workers = worker_count();
  std::vector<Vec2> w_partial(workers, Vec2::Zero());
  std::vector<std::vector<Vec6>> p_partial(
      workers, std::vector<Vec6>(k_count, Vec6::Zero()));
#pragma omp parallel for schedule(static, 1) num_threads(workers)
  for (int t = 0; t < workers; ++t) {
    const std::size_t lo = n * static_cast<std::size_t>(t) / workers;
    const std::size_t hi = n * (static_cast<std::size_t>(t) + 1) / workers;
    for (std::size_t j = lo; j < hi; ++j) {
      if (!map.valid[j]) continue;
      const Vec3& g = pos_grad[j];
      if (g.isZero(0.0)) continue;
      const uint32_t k = map.scan_ids[j];
      if (request.weights && std::isfinite(map.gamma_used[j])) {
        const Vec2 deps =
            d_bias_d_weights(model, map.raw_depths[j], map.gamma_used[j]);
        w_partial[t] -= deps * map.beam_dirs[j].dot(g);
      }
      if (request.poses) {
        const double d_hat =
            corrected_depth(model, map.raw_depths[j], map.gamma_used[j]);
        const Vec3 c = map.sensor_origins[j] + d_hat * map.sensor_dirs[j];
        const Vec3 h = r_hat[k].transpose() * g;
        p_partial[t][k].head<3>() += r0[k].transpose() * g;
        p_partial[t][k].tail<3>() += jr[k].transpose() * c.cross(h);
      }
    }
  }
  for (int t = 0; t < workers; ++t) {
    out.d_weights += w_partial[t];
    for (std::size_t k = 0; k < k_count; ++k) {
      out.d_corrections[k] += p_partial[t][k];
    }
  }
  return out;
}

}  // namespace depthcal
