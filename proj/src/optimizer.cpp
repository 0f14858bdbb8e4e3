#include "depthcal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthcal/error.hpp"

namespace depthcal {

std::string to_string(PoseMode mode) {
  switch (mode) {
    case PoseMode::Frozen: return "frozen";
    case PoseMode::PerScan: return "per_scan";
    case PoseMode::Shared: return "shared";
  }
  return "frozen";
}

PoseMode pose_mode_from_string(const std::string& name) {
  if (name == "frozen") return PoseMode::Frozen;
  if (name == "per_scan") return PoseMode::PerScan;
  if (name == "shared") return PoseMode::Shared;
  throw FormatError("unknown pose mode: '" + name + "'");
}

std::string to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::Plain: return "plain";
    case UpdateRule::Momentum: return "momentum";
    case UpdateRule::AdaptiveMoments: return "adaptive_moments";
  }
  return "plain";
}

UpdateRule update_rule_from_string(const std::string& name) {
  if (name == "plain") return UpdateRule::Plain;
  if (name == "momentum") return UpdateRule::Momentum;
  if (name == "adaptive_moments") return UpdateRule::AdaptiveMoments;
  throw FormatError("unknown update rule: '" + name + "'");
}

void OptimizationConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(weight_step > 0.0 && pose_step > 0.0 && rotation_scale > 0.0)) {
    throw ConfigError("step sizes must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("momentum/beta2 must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

std::vector<uint32_t> default_validation_ids(std::size_t scan_count) {
  if (scan_count < 2) throw ConfigError("need at least two scans");
  std::size_t n_val = std::max<std::size_t>(2, (scan_count + 3) / 4);
  n_val = std::min(n_val, scan_count);
  std::vector<uint32_t> ids;
  for (std::size_t k = scan_count - n_val; k < scan_count; ++k) {
    ids.push_back(static_cast<uint32_t>(k));
  }
  return ids;
}

Vec6 shared_correction_gradient(const std::vector<Vec6>& per_scan) {
  Vec6 sum = Vec6::Zero();
  for (const Vec6& g : per_scan) sum += g;
  return sum;
}

namespace {

// First-order updater over one flat parameter block with per-component step
// sizes. AdaptiveMoments is Adam with bias correction.
class Updater {
 public:
  Updater(UpdateRule rule, Eigen::VectorXd steps, double beta1, double beta2,
          double epsilon)
      : rule_(rule),
        steps_(std::move(steps)),
        beta1_(beta1),
        beta2_(beta2),
        epsilon_(epsilon),
        m_(Eigen::VectorXd::Zero(steps_.size())),
        v_(Eigen::VectorXd::Zero(steps_.size())) {}

  void apply(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
    switch (rule_) {
      case UpdateRule::Plain:
        params -= steps_.cwiseProduct(grad);
        break;
      case UpdateRule::Momentum:
        m_ = beta1_ * m_ + grad;
        params -= steps_.cwiseProduct(m_);
        break;
      case UpdateRule::AdaptiveMoments: {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double mc = 1.0 - std::pow(beta1_, t_);
        const double vc = 1.0 - std::pow(beta2_, t_);
        const Eigen::ArrayXd m_hat = m_.array() / mc;
        const Eigen::ArrayXd v_hat = v_.array() / vc;
        params.array() -=
            steps_.array() * m_hat / (v_hat.sqrt() + epsilon_);
        break;
      }
    }
  }

 private:
  UpdateRule rule_;
  Eigen::VectorXd steps_;
  double beta1_, beta2_, epsilon_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

Eigen::VectorXd pose_steps(const OptimizationConfig& cfg, std::size_t blocks) {
  Eigen::VectorXd steps(6 * blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    steps.segment<3>(6 * b).setConstant(cfg.pose_step);
    steps.segment<3>(6 * b + 3).setConstant(cfg.pose_step *
                                            cfg.rotation_scale);
  }
  return steps;
}

void check_validation_ids(const std::vector<uint32_t>& ids,
                          std::size_t scan_count) {
  if (ids.size() < 2) {
    throw ConfigError("validation split needs at least two scans");
  }
  std::vector<uint32_t> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("validation scan ids must be unique");
  }
  if (sorted.back() >= scan_count) {
    throw ConfigError("validation scan id out of range");
  }
}

struct EvaluatedMap {
  double loss = 0.0;
  std::size_t selected = 0;
  std::size_t invalidated = 0;
  std::size_t mask_flips = 0;
};

// One full evaluation pass over a frozen map: refresh positions under the
// current parameters, recompute statistics and filters, and take the loss.
EvaluatedMap evaluate_map(GlobalMap& map,
                          const std::vector<PoseCorrection>& corrections,
                          const BiasModel& model, const FilterConfig& fcfg,
                          LossKind kind) {
  EvaluatedMap out;
  const std::vector<uint8_t> previous_mask = map.mask;
  out.invalidated = refresh_map(map, corrections, model);
  compute_local_stats(map);
  apply_filters(map, fcfg);
  if (!previous_mask.empty()) {
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (previous_mask[i] != map.mask[i]) ++out.mask_flips;
    }
  }
  const LossValue lv = map_loss(map, kind);
  out.loss = lv.value;
  out.selected = lv.selected;
  return out;
}

}  // namespace

TrainingResult train(const std::vector<ScanCloud>& scans,
                     const std::vector<RigidTransform>& poses,
                     const OptimizationConfig& cfg, const FilterConfig& fcfg,
                     const BiasModel& model0) {
  cfg.validate();
  fcfg.validate();
  const std::size_t k_count = scans.size();
  if (k_count < 2) {
    throw ConfigError("map consistency needs multiple view-points");
  }
  if (poses.size() != k_count) {
    throw ConfigError("scan and pose counts differ");
  }

  const std::vector<uint32_t> val_ids = cfg.validation_scans.empty()
                                            ? default_validation_ids(k_count)
                                            : cfg.validation_scans;
  check_validation_ids(val_ids, k_count);

  BiasModel model = model0;
  std::vector<PoseCorrection> corrections(k_count, PoseCorrection::Zero());

  // Training map over all scans; validation map over the held-out subset.
  // Both keep the neighborhoods frozen from their initial geometry.
  GlobalMap train_map = build_map(scans, poses, corrections, model);
  freeze_neighborhoods(train_map, fcfg);

  std::vector<ScanCloud> val_scans;
  std::vector<RigidTransform> val_poses;
  for (uint32_t id : val_ids) {
    val_scans.push_back(scans[id]);
    val_poses.push_back(poses[id]);
  }
  std::vector<PoseCorrection> val_corrections(val_ids.size(),
                                              PoseCorrection::Zero());
  GlobalMap val_map = build_map(val_scans, val_poses, val_corrections, model);
  freeze_neighborhoods(val_map, fcfg);

  Updater weight_updater(cfg.update,
                         Eigen::VectorXd::Constant(2, cfg.weight_step),
                         cfg.momentum, cfg.beta2, cfg.epsilon);
  const std::size_t pose_blocks =
      cfg.pose_mode == PoseMode::Shared ? 1 : k_count;
  Updater pose_updater(cfg.update, pose_steps(cfg, pose_blocks), cfg.momentum,
                       cfg.beta2, cfg.epsilon);
  Vec6 shared = Vec6::Zero();

  TrainingResult result;
  result.model = model;
  result.corrections = corrections;
  result.validation_ids = val_ids;
  double best_val = std::numeric_limits<double>::infinity();

  GradientRequest request;
  request.weights = cfg.learn_bias;
  request.poses = cfg.pose_mode != PoseMode::Frozen;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    IterationRecord record;
    try {
      // Evaluate the training map at the current (w, p).
      const std::vector<uint8_t> previous_mask = train_map.mask;
      record.invalidated = refresh_map(train_map, corrections, model);
      compute_local_stats(train_map);
      apply_filters(train_map, fcfg);
      if (!previous_mask.empty()) {
        for (std::size_t i = 0; i < train_map.size(); ++i) {
          if (previous_mask[i] != train_map.mask[i]) ++record.mask_flips;
        }
      }
      const LossGradients grads =
          map_loss_gradients(train_map, model, corrections, cfg.loss, request);
      record.train_loss = grads.value;
      record.train_selected = grads.selected;
      record.skipped_eigengap = grads.skipped_eigengap;
      if (!std::isfinite(grads.value)) {
        throw NumericalError("training loss is not finite");
      }

      // Score the snapshot on the validation map.
      for (std::size_t v = 0; v < val_ids.size(); ++v) {
        val_corrections[v] = corrections[val_ids[v]];
      }
      const EvaluatedMap val =
          evaluate_map(val_map, val_corrections, model, fcfg, cfg.loss);
      record.validation_loss = val.loss;
      record.validation_selected = val.selected;
      if (!std::isfinite(val.loss)) {
        throw NumericalError("validation loss is not finite");
      }

      if (val.loss < best_val) {
        best_val = val.loss;
        result.model = model;
        result.corrections = corrections;
        result.selected_iteration = static_cast<std::size_t>(iter);
      }

      // Freshly estimated incidence angles drive the next refresh.
      adopt_estimated_gamma(train_map);
      adopt_estimated_gamma(val_map);

      // Parameter update.
      if (cfg.learn_bias) {
        weight_updater.apply(model.w, grads.d_weights);
      }
      if (cfg.pose_mode == PoseMode::PerScan) {
        Eigen::VectorXd flat(6 * k_count);
        Eigen::VectorXd grad(6 * k_count);
        for (std::size_t k = 0; k < k_count; ++k) {
          flat.segment<6>(6 * k) = corrections[k];
          grad.segment<6>(6 * k) = grads.d_corrections[k];
        }
        pose_updater.apply(flat, grad);
        for (std::size_t k = 0; k < k_count; ++k) {
          corrections[k] = flat.segment<6>(6 * k);
        }
      } else if (cfg.pose_mode == PoseMode::Shared) {
        const Vec6 g = shared_correction_gradient(grads.d_corrections);
        pose_updater.apply(shared, g);
        for (std::size_t k = 0; k < k_count; ++k) corrections[k] = shared;
      }
    } catch (const EmptySelectionError& e) {
      throw EmptySelectionError("training aborted at iteration " +
                                std::to_string(iter) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("training aborted at iteration " +
                           std::to_string(iter) + ": " + e.what());
    }
    result.history.push_back(record);
  }
  return result;
}

double validation_loss(const std::vector<ScanCloud>& scans,
                       const std::vector<RigidTransform>& poses,
                       const BiasModel& model,
                       const std::vector<PoseCorrection>& corrections,
                       const std::vector<uint32_t>& validation_ids,
                       const FilterConfig& fcfg, LossKind kind) {
  if (scans.size() != poses.size() || scans.size() != corrections.size()) {
    throw ConfigError("scan, pose and correction counts differ");
  }
  check_validation_ids(validation_ids, scans.size());

  std::vector<ScanCloud> subset;
  std::vector<RigidTransform> subset_poses;
  std::vector<PoseCorrection> subset_corrections;
  for (uint32_t id : validation_ids) {
    subset.push_back(scans[id]);
    subset_poses.push_back(poses[id]);
    subset_corrections.push_back(corrections[id]);
  }
  GlobalMap map = build_map(subset, subset_poses, subset_corrections, model);
  freeze_neighborhoods(map, fcfg);
  // Scans rarely carry incidence angles, which leaves the depth model inert
  // in the build above; estimate the angles from the built geometry and
  // re-apply the correction with them, exactly as the optimizer's first
  // iteration does.
  compute_local_stats(map);
  adopt_estimated_gamma(map);
  refresh_map(map, subset_corrections, model);
  compute_local_stats(map);
  apply_filters(map, fcfg);
  return map_loss(map, kind).value;
}

}  // namespace depthcal
