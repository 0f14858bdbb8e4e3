// depthcal — synthetic data generation, bias-model training and evaluation
// from one binary.
//
//   simulate     write a synthetic dataset (scans + poses + ground truth)
//   train        fit a bias model (and optionally pose corrections)
//   correct      apply a bias model to a dataset's scans
//   eval         map-consistency metrics, plus residuals vs ground truth
//   board        bias curves of a model pair over distance/angle sweeps
//   dump-config  write the default configuration with documentation
//
// The DEPTHCAL_THREADS environment variable caps the worker count
// (0/unset = all hardware threads, 1 = fully deterministic). All output
// files are written atomically, so a failed command leaves no partial files.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthcal/config.hpp"
#include "depthcal/consistency_loss.hpp"
#include "depthcal/dataset.hpp"
#include "depthcal/depth_model.hpp"
#include "depthcal/error.hpp"
#include "depthcal/io_util.hpp"
#include "depthcal/map_index.hpp"
#include "depthcal/optimizer.hpp"
#include "depthcal/ply.hpp"
#include "depthcal/simulator.hpp"

namespace {

using namespace depthcal;

// "5.3,8.6" -> {5.3, 8.6}
std::vector<double> parse_number_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) {
    out.push_back(parse_double(trim(part), what));
  }
  if (out.empty()) throw FormatError(what + ": empty list");
  return out;
}

// "0:85:5" -> {0, 5, ..., 85}; plain comma lists also accepted.
std::vector<double> parse_sweep(const std::string& text,
                                const std::string& what) {
  const std::vector<std::string> parts = split(text, ':');
  if (parts.size() == 1) return parse_number_list(text, what);
  if (parts.size() != 3) throw FormatError(what + ": expected lo:hi:step");
  const double lo = parse_double(trim(parts[0]), what);
  const double hi = parse_double(trim(parts[1]), what);
  const double step = parse_double(trim(parts[2]), what);
  if (!(step > 0.0) || hi < lo) {
    throw FormatError(what + ": need lo <= hi and step > 0");
  }
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = lo + step * i;
    if (v > hi + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

LossKind parse_loss_flag(const std::string& name) {
  if (name == "min_eig") return LossKind::MinEigenvalue;
  return loss_kind_from_string(name);
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? default_run_config() : load_run_config(path);
}

Dataset load_data_dir(const std::string& dir, double d_min) {
  return load_dataset(dir, dir + "/poses.csv", d_min);
}

// Builds the fused map with estimated incidence angles: fuse under the zero
// model, freeze neighborhoods, estimate normals/gamma, then adopt the
// estimates so a later refresh corrects with them.
GlobalMap build_estimated_map(const Dataset& ds, const FilterConfig& fcfg) {
  const std::vector<PoseCorrection> zeros(ds.scans.size(), Vec6::Zero());
  GlobalMap map = build_map(ds.scans, ds.poses, zeros, BiasModel{});
  freeze_neighborhoods(map, fcfg);
  compute_local_stats(map);
  adopt_estimated_gamma(map);
  return map;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scene;
  std::string out;
  std::string bias_kind = "scaled_polynomial";
  double w1 = 0.006;
  double w2 = 0.0;
  double noise_std = 0.0;
  double pose_noise_t = 0.0;    // meters
  double pose_noise_r = 0.0;    // degrees
  uint64_t seed = 0;
};

void run_simulate(const SimulateArgs& a) {
  Scene scene;
  std::vector<RigidTransform> true_poses;
  SensorModel sensor;
  if (a.scene == "corridor") {
    scene = corridor_scene();
    true_poses = corridor_poses();
  } else {
    // A single angled board watched from three laterally spread positions;
    // a narrow dense sensor so most rays land on the board.
    scene = board_scene(5.3, 45.0);
    for (double y : {-0.7, 0.0, 0.7}) {
      RigidTransform pose;
      pose.translation = Vec3(0.0, y, 0.0);
      true_poses.push_back(pose);
    }
    sensor.elevation_rays = 128;
    sensor.azimuth_rays = 128;
    sensor.elevation_fov = deg2rad(16.0);
    sensor.azimuth_fov = deg2rad(16.0);
    sensor.max_range = 50.0;
  }
  sensor.noise_std = a.noise_std;
  sensor.bias.kind = bias_kind_from_string(a.bias_kind);
  sensor.bias.w = Vec2(a.w1, a.w2);
  sensor.seed = a.seed;
  sensor.validate();

  std::vector<SimulatedScan> scans;
  std::size_t points = 0;
  for (std::size_t k = 0; k < true_poses.size(); ++k) {
    scans.push_back(cast_scan(scene, true_poses[k], sensor, k));
    points += scans.back().scan.size();
  }
  const std::vector<RigidTransform> measured = perturb_poses(
      true_poses, a.pose_noise_t, deg2rad(a.pose_noise_r), a.seed);

  save_dataset(a.out, scans, measured, true_poses);
  std::cout << "wrote " << scans.size() << " scans (" << points
            << " points) to " << a.out << "\n";
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string loss;       // empty = from config
  std::string pose_mode;  // empty = from config
};

void run_train(const TrainArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  if (!a.loss.empty()) cfg.optimize.loss = parse_loss_flag(a.loss);
  if (!a.pose_mode.empty()) {
    cfg.optimize.pose_mode = pose_mode_from_string(a.pose_mode);
  }

  const Dataset ds = load_data_dir(a.data, cfg.d_min);
  BiasModel model0;
  model0.kind = cfg.model_kind;

  const TrainingResult result =
      train(ds.scans, ds.poses, cfg.optimize, cfg.filter, model0);

  const std::filesystem::path out_dir =
      std::filesystem::path(a.out).parent_path();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  save_model(result.model, a.out);
  const auto sibling = [&](const char* name) {
    return (out_dir / name).string();
  };

  std::string corr = "scan_id,tx,ty,tz,rx,ry,rz\n";
  for (std::size_t k = 0; k < ds.scan_ids.size(); ++k) {
    corr += ds.scan_ids[k];
    for (int c = 0; c < 6; ++c) {
      corr += "," + format_full(result.corrections[k][c]);
    }
    corr += "\n";
  }
  write_file_atomic(sibling("corrections.csv"), corr);

  std::string curve =
      "iteration,train_loss,validation_loss,train_selected,"
      "validation_selected,skipped_eigengap,mask_flips,invalidated\n";
  for (std::size_t it = 0; it < result.history.size(); ++it) {
    const IterationRecord& r = result.history[it];
    curve += std::to_string(it) + "," + format_full(r.train_loss) + "," +
             format_full(r.validation_loss) + "," +
             std::to_string(r.train_selected) + "," +
             std::to_string(r.validation_selected) + "," +
             std::to_string(r.skipped_eigengap) + "," +
             std::to_string(r.mask_flips) + "," +
             std::to_string(r.invalidated) + "\n";
  }
  write_file_atomic(sibling("loss_curve.csv"), curve);

  std::size_t dropped = 0;
  for (std::size_t d : ds.dropped) dropped += d;
  std::string validation_ids;
  for (std::size_t i = 0; i < result.validation_ids.size(); ++i) {
    if (i) validation_ids += ",";
    validation_ids += ds.scan_ids[result.validation_ids[i]];
  }
  const IterationRecord& first = result.history.front();
  const IterationRecord& best = result.history[result.selected_iteration];
  std::string report;
  report += "scans: " + std::to_string(ds.scans.size()) + "\n";
  report += "points dropped at load: " + std::to_string(dropped) + "\n";
  report += "model kind: " + to_string(result.model.kind) + "\n";
  report += "loss: " + to_string(cfg.optimize.loss) + "\n";
  report += "pose mode: " + to_string(cfg.optimize.pose_mode) + "\n";
  report += "update rule: " + to_string(cfg.optimize.update) + "\n";
  report += "iterations: " + std::to_string(result.history.size()) + "\n";
  report += "validation scans: " + validation_ids + "\n";
  report +=
      "selected iteration: " + std::to_string(result.selected_iteration) + "\n";
  report += "initial train loss: " + format_full(first.train_loss) + "\n";
  report +=
      "initial validation loss: " + format_full(first.validation_loss) + "\n";
  report += "best validation loss: " + format_full(best.validation_loss) + "\n";
  report += "w1: " + format_full(result.model.w.x()) + "\n";
  report += "w2: " + format_full(result.model.w.y()) + "\n";
  write_file_atomic(sibling("report.txt"), report);

  std::cout << "selected iteration " << result.selected_iteration
            << " (validation loss " << format_full(best.validation_loss)
            << ")\nmodel: kind = " << to_string(result.model.kind)
            << ", w1 = " << format_full(result.model.w.x())
            << ", w2 = " << format_full(result.model.w.y()) << "\n";
}

// ----------------------------------------------------------------- correct

struct CorrectArgs {
  std::string data;
  std::string model;
  std::string out;
  std::string config;
};

void run_correct(const CorrectArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const Dataset ds = load_data_dir(a.data, cfg.d_min);
  const BiasModel model = load_model(a.model);

  GlobalMap map = build_estimated_map(ds, cfg.filter);

  // Map points are scan-major in original order, so a running per-scan index
  // lines each one up with its truth row.
  std::vector<std::vector<Vec3>> corrected(ds.scans.size());
  std::vector<GroundTruth> truth(ds.scans.size());
  std::vector<std::size_t> next(ds.scans.size(), 0);
  std::size_t invalidated = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::size_t k = map.scan_ids[i];
    const std::size_t j = next[k]++;
    const double d_hat =
        corrected_depth(model, map.raw_depths[i], map.gamma_used[i]);
    if (d_hat <= 0.0) {
      ++invalidated;
      continue;
    }
    // Sensor-frame points, so the output directory is again a valid dataset
    // under the unchanged poses.csv.
    corrected[k].push_back(d_hat * ds.scans[k].directions[j]);
    if (ds.has_ground_truth) {
      truth[k].d_true.push_back(ds.truth[k].d_true[j]);
      truth[k].gamma_true.push_back(ds.truth[k].gamma_true[j]);
      truth[k].patch_id.push_back(ds.truth[k].patch_id[j]);
    }
  }

  std::filesystem::create_directories(a.out);
  std::size_t points = 0;
  for (std::size_t k = 0; k < ds.scans.size(); ++k) {
    save_ply_points(a.out + "/" + ds.scan_ids[k] + ".ply", corrected[k]);
    points += corrected[k].size();
  }
  if (ds.has_ground_truth) {
    for (std::size_t k = 0; k < ds.scans.size(); ++k) {
      std::string side = "row,d_true,gamma_true,patch_id\n";
      for (std::size_t j = 0; j < truth[k].size(); ++j) {
        side += std::to_string(j) + "," + format_full(truth[k].d_true[j]) +
                "," + format_full(truth[k].gamma_true[j]) + "," +
                std::to_string(truth[k].patch_id[j]) + "\n";
      }
      write_file_atomic(a.out + "/" + ds.scan_ids[k] + ".gt.csv", side);
    }
  }
  save_poses_csv(a.out + "/poses.csv", ds.scan_ids, ds.poses);
  const std::string gt_poses = a.data + "/poses_gt.csv";
  if (std::filesystem::exists(gt_poses)) {
    write_file_atomic(a.out + "/poses_gt.csv", read_file(gt_poses));
  }

  std::cout << "corrected " << points << " points across " << ds.scans.size()
            << " scans";
  if (invalidated) std::cout << " (" << invalidated << " dropped)";
  std::cout << "\n";
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string model;
  std::string out;
  std::string config;
  std::string dump_points;
};

void run_eval(const EvalArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const Dataset ds = load_data_dir(a.data, cfg.d_min);
  BiasModel model;  // zero weights: evaluate the data as-is
  if (!a.model.empty()) model = load_model(a.model);

  GlobalMap map = build_estimated_map(ds, cfg.filter);
  const std::vector<PoseCorrection> zeros(ds.scans.size(), Vec6::Zero());
  const std::size_t invalidated = refresh_map(map, zeros, model);
  compute_local_stats(map);
  apply_filters(map, cfg.filter);

  std::size_t selected = 0;
  std::size_t available = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    selected += map.mask[i] ? 1 : 0;
    available += map.stats[i].available ? 1 : 0;
  }

  const auto loss_or_nan = [&](LossKind kind) {
    if (selected == 0) return std::numeric_limits<double>::quiet_NaN();
    return map_loss(map, kind).value;
  };
  const double loss_min_eig = loss_or_nan(LossKind::MinEigenvalue);
  const double loss_trace = loss_or_nan(LossKind::Trace);

  std::size_t loaded = 0;
  std::size_t dropped = 0;
  for (const ScanCloud& s : ds.scans) loaded += s.size();
  for (std::size_t d : ds.dropped) dropped += d;

  std::string csv = "metric,value\n";
  const auto row = [&](const std::string& name, const std::string& value) {
    csv += name + "," + value + "\n";
  };
  row("scans", std::to_string(ds.scans.size()));
  row("points_loaded", std::to_string(loaded));
  row("points_dropped", std::to_string(dropped));
  row("points_invalidated", std::to_string(invalidated));
  row("stats_available", std::to_string(available));
  row("selected", std::to_string(selected));
  row("loss_min_eigenvalue", format_full(loss_min_eig));
  row("loss_trace", format_full(loss_trace));

  if (ds.has_ground_truth) {
    // Along-beam residual of every corrected depth against its true depth,
    // binned by the true incidence angle in 5-degree steps.
    constexpr int kBins = 18;
    struct Bin {
      std::size_t count = 0;
      double sum = 0.0;
      double sq = 0.0;
    };
    std::vector<Bin> bins(kBins);
    Bin all;
    std::vector<std::size_t> next(ds.scans.size(), 0);
    for (std::size_t i = 0; i < map.size(); ++i) {
      const std::size_t k = map.scan_ids[i];
      const std::size_t j = next[k]++;
      const double d_hat =
          corrected_depth(model, map.raw_depths[i], map.gamma_used[i]);
      const double residual = d_hat - ds.truth[k].d_true[j];
      const double deg = rad2deg(ds.truth[k].gamma_true[j]);
      int b = static_cast<int>(deg / 5.0);
      if (b >= kBins) b = kBins - 1;
      if (b < 0) b = 0;
      bins[b].count += 1;
      bins[b].sum += residual;
      bins[b].sq += residual * residual;
      all.count += 1;
      all.sum += residual;
      all.sq += residual * residual;
    }
    const auto emit = [&](const std::string& label, const Bin& b) {
      const double mean = b.count ? b.sum / static_cast<double>(b.count)
                                  : std::numeric_limits<double>::quiet_NaN();
      const double rms = b.count
                             ? std::sqrt(b.sq / static_cast<double>(b.count))
                             : std::numeric_limits<double>::quiet_NaN();
      row("point_to_plane_count_" + label, std::to_string(b.count));
      row("point_to_plane_mean_" + label, format_full(mean));
      row("point_to_plane_rms_" + label, format_full(rms));
    };
    for (int b = 0; b < kBins; ++b) {
      emit(std::to_string(5 * b) + "_" + std::to_string(5 * (b + 1)), bins[b]);
    }
    emit("all", all);
  }
  write_file_atomic(a.out, csv);

  if (!a.dump_points.empty()) {
    std::string dump =
        "point,scan_id,source_row,x,y,z,neighbors,lambda1,lambda2,lambda3,"
        "gamma,sigma,mask,loss_min_eigenvalue,loss_trace\n";
    for (std::size_t i = 0; i < map.size(); ++i) {
      const LocalStats& st = map.stats[i];
      const double l1 = st.available
                            ? point_loss(st, LossKind::MinEigenvalue)
                            : std::numeric_limits<double>::quiet_NaN();
      const double lt = st.available
                            ? point_loss(st, LossKind::Trace)
                            : std::numeric_limits<double>::quiet_NaN();
      dump += std::to_string(i) + "," + ds.scan_ids[map.scan_ids[i]] + "," +
              std::to_string(map.source_index[i]) + "," +
              format_full(map.positions[i].x()) + "," +
              format_full(map.positions[i].y()) + "," +
              format_full(map.positions[i].z()) + "," +
              std::to_string(st.neighbor_count) + "," +
              format_full(st.eigenvalues[0]) + "," +
              format_full(st.eigenvalues[1]) + "," +
              format_full(st.eigenvalues[2]) + "," + format_full(st.gamma) +
              "," + format_full(st.sigma) + "," +
              std::to_string(static_cast<int>(map.mask[i])) + "," +
              format_full(l1) + "," + format_full(lt) + "\n";
    }
    write_file_atomic(a.dump_points, dump);
  }

  std::cout << "selected " << selected << "/" << map.size()
            << " points; min-eigenvalue loss " << format_full(loss_min_eig)
            << ", trace loss " << format_full(loss_trace) << "\n";
}

// ------------------------------------------------------------------- board

struct BoardArgs {
  std::string gt_model;
  std::string learned_model;
  std::string distances = "5.3,8.6";
  std::string angles = "0:85:5";
  std::string out;
};

void run_board(const BoardArgs& a) {
  const BiasModel gt = load_model(a.gt_model);
  const BiasModel learned = load_model(a.learned_model);
  const std::vector<double> distances =
      parse_number_list(a.distances, "--distances");
  const std::vector<double> angles = parse_sweep(a.angles, "--angles");

  const std::vector<BoardCurvePoint> curve =
      board_experiment(distances, angles, gt, learned);

  std::string csv = "distance,angle_deg,uncorrected,corrected,samples\n";
  for (const BoardCurvePoint& p : curve) {
    csv += format_full(p.distance) + "," + format_full(p.angle_deg) + "," +
           format_full(p.uncorrected) + "," + format_full(p.corrected) + "," +
           std::to_string(p.samples) + "\n";
  }
  write_file_atomic(a.out, csv);
  std::cout << "wrote " << curve.size() << " curve points to " << a.out
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised lidar depth-bias calibration"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
  simulate->add_option("--scene", sim.scene, "corridor | board")
      ->required()
      ->check(CLI::IsMember({"corridor", "board"}));
  simulate->add_option("--out", sim.out, "output directory")->required();
  simulate->add_option("--bias-kind", sim.bias_kind,
                       "polynomial | scaled_polynomial");
  simulate->add_option("--w1", sim.w1, "injected bias weight w1");
  simulate->add_option("--w2", sim.w2, "injected bias weight w2");
  simulate->add_option("--noise-std", sim.noise_std,
                       "Gaussian depth noise [m]");
  simulate->add_option("--pose-noise-t", sim.pose_noise_t,
                       "pose translation noise std [m]");
  simulate->add_option("--pose-noise-r", sim.pose_noise_r,
                       "pose rotation noise std [deg]");
  simulate->add_option("--seed", sim.seed, "random seed");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a bias model");
  train_cmd->add_option("--data", tr.data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", tr.config, "configuration file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "output model file")->required();
  train_cmd->add_option("--loss", tr.loss, "min_eig | trace");
  train_cmd->add_option("--pose-mode", tr.pose_mode,
                        "frozen | per_scan | shared");

  CorrectArgs co;
  CLI::App* correct = app.add_subcommand("correct", "apply a bias model");
  correct->add_option("--data", co.data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  correct->add_option("--model", co.model, "bias model file")
      ->required()
      ->check(CLI::ExistingFile);
  correct->add_option("--out", co.out, "output directory")->required();
  correct->add_option("--config", co.config, "configuration file")
      ->check(CLI::ExistingFile);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "map-consistency metrics");
  eval_cmd->add_option("--data", ev.data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--model", ev.model, "bias model applied before scoring")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "metrics CSV path")->required();
  eval_cmd->add_option("--config", ev.config, "configuration file")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--dump-points", ev.dump_points,
                       "per-point stats CSV path");

  BoardArgs bo;
  CLI::App* board = app.add_subcommand("board", "bias curves across placements");
  board->add_option("--gt-model", bo.gt_model, "injected bias model file")
      ->required()
      ->check(CLI::ExistingFile);
  board
      ->add_option("--learned-model", bo.learned_model,
                   "correction model file")
      ->required()
      ->check(CLI::ExistingFile);
  board->add_option("--distances", bo.distances, "comma list [m]");
  board->add_option("--angles", bo.angles, "lo:hi:step or comma list [deg]");
  board->add_option("--out", bo.out, "curves CSV path")->required();

  std::string dump_out;
  CLI::App* dump = app.add_subcommand("dump-config",
                                      "write the default configuration");
  dump->add_option("--out", dump_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
    if (*simulate) run_simulate(sim);
    if (*train_cmd) run_train(tr);
    if (*correct) run_correct(co);
    if (*eval_cmd) run_eval(ev);
    if (*board) run_board(bo);
    if (*dump) {
      if (dump_out.empty()) {
        std::cout << format_run_config(default_run_config());
      } else {
        save_run_config(dump_out, default_run_config());
      }
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
