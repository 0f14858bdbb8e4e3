#include "depthcal/dataset.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "depthcal/error.hpp"
#include "depthcal/io_util.hpp"
#include "depthcal/ply.hpp"

namespace depthcal {

namespace {
constexpr char kPosesHeader[] = "scan_id,tx,ty,tz,qx,qy,qz,qw";
constexpr char kSidecarHeader[] = "row,d_true,gamma_true,patch_id";
}  // namespace

PoseTable load_poses_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != kPosesHeader) {
    throw FormatError(path + ": expected header '" + kPosesHeader + "'");
  }

  PoseTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(trim(line), ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (f.size() != 8) throw FormatError(ctx + ": expected 8 fields");

    const std::string id = trim(f[0]);
    if (id.empty()) throw FormatError(ctx + ": empty scan id");

    const double tx = parse_double(trim(f[1]), ctx);
    const double ty = parse_double(trim(f[2]), ctx);
    const double tz = parse_double(trim(f[3]), ctx);
    const double qx = parse_double(trim(f[4]), ctx);
    const double qy = parse_double(trim(f[5]), ctx);
    const double qz = parse_double(trim(f[6]), ctx);
    const double qw = parse_double(trim(f[7]), ctx);

    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (std::abs(norm - 1.0) > 1e-3) {
      throw FormatError(ctx + ": quaternion norm " + format_full(norm) +
                        " deviates from 1 by more than 1e-3");
    }
    const Eigen::Quaterniond q =
        Eigen::Quaterniond(qw, qx, qy, qz).normalized();

    RigidTransform pose;
    pose.rotation = q.toRotationMatrix();
    pose.translation = Vec3(tx, ty, tz);
    table.ids.push_back(id);
    table.poses.push_back(pose);
  }
  return table;
}

void save_poses_csv(const std::string& path, const std::vector<std::string>& ids,
                    const std::vector<RigidTransform>& poses) {
  if (ids.size() != poses.size()) {
    throw InvalidParameterError("save_poses_csv: id/pose counts differ");
  }
  std::string out = std::string(kPosesHeader) + "\n";
  for (std::size_t k = 0; k < ids.size(); ++k) {
    Eigen::Quaterniond q(poses[k].rotation);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // canonical sign
    out += ids[k] + "," + format_full(poses[k].translation.x()) + "," +
           format_full(poses[k].translation.y()) + "," +
           format_full(poses[k].translation.z()) + "," + format_full(q.x()) +
           "," + format_full(q.y()) + "," + format_full(q.z()) + "," +
           format_full(q.w()) + "\n";
  }
  write_file_atomic(path, out);
}

namespace {

GroundTruth load_sidecar(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != kSidecarHeader) {
    throw FormatError(path + ": expected header '" + kSidecarHeader + "'");
  }
  GroundTruth truth;
  std::size_t lineno = 1;
  std::size_t expected_row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(trim(line), ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (f.size() != 4) throw FormatError(ctx + ": expected 4 fields");
    const long row = parse_long(trim(f[0]), ctx);
    if (row != static_cast<long>(expected_row)) {
      throw FormatError(ctx + ": rows must be consecutive from 0");
    }
    ++expected_row;
    truth.d_true.push_back(parse_double(trim(f[1]), ctx));
    truth.gamma_true.push_back(parse_double(trim(f[2]), ctx));
    truth.patch_id.push_back(
        static_cast<uint32_t>(parse_long(trim(f[3]), ctx)));
  }
  return truth;
}

void save_sidecar(const std::string& path, const GroundTruth& truth) {
  std::string out = std::string(kSidecarHeader) + "\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out += std::to_string(i) + "," + format_full(truth.d_true[i]) + "," +
           format_full(truth.gamma_true[i]) + "," +
           std::to_string(truth.patch_id[i]) + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace

Dataset load_dataset(const std::string& scan_dir, const std::string& poses_csv,
                     double d_min) {
  if (d_min < 0.0) throw ConfigError("d_min must be >= 0");
  PoseTable table = load_poses_csv(poses_csv);
  if (table.ids.size() < 2) {
    throw ConfigError(poses_csv +
                      ": map consistency needs at least two scans, got " +
                      std::to_string(table.ids.size()));
  }

  // Sort rows by id; ids must be unique.
  std::vector<std::size_t> order(table.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.ids[a] < table.ids[b];
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (table.ids[order[i - 1]] == table.ids[order[i]]) {
      throw FormatError(poses_csv + ": duplicate scan id '" +
                        table.ids[order[i]] + "'");
    }
  }

  Dataset ds;
  std::size_t sidecars = 0;
  for (std::size_t idx : order) {
    const std::string& id = table.ids[idx];
    const std::string scan_path = scan_dir + "/" + id + ".ply";
    if (!std::filesystem::exists(scan_path)) {
      throw FormatError("missing scan file for id '" + id + "': " + scan_path);
    }
    const std::vector<Vec3> raw = load_ply_points(scan_path);

    ScanCloud scan;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double d = raw[i].norm();
      if (!raw[i].allFinite() || d < d_min || d == 0.0) {
        ++dropped;
        continue;
      }
      scan.push_back(Vec3::Zero(), raw[i] / d, d);
      scan.source_index.back() = static_cast<uint32_t>(i);
    }

    ds.scan_ids.push_back(id);
    ds.poses.push_back(table.poses[idx]);
    ds.dropped.push_back(dropped);

    const std::string sidecar_path = scan_dir + "/" + id + ".gt.csv";
    if (std::filesystem::exists(sidecar_path)) {
      const GroundTruth full = load_sidecar(sidecar_path);
      if (full.size() != raw.size()) {
        throw FormatError(sidecar_path + ": " + std::to_string(full.size()) +
                          " rows for " + std::to_string(raw.size()) +
                          " scan points");
      }
      GroundTruth aligned;
      for (uint32_t src : scan.source_index) {
        aligned.d_true.push_back(full.d_true[src]);
        aligned.gamma_true.push_back(full.gamma_true[src]);
        aligned.patch_id.push_back(full.patch_id[src]);
      }
      ds.truth.push_back(std::move(aligned));
      ++sidecars;
    } else {
      ds.truth.push_back(GroundTruth{});
    }
    ds.scans.push_back(std::move(scan));
  }

  if (sidecars != 0 && sidecars != ds.scans.size()) {
    throw FormatError(scan_dir +
                      ": ground-truth sidecars must cover all scans or none");
  }
  ds.has_ground_truth = sidecars == ds.scans.size();
  if (!ds.has_ground_truth) ds.truth.clear();
  return ds;
}

void save_dataset(const std::string& dir,
                  const std::vector<SimulatedScan>& scans,
                  const std::vector<RigidTransform>& measured_poses,
                  const std::vector<RigidTransform>& true_poses) {
  if (scans.size() != measured_poses.size() ||
      scans.size() != true_poses.size()) {
    throw InvalidParameterError("save_dataset: scan/pose counts differ");
  }
  std::filesystem::create_directories(dir);

  std::vector<std::string> ids;
  for (std::size_t k = 0; k < scans.size(); ++k) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03zu", k);
    ids.emplace_back(buf);

    std::vector<Vec3> points;
    points.reserve(scans[k].scan.size());
    for (std::size_t i = 0; i < scans[k].scan.size(); ++i) {
      points.push_back(scans[k].scan.point(i));
    }
    save_ply_points(dir + "/" + ids[k] + ".ply", points);
    save_sidecar(dir + "/" + ids[k] + ".gt.csv", scans[k].truth);
  }
  save_poses_csv(dir + "/poses.csv", ids, measured_poses);
  save_poses_csv(dir + "/poses_gt.csv", ids, true_poses);
}

}  // namespace depthcal
