// Dataset loading and saving: per-scan PLY files named <scan_id>.ply, a
// poses.csv with unit quaternions, and (for synthetic data) per-scan
// ground-truth sidecars <scan_id>.gt.csv plus poses_gt.csv. Training
// consumes only the measured scans and poses; sidecars feed evaluation.
#pragma once

#include <string>
#include <vector>

#include "depthcal/depth_model.hpp"
#include "depthcal/geometry.hpp"
#include "depthcal/simulator.hpp"

namespace depthcal {

struct PoseTable {
  std::vector<std::string> ids;
  std::vector<RigidTransform> poses;
};

// CSV with header scan_id,tx,ty,tz,qx,qy,qz,qw; quaternions (x,y,z,w order)
// must be unit within 1e-3.
PoseTable load_poses_csv(const std::string& path);
void save_poses_csv(const std::string& path, const std::vector<std::string>& ids,
                    const std::vector<RigidTransform>& poses);

struct Dataset {
  std::vector<std::string> scan_ids;        // unique, sorted
  std::vector<ScanCloud> scans;             // sensor frame, v = 0
  std::vector<RigidTransform> poses;
  std::vector<std::size_t> dropped;         // per scan: points dropped at load
  bool has_ground_truth = false;
  std::vector<GroundTruth> truth;           // row-aligned with loaded scans
};

// Loads <id>.ply for every id in the poses file (sorted by id). Points with
// non-finite coordinates or range below d_min are dropped and counted;
// source_index keeps surviving points joinable with the sidecar rows.
// Ground truth is loaded when every scan has a sidecar.
Dataset load_dataset(const std::string& scan_dir, const std::string& poses_csv,
                     double d_min = 0.5);

// Writes a simulated dataset: NNN.ply + NNN.gt.csv per scan, poses.csv with
// the (possibly noisy) poses handed to training, and poses_gt.csv with the
// ground-truth poses.
void save_dataset(const std::string& dir,
                  const std::vector<SimulatedScan>& scans,
                  const std::vector<RigidTransform>& measured_poses,
                  const std::vector<RigidTransform>& true_poses);

}  // namespace depthcal
