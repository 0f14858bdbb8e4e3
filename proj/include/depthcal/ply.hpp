// Minimal PLY point-cloud I/O.
//
// The reader accepts ASCII and binary_little_endian files whose vertex
// element carries at least x, y, z as float or double; extra scalar vertex
// properties and trailing elements are skipped. The writer emits
// binary_little_endian with double x, y, z.
#pragma once

#include <string>
#include <vector>

#include "depthcal/types.hpp"

namespace depthcal {

std::vector<Vec3> load_ply_points(const std::string& path);

void save_ply_points(const std::string& path, const std::vector<Vec3>& points);

}  // namespace depthcal
