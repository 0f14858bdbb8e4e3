#include "depthcal/depth_model.hpp"

#include <cmath>
#include <limits>

#include "depthcal/error.hpp"
#include "depthcal/io_util.hpp"

namespace depthcal {

std::string to_string(BiasKind kind) {
  return kind == BiasKind::Polynomial ? "polynomial" : "scaled_polynomial";
}

BiasKind bias_kind_from_string(const std::string& name) {
  if (name == "polynomial") return BiasKind::Polynomial;
  if (name == "scaled_polynomial") return BiasKind::ScaledPolynomial;
  throw FormatError("unknown bias model kind: '" + name + "'");
}

void ScanCloud::push_back(const Vec3& origin, const Vec3& direction,
                          double depth) {
  origins.push_back(origin);
  directions.push_back(direction);
  depths.push_back(depth);
  gamma.push_back(std::numeric_limits<double>::quiet_NaN());
  valid.push_back(1);
  source_index.push_back(static_cast<uint32_t>(source_index.size()));
}

void ScanCloud::check_consistent() const {
  const std::size_t n = depths.size();
  if (origins.size() != n || directions.size() != n || gamma.size() != n ||
      valid.size() != n || source_index.size() != n) {
    throw InvalidParameterError("ScanCloud: array lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(directions[i].norm() - 1.0) > 1e-9) {
      throw InvalidParameterError("ScanCloud: direction " + std::to_string(i) +
                                  " is not unit length");
    }
    if (!(depths[i] > 0.0)) {
      throw InvalidParameterError("ScanCloud: depth " + std::to_string(i) +
                                  " is not positive");
    }
  }
}

namespace {
void check_gamma_domain(double gamma) {
  if (!(gamma >= 0.0 && gamma <= kPi / 2.0 + 1e-12)) {
    throw DomainError("incidence angle " + std::to_string(gamma) +
                      " outside [0, pi/2]");
  }
}
}  // namespace

double eval_bias(const BiasModel& m, double depth, double gamma) {
  check_gamma_domain(gamma);
  const double g2 = gamma * gamma;
  const double poly = m.w.x() * g2 + m.w.y() * g2 * g2;
  return m.kind == BiasKind::Polynomial ? poly : depth * poly;
}

Vec2 d_bias_d_weights(const BiasModel& m, double depth, double gamma) {
  check_gamma_domain(gamma);
  const double g2 = gamma * gamma;
  Vec2 d(g2, g2 * g2);
  if (m.kind == BiasKind::ScaledPolynomial) d *= depth;
  return d;
}

double corrected_depth(const BiasModel& m, double depth, double gamma) {
  if (!std::isfinite(gamma)) return depth;
  return depth - eval_bias(m, depth, gamma);
}

CorrectionSummary correct_scan(ScanCloud& scan, const BiasModel& m) {
  CorrectionSummary summary;
  const std::size_t n = scan.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!scan.valid[i] || !std::isfinite(scan.gamma[i])) {
      ++summary.passed;
      continue;
    }
    const double corrected =
        scan.depths[i] - eval_bias(m, scan.depths[i], scan.gamma[i]);
    if (corrected <= 0.0) {
      scan.valid[i] = 0;
      ++summary.invalidated;
      continue;
    }
    scan.depths[i] = corrected;
    ++summary.corrected;
  }
  return summary;
}

Mat32 d_corrected_point_d_weights(const ScanCloud& scan, const BiasModel& m,
                                  std::size_t i) {
  if (!std::isfinite(scan.gamma[i])) return Mat32::Zero();
  const Vec2 deps = d_bias_d_weights(m, scan.depths[i], scan.gamma[i]);
  return -scan.directions[i] * deps.transpose();
}

void save_model(const BiasModel& m, const std::string& path) {
  std::string out;
  out += "kind = " + to_string(m.kind) + "\n";
  out += "w1 = " + format_full(m.w.x()) + "\n";
  out += "w2 = " + format_full(m.w.y()) + "\n";
  write_file_atomic(path, out);
}

BiasModel load_model(const std::string& path) {
  const auto kv = read_key_value_file(path);
  for (const auto& [key, value] : kv) {
    if (key != "kind" && key != "w1" && key != "w2") {
      throw FormatError(path + ": unknown model key '" + key + "'");
    }
  }
  BiasModel m;
  m.kind = bias_kind_from_string(require_key(kv, "kind", path));
  m.w.x() = parse_double(require_key(kv, "w1", path), path + ": w1");
  m.w.y() = parse_double(require_key(kv, "w2", path), path + ": w2");
  if (!m.w.allFinite()) throw FormatError(path + ": non-finite weights");
  return m;
}

}  // namespace depthcal
