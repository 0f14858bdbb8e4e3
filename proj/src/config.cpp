#include "depthcal/config.hpp"

#include <map>
#include <set>
#include <string>

#include "depthcal/error.hpp"
#include "depthcal/io_util.hpp"

namespace depthcal {

namespace {

std::string join_ids(const std::vector<uint32_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<uint32_t> parse_ids(const std::string& text,
                                const std::string& ctx) {
  std::vector<uint32_t> ids;
  if (trim(text).empty()) return ids;
  for (const std::string& part : split(text, ',')) {
    const long v = parse_long(trim(part), ctx);
    if (v < 0) throw FormatError(ctx + ": negative scan index");
    ids.push_back(static_cast<uint32_t>(v));
  }
  return ids;
}

// One row of the config schema: how to print the key and how to absorb a
// parsed value back into the struct.
struct Key {
  std::string name;
  std::string comment;
  std::string (*print)(const RunConfig&);
  void (*parse)(RunConfig&, const std::string& value, const std::string& ctx);
};

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = {
      {"model.kind", "polynomial | scaled_polynomial",
       [](const RunConfig& c) { return to_string(c.model_kind); },
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.model_kind = bias_kind_from_string(v);
       }},
      {"data.d_min", "loader minimum depth [m]",
       [](const RunConfig& c) { return format_full(c.d_min); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.d_min = parse_double(v, ctx);
       }},
      {"filter.radius", "neighborhood radius [m]",
       [](const RunConfig& c) { return format_full(c.filter.radius); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.radius = parse_double(v, ctx);
       }},
      {"filter.n_min", "minimum neighborhood size",
       [](const RunConfig& c) { return std::to_string(c.filter.n_min); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.n_min = static_cast<std::size_t>(parse_long(v, ctx));
       }},
      {"filter.c0", "planarity: max lambda1/lambda2",
       [](const RunConfig& c) { return format_full(c.filter.c0); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.c0 = parse_double(v, ctx);
       }},
      {"filter.c1", "spread: min lambda2/lambda3",
       [](const RunConfig& c) { return format_full(c.filter.c1); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.c1 = parse_double(v, ctx);
       }},
      {"filter.c2", "spread: max lambda2/lambda3",
       [](const RunConfig& c) { return format_full(c.filter.c2); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.c2 = parse_double(v, ctx);
       }},
      {"filter.sigma_min", "minimum view-point dispersion [m^2]",
       [](const RunConfig& c) { return format_full(c.filter.sigma_min); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.filter.sigma_min = parse_double(v, ctx);
       }},
      {"optimize.iterations", "gradient steps (no early stopping)",
       [](const RunConfig& c) { return std::to_string(c.optimize.iterations); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.iterations = static_cast<int>(parse_long(v, ctx));
       }},
      {"optimize.loss", "min_eigenvalue | trace",
       [](const RunConfig& c) { return to_string(c.optimize.loss); },
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.optimize.loss = loss_kind_from_string(v);
       }},
      {"optimize.pose_mode", "frozen | per_scan | shared",
       [](const RunConfig& c) { return to_string(c.optimize.pose_mode); },
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.optimize.pose_mode = pose_mode_from_string(v);
       }},
      {"optimize.update", "plain | momentum | adaptive_moments",
       [](const RunConfig& c) { return to_string(c.optimize.update); },
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.optimize.update = update_rule_from_string(v);
       }},
      {"optimize.weight_step", "step size for (w1, w2)",
       [](const RunConfig& c) { return format_full(c.optimize.weight_step); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.weight_step = parse_double(v, ctx);
       }},
      {"optimize.pose_step", "step size for correction translations",
       [](const RunConfig& c) { return format_full(c.optimize.pose_step); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.pose_step = parse_double(v, ctx);
       }},
      {"optimize.rotation_scale", "pose_step multiplier for rotations",
       [](const RunConfig& c) {
         return format_full(c.optimize.rotation_scale);
       },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.rotation_scale = parse_double(v, ctx);
       }},
      {"optimize.momentum", "momentum decay / adaptive_moments beta1",
       [](const RunConfig& c) { return format_full(c.optimize.momentum); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.momentum = parse_double(v, ctx);
       }},
      {"optimize.beta2", "adaptive_moments second-moment decay",
       [](const RunConfig& c) { return format_full(c.optimize.beta2); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.beta2 = parse_double(v, ctx);
       }},
      {"optimize.epsilon", "adaptive_moments denominator guard",
       [](const RunConfig& c) { return format_full(c.optimize.epsilon); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.epsilon = parse_double(v, ctx);
       }},
      {"optimize.learn_bias", "false keeps the initial weights frozen",
       [](const RunConfig& c) {
         return std::string(c.optimize.learn_bias ? "true" : "false");
       },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.learn_bias = parse_bool(v, ctx);
       }},
      {"optimize.validation_scans",
       "comma-separated scan indices; empty = last quarter of scans",
       [](const RunConfig& c) { return join_ids(c.optimize.validation_scans); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.validation_scans = parse_ids(v, ctx);
       }},
      {"optimize.seed", "recorded for reproducibility bookkeeping",
       [](const RunConfig& c) { return std::to_string(c.optimize.seed); },
       [](RunConfig& c, const std::string& v, const std::string& ctx) {
         c.optimize.seed = static_cast<uint64_t>(parse_long(v, ctx));
       }},
  };
  return keys;
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

std::string format_run_config(const RunConfig& cfg) {
  const RunConfig defaults;
  std::string out;
  for (const Key& key : schema()) {
    out += key.name + " = " + key.print(cfg) + "  # " + key.comment +
           " (default " + key.print(defaults) + ")\n";
  }
  return out;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  write_file_atomic(path, format_run_config(cfg));
}

RunConfig load_run_config(const std::string& path) {
  const std::map<std::string, std::string> kv = read_key_value_file(path);

  std::set<std::string> known;
  for (const Key& key : schema()) known.insert(key.name);
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!known.count(key)) {
      throw FormatError(path + ": unknown key '" + key + "'");
    }
  }

  RunConfig cfg;
  for (const Key& key : schema()) {
    const auto it = kv.find(key.name);
    if (it == kv.end()) continue;
    key.parse(cfg, it->second, path + ": " + key.name);
  }

  if (cfg.d_min < 0.0) throw ConfigError(path + ": data.d_min must be >= 0");
  cfg.filter.validate();
  cfg.optimize.validate();
  return cfg;
}

}  // namespace depthcal
