#include "gravtrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "gravtrack/error.hpp"

namespace gravtrack {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

template <typename Ref>
Field number(std::string key, Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<PipelineConfig&>()))>;
  Field f;
  f.key = key;
  f.get = [ref](const PipelineConfig& c) {
    const T v = ref(const_cast<PipelineConfig&>(c));
    if constexpr (std::is_same_v<T, int>) {
      return std::to_string(v);
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(v);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      return v ? format_double(*v) : std::string("auto");
    } else {
      return v;
    }
  };
  f.set = [ref, key](PipelineConfig& c, std::string_view v) {
    T& dst = ref(c);
    if constexpr (std::is_same_v<T, int>) {
      dst = parse_int(key, v);
    } else if constexpr (std::is_same_v<T, double>) {
      dst = parse_double(key, v);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v == "auto") {
        dst.reset();
      } else {
        dst = parse_double(key, v);
      }
    } else {
      dst = std::string(v);
    }
  };
  return f;
}

#define GT_FIELD(key, expr) number(key, [](PipelineConfig& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      GT_FIELD("preprocess.log_gain", log_gain),
      GT_FIELD("preprocess.kuwahara.radius", kuwahara.radius),
      GT_FIELD("preprocess.kuwahara.sector_count", kuwahara.sector_count),
      GT_FIELD("preprocess.kuwahara.sharpness_q", kuwahara.sharpness_q),
      GT_FIELD("preprocess.kuwahara.tensor_smoothing_sigma", kuwahara.tensor_smoothing_sigma),
      GT_FIELD("preprocess.clahe.tile_size", clahe.tile_size),
      GT_FIELD("preprocess.clahe.clip_limit", clahe.clip_limit),
      GT_FIELD("gravity.radius", gravity_radius),
      GT_FIELD("gravity.softening_eps", softening_eps),
      GT_FIELD("integrator.tol", integrator.tol),
      GT_FIELD("integrator.h_init", integrator.h_init),
      GT_FIELD("integrator.h_min", integrator.h_min),
      GT_FIELD("integrator.h_max", integrator.h_max),
      GT_FIELD("integrator.max_steps", integrator.max_steps),
      GT_FIELD("integrator.stagnation_tol", integrator.stagnation_tol),
      GT_FIELD("basins.min_area", basins_min_area),
      GT_FIELD("seg.contrast_delta", seg.contrast_delta),
      GT_FIELD("seg.cv_iterations", seg.cv_iterations),
      GT_FIELD("seg.cv_mu", seg.cv_smoothness_mu),
      GT_FIELD("seg.h_maxima_h", seg.h_maxima_h),
      GT_FIELD("seg.min_seed_separation", seg.min_seed_separation),
      GT_FIELD("seg.cv_margin", seg.cv_margin),
      GT_FIELD("seg.min_cell_area", seg.min_cell_area),
      GT_FIELD("track.match_min_fraction", match_min_fraction),
      GT_FIELD("track.contrast_accept_ratio", contrast_accept_ratio),
      GT_FIELD("track.filter_lower", filter_lower),
      GT_FIELD("track.filter_upper", filter_upper),
      GT_FIELD("track.min_contrast", min_contrast),
      GT_FIELD("track.max_recovery_chain", max_recovery_chain),
      GT_FIELD("io.input", input),
      GT_FIELD("io.output", output),
      GT_FIELD("run.threads", threads),
  };
  return table;
}

#undef GT_FIELD

template <typename F>
void checked(std::string_view group, F&& fn) {
  try {
    fn();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string(group) + ": " + e.what());
  }
}

}  // namespace

double PipelineConfig::min_area() const {
  if (basins_min_area) return *basins_min_area;
  const double r = 0.5 * gravity_radius;
  return std::numbers::pi * r * r;
}

TrackParams PipelineConfig::track_params() const {
  TrackParams p;
  p.match_min_fraction = match_min_fraction;
  p.contrast_accept_ratio = contrast_accept_ratio;
  p.filter_lower = filter_lower.value_or(min_area() / 4.0);
  p.filter_upper = filter_upper.value_or(min_area());
  p.min_contrast = min_contrast;
  p.max_recovery_chain = max_recovery_chain;
  return p;
}

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

void validate(const PipelineConfig& cfg) {
  if (!(cfg.log_gain > 0.0)) throw ConfigError("preprocess.log_gain must be > 0");
  checked("preprocess.kuwahara", [&] { validate(cfg.kuwahara); });
  checked("preprocess.clahe", [&] { validate(cfg.clahe); });
  if (cfg.gravity_radius < 1) throw ConfigError("gravity.radius must be >= 1");
  if (!(cfg.softening_eps > 0.0)) throw ConfigError("gravity.softening_eps must be > 0");
  checked("integrator", [&] { validate(cfg.integrator); });
  if (!(cfg.min_area() >= 0.0)) throw ConfigError("basins.min_area must be >= 0");
  checked("seg", [&] { validate(cfg.seg); });
  checked("track", [&] { validate(cfg.track_params()); });
  if (cfg.threads < 0) throw ConfigError("run.threads must be >= 0");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": repeated key '" + std::string(key) + "'");
    }
    it->set(cfg, value);
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace gravtrack
