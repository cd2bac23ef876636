#include "gravtrack/pipeline.hpp"

#include <omp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>

#include <json.hpp>

#include "gravtrack/error.hpp"
#include "gravtrack/io.hpp"
#include "gravtrack/preprocess.hpp"
#include "gravtrack/track_io.hpp"

namespace gravtrack {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Re-raises the active exception with the stage and frame prepended, keeping its type.
[[noreturn]] void rethrow_in_stage(const std::string& stage, int frame) {
  const std::string where =
      frame >= 0 ? stage + " failed at frame " + std::to_string(frame) + ": " : stage + " failed: ";
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(where + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError(where + e.what());
  } catch (const std::exception& e) {
    throw Error(where + e.what());
  }
}

template <typename F>
auto in_stage(const std::string& stage, int frame, F&& fn) {
  try {
    return fn();
  } catch (...) {
    rethrow_in_stage(stage, frame);
  }
}

FrameDetection detect_with(const Image2D& raw, const PipelineConfig& cfg,
                           const GravityKernelSet& kernels) {
  FrameDetection d;
  auto t0 = Clock::now();
  d.brightened = log_brighten(normalize(raw), cfg.log_gain);
  d.smoothed = kuwahara_anisotropic(d.brightened, cfg.kuwahara);
  d.times.preprocess = seconds_since(t0);

  t0 = Clock::now();
  d.field = force_field(d.smoothed, kernels);
  d.critical_points = find_critical_points(d.field, cfg.integrator.stagnation_tol);
  d.times.detection = seconds_since(t0);

  t0 = Clock::now();
  d.basins = extract_basins(d.field, d.critical_points, cfg.integrator);
  for (const std::int32_t l : significant_minima(d.basins, cfg.min_area())) {
    d.seeds.push_back(d.basins.minima[static_cast<std::size_t>(l - 1)]);
  }
  d.times.basins = seconds_since(t0);
  return d;
}

void accumulate(StageTimes& total, const StageTimes& f) {
  total.preprocess += f.preprocess;
  total.detection += f.detection;
  total.basins += f.basins;
  total.segmentation += f.segmentation;
  total.max_preprocess = std::max(total.max_preprocess, f.preprocess);
  total.max_detection = std::max(total.max_detection, f.detection);
  total.max_basins = std::max(total.max_basins, f.basins);
  total.max_segmentation = std::max(total.max_segmentation, f.segmentation);
}

std::string frame_name(const char* prefix, std::size_t t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, t, ext);
  return buf;
}

// 3x5 digit glyphs, one row per 3-bit group, most significant bit on the left.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits{{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

std::array<std::uint8_t, 3> label_colour(std::int32_t label) {
  std::uint32_t h = static_cast<std::uint32_t>(label) * 2654435761u;
  h ^= h >> 15;
  return {static_cast<std::uint8_t>(96 + (h & 0x9F)), static_cast<std::uint8_t>(96 + ((h >> 8) & 0x9F)),
          static_cast<std::uint8_t>(96 + ((h >> 16) & 0x9F))};
}

}  // namespace

FrameDetection detect_frame(const Image2D& raw, const PipelineConfig& cfg) {
  validate(cfg);
  return detect_with(raw, cfg, build_kernels(cfg.gravity_radius, cfg.softening_eps));
}

SequenceResult process_sequence(const std::vector<Image2D>& raw_frames, const PipelineConfig& cfg,
                                const SeedFilter& seed_filter) {
  validate(cfg);
  if (raw_frames.empty()) throw DataError("no frames");
  for (const Image2D& f : raw_frames) {
    if (!f.same_shape(raw_frames.front())) throw DataError("frames differ in size");
  }
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  const GravityKernelSet kernels =
      in_stage("gravity", -1, [&] { return build_kernels(cfg.gravity_radius, cfg.softening_eps); });

  SequenceResult out;
  const int n = static_cast<int>(raw_frames.size());
  out.frames.resize(raw_frames.size());
  std::vector<StageTimes> per_frame(raw_frames.size());
  std::vector<std::exception_ptr> errors(raw_frames.size());

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < n; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    try {
      FrameDetection d = in_stage("detection", t, [&] { return detect_with(raw_frames[ti], cfg, kernels); });
      if (seed_filter) seed_filter(t, d.seeds);
      const auto t0 = Clock::now();
      TrackingFrame& tf = out.frames[ti];
      in_stage("segmentation", t, [&] {
        tf.enhanced = enhance_for_segmentation(d.brightened, cfg.clahe);
        tf.cells = segment_enhanced(tf.enhanced, d.seeds, cfg.seg);
        return 0;
      });
      d.times.segmentation = seconds_since(t0);
      tf.basins = std::move(d.basins);
      per_frame[ti] = d.times;
    } catch (...) {
      errors[ti] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const StageTimes& f : per_frame) accumulate(out.times, f);

  auto t0 = Clock::now();
  out.raw_graph = in_stage("tracking", -1, [&] {
    return track_sequence(out.frames, cfg.track_params(), cfg.seg, &out.tracking);
  });
  out.times.tracking = seconds_since(t0);

  t0 = Clock::now();
  const TrackParams tp = cfg.track_params();
  out.graph = in_stage("filtering", -1, [&] {
    return filter_tracklets(out.raw_graph, tp.filter_lower, tp.filter_upper, tp.min_contrast);
  });
  out.masks = render_tracks(out.graph, out.frames);
  out.times.filtering = seconds_since(t0);
  return out;
}

std::string timing_json(const StageTimes& t, std::size_t frames) {
  nlohmann::ordered_json j;
  j["frames"] = frames;
  j["seconds"] = {{"load", t.load},
                  {"preprocess", t.preprocess},
                  {"detection", t.detection},
                  {"basins", t.basins},
                  {"segmentation", t.segmentation},
                  {"tracking", t.tracking},
                  {"filtering", t.filtering},
                  {"write", t.write}};
  j["max_frame_seconds"] = {{"preprocess", t.max_preprocess},
                            {"detection", t.max_detection},
                            {"basins", t.max_basins},
                            {"segmentation", t.max_segmentation}};
  return j.dump(2) + "\n";
}

std::vector<std::uint8_t> render_overlay(const Image2D& frame, const LabelMap& labels) {
  if (!frame.same_shape(labels)) throw DataError("overlay frame and labels differ in size");
  const int w = frame.width();
  const int h = frame.height();
  const Image2D gray = normalize(frame);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  auto put = [&](int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t i = labels.index(x, y) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * gray(x, y)));
      put(x, y, {v, v, v});
    }
  }
  const auto k = static_cast<std::size_t>(max_label(labels));
  std::vector<Vec2> sums(k + 1);
  std::vector<std::size_t> counts(k + 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t l = labels(x, y);
      if (l <= 0) continue;
      sums[static_cast<std::size_t>(l)] += Vec2{static_cast<double>(x), static_cast<double>(y)};
      ++counts[static_cast<std::size_t>(l)];
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || labels(x - 1, y) != l ||
                        labels(x + 1, y) != l || labels(x, y - 1) != l || labels(x, y + 1) != l;
      if (edge) put(x, y, label_colour(l));
    }
  }
  for (std::size_t l = 1; l <= k; ++l) {
    if (counts[l] == 0) continue;
    const std::string text = std::to_string(l);
    const Vec2 c = sums[l] * (1.0 / static_cast<double>(counts[l]));
    const int x0 = static_cast<int>(std::lround(c.x)) - 2 * static_cast<int>(text.size());
    const int y0 = static_cast<int>(std::lround(c.y)) - 2;
    for (std::size_t d = 0; d < text.size(); ++d) {
      const auto& glyph = kDigits[static_cast<std::size_t>(text[d] - '0')];
      for (int gy = 0; gy < 5; ++gy) {
        for (int gx = 0; gx < 3; ++gx) {
          if (glyph[static_cast<std::size_t>(gy)] & (4 >> gx)) {
            put(x0 + static_cast<int>(d) * 4 + gx, y0 + gy, {255, 255, 0});
          }
        }
      }
    }
  }
  return rgb;
}

RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  if (cfg.input.empty()) throw ConfigError("io.input is not set");
  if (cfg.output.empty()) throw ConfigError("io.output is not set");
  const fs::path input(cfg.input);
  const fs::path output(cfg.output);

  auto t0 = Clock::now();
  const SequenceMeta meta = in_stage("load", -1, [&] { return list_frames(input); });
  if (meta.frame_count == 0) throw DataError("no frames in " + input.string());
  std::vector<Image2D> raw(meta.frame_count);
  for (std::size_t t = 0; t < meta.frame_count; ++t) {
    raw[t] = in_stage("load", static_cast<int>(t), [&] { return load_frame(meta.frame_paths[t]); });
  }
  const double load_time = seconds_since(t0);

  SequenceResult result = process_sequence(raw, cfg, opts.seed_filter);
  result.times.load = load_time;

  t0 = Clock::now();
  const fs::path parent = output.has_parent_path() ? output.parent_path() : fs::path(".");
  std::mt19937_64 rng(std::random_device{}());
  const fs::path tmp = parent / (output.filename().string() + ".tmp-" + std::to_string(rng() % 1000000000));
  try {
    fs::create_directories(tmp);
    for (std::size_t t = 0; t < result.masks.size(); ++t) {
      save_labels(tmp / frame_name("mask", t, ".tif"), result.masks[t]);
      if (opts.overlay) {
        const LabelMap& m = result.masks[t];
        save_png_rgb(tmp / frame_name("overlay", t, ".png"), m.width(), m.height(),
                     render_overlay(raw[t], m));
      }
    }
    write_tracks(tmp / "res_track.txt", result.graph.records());
    result.times.write = seconds_since(t0);
    {
      std::ofstream timing(tmp / "timing.json", std::ios::binary);
      timing << timing_json(result.times, meta.frame_count);
      if (!timing) throw DataError("cannot write timing.json");
    }
    if (fs::exists(output)) {
      const fs::path old = parent / (output.filename().string() + ".old-" + std::to_string(rng() % 1000000000));
      fs::rename(output, old);
      fs::rename(tmp, output);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, output);
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    rethrow_in_stage("write", -1);
  }

  RunSummary s;
  s.frames = meta.frame_count;
  s.tracklets = result.graph.tracklets.size();
  s.tracking = result.tracking;
  s.times = result.times;
  return s;
}

}  // namespace gravtrack
