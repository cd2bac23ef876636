#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "gravtrack/config.hpp"
#include "gravtrack/error.hpp"
#include "gravtrack/eval.hpp"
#include "gravtrack/gravity.hpp"
#include "gravtrack/io.hpp"
#include "gravtrack/pipeline.hpp"
#include "gravtrack/synth.hpp"

namespace fs = std::filesystem;
using namespace gravtrack;

namespace {

constexpr const char* kVersion = "gravtrack 1.0.0";

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Common {
  std::string config;
  std::string input;
  std::string output;
  int threads = -1;
};

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (!c.input.empty()) cfg.input = c.input;
  if (!c.output.empty()) cfg.output = c.output;
  if (c.threads >= 0) cfg.threads = c.threads;
  validate(cfg);
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

int cmd_run(const Common& c, bool overlay) {
  const PipelineConfig cfg = resolve(c);
  if (cfg.input.empty() || cfg.output.empty()) {
    throw ConfigError("run needs an input and an output directory (--input/--output or io.* keys)");
  }
  RunOptions opts;
  opts.overlay = overlay;
  const RunSummary s = run_pipeline(cfg, opts);
  std::printf("%zu frames, %zu tracklets (%zu recovered, %zu interpolated, %zu mitoses)\n",
              s.frames, s.tracklets, s.tracking.recovered, s.tracking.interpolated,
              s.tracking.mitoses);
  std::printf("wrote %s\n", cfg.output.c_str());
  return kOk;
}

int cmd_synth(const Common& c, SynthSpec spec, const std::vector<int>& mitosis_frames,
              std::optional<std::uint64_t> seed) {
  if (c.output.empty()) throw ConfigError("synth needs --output");
  if (seed) spec.seed = *seed;
  for (const int f : mitosis_frames) spec.mitoses.push_back({f, -1});
  const SynthSequence seq = synthesize(spec);
  write_synth(c.output, seq);
  std::printf("wrote %zu frames and %zu tracks to %s\n", seq.frames.size(), seq.tracks.size(),
              c.output.c_str());
  return kOk;
}

int cmd_eval(const Common& c, const std::string& gt) {
  if (c.input.empty() || gt.empty()) throw ConfigError("eval needs --input and --gt");
  const std::string text = report_json(evaluate_dirs(c.input, gt));
  if (c.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(c.output, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write " + c.output);
  }
  return kOk;
}

int cmd_dump(const Common& c) {
  const PipelineConfig cfg = resolve(c);
  if (cfg.input.empty() || cfg.output.empty()) throw ConfigError("dump-field needs --input and --output");
  fs::path frame = cfg.input;
  if (fs::is_directory(frame)) {
    const SequenceMeta meta = list_frames(frame);
    if (meta.frame_count == 0) throw DataError("no frames in " + frame.string());
    frame = meta.frame_paths.front();
  }
  const FrameDetection d = detect_frame(load_frame(frame), cfg);
  const PotentialField2D phi =
      potential_field(d.smoothed, build_kernels(cfg.gravity_radius, cfg.softening_eps));
  const fs::path out = cfg.output;
  fs::create_directories(out);
  save_image16(out / "phi.tif", normalize(phi.phi));
  save_image16(out / "fx.tif", normalize(d.field.fx));
  save_image16(out / "fy.tif", normalize(d.field.fy));
  save_labels(out / "basins.tif", d.basins.labels);
  std::printf("%s: %zu critical points, %zu basins, %zu seeds\n", frame.string().c_str(),
              d.critical_points.size(), d.basins.minima.size(), d.seeds.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gravitational force-field cell detection and tracking"};
  app.require_subcommand(1);
  Common common;
  bool overlay = false;
  SynthSpec spec;
  std::vector<int> mitosis_frames;
  std::optional<std::uint64_t> seed;
  std::string gt;

  auto* run = app.add_subcommand("run", "Segment and track a frame sequence");
  run->add_option("--config", common.config, "Config file")->check(CLI::ExistingFile);
  run->add_option("--input", common.input, "Frame directory");
  run->add_option("--output", common.output, "Result directory");
  run->add_option("--threads", common.threads, "Worker threads (0: OpenMP default)")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--overlay", overlay, "Also write overlayNNN.png");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  synth->add_option("--output", common.output, "Destination directory")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--frames", spec.frames, "Frame count")->check(CLI::PositiveNumber);
  synth->add_option("--width", spec.width, "Frame width")->check(CLI::PositiveNumber);
  synth->add_option("--height", spec.height, "Frame height")->check(CLI::PositiveNumber);
  synth->add_option("--blobs", spec.blob_count, "Blob count")->check(CLI::NonNegativeNumber);
  synth->add_option("--radius-min", spec.radius_min, "Smallest half-maximum radius");
  synth->add_option("--radius-max", spec.radius_max, "Largest half-maximum radius");
  synth->add_option("--speed", spec.speed, "Pixels per frame");
  synth->add_option("--noise", spec.noise_sigma, "Noise standard deviation");
  synth->add_option("--mitosis", mitosis_frames, "Frame at which one blob divides (repeatable)");

  auto* eval = app.add_subcommand("eval", "Score predicted masks and tracks against ground truth");
  eval->add_option("--input", common.input, "Prediction directory")->required();
  eval->add_option("--gt", gt, "Ground-truth directory")->required();
  eval->add_option("--output", common.output, "Report file (default: stdout)");

  auto* dump = app.add_subcommand("dump-field", "Write potential, force and basin maps of one frame");
  dump->add_option("--config", common.config, "Config file")->check(CLI::ExistingFile);
  dump->add_option("--input", common.input, "Frame file or directory (first frame)");
  dump->add_option("--output", common.output, "Destination directory");
  dump->add_option("--threads", common.threads, "Worker threads")->check(CLI::NonNegativeNumber);

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(common, overlay);
    if (*synth) return cmd_synth(common, spec, mitosis_frames, seed);
    if (*eval) return cmd_eval(common, gt);
    if (*dump) return cmd_dump(common);
    if (*version) {
      std::printf("%s\n", kVersion);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "parameter error: %s\n", e.what());
    return kUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
  return kInternal;
}
