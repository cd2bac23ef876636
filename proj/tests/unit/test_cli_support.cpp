#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "gravtrack/config.hpp"
#include "gravtrack/error.hpp"
#include "gravtrack/eval.hpp"
#include "gravtrack/io.hpp"
#include "gravtrack/pipeline.hpp"
#include "gravtrack/synth.hpp"

using namespace gravtrack;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gravtrack_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

LabelMap squares(int n, int side) {
  LabelMap m(64, 64, 0);
  for (int k = 0; k < n; ++k) {
    const int x0 = 2 + (k % 5) * 12, y0 = 2 + (k / 5) * 12;
    for (int y = y0; y < y0 + side; ++y) {
      for (int x = x0; x < x0 + side; ++x) m(x, y) = k + 1;
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config round trip") {
    PipelineConfig cfg;
    cfg.log_gain = 37.25;
    cfg.kuwahara.radius = 6;
    cfg.gravity_radius = 17;
    cfg.integrator.tol = 2.5e-4;
    cfg.basins_min_area = 123.456;
    cfg.seg.cv_smoothness_mu = 0.1 + 0.2;
    cfg.filter_upper = 99.0;
    cfg.input = "frames/in";
    cfg.output = "out dir";
    cfg.threads = 3;
    const std::string text = serialize_config(cfg);
    const PipelineConfig back = parse_config(text);
    CHECK(back == cfg);
    CHECK(serialize_config(back) == text);
    CHECK(back.seg.cv_smoothness_mu == cfg.seg.cv_smoothness_mu);
    CHECK(parse_config(serialize_config(PipelineConfig{})) == PipelineConfig{});
  }

  TEST_CASE("config dialect") {
    const PipelineConfig cfg = parse_config("# comment\n\n  gravity.radius = 12  \nbasins.min_area = auto\n");
    CHECK(cfg.gravity_radius == 12);
    CHECK_FALSE(cfg.basins_min_area.has_value());
    CHECK(cfg.min_area() == doctest::Approx(3.14159265358979 * 36.0));
    const TrackParams tp = cfg.track_params();
    CHECK(tp.filter_lower == doctest::Approx(cfg.min_area() / 4));
    CHECK(tp.filter_upper == doctest::Approx(cfg.min_area()));

    CHECK_THROWS_AS(parse_config("gravity.bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("gravity.radius = 3\ngravity.radius = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("gravity.radius = three\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("gravity.radius 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("gravity.radius = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("preprocess.clahe.clip_limit = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("track.filter_lower = 50\ntrack.filter_upper = 10\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/gravtrack.cfg"), ConfigError);
  }

  TEST_CASE("evaluation of a perfect prediction") {
    const std::vector<LabelMap> gt{squares(10, 8), squares(10, 8)};
    const std::vector<TrackRecord> tracks{{1, 0, 1, 0}, {2, 0, 1, 0}, {3, 0, 1, 0}, {4, 0, 1, 0}, {5, 0, 1, 0},
                                          {6, 0, 1, 0}, {7, 0, 1, 0}, {8, 0, 1, 0}, {9, 0, 1, 0}, {10, 0, 1, 0}};
    const EvalReport r = evaluate(gt, tracks, gt, tracks);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.track_purity == 1.0);
    CHECK(r.identity_switches == 0);
  }

  TEST_CASE("evaluation with nothing predicted") {
    const std::vector<LabelMap> gt{squares(4, 8)};
    const std::vector<LabelMap> pred{LabelMap(64, 64, 0)};
    const EvalReport r = evaluate(pred, {}, gt, {{1, 0, 0, 0}, {2, 0, 0, 0}, {3, 0, 0, 0}, {4, 0, 0, 0}});
    CHECK(r.recall == 0.0);
    CHECK(r.precision == 1.0);
    CHECK(r.no_predictions);
  }

  TEST_CASE("one of ten missed everywhere") {
    std::vector<LabelMap> gt, pred;
    for (int t = 0; t < 3; ++t) {
      gt.push_back(squares(10, 8));
      LabelMap p = squares(10, 8);
      for (auto& v : p.pixels()) {
        if (v == 10) v = 0;
      }
      pred.push_back(p);
    }
    std::vector<TrackRecord> tracks;
    for (int k = 1; k <= 10; ++k) tracks.push_back({k, 0, 2, 0});
    const EvalReport r = evaluate(pred, tracks, gt, tracks);
    CHECK(r.recall == doctest::Approx(0.9));
    CHECK(r.precision == 1.0);
    CHECK(r.track_purity == doctest::Approx(0.9));
  }

  TEST_CASE("identity switch and mitosis accounting") {
    std::vector<LabelMap> gt{squares(2, 8), squares(2, 8), squares(2, 8)};
    std::vector<LabelMap> pred = gt;
    for (auto& v : pred[2].pixels()) {
      if (v == 1) v = 3;
    }
    const EvalReport r = evaluate(pred, {{1, 0, 1, 0}, {2, 0, 2, 0}, {3, 2, 2, 0}}, gt, {{1, 0, 2, 0}, {2, 0, 2, 0}});
    CHECK(r.identity_switches == 1);
    CHECK(r.track_purity == doctest::Approx(0.5));

    // Frame 0: one cell; frames 1 and 2: its two children.
    std::vector<LabelMap> div{squares(1, 8), squares(3, 8), squares(3, 8)};
    for (std::size_t t = 1; t < 3; ++t) {
      for (auto& v : div[t].pixels()) {
        if (v == 1) v = 0;
      }
    }
    const std::vector<TrackRecord> lineage{{1, 0, 0, 0}, {2, 1, 2, 1}, {3, 1, 2, 1}};
    const EvalReport m = evaluate(div, lineage, div, lineage);
    CHECK(m.mitoses_expected == 1);
    CHECK(m.mitoses_detected == 1);
    CHECK(m.predicted_mitoses == 1);
    const EvalReport none = evaluate(div, {{1, 0, 0, 0}, {2, 1, 2, 0}, {3, 1, 2, 0}}, div, lineage);
    CHECK(none.mitoses_detected == 0);
    CHECK(none.predicted_mitoses == 0);
  }

  TEST_CASE("frame count mismatch") {
    CHECK_THROWS_AS(evaluate({squares(1, 4)}, {}, {squares(1, 4), squares(1, 4)}, {}), DataError);
  }

  TEST_CASE("synthetic generator") {
    SynthSpec spec;
    spec.frames = 4;
    spec.blob_count = 3;
    spec.width = spec.height = 128;
    const SynthSequence a = synthesize(spec), b = synthesize(spec);
    CHECK(a.frames == b.frames);
    CHECK(a.ground_truth == b.ground_truth);

    SynthSpec still;
    still.frames = 5;
    still.blob_count = 1;
    still.noise_sigma = 0.0;
    still.speed = 0.0;
    const SynthSequence s = synthesize(still);
    for (const Image2D& f : s.frames) CHECK(f == s.frames[0]);

    SynthSpec split;
    split.frames = 20;
    split.mitoses = {{10, -1}};
    const SynthSequence m = synthesize(split);
    int children = 0;
    for (const TrackRecord& t : m.tracks) {
      if (t.parent != 0) {
        ++children;
        CHECK(t.begin == 10);
      }
    }
    CHECK(children == 2);

    SynthSpec crowded;
    crowded.width = crowded.height = 64;
    crowded.blob_count = 40;
    CHECK_THROWS_AS(synthesize(crowded), DataError);
  }

  TEST_CASE("pipeline run writes every output and is repeatable") {
    const fs::path root = fresh_dir("pipeline");
    SynthSpec spec;
    spec.width = spec.height = 128;
    spec.blob_count = 3;
    spec.frames = 4;
    write_synth(root / "in", synthesize(spec));
    PipelineConfig cfg;
    cfg.input = (root / "in").string();
    cfg.output = (root / "out").string();
    RunOptions opts;
    opts.overlay = true;
    const RunSummary s = run_pipeline(cfg, opts);
    CHECK(s.frames == 4);
    for (int t = 0; t < 4; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "mask%03d.tif", t);
      CHECK(fs::exists(root / "out" / name));
      std::snprintf(name, sizeof name, "overlay%03d.png", t);
      CHECK(fs::exists(root / "out" / name));
    }
    CHECK(fs::exists(root / "out" / "res_track.txt"));
    CHECK(slurp(root / "out" / "timing.json").find("\"basins\"") != std::string::npos);
    const std::string tracks = slurp(root / "out" / "res_track.txt");
    const std::string mask = slurp(root / "out" / "mask002.tif");

    cfg.output = (root / "again").string();
    run_pipeline(cfg, opts);
    CHECK(slurp(root / "again" / "res_track.txt") == tracks);
    CHECK(slurp(root / "again" / "mask002.tif") == mask);
  }

  TEST_CASE("pipeline failures") {
    const fs::path root = fresh_dir("failures");
    fs::create_directories(root / "empty");
    PipelineConfig cfg;
    cfg.input = (root / "empty").string();
    cfg.output = (root / "out").string();
    CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("no frames"), DataError);
    CHECK_FALSE(fs::exists(root / "out"));

    fs::create_directories(root / "mixed");
    save_image16(root / "mixed" / "t000.tif", Image2D(64, 64, 0.2));
    save_image16(root / "mixed" / "t001.tif", Image2D(48, 64, 0.2));
    cfg.input = (root / "mixed").string();
    CHECK_THROWS_AS(run_pipeline(cfg), DataError);
    CHECK_FALSE(fs::exists(root / "out"));
    for (const auto& entry : fs::directory_iterator(root)) {
      CHECK(entry.path().filename().string().find("out") == std::string::npos);
    }
  }
}
