#include <random>

#include <doctest.h>

#include "../oracles.hpp"
#include "gravtrack/error.hpp"
#include "gravtrack/preprocess.hpp"
#include "gravtrack/reference.hpp"

using namespace gravtrack;

namespace {

double variance(const Image2D& img) {
  double m = 0.0;
  for (double v : img.pixels()) m += v;
  m /= static_cast<double>(img.size());
  double s = 0.0;
  for (double v : img.pixels()) s += (v - m) * (v - m);
  return s / static_cast<double>(img.size());
}

Image2D noise_on(double level, double sigma, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  Image2D img(n, n);
  for (auto& v : img.pixels()) v = std::clamp(level + g(rng), 0.0, 1.0);
  return img;
}

int argmax_gradient(const Image2D& img, int y) {
  int best = 0;
  double bv = -1.0;
  for (int x = 0; x + 1 < img.width(); ++x) {
    const double g = img(x + 1, y) - img(x, y);
    if (g > bv) {
      bv = g;
      best = x;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("log brightening") {
    const Image2D img(4, 1, std::vector<double>{0.0, 0.1, 0.5, 1.0});
    for (double c : {0.5, 10.0, 100.0}) {
      const Image2D out = log_brighten(img, c);
      CHECK(out[0] == 0.0);
      CHECK(out[3] == doctest::Approx(1.0));
      CHECK(out[1] < out[2]);
    }
    CHECK(log_brighten(img, 10.0)[1] == doctest::Approx(std::log(2.0) / std::log(11.0)).epsilon(1e-12));
    CHECK(log_brighten(img, 10.0)[1] == doctest::Approx(0.2891).epsilon(1e-4));
    CHECK_THROWS_AS(log_brighten(img, 0.0), ParameterError);
    CHECK_THROWS_AS(log_brighten(img, -1.0), ParameterError);
  }

  TEST_CASE("Kuwahara keeps constants") {
    const Image2D img(24, 24, 0.37);
    const Image2D out = kuwahara_anisotropic(img, {});
    for (double v : out.pixels()) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
  }

  TEST_CASE("Kuwahara preserves a step edge") {
    Image2D img(32, 32, 0.0);
    for (int y = 0; y < 32; ++y) {
      for (int x = 16; x < 32; ++x) img(x, y) = 1.0;
    }
    const Image2D out = kuwahara_anisotropic(img, {});
    for (int y = 0; y < 32; ++y) CHECK(argmax_gradient(out, y) == argmax_gradient(img, y));
  }

  TEST_CASE("Kuwahara reduces noise variance") {
    const Image2D img = noise_on(0.5, 0.1, 64, 2);
    CHECK(variance(kuwahara_anisotropic(img, {})) < variance(img));
  }

  TEST_CASE("Kuwahara parallel equals reference") {
    const Image2D img = noise_on(0.4, 0.2, 40, 9);
    KuwaharaParams p;
    p.radius = 3;
    CHECK(kuwahara_anisotropic(img, p) == reference::kuwahara_anisotropic(img, p));
  }

  TEST_CASE("Kuwahara parameter ranges") {
    const Image2D img(8, 8, 0.5);
    KuwaharaParams p;
    p.radius = 0;
    CHECK_THROWS_AS(kuwahara_anisotropic(img, p), ParameterError);
    p = {};
    p.sector_count = 1;
    CHECK_THROWS_AS(kuwahara_anisotropic(img, p), ParameterError);
    p = {};
    p.sharpness_q = 0.0;
    CHECK_THROWS_AS(kuwahara_anisotropic(img, p), ParameterError);
  }

  TEST_CASE("CLAHE on a constant image") {
    const Image2D out = clahe(Image2D(40, 40, 0.3), {});
    for (double v : out.pixels()) CHECK(v == out[0]);
  }

  TEST_CASE("CLAHE two-level CDF mapping") {
    Image2D img(16, 16, 0.2);
    for (int y = 0; y < 16; ++y) {
      for (int x = 8; x < 16; ++x) img(x, y) = 0.8;
    }
    ClaheParams p;
    p.tile_size = 16;
    p.clip_limit = 1.0;
    const Image2D out = clahe(img, p);
    // Half the mass sits at or below 0.2, all of it at or below 0.8.
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out(15, 15) == doctest::Approx(1.0));
  }

  TEST_CASE("CLAHE output range and large tiles") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    Image2D img(50, 70);
    for (auto& v : img.pixels()) v = u(rng);
    for (int tile : {8, 16, 64, 512}) {
      ClaheParams p;
      p.tile_size = tile;
      const Image2D out = clahe(img, p);
      for (double v : out.pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    ClaheParams bad;
    bad.tile_size = 4;
    CHECK_THROWS_AS(clahe(img, bad), ParameterError);
    bad = {};
    bad.clip_limit = 0.0;
    CHECK_THROWS_AS(clahe(img, bad), ParameterError);
  }

  TEST_CASE("hole filling raises an enclosed dark pixel") {
    Image2D img(15, 15, 0.0);
    for (int y = 3; y < 12; ++y) {
      for (int x = 3; x < 12; ++x) img(x, y) = 0.8;
    }
    img(7, 7) = 0.1;
    const Image2D out = fill_dark_spots(img);
    CHECK(out(7, 7) == doctest::Approx(0.8));
    CHECK(out == oracle::fill_holes(img));
  }

  TEST_CASE("hole filling matches geodesic reconstruction") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
      Image2D img(24, 20);
      for (auto& v : img.pixels()) v = u(rng);
      const Image2D out = fill_dark_spots(img);
      const Image2D ref = oracle::fill_holes(img);
      for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(out[i] == ref[i]);
        CHECK(out[i] >= img[i]);
      }
      CHECK(fill_dark_spots(out) == out);
    }
  }

  TEST_CASE("hole filling leaves minimum-free images alone") {
    Image2D img(12, 12);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) img(x, y) = 0.05 * x;
    }
    CHECK(fill_dark_spots(img) == img);
  }
}
