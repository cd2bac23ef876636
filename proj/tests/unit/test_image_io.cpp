#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>
#include <tiffio.h>

#include "gravtrack/error.hpp"
#include "gravtrack/image.hpp"
#include "gravtrack/io.hpp"
#include "gravtrack/track_io.hpp"

using namespace gravtrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gravtrack_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("core-imaging") {
  TEST_CASE("16-bit PGM is read without rescaling") {
    const fs::path p = scratch("four.pgm");
    {
      std::ofstream out(p, std::ios::binary);
      out << "P5\n2 2\n65535\n";
      const unsigned char bytes[] = {0, 0, 0, 100, 0, 200, 255, 255};
      out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
    }
    const Image2D img = load_frame(p);
    REQUIRE(img.width() == 2);
    REQUIRE(img.height() == 2);
    CHECK(img(0, 0) == 0.0);
    CHECK(img(1, 0) == 100.0);
    CHECK(img(0, 1) == 200.0);
    CHECK(img(1, 1) == 65535.0);
  }

  TEST_CASE("label TIFF round trip is exact") {
    std::mt19937 rng(3);
    LabelMap labels(37, 23);
    for (auto& v : labels.pixels()) v = static_cast<std::int32_t>(rng() % 65536);
    const fs::path p = scratch("labels.tif");
    save_labels(p, labels);
    CHECK(load_labels(p) == labels);
  }

  TEST_CASE("labels beyond 16 bits are rejected") {
    LabelMap labels(2, 2, 0);
    labels(1, 1) = 70000;
    CHECK_THROWS_AS(save_labels(scratch("big.tif"), labels), Error);
  }

  TEST_CASE("RGB TIFF is a format error") {
    const fs::path p = scratch("rgb.tif");
    TIFF* tif = TIFFOpen(p.c_str(), "w");
    REQUIRE(tif != nullptr);
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, 4);
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, 4);
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 3);
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, 4);
    unsigned char row[12] = {};
    for (int y = 0; y < 4; ++y) TIFFWriteScanline(tif, row, static_cast<std::uint32_t>(y), 0);
    TIFFClose(tif);
    CHECK_THROWS_AS(load_frame(p), FormatError);
  }

  TEST_CASE("missing file is reported") {
    CHECK_THROWS_AS(load_frame(scratch("absent.tif")), Error);
  }

  TEST_CASE("frames sort by numeric suffix") {
    const fs::path dir = scratch("seq");
    fs::remove_all(dir);
    fs::create_directories(dir);
    Image2D img(3, 3, 0.5);
    for (const char* name : {"t10.tif", "t2.tif", "t1.tif"}) save_image16(dir / name, img);
    const SequenceMeta meta = list_frames(dir);
    REQUIRE(meta.frame_count == 3);
    CHECK(meta.frame_paths[0].filename() == "t1.tif");
    CHECK(meta.frame_paths[1].filename() == "t2.tif");
    CHECK(meta.frame_paths[2].filename() == "t10.tif");
    CHECK(meta.pixel_depth == 16);
  }

  TEST_CASE("normalize") {
    const Image2D a = normalize(Image2D(3, 1, std::vector<double>{0, 50, 100}));
    CHECK(a[0] == 0.0);
    CHECK(a[1] == doctest::Approx(0.5));
    CHECK(a[2] == 1.0);
    const Image2D c = normalize(Image2D(3, 1, 7.0));
    for (double v : c.pixels()) CHECK(v == 0.0);

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-5, 20);
    Image2D r(16, 16);
    for (auto& v : r.pixels()) v = u(rng);
    const Image2D n = normalize(r);
    const Image2D nn = normalize(n);
    for (std::size_t i = 0; i < n.size(); ++i) {
      CHECK(n[i] >= 0.0);
      CHECK(n[i] <= 1.0);
      CHECK(nn[i] == doctest::Approx(n[i]).epsilon(1e-12));
      for (std::size_t j = 0; j < n.size(); j += 17) {
        if (r[i] < r[j]) CHECK(n[i] <= n[j]);
      }
    }
  }

  TEST_CASE("bilinear sampling") {
    Image2D img(6, 8);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * i % 13);
    CHECK(bilinear_sample(img, {3, 5}) == img(3, 5));
    CHECK(bilinear_sample(img, {-1, 0}) == img(0, 0));
    CHECK(bilinear_sample(img, {9, 12}) == img(5, 7));
    const Image2D two(2, 2, std::vector<double>{0, 1, 0, 1});
    CHECK(bilinear_sample(two, {0.5, 0.5}) == doctest::Approx(0.5));

    ForceField2D f(2, 2);
    f.fx = two;
    f.fy = Image2D(2, 2, std::vector<double>{0, 0, 2, 2});
    const Vec2 v = bilinear_sample(f, {0.25, 0.75});
    CHECK(v.x == doctest::Approx(0.25));
    CHECK(v.y == doctest::Approx(1.5));
  }

  TEST_CASE("bilinear sampling is Lipschitz in the node differences") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    Image2D img(20, 20);
    for (auto& v : img.pixels()) v = u(rng);
    double lip = 0.0;
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) {
        if (x + 1 < 20) lip = std::max(lip, std::abs(img(x + 1, y) - img(x, y)));
        if (y + 1 < 20) lip = std::max(lip, std::abs(img(x, y + 1) - img(x, y)));
      }
    }
    std::uniform_real_distribution<double> pos(0, 19);
    for (int k = 0; k < 2000; ++k) {
      const Vec2 p{pos(rng), pos(rng)};
      const Vec2 q = p + Vec2{0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5)};
      const double d = std::abs(p.x - q.x) + std::abs(p.y - q.y);
      CHECK(std::abs(bilinear_sample(img, p) - bilinear_sample(img, q)) <= lip * d + 1e-12);
    }
  }

  TEST_CASE("track file round trip") {
    const std::vector<TrackRecord> tracks{{1, 0, 9, 0}, {2, 10, 19, 1}, {3, 10, 19, 1}};
    const fs::path p = scratch("res_track.txt");
    write_tracks(p, tracks);
    CHECK(read_tracks(p) == tracks);
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    CHECK(first == "1 0 9 0");
  }
}
