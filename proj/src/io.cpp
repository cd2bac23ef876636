#include "gravtrack/io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "gravtrack/error.hpp"

namespace gravtrack {

namespace fs = std::filesystem;

namespace {

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

void silence_libtiff() {
  static const bool once = [] {
    TIFFSetWarningHandler(nullptr);
    TIFFSetErrorHandler(nullptr);
    return true;
  }();
  (void)once;
}

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Raw integer samples plus bit depth.
struct RawRaster {
  int width = 0;
  int height = 0;
  int bits = 0;
  std::vector<std::uint32_t> samples;
};

RawRaster read_tiff(const fs::path& path) {
  silence_libtiff();
  TiffHandle tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw FormatError("cannot open TIFF: " + path.string());

  std::uint32_t width = 0, height = 0;
  std::uint16_t bits = 0, spp = 1, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);

  if (spp != 1) {
    throw FormatError(path.string() + ": unsupported channel count " + std::to_string(spp) +
                      " (expected 1)");
  }
  if (bits != 8 && bits != 16) {
    throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(bits) +
                      " (expected 8 or 16)");
  }
  if (fmt != SAMPLEFORMAT_UINT && fmt != SAMPLEFORMAT_INT) {
    throw FormatError(path.string() + ": unsupported sample format " + std::to_string(fmt));
  }
  if (width == 0 || height == 0) throw FormatError(path.string() + ": empty image");

  RawRaster r;
  r.width = static_cast<int>(width);
  r.height = static_cast<int>(height);
  r.bits = bits;
  r.samples.resize(static_cast<std::size_t>(width) * height);

  const tmsize_t line = TIFFScanlineSize(tif.get());
  std::vector<unsigned char> buf(static_cast<std::size_t>(line));
  for (std::uint32_t y = 0; y < height; ++y) {
    if (TIFFReadScanline(tif.get(), buf.data(), y, 0) < 0) {
      throw FormatError(path.string() + ": failed to read scanline " + std::to_string(y));
    }
    for (std::uint32_t x = 0; x < width; ++x) {
      std::uint32_t v = 0;
      if (bits == 8) {
        v = buf[x];
      } else {
        std::uint16_t s = 0;
        std::memcpy(&s, buf.data() + 2 * x, 2);
        v = s;
      }
      r.samples[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return r;
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else {
      break;
    }
    c = in.peek();
  }
  int value = -1;
  if (!(in >> value)) throw FormatError("malformed PGM header");
  return value;
}

RawRaster read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open PGM: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') {
    throw FormatError(path.string() + ": unsupported PGM variant (expected binary P5)");
  }
  const int width = read_pnm_int(in);
  const int height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": bad PGM dimensions");
  if (maxval <= 0 || maxval > 65535) {
    throw FormatError(path.string() + ": unsupported bit depth (maxval " +
                      std::to_string(maxval) + ")");
  }
  in.get();  // single whitespace after maxval

  RawRaster r;
  r.width = width;
  r.height = height;
  r.bits = maxval < 256 ? 8 : 16;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  r.samples.resize(n);
  if (r.bits == 8) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw FormatError(path.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = buf[i];
  } else {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    if (!in) throw FormatError(path.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < n; ++i) {
      r.samples[i] = (static_cast<std::uint32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];
    }
  }
  return r;
}

RawRaster read_raw(const fs::path& path) {
  if (!fs::exists(path)) throw FormatError("file not found: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".tif" || ext == ".tiff") return read_tiff(path);
  throw FormatError(path.string() + ": unsupported file extension '" + ext + "'");
}

void write_tiff16(const fs::path& path, int width, int height,
                  const std::vector<std::uint16_t>& samples) {
  silence_libtiff();
  TiffHandle tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw Error("cannot create TIFF: " + path.string());
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(width));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(height));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 16);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(height));
  std::vector<std::uint16_t> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(y) * width, width, row.begin());
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw Error("failed writing TIFF scanline: " + path.string());
    }
  }
}

std::optional<long long> numeric_suffix(const std::string& stem) {
  std::size_t end = stem.size();
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end) return std::nullopt;
  return std::stoll(stem.substr(begin, end - begin));
}

}  // namespace

Image2D load_frame(const fs::path& path) {
  RawRaster r = read_raw(path);
  Image2D img(r.width, r.height);
  for (std::size_t i = 0; i < r.samples.size(); ++i) img[i] = static_cast<double>(r.samples[i]);
  return img;
}

LabelMap load_labels(const fs::path& path) {
  RawRaster r = read_raw(path);
  LabelMap labels(r.width, r.height);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    labels[i] = static_cast<std::int32_t>(r.samples[i]);
  }
  return labels;
}

void save_labels(const fs::path& path, const LabelMap& labels) {
  std::vector<std::uint16_t> samples(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t v = labels[i];
    if (v < 0 || v > 65535) {
      throw DataError("label " + std::to_string(v) + " does not fit a 16-bit TIFF");
    }
    samples[i] = static_cast<std::uint16_t>(v);
  }
  write_tiff16(path, labels.width(), labels.height(), samples);
}

void save_image16(const fs::path& path, const Image2D& img) {
  std::vector<std::uint16_t> samples(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img[i], 0.0, 1.0);
    samples[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  write_tiff16(path, img.width(), img.height(), samples);
}

void save_pgm(const fs::path& path, const Grid<std::uint16_t>& raster, int maxval) {
  if (maxval <= 0 || maxval > 65535) throw ParameterError("PGM maxval must be in 1..65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create PGM: " + path.string());
  out << "P5\n" << raster.width() << ' ' << raster.height() << '\n' << maxval << '\n';
  for (auto v : raster.pixels()) {
    const auto s = static_cast<std::uint16_t>(std::min<int>(v, maxval));
    if (maxval < 256) {
      out.put(static_cast<char>(s));
    } else {
      out.put(static_cast<char>(s >> 8));
      out.put(static_cast<char>(s & 0xff));
    }
  }
}

void save_png_rgb(const fs::path& path, int width, int height,
                  const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DataError("RGB buffer size does not match image dimensions");
  }
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("cannot create PNG: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

SequenceMeta list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_ext(entry.path());
    if (ext == ".tif" || ext == ".tiff" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const auto na = numeric_suffix(a.stem().string());
    const auto nb = numeric_suffix(b.stem().string());
    if (na && nb && *na != *nb) return *na < *nb;
    if (na.has_value() != nb.has_value()) return na.has_value();
    return a.filename() < b.filename();
  });
  SequenceMeta meta;
  meta.frame_count = files.size();
  meta.frame_paths = std::move(files);
  if (!meta.frame_paths.empty()) {
    meta.pixel_depth = read_raw(meta.frame_paths.front()).bits;
  }
  return meta;
}

}  // namespace gravtrack
