#include "gravtrack/gravity.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

#include "gravtrack/error.hpp"
#include "gravtrack/reference.hpp"

namespace gravtrack {

int reflect_index(int i, int n) {
  if (n <= 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

GravityKernelSet build_kernels(int radius, double softening_eps) {
  if (radius < 1) throw ParameterError("gravity radius must be >= 1");
  if (!(softening_eps >= 0.0)) throw ParameterError("gravity softening_eps must be >= 0");
  GravityKernelSet k;
  k.radius = radius;
  k.softening_eps = softening_eps;
  const int side = k.side();
  k.kx = Image2D(side, side);
  k.ky = Image2D(side, side);
  k.kp = Image2D(side, side);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int ix = dx + radius;
      const int iy = dy + radius;
      if (dx == 0 && dy == 0) {
        k.kp(ix, iy) = -1.0 / std::max(softening_eps, 0.5);
        continue;
      }
      const double r = std::max(std::hypot(static_cast<double>(dx), static_cast<double>(dy)),
                                softening_eps);
      const double r3 = r * r * r;
      k.kx(ix, iy) = dx / r3;
      k.ky(ix, iy) = dy / r3;
      k.kp(ix, iy) = -1.0 / r;
    }
  }
  return k;
}

namespace {

void check_kernel_fits(const Image2D& img, int side) {
  if (img.empty()) throw ParameterError("cannot correlate an empty image");
  if (side > 2 * img.width() || side > 2 * img.height()) {
    throw ParameterError("gravity kernel (side " + std::to_string(side) +
                         ") larger than twice the image extent");
  }
}

Image2D direct_correlate(const Image2D& img, const Image2D& kernel, bool parallel) {
  const int w = img.width();
  const int h = img.height();
  const int r = kernel.width() / 2;
  std::vector<int> xs(static_cast<std::size_t>(w + 2 * r));
  std::vector<int> ys(static_cast<std::size_t>(h + 2 * r));
  for (int i = 0; i < w + 2 * r; ++i) xs[static_cast<std::size_t>(i)] = reflect_index(i - r, w);
  for (int i = 0; i < h + 2 * r; ++i) ys[static_cast<std::size_t>(i)] = reflect_index(i - r, h);
  Image2D out(w, h);
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = ys[static_cast<std::size_t>(y + dy + r)];
        const double* krow = &kernel(0, dy + r);
        for (int dx = -r; dx <= r; ++dx) {
          acc += img(xs[static_cast<std::size_t>(x + dx + r)], sy) * krow[dx + r];
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

int fast_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int v = m;
    for (int f : {2, 3, 5, 7}) {
      while (v % f == 0) v /= f;
    }
    if (v == 1) return m;
  }
}

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

std::vector<Image2D> fft_correlate(const Image2D& img, std::span<const Image2D* const> kernels) {
  const int w = img.width();
  const int h = img.height();
  const int r = kernels.front()->width() / 2;
  const int nx = fast_fft_size(w + 2 * r);
  const int ny = fast_fft_size(h + 2 * r);
  const int ncx = nx / 2 + 1;
  const std::size_t real_size = static_cast<std::size_t>(nx) * ny;
  const std::size_t complex_size = static_cast<std::size_t>(ncx) * ny;

  auto real_buf = fftw_buffer<double>(real_size);
  auto image_spec = fftw_buffer<fftw_complex>(complex_size);
  auto work_spec = fftw_buffer<fftw_complex>(complex_size);

  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_2d(ny, nx, real_buf.get(), work_spec.get(), FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(ny, nx, work_spec.get(), real_buf.get(), FFTW_ESTIMATE);
  }

  // Reflect-padded image in the top-left (w+2r) x (h+2r) block.
  std::fill_n(real_buf.get(), real_size, 0.0);
  for (int y = 0; y < h + 2 * r; ++y) {
    const int sy = reflect_index(y - r, h);
    for (int x = 0; x < w + 2 * r; ++x) {
      real_buf[static_cast<std::size_t>(y) * nx + x] = img(reflect_index(x - r, w), sy);
    }
  }
  fftw_execute_dft_r2c(forward, real_buf.get(), work_spec.get());
  std::copy_n(&work_spec[0][0], 2 * complex_size, &image_spec[0][0]);

  std::vector<Image2D> out;
  out.reserve(kernels.size());
  const double scale = 1.0 / static_cast<double>(real_size);
  for (const Image2D* kernel : kernels) {
    // Kernel tap at offset v stored at index v mod N.
    std::fill_n(real_buf.get(), real_size, 0.0);
    for (int dy = -r; dy <= r; ++dy) {
      const int iy = (dy + ny) % ny;
      for (int dx = -r; dx <= r; ++dx) {
        const int ix = (dx + nx) % nx;
        real_buf[static_cast<std::size_t>(iy) * nx + ix] = (*kernel)(dx + r, dy + r);
      }
    }
    fftw_execute_dft_r2c(forward, real_buf.get(), work_spec.get());
    for (std::size_t i = 0; i < complex_size; ++i) {
      const std::complex<double> a(image_spec[i][0], image_spec[i][1]);
      const std::complex<double> b(work_spec[i][0], -work_spec[i][1]);
      const std::complex<double> c = a * b;
      work_spec[i][0] = c.real();
      work_spec[i][1] = c.imag();
    }
    fftw_execute_dft_c2r(backward, work_spec.get(), real_buf.get());
    Image2D result(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        result(x, y) = real_buf[static_cast<std::size_t>(y + r) * nx + (x + r)] * scale;
      }
    }
    out.push_back(std::move(result));
  }

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  return out;
}

}  // namespace

std::vector<Image2D> correlate_reflect(const Image2D& img,
                                       std::span<const Image2D* const> kernels) {
  if (kernels.empty()) return {};
  const int side = kernels.front()->width();
  for (const Image2D* k : kernels) {
    if (k->width() != side || k->height() != side || side % 2 == 0) {
      throw ParameterError("correlation kernels must share one odd square size");
    }
  }
  check_kernel_fits(img, side);
  if (side / 2 > kDirectCorrelationMaxRadius) return fft_correlate(img, kernels);
  std::vector<Image2D> out;
  out.reserve(kernels.size());
  for (const Image2D* k : kernels) out.push_back(direct_correlate(img, *k, true));
  return out;
}

Image2D reference::correlate_reflect(const Image2D& img, const Image2D& kernel) {
  if (kernel.width() != kernel.height() || kernel.width() % 2 == 0) {
    throw ParameterError("correlation kernel must be odd and square");
  }
  check_kernel_fits(img, kernel.width());
  return direct_correlate(img, kernel, false);
}

ForceField2D force_field(const Image2D& img, const GravityKernelSet& k) {
  const Image2D* kernels[] = {&k.kx, &k.ky};
  auto fields = correlate_reflect(img, kernels);
  ForceField2D f;
  f.fx = std::move(fields[0]);
  f.fy = std::move(fields[1]);
  return f;
}

PotentialField2D potential_field(const Image2D& img, const GravityKernelSet& k) {
  const Image2D* kernels[] = {&k.kp};
  auto fields = correlate_reflect(img, kernels);
  return PotentialField2D{std::move(fields[0])};
}

}  // namespace gravtrack
