#include "fracspde/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <new>
#include <stdexcept>

namespace fracspde {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool smooth_7(std::size_t n) {
  for (std::size_t p : {2u, 3u, 5u, 7u})
    while (n % p == 0) n /= p;
  return n == 1;
}
}  // namespace

std::size_t good_fft_size(std::size_t n) {
  if (n <= 1) return 1;
  while (!smooth_7(n)) ++n;
  return n;
}

namespace detail {
void FftwFree::operator()(void* p) const noexcept { fftw_free(p); }

void* fftw_alloc_bytes(std::size_t bytes) {
  void* p = fftw_malloc(std::max<std::size_t>(bytes, 16));
  if (p == nullptr) throw std::bad_alloc();
  return p;
}
}  // namespace detail

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw std::invalid_argument("RealFft: length must be at least 2");
  AlignedBuffer<double> r(n);
  AlignedBuffer<Complex> c(n / 2 + 1);
  std::lock_guard lock(planner_mutex());
  const int len = static_cast<int>(n);
  forward_plan_ = fftw_plan_dft_r2c_1d(len, r.data(), reinterpret_cast<fftw_complex*>(c.data()),
                                       FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(len, reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                                       FFTW_ESTIMATE);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr)
    throw std::runtime_error("RealFft: FFTW planning failed");
}

RealFft::~RealFft() {
  if (forward_plan_ == nullptr && inverse_plan_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

RealFft::RealFft(RealFft&& other) noexcept
    : n_(other.n_), forward_plan_(other.forward_plan_), inverse_plan_(other.inverse_plan_) {
  other.forward_plan_ = nullptr;
  other.inverse_plan_ = nullptr;
}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    std::swap(n_, other.n_);
    std::swap(forward_plan_, other.forward_plan_);
    std::swap(inverse_plan_, other.inverse_plan_);
  }
  return *this;
}

void RealFft::forward(double* in, Complex* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in,
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(Complex* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(in),
                       out);
}

ComplexFft::ComplexFft(std::size_t n, int sign) : n_(n) {
  AlignedBuffer<Complex> a(n);
  AlignedBuffer<Complex> b(n);
  std::lock_guard lock(planner_mutex());
  plan_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(a.data()),
                           reinterpret_cast<fftw_complex*>(b.data()),
                           sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  if (plan_ == nullptr) throw std::runtime_error("ComplexFft: FFTW planning failed");
}

ComplexFft::~ComplexFft() {
  if (plan_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void ComplexFft::execute(Complex* in, Complex* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_), reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out));
}

SpectralConvolver::SpectralConvolver(std::size_t signal_size, std::size_t half_width)
    : n_(signal_size), w_(half_width), fft_(good_fft_size(std::max<std::size_t>(signal_size + half_width, 2))) {
  if (signal_size == 0) throw std::invalid_argument("SpectralConvolver: empty signal");
}

SpectralConvolver::Workspace SpectralConvolver::make_workspace() const {
  return Workspace{AlignedBuffer<double>(fft_.size()), AlignedBuffer<Complex>(fft_.spectrum_size())};
}

SpectralConvolver::Spectrum SpectralConvolver::kernel_spectrum(std::span<const double> kernel) const {
  if (kernel.size() != 2 * w_ + 1)
    throw std::invalid_argument("SpectralConvolver: kernel must have 2w+1 samples");
  const std::size_t m = fft_.size();
  Workspace ws = make_workspace();
  std::fill(ws.real.data(), ws.real.data() + m, 0.0);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(w_);
    const std::size_t pos = offset >= 0 ? static_cast<std::size_t>(offset)
                                        : m - static_cast<std::size_t>(-offset);
    ws.real[pos] += kernel[k];
  }
  fft_.forward(ws.real.data(), ws.spectrum.data());
  Spectrum out(ws.spectrum.data(), ws.spectrum.data() + fft_.spectrum_size());
  const double scale = 1.0 / static_cast<double>(m);
  for (auto& c : out) c *= scale;
  return out;
}

void SpectralConvolver::forward(std::span<const double> signal, Workspace& ws) const {
  const std::size_t m = fft_.size();
  std::copy(signal.begin(), signal.begin() + static_cast<std::ptrdiff_t>(n_), ws.real.data());
  std::fill(ws.real.data() + n_, ws.real.data() + m, 0.0);
  fft_.forward(ws.real.data(), ws.spectrum.data());
}

void SpectralConvolver::inverse(Workspace& ws, std::span<double> out) const {
  fft_.inverse(ws.spectrum.data(), ws.real.data());
  std::copy(ws.real.data(), ws.real.data() + n_, out.begin());
}

void SpectralConvolver::convolve(std::span<const double> signal, const Spectrum& kernel,
                                 Workspace& ws, std::span<double> out) const {
  forward(signal, ws);
  for (std::size_t k = 0; k < kernel.size(); ++k) ws.spectrum[k] *= kernel[k];
  inverse(ws, out);
}

}  // namespace fracspde
