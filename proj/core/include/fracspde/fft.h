#pragma once

// Thin RAII layer over FFTW3. Plans are built with FFTW_ESTIMATE so that the
// chosen algorithm, and therefore every floating point result, is identical
// from run to run. Plan creation is serialized internally; executing a plan on
// caller-owned aligned buffers is safe from several threads at once.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fracspde {

using Complex = std::complex<double>;

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
std::size_t good_fft_size(std::size_t n);

namespace detail {
struct FftwFree {
  void operator()(void* p) const noexcept;
};
void* fftw_alloc_bytes(std::size_t bytes);
}  // namespace detail

/// SIMD-aligned heap array obtained from fftw_malloc.
template <class T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n)
      : data_(static_cast<T*>(detail::fftw_alloc_bytes(n * sizeof(T)))), size_(n) {
    for (std::size_t i = 0; i < n; ++i) data_.get()[i] = T{};
  }
  T* data() noexcept { return data_.get(); }
  const T* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) noexcept { return data_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_.get()[i]; }
  std::span<T> span() noexcept { return {data_.get(), size_}; }
  std::span<const T> span() const noexcept { return {data_.get(), size_}; }

 private:
  std::unique_ptr<T, detail::FftwFree> data_;
  std::size_t size_ = 0;
};

/// Real-to-complex / complex-to-real transform pair of a fixed length.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  /// `in` must hold size() values, `out` spectrum_size(); both from AlignedBuffer.
  void forward(double* in, Complex* out) const;
  /// Unnormalized inverse. Overwrites `in`.
  void inverse(Complex* in, double* out) const;

 private:
  std::size_t n_ = 0;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// In-place capable complex transform (sign = -1 forward, +1 backward).
class ComplexFft {
 public:
  ComplexFft(std::size_t n, int sign);
  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  void execute(Complex* in, Complex* out) const;

 private:
  std::size_t n_ = 0;
  void* plan_ = nullptr;
};

/// Linear (non-circular) convolution of length-n signals with kernels given
/// on integer offsets [-w, w]:  out[i] = sum_m kernel[i - m] * in[m].
/// Zero padding to an FFT length >= n + w keeps wrap-around out of the result.
class SpectralConvolver {
 public:
  using Spectrum = std::vector<Complex>;

  struct Workspace {
    AlignedBuffer<double> real;
    AlignedBuffer<Complex> spectrum;
  };

  SpectralConvolver(std::size_t signal_size, std::size_t half_width);

  std::size_t signal_size() const noexcept { return n_; }
  std::size_t half_width() const noexcept { return w_; }
  std::size_t fft_size() const noexcept { return fft_.size(); }
  std::size_t spectrum_size() const noexcept { return fft_.spectrum_size(); }

  Workspace make_workspace() const;

  /// Spectrum of a kernel sampled at offsets -w..w (length 2w+1). The 1/N
  /// normalization of the inverse transform is folded in here.
  Spectrum kernel_spectrum(std::span<const double> kernel) const;

  /// Spectrum of a length-n signal, written into ws.spectrum.
  void forward(std::span<const double> signal, Workspace& ws) const;
  /// Inverse of ws.spectrum; the first n samples land in `out`.
  void inverse(Workspace& ws, std::span<double> out) const;

  /// Convenience: out = kernel (*) signal.
  void convolve(std::span<const double> signal, const Spectrum& kernel, Workspace& ws,
                std::span<double> out) const;

 private:
  std::size_t n_;
  std::size_t w_;
  RealFft fft_;
};

}  // namespace fracspde
