#include <doctest.h>

#include "approx.h"

#include <random>
#include <vector>

#include "fracspde/fft.h"

using namespace fracspde;

TEST_CASE("good_fft_size returns 7-smooth sizes") {
  CHECK(good_fft_size(1) == 1);
  CHECK(good_fft_size(11) == 12);
  CHECK(good_fft_size(97) == 98);
  CHECK(good_fft_size(1025) == 1029);
}

TEST_CASE("spectral convolution equals direct linear convolution") {
  const std::size_t n = 37;
  const std::size_t w = 9;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> signal(n), kernel(2 * w + 1);
  for (auto& v : signal) v = nd(rng);
  for (auto& v : kernel) v = nd(rng);

  SpectralConvolver conv(n, w);
  auto ws = conv.make_workspace();
  const auto spec = conv.kernel_spectrum(kernel);
  std::vector<double> out(n);
  conv.convolve(signal, spec, ws, out);

  for (std::size_t i = 0; i < n; ++i) {
    double ref = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const auto off = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(m);
      if (off >= -static_cast<std::ptrdiff_t>(w) && off <= static_cast<std::ptrdiff_t>(w))
        ref += kernel[static_cast<std::size_t>(off + static_cast<std::ptrdiff_t>(w))] * signal[m];
    }
    CHECK(out[i] == rel(ref).epsilon(1e-12));
  }
}

TEST_CASE("kernel wider than the signal does not wrap around") {
  const std::size_t n = 8;
  const std::size_t w = 20;
  std::vector<double> kernel(2 * w + 1, 0.0);
  kernel[w + 15] = 1.0;  // offset +15 never lands inside an 8-point output
  kernel[w + 3] = 2.0;
  std::vector<double> signal(n, 0.0);
  signal[0] = 1.0;
  SpectralConvolver conv(n, w);
  auto ws = conv.make_workspace();
  std::vector<double> out(n);
  conv.convolve(signal, conv.kernel_spectrum(kernel), ws, out);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(out[i] - (i == 3 ? 2.0 : 0.0)) < 1e-13);
}
