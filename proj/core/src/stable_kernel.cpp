#include "fracspde/stable_kernel.h"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>

#include "fracspde/errors.h"
#include "fracspde/fft.h"

namespace fracspde {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTiny = 1e-300;
// Values below this fraction of the peak are round-off of the inversion.
constexpr double kFloorRatio = 1e-12;
constexpr char kMagic[8] = {'F', 'S', 'K', 'T', 'A', 'B', 'L', 0};
constexpr std::uint32_t kFormatVersion = 1;

constexpr std::array<double, 4> kGlNodes = {-0.8611363115940526, -0.3399810435848563,
                                            0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGlWeights = {0.3478548451374538, 0.6521451548625461,
                                              0.6521451548625461, 0.3478548451374538};

// int_x^inf (1 + z^p)^{-power} dz for x >= 0.
double envelope_tail_integral(double x, double p, int power) {
  if (x >= 2.0) {
    const double w = std::pow(x, -p);
    double sum = 0.0;
    double wk = 1.0;
    for (int k = 0; k < 200; ++k) {
      const double coef = power == 1 ? 1.0 : static_cast<double>(k + 1);
      const double e = p * (k + power) - 1.0;
      const double term = coef * wk * x * std::pow(x, -p * power) / e;
      sum += (k & 1) ? -term : term;
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
      wk *= w;
    }
    return sum;
  }
  auto f = [&](double z) { return std::pow(1.0 + std::pow(z, p), -power); };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double far = integrator.integrate([&](double u) { return f(2.0 + u); }, 0.0,
                                          std::numeric_limits<double>::infinity());
  // Short finite piece [x, 2] with Gauss-Legendre on 16 panels.
  double near = 0.0;
  const int panels = 16;
  const double h = (2.0 - x) / panels;
  for (int i = 0; i < panels; ++i) {
    const double mid = x + (i + 0.5) * h;
    for (int g = 0; g < 4; ++g) near += kGlWeights[g] * 0.5 * h * f(mid + 0.5 * h * kGlNodes[g]);
  }
  return far + near;
}

void put_bytes(std::ofstream& out, std::uint64_t bits, int n) {
  for (int i = 0; i < n; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint64_t get_bytes(std::ifstream& in, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("kernel table file truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_f64(std::ofstream& out, double v) { put_bytes(out, std::bit_cast<std::uint64_t>(v), 8); }
double get_f64(std::ifstream& in) { return std::bit_cast<double>(get_bytes(in, 8)); }

}  // namespace

void validate(const StableParams& p) {
  if (!(p.alpha > 1.0 && p.alpha <= 2.0)) throw DomainError("alpha must lie in (1,2]");
  if (!(std::fabs(p.delta) <= 2.0 - p.alpha + 1e-14))
    throw DomainError("delta must satisfy |delta| <= 2 - alpha");
}

double gaussian_kernel(double t, double x) {
  if (!(t > 0.0)) throw DomainError("gaussian_kernel: t must be positive");
  return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * kPi * t);
}

KernelTable build_kernel_table(const StableParams& params, double x_half_width, std::size_t n_points,
                               std::size_t fft_size, const KernelBuildOptions& opts) {
  validate(params);
  if (!(x_half_width > 0.0)) throw DomainError("build_kernel_table: x_half_width must be positive");
  if (n_points < 256) throw DomainError("build_kernel_table: n_points must be at least 256");
  if (!std::has_single_bit(fft_size) || fft_size < 4 * n_points)
    throw DomainError("build_kernel_table: fft_size must be a power of two >= 4 n_points");

  KernelTable table;
  table.params_ = params;
  table.half_width_ = x_half_width;
  table.dx_ = 2.0 * x_half_width / static_cast<double>(n_points - 1);
  table.fft_size_ = fft_size;

  const std::size_t m = fft_size;
  const double dxi = 2.0 * kPi / (static_cast<double>(m) * table.dx_);
  const double x0 = -x_half_width;
  const double c = std::cos(kPi * params.delta / 2.0);
  const double s = std::sin(kPi * params.delta / 2.0);
  AlignedBuffer<Complex> spec(m);
  AlignedBuffer<Complex> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double kk = k < m / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(m);
    const double xi = kk * dxi;
    const double mag = std::pow(std::fabs(xi), params.alpha);
    const double sg = xi > 0.0 ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
    const double amp = std::exp(-mag * c);
    const double phase = sg * mag * s + xi * x0;
    spec[k] = amp * Complex(std::cos(phase), std::sin(phase));
  }
  ComplexFft inverse(m, +1);
  inverse.execute(spec.data(), out.data());

  const double norm = dxi / (2.0 * kPi);
  table.profile_.resize(n_points);
  double clipped = 0.0;
  double max_imag = 0.0;
  for (std::size_t j = 0; j < n_points; ++j) {
    double v = out[j].real() * norm;
    max_imag = std::max(max_imag, std::fabs(out[j].imag() * norm));
    if (v < 0.0) {
      clipped += -v * table.dx_;
      v = 0.0;
    }
    table.profile_[j] = v;
  }
  table.clipped_mass_ = clipped;
  table.max_imag_ = max_imag;

  // Replace sub-floor nodes (pure round-off) by the envelope shape anchored at
  // the last trustworthy node on each side.
  const double p = 1.0 + params.alpha;
  const double peak = *std::max_element(table.profile_.begin(), table.profile_.end());
  const double floor = kFloorRatio * peak;
  std::size_t lo = 0;
  while (lo < n_points && table.profile_[lo] < floor) ++lo;
  std::size_t hi = n_points - 1;
  while (hi > lo && table.profile_[hi] < floor) --hi;
  auto env = [&](double x) { return 1.0 / (1.0 + std::pow(std::fabs(x), p)); };
  std::size_t replaced = 0;
  for (std::size_t j = 0; j < lo; ++j, ++replaced)
    table.profile_[j] = table.profile_[lo] * env(table.x(j)) / env(table.x(lo));
  for (std::size_t j = hi + 1; j < n_points; ++j, ++replaced)
    table.profile_[j] = table.profile_[hi] * env(table.x(j)) / env(table.x(hi));
  for (std::size_t j = lo; j <= hi; ++j)
    if (table.profile_[j] < floor) {
      table.profile_[j] = floor;
      ++replaced;
    }
  table.floor_replaced_ = replaced;

  double mass = 0.0;
  for (std::size_t j = 0; j < n_points; ++j)
    mass += table.profile_[j] * ((j == 0 || j + 1 == n_points) ? 0.5 : 1.0);
  mass *= table.dx_;
  table.mass_ = mass;
  if (max_imag > opts.imag_tol)
    throw ResolutionError("build_kernel_table: imaginary residue exceeds imag_tol", mass);
  if (mass < 1.0 - opts.mass_tol || mass > 1.0 + 1e-9)
    throw ResolutionError("build_kernel_table: grid mass outside [1 - mass_tol, 1]; widen the grid",
                          mass);
  table.finalize();
  return table;
}

void KernelTable::finalize() {
  const std::size_t n = profile_.size();
  const double p = 1.0 + params_.alpha;
  log_profile_.resize(n);
  for (std::size_t j = 0; j < n; ++j) log_profile_[j] = std::log(profile_[j] + kTiny);

  double k0 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double xj = x(j);
    k0 = std::max(k0, profile_[j] * (1.0 + std::pow(std::fabs(xj), p)));
    if (j + 1 < n)
      for (double r : {0.25, 0.5, 0.75}) {
        const double y = xj + r * dx_;
        k0 = std::max(k0, log_interp(y) * (1.0 + std::pow(std::fabs(y), p)));
      }
  }
  tail_constant_ = k0 * (1.0 + 1e-6);
  const double edge_env = tail_constant_ / (1.0 + std::pow(half_width_, p));
  left_scale_ = profile_.front() / edge_env;
  right_scale_ = profile_.back() / edge_env;

  for (int pw = 0; pw < 2; ++pw) {
    cum_[pw].assign(n, 0.0);
    rcum_[pw].assign(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j)
      cum_[pw][j + 1] = cum_[pw][j] + cell_integral(j, x(j), x(j + 1), pw + 1);
    for (std::size_t j = n - 1; j-- > 0;)
      rcum_[pw][j] = rcum_[pw][j + 1] + cell_integral(j, x(j), x(j + 1), pw + 1);
    const double k = std::pow(tail_constant_, pw + 1);
    const double tail = envelope_tail_integral(half_width_, p, pw + 1);
    left_tail_[pw] = std::pow(left_scale_, pw + 1) * k * tail;
    right_tail_[pw] = std::pow(right_scale_, pw + 1) * k * tail;
  }
  total_ = left_tail_[0] + cum_[0][n - 1] + right_tail_[0];
  square_total_ = left_tail_[1] + cum_[1][n - 1] + right_tail_[1];
}

double KernelTable::log_interp(double y) const {
  const std::size_t n = profile_.size();
  const double u = (y + half_width_) / dx_;
  const double fl = std::floor(u);
  auto j = static_cast<std::ptrdiff_t>(fl);
  j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 2);
  const double r = u - static_cast<double>(j);
  if (r == 0.0) return profile_[static_cast<std::size_t>(j)];
  if (r == 1.0) return profile_[static_cast<std::size_t>(j) + 1];
  const std::ptrdiff_t i0 = std::clamp<std::ptrdiff_t>(j - 1, 0, static_cast<std::ptrdiff_t>(n) - 4);
  const double s = u - static_cast<double>(i0);
  const double l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
  const double l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
  const double l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
  const double l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
  const double* lp = log_profile_.data() + i0;
  return std::exp(l0 * lp[0] + l1 * lp[1] + l2 * lp[2] + l3 * lp[3]);
}

double KernelTable::tail_value(double y) const {
  const double scale = y < 0.0 ? left_scale_ : right_scale_;
  return scale * tail_constant_ / (1.0 + std::pow(std::fabs(y), 1.0 + params_.alpha));
}

double KernelTable::profile_at(double y) const {
  if (y < -half_width_ || y > half_width_) return tail_value(y);
  return log_interp(y);
}

double KernelTable::cell_integral(std::size_t, double a, double b, int power) const {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (int g = 0; g < 4; ++g) {
    const double v = log_interp(mid + half * kGlNodes[g]);
    acc += kGlWeights[g] * (power == 1 ? v : v * v);
  }
  return acc * half;
}

double KernelTable::left_part(double y, int power) const {
  const int pw = power - 1;
  const double p = 1.0 + params_.alpha;
  const std::size_t n = profile_.size();
  if (y <= -half_width_)
    return std::pow(left_scale_ * tail_constant_, power) * envelope_tail_integral(-y, p, power);
  if (y >= half_width_) {
    const double total = pw == 0 ? total_ : square_total_;
    return total - right_part(y, power);
  }
  const double u = (y + half_width_) / dx_;
  const auto j = std::min(static_cast<std::size_t>(u), n - 2);
  return left_tail_[pw] + cum_[pw][j] + cell_integral(j, x(j), y, power);
}

double KernelTable::right_part(double y, int power) const {
  const int pw = power - 1;
  const double p = 1.0 + params_.alpha;
  const std::size_t n = profile_.size();
  if (y >= half_width_)
    return std::pow(right_scale_ * tail_constant_, power) * envelope_tail_integral(y, p, power);
  if (y <= -half_width_) {
    const double total = pw == 0 ? total_ : square_total_;
    return total - left_part(y, power);
  }
  const double u = (y + half_width_) / dx_;
  const auto j = std::min(static_cast<std::size_t>(u), n - 2);
  return right_tail_[pw] + rcum_[pw][j + 1] + cell_integral(j, y, x(j + 1), power);
}

double KernelTable::cdf(double y) const { return std::clamp(left_part(y, 1) / total_, 0.0, 1.0); }

double KernelTable::ccdf(double y) const { return std::clamp(right_part(y, 1) / total_, 0.0, 1.0); }

double KernelTable::mass_between(double a, double b) const {
  if (b <= a) return 0.0;
  const double v = a >= 0.0 ? right_part(a, 1) - right_part(b, 1) : left_part(b, 1) - left_part(a, 1);
  return std::max(v / total_, 0.0);
}

double KernelTable::square_mass_between(double a, double b) const {
  if (b <= a) return 0.0;
  const double v = a >= 0.0 ? right_part(a, 2) - right_part(b, 2) : left_part(b, 2) - left_part(a, 2);
  return std::max(v, 0.0);
}

void KernelTable::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put_bytes(out, kFormatVersion, 4);
  put_bytes(out, 0, 4);
  put_f64(out, params_.alpha);
  put_f64(out, params_.delta);
  put_f64(out, half_width_);
  put_f64(out, dx_);
  put_bytes(out, profile_.size(), 8);
  put_bytes(out, fft_size_, 8);
  put_f64(out, mass_);
  put_f64(out, clipped_mass_);
  put_f64(out, max_imag_);
  put_bytes(out, floor_replaced_, 8);
  for (double v : profile_) put_f64(out, v);
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

KernelTable KernelTable::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error(file.string() + " is not a kernel table file");
  const auto version = static_cast<std::uint32_t>(get_bytes(in, 4));
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported kernel table version " + std::to_string(version));
  get_bytes(in, 4);
  KernelTable t;
  t.params_.alpha = get_f64(in);
  t.params_.delta = get_f64(in);
  validate(t.params_);
  t.half_width_ = get_f64(in);
  t.dx_ = get_f64(in);
  const auto n = get_bytes(in, 8);
  if (n < 4 || n > (std::uint64_t{1} << 32)) throw std::runtime_error("corrupt kernel table size");
  t.fft_size_ = get_bytes(in, 8);
  t.mass_ = get_f64(in);
  t.clipped_mass_ = get_f64(in);
  t.max_imag_ = get_f64(in);
  t.floor_replaced_ = get_bytes(in, 8);
  t.profile_.resize(n);
  for (auto& v : t.profile_) v = get_f64(in);
  t.finalize();
  return t;
}

KernelTable default_kernel_table(const StableParams& params, const KernelBuildOptions& opts) {
  validate(params);
  double half_width = 20.0;
  double dx = 0.01;
  if (params.alpha < 2.0) {
    // Two-sided tail mass <= 2 Gamma(1+alpha) / (pi alpha X^alpha).
    const double a = params.alpha;
    const double x_tail = std::pow(4.0 * std::tgamma(1.0 + a) / (kPi * a * opts.mass_tol), 1.0 / a);
    half_width = std::max(20.0, std::ceil(x_tail));
    dx = 0.02;
  }
  const auto half_n = static_cast<std::size_t>(std::ceil(half_width / dx));
  const std::size_t n = 2 * half_n + 1;
  const std::size_t fft = std::bit_ceil(4 * n);
  return build_kernel_table(params, half_n * dx, n, fft, opts);
}

double kernel_value(const KernelTable& table, double t, double x) {
  if (!(t > 0.0)) throw DomainError("kernel_value: t must be positive");
  const double a = table.params().alpha;
  const double scale = a == 2.0 ? 1.0 / std::sqrt(t) : std::pow(t, -1.0 / a);
  return scale * table.profile_at(scale * x);
}

double stable_cdf(const KernelTable& table, double x) { return table.cdf(x); }

double tail_envelope(const KernelTable& table, double t, double x) {
  if (!(t > 0.0)) throw DomainError("tail_envelope: t must be positive");
  const double a = table.params().alpha;
  return table.tail_constant() * t / (std::pow(t, 1.0 + 1.0 / a) + std::pow(std::fabs(x), 1.0 + a));
}

}  // namespace fracspde
