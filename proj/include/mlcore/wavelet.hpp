#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mlcore/error.hpp"

namespace mlcore {

using Signal = std::vector<double>;

/// Orthonormal two-channel filter bank; g_k = (-1)^k h_{L-1-k}.
struct WaveletFilter {
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t length() const noexcept { return lowpass.size(); }

  static WaveletFilter from_lowpass(std::string name, std::vector<double> h) {
    WaveletFilter w{std::move(name), std::move(h), {}};
    const std::size_t L = w.lowpass.size();
    for (std::size_t k = 0; k < L; ++k) w.highpass.push_back((k % 2 ? -1.0 : 1.0) * w.lowpass[L - 1 - k]);
    return w;
  }

  static WaveletFilter haar() {
    const double r = 1.0 / std::numbers::sqrt2;
    return from_lowpass("haar", {r, r});
  }

  static WaveletFilter d4() {
    const double s3 = std::numbers::sqrt3, c = 4.0 * std::numbers::sqrt2;
    return from_lowpass("d4", {(1 + s3) / c, (3 + s3) / c, (3 - s3) / c, (1 - s3) / c});
  }

  static WaveletFilter by_name(std::string_view name) {
    if (name == "haar") return haar();
    if (name == "d4" || name == "db2") return d4();
    throw InvalidParameter("unknown wavelet filter '" + std::string(name) + "'");
  }
};

/// details[0] is the finest level.
struct DwtCoefficients {
  std::vector<Signal> details;
  Signal approximation;
  std::size_t length = 0;

  std::size_t levels() const noexcept { return details.size(); }
};

namespace detail {

inline bool power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline void analysis_step(const Signal& x, const WaveletFilter& w, Signal& a, Signal& d) {
  const std::size_t N = x.size(), half = N / 2;
  a.assign(half, 0.0);
  d.assign(half, 0.0);
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t k = 0; k < w.length(); ++k) {
      const double v = x[(2 * i + k) % N];
      a[i] += w.lowpass[k] * v;
      d[i] += w.highpass[k] * v;
    }
}

inline Signal synthesis_step(const Signal& a, const Signal& d, const WaveletFilter& w) {
  const std::size_t N = 2 * a.size();
  Signal x(N, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < w.length(); ++k) x[(2 * i + k) % N] += w.lowpass[k] * a[i] + w.highpass[k] * d[i];
  return x;
}

}  // namespace detail

/// Periodic Mallat pyramid: a[i] = sum_k h[k] x[(2i + k) mod N], same with g
/// for the details.
inline DwtCoefficients dwt(const Signal& x, const WaveletFilter& w, std::size_t levels) {
  if (levels < 1) throw InvalidParameter("dwt needs at least one level");
  if (!detail::power_of_two(x.size()) || x.size() < (std::size_t(1) << levels))
    throw InvalidLength("dwt input length " + std::to_string(x.size()) + " is not a power of two >= 2^" +
                        std::to_string(levels));
  DwtCoefficients c;
  c.length = x.size();
  Signal a = x;
  for (std::size_t l = 0; l < levels; ++l) {
    Signal next, d;
    detail::analysis_step(a, w, next, d);
    c.details.push_back(std::move(d));
    a = std::move(next);
  }
  c.approximation = std::move(a);
  return c;
}

inline Signal idwt(const DwtCoefficients& c, const WaveletFilter& w) {
  if (c.levels() < 1) throw InvalidCoefficients("no detail levels");
  if (!detail::power_of_two(c.length) || (c.length >> c.levels()) != c.approximation.size() ||
      c.approximation.empty())
    throw InvalidCoefficients("approximation length does not match signal length and level count");
  for (std::size_t l = 0; l < c.levels(); ++l)
    if (c.details[l].size() != (c.length >> (l + 1)))
      throw InvalidCoefficients("detail level " + std::to_string(l + 1) + " has " +
                                std::to_string(c.details[l].size()) + " coefficients, expected " +
                                std::to_string(c.length >> (l + 1)));
  Signal a = c.approximation;
  for (std::size_t l = c.levels(); l-- > 0;) a = detail::synthesis_step(a, c.details[l], w);
  return a;
}

/// Same per-level arrays, every one of input length.
struct UdwtCoefficients {
  std::vector<Signal> details;
  Signal approximation;
};

/// Undecimated (a trous) transform without rescaling: level j uses the filters
/// upsampled by 2^(j-1), a_j[t] = sum_k h[k] a_{j-1}[(t + 2^(j-1) k) mod N].
/// Level-1 outputs at even t equal the level-1 dwt outputs at t/2.
inline UdwtCoefficients udwt(const Signal& x, const WaveletFilter& w, std::size_t levels) {
  if (levels < 1) throw InvalidParameter("udwt needs at least one level");
  if (x.size() < w.length())
    throw InvalidLength("udwt input length " + std::to_string(x.size()) + " shorter than filter length " +
                        std::to_string(w.length()));
  const std::size_t N = x.size();
  UdwtCoefficients c;
  Signal a = x;
  std::size_t stride = 1;
  for (std::size_t l = 0; l < levels; ++l, stride *= 2) {
    Signal next(N, 0.0), d(N, 0.0);
    for (std::size_t t = 0; t < N; ++t)
      for (std::size_t k = 0; k < w.length(); ++k) {
        const double v = a[(t + stride * k) % N];
        next[t] += w.lowpass[k] * v;
        d[t] += w.highpass[k] * v;
      }
    c.details.push_back(std::move(d));
    a = std::move(next);
  }
  c.approximation = std::move(a);
  return c;
}

enum class MotherWavelet { Morlet, MexicanHat };

inline constexpr double morlet_omega0 = 6.0;

inline std::complex<double> mother_wavelet(MotherWavelet m, double t) {
  const double gauss = std::exp(-0.5 * t * t);
  if (m == MotherWavelet::Morlet)
    return std::pow(std::numbers::pi, -0.25) * gauss * std::polar(1.0, morlet_omega0 * t);
  return 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25)) * (1.0 - t * t) * gauss;
}

inline MotherWavelet mother_wavelet_from_string(std::string_view s) {
  if (s == "morlet") return MotherWavelet::Morlet;
  if (s == "mexican_hat" || s == "mexicanhat") return MotherWavelet::MexicanHat;
  throw InvalidParameter("unknown mother wavelet '" + std::string(s) + "'");
}

/// Direct time-domain transform: W(s, b) = sum_n x[n] conj(psi((n - b)/s)) / sqrt(s)
/// with n - b taken as the periodic offset in (-N/2, N/2]. Rows are scales.
inline Eigen::MatrixXcd cwt(const Signal& x, const std::vector<double>& scales, MotherWavelet m) {
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidParameter("cwt scales must be positive and finite");
  const auto N = static_cast<std::ptrdiff_t>(x.size());
  Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(Eigen::Index(scales.size()), Eigen::Index(N));
  for (std::size_t r = 0; r < scales.size(); ++r) {
    const double s = scales[r], norm = 1.0 / std::sqrt(s);
    std::vector<std::complex<double>> psi(static_cast<std::size_t>(N));
    for (std::ptrdiff_t off = 0; off < N; ++off) {
      const std::ptrdiff_t tau = off > N / 2 ? off - N : off;
      psi[static_cast<std::size_t>(off)] = std::conj(mother_wavelet(m, double(tau) / s)) * norm;
    }
    for (std::ptrdiff_t b = 0; b < N; ++b) {
      std::complex<double> acc = 0.0;
      for (std::ptrdiff_t n = 0; n < N; ++n) acc += x[static_cast<std::size_t>(n)] * psi[static_cast<std::size_t>(((n - b) % N + N) % N)];
      W(Eigen::Index(r), Eigen::Index(b)) = acc;
    }
  }
  return W;
}

}  // namespace mlcore
