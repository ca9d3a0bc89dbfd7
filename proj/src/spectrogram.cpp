/* Copyright 2026 The ASGIR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "asgir/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asgir/error.hpp"

namespace asgir {
namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Mirror index without repeating the edge sample (numpy "reflect").
std::size_t reflect_index(std::int64_t i, std::int64_t n) {
  const std::int64_t period = 2 * (n - 1);
  std::int64_t m = i % period;
  if (m < 0) m += period;
  if (m >= n) m = period - m;
  return static_cast<std::size_t>(m);
}

// Mean of the triangle (lo, mid, hi) over [a, b].
double triangle_mean(double lo, double mid, double hi, double a, double b) {
  // Integral of the piecewise-linear triangle via its antiderivative.
  auto integral = [&](double x) {
    x = std::clamp(x, lo, hi);
    double acc = 0.0;
    if (mid > lo) {
      const double u = std::min(x, mid);
      acc += (u - lo) * (u - lo) / (2.0 * (mid - lo));
    }
    if (hi > mid && x > mid) {
      const double d0 = hi - mid;
      const double v = x - mid;
      acc += v - v * v / (2.0 * d0);
    }
    return acc;
  };
  return (integral(b) - integral(a)) / (b - a);
}

}  // namespace

void SpectrogramConfig::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("spectrogram: sample rate must be positive");
  if (!is_pow2(n_fft)) throw ConfigError("spectrogram: n_fft must be a power of two");
  if (hop_samples <= 0 || hop_samples > window_samples || window_samples > n_fft)
    throw ConfigError("spectrogram: need 0 < hop <= window <= n_fft");
  if (n_mels < 1) throw ConfigError("spectrogram: n_mels must be >= 1");
  if (!(fmin_hz >= 0.0) || !(fmin_hz < fmax_hz) || fmax_hz > sample_rate_hz / 2.0)
    throw ConfigError("spectrogram: need 0 <= fmin < fmax <= sample_rate/2");
  if (!(log_floor > 0.0)) throw ConfigError("spectrogram: log floor must be positive");
  if (!(norm_std > 0.0) || !std::isfinite(norm_std) || !std::isfinite(norm_mean))
    throw ConfigError("spectrogram: norm_std must be positive and finite");
}

std::string SpectrogramConfig::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << "sr=" << sample_rate_hz << ";nfft=" << n_fft << ";hop=" << hop_samples
     << ";win=" << window_samples << ";mels=" << n_mels << ";fmin=" << fmin_hz
     << ";fmax=" << fmax_hz << ";floor=" << log_floor << ";mean=" << norm_mean
     << ";std=" << norm_std;
  return os.str();
}

void fft(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ArgumentError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly rather than by recurrence to keep the
        // error at machine precision for every k.
        const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(std::max(length, 0)));
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int i = 0; i < length; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (length - 1));
  return w;
}

std::vector<double> power_spectrum(std::span<const double> frame, int n_fft) {
  if (!is_pow2(n_fft)) throw ArgumentError("power_spectrum: n_fft must be a power of two");
  if (frame.size() > static_cast<std::size_t>(n_fft))
    throw ArgumentError("power_spectrum: frame longer than n_fft");
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  std::copy(frame.begin(), frame.end(), buf.begin());
  fft(buf);
  std::vector<double> out(static_cast<std::size_t>(n_fft / 2 + 1));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(buf[k]);
  return out;
}

Matrix stft_power(std::span<const float> samples, const SpectrogramConfig& cfg) {
  cfg.validate();
  if (samples.size() < 2) throw ArgumentError("stft_power: need at least 2 samples for reflect padding");
  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t hop = cfg.hop_samples;
  const std::int64_t win = cfg.window_samples;
  const std::int64_t pad = win / 2;
  const std::int64_t frames = (n + hop - 1) / hop;
  const auto window = hamming_window(cfg.window_samples);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft / 2 + 1);

  Matrix out(static_cast<std::size_t>(frames), bins);
  std::vector<double> frame(static_cast<std::size_t>(win));
  for (std::int64_t t = 0; t < frames; ++t) {
    const std::int64_t start = t * hop - pad;
    for (std::int64_t i = 0; i < win; ++i)
      frame[i] = samples[reflect_index(start + i, n)] * window[i];
    const auto p = power_spectrum(frame, cfg.n_fft);
    std::copy(p.begin(), p.end(), out.row(static_cast<std::size_t>(t)).begin());
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const SpectrogramConfig& cfg) {
  cfg.validate();
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft / 2 + 1);
  const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.n_fft;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  // Pin the end points so round-off in the mel round trip cannot move them.
  edges.front() = cfg.fmin_hz;
  edges.back() = cfg.fmax_hz;

  Matrix fb(static_cast<std::size_t>(cfg.n_mels), bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    if (!(lo < mid) || !(mid < hi))
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                        " has zero width; n_mels too large for the frequency range");
    double total = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double a = (static_cast<double>(k) - 0.5) * bin_hz;
      const double b = (static_cast<double>(k) + 0.5) * bin_hz;
      if (b <= lo || a >= hi) continue;
      const double w = triangle_mean(lo, mid, hi, a, b);
      fb(static_cast<std::size_t>(m), k) = w;
      total += w;
    }
    if (!(total > 0.0))
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) + " covers no FFT bin");
  }
  return fb;
}

Matrix log_mel_energies(std::span<const float> samples,
                        const SpectrogramConfig& cfg, const Matrix& filterbank) {
  const Matrix power = stft_power(samples, cfg);
  if (filterbank.cols() != power.cols())
    throw ShapeError("log_mel: filterbank width does not match FFT bins");
  Matrix out(power.rows(), filterbank.rows());
  for (std::size_t t = 0; t < power.rows(); ++t) {
    const auto p = power.row(t);
    for (std::size_t m = 0; m < filterbank.rows(); ++m) {
      const auto f = filterbank.row(m);
      double e = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) e += f[k] * p[k];
      out(t, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

MelSpectrogram log_mel(const Segment& segment, const SpectrogramConfig& cfg) {
  return log_mel(segment, cfg, mel_filterbank(cfg));
}

MelSpectrogram log_mel(const Segment& segment, const SpectrogramConfig& cfg,
                       const Matrix& filterbank) {
  cfg.validate();
  if (segment.clip.sample_rate_hz != cfg.sample_rate_hz)
    throw ArgumentError("log_mel: segment rate " + std::to_string(segment.clip.sample_rate_hz) +
                        " does not match config rate " + std::to_string(cfg.sample_rate_hz));
  MelSpectrogram spec;
  spec.values = log_mel_energies(segment.clip.samples, cfg, filterbank);
  for (double& v : spec.values.data()) v = (v - cfg.norm_mean) / cfg.norm_std;
  spec.frame_hop_s = static_cast<double>(cfg.hop_samples) / cfg.sample_rate_hz;
  spec.window_s = static_cast<double>(cfg.window_samples) / cfg.sample_rate_hz;
  return spec;
}

void NormAccumulator::add(const Matrix& raw_log_mel) {
  for (double v : raw_log_mel.data()) {
    sum_ += v;
    sum_sq_ += v * v;
  }
  count_ += raw_log_mel.data().size();
}

void NormAccumulator::merge(const NormAccumulator& other) {
  count_ += other.count_;
  sum_ += other.sum_;
  sum_sq_ += other.sum_sq_;
}

double NormAccumulator::mean() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }

double NormAccumulator::stddev() const {
  if (count_ == 0) return 1.0;
  const double m = mean();
  const double var = std::max(0.0, sum_sq_ / static_cast<double>(count_) - m * m);
  const double sd = std::sqrt(var);
  // A constant corpus (e.g. all silence) would otherwise give std 0.
  return sd > 1e-12 ? sd : 1.0;
}

std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream os;
  os.precision(9);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << m(r, c);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace asgir
