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

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "asgir/audio.hpp"

namespace asgir {

// Dense row-major matrix of doubles. Small on purpose: the DSP front-end only
// needs shape, element access and row views.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct SpectrogramConfig {
  int sample_rate_hz = kCanonicalRateHz;
  int n_fft = 512;
  int hop_samples = 160;
  int window_samples = 400;
  int n_mels = 128;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;
  double norm_mean = 0.0;
  double norm_std = 1.0;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;
  // Stable textual form, used as part of embedding-cache keys.
  std::string fingerprint() const;
};

// T x F log-mel energies; rows are frames (10 ms hop), columns mel bins.
struct MelSpectrogram {
  Matrix values;
  double frame_hop_s = 0.010;
  double window_s = 0.025;

  std::size_t frames() const { return values.rows(); }
  std::size_t bins() const { return values.cols(); }
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::span<std::complex<double>> data);

// Symmetric Hamming window of the given length.
std::vector<double> hamming_window(int length);

// Power spectrum |X_k|^2, k in [0, n_fft/2], of one frame zero-padded to n_fft.
std::vector<double> power_spectrum(std::span<const double> frame, int n_fft);

// Centered STFT with reflect padding of window_samples/2 on both sides;
// yields ceil(len / hop) frames of n_fft/2 + 1 power bins.
Matrix stft_power(std::span<const float> samples, const SpectrogramConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (n_fft/2 + 1) triangular filters on the HTK mel scale. Each weight
// is the triangle's mean over the frequency interval of its FFT bin, so narrow
// low-frequency filters still touch at least one bin.
Matrix mel_filterbank(const SpectrogramConfig& cfg);

// Unnormalized ln(max(filterbank * power, floor)).
Matrix log_mel_energies(std::span<const float> samples,
                        const SpectrogramConfig& cfg, const Matrix& filterbank);

// (ln(max(filterbank * power, floor)) - norm_mean) / norm_std.
MelSpectrogram log_mel(const Segment& segment, const SpectrogramConfig& cfg);
MelSpectrogram log_mel(const Segment& segment, const SpectrogramConfig& cfg,
                       const Matrix& filterbank);

// Streaming mean/std of raw log-mel entries; feeds norm_mean / norm_std.
class NormAccumulator {
 public:
  void add(const Matrix& raw_log_mel);
  void merge(const NormAccumulator& other);
  double mean() const;
  double stddev() const;
  std::size_t count() const { return count_; }

 private:
  std::size_t count_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

std::string matrix_to_csv(const Matrix& m);

}  // namespace asgir
