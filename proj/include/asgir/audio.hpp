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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asgir {

inline constexpr int kCanonicalRateHz = 16000;
inline constexpr double kSegmentSeconds = 2.0;

// Mono PCM, samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRateHz;
  std::string source_id;

  double duration_s() const {
    return sample_rate_hz > 0
               ? static_cast<double>(samples.size()) / sample_rate_hz
               : 0.0;
  }
};

// A fixed-length, non-overlapping slice of a recording.
struct Segment {
  AudioClip clip;
  std::string parent_id;
  double offset_s = 0.0;
  std::optional<int> label;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Decodes a RIFF/WAVE container holding 16-bit PCM or 32-bit float samples
// with one or two channels. Stereo is averaged to mono; the sample rate is
// preserved. Throws FormatError / UnsupportedCodecError.
AudioClip decode_wav(std::span<const std::uint8_t> bytes,
                     std::string source_id = {});

// Mono writer. kPcm16 quantizes with round-half-away and clamps to int16.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip,
                                     WavEncoding encoding = WavEncoding::kPcm16);

AudioClip read_wav_file(const std::filesystem::path& path);
void write_wav_file(const std::filesystem::path& path, const AudioClip& clip,
                    WavEncoding encoding = WavEncoding::kPcm16);

// Kaiser-windowed sinc (beta 8.6, 64 taps) polyphase rational resampler.
// Identity when the rates already match.
AudioClip resample(const AudioClip& clip, int target_hz);

// Splits into floor(duration / seconds) back-to-back segments; the trailing
// remainder is dropped.
std::vector<Segment> segment(const AudioClip& clip,
                             double seconds = kSegmentSeconds);

// Decode, mix down, resample to 16 kHz, and clamp into [-1, 1].
AudioClip load_canonical(std::span<const std::uint8_t> bytes,
                         std::string source_id = {});

struct ManifestEntry {
  std::filesystem::path path;
  std::string label;
  std::optional<std::string> region;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  // Sorted, de-duplicated label names; index is the class id.
  std::vector<std::string> labels() const;
};

// CSV with header `path,label,region` (region column optional/empty).
// Relative paths are resolved against `base_dir`. Throws ArgumentError on
// duplicate paths or malformed rows.
DatasetManifest parse_manifest(const std::string& csv,
                               const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace asgir
