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

#include "asgir/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

std::uint16_t rd16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void wr16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void wr32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void wrtag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

float sanitize(float v) {
  if (std::isnan(v)) return 0.0f;
  return std::clamp(v, -1.0f, 1.0f);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

constexpr double kKaiserBeta = 8.6;
constexpr int kResamplerTaps = 64;

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes,
                     std::string source_id) {
  if (bytes.size() < 12) throw FormatError("RIFF header: truncated (need 12 bytes)");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw FormatError("RIFF header: bad magic, expected 'RIFF'");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("RIFF header: form type is not 'WAVE'");

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::string id(reinterpret_cast<const char*>(hdr), 4);
    const std::size_t len = rd32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (id == "fmt ") {
      if (len < 16 || avail < 16)
        throw FormatError("fmt chunk: truncated (need 16 bytes)");
      const std::uint8_t* f = bytes.data() + body;
      format = rd16(f);
      channels = rd16(f + 2);
      rate = rd32(f + 4);
      block_align = rd16(f + 12);
      bits = rd16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 26 || avail < 26)
          throw FormatError("fmt chunk: truncated extensible header");
        format = rd16(f + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk: appears before fmt chunk");
      data = bytes.data() + body;
      // Streams written before the length is known carry a bogus size.
      data_len = std::min(len, avail);
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw FormatError("fmt chunk: missing");
  if (data == nullptr) throw FormatError("data chunk: missing");
  if (rate == 0) throw FormatError("fmt chunk: sample rate is zero");
  if (channels != 1 && channels != 2)
    throw UnsupportedCodecError("unsupported channel count " +
                                std::to_string(channels));
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw UnsupportedCodecError("unsupported encoding: format tag " +
                                std::to_string(format) + ", " +
                                std::to_string(bits) + " bits");
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels)
    throw FormatError("fmt chunk: block align " + std::to_string(block_align) +
                      " inconsistent with channels/bits");

  const std::size_t frames = data_len / block_align;
  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.source_id = std::move(source_id);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data + i * block_align;
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* s = p + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(rd16(s)) / 32768.0;
      } else {
        float v;
        std::uint32_t raw = rd32(s);
        std::memcpy(&v, &raw, 4);
        acc += sanitize(v);
      }
    }
    clip.samples[i] = sanitize(static_cast<float>(acc / channels));
  }
  return clip;
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip,
                                     WavEncoding encoding) {
  if (clip.sample_rate_hz <= 0) throw ArgumentError("encode_wav: sample rate must be positive");
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint32_t bps = pcm16 ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * bps);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  wrtag(out, "RIFF");
  wr32(out, 36 + data_len);
  wrtag(out, "WAVE");
  wrtag(out, "fmt ");
  wr32(out, 16);
  wr16(out, pcm16 ? kFormatPcm : kFormatFloat);
  wr16(out, 1);
  wr32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  wr32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * bps);
  wr16(out, static_cast<std::uint16_t>(bps));
  wr16(out, static_cast<std::uint16_t>(bps * 8));
  wrtag(out, "data");
  wr32(out, data_len);
  for (float s : clip.samples) {
    if (pcm16) {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      wr16(out, static_cast<std::uint16_t>(q));
    } else {
      std::uint32_t raw;
      std::memcpy(&raw, &s, 4);
      wr32(out, raw);
    }
  }
  return out;
}

AudioClip read_wav_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_wav(bytes, path.string());
}

void write_wav_file(const std::filesystem::path& path, const AudioClip& clip,
                    WavEncoding encoding) {
  write_file_bytes(path, encode_wav(clip, encoding));
}

AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw ArgumentError("resample: target rate must be positive");
  if (clip.sample_rate_hz <= 0) throw ArgumentError("resample: source rate must be positive");
  if (clip.samples.empty()) throw ArgumentError("resample: clip is empty");
  if (clip.sample_rate_hz == target_hz) return clip;

  const std::int64_t g = std::gcd(clip.sample_rate_hz, target_hz);
  const std::int64_t up = target_hz / g;
  const std::int64_t down = clip.sample_rate_hz / g;
  const double scale = std::min(1.0, static_cast<double>(target_hz) / clip.sample_rate_hz);
  const double cutoff = 0.5 * scale;  // cycles per input sample
  // 64 taps measured at the lower of the two rates.
  const double half_width = (kResamplerTaps / 2) / scale;
  const auto reach = static_cast<std::int64_t>(std::ceil(half_width));
  const std::int64_t taps = 2 * reach;
  const double i0_beta = bessel_i0(kKaiserBeta);

  auto kernel = [&](double x) {
    if (std::abs(x) >= half_width) return 0.0;
    const double r = x / half_width;
    const double win = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double arg = 2.0 * cutoff * x;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
    return 2.0 * cutoff * sinc * win;
  };

  // One filter per output phase; tap j sits at input index i - reach + 1 + j.
  auto build_phase = [&](std::int64_t phase) {
    std::vector<double> h(static_cast<std::size_t>(taps));
    const double frac = static_cast<double>(phase) / up;
    double sum = 0.0;
    for (std::int64_t j = 0; j < taps; ++j) {
      h[j] = kernel(frac - static_cast<double>(j - reach + 1));
      sum += h[j];
    }
    if (sum != 0.0)
      for (double& v : h) v /= sum;
    return h;
  };
  constexpr std::int64_t kMaxTableEntries = 1 << 22;
  std::vector<std::vector<double>> table;
  if (up * taps <= kMaxTableEntries) {
    table.reserve(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) table.push_back(build_phase(p));
  }

  const auto n_in = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t n_out = (n_in * up + down / 2) / down;
  AudioClip out;
  out.sample_rate_hz = target_hz;
  out.source_id = clip.source_id;
  out.samples.resize(static_cast<std::size_t>(n_out));
  std::vector<double> scratch;
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t base = num / up;
    const std::int64_t phase = num % up;
    const std::vector<double>* h;
    if (!table.empty()) {
      h = &table[static_cast<std::size_t>(phase)];
    } else {
      scratch = build_phase(phase);
      h = &scratch;
    }
    double acc = 0.0;
    const std::int64_t first = base - reach + 1;
    const std::int64_t lo = std::max<std::int64_t>(0, -first);
    const std::int64_t hi = std::min<std::int64_t>(taps, n_in - first);
    for (std::int64_t j = lo; j < hi; ++j) acc += (*h)[j] * clip.samples[first + j];
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

std::vector<Segment> segment(const AudioClip& clip, double seconds) {
  if (!(seconds > 0.0)) throw ArgumentError("segment: length must be positive");
  const auto seg_len = static_cast<std::size_t>(std::llround(seconds * clip.sample_rate_hz));
  std::vector<Segment> out;
  if (seg_len == 0) return out;
  const std::size_t count = clip.samples.size() / seg_len;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Segment s;
    s.parent_id = clip.source_id;
    s.offset_s = static_cast<double>(i * seg_len) / clip.sample_rate_hz;
    s.clip.sample_rate_hz = clip.sample_rate_hz;
    s.clip.source_id = clip.source_id + "@" + std::to_string(i * seg_len);
    s.clip.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(i * seg_len),
                          clip.samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * seg_len));
    out.push_back(std::move(s));
  }
  return out;
}

AudioClip load_canonical(std::span<const std::uint8_t> bytes,
                         std::string source_id) {
  AudioClip clip = decode_wav(bytes, std::move(source_id));
  if (clip.samples.empty()) return clip;
  clip = resample(clip, kCanonicalRateHz);
  for (float& s : clip.samples) s = sanitize(s);
  return clip;
}

std::vector<std::string> DatasetManifest::labels() const {
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.label);
  return {names.begin(), names.end()};
}

DatasetManifest parse_manifest(const std::string& csv,
                               const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  std::istringstream in(csv);
  std::string line;
  bool header_seen = false;
  bool has_region = false;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (!header_seen) {
      if (fields.size() < 2 || fields[0] != "path" || fields[1] != "label" ||
          (fields.size() == 3 && fields[2] != "region") || fields.size() > 3)
        throw ArgumentError("manifest: expected header 'path,label,region'");
      has_region = fields.size() == 3;
      header_seen = true;
      continue;
    }
    if (fields.size() < 2 || fields.size() > (has_region ? 3u : 2u))
      throw ArgumentError("manifest line " + std::to_string(line_no) +
                          ": wrong number of fields");
    if (fields[0].empty() || fields[1].empty())
      throw ArgumentError("manifest line " + std::to_string(line_no) +
                          ": path and label are required");
    ManifestEntry e;
    e.path = std::filesystem::path(fields[0]);
    if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
    e.label = fields[1];
    if (fields.size() == 3 && !fields[2].empty()) e.region = fields[2];
    const std::string key = e.path.lexically_normal().string();
    if (!seen.insert(key).second)
      throw ArgumentError("manifest: duplicate path " + key);
    manifest.entries.push_back(std::move(e));
  }
  if (!header_seen) throw ArgumentError("manifest: empty input");
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()),
                        path.parent_path());
}

}  // namespace asgir
