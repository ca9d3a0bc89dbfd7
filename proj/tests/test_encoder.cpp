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

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "asgir/encoder.hpp"
#include "asgir/error.hpp"

using namespace asgir;

namespace {

using Rows = std::vector<std::vector<double>>;

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.patch_h = 2;
  c.patch_w = 2;
  c.stride_h = 2;
  c.stride_w = 2;
  c.embed_dim = 4;
  c.n_layers = 1;
  c.n_heads = 1;
  c.mlp_ratio = 2;
  c.input_frames = 4;
  c.input_bins = 2;
  return c;
}

MelSpectrogram spec_from(std::size_t frames, std::size_t bins, const std::vector<double>& v) {
  MelSpectrogram s;
  s.values = Matrix(frames, bins);
  s.values.data() = v;
  return s;
}

MelSpectrogram random_spec(const EncoderConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MelSpectrogram s;
  s.values = Matrix(static_cast<std::size_t>(cfg.input_frames), static_cast<std::size_t>(cfg.input_bins));
  for (double& v : s.values.data()) v = g(rng);
  return s;
}

// Scalar reference transformer over plain vectors.
double at(const Tensor& t, std::size_t r, std::size_t c) { return t.values[r * t.dims[1] + c]; }

Rows matmul(const Rows& x, const Tensor& w, const Tensor& b) {
  Rows out(x.size(), std::vector<double>(w.dims[1]));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w.dims[1]; ++j) {
      double acc = b.values[j];
      for (std::size_t k = 0; k < w.dims[0]; ++k) acc += x[i][k] * at(w, k, j);
      out[i][j] = acc;
    }
  return out;
}

Rows norm_rows(const Rows& x, const Tensor& scale, const Tensor& offset) {
  Rows out = x;
  for (auto& r : out) {
    const double n = static_cast<double>(r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < r.size(); ++j)
      r[j] = (r[j] - mean) / std::sqrt(var + 1e-6) * scale.values[j] + offset.values[j];
  }
  return out;
}

std::vector<double> reference_encode(const EncoderConfig& cfg, const EncoderWeights& w,
                                     const MelSpectrogram& spec) {
  // Patches, frequency-major.
  Rows patches;
  for (int f0 = 0; f0 + cfg.patch_h <= cfg.input_bins; f0 += cfg.stride_h)
    for (int t0 = 0; t0 + cfg.patch_w <= cfg.input_frames; t0 += cfg.stride_w) {
      std::vector<double> p;
      for (int i = 0; i < cfg.patch_h; ++i)
        for (int j = 0; j < cfg.patch_w; ++j)
          p.push_back(spec.values(static_cast<std::size_t>(t0 + j), static_cast<std::size_t>(f0 + i)));
      patches.push_back(p);
    }
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  Rows x;
  x.push_back(std::vector<double>(w.cls_token.values.begin(), w.cls_token.values.end()));
  for (auto& r : matmul(patches, w.patch_projection_w, w.patch_projection_b)) x.push_back(r);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x[i][j] += at(w.positional_embeddings, i, j);

  const std::size_t hd = d / static_cast<std::size_t>(cfg.n_heads);
  for (const auto& L : w.layers) {
    const Rows h = norm_rows(x, L.attn_norm_scale, L.attn_norm_offset);
    const Rows q = matmul(h, L.query_w, L.query_b), k = matmul(h, L.key_w, L.key_b),
               v = matmul(h, L.value_w, L.value_b);
    Rows ctx(x.size(), std::vector<double>(d, 0.0));
    for (std::size_t head = 0; head < static_cast<std::size_t>(cfg.n_heads); ++head) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> s(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
          double dot = 0.0;
          for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) dot += q[i][c] * k[j][c];
          s[j] = dot / std::sqrt(static_cast<double>(hd));
        }
        double total = 0.0;
        for (double& e : s) total += (e = std::exp(e));
        for (std::size_t j = 0; j < x.size(); ++j)
          for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) ctx[i][c] += s[j] / total * v[j][c];
      }
    }
    const Rows att = matmul(ctx, L.attn_out_w, L.attn_out_b);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += att[i][j];
    Rows mid = matmul(norm_rows(x, L.mlp_norm_scale, L.mlp_norm_offset), L.mlp_in_w, L.mlp_in_b);
    for (auto& r : mid)
      for (double& z : r) z = 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
    const Rows mlp = matmul(mid, L.mlp_out_w, L.mlp_out_b);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += mlp[i][j];
  }
  const Rows out = norm_rows(x, w.final_norm_scale, w.final_norm_offset);
  if (cfg.pooling == Pooling::kClsToken) return out[0];
  std::vector<double> pooled(d, 0.0);
  for (std::size_t i = 1; i < out.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) pooled[j] += out[i][j] / static_cast<double>(out.size() - 1);
  return pooled;
}

void randomize_everything(EncoderWeights& w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 0.5f);
  for (auto& [name, t] : w.named())
    for (float& v : t->values) v = g(rng) + (name.ends_with(".scale") ? 1.0f : 0.0f);
}

}  // namespace

TEST_CASE("patch counts follow the closed form") {
  const EncoderConfig cfg;
  MelSpectrogram s;
  s.values = Matrix(200, 128);
  const auto p = patchify(s, cfg);
  CHECK(p.rows() == ((128 - 16) / 10 + 1) * ((200 - 16) / 10 + 1));
  CHECK(p.rows() == 228);
  CHECK(p.cols() == 256);
  CHECK(cfg.n_patches() == 228);

  EncoderConfig tiled = cfg;
  tiled.stride_h = tiled.stride_w = 16;
  CHECK(patchify(s, tiled).rows() == 96);
  CHECK(tiled.n_patches() == 96);

  MelSpectrogram small;
  small.values = Matrix(10, 128);
  CHECK_THROWS_AS(patchify(small, cfg), ShapeError);
}

TEST_CASE("patch layout: frequency-major, element (i, j) at i * patch_w + j") {
  EncoderConfig cfg = tiny_config();
  MelSpectrogram s = spec_from(4, 2, {1, 2, 3, 4, 5, 6, 7, 8});  // (t, f) row-major
  const auto p = patchify(s, cfg);
  REQUIRE(p.rows() == 2);
  // Patch 0 covers frames 0-1; element (i = bin, j = frame).
  CHECK(p(0, 0) == 1);  // t0 f0
  CHECK(p(0, 1) == 3);  // t1 f0
  CHECK(p(0, 2) == 2);  // t0 f1
  CHECK(p(0, 3) == 4);  // t1 f1
  CHECK(p(1, 0) == 5);
  CHECK(p(1, 3) == 8);
}

TEST_CASE("constant spectrogram gives identical patches") {
  MelSpectrogram s;
  s.values = Matrix(200, 128, -0.7);
  const auto p = patchify(s, EncoderConfig{});
  for (Eigen::Index r = 1; r < p.rows(); ++r) CHECK(p.row(r) == p.row(0));
}

TEST_CASE("zeroed output projections reduce to a closed form") {
  const EncoderConfig cfg = tiny_config();
  EncoderWeights w = random_weights(cfg, 1);
  // Hand-set projection, positions and cls.
  w.patch_projection_w.values = {1, 0, 0, 0,  //
                                 0, 1, 0, 0,  //
                                 0, 0, 1, 0,  //
                                 0, 0, 0, 1};
  w.patch_projection_b.values = {0.5f, 0, 0, 0};
  w.positional_embeddings.values = {9, 9, 9, 9,  //
                                    0, 0, 0, 1,  //
                                    1, 0, 0, 0};
  for (auto* t : {&w.layers[0].attn_out_w, &w.layers[0].attn_out_b, &w.layers[0].mlp_out_w,
                  &w.layers[0].mlp_out_b})
    std::fill(t->values.begin(), t->values.end(), 0.0f);

  // Patch 0 = (1, 3, 2, 4), patch 1 = (5, 7, 6, 8).
  const MelSpectrogram s = spec_from(4, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  // Tokens after projection and position:
  //   a = (1.5, 3, 2, 5), b = (6.5, 7, 6, 8).
  // Layer norm with unit scale: (x - mean) / sqrt(var + 1e-6).
  auto ln = [](std::array<double, 4> x) {
    const double m = (x[0] + x[1] + x[2] + x[3]) / 4.0;
    double v = 0.0;
    for (double e : x) v += (e - m) * (e - m);
    v /= 4.0;
    for (double& e : x) e = (e - m) / std::sqrt(v + 1e-6);
    return x;
  };
  const auto a = ln({1.5, 3, 2, 5});
  const auto b = ln({6.5, 7, 6, 8});
  const Embedding e = Encoder(cfg, w).encode(s);
  REQUIRE(e.vector.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(e.vector[j] - (a[j] + b[j]) / 2.0) <= 1e-6);
  // By hand: mean 2.875, variance 1.796875, so a0 = -1.375 / 1.340476 = -1.025755.
  CHECK(a[0] == doctest::Approx(-1.025755).epsilon(1e-6));
}

TEST_CASE("small encoder matches the scalar reference within 1e-6") {
  std::mt19937_64 rng(3);
  for (Pooling pooling : {Pooling::kMean, Pooling::kClsToken}) {
    for (int heads : {1, 2}) {
      EncoderConfig cfg = tiny_config();
      cfg.n_heads = heads;
      cfg.n_layers = 2;
      cfg.input_frames = 8;
      cfg.input_bins = 4;
      cfg.pooling = pooling;
      EncoderWeights w = random_weights(cfg, 7);
      randomize_everything(w, static_cast<std::uint64_t>(heads) * 11);
      const MelSpectrogram s = random_spec(cfg, rng);
      const auto got = Encoder(cfg, w).encode(s).vector;
      const auto ref = reference_encode(cfg, w, s);
      REQUIRE(got.size() == ref.size());
      for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::abs(got[j] - ref[j]) <= 1e-6);
    }
  }
}

TEST_CASE("attention rows sum to one") {
  const EncoderConfig cfg;
  const Encoder enc(cfg, random_weights(cfg, 42));
  std::mt19937_64 rng(1);
  AttentionProbe probe;
  const Embedding e = enc.encode(random_spec(cfg, rng), &probe);
  CHECK(e.vector.size() == 192);
  REQUIRE(probe.maps.size() == 9);
  for (const auto& m : probe.maps) {
    CHECK(m.rows() == 229);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      CHECK(std::abs(m.row(r).sum() - 1.0) <= 1e-6);
      CHECK(m.row(r).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("property: permuting patches with their positions leaves the mean embedding unchanged") {
  EncoderConfig cfg;
  cfg.embed_dim = 48;
  cfg.n_heads = 4;
  cfg.n_layers = 2;
  EncoderWeights w = random_weights(cfg, 5);
  randomize_everything(w, 6);
  for (float& v : w.patch_projection_w.values) v *= 0.1f;
  const Encoder enc(cfg, w);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd patches = patchify(random_spec(cfg, rng), cfg);
    const Eigen::VectorXd base = enc.encode_patches(patches, enc.positional());
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(patches.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd pp(patches.rows(), patches.cols());
    Eigen::MatrixXd pos(enc.positional().rows(), enc.positional().cols());
    pos.row(0) = enc.positional().row(0);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pp.row(static_cast<Eigen::Index>(i)) = patches.row(perm[i]);
      pos.row(static_cast<Eigen::Index>(i) + 1) = enc.positional().row(perm[i] + 1);
    }
    const Eigen::VectorXd moved = enc.encode_patches(pp, pos);
    CHECK((moved - base).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("encode is bit-stable and finite") {
  const EncoderConfig cfg;
  const Encoder enc(cfg, random_weights(cfg, 9));
  std::mt19937_64 rng(2);
  const auto s = random_spec(cfg, rng);
  const auto a = enc.encode(s).vector;
  CHECK(enc.encode(s).vector == a);
  CHECK(Encoder(cfg, random_weights(cfg, 9)).encode(s).vector == a);
  for (double v : a) CHECK(std::isfinite(v));
  CHECK(Encoder(cfg, random_weights(cfg, 10)).encode(s).vector != a);

  MelSpectrogram wrong;
  wrong.values = Matrix(100, 128);
  CHECK_THROWS_AS(enc.encode(wrong), ShapeError);
}

TEST_CASE("random weights follow the initialization rule") {
  const EncoderConfig cfg;
  const EncoderWeights w = random_weights(cfg, 3);
  double sum = 0.0, sq = 0.0;
  for (float v : w.layers[1].mlp_in_w.values) {
    sum += v;
    sq += double(v) * v;
  }
  const double n = static_cast<double>(w.layers[1].mlp_in_w.values.size());
  CHECK(std::abs(sum / n) < 1e-3);
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.02).epsilon(0.02));
  for (float v : w.final_norm_scale.values) CHECK(v == 1.0f);
  for (float v : w.layers[0].key_b.values) CHECK(v == 0.0f);
}

TEST_CASE("config validation") {
  EncoderConfig c;
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.patch_h = 200;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.embed_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ASGW round trip is bit-exact") {
  EncoderConfig cfg = tiny_config();
  cfg.pooling = Pooling::kClsToken;
  EncoderWeights w = random_weights(cfg, 12);
  randomize_everything(w, 13);
  const auto bytes = save_weights(cfg, w);
  const auto [cfg2, w2] = load_weights(bytes);
  CHECK(cfg2 == cfg);
  CHECK(w2 == w);
  CHECK(save_weights(cfg2, w2) == bytes);
  CHECK(weights_hash(cfg, w) == weights_hash(cfg2, w2));

  const EncoderConfig big;
  const auto wb = random_weights(big, 1);
  const auto [cb, wb2] = load_weights(save_weights(big, wb));
  CHECK(wb2 == wb);
}

TEST_CASE("ASGW errors are distinct") {
  const EncoderConfig cfg = tiny_config();
  const auto w = random_weights(cfg, 1);
  const auto bytes = save_weights(cfg, w);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load_weights(bad_magic), BadMagicError);
  CHECK_THROWS_AS(load_weights(std::vector<std::uint8_t>{}), BadMagicError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(load_weights(bad_version), VersionError);

  // Truncate inside the last tensor's payload.
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 6);
  try {
    load_weights(cut);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.tensor() == "final_norm.offset");
    CHECK(std::string(e.what()).find("final_norm.offset") != std::string::npos);
  }

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(load_weights(trailing), WeightError);

  EncoderWeights wrong = w;
  wrong.layers[0].key_w = Tensor::zeros({4, 3});
  try {
    check_weights(cfg, wrong);
    FAIL("expected ShapeMismatchError");
  } catch (const ShapeMismatchError& e) {
    CHECK(e.tensor() == "layers.0.attn.key.weight");
  }
  CHECK_THROWS_AS(Encoder(cfg, wrong), ShapeMismatchError);

  // A file whose config disagrees with its tensors.
  EncoderConfig other = cfg;
  other.embed_dim = 8;
  other.n_heads = 2;
  const auto other_bytes = save_weights(other, random_weights(other, 1));
  auto spliced = save_weights(cfg, w);
  // Header (magic, version, count, 11 ints) is 4 + 4 + 4 + 44 bytes.
  std::vector<std::uint8_t> mixed(spliced.begin(), spliced.begin() + 56);
  mixed.insert(mixed.end(), other_bytes.begin() + 56, other_bytes.end());
  CHECK_THROWS_AS(load_weights(mixed), ShapeMismatchError);

  EncoderWeights nan_w = w;
  nan_w.cls_token.values[0] = std::nanf("");
  CHECK_THROWS_AS(check_weights(cfg, nan_w), WeightError);
}
