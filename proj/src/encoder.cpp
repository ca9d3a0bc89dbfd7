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

#include "asgir/encoder.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <random>

#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

constexpr char kMagic[4] = {'A', 'S', 'G', 'W'};
constexpr std::uint32_t kConfigInts = 11;

using Shape = std::vector<std::uint64_t>;

Eigen::MatrixXd to_matrix(const Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.dims.at(0));
  const auto cols = static_cast<Eigen::Index>(t.dims.at(1));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t.values[r * cols + c];
  return m;
}

Eigen::RowVectorXd to_row(const Tensor& t) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(t.values.size()));
  for (std::size_t i = 0; i < t.values.size(); ++i) v(static_cast<Eigen::Index>(i)) = t.values[i];
  return v;
}

// Box-Muller on mt19937_64 so a seed gives the same weights on every platform.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

void write_config(ByteWriter& w, const EncoderConfig& c) {
  w.u32(kConfigInts);
  for (int v : {c.patch_h, c.patch_w, c.stride_h, c.stride_w, c.embed_dim, c.n_layers,
                c.n_heads, c.mlp_ratio, static_cast<int>(c.pooling), c.input_frames,
                c.input_bins})
    w.u32(static_cast<std::uint32_t>(v));
}

EncoderConfig read_config(ByteReader& r) {
  r.set_context("config");
  const std::uint32_t n = r.u32();
  if (n != kConfigInts)
    throw WeightError("ASGW config block has " + std::to_string(n) + " integers, expected " +
                      std::to_string(kConfigInts));
  std::uint32_t v[kConfigInts];
  for (auto& x : v) x = r.u32();
  EncoderConfig c;
  c.patch_h = static_cast<int>(v[0]);
  c.patch_w = static_cast<int>(v[1]);
  c.stride_h = static_cast<int>(v[2]);
  c.stride_w = static_cast<int>(v[3]);
  c.embed_dim = static_cast<int>(v[4]);
  c.n_layers = static_cast<int>(v[5]);
  c.n_heads = static_cast<int>(v[6]);
  c.mlp_ratio = static_cast<int>(v[7]);
  if (v[8] > 1) throw WeightError("ASGW config: unknown pooling " + std::to_string(v[8]));
  c.pooling = static_cast<Pooling>(v[8]);
  c.input_frames = static_cast<int>(v[9]);
  c.input_bins = static_cast<int>(v[10]);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw WeightError(std::string("ASGW config invalid: ") + e.what());
  }
  return c;
}

}  // namespace

void EncoderConfig::validate() const {
  for (int v : {patch_h, patch_w, stride_h, stride_w, embed_dim, n_layers, n_heads, mlp_ratio,
                input_frames, input_bins})
    if (v <= 0 || v > (1 << 20)) throw ConfigError("encoder: dimensions must be positive");
  if (embed_dim % n_heads != 0) throw ConfigError("encoder: embed_dim must be divisible by n_heads");
  if (patch_h > input_bins || patch_w > input_frames)
    throw ConfigError("encoder: patch larger than the spectrogram");
}

Tensor Tensor::zeros(std::vector<std::uint64_t> dims) { return filled(std::move(dims), 0.0f); }

Tensor Tensor::filled(std::vector<std::uint64_t> dims, float v) {
  Tensor t;
  t.dims = std::move(dims);
  t.values.assign(static_cast<std::size_t>(t.numel()), v);
  return t;
}

std::uint64_t Tensor::numel() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::pair<std::string, const Tensor*>> EncoderWeights::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out = {
      {"patch_projection.weight", &patch_projection_w},
      {"patch_projection.bias", &patch_projection_b},
      {"positional_embeddings", &positional_embeddings},
      {"cls_token", &cls_token},
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    const LayerWeights& l = layers[i];
    out.insert(out.end(), {
        {p + "attn_norm.scale", &l.attn_norm_scale},
        {p + "attn_norm.offset", &l.attn_norm_offset},
        {p + "attn.query.weight", &l.query_w},
        {p + "attn.query.bias", &l.query_b},
        {p + "attn.key.weight", &l.key_w},
        {p + "attn.key.bias", &l.key_b},
        {p + "attn.value.weight", &l.value_w},
        {p + "attn.value.bias", &l.value_b},
        {p + "attn.out.weight", &l.attn_out_w},
        {p + "attn.out.bias", &l.attn_out_b},
        {p + "mlp_norm.scale", &l.mlp_norm_scale},
        {p + "mlp_norm.offset", &l.mlp_norm_offset},
        {p + "mlp.in.weight", &l.mlp_in_w},
        {p + "mlp.in.bias", &l.mlp_in_b},
        {p + "mlp.out.weight", &l.mlp_out_w},
        {p + "mlp.out.bias", &l.mlp_out_b},
    });
  }
  out.emplace_back("final_norm.scale", &final_norm_scale);
  out.emplace_back("final_norm.offset", &final_norm_offset);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> EncoderWeights::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, t] : std::as_const(*this).named())
    out.emplace_back(name, const_cast<Tensor*>(t));
  return out;
}

std::vector<std::pair<std::string, Shape>> expected_shapes(const EncoderConfig& cfg) {
  const auto d = static_cast<std::uint64_t>(cfg.embed_dim);
  const auto m = static_cast<std::uint64_t>(cfg.mlp_dim());
  EncoderWeights w;
  w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& [name, t] : std::as_const(w).named()) {
    (void)t;
    Shape s;
    if (name == "patch_projection.weight") s = {static_cast<std::uint64_t>(cfg.patch_len()), d};
    else if (name == "positional_embeddings") s = {static_cast<std::uint64_t>(cfg.n_patches()) + 1, d};
    else if (name.ends_with("mlp.in.weight")) s = {d, m};
    else if (name.ends_with("mlp.in.bias")) s = {m};
    else if (name.ends_with("mlp.out.weight")) s = {m, d};
    else if (name.ends_with(".weight")) s = {d, d};
    else s = {d};
    out.emplace_back(name, std::move(s));
  }
  return out;
}

EncoderWeights random_weights(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderWeights w;
  w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  GaussianStream gauss(seed);
  const auto shapes = expected_shapes(cfg);
  auto named = w.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = named[i];
    const Shape& shape = shapes[i].second;
    const bool is_scale = name.ends_with(".scale");
    const bool is_offset_or_bias = name.ends_with(".offset") || name.ends_with(".bias");
    *tensor = Tensor::filled(shape, is_scale ? 1.0f : 0.0f);
    if (!is_scale && !is_offset_or_bias)
      for (float& v : tensor->values) v = static_cast<float>(0.02 * gauss.next());
  }
  return w;
}

void check_weights(const EncoderConfig& cfg, const EncoderWeights& w) {
  cfg.validate();
  if (w.layers.size() != static_cast<std::size_t>(cfg.n_layers))
    throw ShapeMismatchError("encoder weights have " + std::to_string(w.layers.size()) +
                                 " layers, config expects " + std::to_string(cfg.n_layers),
                             "layers");
  const auto shapes = expected_shapes(cfg);
  const auto named = w.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    if (t->dims != shapes[i].second || t->values.size() != t->numel())
      throw ShapeMismatchError("tensor " + name + " has a shape inconsistent with the config", name);
    for (float v : t->values)
      if (!std::isfinite(v)) throw WeightError("tensor " + name + " has non-finite entries");
  }
}

std::vector<std::uint8_t> save_weights(const EncoderConfig& cfg, const EncoderWeights& w) {
  check_weights(cfg, w);
  ByteWriter out;
  out.raw({kMagic, 4});
  out.u32(kWeightsVersion);
  write_config(out, cfg);
  const auto named = w.named();
  out.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    out.str(name);
    out.u32(static_cast<std::uint32_t>(t->dims.size()));
    for (auto d : t->dims) out.u64(d);
    for (float v : t->values) out.f32(v);
  }
  return std::move(out.bytes());
}

std::pair<EncoderConfig, EncoderWeights> load_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw BadMagicError("format error: ASGW magic absent");
  ByteReader in(bytes.subspan(4));
  in.set_context("version");
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion)
    throw VersionError("ASGW version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kWeightsVersion) + ")");
  const EncoderConfig cfg = read_config(in);

  in.set_context("tensor count");
  const std::uint32_t count = in.u32();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    in.set_context("tensor #" + std::to_string(i) + " name");
    std::string name = in.str();
    in.set_context(name);
    Tensor t;
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw ShapeMismatchError("tensor " + name + " has rank " + std::to_string(rank), name);
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t d = in.u64();
      t.dims.push_back(d);
      if (d != 0 && numel > in.remaining() / d)
        throw TruncationError("truncated input while reading " + name, name);
      numel *= d;
    }
    if (numel * 4 > in.remaining())
      throw TruncationError("truncated input while reading " + name, name);
    t.values.resize(static_cast<std::size_t>(numel));
    for (float& v : t.values) v = in.f32();
    if (!tensors.emplace(name, std::move(t)).second)
      throw WeightError("duplicate tensor " + name);
  }
  if (in.remaining() != 0) throw WeightError("trailing bytes after last ASGW tensor");

  EncoderWeights w;
  w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& [name, slot] : w.named()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeMismatchError("missing tensor " + name, name);
    *slot = std::move(it->second);
    tensors.erase(it);
  }
  if (!tensors.empty())
    throw ShapeMismatchError("unexpected tensor " + tensors.begin()->first, tensors.begin()->first);
  check_weights(cfg, w);
  return {cfg, std::move(w)};
}

std::uint64_t weights_hash(const EncoderConfig& cfg, const EncoderWeights& w) {
  return fnv1a64(save_weights(cfg, w));
}

Eigen::MatrixXd patchify(const MelSpectrogram& spec, const EncoderConfig& cfg) {
  const auto frames = static_cast<int>(spec.frames());
  const auto bins = static_cast<int>(spec.bins());
  if (frames < cfg.patch_w || bins < cfg.patch_h)
    throw ShapeError("patchify: spectrogram " + std::to_string(frames) + "x" + std::to_string(bins) +
                     " smaller than one " + std::to_string(cfg.patch_w) + "x" +
                     std::to_string(cfg.patch_h) + " patch");
  const int fp = (bins - cfg.patch_h) / cfg.stride_h + 1;
  const int tp = (frames - cfg.patch_w) / cfg.stride_w + 1;
  Eigen::MatrixXd out(fp * tp, cfg.patch_len());
  for (int fi = 0; fi < fp; ++fi) {
    for (int ti = 0; ti < tp; ++ti) {
      const int row = fi * tp + ti;
      const int f0 = fi * cfg.stride_h;
      const int t0 = ti * cfg.stride_w;
      for (int i = 0; i < cfg.patch_h; ++i)
        for (int j = 0; j < cfg.patch_w; ++j)
          out(row, i * cfg.patch_w + j) = spec.values(static_cast<std::size_t>(t0 + j),
                                                      static_cast<std::size_t>(f0 + i));
    }
  }
  return out;
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& scale,
                           const Eigen::RowVectorXd& offset) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const Eigen::RowVectorXd centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(x.cols());
    out.row(r) = (centered / std::sqrt(var + kLayerNormEps)).cwiseProduct(scale) + offset;
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Encoder::Encoder(EncoderConfig cfg, const EncoderWeights& w) : cfg_(cfg) {
  check_weights(cfg_, w);
  patch_w_ = to_matrix(w.patch_projection_w);
  patch_b_ = to_row(w.patch_projection_b);
  pos_ = to_matrix(w.positional_embeddings);
  cls_ = to_row(w.cls_token);
  for (const auto& l : w.layers) {
    Layer L;
    L.n1_scale = to_row(l.attn_norm_scale);
    L.n1_offset = to_row(l.attn_norm_offset);
    L.n2_scale = to_row(l.mlp_norm_scale);
    L.n2_offset = to_row(l.mlp_norm_offset);
    L.wq = to_matrix(l.query_w);
    L.wk = to_matrix(l.key_w);
    L.wv = to_matrix(l.value_w);
    L.wo = to_matrix(l.attn_out_w);
    L.w1 = to_matrix(l.mlp_in_w);
    L.w2 = to_matrix(l.mlp_out_w);
    L.bq = to_row(l.query_b);
    L.bk = to_row(l.key_b);
    L.bv = to_row(l.value_b);
    L.bo = to_row(l.attn_out_b);
    L.b1 = to_row(l.mlp_in_b);
    L.b2 = to_row(l.mlp_out_b);
    layers_.push_back(std::move(L));
  }
  final_scale_ = to_row(w.final_norm_scale);
  final_offset_ = to_row(w.final_norm_offset);
}

Embedding Encoder::encode(const MelSpectrogram& spec, AttentionProbe* probe) const {
  if (static_cast<int>(spec.frames()) != cfg_.input_frames ||
      static_cast<int>(spec.bins()) != cfg_.input_bins)
    throw ShapeError("encode: spectrogram is " + std::to_string(spec.frames()) + "x" +
                     std::to_string(spec.bins()) + ", encoder expects " +
                     std::to_string(cfg_.input_frames) + "x" + std::to_string(cfg_.input_bins));
  const Eigen::VectorXd v = encode_patches(patchify(spec, cfg_), pos_, probe);
  Embedding e;
  e.vector.assign(v.data(), v.data() + v.size());
  return e;
}

Eigen::VectorXd Encoder::encode_patches(const Eigen::MatrixXd& patches,
                                        const Eigen::MatrixXd& positional,
                                        AttentionProbe* probe) const {
  const Eigen::Index n = patches.rows();
  const Eigen::Index d = cfg_.embed_dim;
  if (patches.cols() != cfg_.patch_len())
    throw ShapeError("encode: patch length mismatch");
  if (positional.rows() != n + 1 || positional.cols() != d)
    throw ShapeError("encode: positional table does not match the patch count");

  Eigen::MatrixXd x(n + 1, d);
  x.row(0) = cls_;
  x.bottomRows(n) = (patches * patch_w_).rowwise() + patch_b_;
  x += positional;

  const int heads = cfg_.n_heads;
  const Eigen::Index hd = cfg_.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (const Layer& L : layers_) {
    const Eigen::MatrixXd h = layer_norm(x, L.n1_scale, L.n1_offset);
    const Eigen::MatrixXd q = (h * L.wq).rowwise() + L.bq;
    const Eigen::MatrixXd k = (h * L.wk).rowwise() + L.bk;
    const Eigen::MatrixXd v = (h * L.wv).rowwise() + L.bv;
    Eigen::MatrixXd ctx(n + 1, d);
    for (int hi = 0; hi < heads; ++hi) {
      const Eigen::Index c0 = hi * hd;
      Eigen::MatrixXd s = (q.middleCols(c0, hd) * k.middleCols(c0, hd).transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      ctx.middleCols(c0, hd) = s * v.middleCols(c0, hd);
      if (probe) probe->maps.push_back(std::move(s));
    }
    x += (ctx * L.wo).rowwise() + L.bo;

    const Eigen::MatrixXd h2 = layer_norm(x, L.n2_scale, L.n2_offset);
    Eigen::MatrixXd mid = (h2 * L.w1).rowwise() + L.b1;
    mid = mid.unaryExpr([](double z) { return gelu(z); });
    x += (mid * L.w2).rowwise() + L.b2;
  }
  const Eigen::MatrixXd out = layer_norm(x, final_scale_, final_offset_);
  if (cfg_.pooling == Pooling::kClsToken) return out.row(0).transpose();
  return out.bottomRows(n).colwise().mean().transpose();
}

}  // namespace asgir
