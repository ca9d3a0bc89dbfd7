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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asgir/spectrogram.hpp"

namespace asgir {

enum class Pooling : std::uint32_t { kMean = 0, kClsToken = 1 };

// Patch-embedding transformer geometry. "h" runs along mel bins, "w" along
// frames.
struct EncoderConfig {
  int patch_h = 16;
  int patch_w = 16;
  int stride_h = 10;
  int stride_w = 10;
  int embed_dim = 192;
  int n_layers = 3;
  int n_heads = 3;
  int mlp_ratio = 4;
  Pooling pooling = Pooling::kMean;
  int input_frames = 200;
  int input_bins = 128;

  void validate() const;
  int freq_patches() const { return (input_bins - patch_h) / stride_h + 1; }
  int time_patches() const { return (input_frames - patch_w) / stride_w + 1; }
  int n_patches() const { return freq_patches() * time_patches(); }
  int patch_len() const { return patch_h * patch_w; }
  int head_dim() const { return embed_dim / n_heads; }
  int mlp_dim() const { return embed_dim * mlp_ratio; }

  bool operator==(const EncoderConfig&) const = default;
};

// float32 tensor, row-major, as stored on disk.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  static Tensor zeros(std::vector<std::uint64_t> dims);
  static Tensor filled(std::vector<std::uint64_t> dims, float v);
  std::uint64_t numel() const;
  bool operator==(const Tensor&) const = default;
};

struct LayerWeights {
  Tensor attn_norm_scale, attn_norm_offset;
  Tensor query_w, query_b, key_w, key_b, value_w, value_b;
  Tensor attn_out_w, attn_out_b;
  Tensor mlp_norm_scale, mlp_norm_offset;
  Tensor mlp_in_w, mlp_in_b, mlp_out_w, mlp_out_b;

  bool operator==(const LayerWeights&) const = default;
};

// Linear maps are stored (in x out) and applied as x * W + b.
struct EncoderWeights {
  Tensor patch_projection_w, patch_projection_b;
  Tensor positional_embeddings;  // (n_patches + 1) x embed_dim, row 0 = cls
  Tensor cls_token;
  std::vector<LayerWeights> layers;
  Tensor final_norm_scale, final_norm_offset;

  // Every named tensor in serialization order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  bool operator==(const EncoderWeights&) const = default;
};

// Shapes implied by `cfg`, in the order named() returns them.
std::vector<std::pair<std::string, std::vector<std::uint64_t>>> expected_shapes(
    const EncoderConfig& cfg);

// Gaussian(0, 0.02) matrices, zero biases, unit layer-norm scales.
EncoderWeights random_weights(const EncoderConfig& cfg, std::uint64_t seed);

// Throws ShapeMismatchError naming the first tensor inconsistent with cfg,
// or WeightError for non-finite entries.
void check_weights(const EncoderConfig& cfg, const EncoderWeights& w);

// ASGW container: "ASGW", u32 version, config ints, then tensor records.
std::vector<std::uint8_t> save_weights(const EncoderConfig& cfg,
                                       const EncoderWeights& w);
std::pair<EncoderConfig, EncoderWeights> load_weights(
    std::span<const std::uint8_t> bytes);
inline constexpr std::uint32_t kWeightsVersion = 1;

struct Embedding {
  std::vector<double> vector;
  std::string segment_ref;
};

// Patch vectors, one per row, ordered frequency-major then time; within a
// patch element (i, j) = spec(t0 + j, f0 + i) at offset i * patch_w + j.
Eigen::MatrixXd patchify(const MelSpectrogram& spec, const EncoderConfig& cfg);

// Softmax matrices captured during encode, layer-major then head.
struct AttentionProbe {
  std::vector<Eigen::MatrixXd> maps;
};

class Encoder {
 public:
  Encoder(EncoderConfig cfg, const EncoderWeights& weights);

  const EncoderConfig& config() const { return cfg_; }

  Embedding encode(const MelSpectrogram& spec,
                   AttentionProbe* probe = nullptr) const;

  // Runs the transformer on already-extracted patch rows; exposed so the
  // permutation property can be exercised with a matching positional table.
  Eigen::VectorXd encode_patches(const Eigen::MatrixXd& patches,
                                 const Eigen::MatrixXd& positional,
                                 AttentionProbe* probe = nullptr) const;

  const Eigen::MatrixXd& positional() const { return pos_; }

 private:
  struct Layer {
    Eigen::RowVectorXd n1_scale, n1_offset, n2_scale, n2_offset;
    Eigen::MatrixXd wq, wk, wv, wo, w1, w2;
    Eigen::RowVectorXd bq, bk, bv, bo, b1, b2;
  };

  EncoderConfig cfg_;
  Eigen::MatrixXd patch_w_;
  Eigen::RowVectorXd patch_b_;
  Eigen::MatrixXd pos_;
  Eigen::RowVectorXd cls_;
  std::vector<Layer> layers_;
  Eigen::RowVectorXd final_scale_, final_offset_;
};

inline constexpr double kLayerNormEps = 1e-6;

// Row-wise layer normalization and erf-based GELU, shared with tests.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x,
                           const Eigen::RowVectorXd& scale,
                           const Eigen::RowVectorXd& offset);
double gelu(double x);

// FNV-1a over the ASGW serialization; identifies a weight set in caches.
std::uint64_t weights_hash(const EncoderConfig& cfg, const EncoderWeights& w);

}  // namespace asgir
