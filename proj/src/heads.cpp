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

#include "asgir/heads.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "asgir/error.hpp"
#include "asgir/util.hpp"

namespace asgir {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr char kMagic[4] = {'A', 'S', 'G', 'M'};

std::size_t check_inputs(const std::vector<std::vector<double>>& x, std::span<const int> labels,
                         const LabelRegistry& registry, const char* who) {
  if (x.empty() || x.size() != labels.size())
    throw ArgumentError(std::string(who) + ": need equal-length, nonempty embeddings and labels");
  const std::size_t dim = x.front().size();
  if (dim == 0) throw ArgumentError(std::string(who) + ": embeddings are empty vectors");
  for (const auto& row : x)
    if (row.size() != dim) throw ArgumentError(std::string(who) + ": embedding dimension mismatch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= registry.size())
      throw ArgumentError(std::string(who) + ": label id " + std::to_string(l) + " outside registry");
  return dim;
}

double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double z : v) mx = std::max(mx, z);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double z : v) s += std::exp(z - mx);
  return mx + std::log(s);
}

double diag_log_density(std::span<const double> x, const double* mean, const double* var) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - mean[j];
    acc += kLog2Pi + std::log(var[j]) + d * d / var[j];
  }
  return -0.5 * acc;
}

void check_dim(std::size_t got, std::size_t want) {
  if (got != want)
    throw ArgumentError("embedding has dimension " + std::to_string(got) + ", model expects " +
                        std::to_string(want));
}

// Shuffle with an explicit Fisher-Yates so orderings do not depend on the
// standard library's distribution implementations.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

LabelRegistry::LabelRegistry(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ArgumentError("label registry: empty species name");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second)
      throw ArgumentError("label registry: duplicate species name " + names_[i]);
  }
}

const std::string& LabelRegistry::name(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
    throw ArgumentError("label registry: id " + std::to_string(id) + " out of range");
  return names_[static_cast<std::size_t>(id)];
}

std::optional<int> LabelRegistry::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int LabelRegistry::id(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw UnknownSpeciesError("unknown species " + std::string(name));
}

int argmax(std::span<const double> scores) {
  if (scores.empty()) throw ArgumentError("argmax: empty score vector");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

ScoreVector SvmModel::score(std::span<const double> e) const {
  check_dim(e.size(), dim);
  ScoreVector out(biases.size());
  for (std::size_t c = 0; c < biases.size(); ++c) {
    const double* w = weights.data() + c * dim;
    double s = biases[c];
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * e[j];
    out[c] = s;
  }
  return out;
}

SvmModel svm_train(const std::vector<std::vector<double>>& x, std::span<const int> labels,
                   const LabelRegistry& registry, const SvmOptions& opt, SvmTrainStats* stats) {
  const std::size_t dim = check_inputs(x, labels, registry, "svm_train");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw DegenerateTrainingError("svm_train: need at least two distinct classes");
  if (!(opt.C > 0.0)) throw ArgumentError("svm_train: C must be positive");
  if (opt.max_iter < 1) throw ArgumentError("svm_train: max_iter must be >= 1");

  const std::size_t n = x.size();
  std::vector<double> mean(dim, 0.0), scale(dim, 1.0);
  if (opt.standardize) {
    for (const auto& r : x)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += r[j];
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(dim, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < dim; ++j) var[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    for (std::size_t j = 0; j < dim; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      scale[j] = sd > 1e-12 ? sd : 1.0;
    }
  }
  // Augmented design: standardized features plus a constant 1 for the bias.
  const std::size_t da = dim + 1;
  std::vector<double> z(n * da);
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = (x[i][j] - mean[j]) / scale[j];
      z[i * da + j] = v;
      q += v * v;
    }
    z[i * da + dim] = 1.0;
    qii[i] = q + 1.0;
  }

  SvmModel model;
  model.labels = registry;
  model.dim = dim;
  model.C = opt.C;
  const std::size_t n_classes = registry.size();
  model.weights.assign(n_classes * dim, 0.0);
  model.biases.assign(n_classes, 0.0);
  if (stats) *stats = {};

  std::vector<double> alpha(n), w(da);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    std::fill(w.begin(), w.end(), 0.0);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opt.seed ^ (0x9e3779b97f4a7c15ULL * (c + 1)));
    int epoch = 0;
    double gap = 0.0;
    for (; epoch < opt.max_iter;) {
      shuffle(order, rng);
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t i : order) {
        const double y = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        const double* zi = z.data() + i * da;
        double wz = 0.0;
        for (std::size_t j = 0; j < da; ++j) wz += w[j] * zi[j];
        const double g = y * wz - 1.0;
        double pg = g;
        if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
        else if (alpha[i] >= opt.C) pg = std::max(g, 0.0);
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg != 0.0) {
          const double old = alpha[i];
          alpha[i] = std::clamp(old - g / qii[i], 0.0, opt.C);
          const double step = (alpha[i] - old) * y;
          for (std::size_t j = 0; j < da; ++j) w[j] += step * zi[j];
        }
      }
      ++epoch;
      gap = pg_max - pg_min;
      if (gap <= opt.tol) break;
    }
    // Fold the standardization back so scoring is a plain affine map.
    double b = w[dim];
    for (std::size_t j = 0; j < dim; ++j) {
      const double wj = w[j] / scale[j];
      model.weights[c * dim + j] = wj;
      b -= wj * mean[j];
    }
    model.biases[c] = b;
    if (stats) {
      double hinge = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        double wz = 0.0;
        for (std::size_t j = 0; j < da; ++j) wz += w[j] * z[i * da + j];
        hinge += std::max(0.0, 1.0 - y * wz);
      }
      stats->epochs.push_back(epoch);
      stats->final_gap.push_back(gap);
      stats->hinge_loss.push_back(hinge);
    }
  }
  return model;
}

double GmmModel::class_log_likelihood(int c, std::span<const double> e) const {
  check_dim(e.size(), dim);
  const GmmClass& g = classes.at(static_cast<std::size_t>(c));
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) {
    const double lw = g.weights[m] > 0.0 ? std::log(g.weights[m]) : kNegInf;
    terms[m] = lw + diag_log_density(e, g.means.data() + m * dim, g.variances.data() + m * dim);
  }
  return log_sum_exp(terms);
}

ScoreVector GmmModel::score(std::span<const double> e) const {
  check_dim(e.size(), dim);
  ScoreVector out(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c)
    out[c] = class_log_likelihood(static_cast<int>(c), e) + classes[c].log_prior;
  return out;
}

GmmModel gmm_train(const std::vector<std::vector<double>>& x, std::span<const int> labels,
                   const LabelRegistry& registry, const GmmOptions& opt, GmmTrainStats* stats) {
  const std::size_t dim = check_inputs(x, labels, registry, "gmm_train");
  if (opt.k < 1) throw ArgumentError("gmm_train: k must be >= 1");
  const auto k = static_cast<std::size_t>(opt.k);
  const std::size_t n_classes = registry.size();
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  for (std::size_t c = 0; c < n_classes; ++c)
    if (members[c].size() < k)
      throw ArgumentError("gmm_train: class " + registry.name(static_cast<int>(c)) + " has " +
                          std::to_string(members[c].size()) + " points, need at least k=" +
                          std::to_string(k));

  GmmModel model;
  model.labels = registry;
  model.dim = dim;
  model.k = opt.k;
  model.classes.resize(n_classes);
  if (stats) stats->log_likelihood.assign(n_classes, {});

  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& idx = members[c];
    const std::size_t nc = idx.size();
    GmmClass& g = model.classes[c];
    g.log_prior = std::log(static_cast<double>(nc) / static_cast<double>(x.size()));
    g.means.assign(k * dim, 0.0);
    g.variances.assign(k * dim, 0.0);
    g.weights.assign(k, 1.0 / static_cast<double>(k));

    // Shared initial variance: the class's per-dimension spread.
    std::vector<double> mu(dim, 0.0), var(dim, 0.0);
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < dim; ++j) mu[j] += x[i][j];
    for (double& v : mu) v /= static_cast<double>(nc);
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < dim; ++j) var[j] += (x[i][j] - mu[j]) * (x[i][j] - mu[j]);
    for (double& v : var) v = std::max(v / static_cast<double>(nc), kVarianceFloor);

    // k-means++ seeding of the component means.
    std::mt19937_64 rng(opt.seed ^ (0xbf58476d1ce4e5b9ULL * (c + 1)));
    std::vector<std::size_t> centers = {idx[rng() % nc]};
    std::vector<double> d2(nc);
    while (centers.size() < k) {
      double total = 0.0;
      for (std::size_t a = 0; a < nc; ++a) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t ctr : centers) {
          double s = 0.0;
          for (std::size_t j = 0; j < dim; ++j) s += (x[idx[a]][j] - x[ctr][j]) * (x[idx[a]][j] - x[ctr][j]);
          best = std::min(best, s);
        }
        d2[a] = best;
        total += best;
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        double r = uniform01(rng) * total;
        for (pick = 0; pick + 1 < nc && r >= d2[pick]; ++pick) r -= d2[pick];
      } else {
        pick = rng() % nc;
      }
      centers.push_back(idx[pick]);
    }
    for (std::size_t m = 0; m < k; ++m) {
      std::copy(x[centers[m]].begin(), x[centers[m]].end(), g.means.begin() + m * dim);
      std::copy(var.begin(), var.end(), g.variances.begin() + m * dim);
    }

    std::vector<double> resp(nc * k);
    std::vector<double> terms(k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt.max_em_iter; ++it) {
      // E-step.
      double ll = 0.0;
      for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t m = 0; m < k; ++m) {
          const double lw = g.weights[m] > 0.0 ? std::log(g.weights[m]) : kNegInf;
          terms[m] = lw + diag_log_density(x[idx[a]], g.means.data() + m * dim,
                                           g.variances.data() + m * dim);
        }
        const double lse = log_sum_exp(terms);
        ll += lse;
        for (std::size_t m = 0; m < k; ++m) resp[a * k + m] = std::exp(terms[m] - lse);
      }
      if (stats) stats->log_likelihood[c].push_back(ll);
      const bool converged = it > 0 && (ll - prev_ll) <= opt.tol * static_cast<double>(nc);
      if (it == opt.max_em_iter || converged) break;
      prev_ll = ll;

      // M-step; the floor keeps this the constrained maximizer, so the
      // likelihood stays monotone.
      for (std::size_t m = 0; m < k; ++m) {
        double nk = 0.0;
        for (std::size_t a = 0; a < nc; ++a) nk += resp[a * k + m];
        if (nk <= std::numeric_limits<double>::min()) {
          g.weights[m] = 0.0;
          continue;
        }
        g.weights[m] = nk / static_cast<double>(nc);
        double* mean = g.means.data() + m * dim;
        double* vv = g.variances.data() + m * dim;
        std::fill(mean, mean + dim, 0.0);
        for (std::size_t a = 0; a < nc; ++a)
          for (std::size_t j = 0; j < dim; ++j) mean[j] += resp[a * k + m] * x[idx[a]][j];
        for (std::size_t j = 0; j < dim; ++j) mean[j] /= nk;
        std::fill(vv, vv + dim, 0.0);
        for (std::size_t a = 0; a < nc; ++a)
          for (std::size_t j = 0; j < dim; ++j) {
            const double d = x[idx[a]][j] - mean[j];
            vv[j] += resp[a * k + m] * d * d;
          }
        for (std::size_t j = 0; j < dim; ++j) vv[j] = std::max(vv[j] / nk, kVarianceFloor);
      }
      const double wsum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
      for (double& wm : g.weights) wm /= wsum;
    }
  }
  return model;
}

HeadKind head_kind(const HeadModel& head) {
  return std::holds_alternative<SvmModel>(head) ? HeadKind::kSvm : HeadKind::kGmm;
}

std::string head_name(HeadKind kind) { return kind == HeadKind::kSvm ? "svm" : "gmm"; }

HeadKind parse_head_kind(std::string_view name) {
  if (name == "svm") return HeadKind::kSvm;
  if (name == "gmm") return HeadKind::kGmm;
  throw ArgumentError("unknown head '" + std::string(name) + "' (expected svm or gmm)");
}

ScoreVector score(const HeadModel& head, std::span<const double> embedding) {
  return std::visit([&](const auto& m) { return m.score(embedding); }, head);
}

const LabelRegistry& labels_of(const HeadModel& head) {
  return std::visit([](const auto& m) -> const LabelRegistry& { return m.labels; }, head);
}

namespace {

struct RawTensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

void put_tensor(ByteWriter& w, const std::string& name, std::vector<std::uint64_t> dims,
                std::span<const double> values) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u64(d);
  for (double v : values) w.f32(static_cast<float>(v));
}

const RawTensor& need(const std::map<std::string, RawTensor>& t, const std::string& name,
                      const std::vector<std::uint64_t>& dims) {
  auto it = t.find(name);
  if (it == t.end()) throw ShapeMismatchError("ASGM: missing tensor " + name, name);
  if (it->second.dims != dims) throw ShapeMismatchError("ASGM: tensor " + name + " has wrong shape", name);
  return it->second;
}

}  // namespace

std::vector<std::uint8_t> save_model(const ModelFile& file) {
  ByteWriter w;
  w.raw({kMagic, 4});
  w.u32(kModelVersion);
  const HeadKind kind = head_kind(file.head);
  w.u8(static_cast<std::uint8_t>(kind));
  const LabelRegistry& reg = labels_of(file.head);
  w.u32(static_cast<std::uint32_t>(reg.size()));
  for (std::size_t i = 0; i < reg.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(i));
    w.str(reg.name(static_cast<int>(i)));
  }
  w.u32(static_cast<std::uint32_t>(file.meta.size()));
  for (const auto& [key, value] : file.meta) {
    w.str(key);
    w.str(value);
  }
  const auto n = static_cast<std::uint64_t>(reg.size());
  if (const auto* svm = std::get_if<SvmModel>(&file.head)) {
    const auto d = static_cast<std::uint64_t>(svm->dim);
    if (svm->weights.size() != n * d || svm->biases.size() != n)
      throw ShapeError("save_model: SVM parameters inconsistent with registry");
    w.u32(3);
    put_tensor(w, "svm.weight", {n, d}, svm->weights);
    put_tensor(w, "svm.bias", {n}, svm->biases);
    const double c = svm->C;
    put_tensor(w, "svm.C", {1}, {&c, 1});
  } else {
    const auto& gmm = std::get<GmmModel>(file.head);
    const auto d = static_cast<std::uint64_t>(gmm.dim);
    const auto k = static_cast<std::uint64_t>(gmm.k);
    if (gmm.classes.size() != n) throw ShapeError("save_model: GMM classes inconsistent with registry");
    std::vector<double> means, vars, weights, priors;
    for (const auto& g : gmm.classes) {
      if (g.means.size() != k * d || g.variances.size() != k * d || g.weights.size() != k)
        throw ShapeError("save_model: GMM component shapes inconsistent");
      means.insert(means.end(), g.means.begin(), g.means.end());
      vars.insert(vars.end(), g.variances.begin(), g.variances.end());
      weights.insert(weights.end(), g.weights.begin(), g.weights.end());
      priors.push_back(g.log_prior);
    }
    w.u32(4);
    put_tensor(w, "gmm.means", {n, k, d}, means);
    put_tensor(w, "gmm.variances", {n, k, d}, vars);
    put_tensor(w, "gmm.weights", {n, k}, weights);
    put_tensor(w, "gmm.log_prior", {n}, priors);
  }
  return std::move(w.bytes());
}

ModelFile load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw BadMagicError("format error: ASGM magic absent");
  ByteReader in(bytes.subspan(4));
  in.set_context("version");
  const std::uint32_t version = in.u32();
  if (version != kModelVersion)
    throw VersionError("ASGM version " + std::to_string(version) + " unsupported");
  in.set_context("head kind");
  const std::uint8_t kind_tag = in.u8();
  if (kind_tag > 1) throw WeightError("ASGM: unknown head kind tag " + std::to_string(kind_tag));
  in.set_context("label registry");
  const std::uint32_t n_labels = in.u32();
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    if (in.u32() != i) throw WeightError("ASGM: label ids must be dense and ordered");
    names.push_back(in.str());
  }
  LabelRegistry reg(std::move(names));
  in.set_context("metadata");
  ModelFile file;
  const std::uint32_t n_meta = in.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = in.str();
    file.meta[key] = in.str();
  }
  in.set_context("tensor count");
  const std::uint32_t n_tensors = in.u32();
  std::map<std::string, RawTensor> tensors;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    in.set_context("tensor #" + std::to_string(i) + " name");
    const std::string name = in.str();
    in.set_context(name);
    RawTensor t;
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw ShapeMismatchError("ASGM: tensor " + name + " has rank " + std::to_string(rank), name);
    std::uint64_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint64_t d = in.u64();
      if (d != 0 && numel > in.remaining() / d)
        throw TruncationError("truncated input while reading " + name, name);
      numel *= d;
      t.dims.push_back(d);
    }
    if (numel * 4 > in.remaining()) throw TruncationError("truncated input while reading " + name, name);
    t.values.resize(static_cast<std::size_t>(numel));
    for (double& v : t.values) {
      v = in.f32();
      if (!std::isfinite(v)) throw WeightError("ASGM: tensor " + name + " has non-finite entries");
    }
    tensors[name] = std::move(t);
  }
  if (in.remaining() != 0) throw WeightError("ASGM: trailing bytes after last tensor");

  const auto n = static_cast<std::uint64_t>(reg.size());
  if (kind_tag == static_cast<std::uint8_t>(HeadKind::kSvm)) {
    auto it = tensors.find("svm.weight");
    if (it == tensors.end() || it->second.dims.size() != 2)
      throw ShapeMismatchError("ASGM: missing tensor svm.weight", "svm.weight");
    const std::uint64_t d = it->second.dims[1];
    SvmModel m;
    m.labels = reg;
    m.dim = static_cast<std::size_t>(d);
    m.weights = need(tensors, "svm.weight", {n, d}).values;
    m.biases = need(tensors, "svm.bias", {n}).values;
    m.C = need(tensors, "svm.C", {1}).values[0];
    file.head = std::move(m);
  } else {
    auto it = tensors.find("gmm.means");
    if (it == tensors.end() || it->second.dims.size() != 3)
      throw ShapeMismatchError("ASGM: missing tensor gmm.means", "gmm.means");
    const std::uint64_t k = it->second.dims[1];
    const std::uint64_t d = it->second.dims[2];
    if (k == 0) throw ShapeMismatchError("ASGM: GMM with zero components", "gmm.means");
    const auto& means = need(tensors, "gmm.means", {n, k, d}).values;
    const auto& vars = need(tensors, "gmm.variances", {n, k, d}).values;
    const auto& weights = need(tensors, "gmm.weights", {n, k}).values;
    const auto& priors = need(tensors, "gmm.log_prior", {n}).values;
    GmmModel m;
    m.labels = reg;
    m.dim = static_cast<std::size_t>(d);
    m.k = static_cast<int>(k);
    for (std::uint64_t c = 0; c < n; ++c) {
      GmmClass g;
      g.means.assign(means.begin() + static_cast<std::ptrdiff_t>(c * k * d),
                     means.begin() + static_cast<std::ptrdiff_t>((c + 1) * k * d));
      g.variances.assign(vars.begin() + static_cast<std::ptrdiff_t>(c * k * d),
                         vars.begin() + static_cast<std::ptrdiff_t>((c + 1) * k * d));
      g.weights.assign(weights.begin() + static_cast<std::ptrdiff_t>(c * k),
                       weights.begin() + static_cast<std::ptrdiff_t>((c + 1) * k));
      g.log_prior = priors[c];
      for (double v : g.variances)
        if (!(v > 0.0)) throw WeightError("ASGM: non-positive GMM variance");
      m.classes.push_back(std::move(g));
    }
    file.head = std::move(m);
  }
  return file;
}

}  // namespace asgir
