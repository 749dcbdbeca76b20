#pragma once

// Dense MLP engine: [Linear -> Norm -> ReLU] blocks followed by a linear
// classifier. Templated on the scalar type so that gradient checks can run
// the same code in double precision; production code uses float.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "edgeadapt/error.hpp"
#include "edgeadapt/tensor.hpp"

namespace edgeadapt {

struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;
  float norm_eps = 1e-5f;
  float norm_momentum = 0.1f;

  void validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
    for (std::size_t w : hidden_dims) {
      if (w == 0) throw ConfigError("every hidden width must be >= 1");
    }
    if (!(norm_eps > 0.0f)) throw ConfigError("norm_eps must be positive");
    if (!(norm_momentum > 0.0f && norm_momentum < 1.0f)) {
      throw ConfigError("norm_momentum must lie in (0, 1)");
    }
  }

  std::size_t width_before(std::size_t block) const {
    return block == 0 ? input_dim : hidden_dims[block - 1];
  }
  std::size_t last_width() const {
    return hidden_dims.empty() ? input_dim : hidden_dims.back();
  }

  /// Trainable parameters: weights, biases, and norm scale/shift.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < hidden_dims.size(); ++l) {
      n += hidden_dims[l] * width_before(l) + hidden_dims[l] + 2 * hidden_dims[l];
    }
    return n + num_classes * last_width() + num_classes;
  }

  std::size_t affine_count() const {
    std::size_t n = 0;
    for (std::size_t w : hidden_dims) n += 2 * w;
    return n;
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

enum class NormMode : std::uint8_t { BatchStats, RunningStats };
enum class ParamMask : std::uint8_t { AffineOnly, AllParams };

template <typename Real>
struct HiddenBlock {
  BasicTensor2<Real> weight;  // out x in
  std::vector<Real> bias;
  std::vector<Real> gamma;
  std::vector<Real> beta;
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  friend bool operator==(const HiddenBlock&, const HiddenBlock&) = default;
};

template <typename Real>
struct BasicModelParams {
  std::vector<HiddenBlock<Real>> blocks;
  BasicTensor2<Real> head_weight;  // classes x last_width
  std::vector<Real> head_bias;

  friend bool operator==(const BasicModelParams&, const BasicModelParams&) = default;
};

template <typename Real>
struct BasicModel {
  ModelSpec spec;
  BasicModelParams<Real> params;

  template <typename Other>
  BasicModel<Other> cast() const;

  friend bool operator==(const BasicModel&, const BasicModel&) = default;
};

using ModelParams = BasicModelParams<float>;
using Model = BasicModel<float>;

namespace detail {

template <typename Other, typename Real>
std::vector<Other> cast_vec(const std::vector<Real>& v) {
  return std::vector<Other>(v.begin(), v.end());
}

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapMat = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMapMat = Eigen::Map<const RowMat<Real>>;

template <typename Real>
ConstMapMat<Real> view(const BasicTensor2<Real>& t) {
  return ConstMapMat<Real>(t.data.data(), static_cast<Eigen::Index>(t.rows),
                           static_cast<Eigen::Index>(t.cols));
}
template <typename Real>
MapMat<Real> view(BasicTensor2<Real>& t) {
  return MapMat<Real>(t.data.data(), static_cast<Eigen::Index>(t.rows),
                      static_cast<Eigen::Index>(t.cols));
}

}  // namespace detail

template <typename Real>
template <typename Other>
BasicModel<Other> BasicModel<Real>::cast() const {
  BasicModel<Other> out;
  out.spec = spec;
  for (const auto& b : params.blocks) {
    out.params.blocks.push_back(
        {b.weight.template cast<Other>(), detail::cast_vec<Other>(b.bias),
         detail::cast_vec<Other>(b.gamma), detail::cast_vec<Other>(b.beta),
         detail::cast_vec<Other>(b.running_mean), detail::cast_vec<Other>(b.running_var)});
  }
  out.params.head_weight = params.head_weight.template cast<Other>();
  out.params.head_bias = detail::cast_vec<Other>(params.head_bias);
  return out;
}

/// Xavier-uniform weights, zero biases, identity normalization.
template <typename Real = float>
BasicModel<Real> init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](std::size_t out, std::size_t in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    BasicTensor2<Real> w(out, in);
    for (auto& v : w.data) v = static_cast<Real>(dist(rng));
    return w;
  };
  BasicModel<Real> m;
  m.spec = spec;
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    const std::size_t w = spec.hidden_dims[l];
    HiddenBlock<Real> b;
    b.weight = xavier(w, spec.width_before(l));
    b.bias.assign(w, Real(0));
    b.gamma.assign(w, Real(1));
    b.beta.assign(w, Real(0));
    b.running_mean.assign(w, Real(0));
    b.running_var.assign(w, Real(1));
    m.params.blocks.push_back(std::move(b));
  }
  m.params.head_weight = xavier(spec.num_classes, spec.last_width());
  m.params.head_bias.assign(spec.num_classes, Real(0));
  return m;
}

/// Throws ConfigError unless every tensor in params matches spec.
template <typename Real>
void check_shapes(const BasicModel<Real>& m) {
  const ModelSpec& s = m.spec;
  s.validate();
  if (m.params.blocks.size() != s.hidden_dims.size()) {
    throw ConfigError("model has " + std::to_string(m.params.blocks.size()) +
                      " hidden blocks, spec expects " + std::to_string(s.hidden_dims.size()));
  }
  for (std::size_t l = 0; l < s.hidden_dims.size(); ++l) {
    const auto& b = m.params.blocks[l];
    const std::size_t w = s.hidden_dims[l];
    if (b.weight.rows != w || b.weight.cols != s.width_before(l) || b.bias.size() != w ||
        b.gamma.size() != w || b.beta.size() != w || b.running_mean.size() != w ||
        b.running_var.size() != w) {
      throw ConfigError("hidden block " + std::to_string(l) + " shape mismatch");
    }
  }
  if (m.params.head_weight.rows != s.num_classes ||
      m.params.head_weight.cols != s.last_width() || m.params.head_bias.size() != s.num_classes) {
    throw ConfigError("classifier shape mismatch");
  }
}

template <typename Real>
struct BlockCache {
  BasicTensor2<Real> input;  // block input (N x in)
  BasicTensor2<Real> xhat;   // normalized pre-activation (N x w)
  BasicTensor2<Real> affine; // gamma * xhat + beta, before ReLU
  std::vector<Real> inv_std;
  std::vector<Real> batch_mean;
  std::vector<Real> batch_var;
};

template <typename Real>
struct ForwardCache {
  NormMode mode = NormMode::RunningStats;
  std::vector<BlockCache<Real>> blocks;
  BasicTensor2<Real> head_input;
};

/// Forward pass that never mutates the model. In BatchStats mode the batch
/// statistics are recorded in the cache but running statistics are left alone.
template <typename Real>
BasicTensor2<Real> forward_pure(const BasicModel<Real>& m, const BasicTensor2<Real>& batch,
                                NormMode mode, ForwardCache<Real>* cache = nullptr) {
  const ModelSpec& s = m.spec;
  if (batch.cols != s.input_dim) {
    throw ConfigError("batch has " + std::to_string(batch.cols) + " features, model expects " +
                      std::to_string(s.input_dim));
  }
  if (batch.rows == 0) throw ConfigError("batch must contain at least one row");
  if (m.params.blocks.size() != s.hidden_dims.size()) {
    throw ConfigError("parameter blocks do not match the model spec");
  }

  const std::size_t n = batch.rows;
  const Real eps = static_cast<Real>(s.norm_eps);
  if (cache) {
    cache->mode = mode;
    cache->blocks.assign(m.params.blocks.size(), {});
  }

  BasicTensor2<Real> act = batch;
  for (std::size_t l = 0; l < m.params.blocks.size(); ++l) {
    const auto& b = m.params.blocks[l];
    const std::size_t w = b.gamma.size();
    BasicTensor2<Real> h(n, w);
    detail::view(h).noalias() = detail::view(act) * detail::view(b.weight).transpose();

    std::vector<Real> mean(w, Real(0)), var(w, Real(0)), inv_std(w);
    if (mode == NormMode::BatchStats) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) mean[j] += h(i, j) + b.bias[j];
      }
      for (std::size_t j = 0; j < w; ++j) mean[j] /= static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const Real d = h(i, j) + b.bias[j] - mean[j];
          var[j] += d * d;
        }
      }
      for (std::size_t j = 0; j < w; ++j) var[j] /= static_cast<Real>(n);
    } else {
      mean = b.running_mean;
      var = b.running_var;
    }
    for (std::size_t j = 0; j < w; ++j) inv_std[j] = Real(1) / std::sqrt(var[j] + eps);

    BasicTensor2<Real> xhat(n, w), affine(n, w), out(n, w);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const Real xh = (h(i, j) + b.bias[j] - mean[j]) * inv_std[j];
        const Real z = b.gamma[j] * xh + b.beta[j];
        xhat(i, j) = xh;
        affine(i, j) = z;
        out(i, j) = z > Real(0) ? z : Real(0);
      }
    }
    // Checked before the ReLU, which would map NaN to zero.
    if (!affine.all_finite()) {
      throw NumericError("non-finite activation in hidden block " + std::to_string(l));
    }
    if (cache) {
      auto& c = cache->blocks[l];
      c.input = std::move(act);
      c.xhat = std::move(xhat);
      c.affine = std::move(affine);
      c.inv_std = std::move(inv_std);
      if (mode == NormMode::BatchStats) {
        c.batch_mean = std::move(mean);
        c.batch_var = std::move(var);
      }
    }
    act = std::move(out);
  }

  BasicTensor2<Real> logits(n, s.num_classes);
  detail::view(logits).noalias() = detail::view(act) * detail::view(m.params.head_weight).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < s.num_classes; ++k) logits(i, k) += m.params.head_bias[k];
  }
  if (!logits.all_finite()) throw NumericError("non-finite activation in classifier");
  if (cache) cache->head_input = std::move(act);
  return logits;
}

/// Forward pass; BatchStats mode additionally folds the batch statistics
/// into the running statistics as (1 - momentum) * old + momentum * batch.
template <typename Real>
BasicTensor2<Real> forward(BasicModel<Real>& m, const BasicTensor2<Real>& batch, NormMode mode,
                           ForwardCache<Real>* cache = nullptr) {
  if (mode == NormMode::RunningStats) return forward_pure(m, batch, mode, cache);
  ForwardCache<Real> local;
  ForwardCache<Real>& c = cache ? *cache : local;
  BasicTensor2<Real> logits = forward_pure(m, batch, mode, &c);
  const Real mom = static_cast<Real>(m.spec.norm_momentum);
  for (std::size_t l = 0; l < m.params.blocks.size(); ++l) {
    auto& b = m.params.blocks[l];
    for (std::size_t j = 0; j < b.gamma.size(); ++j) {
      b.running_mean[j] = (Real(1) - mom) * b.running_mean[j] + mom * c.blocks[l].batch_mean[j];
      b.running_var[j] = (Real(1) - mom) * b.running_var[j] + mom * c.blocks[l].batch_var[j];
    }
  }
  return logits;
}

// ---------------------------------------------------------------------------
// Gradients

enum class SlotKind : std::uint8_t { Weight, Bias, Gamma, Beta, HeadWeight, HeadBias };

struct ParamSlot {
  SlotKind kind;
  std::size_t layer = 0;
  friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

inline std::string slot_name(ParamSlot s) {
  switch (s.kind) {
    case SlotKind::Weight: return "block" + std::to_string(s.layer) + ".weight";
    case SlotKind::Bias: return "block" + std::to_string(s.layer) + ".bias";
    case SlotKind::Gamma: return "block" + std::to_string(s.layer) + ".gamma";
    case SlotKind::Beta: return "block" + std::to_string(s.layer) + ".beta";
    case SlotKind::HeadWeight: return "head.weight";
    case SlotKind::HeadBias: return "head.bias";
  }
  return "?";
}

/// Slots that receive gradients under a mask, in a fixed canonical order.
inline std::vector<ParamSlot> trainable_slots(const ModelSpec& spec, ParamMask mask) {
  std::vector<ParamSlot> out;
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    if (mask == ParamMask::AllParams) {
      out.push_back({SlotKind::Weight, l});
      out.push_back({SlotKind::Bias, l});
    }
    out.push_back({SlotKind::Gamma, l});
    out.push_back({SlotKind::Beta, l});
  }
  if (mask == ParamMask::AllParams) {
    out.push_back({SlotKind::HeadWeight, 0});
    out.push_back({SlotKind::HeadBias, 0});
  }
  return out;
}

template <typename Real>
std::span<Real> param_slot(BasicModelParams<Real>& p, ParamSlot s) {
  switch (s.kind) {
    case SlotKind::Weight: return p.blocks.at(s.layer).weight.data;
    case SlotKind::Bias: return p.blocks.at(s.layer).bias;
    case SlotKind::Gamma: return p.blocks.at(s.layer).gamma;
    case SlotKind::Beta: return p.blocks.at(s.layer).beta;
    case SlotKind::HeadWeight: return p.head_weight.data;
    case SlotKind::HeadBias: return p.head_bias;
  }
  return {};
}

template <typename Real>
std::span<const Real> param_slot(const BasicModelParams<Real>& p, ParamSlot s) {
  return param_slot(const_cast<BasicModelParams<Real>&>(p), s);
}

template <typename Real>
struct GradEntry {
  ParamSlot slot;
  std::vector<Real> values;
};

template <typename Real>
struct BasicGradients {
  ParamMask mask = ParamMask::AffineOnly;
  std::vector<GradEntry<Real>> entries;

  const std::vector<Real>* find(ParamSlot s) const {
    for (const auto& e : entries) {
      if (e.slot == s) return &e.values;
    }
    return nullptr;
  }
};

using Gradients = BasicGradients<float>;

/// Exact reverse pass through the cached forward. Batch-statistics
/// dependence of the normalization output is differentiated when the cache
/// came from a BatchStats forward; in RunningStats mode the statistics are
/// constants.
template <typename Real>
BasicGradients<Real> backward(const BasicModel<Real>& m, const ForwardCache<Real>& cache,
                              const BasicTensor2<Real>& dlogits, ParamMask mask) {
  const ModelSpec& s = m.spec;
  const std::size_t nblocks = m.params.blocks.size();
  if (cache.blocks.size() != nblocks || dlogits.cols != s.num_classes ||
      cache.head_input.rows != dlogits.rows || cache.head_input.cols != s.last_width()) {
    throw std::logic_error("backward: cache does not match the model or upstream gradient");
  }
  const std::size_t n = dlogits.rows;
  const bool all = mask == ParamMask::AllParams;

  BasicGradients<Real> g;
  g.mask = mask;
  const auto slots = trainable_slots(s, mask);
  for (const auto& slot : slots) {
    g.entries.push_back({slot, std::vector<Real>(param_slot(m.params, slot).size(), Real(0))});
  }
  auto entry = [&g](ParamSlot slot) -> std::vector<Real>& {
    for (auto& e : g.entries) {
      if (e.slot == slot) return e.values;
    }
    throw std::logic_error("backward: missing gradient slot");
  };

  if (all) {
    auto& dw = entry({SlotKind::HeadWeight, 0});
    detail::MapMat<Real>(dw.data(), static_cast<Eigen::Index>(s.num_classes),
                         static_cast<Eigen::Index>(s.last_width()))
        .noalias() = detail::view(dlogits).transpose() * detail::view(cache.head_input);
    auto& db = entry({SlotKind::HeadBias, 0});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < s.num_classes; ++k) db[k] += dlogits(i, k);
    }
  }
  if (nblocks == 0) return g;

  BasicTensor2<Real> dact(n, s.last_width());
  detail::view(dact).noalias() = detail::view(dlogits) * detail::view(m.params.head_weight);

  for (std::size_t li = nblocks; li-- > 0;) {
    const auto& b = m.params.blocks[li];
    const auto& c = cache.blocks[li];
    const std::size_t w = b.gamma.size();
    auto& dgamma = entry({SlotKind::Gamma, li});
    auto& dbeta = entry({SlotKind::Beta, li});

    // dxhat = relu'(affine) * dact * gamma
    BasicTensor2<Real> dxhat(n, w);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const Real dz = c.affine(i, j) > Real(0) ? dact(i, j) : Real(0);
        dgamma[j] += dz * c.xhat(i, j);
        dbeta[j] += dz;
        dxhat(i, j) = dz * b.gamma[j];
      }
    }

    BasicTensor2<Real> dh(n, w);
    if (cache.mode == NormMode::BatchStats) {
      std::vector<Real> sum_dxhat(w, Real(0)), sum_dxhat_xhat(w, Real(0));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          sum_dxhat[j] += dxhat(i, j);
          sum_dxhat_xhat[j] += dxhat(i, j) * c.xhat(i, j);
        }
      }
      const Real inv_n = Real(1) / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          dh(i, j) = c.inv_std[j] * inv_n *
                     (static_cast<Real>(n) * dxhat(i, j) - sum_dxhat[j] -
                      c.xhat(i, j) * sum_dxhat_xhat[j]);
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) dh(i, j) = dxhat(i, j) * c.inv_std[j];
      }
    }

    if (all) {
      auto& dw = entry({SlotKind::Weight, li});
      detail::MapMat<Real>(dw.data(), static_cast<Eigen::Index>(w),
                           static_cast<Eigen::Index>(c.input.cols))
          .noalias() = detail::view(dh).transpose() * detail::view(c.input);
      auto& db = entry({SlotKind::Bias, li});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) db[j] += dh(i, j);
      }
    }
    if (li > 0) {
      BasicTensor2<Real> dprev(n, c.input.cols);
      detail::view(dprev).noalias() = detail::view(dh) * detail::view(b.weight);
      dact = std::move(dprev);
    }
  }
  return g;
}

}  // namespace edgeadapt
