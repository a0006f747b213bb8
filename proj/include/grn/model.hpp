// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "grn/context.hpp"
#include "grn/crf.hpp"
#include "grn/embed.hpp"
#include "grn/params.hpp"
#include "grn/relation.hpp"

namespace grn {

enum class Fusion { Grn, Dfn, Gattn, None };
enum class ContextMode { Full, Branch3, Off };

inline std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::Grn: return "grn";
    case Fusion::Dfn: return "dfn";
    case Fusion::Gattn: return "gattn";
    case Fusion::None: return "none";
  }
  return "?";
}

inline std::string to_string(ContextMode c) {
  switch (c) {
    case ContextMode::Full: return "full";
    case ContextMode::Branch3: return "branch3";
    case ContextMode::Off: return "off";
  }
  return "?";
}

inline Fusion fusion_from_string(const std::string& s) {
  if (s == "grn") return Fusion::Grn;
  if (s == "dfn") return Fusion::Dfn;
  if (s == "gattn") return Fusion::Gattn;
  if (s == "none") return Fusion::None;
  throw std::invalid_argument("unknown fusion '" + s + "' (expected grn|dfn|gattn|none)");
}

inline ContextMode context_from_string(const std::string& s) {
  if (s == "full") return ContextMode::Full;
  if (s == "branch3") return ContextMode::Branch3;
  if (s == "off") return ContextMode::Off;
  throw std::invalid_argument("unknown context mode '" + s + "' (expected full|branch3|off)");
}

struct ModelConfig {
  int word_dim = 100;
  int char_dim = 30;
  int char_channels = 30;
  int char_kernel = 3;
  int context_channels = 400;
  std::vector<int> context_kernels = {1, 3, 5};
  Fusion fusion = Fusion::Grn;
  ContextMode context = ContextMode::Full;
  double dropout = 0.5;
  // largest single relation tensor allocation before the batch is
  // processed in sentence chunks
  int64_t relation_budget_bytes = 256ll << 20;

  int repr_dim() const { return char_channels + word_dim; }
};

template <typename Real>
struct ForwardResult {
  Node<Real>* predicting = nullptr;  // [B x T x C], input to the CRF projection
  Node<Real>* relation = nullptr;    // [B x T x T x C] when kept, else null
  LatticeScores<Real> scores;
};

/// The full network: representation, context, gated relation and CRF
/// potentials, with the ablation variants selected by ModelConfig.
template <typename Real>
class GrnModel {
 public:
  GrnModel(ModelConfig cfg, int word_vocab, int char_vocab, int label_count)
      : cfg_(cfg), labels_(label_count) {
    params_.add("embed.word", {word_vocab, cfg.word_dim});
    params_.add("embed.char", {char_vocab, cfg.char_dim});
    params_.add("char_cnn.kernel", {cfg.char_channels, cfg.char_kernel, cfg.char_dim});
    params_.add("char_cnn.bias", {cfg.char_channels});
    const int C = cfg.context_channels;
    switch (cfg.context) {
      case ContextMode::Full:
        for (int k : cfg.context_kernels) {
          const std::string base = "context.conv" + std::to_string(k);
          params_.add(base + ".kernel", {C, k, cfg.repr_dim()});
          params_.add(base + ".bias", {C});
        }
        break;
      case ContextMode::Branch3:
        params_.add("context.conv3.kernel", {C, 3, cfg.repr_dim()});
        params_.add("context.conv3.bias", {C});
        break;
      case ContextMode::Off:
        params_.add("context.proj.weight", {C, cfg.repr_dim()});
        params_.add("context.proj.bias", {C});
        break;
    }
    switch (cfg.fusion) {
      case Fusion::Grn:
      case Fusion::Dfn:
        params_.add("relation.W_rx", {C, 2 * C});
        params_.add("relation.b_rx", {C});
        break;
      case Fusion::Gattn:
        params_.add("relation.W_x", {1, 2 * C});
        params_.add("relation.b_x", {1});
        break;
      case Fusion::None:
        break;
    }
    params_.add("crf.W_y", {label_count, C});
    params_.add("crf.transitions", {label_count + 1, label_count + 1});
  }

  const ModelConfig& config() const { return cfg_; }
  int label_count() const { return labels_; }
  ParamStore<Real>& params() { return params_; }
  const ParamStore<Real>& params() const { return params_; }

  /// Forward pass to CRF potentials. keep_relation materializes the
  /// pairwise tensor for heat-map export (only meaningful for the grn and
  /// dfn fusions).
  ForwardResult<Real> forward(Graph<Real>& g, const Batch& batch, bool training,
                              bool keep_relation = false) {
    ForwardResult<Real> res;
    Node<Real>* z = represent(g, params_.get("embed.word"), params_.get("embed.char"),
                              params_.get("char_cnn.kernel"), params_.get("char_cnn.bias"), batch,
                              cfg_.dropout, training);
    Node<Real>* x = nullptr;
    switch (cfg_.context) {
      case ContextMode::Full: {
        std::vector<ConvBranch<Real>> branches;
        for (int k : cfg_.context_kernels) {
          const std::string base = "context.conv" + std::to_string(k);
          branches.push_back({params_.get(base + ".kernel"), params_.get(base + ".bias")});
        }
        x = context_layer(g, z, batch, branches);
        break;
      }
      case ContextMode::Branch3:
        x = context_layer(g, z, batch,
                          {{params_.get("context.conv3.kernel"), params_.get("context.conv3.bias")}});
        break;
      case ContextMode::Off:
        x = context_bypass(g, z, batch, params_.get("context.proj.weight"),
                           params_.get("context.proj.bias"));
        break;
    }

    Node<Real>* p = nullptr;
    switch (cfg_.fusion) {
      case Fusion::Grn:
      case Fusion::Dfn: {
        Node<Real>* fused = relation_fused(g, x, batch, keep_relation ? &res.relation : nullptr);
        p = predict_features(g, fused, cfg_.dropout, training);
        break;
      }
      case Fusion::Gattn: {
        Node<Real>* fused =
            fuse_gattn(g, x, batch.lengths, params_.get("relation.W_x"), params_.get("relation.b_x"));
        p = predict_features(g, fused, cfg_.dropout, training);
        break;
      }
      case Fusion::None:
        p = x;  // CRF sits directly on the context feature
        break;
    }

    res.predicting = p;
    res.scores =
        potentials(g, p, params_.get("crf.W_y"), params_.get("crf.transitions"), batch.lengths);
    return res;
  }

  Node<Real>* loss(Graph<Real>& g, const ForwardResult<Real>& fwd, const Batch& batch) {
    return nll_loss(g, fwd.scores, batch.label_ids);
  }

  /// Viterbi label ids per sentence, trimmed to true lengths.
  std::vector<std::vector<int>> decode(const ForwardResult<Real>& fwd) {
    return viterbi(fwd.scores).paths;
  }

 private:
  // Materializes the pairwise tensor, in sentence chunks when a single
  // [B x T x T x C] allocation would exceed the budget.
  Node<Real>* relation_fused(Graph<Real>& g, Node<Real>* x, const Batch& batch,
                             Node<Real>** relation_out) {
    Node<Real>* w = params_.get("relation.W_rx");
    Node<Real>* b = params_.get("relation.b_rx");
    const int64_t per_sentence = static_cast<int64_t>(batch.T) * batch.T *
                                 cfg_.context_channels * static_cast<int64_t>(sizeof(Real));
    int chunk = batch.B;
    if (per_sentence * batch.B > cfg_.relation_budget_bytes && !relation_out) {
      chunk = std::max<int>(1, static_cast<int>(cfg_.relation_budget_bytes / per_sentence));
    }

    std::vector<Node<Real>*> parts;
    for (int begin = 0; begin < batch.B; begin += chunk) {
      const int end = std::min(batch.B, begin + chunk);
      Node<Real>* xs = (begin == 0 && end == batch.B) ? x : slice_first(g, x, begin, end);
      std::vector<int> lens(batch.lengths.begin() + begin, batch.lengths.begin() + end);
      Node<Real>* r = relation_scores(g, xs, lens, w, b);
      if (relation_out && begin == 0 && end == batch.B) *relation_out = r;
      parts.push_back(cfg_.fusion == Fusion::Grn ? fuse_grn(g, r, xs, lens)
                                                 : fuse_dfn(g, r, lens));
    }
    return parts.size() == 1 ? parts[0] : concat_first(g, parts);
  }

  ModelConfig cfg_;
  int labels_;
  ParamStore<Real> params_;
};

}  // namespace grn
