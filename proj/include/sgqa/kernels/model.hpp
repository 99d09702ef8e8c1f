#pragma once

#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sgqa/kernels/layers.hpp"

namespace sgqa::kernels {

struct KernelDims {
  std::size_t objects = 5;   // m
  std::size_t tokens = 7;    // l
  std::size_t width = 16;    // d
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t twinning_rounds = 2;
  std::size_t answers = 10;
  std::size_t node_classes = 8;
  std::size_t predicates = 6;
  std::size_t pos_hidden = 0;  // 0 means width
  std::size_t ffn_hidden = 0;  // 0 means 2 * width

  std::size_t pos_hidden_or_default() const { return pos_hidden ? pos_hidden : width; }
  std::size_t ffn_hidden_or_default() const { return ffn_hidden ? ffn_hidden : 2 * width; }

  void validate() const {
    if (width == 0 || heads == 0 || width % heads != 0)
      throw std::invalid_argument("kernel dims: width " + std::to_string(width) + " must be a positive multiple of " +
                                  std::to_string(heads) + " heads");
    if (objects == 0) throw std::invalid_argument("kernel dims: need at least one object");
    if (tokens == 0) throw std::invalid_argument("kernel dims: need at least one language token");
    if (twinning_rounds == 0) throw std::invalid_argument("kernel dims: need at least one twinning round");
    if (answers == 0 || node_classes == 0 || predicates == 0)
      throw std::invalid_argument("kernel dims: head sizes must be positive");
  }
};

struct HeadParams {
  Matrix answer_w, answer_b;  // answers x d, 1 x answers
  Matrix node_w, node_b;      // classes x d, 1 x classes
  Matrix edge_w, edge_b;      // predicates x d, 1 x predicates
};

struct KernelParams {
  std::size_t heads = 4;
  PositionalEncoderParams pos;
  MergeParams merge;
  std::vector<TransformerLayerParams> layers;
  std::vector<TwinningParams> twinning;
  CrossAttentionParams cross;
  HeadParams head;

  /// Uniform(-s, s) weights with s = 1/sqrt(fan_in); layer-norm gains near 1.
  static KernelParams random(const KernelDims& k, Rng& rng) {
    k.validate();
    const std::size_t d = k.width, ph = k.pos_hidden_or_default(), fh = k.ffn_hidden_or_default();
    auto w = [&](std::size_t out, std::size_t in) {
      return Matrix::random(out, in, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    };
    auto bias = [&](std::size_t n) { return Matrix::random(1, n, rng, 0.1); };
    auto ln = [&]() {
      LayerNormParams p{Matrix::random(1, d, rng, 0.1), Matrix::random(1, d, rng, 0.1)};
      for (double& g : p.gain.data()) g += 1.0;
      return p;
    };
    KernelParams p;
    p.heads = k.heads;
    p.pos = {w(ph, kBoxFeatures), bias(ph), w(d, ph), bias(d)};
    p.merge.w1 = w(d, d);
    p.merge.w2 = w(d, d);
    p.merge.ln1 = ln();
    p.merge.ln2 = ln();
    for (std::size_t i = 0; i < k.layers; ++i) {
      TransformerLayerParams t;
      t.wq = w(d, d);
      t.wk = w(d, d);
      t.wv = w(d, d);
      t.wo = w(d, d);
      t.ln1 = ln();
      t.ln2 = ln();
      t.ff1 = w(fh, d);
      t.ff1_b = bias(fh);
      t.ff2 = w(d, fh);
      t.ff2_b = bias(d);
      p.layers.push_back(std::move(t));
    }
    for (std::size_t r = 0; r < k.twinning_rounds; ++r) {
      const std::size_t e = r == 0 ? 2 * d + kEdgeGeometry : d;
      p.twinning.push_back({w(d, e), w(d, e), w(d, 2 * d)});
    }
    p.cross.w6 = w(d, 2 * d);
    p.head = {w(k.answers, d), bias(k.answers), w(k.node_classes, d), bias(k.node_classes), w(k.predicates, d),
              bias(k.predicates)};
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  KernelParams zeros_like() const {
    KernelParams z = *this;
    z.for_each([](const std::string&, Matrix& m) { m = m.zeros_like(); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
  }

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    auto ln = [&](const std::string& prefix, auto& l) {
      f(prefix + ".gain", l.gain);
      f(prefix + ".shift", l.shift);
    };
    f("pos.w1", p.pos.w1);
    f("pos.b1", p.pos.b1);
    f("pos.w2", p.pos.w2);
    f("pos.b2", p.pos.b2);
    f("merge.w1", p.merge.w1);
    f("merge.w2", p.merge.w2);
    ln("merge.ln1", p.merge.ln1);
    ln("merge.ln2", p.merge.ln2);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      auto& t = p.layers[i];
      const std::string s = "transformer." + std::to_string(i) + ".";
      f(s + "wq", t.wq);
      f(s + "wk", t.wk);
      f(s + "wv", t.wv);
      f(s + "wo", t.wo);
      ln(s + "ln1", t.ln1);
      ln(s + "ln2", t.ln2);
      f(s + "ff1", t.ff1);
      f(s + "ff1_b", t.ff1_b);
      f(s + "ff2", t.ff2);
      f(s + "ff2_b", t.ff2_b);
    }
    for (std::size_t r = 0; r < p.twinning.size(); ++r) {
      const std::string s = "twinning." + std::to_string(r) + ".";
      f(s + "w3", p.twinning[r].w3);
      f(s + "w4", p.twinning[r].w4);
      f(s + "w5", p.twinning[r].w5);
    }
    f("cross.w6", p.cross.w6);
    f("head.answer_w", p.head.answer_w);
    f("head.answer_b", p.head.answer_b);
    f("head.node_w", p.head.node_w);
    f("head.node_b", p.head.node_b);
    f("head.edge_w", p.head.edge_w);
    f("head.edge_b", p.head.edge_b);
  }
};

/// Per-scene inputs: point-cloud object features (m x d), boxes (m x 7) and
/// language token embeddings (l x d).
struct SceneInputs {
  Matrix object_features;
  Matrix boxes;
  Matrix language;

  Matrix centers() const { return slice_cols(boxes, 0, 3); }

  static SceneInputs random(const KernelDims& k, Rng& rng) {
    SceneInputs in{Matrix::random(k.objects, k.width, rng, 1.0), Matrix(k.objects, kBoxFeatures),
                   Matrix::random(k.tokens, k.width, rng, 1.0)};
    for (std::size_t i = 0; i < k.objects; ++i) {
      for (std::size_t c = 0; c < 3; ++c) in.boxes(i, c) = rng.uniform(-2.0, 2.0);
      for (std::size_t c = 3; c < 6; ++c) in.boxes(i, c) = rng.uniform(0.2, 2.0);
      in.boxes(i, 6) = rng.uniform(-std::numbers::pi, std::numbers::pi);
    }
    return in;
  }
};

struct Targets {
  std::vector<int> answer;  // one label
  std::vector<int> node_labels;
  Matrix edge_labels;  // m*m x predicates, diagonal rows zero

  static Targets random(const KernelDims& k, Rng& rng) {
    Targets t;
    t.answer = {static_cast<int>(rng.below(k.answers))};
    for (std::size_t i = 0; i < k.objects; ++i) t.node_labels.push_back(static_cast<int>(rng.below(k.node_classes)));
    t.edge_labels = Matrix(k.objects * k.objects, k.predicates);
    for (std::size_t i = 0; i < k.objects; ++i)
      for (std::size_t j = 0; j < k.objects; ++j)
        if (i != j)
          for (std::size_t c = 0; c < k.predicates; ++c) t.edge_labels(i * k.objects + j, c) = rng.bernoulli(0.3) ? 1 : 0;
    return t;
  }
};

// ---------------------------------------------------------------------------
// Transformer stack over [objects; language]

struct TransformerStackCache {
  std::vector<TransformerLayerCache> layers;
};

inline std::pair<Matrix, Matrix> cross_modal_transformer(const Matrix& x, const Matrix& w,
                                                         const std::vector<TransformerLayerParams>& layers,
                                                         std::size_t heads, Activation act,
                                                         TransformerStackCache* cache = nullptr,
                                                         KinkMonitor* mon = nullptr) {
  if (x.rows() && w.rows() && x.cols() != w.cols())
    throw std::invalid_argument("transformer: object width " + std::to_string(x.cols()) + " vs language width " +
                                std::to_string(w.cols()));
  Matrix tokens = stack_rows(x, w);
  if (cache) cache->layers.assign(layers.size(), {});
  for (std::size_t i = 0; i < layers.size(); ++i)
    tokens = transformer_layer(tokens, layers[i], heads, act, cache ? &cache->layers[i] : nullptr, mon);
  return {slice_rows(tokens, 0, x.rows()), slice_rows(tokens, x.rows(), tokens.rows())};
}

inline std::pair<Matrix, Matrix> cross_modal_transformer_backward(const Matrix& dx, const Matrix& dw,
                                                                  const TransformerStackCache& c,
                                                                  const std::vector<TransformerLayerParams>& layers,
                                                                  std::size_t heads, Activation act,
                                                                  std::vector<TransformerLayerParams>& grad) {
  Matrix d = stack_rows(dx, dw);
  for (std::size_t i = layers.size(); i-- > 0;)
    d = transformer_layer_backward(d, c.layers[i], layers[i], heads, act, grad[i]);
  return {slice_rows(d, 0, dx.rows()), slice_rows(d, dx.rows(), d.rows())};
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineOptions {
  Activation activation = Activation::relu;
  LossWeights weights;
};

struct ForwardResult {
  Matrix x_pos, x, x_prime, w_prime;
  Matrix x_v;    // node features after the last twinning round
  EdgeTensor x_e;  // edge features after the last twinning round
  Matrix w_hat;
  Matrix answer_logits, node_logits, edge_logits;
  LossBundle loss;
};

struct PipelineCache {
  PositionalCache pos;
  MergeCache merge;
  TransformerStackCache transformer;
  std::vector<EdgeToNodeCache> edge_to_node;
  std::vector<NodeToEdgeCache> node_to_edge;
  CrossAttentionCache cross;
  Matrix pooled;
  LossGradients loss_grads;
};

inline ForwardResult forward(const KernelParams& p, const SceneInputs& in, const Targets& t,
                             const PipelineOptions& opt = {}, PipelineCache* cache = nullptr,
                             KinkMonitor* mon = nullptr) {
  const Activation act = opt.activation;
  const std::size_t m = in.object_features.rows();
  if (in.boxes.rows() != m) throw std::invalid_argument("pipeline: box count does not match object count");
  if (in.language.rows() == 0) throw std::invalid_argument("pipeline: need at least one language token");
  ForwardResult r;
  r.x_pos = positional_encoding(in.boxes, p.pos, act, cache ? &cache->pos : nullptr, mon);
  r.x = merge_embedding(in.object_features, r.x_pos, p.merge, cache ? &cache->merge : nullptr);
  std::tie(r.x_prime, r.w_prime) =
      cross_modal_transformer(r.x, in.language, p.layers, p.heads, act, cache ? &cache->transformer : nullptr, mon);

  r.x_v = r.x_prime;
  r.x_e = init_edges(r.x_v, in.centers());
  if (cache) {
    cache->edge_to_node.assign(p.twinning.size(), {});
    cache->node_to_edge.assign(p.twinning.size(), {});
  }
  for (std::size_t k = 0; k < p.twinning.size(); ++k) {
    r.x_v = edge_to_node(r.x_v, r.x_e, p.twinning[k], act, cache ? &cache->edge_to_node[k] : nullptr, mon);
    r.x_e = node_to_edge(r.x_v, p.twinning[k], act, cache ? &cache->node_to_edge[k] : nullptr, mon);
  }
  r.w_hat = cross_modal_attention(r.w_prime, r.x_v, p.cross, cache ? &cache->cross : nullptr);

  Matrix pooled = column_sums(r.w_hat);
  pooled *= 1.0 / static_cast<double>(r.w_hat.rows());
  r.answer_logits = matmul_nt(pooled, p.head.answer_w);
  add_row_vector(r.answer_logits, p.head.answer_b);
  r.node_logits = matmul_nt(r.x_v, p.head.node_w);
  add_row_vector(r.node_logits, p.head.node_b);
  r.edge_logits = matmul_nt(r.x_e.features, p.head.edge_w);
  add_row_vector(r.edge_logits, p.head.edge_b);
  r.loss = losses(r.answer_logits, t.answer, r.node_logits, t.node_labels, r.edge_logits, t.edge_labels, m,
                  opt.weights, cache ? &cache->loss_grads : nullptr);
  if (cache) cache->pooled = std::move(pooled);
  return r;
}

/// Gradient of the total loss with respect to every parameter.
inline KernelParams backward(const KernelParams& p, const ForwardResult& r, const PipelineCache& c,
                             const PipelineOptions& opt = {}) {
  const Activation act = opt.activation;
  const std::size_t d = r.x_v.cols();
  KernelParams g = p.zeros_like();
  const LossGradients& lg = c.loss_grads;

  g.head.answer_w += matmul_tn(lg.answer, c.pooled);
  g.head.answer_b += column_sums(lg.answer);
  Matrix dpooled = matmul(lg.answer, p.head.answer_w);
  Matrix dw_hat(r.w_hat.rows(), d);
  for (std::size_t i = 0; i < dw_hat.rows(); ++i)
    for (std::size_t ch = 0; ch < d; ++ch) dw_hat(i, ch) = dpooled(0, ch) / static_cast<double>(dw_hat.rows());

  g.head.node_w += matmul_tn(lg.node, r.x_v);
  g.head.node_b += column_sums(lg.node);
  Matrix dx_v = matmul(lg.node, p.head.node_w);

  g.head.edge_w += matmul_tn(lg.edge, r.x_e.features);
  g.head.edge_b += column_sums(lg.edge);
  EdgeTensor dx_e{r.x_e.m, matmul(lg.edge, p.head.edge_w)};

  auto [dw_prime, dnodes] = cross_modal_attention_backward(dw_hat, c.cross, p.cross, g.cross);
  dx_v += dnodes;

  for (std::size_t k = p.twinning.size(); k-- > 0;) {
    dx_v += node_to_edge_backward(dx_e, c.node_to_edge[k], p.twinning[k], act, g.twinning[k]);
    auto [dv, de] = edge_to_node_backward(dx_v, c.edge_to_node[k], p.twinning[k], act, g.twinning[k]);
    dx_v = std::move(dv);
    dx_e = std::move(de);
  }
  Matrix dx_prime = dx_v + init_edges_backward(dx_e, d);

  auto [dx, dlang] = cross_modal_transformer_backward(dx_prime, dw_prime, c.transformer, p.layers, p.heads, act, g.layers);
  (void)dlang;
  Matrix dx_pos = merge_embedding_backward(dx, c.merge, p.merge, g.merge);
  positional_encoding_backward(dx_pos, c.pos, p.pos, act, g.pos);
  return g;
}

}  // namespace sgqa::kernels
