#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

#include "sgqa/kernels/matrix.hpp"

namespace sgqa::kernels {

/// The nonlinearity used wherever the model applies "f". ReLU by default;
/// identity makes every layer affine, which the gradient checker exploits.
enum class Activation { relu, identity };

/// Smallest nonzero |input| seen by any ReLU during a forward pass. Finite
/// differences are unreliable when this is within a few steps of zero.
struct KinkMonitor {
  double min_abs = std::numeric_limits<double>::infinity();

  void observe(const Matrix& pre) {
    for (double v : pre.data())
      if (v != 0.0) min_abs = std::min(min_abs, std::abs(v));
  }
};

inline Matrix activate(const Matrix& pre, Activation act, KinkMonitor* mon) {
  if (act == Activation::identity) return pre;
  if (mon) mon->observe(pre);
  Matrix out = pre;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

/// grad *= f'(pre)
inline void activation_backward(Matrix& grad, const Matrix& pre, Activation act) {
  if (act == Activation::identity) return;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(pre.data()[i] > 0.0)) grad.data()[i] = 0.0;
}

// ---------------------------------------------------------------------------
// Layer normalization over channels

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormParams {
  Matrix gain;   // 1 x d
  Matrix shift;  // 1 x d

  static LayerNormParams identity(std::size_t d) { return {Matrix(1, d, 1.0), Matrix(1, d, 0.0)}; }
};

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

inline Matrix layer_norm(const Matrix& x, const LayerNormParams& p, LayerNormCache* cache = nullptr) {
  const std::size_t d = x.cols();
  Matrix xhat(x.rows(), d), out(x.rows(), d);
  std::vector<double> inv(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0;
    for (double v : x.row(i)) mean += v;
    mean /= static_cast<double>(d);
    double var = 0;
    for (double v : x.row(i)) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (x(i, j) - mean) * inv[i];
      out(i, j) = p.gain(0, j) * xhat(i, j) + p.shift(0, j);
    }
  }
  if (cache) *cache = {std::move(xhat), std::move(inv)};
  return out;
}

inline Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& c, const LayerNormParams& p,
                                  LayerNormParams& grad) {
  const std::size_t d = dy.cols();
  const double n = static_cast<double>(d);
  Matrix dx(dy.rows(), d);
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    double sum = 0, dot = 0;
    for (std::size_t j = 0; j < d; ++j) {
      grad.gain(0, j) += dy(i, j) * c.xhat(i, j);
      grad.shift(0, j) += dy(i, j);
      dxhat[j] = dy(i, j) * p.gain(0, j);
      sum += dxhat[j];
      dot += dxhat[j] * c.xhat(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) dx(i, j) = c.inv_std[i] / n * (n * dxhat[j] - sum - c.xhat(i, j) * dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Object positional encoding: [center; size; orientation] (7) -> d

inline constexpr std::size_t kBoxFeatures = 7;

struct PositionalEncoderParams {
  Matrix w1;  // hidden x 7
  Matrix b1;  // 1 x hidden
  Matrix w2;  // d x hidden
  Matrix b2;  // 1 x d
};

struct PositionalCache {
  Matrix input, pre, hidden;
};

/// Rows of `boxes` are [cx, cy, cz, w, l, h, yaw].
inline Matrix positional_encoding(const Matrix& boxes, const PositionalEncoderParams& p, Activation act,
                                  PositionalCache* cache = nullptr, KinkMonitor* mon = nullptr) {
  if (boxes.cols() != kBoxFeatures) throw std::invalid_argument("positional_encoding: boxes must have 7 columns");
  Matrix pre = matmul_nt(boxes, p.w1);
  add_row_vector(pre, p.b1);
  Matrix hidden = activate(pre, act, mon);
  Matrix out = matmul_nt(hidden, p.w2);
  add_row_vector(out, p.b2);
  if (cache) *cache = {boxes, std::move(pre), std::move(hidden)};
  return out;
}

inline void positional_encoding_backward(const Matrix& dout, const PositionalCache& c, const PositionalEncoderParams& p,
                                         Activation act, PositionalEncoderParams& grad) {
  grad.w2 += matmul_tn(dout, c.hidden);
  grad.b2 += column_sums(dout);
  Matrix dpre = matmul(dout, p.w2);
  activation_backward(dpre, c.pre, act);
  grad.w1 += matmul_tn(dpre, c.input);
  grad.b1 += column_sums(dpre);
}

// ---------------------------------------------------------------------------
// Embedding merge: LN(W1 x_pc) + LN(W2 x_pos)

struct MergeParams {
  Matrix w1;  // d x d
  Matrix w2;  // d x d
  LayerNormParams ln1, ln2;
};

struct MergeCache {
  Matrix x_pc, x_pos;
  LayerNormCache ln1, ln2;
};

inline Matrix merge_embedding(const Matrix& x_pc, const Matrix& x_pos, const MergeParams& p,
                              MergeCache* cache = nullptr) {
  LayerNormCache c1, c2;
  Matrix out = layer_norm(matmul_nt(x_pc, p.w1), p.ln1, &c1);
  out += layer_norm(matmul_nt(x_pos, p.w2), p.ln2, &c2);
  if (cache) *cache = {x_pc, x_pos, std::move(c1), std::move(c2)};
  return out;
}

/// Returns the gradient with respect to x_pos.
inline Matrix merge_embedding_backward(const Matrix& dout, const MergeCache& c, const MergeParams& p, MergeParams& grad) {
  Matrix da1 = layer_norm_backward(dout, c.ln1, p.ln1, grad.ln1);
  grad.w1 += matmul_tn(da1, c.x_pc);
  Matrix da2 = layer_norm_backward(dout, c.ln2, p.ln2, grad.ln2);
  grad.w2 += matmul_tn(da2, c.x_pos);
  return matmul(da2, p.w2);
}

// ---------------------------------------------------------------------------
// Post-LN transformer layer over a token sequence; no position codes.

struct TransformerLayerParams {
  Matrix wq, wk, wv, wo;  // d x d
  LayerNormParams ln1, ln2;
  Matrix ff1;    // hidden x d
  Matrix ff1_b;  // 1 x hidden
  Matrix ff2;    // d x hidden
  Matrix ff2_b;  // 1 x d
};

struct TransformerLayerCache {
  Matrix input, q, k, v;
  std::vector<Matrix> attention;  // per head, n x n row-stochastic
  Matrix heads_out;               // n x d, heads concatenated
  LayerNormCache ln1;
  Matrix h;
  Matrix ff_pre, ff_hidden;
  LayerNormCache ln2;
};

inline Matrix transformer_layer(const Matrix& x, const TransformerLayerParams& p, std::size_t heads, Activation act,
                                TransformerLayerCache* cache = nullptr, KinkMonitor* mon = nullptr) {
  const std::size_t n = x.rows(), d = x.cols();
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("transformer: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  if (p.wq.cols() != d) throw std::invalid_argument("transformer: token width " + std::to_string(d) + " vs weights " + p.wq.shape());
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix q = matmul_nt(x, p.wq), k = matmul_nt(x, p.wk), v = matmul_nt(x, p.wv);
  Matrix heads_out(n, d);
  std::vector<Matrix> attention;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dk;
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dk; ++c) s += q(i, off + c) * k(j, off + c);
        a(i, j) = s * scale;
        mx = std::max(mx, a(i, j));
      }
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) z += (a(i, j) = std::exp(a(i, j) - mx));
      for (std::size_t j = 0; j < n; ++j) a(i, j) /= z;
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < dk; ++c) heads_out(i, off + c) += a(i, j) * v(j, off + c);
    }
    attention.push_back(std::move(a));
  }
  Matrix resid1 = x + matmul_nt(heads_out, p.wo);
  LayerNormCache c1;
  Matrix h = layer_norm(resid1, p.ln1, &c1);
  Matrix ff_pre = matmul_nt(h, p.ff1);
  add_row_vector(ff_pre, p.ff1_b);
  Matrix ff_hidden = activate(ff_pre, act, mon);
  Matrix ff_out = matmul_nt(ff_hidden, p.ff2);
  add_row_vector(ff_out, p.ff2_b);
  LayerNormCache c2;
  Matrix out = layer_norm(h + ff_out, p.ln2, &c2);
  if (cache)
    *cache = {x, std::move(q), std::move(k), std::move(v), std::move(attention), std::move(heads_out),
              std::move(c1), std::move(h), std::move(ff_pre), std::move(ff_hidden), std::move(c2)};
  return out;
}

inline Matrix transformer_layer_backward(const Matrix& dout, const TransformerLayerCache& c,
                                         const TransformerLayerParams& p, std::size_t heads, Activation act,
                                         TransformerLayerParams& grad) {
  const std::size_t n = dout.rows(), d = dout.cols(), dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix dresid2 = layer_norm_backward(dout, c.ln2, p.ln2, grad.ln2);
  grad.ff2 += matmul_tn(dresid2, c.ff_hidden);
  grad.ff2_b += column_sums(dresid2);
  Matrix dff = matmul(dresid2, p.ff2);
  activation_backward(dff, c.ff_pre, act);
  grad.ff1 += matmul_tn(dff, c.h);
  grad.ff1_b += column_sums(dff);
  Matrix dh = dresid2 + matmul(dff, p.ff1);

  Matrix dresid1 = layer_norm_backward(dh, c.ln1, p.ln1, grad.ln1);
  grad.wo += matmul_tn(dresid1, c.heads_out);
  Matrix dheads = matmul(dresid1, p.wo);

  Matrix dq(n, d), dk_(n, d), dv(n, d);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t off = hd * dk;
    const Matrix& a = c.attention[hd];
    Matrix da(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t ch = 0; ch < dk; ++ch) {
          s += dheads(i, off + ch) * c.v(j, off + ch);
          dv(j, off + ch) += a(i, j) * dheads(i, off + ch);
        }
        da(i, j) = s;
      }
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += da(i, j) * a(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        const double ds = a(i, j) * (da(i, j) - dot) * scale;
        if (ds == 0.0) continue;
        for (std::size_t ch = 0; ch < dk; ++ch) {
          dq(i, off + ch) += ds * c.k(j, off + ch);
          dk_(j, off + ch) += ds * c.q(i, off + ch);
        }
      }
    }
  }
  grad.wq += matmul_tn(dq, c.input);
  grad.wk += matmul_tn(dk_, c.input);
  grad.wv += matmul_tn(dv, c.input);
  Matrix dx = dresid1;
  dx += matmul(dq, p.wq);
  dx += matmul(dk_, p.wk);
  dx += matmul(dv, p.wv);
  return dx;
}

// ---------------------------------------------------------------------------
// Edge tensor: m x m slices of node features, stored as m*m rows.

struct EdgeTensor {
  std::size_t m = 0;
  Matrix features;  // row i*m + j is edge (i, j)

  std::span<const double> at(std::size_t i, std::size_t j) const { return features.row(i * m + j); }
  std::span<double> at(std::size_t i, std::size_t j) { return features.row(i * m + j); }
  std::size_t channels() const { return features.cols(); }
};

inline constexpr std::size_t kEdgeGeometry = 9;

/// Slice (i, j) = [x_v[i]; x_v[j]; center_i; center_j; center_j - center_i].
inline EdgeTensor init_edges(const Matrix& x_v, const Matrix& centers) {
  const std::size_t m = x_v.rows(), d = x_v.cols();
  if (centers.rows() != m || centers.cols() != 3)
    throw std::invalid_argument("init_edges: centers must be " + std::to_string(m) + "x3, got " + centers.shape());
  EdgeTensor e{m, Matrix(m * m, 2 * d + kEdgeGeometry)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto row = e.at(i, j);
      for (std::size_t c = 0; c < d; ++c) {
        row[c] = x_v(i, c);
        row[d + c] = x_v(j, c);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        row[2 * d + c] = centers(i, c);
        row[2 * d + 3 + c] = centers(j, c);
        row[2 * d + 6 + c] = centers(j, c) - centers(i, c);
      }
    }
  return e;
}

/// Gradient of init_edges with respect to x_v.
inline Matrix init_edges_backward(const EdgeTensor& de, std::size_t d) {
  const std::size_t m = de.m;
  Matrix dx(m, d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto row = de.at(i, j);
      for (std::size_t c = 0; c < d; ++c) {
        dx(i, c) += row[c];
        dx(j, c) += row[d + c];
      }
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Twinning attention

struct TwinningParams {
  Matrix w3;  // d x edge_channels
  Matrix w4;  // d x edge_channels
  Matrix w5;  // d x 2d
};

struct EdgeToNodeCache {
  Matrix x_v;
  Matrix edge_rows, edge_cols;  // m x edge_channels, mean over j of E[i][j] and E[j][i]
  Matrix row_pool, col_pool;    // m x d
  Matrix gate;                  // sigma(R)
  Matrix pre;                   // x_v * gate
};

/// Mean of each row and each column of edge slices.
inline std::pair<Matrix, Matrix> pool_edges(const EdgeTensor& e) {
  const std::size_t m = e.m, ch = e.channels();
  Matrix rows(m, ch), cols(m, ch);
  const double inv = m ? 1.0 / static_cast<double>(m) : 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto s = e.at(i, j);
      for (std::size_t c = 0; c < ch; ++c) {
        rows(i, c) += s[c] * inv;
        cols(j, c) += s[c] * inv;
      }
    }
  return {std::move(rows), std::move(cols)};
}

/// R_i = pool_j(W3 E[i][j]) * pool_j(W4 E[j][i]); x_v' = f(x_v * sigma(R)).
/// Pooling is the mean, so it commutes with the projections.
inline Matrix edge_to_node(const Matrix& x_v, const EdgeTensor& e, const TwinningParams& p, Activation act,
                           EdgeToNodeCache* cache = nullptr, KinkMonitor* mon = nullptr) {
  if (e.m != x_v.rows()) throw std::invalid_argument("edge_to_node: edge tensor size does not match node count");
  auto [rows, cols] = pool_edges(e);
  Matrix row_pool = matmul_nt(rows, p.w3);
  Matrix col_pool = matmul_nt(cols, p.w4);
  Matrix gate = hadamard(row_pool, col_pool);
  for (double& g : gate.data()) g = sigmoid(g);
  Matrix pre = hadamard(x_v, gate);
  Matrix out = activate(pre, act, mon);
  if (cache)
    *cache = {x_v, std::move(rows), std::move(cols), std::move(row_pool), std::move(col_pool), std::move(gate), std::move(pre)};
  return out;
}

/// Accumulates parameter gradients; returns (d x_v, d edges).
inline std::pair<Matrix, EdgeTensor> edge_to_node_backward(const Matrix& dout, const EdgeToNodeCache& c,
                                                           const TwinningParams& p, Activation act,
                                                           TwinningParams& grad) {
  const std::size_t m = dout.rows();
  Matrix dpre = dout;
  activation_backward(dpre, c.pre, act);
  Matrix dx = hadamard(dpre, c.gate);
  Matrix dr = hadamard(dpre, c.x_v);
  for (std::size_t i = 0; i < dr.size(); ++i) {
    const double g = c.gate.data()[i];
    dr.data()[i] *= g * (1.0 - g);
  }
  Matrix drow = hadamard(dr, c.col_pool);
  Matrix dcol = hadamard(dr, c.row_pool);
  grad.w3 += matmul_tn(drow, c.edge_rows);
  grad.w4 += matmul_tn(dcol, c.edge_cols);
  Matrix de_rows = matmul(drow, p.w3);
  Matrix de_cols = matmul(dcol, p.w4);
  EdgeTensor de{m, Matrix(m * m, c.edge_rows.cols())};
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto s = de.at(i, j);
      for (std::size_t ch = 0; ch < s.size(); ++ch) s[ch] = (de_rows(i, ch) + de_cols(j, ch)) * inv;
    }
  return {std::move(dx), std::move(de)};
}

struct NodeToEdgeCache {
  Matrix x_v;
  Matrix pre;  // m*m x d
};

/// X_E'[i][j] = f(W5 [x_v[i]; x_v[j]]).
inline EdgeTensor node_to_edge(const Matrix& x_v, const TwinningParams& p, Activation act,
                               NodeToEdgeCache* cache = nullptr, KinkMonitor* mon = nullptr) {
  const std::size_t m = x_v.rows(), d = x_v.cols();
  if (p.w5.cols() != 2 * d) throw std::invalid_argument("node_to_edge: W5 must have 2d columns, got " + p.w5.shape());
  Matrix left = matmul_nt(x_v, slice_cols(p.w5, 0, d));
  Matrix right = matmul_nt(x_v, slice_cols(p.w5, d, 2 * d));
  const std::size_t out_ch = p.w5.rows();
  Matrix pre(m * m, out_ch);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < out_ch; ++c) pre(i * m + j, c) = left(i, c) + right(j, c);
  EdgeTensor out{m, activate(pre, act, mon)};
  if (cache) *cache = {x_v, std::move(pre)};
  return out;
}

/// Accumulates into grad.w5; returns d x_v.
inline Matrix node_to_edge_backward(const EdgeTensor& dout, const NodeToEdgeCache& c, const TwinningParams& p,
                                    Activation act, TwinningParams& grad) {
  const std::size_t m = dout.m, d = c.x_v.cols(), out_ch = p.w5.rows();
  Matrix dpre = dout.features;
  activation_backward(dpre, c.pre, act);
  Matrix dleft(m, out_ch), dright(m, out_ch);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t ch = 0; ch < out_ch; ++ch) {
        dleft(i, ch) += dpre(i * m + j, ch);
        dright(j, ch) += dpre(i * m + j, ch);
      }
  Matrix gl = matmul_tn(dleft, c.x_v), gr = matmul_tn(dright, c.x_v);
  for (std::size_t r = 0; r < out_ch; ++r)
    for (std::size_t ch = 0; ch < d; ++ch) {
      grad.w5(r, ch) += gl(r, ch);
      grad.w5(r, d + ch) += gr(r, ch);
    }
  Matrix dx = matmul(dleft, slice_cols(p.w5, 0, d));
  dx += matmul(dright, slice_cols(p.w5, d, 2 * d));
  return dx;
}

// ---------------------------------------------------------------------------
// Cross-modal attention: w_hat_i = mean_j sigma(W6 [w'_i; x_j]) * x_j

struct CrossAttentionParams {
  Matrix w6;  // d x 2d
};

struct CrossAttentionCache {
  Matrix language, nodes;
  Matrix gates;  // (l*m) x d, row i*m + j
};

inline Matrix cross_modal_attention(const Matrix& language, const Matrix& nodes, const CrossAttentionParams& p,
                                    CrossAttentionCache* cache = nullptr) {
  const std::size_t l = language.rows(), m = nodes.rows(), d = nodes.cols();
  if (language.cols() != d || p.w6.cols() != 2 * d || p.w6.rows() != d)
    throw std::invalid_argument("cross_modal_attention: shapes " + language.shape() + ", " + nodes.shape() + ", W6 " +
                                p.w6.shape());
  if (m == 0) throw std::invalid_argument("cross_modal_attention: needs at least one node");
  Matrix pw = matmul_nt(language, slice_cols(p.w6, 0, d));
  Matrix px = matmul_nt(nodes, slice_cols(p.w6, d, 2 * d));
  Matrix gates(l * m, d), out(l, d);
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < d; ++c) {
        const double g = sigmoid(pw(i, c) + px(j, c));
        gates(i * m + j, c) = g;
        out(i, c) += g * nodes(j, c) * inv;
      }
  if (cache) *cache = {language, nodes, std::move(gates)};
  return out;
}

/// Accumulates into grad.w6; returns (d language, d nodes).
inline std::pair<Matrix, Matrix> cross_modal_attention_backward(const Matrix& dout, const CrossAttentionCache& c,
                                                                const CrossAttentionParams& p,
                                                                CrossAttentionParams& grad) {
  const std::size_t l = c.language.rows(), m = c.nodes.rows(), d = c.nodes.cols();
  const double inv = 1.0 / static_cast<double>(m);
  Matrix dpw(l, d), dpx(m, d), dnodes(m, d);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double g = c.gates(i * m + j, ch);
        const double dgx = dout(i, ch) * inv;
        dnodes(j, ch) += dgx * g;
        const double dz = dgx * c.nodes(j, ch) * g * (1.0 - g);
        dpw(i, ch) += dz;
        dpx(j, ch) += dz;
      }
  Matrix ga = matmul_tn(dpw, c.language), gb = matmul_tn(dpx, c.nodes);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t ch = 0; ch < d; ++ch) {
      grad.w6(r, ch) += ga(r, ch);
      grad.w6(r, d + ch) += gb(r, ch);
    }
  Matrix dlang = matmul(dpw, slice_cols(p.w6, 0, d));
  dnodes += matmul(dpx, slice_cols(p.w6, d, 2 * d));
  return {std::move(dlang), std::move(dnodes)};
}

// ---------------------------------------------------------------------------
// Losses

struct LossWeights {
  double vqa = 1.0, node = 1.0, edge = 1.0;
};

struct LossBundle {
  double vqa = 0, node = 0, edge = 0, total = 0;
};

/// Mean softmax cross-entropy over rows. Writes d loss / d logits to `grad`.
inline double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix* grad = nullptr) {
  if (labels.size() != logits.rows()) throw std::invalid_argument("cross entropy: label count does not match rows");
  if (grad) *grad = logits.zeros_like();
  if (logits.rows() == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(logits.rows());
  double total = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " + std::to_string(logits.cols()) + ")");
    auto z = logits.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    total += mx + std::log(s) - z[static_cast<std::size_t>(y)];
    if (grad)
      for (std::size_t c = 0; c < z.size(); ++c)
        (*grad)(i, c) = (std::exp(z[c] - mx) / s - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv;
  }
  return total * inv;
}

/// Mean logistic binary cross-entropy over edges (i, j), i != j, and all
/// predicate columns. Rows are i*m + j; diagonal rows get zero gradient.
inline double edge_binary_cross_entropy(const Matrix& logits, const Matrix& labels, std::size_t m,
                                        Matrix* grad = nullptr) {
  logits.check_same(labels, "edge loss");
  if (logits.rows() != m * m) throw std::invalid_argument("edge loss: expected m*m rows");
  if (grad) *grad = logits.zeros_like();
  const std::size_t entries = m * (m - (m ? 1 : 0)) * logits.cols();
  if (entries == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(entries);
  double total = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const std::size_t r = i * m + j;
      for (std::size_t c = 0; c < logits.cols(); ++c) {
        const double z = logits(r, c), y = labels(r, c);
        if (y != 0.0 && y != 1.0) throw std::out_of_range("edge label must be 0 or 1");
        total += softplus(z) - y * z;
        if (grad) (*grad)(r, c) = (sigmoid(z) - y) * inv;
      }
    }
  return total * inv;
}

struct LossGradients {
  Matrix answer, node, edge;
};

inline LossBundle losses(const Matrix& answer_logits, const std::vector<int>& answer_labels, const Matrix& node_logits,
                         const std::vector<int>& node_labels, const Matrix& edge_logits, const Matrix& edge_labels,
                         std::size_t m, const LossWeights& w = {}, LossGradients* grads = nullptr) {
  LossBundle b;
  b.vqa = softmax_cross_entropy(answer_logits, answer_labels, grads ? &grads->answer : nullptr);
  b.node = softmax_cross_entropy(node_logits, node_labels, grads ? &grads->node : nullptr);
  b.edge = edge_binary_cross_entropy(edge_logits, edge_labels, m, grads ? &grads->edge : nullptr);
  b.total = w.vqa * b.vqa + w.node * b.node + w.edge * b.edge;
  if (grads) {
    grads->answer *= w.vqa;
    grads->node *= w.node;
    grads->edge *= w.edge;
  }
  return b;
}

}  // namespace sgqa::kernels
