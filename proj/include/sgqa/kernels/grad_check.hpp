#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgqa/kernels/model.hpp"

namespace sgqa::kernels {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  KernelDims dims;
  double h = 1e-5;
  double tol = 1e-4;
  double floor = 1e-5;  // denominator floor of the relative error
  std::string corrupt;  // variable whose analytic gradient is scaled, empty for none
  double corrupt_factor = 1.1;
  int max_resamples = 100;
};

struct GradCheckReport {
  std::string op;
  bool passed = false;
  double max_rel_error = 0;
  std::string worst_variable;
  std::size_t worst_index = 0;
  double worst_analytic = 0, worst_numeric = 0;
  std::size_t checked = 0;
  int resamples = 0;
  double seconds = 0;

  nlohmann::json to_json() const {
    return {{"op", op},
            {"passed", passed},
            {"max_rel_error", max_rel_error},
            {"worst", {{"variable", worst_variable}, {"index", worst_index}, {"analytic", worst_analytic}, {"numeric", worst_numeric}}},
            {"checked", checked},
            {"resamples", resamples},
            {"seconds", seconds}};
  }
};

/// A scalar objective over named matrices with its analytic gradient.
struct GradProblem {
  std::vector<std::string> names;
  std::vector<Matrix*> vars;
  std::function<double(KinkMonitor*)> value;
  std::function<std::vector<Matrix>()> gradient;
  std::shared_ptr<void> storage;
};

namespace detail {

inline double inner(const Matrix& a, const Matrix& b) {
  a.check_same(b, "inner");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

template <class State>
GradProblem make_problem(std::shared_ptr<State> s) {
  GradProblem p;
  p.storage = s;
  return p;
}

inline GradProblem positional_problem(const GradCheckOptions& o, Rng& rng, Activation act) {
  struct S {
    PositionalEncoderParams p;
    Matrix boxes, probe;
    Activation act;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto in = SceneInputs::random(k, rng);
  auto s = std::make_shared<S>(S{params.pos, in.boxes, Matrix::random(k.objects, k.width, rng, 1.0), act});
  GradProblem g = make_problem(s);
  g.names = {"pos.w1", "pos.b1", "pos.w2", "pos.b2"};
  g.vars = {&s->p.w1, &s->p.b1, &s->p.w2, &s->p.b2};
  g.value = [s](KinkMonitor* mon) { return inner(s->probe, positional_encoding(s->boxes, s->p, s->act, nullptr, mon)); };
  g.gradient = [s]() {
    PositionalCache c;
    positional_encoding(s->boxes, s->p, s->act, &c);
    PositionalEncoderParams gr{s->p.w1.zeros_like(), s->p.b1.zeros_like(), s->p.w2.zeros_like(), s->p.b2.zeros_like()};
    positional_encoding_backward(s->probe, c, s->p, s->act, gr);
    return std::vector<Matrix>{gr.w1, gr.b1, gr.w2, gr.b2};
  };
  return g;
}

inline GradProblem merge_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    MergeParams p;
    Matrix x_pc, x_pos, probe;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto s = std::make_shared<S>(S{params.merge, Matrix::random(k.objects, k.width, rng, 1.0),
                                 Matrix::random(k.objects, k.width, rng, 1.0), Matrix::random(k.objects, k.width, rng, 1.0)});
  GradProblem g = make_problem(s);
  g.names = {"merge.w1", "merge.w2", "merge.ln1.gain", "merge.ln1.shift", "merge.ln2.gain", "merge.ln2.shift", "x_pos"};
  g.vars = {&s->p.w1, &s->p.w2, &s->p.ln1.gain, &s->p.ln1.shift, &s->p.ln2.gain, &s->p.ln2.shift, &s->x_pos};
  g.value = [s](KinkMonitor*) { return inner(s->probe, merge_embedding(s->x_pc, s->x_pos, s->p)); };
  g.gradient = [s]() {
    MergeCache c;
    merge_embedding(s->x_pc, s->x_pos, s->p, &c);
    MergeParams gr{s->p.w1.zeros_like(), s->p.w2.zeros_like(),
                   {s->p.ln1.gain.zeros_like(), s->p.ln1.shift.zeros_like()},
                   {s->p.ln2.gain.zeros_like(), s->p.ln2.shift.zeros_like()}};
    Matrix dx_pos = merge_embedding_backward(s->probe, c, s->p, gr);
    return std::vector<Matrix>{gr.w1, gr.w2, gr.ln1.gain, gr.ln1.shift, gr.ln2.gain, gr.ln2.shift, dx_pos};
  };
  return g;
}

inline GradProblem transformer_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    KernelParams p;
    Matrix x, w, probe_x, probe_w;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto s = std::make_shared<S>(S{params, Matrix::random(k.objects, k.width, rng, 1.0), Matrix::random(k.tokens, k.width, rng, 1.0),
                                 Matrix::random(k.objects, k.width, rng, 1.0), Matrix::random(k.tokens, k.width, rng, 1.0)});
  GradProblem g = make_problem(s);
  s->p.for_each([&](const std::string& name, Matrix& m) {
    if (name.rfind("transformer.", 0) == 0) {
      g.names.push_back(name);
      g.vars.push_back(&m);
    }
  });
  g.names.push_back("x");
  g.vars.push_back(&s->x);
  g.names.push_back("w");
  g.vars.push_back(&s->w);
  g.value = [s](KinkMonitor* mon) {
    auto [xp, wp] = cross_modal_transformer(s->x, s->w, s->p.layers, s->p.heads, Activation::relu, nullptr, mon);
    return inner(s->probe_x, xp) + inner(s->probe_w, wp);
  };
  g.gradient = [s]() {
    TransformerStackCache c;
    cross_modal_transformer(s->x, s->w, s->p.layers, s->p.heads, Activation::relu, &c);
    KernelParams gr = s->p.zeros_like();
    auto [dx, dw] = cross_modal_transformer_backward(s->probe_x, s->probe_w, c, s->p.layers, s->p.heads,
                                                     Activation::relu, gr.layers);
    std::vector<Matrix> out;
    gr.for_each([&](const std::string& name, Matrix& m) {
      if (name.rfind("transformer.", 0) == 0) out.push_back(m);
    });
    out.push_back(dx);
    out.push_back(dw);
    return out;
  };
  return g;
}

inline GradProblem edge_to_node_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    TwinningParams p;
    Matrix x_v;
    EdgeTensor e;
    Matrix probe;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  Matrix x_v = Matrix::random(k.objects, k.width, rng, 1.0);
  auto in = SceneInputs::random(k, rng);
  auto s = std::make_shared<S>(S{params.twinning.at(0), x_v, init_edges(x_v, in.centers()),
                                 Matrix::random(k.objects, k.width, rng, 1.0)});
  GradProblem g = make_problem(s);
  g.names = {"twinning.0.w3", "twinning.0.w4", "x_v", "x_e"};
  g.vars = {&s->p.w3, &s->p.w4, &s->x_v, &s->e.features};
  g.value = [s](KinkMonitor* mon) {
    return inner(s->probe, edge_to_node(s->x_v, s->e, s->p, Activation::relu, nullptr, mon));
  };
  g.gradient = [s]() {
    EdgeToNodeCache c;
    edge_to_node(s->x_v, s->e, s->p, Activation::relu, &c);
    TwinningParams gr{s->p.w3.zeros_like(), s->p.w4.zeros_like(), s->p.w5.zeros_like()};
    auto [dx, de] = edge_to_node_backward(s->probe, c, s->p, Activation::relu, gr);
    return std::vector<Matrix>{gr.w3, gr.w4, dx, de.features};
  };
  return g;
}

inline GradProblem node_to_edge_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    TwinningParams p;
    Matrix x_v;
    EdgeTensor probe;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto s = std::make_shared<S>(S{params.twinning.at(0), Matrix::random(k.objects, k.width, rng, 1.0),
                                 {k.objects, Matrix::random(k.objects * k.objects, k.width, rng, 1.0)}});
  GradProblem g = make_problem(s);
  g.names = {"twinning.0.w5", "x_v"};
  g.vars = {&s->p.w5, &s->x_v};
  g.value = [s](KinkMonitor* mon) {
    return inner(s->probe.features, node_to_edge(s->x_v, s->p, Activation::relu, nullptr, mon).features);
  };
  g.gradient = [s]() {
    NodeToEdgeCache c;
    node_to_edge(s->x_v, s->p, Activation::relu, &c);
    TwinningParams gr{s->p.w3.zeros_like(), s->p.w4.zeros_like(), s->p.w5.zeros_like()};
    Matrix dx = node_to_edge_backward(s->probe, c, s->p, Activation::relu, gr);
    return std::vector<Matrix>{gr.w5, dx};
  };
  return g;
}

inline GradProblem cross_attention_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    CrossAttentionParams p;
    Matrix language, nodes, probe;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto s = std::make_shared<S>(S{params.cross, Matrix::random(k.tokens, k.width, rng, 1.0),
                                 Matrix::random(k.objects, k.width, rng, 1.0), Matrix::random(k.tokens, k.width, rng, 1.0)});
  GradProblem g = make_problem(s);
  g.names = {"cross.w6", "language", "nodes"};
  g.vars = {&s->p.w6, &s->language, &s->nodes};
  g.value = [s](KinkMonitor*) { return inner(s->probe, cross_modal_attention(s->language, s->nodes, s->p)); };
  g.gradient = [s]() {
    CrossAttentionCache c;
    cross_modal_attention(s->language, s->nodes, s->p, &c);
    CrossAttentionParams gr{s->p.w6.zeros_like()};
    auto [dl, dn] = cross_modal_attention_backward(s->probe, c, s->p, gr);
    return std::vector<Matrix>{gr.w6, dl, dn};
  };
  return g;
}

inline GradProblem losses_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    Matrix answer, node, edge;
    Targets t;
    std::size_t m;
  };
  const KernelDims& k = o.dims;
  auto t = Targets::random(k, rng);
  auto s = std::make_shared<S>(S{Matrix::random(1, k.answers, rng, 2.0), Matrix::random(k.objects, k.node_classes, rng, 2.0),
                                 Matrix::random(k.objects * k.objects, k.predicates, rng, 2.0), t, k.objects});
  GradProblem g = make_problem(s);
  g.names = {"answer_logits", "node_logits", "edge_logits"};
  g.vars = {&s->answer, &s->node, &s->edge};
  g.value = [s](KinkMonitor*) {
    return losses(s->answer, s->t.answer, s->node, s->t.node_labels, s->edge, s->t.edge_labels, s->m).total;
  };
  g.gradient = [s]() {
    LossGradients lg;
    losses(s->answer, s->t.answer, s->node, s->t.node_labels, s->edge, s->t.edge_labels, s->m, {}, &lg);
    return std::vector<Matrix>{lg.answer, lg.node, lg.edge};
  };
  return g;
}

inline GradProblem pipeline_problem(const GradCheckOptions& o, Rng& rng) {
  struct S {
    KernelParams p;
    SceneInputs in;
    Targets t;
  };
  const KernelDims& k = o.dims;
  auto params = KernelParams::random(k, rng);
  auto in = SceneInputs::random(k, rng);
  auto s = std::make_shared<S>(S{std::move(params), std::move(in), Targets::random(k, rng)});
  GradProblem g = make_problem(s);
  s->p.for_each([&](const std::string& name, Matrix& m) {
    g.names.push_back(name);
    g.vars.push_back(&m);
  });
  g.value = [s](KinkMonitor* mon) { return forward(s->p, s->in, s->t, {}, nullptr, mon).loss.total; };
  g.gradient = [s]() {
    PipelineCache c;
    ForwardResult r = forward(s->p, s->in, s->t, {}, &c);
    KernelParams gr = backward(s->p, r, c);
    std::vector<Matrix> out;
    gr.for_each([&](const std::string&, Matrix& m) { out.push_back(std::move(m)); });
    return out;
  };
  return g;
}

}  // namespace detail

inline const std::vector<std::string>& grad_check_ops() {
  static const std::vector<std::string> ops{"positional_linear", "positional_encoding", "merge_embedding",
                                            "transformer",       "edge_to_node",        "node_to_edge",
                                            "cross_modal_attention", "losses",          "pipeline"};
  return ops;
}

inline GradProblem make_grad_problem(const std::string& op, const GradCheckOptions& o, Rng& rng) {
  if (op == "positional_linear") return detail::positional_problem(o, rng, Activation::identity);
  if (op == "positional_encoding") return detail::positional_problem(o, rng, Activation::relu);
  if (op == "merge_embedding") return detail::merge_problem(o, rng);
  if (op == "transformer") return detail::transformer_problem(o, rng);
  if (op == "edge_to_node") return detail::edge_to_node_problem(o, rng);
  if (op == "node_to_edge") return detail::node_to_edge_problem(o, rng);
  if (op == "cross_modal_attention") return detail::cross_attention_problem(o, rng);
  if (op == "losses") return detail::losses_problem(o, rng);
  if (op == "pipeline") return detail::pipeline_problem(o, rng);
  throw std::invalid_argument("grad_check: unknown op '" + op + "'");
}

/// Central differences against the analytic gradient for every entry of every
/// variable. Points whose ReLU inputs come within 10h of the kink are redrawn.
inline GradCheckReport grad_check(const std::string& op, const GradCheckOptions& o) {
  o.dims.validate();
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport rep;
  rep.op = op;
  Rng rng = Rng::stream(o.seed, "grad_check/" + op);
  GradProblem prob;
  for (;;) {
    prob = make_grad_problem(op, o, rng);
    KinkMonitor mon;
    prob.value(&mon);
    if (mon.min_abs > 10 * o.h) break;
    if (++rep.resamples > o.max_resamples)
      throw std::runtime_error("grad_check: no kink-free point after " + std::to_string(o.max_resamples) + " draws");
  }

  std::vector<Matrix> analytic = prob.gradient();
  bool corrupted = o.corrupt.empty();
  for (std::size_t v = 0; v < prob.vars.size(); ++v)
    if (prob.names[v] == o.corrupt) {
      analytic[v] *= o.corrupt_factor;
      corrupted = true;
    }
  if (!corrupted) throw std::invalid_argument("grad_check: no variable named '" + o.corrupt + "' in op " + op);

  for (std::size_t v = 0; v < prob.vars.size(); ++v) {
    std::vector<double>& data = prob.vars[v]->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + o.h;
      const double up = prob.value(nullptr);
      data[i] = saved - o.h;
      const double down = prob.value(nullptr);
      data[i] = saved;
      const double numeric = (up - down) / (2 * o.h);
      const double a = analytic[v].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), o.floor});
      ++rep.checked;
      if (rel > rep.max_rel_error || !std::isfinite(rel)) {
        rep.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        rep.worst_variable = prob.names[v];
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.passed = rep.max_rel_error < o.tol;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace sgqa::kernels
