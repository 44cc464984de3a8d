#include "vsrpp/autograd.hpp"

#include <cmath>
#include <initializer_list>

namespace vsrpp {

template <typename Scalar>
void Node<Scalar>::accumulate(const Tensor<Scalar>& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad.array() += g.array();
  }
}

template <typename Scalar>
void Node<Scalar>::accumulate(Tensor<Scalar>&& g) {
  if (grad.empty()) {
    grad = std::move(g);
  } else {
    grad.array() += g.array();
  }
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::parameter(std::string name, Tensor<Scalar> value, bool trainable) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->name = std::move(name);
  n->requires_grad = trainable;
  if (!trainable) return Var<Scalar>(std::move(n));
  leaves_.push_back(n);
  return Var<Scalar>(std::move(n), this);
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Tensor<Scalar> value, bool requires_grad,
                                  std::function<void(const Tensor<Scalar>&)> backward) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  if (!requires_grad) return Var<Scalar>(std::move(n));
  n->requires_grad = true;
  n->backward = std::move(backward);
  tape_.push_back(n);
  return Var<Scalar>(std::move(n), this);
}

template <typename Scalar>
GradientMap<Scalar> Graph<Scalar>::backward(const Var<Scalar>& loss) {
  if (!loss || loss.value().size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     (loss ? shape_string(loss.shape()) : std::string("(empty)")));
  }
  if (loss.requires_grad()) {
    loss.node()->grad = Tensor<Scalar>(loss.shape(), Scalar(1));
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<Scalar>& node = **it;
      if (node.grad.empty() || !node.backward) continue;
      node.backward(node.grad);
      node.grad = Tensor<Scalar>();
    }
  }
  GradientMap<Scalar> grads;
  for (const auto& leaf : leaves_) {
    Tensor<Scalar> g = leaf->grad.empty() ? Tensor<Scalar>(leaf->value.shape()) : std::move(leaf->grad);
    auto [it, inserted] = grads.emplace(leaf->name, std::move(g));
    if (!inserted) throw UsageError("parameter '" + leaf->name + "' bound twice in one graph");
  }
  reset();
  return grads;
}

template <typename Scalar>
void Graph<Scalar>::reset() {
  for (auto& n : tape_) n->backward = nullptr;
  tape_.clear();
  for (auto& n : leaves_) n->grad = Tensor<Scalar>();
  leaves_.clear();
}

namespace {

template <typename Scalar>
Graph<Scalar>* graph_of(std::initializer_list<const Var<Scalar>*> vars) {
  for (const Var<Scalar>* v : vars) {
    if (v && *v && v->requires_grad()) return v->graph();
  }
  return nullptr;
}

template <typename Scalar>
Var<Scalar> make_result(Graph<Scalar>* graph, Tensor<Scalar> value,
                        std::function<void(const Tensor<Scalar>&)> backward) {
  if (!graph) return Var<Scalar>::constant(std::move(value));
  return graph->record(std::move(value), true, std::move(backward));
}

template <typename Scalar>
bool needs(const Var<Scalar>& v) {
  return v && v.requires_grad();
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias, const ConvSpec& spec) {
  Tensor<Scalar> out = conv2d(x.value(), weight.value(), bias ? &bias.value() : nullptr, spec);
  auto* g = graph_of<Scalar>({&x, &weight, &bias});
  return make_result<Scalar>(g, std::move(out), [xn = x.node(), wn = weight.node(), bn = bias.node(), spec](
                                                      const Tensor<Scalar>& go) {
    GradRequest want{xn->requires_grad, wn->requires_grad, bn && bn->requires_grad, false, false};
    auto grads = conv2d_backward(xn->value, wn->value, go, spec, want);
    if (want.input) xn->accumulate(std::move(grads.input));
    if (want.weight) wn->accumulate(std::move(grads.weight));
    if (want.bias) bn->accumulate(std::move(grads.bias));
  });
}

template <typename Scalar>
Var<Scalar> deform_conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                          const Var<Scalar>& offsets, const Var<Scalar>& masks, Index groups,
                          const ConvSpec& spec) {
  Tensor<Scalar> out =
      deform_conv2d(x.value(), weight.value(), bias ? &bias.value() : nullptr, offsets.value(), masks.value(),
                    groups, spec);
  auto* g = graph_of<Scalar>({&x, &weight, &bias, &offsets, &masks});
  return make_result<Scalar>(
      g, std::move(out),
      [xn = x.node(), wn = weight.node(), bn = bias.node(), on = offsets.node(), mn = masks.node(), groups,
       spec](const Tensor<Scalar>& go) {
        GradRequest want{xn->requires_grad, wn->requires_grad, bn && bn->requires_grad, on->requires_grad,
                         mn->requires_grad};
        auto grads = deform_conv2d_backward(xn->value, wn->value, on->value, mn->value, groups, go, spec, want);
        if (want.input) xn->accumulate(std::move(grads.input));
        if (want.weight) wn->accumulate(std::move(grads.weight));
        if (want.bias) bn->accumulate(std::move(grads.bias));
        if (want.offsets) on->accumulate(std::move(grads.offsets));
        if (want.masks) mn->accumulate(std::move(grads.masks));
      });
}

template <typename Scalar>
Var<Scalar> warp(const Var<Scalar>& feature, const Var<Scalar>& flow) {
  Tensor<Scalar> out = warp(feature.value(), flow.value());
  auto* g = graph_of<Scalar>({&feature, &flow});
  return make_result<Scalar>(g, std::move(out), [fn = feature.node(), sn = flow.node()](const Tensor<Scalar>& go) {
    GradRequest want;
    want.input = fn->requires_grad;
    want.offsets = sn->requires_grad;
    auto grads = warp_backward(fn->value, sn->value, go, want);
    if (want.input) fn->accumulate(std::move(grads.input));
    if (want.offsets) sn->accumulate(std::move(grads.coords));
  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope) {
  Tensor<Scalar> out = leaky_relu(x.value(), slope);
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node(), slope](const Tensor<Scalar>& go) {
    Tensor<Scalar> gi = go;
    gi.array() = (xn->value.array() >= Scalar(0)).select(go.array(), go.array() * slope);
    xn->accumulate(std::move(gi));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out = x.value();
  out.array() = out.array().max(Scalar(0));
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node()](const Tensor<Scalar>& go) {
    Tensor<Scalar> gi = go;
    gi.array() = (xn->value.array() > Scalar(0)).select(go.array(), Scalar(0));
    xn->accumulate(std::move(gi));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  Tensor<Scalar> out = sigmoid(x.value());
  auto* g = graph_of<Scalar>({&x});
  if (!g) return Var<Scalar>::constant(std::move(out));
  Tensor<Scalar> saved = out;
  return make_result<Scalar>(g, std::move(out), [xn = x.node(), s = std::move(saved)](const Tensor<Scalar>& go) {
    Tensor<Scalar> gi = go;
    gi.array() *= s.array() * (Scalar(1) - s.array());
    xn->accumulate(std::move(gi));
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<Scalar> out = a.value();
  out.array() += b.value().array();
  return make_result<Scalar>(graph_of<Scalar>({&a, &b}), std::move(out),
                             [an = a.node(), bn = b.node()](const Tensor<Scalar>& go) {
                               if (an->requires_grad) an->accumulate(go);
                               if (bn->requires_grad) bn->accumulate(go);
                             });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<Scalar> out = a.value();
  out.array() -= b.value().array();
  return make_result<Scalar>(graph_of<Scalar>({&a, &b}), std::move(out),
                             [an = a.node(), bn = b.node()](const Tensor<Scalar>& go) {
                               if (an->requires_grad) an->accumulate(go);
                               if (bn->requires_grad) {
                                 Tensor<Scalar> neg = go;
                                 neg.array() = -neg.array();
                                 bn->accumulate(std::move(neg));
                               }
                             });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<Scalar> out = a.value();
  out.array() *= b.value().array();
  return make_result<Scalar>(graph_of<Scalar>({&a, &b}), std::move(out),
                             [an = a.node(), bn = b.node()](const Tensor<Scalar>& go) {
                               if (an->requires_grad) {
                                 Tensor<Scalar> ga = go;
                                 ga.array() *= bn->value.array();
                                 an->accumulate(std::move(ga));
                               }
                               if (bn->requires_grad) {
                                 Tensor<Scalar> gb = go;
                                 gb.array() *= an->value.array();
                                 bn->accumulate(std::move(gb));
                               }
                             });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar factor) {
  Tensor<Scalar> out = x.value();
  out.array() *= factor;
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node(), factor](const Tensor<Scalar>& go) {
    Tensor<Scalar> gi = go;
    gi.array() *= factor;
    xn->accumulate(std::move(gi));
  });
}

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts) {
  std::vector<const Tensor<Scalar>*> values;
  Graph<Scalar>* g = nullptr;
  for (const auto& p : parts) {
    values.push_back(&p.value());
    if (!g && p.requires_grad()) g = p.graph();
  }
  Tensor<Scalar> out = concat_channels<Scalar>(values);
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result<Scalar>(g, std::move(out), [nodes = std::move(nodes)](const Tensor<Scalar>& go) {
    Index begin = 0;
    for (const auto& n : nodes) {
      const Index count = n->value.channels();
      if (n->requires_grad) n->accumulate(slice_channels(go, begin, count));
      begin += count;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index begin, Index count) {
  Tensor<Scalar> out = slice_channels(x.value(), begin, count);
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out),
                             [xn = x.node(), begin, count](const Tensor<Scalar>& go) {
                               Tensor<Scalar> gi(xn->value.shape());
                               for (Index n = 0; n < gi.batch(); ++n) {
                                 std::copy(go.plane(n, 0), go.plane(n, 0) + count * gi.plane_size(),
                                           gi.plane(n, begin));
                               }
                               xn->accumulate(std::move(gi));
                             });
}

template <typename Scalar>
Var<Scalar> pixel_shuffle(const Var<Scalar>& x, Index factor) {
  Tensor<Scalar> out = pixel_shuffle(x.value(), factor);
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node(), factor](const Tensor<Scalar>& go) {
    xn->accumulate(pixel_unshuffle(go, factor));
  });
}

template <typename Scalar>
Var<Scalar> add_flow_to_offsets(const Var<Scalar>& residual, const std::vector<Var<Scalar>>& flows, Index taps) {
  std::vector<const Tensor<Scalar>*> values;
  Graph<Scalar>* g = residual.requires_grad() ? residual.graph() : nullptr;
  std::vector<std::shared_ptr<Node<Scalar>>> flow_nodes;
  for (const auto& f : flows) {
    values.push_back(&f.value());
    flow_nodes.push_back(f.node());
    if (!g && f.requires_grad()) g = f.graph();
  }
  Tensor<Scalar> out = add_flow_to_offsets<Scalar>(residual.value(), values, taps);
  return make_result<Scalar>(g, std::move(out),
                             [rn = residual.node(), fns = std::move(flow_nodes), taps](const Tensor<Scalar>& go) {
                               if (rn->requires_grad) rn->accumulate(go);
                               const Index shares = static_cast<Index>(fns.size());
                               for (Index p = 0; p < shares; ++p) {
                                 if (fns[static_cast<size_t>(p)]->requires_grad) {
                                   fns[static_cast<size_t>(p)]->accumulate(offsets_grad_to_flow(go, shares, p, taps));
                                 }
                               }
                             });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Tensor<Scalar> out(Shape{}, x.value().array().sum());
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node()](const Tensor<Scalar>& go) {
    xn->accumulate(Tensor<Scalar>(xn->value.shape(), go[0]));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  const Scalar count = static_cast<Scalar>(x.value().size());
  Tensor<Scalar> out(Shape{}, x.value().array().sum() / count);
  return make_result<Scalar>(graph_of<Scalar>({&x}), std::move(out), [xn = x.node(), count](const Tensor<Scalar>& go) {
    xn->accumulate(Tensor<Scalar>(xn->value.shape(), go[0] / count));
  });
}

template <typename Scalar>
Scalar charbonnier_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar eps) {
  require_same_shape(pred, target, "charbonnier");
  if (!(eps > 0)) throw UsageError("charbonnier: eps must be positive");
  const auto d = pred.array() - target.array();
  return (d.square() + eps * eps).sqrt().sum() / static_cast<Scalar>(pred.size());
}

template <typename Scalar>
Var<Scalar> charbonnier(const Var<Scalar>& pred, const Var<Scalar>& target, Scalar eps) {
  Tensor<Scalar> out(Shape{}, charbonnier_loss(pred.value(), target.value(), eps));
  return make_result<Scalar>(graph_of<Scalar>({&pred, &target}), std::move(out),
                             [pn = pred.node(), tn = target.node(), eps](const Tensor<Scalar>& go) {
                               const Scalar count = static_cast<Scalar>(pn->value.size());
                               Tensor<Scalar> gp(pn->value.shape());
                               const auto d = pn->value.array() - tn->value.array();
                               gp.array() = d / (d.square() + eps * eps).sqrt() * (go[0] / count);
                               if (tn->requires_grad) {
                                 Tensor<Scalar> gt = gp;
                                 gt.array() = -gt.array();
                                 tn->accumulate(std::move(gt));
                               }
                               if (pn->requires_grad) pn->accumulate(std::move(gp));
                             });
}

#define VSRPP_INSTANTIATE_AUTOGRAD(T)                                                                             \
  template struct Node<T>;                                                                                       \
  template class Graph<T>;                                                                                       \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvSpec&);                         \
  template Var<T> deform_conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, Index, \
                                const ConvSpec&);                                                                \
  template Var<T> warp(const Var<T>&, const Var<T>&);                                                            \
  template Var<T> leaky_relu(const Var<T>&, T);                                                                  \
  template Var<T> relu(const Var<T>&);                                                                           \
  template Var<T> sigmoid(const Var<T>&);                                                                        \
  template Var<T> operator+(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> operator-(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> operator*(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> scale(const Var<T>&, T);                                                                       \
  template Var<T> concat(const std::vector<Var<T>>&);                                                            \
  template Var<T> slice(const Var<T>&, Index, Index);                                                            \
  template Var<T> pixel_shuffle(const Var<T>&, Index);                                                           \
  template Var<T> add_flow_to_offsets(const Var<T>&, const std::vector<Var<T>>&, Index);                         \
  template Var<T> sum(const Var<T>&);                                                                            \
  template Var<T> mean(const Var<T>&);                                                                           \
  template Var<T> charbonnier(const Var<T>&, const Var<T>&, T);                                                  \
  template T charbonnier_loss(const Tensor<T>&, const Tensor<T>&, T);

VSRPP_INSTANTIATE_AUTOGRAD(float)
VSRPP_INSTANTIATE_AUTOGRAD(double)

}  // namespace vsrpp
