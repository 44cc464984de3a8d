#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace vsrpp::oracle {

Tensord conv2d(const Tensord& x, const Tensord& w, const Tensord* b, Index stride, Index pad) {
  const Index n_ = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const Index ho = (h + 2 * pad - kh) / stride + 1;
  const Index wo = (wd + 2 * pad - kw) / stride + 1;
  Tensord out = Tensord::Zeros({n_, co, ho, wo});
  for (Index n = 0; n < n_; ++n)
    for (Index o = 0; o < co; ++o)
      for (Index y = 0; y < ho; ++y)
        for (Index xx = 0; xx < wo; ++xx) {
          double acc = b ? (*b)[o] : 0.0;
          for (Index c = 0; c < ci; ++c)
            for (Index ky = 0; ky < kh; ++ky)
              for (Index kx = 0; kx < kw; ++kx) {
                const Index iy = y * stride - pad + ky;
                const Index ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += w(o, c, ky, kx) * x(n, c, iy, ix);
              }
          out(n, o, y, xx) = acc;
        }
  return out;
}

double bilinear_at(const Tensord& x, Index n, Index c, double py, double px) {
  const double fy = std::floor(py), fx = std::floor(px);
  const double ay = py - fy, ax = px - fx;
  const Index y0 = static_cast<Index>(fy), x0 = static_cast<Index>(fx);
  auto at = [&](Index yy, Index xx) {
    if (yy < 0 || yy >= x.dim(2) || xx < 0 || xx >= x.dim(3)) return 0.0;
    return x(n, c, yy, xx);
  };
  return (1 - ay) * (1 - ax) * at(y0, x0) + (1 - ay) * ax * at(y0, x0 + 1) + ay * (1 - ax) * at(y0 + 1, x0) +
         ay * ax * at(y0 + 1, x0 + 1);
}

Tensord bilinear_sample(const Tensord& x, const Tensord& coords) {
  const Index ho = coords.dim(2), wo = coords.dim(3);
  Tensord out = Tensord::Zeros({x.dim(0), x.dim(1), ho, wo});
  for (Index n = 0; n < x.dim(0); ++n)
    for (Index c = 0; c < x.dim(1); ++c)
      for (Index y = 0; y < ho; ++y)
        for (Index xx = 0; xx < wo; ++xx)
          out(n, c, y, xx) = bilinear_at(x, n, c, coords(n, 1, y, xx), coords(n, 0, y, xx));
  return out;
}

Tensord warp(const Tensord& x, const Tensord& flow) {
  Tensord out = Tensord::Zeros(x.shape());
  for (Index n = 0; n < x.dim(0); ++n)
    for (Index c = 0; c < x.dim(1); ++c)
      for (Index y = 0; y < x.dim(2); ++y)
        for (Index xx = 0; xx < x.dim(3); ++xx)
          out(n, c, y, xx) = bilinear_at(x, n, c, y + flow(n, 1, y, xx), xx + flow(n, 0, y, xx));
  return out;
}

Tensord deform_conv2d(const Tensord& x, const Tensord& w, const Tensord* b, const Tensord& offsets,
                      const Tensord& masks, Index groups, Index stride, Index pad) {
  const Index ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index co = w.dim(0), kh = w.dim(2), kw = w.dim(3), taps = kh * kw;
  const Index ho = (h + 2 * pad - kh) / stride + 1;
  const Index wo = (wd + 2 * pad - kw) / stride + 1;
  const Index per_group = ci / groups;
  Tensord out = Tensord::Zeros({x.dim(0), co, ho, wo});
  for (Index n = 0; n < x.dim(0); ++n)
    for (Index o = 0; o < co; ++o)
      for (Index y = 0; y < ho; ++y)
        for (Index xx = 0; xx < wo; ++xx) {
          double acc = b ? (*b)[o] : 0.0;
          for (Index c = 0; c < ci; ++c) {
            const Index g = c / per_group;
            for (Index ky = 0; ky < kh; ++ky)
              for (Index kx = 0; kx < kw; ++kx) {
                const Index k = ky * kw + kx;
                const double py = double(y * stride - pad + ky) + offsets(n, (g * taps + k) * 2, y, xx);
                const double px = double(xx * stride - pad + kx) + offsets(n, (g * taps + k) * 2 + 1, y, xx);
                acc += w(o, c, ky, kx) * masks(n, g * taps + k, y, xx) * bilinear_at(x, n, c, py, px);
              }
          }
          out(n, o, y, xx) = acc;
        }
  return out;
}

Tensord pixel_shuffle(const Tensord& x, Index r) {
  const Index co = x.dim(1) / (r * r);
  Tensord out = Tensord::Zeros({x.dim(0), co, x.dim(2) * r, x.dim(3) * r});
  for (Index n = 0; n < x.dim(0); ++n)
    for (Index c = 0; c < co; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j)
          for (Index y = 0; y < x.dim(2); ++y)
            for (Index xx = 0; xx < x.dim(3); ++xx)
              out(n, c, y * r + i, xx * r + j) = x(n, c * r * r + i * r + j, y, xx);
  return out;
}

Tensord concat(const std::vector<Tensord>& parts) {
  Index channels = 0;
  for (const auto& p : parts) channels += p.dim(1);
  const Tensord& first = parts.front();
  Tensord out = Tensord::Zeros({first.dim(0), channels, first.dim(2), first.dim(3)});
  for (Index n = 0; n < first.dim(0); ++n) {
    Index base = 0;
    for (const auto& p : parts) {
      for (Index c = 0; c < p.dim(1); ++c)
        for (Index y = 0; y < p.dim(2); ++y)
          for (Index x = 0; x < p.dim(3); ++x) out(n, base + c, y, x) = p(n, c, y, x);
      base += p.dim(1);
    }
  }
  return out;
}

Tensord leaky_relu(const Tensord& x, double slope) {
  Tensord out = x;
  for (Index i = 0; i < out.size(); ++i)
    if (out[i] < 0) out[i] *= slope;
  return out;
}

Tensord align(const ParameterStore<double>& params, const std::string& prefix, const AlignmentSpec& spec,
              const Tensord& anchor, const std::vector<Tensord>& prev, const std::vector<Tensord>& flows,
              Tensord* offsets_out, Tensord* masks_out, Tensord* raw_out) {
  auto conv = [&](const std::string& name, const Tensord& x) {
    return conv2d(x, params.at(name + ".weight"), &params.at(name + ".bias"), 1, 1);
  };
  std::vector<Tensord> est{anchor};
  for (size_t p = 0; p < prev.size(); ++p) est.push_back(warp(prev[p], flows[p]));
  for (const auto& f : flows) est.push_back(f);
  Tensord h = leaky_relu(conv(prefix + ".conv0", concat(est)));
  h = leaky_relu(conv(prefix + ".conv1", h));
  h = leaky_relu(conv(prefix + ".conv2", h));
  const Tensord raw_o = conv(prefix + ".offset", h);
  const Tensord raw_m = conv(prefix + ".mask", h);

  const Index groups = spec.groups, taps = AlignmentSpec::kTaps;
  const Index per_neighbour = groups / static_cast<Index>(prev.size());
  Tensord offsets = Tensord::Zeros(raw_o.shape());
  Tensord masks = Tensord::Zeros(raw_m.shape());
  for (Index n = 0; n < anchor.dim(0); ++n)
    for (Index g = 0; g < groups; ++g) {
      const Tensord& flow = flows[static_cast<size_t>(g / per_neighbour)];
      for (Index k = 0; k < taps; ++k)
        for (Index y = 0; y < anchor.dim(2); ++y)
          for (Index x = 0; x < anchor.dim(3); ++x) {
            for (Index coord = 0; coord < 2; ++coord) {
              const Index ch = (g * taps + k) * 2 + coord;
              offsets(n, ch, y, x) = raw_o(n, ch, y, x) + flow(n, coord == 0 ? 1 : 0, y, x);
            }
            const double logit = raw_m(n, g * taps + k, y, x);
            masks(n, g * taps + k, y, x) = 1.0 / (1.0 + std::exp(-logit));
          }
    }
  if (offsets_out) *offsets_out = offsets;
  if (masks_out) *masks_out = masks;
  if (raw_out) *raw_out = raw_o;
  return deform_conv2d(concat(prev), params.at(prefix + ".dcn.weight"), &params.at(prefix + ".dcn.bias"), offsets,
                       masks, groups, 1, 1);
}

double max_rel_error(const Tensord& a, const Tensord& b, double floor) {
  if (a.shape() != b.shape()) return INFINITY;
  double diff = 0, scale = 0;
  for (Index i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, floor);
}

double GradCheck::worst() const {
  double m = 0;
  for (double e : rel_error) m = std::max(m, e);
  return m;
}

namespace {

double projected(const DoubleOp& op, const std::vector<Tensord>& inputs, const Tensord& r) {
  std::vector<Vard> vars;
  for (const auto& t : inputs) vars.push_back(Vard::constant(t));
  const Tensord out = op(vars).value();
  double acc = 0;
  for (Index i = 0; i < out.size(); ++i) acc += out[i] * r[i];
  return acc;
}

}  // namespace

GradCheck check_gradients(const DoubleOp& op, const std::vector<Tensord>& inputs, std::uint64_t seed, double h,
                          Index probe) {
  std::mt19937_64 rng(seed);
  Graph<double> graph;
  std::vector<Vard> vars;
  for (size_t i = 0; i < inputs.size(); ++i) vars.push_back(graph.parameter("in" + std::to_string(i), inputs[i]));
  const Vard out = op(vars);
  const Tensord r = Tensord::Uniform(out.shape(), rng, -1.0, 1.0);
  const Vard loss = sum(out * Vard::constant(r));
  const auto grads = graph.backward(loss);

  GradCheck result;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto it = grads.find("in" + std::to_string(i));
    const Tensord analytic = it != grads.end() ? it->second : Tensord::Zeros(inputs[i].shape());
    std::vector<Index> entries(static_cast<size_t>(inputs[i].size()));
    for (Index k = 0; k < inputs[i].size(); ++k) entries[static_cast<size_t>(k)] = k;
    if (probe > 0 && probe < inputs[i].size()) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<size_t>(probe));
    }
    double diff = 0, scale = 0;
    std::vector<Tensord> moved = inputs;
    for (Index k : entries) {
      const double v = inputs[i][k];
      moved[i][k] = v + h;
      const double up = projected(op, moved, r);
      moved[i][k] = v - h;
      const double down = projected(op, moved, r);
      moved[i][k] = v;
      const double numeric = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(numeric - analytic[k]));
      scale = std::max(scale, std::abs(numeric));
    }
    result.rel_error.push_back(diff / std::max(scale, 1e-10));
  }
  return result;
}

std::map<std::string, double> check_store_gradients(const StoreOp& build, const ParameterStore<double>& store,
                                                    std::uint64_t seed, double h, Index probe) {
  std::mt19937_64 rng(seed);
  Graph<double> graph;
  ParamBinder<double> binder(store, &graph);
  const Vard out = build(binder);
  const Tensord r = Tensord::Uniform(out.shape(), rng, -1.0, 1.0);
  const auto grads = graph.backward(sum(out * Vard::constant(r)));

  ParameterStore<double> moved = store;
  auto projected = [&]() {
    ParamBinder<double> constants(moved);
    const Tensord o = build(constants).value();
    double acc = 0;
    for (Index i = 0; i < o.size(); ++i) acc += o[i] * r[i];
    return acc;
  };

  std::map<std::string, double> errors;
  for (const auto& entry : store) {
    const auto it = grads.find(entry.name);
    if (it == grads.end()) continue;
    std::vector<Index> entries(static_cast<size_t>(entry.value.size()));
    for (Index k = 0; k < entry.value.size(); ++k) entries[static_cast<size_t>(k)] = k;
    if (probe > 0 && probe < entry.value.size()) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<size_t>(probe));
    }
    Tensord& slot = moved.at(entry.name);
    double diff = 0, scale = 0;
    for (Index k : entries) {
      const double v = entry.value[k];
      slot[k] = v + h;
      const double up = projected();
      slot[k] = v - h;
      const double down = projected();
      slot[k] = v;
      const double numeric = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(numeric - it->second[k]));
      scale = std::max(scale, std::abs(numeric));
    }
    errors[entry.name] = diff / std::max(scale, 1e-10);
  }
  return errors;
}

Tensord non_integer_uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi, double margin) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensord t = Tensord::Zeros(shape);
  for (Index i = 0; i < t.size(); ++i) {
    double v;
    do {
      v = dist(rng);
    } while (std::abs(v - std::round(v)) < margin);
    t[i] = v;
  }
  return t;
}

Tensord away_from_zero(const Shape& shape, std::mt19937_64& rng, double scale, double margin) {
  std::uniform_real_distribution<double> dist(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensord t = Tensord::Zeros(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = (sign(rng) ? 1 : -1) * scale * dist(rng);
  return t;
}

}  // namespace vsrpp::oracle
