#include "vsrpp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace vsrpp {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

std::string dims(const char* what, Index got, Index expected) {
  return std::string(what) + " is " + std::to_string(got) + ", expected " + std::to_string(expected);
}

template <typename Scalar>
void check_conv_args(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const ConvSpec& spec,
                     const char* op) {
  require_nchw(input, op);
  if (input.channels() != spec.in_channels) {
    throw DimensionError(std::string(op) + ": input channel count " +
                         dims("", input.channels(), spec.in_channels));
  }
  if (weight.shape() != spec.weight_shape()) {
    throw DimensionError(std::string(op) + ": weight shape " + shape_string(weight.shape()) + " expected " +
                         shape_string(spec.weight_shape()));
  }
  if (spec.stride < 1 || spec.padding < 0) throw DimensionError(std::string(op) + ": invalid stride/padding");
  if (spec.out_height(input.height()) < 1 || spec.out_width(input.width()) < 1) {
    throw DimensionError(std::string(op) + ": kernel larger than padded input " + shape_string(input.shape()));
  }
}

// Rows are (channel, ky, kx); columns are output pixels.
template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index h, Index w, const ConvSpec& s, Index oh, Index ow,
            RowMatrix<Scalar>& col) {
  col.resize(channels * s.taps(), oh * ow);
  for (Index c = 0; c < channels; ++c) {
    const Scalar* src = image + c * h * w;
    for (Index ky = 0; ky < s.kernel_h; ++ky) {
      for (Index kx = 0; kx < s.kernel_w; ++kx) {
        Scalar* dst = col.data() + ((c * s.kernel_h + ky) * s.kernel_w + kx) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * s.stride - s.padding + ky;
          Scalar* row = dst + y * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, Scalar(0));
            continue;
          }
          const Scalar* srow = src + iy * w;
          if (s.stride == 1) {
            const Index shift = kx - s.padding;
            const Index lo = std::clamp<Index>(-shift, 0, ow);
            const Index hi = std::clamp<Index>(w - shift, lo, ow);
            std::fill(row, row + lo, Scalar(0));
            std::copy(srow + lo + shift, srow + hi + shift, row + lo);
            std::fill(row + hi, row + ow, Scalar(0));
          } else {
            for (Index x = 0; x < ow; ++x) {
              const Index ix = x * s.stride - s.padding + kx;
              row[x] = (ix >= 0 && ix < w) ? srow[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& col, Index channels, Index h, Index w, const ConvSpec& s, Index oh,
            Index ow, Scalar* image) {
  for (Index c = 0; c < channels; ++c) {
    Scalar* dst = image + c * h * w;
    for (Index ky = 0; ky < s.kernel_h; ++ky) {
      for (Index kx = 0; kx < s.kernel_w; ++kx) {
        const Scalar* src = col.data() + ((c * s.kernel_h + ky) * s.kernel_w + kx) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * s.stride - s.padding + ky;
          if (iy < 0 || iy >= h) continue;
          const Scalar* row = src + y * ow;
          Scalar* drow = dst + iy * w;
          for (Index x = 0; x < ow; ++x) {
            const Index ix = x * s.stride - s.padding + kx;
            if (ix >= 0 && ix < w) drow[ix] += row[x];
          }
        }
      }
    }
  }
}

// Four-neighbour bilinear footprint of one sample position; corners outside
// the image are flagged invalid and read as zero.
template <typename Scalar>
struct Footprint {
  Index idx[4];
  bool valid[4];
  Scalar lx, ly;

  Footprint(Scalar y, Scalar x, Index h, Index w) {
    const Scalar fy = std::floor(y);
    const Scalar fx = std::floor(x);
    ly = y - fy;
    lx = x - fx;
    // Far-away samples: clamp before the integer cast to stay well defined.
    const Index y0 = static_cast<Index>(std::clamp<Scalar>(fy, Scalar(-2), static_cast<Scalar>(h + 1)));
    const Index x0 = static_cast<Index>(std::clamp<Scalar>(fx, Scalar(-2), static_cast<Scalar>(w + 1)));
    const Index ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const Index xs[4] = {x0, x0 + 1, x0, x0 + 1};
    for (int i = 0; i < 4; ++i) {
      valid[i] = ys[i] >= 0 && ys[i] < h && xs[i] >= 0 && xs[i] < w;
      idx[i] = valid[i] ? ys[i] * w + xs[i] : 0;
    }
  }

  Scalar weight(int i) const {
    switch (i) {
      case 0: return (1 - ly) * (1 - lx);
      case 1: return (1 - ly) * lx;
      case 2: return ly * (1 - lx);
      default: return ly * lx;
    }
  }

  Scalar sample(const Scalar* plane) const {
    Scalar v = 0;
    for (int i = 0; i < 4; ++i) {
      if (valid[i]) v += weight(i) * plane[idx[i]];
    }
    return v;
  }

  Scalar corner(const Scalar* plane, int i) const { return valid[i] ? plane[idx[i]] : Scalar(0); }

  // d(sample)/dx and d(sample)/dy.
  Scalar dx(const Scalar* plane) const {
    return (1 - ly) * (corner(plane, 1) - corner(plane, 0)) + ly * (corner(plane, 3) - corner(plane, 2));
  }
  Scalar dy(const Scalar* plane) const {
    return (1 - lx) * (corner(plane, 2) - corner(plane, 0)) + lx * (corner(plane, 3) - corner(plane, 1));
  }

  void scatter(Scalar* plane, Scalar g) const {
    for (int i = 0; i < 4; ++i) {
      if (valid[i]) plane[idx[i]] += weight(i) * g;
    }
  }
};

template <typename Scalar>
void check_deform_args(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& offsets,
                       const Tensor<Scalar>& masks, Index groups, const ConvSpec& spec) {
  check_conv_args(input, weight, spec, "deform_conv2d");
  if (groups < 1 || input.channels() % groups != 0) {
    throw DimensionError("deform_conv2d: input channels " + std::to_string(input.channels()) +
                         " not divisible by deformable groups " + std::to_string(groups));
  }
  const Shape expect_off{input.batch(), groups * spec.taps() * 2, spec.out_height(input.height()),
                         spec.out_width(input.width())};
  const Shape expect_mask{input.batch(), groups * spec.taps(), expect_off[2], expect_off[3]};
  if (offsets.shape() != expect_off) {
    throw DimensionError("deform_conv2d: offsets shape " + shape_string(offsets.shape()) + " expected " +
                         shape_string(expect_off));
  }
  if (masks.shape() != expect_mask) {
    throw DimensionError("deform_conv2d: masks shape " + shape_string(masks.shape()) + " expected " +
                         shape_string(expect_mask));
  }
}

// Modulated deformable im2col for batch item n.
template <typename Scalar>
void deform_im2col(const Tensor<Scalar>& input, const Tensor<Scalar>& offsets, const Tensor<Scalar>& masks,
                   Index n, Index groups, const ConvSpec& s, Index oh, Index ow, RowMatrix<Scalar>& col) {
  const Index cin = input.channels(), h = input.height(), w = input.width();
  const Index taps = s.taps(), pixels = oh * ow, per_group = cin / groups;
  col.resize(cin * taps, pixels);
  for (Index g = 0; g < groups; ++g) {
    for (Index k = 0; k < taps; ++k) {
      const Index ky = k / s.kernel_w, kx = k % s.kernel_w;
      const Scalar* off_y = offsets.plane(n, (g * taps + k) * 2);
      const Scalar* off_x = offsets.plane(n, (g * taps + k) * 2 + 1);
      const Scalar* mask = masks.plane(n, g * taps + k);
      for (Index p = 0; p < pixels; ++p) {
        const Index y = p / ow, x = p % ow;
        const Footprint<Scalar> fp(static_cast<Scalar>(y * s.stride - s.padding + ky) + off_y[p],
                                   static_cast<Scalar>(x * s.stride - s.padding + kx) + off_x[p], h, w);
        const Scalar m = mask[p];
        for (Index c = g * per_group; c < (g + 1) * per_group; ++c) {
          col(c * taps + k, p) = m * fp.sample(input.plane(n, c));
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>* bias,
                      const ConvSpec& spec) {
  check_conv_args(input, weight, spec, "conv2d");
  if (bias && bias->shape() != Shape{spec.out_channels}) {
    throw DimensionError("conv2d: bias shape " + shape_string(bias->shape()));
  }
  const Index oh = spec.out_height(input.height()), ow = spec.out_width(input.width());
  Tensor<Scalar> out({input.batch(), spec.out_channels, oh, ow});
  const ConstRowMap<Scalar> wmat(weight.data(), spec.out_channels, spec.in_channels * spec.taps());
  const bool pointwise = spec.taps() == 1 && spec.stride == 1 && spec.padding == 0;
  RowMatrix<Scalar> col;
  for (Index n = 0; n < input.batch(); ++n) {
    auto om = out.item_matrix(n);
    if (pointwise) {
      om.noalias() = wmat * input.item_matrix(n);
    } else {
      im2col(input.plane(n, 0), input.channels(), input.height(), input.width(), spec, oh, ow, col);
      om.noalias() = wmat * col;
    }
    if (bias) om.colwise() += bias->array().matrix();
  }
  check_finite(out, "conv2d");
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                  const Tensor<Scalar>& grad_out, const ConvSpec& spec, GradRequest want) {
  check_conv_args(input, weight, spec, "conv2d_backward");
  const Index oh = spec.out_height(input.height()), ow = spec.out_width(input.width());
  if (grad_out.shape() != Shape{input.batch(), spec.out_channels, oh, ow}) {
    throw DimensionError("conv2d_backward: grad_out shape " + shape_string(grad_out.shape()));
  }
  ConvGrads<Scalar> g;
  const Index k = spec.in_channels * spec.taps();
  const ConstRowMap<Scalar> wmat(weight.data(), spec.out_channels, k);
  if (want.weight) g.weight = Tensor<Scalar>(weight.shape());
  if (want.bias && spec.has_bias) g.bias = Tensor<Scalar>({spec.out_channels});
  if (want.input) g.input = Tensor<Scalar>(input.shape());
  RowMap<Scalar> gw(want.weight ? g.weight.data() : nullptr, want.weight ? spec.out_channels : 0,
                    want.weight ? k : 0);
  RowMatrix<Scalar> col, gcol;
  const bool pointwise = spec.taps() == 1 && spec.stride == 1 && spec.padding == 0;
  for (Index n = 0; n < input.batch(); ++n) {
    const auto go = grad_out.item_matrix(n);
    if (want.bias && spec.has_bias) g.bias.array().matrix() += go.rowwise().sum();
    if (want.weight) {
      if (pointwise) {
        gw.noalias() += go * input.item_matrix(n).transpose();
      } else {
        im2col(input.plane(n, 0), input.channels(), input.height(), input.width(), spec, oh, ow, col);
        gw.noalias() += go * col.transpose();
      }
    }
    if (want.input) {
      if (pointwise) {
        g.input.item_matrix(n).noalias() = wmat.transpose() * go;
      } else {
        gcol.noalias() = wmat.transpose() * go;
        col2im(gcol, input.channels(), input.height(), input.width(), spec, oh, ow, g.input.plane(n, 0));
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> flow_to_coords(const Tensor<Scalar>& flow) {
  require_nchw(flow, "flow_to_coords");
  if (flow.channels() != 2) throw DimensionError("flow field must have 2 channels, got " + shape_string(flow.shape()));
  Tensor<Scalar> coords = flow;
  for (Index n = 0; n < flow.batch(); ++n) {
    Scalar* cx = coords.plane(n, 0);
    Scalar* cy = coords.plane(n, 1);
    for (Index y = 0; y < flow.height(); ++y) {
      for (Index x = 0; x < flow.width(); ++x) {
        cx[y * flow.width() + x] += static_cast<Scalar>(x);
        cy[y * flow.width() + x] += static_cast<Scalar>(y);
      }
    }
  }
  return coords;
}

template <typename Scalar>
Tensor<Scalar> bilinear_sample(const Tensor<Scalar>& input, const Tensor<Scalar>& coords) {
  require_nchw(input, "bilinear_sample");
  require_nchw(coords, "bilinear_sample");
  if (coords.channels() != 2 || coords.batch() != input.batch()) {
    throw DimensionError("bilinear_sample: coords shape " + shape_string(coords.shape()) +
                         " incompatible with input " + shape_string(input.shape()));
  }
  const Index h = input.height(), w = input.width(), pixels = coords.plane_size();
  Tensor<Scalar> out({input.batch(), input.channels(), coords.height(), coords.width()});
  for (Index n = 0; n < input.batch(); ++n) {
    const Scalar* cx = coords.plane(n, 0);
    const Scalar* cy = coords.plane(n, 1);
    for (Index p = 0; p < pixels; ++p) {
      const Footprint<Scalar> fp(cy[p], cx[p], h, w);
      for (Index c = 0; c < input.channels(); ++c) out.plane(n, c)[p] = fp.sample(input.plane(n, c));
    }
  }
  check_finite(out, "bilinear_sample");
  return out;
}

template <typename Scalar>
SampleGrads<Scalar> bilinear_sample_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& coords,
                                             const Tensor<Scalar>& grad_out, GradRequest want) {
  const Index h = input.height(), w = input.width(), pixels = coords.plane_size();
  SampleGrads<Scalar> g;
  if (want.input) g.input = Tensor<Scalar>(input.shape());
  if (want.offsets) g.coords = Tensor<Scalar>(coords.shape());
  for (Index n = 0; n < input.batch(); ++n) {
    const Scalar* cx = coords.plane(n, 0);
    const Scalar* cy = coords.plane(n, 1);
    for (Index p = 0; p < pixels; ++p) {
      const Footprint<Scalar> fp(cy[p], cx[p], h, w);
      Scalar gx = 0, gy = 0;
      for (Index c = 0; c < input.channels(); ++c) {
        const Scalar go = grad_out.plane(n, c)[p];
        if (want.input) fp.scatter(g.input.plane(n, c), go);
        if (want.offsets) {
          gx += go * fp.dx(input.plane(n, c));
          gy += go * fp.dy(input.plane(n, c));
        }
      }
      if (want.offsets) {
        g.coords.plane(n, 0)[p] = gx;
        g.coords.plane(n, 1)[p] = gy;
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> warp(const Tensor<Scalar>& feature, const Tensor<Scalar>& flow) {
  require_nchw(feature, "warp");
  require_nchw(flow, "warp");
  if (flow.batch() != feature.batch() || flow.channels() != 2 || flow.height() != feature.height() ||
      flow.width() != feature.width()) {
    throw DimensionError("warp: flow " + shape_string(flow.shape()) + " does not match feature " +
                         shape_string(feature.shape()));
  }
  return bilinear_sample(feature, flow_to_coords(flow));
}

template <typename Scalar>
SampleGrads<Scalar> warp_backward(const Tensor<Scalar>& feature, const Tensor<Scalar>& flow,
                                  const Tensor<Scalar>& grad_out, GradRequest want) {
  // d(coords)/d(flow) is the identity.
  return bilinear_sample_backward(feature, flow_to_coords(flow), grad_out, want);
}

template <typename Scalar>
Tensor<Scalar> deform_conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>* bias,
                             const Tensor<Scalar>& offsets, const Tensor<Scalar>& masks, Index groups,
                             const ConvSpec& spec) {
  check_deform_args(input, weight, offsets, masks, groups, spec);
  if (bias && bias->shape() != Shape{spec.out_channels}) {
    throw DimensionError("deform_conv2d: bias shape " + shape_string(bias->shape()));
  }
  const Index oh = spec.out_height(input.height()), ow = spec.out_width(input.width());
  Tensor<Scalar> out({input.batch(), spec.out_channels, oh, ow});
  const ConstRowMap<Scalar> wmat(weight.data(), spec.out_channels, spec.in_channels * spec.taps());
  RowMatrix<Scalar> col;
  for (Index n = 0; n < input.batch(); ++n) {
    deform_im2col(input, offsets, masks, n, groups, spec, oh, ow, col);
    auto om = out.item_matrix(n);
    om.noalias() = wmat * col;
    if (bias) om.colwise() += bias->array().matrix();
  }
  check_finite(out, "deform_conv2d");
  return out;
}

template <typename Scalar>
DeformGrads<Scalar> deform_conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                           const Tensor<Scalar>& offsets, const Tensor<Scalar>& masks,
                                           Index groups, const Tensor<Scalar>& grad_out, const ConvSpec& spec,
                                           GradRequest want) {
  check_deform_args(input, weight, offsets, masks, groups, spec);
  const Index cin = input.channels(), h = input.height(), w = input.width();
  const Index oh = spec.out_height(h), ow = spec.out_width(w);
  const Index taps = spec.taps(), pixels = oh * ow, per_group = cin / groups;
  const ConstRowMap<Scalar> wmat(weight.data(), spec.out_channels, cin * taps);

  DeformGrads<Scalar> g;
  if (want.weight) g.weight = Tensor<Scalar>(weight.shape());
  if (want.bias && spec.has_bias) g.bias = Tensor<Scalar>({spec.out_channels});
  if (want.input) g.input = Tensor<Scalar>(input.shape());
  if (want.offsets) g.offsets = Tensor<Scalar>(offsets.shape());
  if (want.masks) g.masks = Tensor<Scalar>(masks.shape());
  const bool need_sampling = want.input || want.offsets || want.masks;

  RowMatrix<Scalar> col, gcol;
  for (Index n = 0; n < input.batch(); ++n) {
    const auto go = grad_out.item_matrix(n);
    if (want.bias && spec.has_bias) g.bias.array().matrix() += go.rowwise().sum();
    if (want.weight) {
      deform_im2col(input, offsets, masks, n, groups, spec, oh, ow, col);
      RowMap<Scalar>(g.weight.data(), spec.out_channels, cin * taps).noalias() += go * col.transpose();
    }
    if (!need_sampling) continue;
    gcol.noalias() = wmat.transpose() * go;
    for (Index gi = 0; gi < groups; ++gi) {
      for (Index k = 0; k < taps; ++k) {
        const Index ky = k / spec.kernel_w, kx = k % spec.kernel_w;
        const Scalar* off_y = offsets.plane(n, (gi * taps + k) * 2);
        const Scalar* off_x = offsets.plane(n, (gi * taps + k) * 2 + 1);
        const Scalar* mask = masks.plane(n, gi * taps + k);
        for (Index p = 0; p < pixels; ++p) {
          const Index y = p / ow, x = p % ow;
          const Footprint<Scalar> fp(static_cast<Scalar>(y * spec.stride - spec.padding + ky) + off_y[p],
                                     static_cast<Scalar>(x * spec.stride - spec.padding + kx) + off_x[p], h, w);
          const Scalar m = mask[p];
          Scalar gm = 0, gy = 0, gx = 0;
          for (Index c = gi * per_group; c < (gi + 1) * per_group; ++c) {
            const Scalar gc = gcol(c * taps + k, p);
            const Scalar* plane = input.plane(n, c);
            if (want.masks) gm += gc * fp.sample(plane);
            if (want.input) fp.scatter(g.input.plane(n, c), gc * m);
            if (want.offsets) {
              gy += gc * m * fp.dy(plane);
              gx += gc * m * fp.dx(plane);
            }
          }
          if (want.masks) g.masks.plane(n, gi * taps + k)[p] = gm;
          if (want.offsets) {
            g.offsets.plane(n, (gi * taps + k) * 2)[p] = gy;
            g.offsets.plane(n, (gi * taps + k) * 2 + 1)[p] = gx;
          }
        }
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, Index r) {
  require_nchw(input, "pixel_shuffle");
  if (r < 1 || input.channels() % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: channels " + std::to_string(input.channels()) +
                         " not divisible by factor^2 = " + std::to_string(r * r));
  }
  const Index c_out = input.channels() / (r * r), h = input.height(), w = input.width();
  Tensor<Scalar> out({input.batch(), c_out, h * r, w * r});
  for (Index n = 0; n < input.batch(); ++n)
    for (Index c = 0; c < c_out; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const Scalar* src = input.plane(n, c * r * r + i * r + j);
          Scalar* dst = out.plane(n, c);
          for (Index y = 0; y < h; ++y)
            for (Index x = 0; x < w; ++x) dst[(y * r + i) * (w * r) + x * r + j] = src[y * w + x];
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, Index r) {
  require_nchw(input, "pixel_unshuffle");
  if (r < 1 || input.height() % r != 0 || input.width() % r != 0) {
    throw DimensionError("pixel_unshuffle: spatial size " + shape_string(input.shape()) +
                         " not divisible by factor " + std::to_string(r));
  }
  const Index c_in = input.channels(), h = input.height() / r, w = input.width() / r;
  Tensor<Scalar> out({input.batch(), c_in * r * r, h, w});
  for (Index n = 0; n < input.batch(); ++n)
    for (Index c = 0; c < c_in; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const Scalar* src = input.plane(n, c);
          Scalar* dst = out.plane(n, c * r * r + i * r + j);
          for (Index y = 0; y < h; ++y)
            for (Index x = 0; x < w; ++x) dst[y * w + x] = src[(y * r + i) * (w * r) + x * r + j];
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& input, Scalar slope) {
  Tensor<Scalar> out = input;
  out.array() = (input.array() >= Scalar(0)).select(input.array(), input.array() * slope);
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input) {
  Tensor<Scalar> out(input.shape());
  for (Index i = 0; i < input.size(); ++i) {
    const Scalar x = input[i];
    if (x >= 0) {
      out[i] = Scalar(1) / (Scalar(1) + std::exp(-x));
    } else {
      const Scalar e = std::exp(x);
      out[i] = e / (Scalar(1) + e);
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& input, Index out_h, Index out_w) {
  require_nchw(input, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw DimensionError("resize_bilinear: target extents must be positive");
  const Index h = input.height(), w = input.width();
  if (out_h == h && out_w == w) return input;

  struct Axis {
    Index lo, hi;
    Scalar frac;
  };
  auto axis = [](Index in, Index out) {
    std::vector<Axis> a(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (Index i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const Index lo = static_cast<Index>(std::floor(src));
      a[static_cast<size_t>(i)] = {lo, std::min(lo + 1, in - 1), static_cast<Scalar>(src - static_cast<double>(lo))};
    }
    return a;
  };
  const auto ay = axis(h, out_h), ax = axis(w, out_w);
  Tensor<Scalar> out({input.batch(), input.channels(), out_h, out_w});
  for (Index n = 0; n < input.batch(); ++n)
    for (Index c = 0; c < input.channels(); ++c) {
      const Scalar* src = input.plane(n, c);
      Scalar* dst = out.plane(n, c);
      for (Index y = 0; y < out_h; ++y) {
        const Axis& vy = ay[static_cast<size_t>(y)];
        for (Index x = 0; x < out_w; ++x) {
          const Axis& vx = ax[static_cast<size_t>(x)];
          const Scalar top = src[vy.lo * w + vx.lo] * (1 - vx.frac) + src[vy.lo * w + vx.hi] * vx.frac;
          const Scalar bot = src[vy.hi * w + vx.lo] * (1 - vx.frac) + src[vy.hi * w + vx.hi] * vx.frac;
          dst[y * out_w + x] = top * (1 - vy.frac) + bot * vy.frac;
        }
      }
    }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>* const> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Tensor<Scalar>& first = *parts.front();
  require_nchw(first, "concat_channels");
  Index total = 0;
  for (const Tensor<Scalar>* t : parts) {
    require_nchw(*t, "concat_channels");
    if (t->batch() != first.batch() || t->height() != first.height() || t->width() != first.width()) {
      throw DimensionError("concat_channels: " + shape_string(t->shape()) + " incompatible with " +
                           shape_string(first.shape()));
    }
    total += t->channels();
  }
  Tensor<Scalar> out({first.batch(), total, first.height(), first.width()});
  for (Index n = 0; n < first.batch(); ++n) {
    Scalar* dst = out.plane(n, 0);
    for (const Tensor<Scalar>* t : parts) {
      const Index count = t->channels() * t->plane_size();
      std::copy(t->plane(n, 0), t->plane(n, 0) + count, dst);
      dst += count;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& input, Index begin, Index count) {
  require_nchw(input, "slice_channels");
  if (begin < 0 || count < 0 || begin + count > input.channels()) {
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_string(input.shape()));
  }
  Tensor<Scalar> out({input.batch(), count, input.height(), input.width()});
  for (Index n = 0; n < input.batch(); ++n) {
    std::copy(input.plane(n, begin), input.plane(n, begin) + count * input.plane_size(), out.plane(n, 0));
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> add_flow_to_offsets(const Tensor<Scalar>& residual, std::span<const Tensor<Scalar>* const> flows,
                                   Index taps) {
  require_nchw(residual, "add_flow_to_offsets");
  const Index shares = static_cast<Index>(flows.size());
  if (shares < 1 || residual.channels() % (2 * taps) != 0) {
    throw DimensionError("add_flow_to_offsets: offset channels " + std::to_string(residual.channels()) +
                         " not a multiple of 2 * taps");
  }
  const Index groups = residual.channels() / (2 * taps);
  if (groups % shares != 0) {
    throw DimensionError("add_flow_to_offsets: " + std::to_string(groups) + " groups cannot be split into " +
                         std::to_string(shares) + " equal shares");
  }
  for (const Tensor<Scalar>* f : flows) {
    if (f->shape() != Shape{residual.batch(), 2, residual.height(), residual.width()}) {
      throw DimensionError("add_flow_to_offsets: flow shape " + shape_string(f->shape()) +
                           " does not match offsets " + shape_string(residual.shape()));
    }
  }
  const Index per_share = groups / shares, pixels = residual.plane_size();
  Tensor<Scalar> out = residual;
  for (Index n = 0; n < residual.batch(); ++n)
    for (Index g = 0; g < groups; ++g) {
      const Tensor<Scalar>& flow = *flows[static_cast<size_t>(g / per_share)];
      for (Index k = 0; k < taps; ++k) {
        Scalar* dy = out.plane(n, (g * taps + k) * 2);
        Scalar* dx = out.plane(n, (g * taps + k) * 2 + 1);
        const Scalar* fx = flow.plane(n, 0);
        const Scalar* fy = flow.plane(n, 1);
        for (Index p = 0; p < pixels; ++p) {
          dy[p] += fy[p];
          dx[p] += fx[p];
        }
      }
    }
  return out;
}

template <typename Scalar>
Tensor<Scalar> offsets_grad_to_flow(const Tensor<Scalar>& grad_offsets, Index shares, Index share, Index taps) {
  const Index groups = grad_offsets.channels() / (2 * taps), per_share = groups / shares;
  const Index pixels = grad_offsets.plane_size();
  Tensor<Scalar> out({grad_offsets.batch(), 2, grad_offsets.height(), grad_offsets.width()});
  for (Index n = 0; n < grad_offsets.batch(); ++n)
    for (Index g = share * per_share; g < (share + 1) * per_share; ++g)
      for (Index k = 0; k < taps; ++k) {
        const Scalar* dy = grad_offsets.plane(n, (g * taps + k) * 2);
        const Scalar* dx = grad_offsets.plane(n, (g * taps + k) * 2 + 1);
        Scalar* fx = out.plane(n, 0);
        Scalar* fy = out.plane(n, 1);
        for (Index p = 0; p < pixels; ++p) {
          fx[p] += dx[p];
          fy[p] += dy[p];
        }
      }
  return out;
}

#define VSRPP_INSTANTIATE_KERNELS(T)                                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, const ConvSpec&);         \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvSpec&, \
                                        GradRequest);                                                        \
  template Tensor<T> bilinear_sample(const Tensor<T>&, const Tensor<T>&);                                    \
  template SampleGrads<T> bilinear_sample_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                                   GradRequest);                                             \
  template Tensor<T> warp(const Tensor<T>&, const Tensor<T>&);                                               \
  template SampleGrads<T> warp_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, GradRequest);  \
  template Tensor<T> flow_to_coords(const Tensor<T>&);                                                       \
  template Tensor<T> deform_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, const Tensor<T>&,   \
                                   const Tensor<T>&, Index, const ConvSpec&);                                \
  template DeformGrads<T> deform_conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                                 const Tensor<T>&, Index, const Tensor<T>&, const ConvSpec&, \
                                                 GradRequest);                                               \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, Index);                                                 \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, Index);                                               \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                        \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                              \
  template Tensor<T> resize_bilinear(const Tensor<T>&, Index, Index);                                        \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                                     \
  template Tensor<T> slice_channels(const Tensor<T>&, Index, Index);                                         \
  template Tensor<T> add_flow_to_offsets(const Tensor<T>&, std::span<const Tensor<T>* const>, Index);        \
  template Tensor<T> offsets_grad_to_flow(const Tensor<T>&, Index, Index, Index);

VSRPP_INSTANTIATE_KERNELS(float)
VSRPP_INSTANTIATE_KERNELS(double)

}  // namespace vsrpp
