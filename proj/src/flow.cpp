#include "vsrpp/flow.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

namespace vsrpp {

const char* to_string(Direction d) { return d == Direction::kForward ? "forward" : "backward"; }

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Plane luma(const Tensorf& frame, Index n) {
  const Index h = frame.height(), w = frame.width();
  Plane out(h, w);
  if (frame.channels() == 1) {
    out = Eigen::Map<const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(frame.plane(n, 0), h, w)
              .cast<double>();
    return out;
  }
  if (frame.channels() != 3) {
    throw DimensionError("flow estimation expects 1 or 3 channel frames, got " + shape_string(frame.shape()));
  }
  const float* r = frame.plane(n, 0);
  const float* g = frame.plane(n, 1);
  const float* b = frame.plane(n, 2);
  for (Index i = 0; i < h * w; ++i) out.data()[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

// Separable binomial [1 4 6 4 1] / 16 blur with mirrored edges.
Plane binomial_blur(const Plane& a) {
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const Index h = a.rows(), w = a.cols();
  auto mirror = [](Index i, Index n) {
    if (n == 1) return Index{0};
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Plane rows(h, w), out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * a(y, mirror(x + t, w));
      rows(y, x) = acc;
    }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * rows(mirror(y + t, h), x);
      out(y, x) = acc;
    }
  return out;
}

Plane downsample2(const Plane& a) {
  const Plane b = binomial_blur(a);
  const Index h = a.rows() / 2, w = a.cols() / 2;
  Plane out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) out(y, x) = b(2 * y, 2 * x);
  return out;
}

// 3x3 median, removing isolated outliers between pyramid levels.
Plane median3(const Plane& a) {
  const Index h = a.rows(), w = a.cols();
  Plane out(h, w);
  std::array<double, 9> buf{};
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      size_t n = 0;
      for (Index dy = -1; dy <= 1; ++dy)
        for (Index dx = -1; dx <= 1; ++dx) {
          const Index yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) buf[n++] = a(yy, xx);
        }
      std::nth_element(buf.begin(), buf.begin() + n / 2, buf.begin() + n);
      out(y, x) = buf[n / 2];
    }
  return out;
}

double sample_at(const Plane& img, double sx, double sy) {
  const Index h = img.rows(), w = img.cols();
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  const Index x0 = std::min<Index>(static_cast<Index>(sx), w - 1), y0 = std::min<Index>(static_cast<Index>(sy), h - 1);
  const Index x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double lx = sx - static_cast<double>(x0), ly = sy - static_cast<double>(y0);
  return (1 - ly) * ((1 - lx) * img(y0, x0) + lx * img(y0, x1)) + ly * ((1 - lx) * img(y1, x0) + lx * img(y1, x1));
}

void gradients(const Plane& img, Plane& gx, Plane& gy) {
  const Index h = img.rows(), w = img.cols();
  gx.setZero(h, w);
  gy.setZero(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const Index xl = std::max<Index>(x - 1, 0), xr = std::min(x + 1, w - 1);
      const Index yu = std::max<Index>(y - 1, 0), yd = std::min(y + 1, h - 1);
      if (xr > xl) gx(y, x) = (img(y, xr) - img(y, xl)) / static_cast<double>(xr - xl);
      if (yd > yu) gy(y, x) = (img(yd, x) - img(yu, x)) / static_cast<double>(yd - yu);
    }
}

// Mean over the (2r+1)^2 window, restricted to pixels inside the image.
Plane box_mean(const Plane& a, int r) {
  const Index h = a.rows(), w = a.cols();
  Plane rows(h, w), out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const Index lo = std::max<Index>(x - r, 0), hi = std::min<Index>(x + r, w - 1);
      rows(y, x) = a.row(y).segment(lo, hi - lo + 1).sum() / static_cast<double>(hi - lo + 1);
    }
  for (Index y = 0; y < h; ++y) {
    const Index lo = std::max<Index>(y - r, 0), hi = std::min<Index>(y + r, h - 1);
    out.row(y) = rows.middleRows(lo, hi - lo + 1).colwise().sum() / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Bilinear (half-pixel) resize of a flow component, scaled by `factor`.
Plane upsample(const Plane& a, Index h, Index w, double factor) {
  Tensord t({1, 1, a.rows(), a.cols()});
  std::copy(a.data(), a.data() + a.size(), t.data());
  const Tensord r = resize_bilinear(t, h, w);
  Plane out(h, w);
  std::copy(r.data(), r.data() + r.size(), out.data());
  return out * factor;
}

// Integer displacement in [-radius, radius]^2 minimising the window SSD.
void integer_search(const Plane& ref, const Plane& nbr, Plane& u, Plane& v, int window, int radius) {
  const Index h = ref.rows(), w = ref.cols();
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const Index y0 = std::max<Index>(y - window, 0), y1 = std::min<Index>(y + window, h - 1);
      const Index x0 = std::max<Index>(x - window, 0), x1 = std::min<Index>(x + window, w - 1);
      double best = std::numeric_limits<double>::infinity();
      int bu = 0, bv = 0;
      for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du) {
          double ssd = 0;
          for (Index yy = y0; yy <= y1; ++yy)
            for (Index xx = x0; xx <= x1; ++xx) {
              const double e = sample_at(nbr, static_cast<double>(xx + du), static_cast<double>(yy + dv)) - ref(yy, xx);
              ssd += e * e;
            }
          // Ties favour the smallest displacement.
          if (ssd < best - 1e-12 || (ssd <= best + 1e-12 && du * du + dv * dv < bu * bu + bv * bv)) {
            best = std::min(best, ssd);
            bu = du;
            bv = dv;
          }
        }
      u(y, x) = bu;
      v(y, x) = bv;
    }
}

// Each pixel iterates on its own window, translated by its own flow.
void refine_level(const Plane& ref, const Plane& nbr, Plane& u, Plane& v, const PyramidOptions& opt) {
  const Index h = ref.rows(), w = ref.cols();
  const int r = opt.window_radius;
  Plane gx, gy;
  gradients(ref, gx, gy);
  const Plane sxx = box_mean(gx * gx, r);
  const Plane sxy = box_mean(gx * gy, r);
  const Plane syy = box_mean(gy * gy, r);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const double a = sxx(y, x), b = sxy(y, x), c = syy(y, x);
      const double lambda_min = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      if (lambda_min < opt.min_eigen) continue;
      const double det = a * c - b * b;
      const Index y0 = std::max<Index>(y - r, 0), y1 = std::min<Index>(y + r, h - 1);
      const Index x0 = std::max<Index>(x - r, 0), x1 = std::min<Index>(x + r, w - 1);
      const double count = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
      double fu = u(y, x), fv = v(y, x);
      for (int it = 0; it < opt.iters; ++it) {
        double ex = 0, ey = 0;
        for (Index yy = y0; yy <= y1; ++yy)
          for (Index xx = x0; xx <= x1; ++xx) {
            const double e = sample_at(nbr, static_cast<double>(xx) + fu, static_cast<double>(yy) + fv) - ref(yy, xx);
            ex += gx(yy, xx) * e;
            ey += gy(yy, xx) * e;
          }
        ex /= count;
        ey /= count;
        double du = -(c * ex - b * ey) / det, dv = -(a * ey - b * ex) / det;
        // Linearisation only holds near the current estimate.
        const double step = std::hypot(du, dv);
        if (step > 1.0) {
          du /= step;
          dv /= step;
        }
        fu += du;
        fv += dv;
        if (step < 1e-3) break;
      }
      u(y, x) = fu;
      v(y, x) = fv;
    }
}

}  // namespace

void cap_flow_magnitude(FlowField& flow, float max_magnitude) {
  for (Index n = 0; n < flow.batch(); ++n) {
    float* fx = flow.plane(n, 0);
    float* fy = flow.plane(n, 1);
    for (Index p = 0; p < flow.plane_size(); ++p) {
      const float mag = std::hypot(fx[p], fy[p]);
      if (mag > max_magnitude) {
        const float s = max_magnitude / mag;
        fx[p] *= s;
        fy[p] *= s;
      }
    }
  }
}

FlowField zero_flow_like(const Tensorf& frame) {
  require_nchw(frame, "zero_flow_like");
  return FlowField({frame.batch(), 2, frame.height(), frame.width()});
}

FlowField estimate_pyramidal(const Tensorf& ref, const Tensorf& nbr, const PyramidOptions& options) {
  require_nchw(ref, "estimate_pyramidal");
  require_same_shape(ref, nbr, "estimate_pyramidal");
  const Index h = ref.height(), w = ref.width();
  // Coarse levels smaller than the minimum size are dropped.
  int levels = 1;
  const Index smallest = std::min(h, w);
  while (levels < options.levels && (smallest >> levels) >= options.min_level_size) ++levels;

  FlowField flow = zero_flow_like(ref);
  for (Index n = 0; n < ref.batch(); ++n) {
    std::vector<Plane> pr{luma(ref, n)}, pn{luma(nbr, n)};
    for (int l = 1; l < levels; ++l) {
      pr.push_back(downsample2(pr.back()));
      pn.push_back(downsample2(pn.back()));
    }
    Plane u = Plane::Zero(pr.back().rows(), pr.back().cols());
    Plane v = u;
    if (options.search_radius > 0) integer_search(pr.back(), pn.back(), u, v, options.window_radius, options.search_radius);
    for (int l = levels - 1; l >= 0; --l) {
      const Plane& r = pr[static_cast<size_t>(l)];
      if (u.rows() != r.rows() || u.cols() != r.cols()) {
        u = upsample(u, r.rows(), r.cols(), 2.0);
        v = upsample(v, r.rows(), r.cols(), 2.0);
      }
      refine_level(r, pn[static_cast<size_t>(l)], u, v, options);
      u = median3(u);
      v = median3(v);
    }
    for (Index p = 0; p < h * w; ++p) {
      flow.plane(n, 0)[p] = static_cast<float>(u.data()[p]);
      flow.plane(n, 1)[p] = static_cast<float>(v.data()[p]);
    }
  }
  cap_flow_magnitude(flow, options.max_magnitude);
  check_finite(flow, "estimate_pyramidal");
  return flow;
}

FlowField ZeroFlowProvider::estimate(const Tensorf& ref, const Tensorf& nbr) const {
  require_same_shape(ref, nbr, "zero flow");
  return zero_flow_like(ref);
}

FlowField PyramidalFlowProvider::estimate(const Tensorf& ref, const Tensorf& nbr) const {
  return estimate_pyramidal(ref, nbr, options_);
}

FlowPairs flow_pairs(const std::vector<Tensorf>& frames, Direction direction, const FlowProvider& provider,
                     int order, FlowCache* cache) {
  if (frames.empty()) throw DimensionError("flow_pairs: empty frame sequence");
  if (order < 1) throw std::invalid_argument("flow_pairs: order must be at least 1");
  const long count = static_cast<long>(frames.size());
  FlowPairs out;
  out.direction = direction;
  for (long i = 0; i < count; ++i) {
    for (int p = 1; p <= std::min(order, 2); ++p) {
      const long j = neighbour_index(i, p, direction);
      FlowField flow;
      if (j < 0 || j >= count) {
        flow = zero_flow_like(frames[static_cast<size_t>(i)]);
      } else if (auto cached = cache ? cache->load(i, p, direction) : std::nullopt) {
        flow = std::move(*cached);
      } else {
        flow = provider.estimate(frames[static_cast<size_t>(i)], frames[static_cast<size_t>(j)]);
        if (cache) cache->store(i, p, direction, flow);
      }
      (p == 1 ? out.first : out.second).push_back(std::move(flow));
    }
  }
  return out;
}

namespace {
constexpr std::uint32_t kFlowMagic = 0x46525356u;  // "VSRF" read little-endian
constexpr std::int32_t kFlowVersion = 1;
}  // namespace

void write_flow_file(const std::filesystem::path& path, const FlowField& flow, Direction d, long i, int p) {
  require_nchw(flow, "write_flow_file");
  if (flow.batch() != 1 || flow.channels() != 2) {
    throw DimensionError("write_flow_file: expected a single 1x2xHxW flow, got " + shape_string(flow.shape()));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open flow file for writing: " + path.string());
  detail::write_le(os, kFlowMagic);
  detail::write_i32(os, kFlowVersion);
  detail::write_i32(os, 2);
  detail::write_i32(os, static_cast<std::int32_t>(flow.height()));
  detail::write_i32(os, static_cast<std::int32_t>(flow.width()));
  detail::write_i32(os, static_cast<std::int32_t>(d));
  detail::write_i32(os, static_cast<std::int32_t>(i));
  detail::write_i32(os, p);
  for (Index k = 0; k < flow.size(); ++k) detail::write_f32(os, flow[k]);
  if (!os) throw FormatError("failed writing flow file " + path.string());
}

FlowField read_flow_file(const std::filesystem::path& path, Direction* d, long* i, int* p) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open flow file: " + path.string());
  if (detail::read_le<std::uint32_t>(is) != kFlowMagic) throw FormatError("bad flow file magic: " + path.string());
  const std::int32_t version = detail::read_i32(is);
  if (version != kFlowVersion) throw FormatError("unsupported flow file version " + std::to_string(version));
  const std::int32_t comps = detail::read_i32(is), h = detail::read_i32(is), w = detail::read_i32(is);
  const std::int32_t dir = detail::read_i32(is), idx = detail::read_i32(is), gap = detail::read_i32(is);
  if (comps != 2 || h <= 0 || w <= 0 || (dir != 0 && dir != 1)) throw FormatError("corrupt flow header: " + path.string());
  FlowField flow({1, 2, h, w});
  for (Index k = 0; k < flow.size(); ++k) flow[k] = detail::read_f32(is);
  if (d) *d = static_cast<Direction>(dir);
  if (i) *i = idx;
  if (p) *p = gap;
  return flow;
}

FlowCache::FlowCache(std::filesystem::path dir, std::string clip_id)
    : dir_(std::move(dir)), clip_id_(std::move(clip_id)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FlowCache::path_for(long i, int p, Direction d) const {
  return dir_ / (clip_id_ + "_" + to_string(d) + "_" + std::to_string(i) + "_" + std::to_string(p) + ".flow");
}

std::optional<FlowField> FlowCache::load(long i, int p, Direction d) const {
  const auto path = path_for(i, p, d);
  if (!std::filesystem::exists(path)) return std::nullopt;
  Direction fd;
  long fi;
  int fp;
  FlowField flow = read_flow_file(path, &fd, &fi, &fp);
  if (fd != d || fi != i || fp != p) throw FormatError("flow cache entry header mismatch: " + path.string());
  return flow;
}

void FlowCache::store(long i, int p, Direction d, const FlowField& flow) const {
  write_flow_file(path_for(i, p, d), flow, d, i, p);
}

}  // namespace vsrpp
