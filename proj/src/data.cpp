#include "vsrpp/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

namespace vsrpp {

void Clip::validate() const {
  if (frames.empty()) throw DimensionError("clip '" + id + "' has no frames");
  for (const auto& f : frames) {
    require_nchw(f, "clip frame");
    if (f.batch() != 1 || f.channels() != 3) throw DimensionError("clip frames must be 1 x 3 x H x W");
    require_same_shape(frames.front(), f, "clip frame");
  }
}

void DegradationSpec::validate() const {
  if (scale < 2) throw std::invalid_argument("degradation scale must be at least 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("degradation sigma must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("blur kernel size must be odd");
}

DegradeMode parse_degrade_mode(const std::string& s) {
  if (s == "BI" || s == "bi") return DegradeMode::kBI;
  if (s == "BD" || s == "bd") return DegradeMode::kBD;
  throw std::invalid_argument("unknown degradation mode '" + s + "' (expected BI or BD)");
}

double cubic_kernel(double x, double a) {
  const double ax = std::abs(x), ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

namespace {

Index mirror_index(Index i, Index n) {
  const Index period = 2 * n;
  Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

Index reflect101(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

void require_divisible(const Shape& s, int scale, const char* what) {
  if (s.size() != 4 || s[2] % scale != 0 || s[3] % scale != 0) {
    throw DimensionError(std::string(what) + ": extent " + shape_string(s) + " not divisible by scale " +
                         std::to_string(scale));
  }
}

// Applies 1-D taps along rows (axis 0) or columns (axis 1) of each plane.
template <typename Scalar>
Tensor<Scalar> resample_axis(const Tensor<Scalar>& in, const std::vector<ResampleTaps>& taps, int axis) {
  const Index h = in.height(), w = in.width();
  const Index oh = axis == 0 ? static_cast<Index>(taps.size()) : h;
  const Index ow = axis == 1 ? static_cast<Index>(taps.size()) : w;
  Tensor<Scalar> out({in.batch(), in.channels(), oh, ow});
  for (Index n = 0; n < in.batch(); ++n)
    for (Index c = 0; c < in.channels(); ++c) {
      const Scalar* src = in.plane(n, c);
      Scalar* dst = out.plane(n, c);
      for (Index y = 0; y < oh; ++y)
        for (Index x = 0; x < ow; ++x) {
          const ResampleTaps& t = taps[static_cast<size_t>(axis == 0 ? y : x)];
          double acc = 0.0;
          for (size_t k = 0; k < t.index.size(); ++k) {
            const Index sy = axis == 0 ? t.index[k] : y, sx = axis == 1 ? t.index[k] : x;
            acc += t.weight[k] * static_cast<double>(src[sy * w + sx]);
          }
          dst[y * ow + x] = static_cast<Scalar>(acc);
        }
    }
  return out;
}

}  // namespace

std::vector<ResampleTaps> bicubic_taps(Index in, Index out, double a, bool antialias) {
  if (in < 1 || out < 1) throw DimensionError("bicubic_taps: sizes must be positive");
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const bool shrink = antialias && scale < 1.0;
  const double width = shrink ? 4.0 / scale : 4.0;
  const Index taps = static_cast<Index>(std::ceil(width)) + 2;
  std::vector<ResampleTaps> result(static_cast<size_t>(out));
  for (Index u = 1; u <= out; ++u) {
    const double x = static_cast<double>(u) / scale + 0.5 * (1.0 - 1.0 / scale);
    const Index left = static_cast<Index>(std::floor(x - width / 2.0));
    double total = 0.0;
    std::vector<std::pair<Index, double>> raw;
    for (Index p = 0; p < taps; ++p) {
      const Index idx = left + p;
      const double d = x - static_cast<double>(idx);
      const double wgt = shrink ? scale * cubic_kernel(scale * d, a) : cubic_kernel(d, a);
      raw.emplace_back(idx, wgt);
      total += wgt;
    }
    ResampleTaps& t = result[static_cast<size_t>(u - 1)];
    for (const auto& [idx, wgt] : raw) {
      if (wgt == 0.0) continue;
      t.index.push_back(mirror_index(idx - 1, in));
      t.weight.push_back(wgt / total);
    }
  }
  return result;
}

template <typename Scalar>
Tensor<Scalar> imresize(const Tensor<Scalar>& input, Index out_h, Index out_w, double a) {
  require_nchw(input, "imresize");
  Tensor<Scalar> rows = resample_axis(input, bicubic_taps(input.height(), out_h, a), 0);
  return resample_axis(rows, bicubic_taps(input.width(), out_w, a), 1);
}

template <typename Scalar>
Tensor<Scalar> degrade_bi(const Tensor<Scalar>& frame, int scale) {
  require_nchw(frame, "degrade_bi");
  if (scale < 2) throw std::invalid_argument("degrade_bi: scale must be at least 2");
  require_divisible(frame.shape(), scale, "degrade_bi");
  return imresize(frame, frame.height() / scale, frame.width() / scale);
}

std::vector<double> gaussian_kernel(double sigma, int size) {
  if (!(sigma > 0.0) || size < 1 || size % 2 == 0) {
    throw std::invalid_argument("gaussian_kernel: need sigma > 0 and odd size");
  }
  const int r = size / 2;
  std::vector<double> k(static_cast<size_t>(size));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<size_t>(i + r)] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    total += k[static_cast<size_t>(i + r)];
  }
  for (double& v : k) v /= total;
  return k;
}

template <typename Scalar>
Tensor<Scalar> gaussian_blur(const Tensor<Scalar>& frame, double sigma, int size) {
  require_nchw(frame, "gaussian_blur");
  const std::vector<double> k = gaussian_kernel(sigma, size);
  const Index r = size / 2;
  auto taps_for = [&](Index n) {
    std::vector<ResampleTaps> taps(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i)
      for (Index d = -r; d <= r; ++d) {
        taps[static_cast<size_t>(i)].index.push_back(reflect101(i + d, n));
        taps[static_cast<size_t>(i)].weight.push_back(k[static_cast<size_t>(d + r)]);
      }
    return taps;
  };
  Tensor<Scalar> rows = resample_axis(frame, taps_for(frame.height()), 0);
  return resample_axis(rows, taps_for(frame.width()), 1);
}

template <typename Scalar>
Tensor<Scalar> degrade_bd(const Tensor<Scalar>& frame, double sigma, int scale, int size) {
  require_nchw(frame, "degrade_bd");
  if (scale < 2) throw std::invalid_argument("degrade_bd: scale must be at least 2");
  require_divisible(frame.shape(), scale, "degrade_bd");
  const Tensor<Scalar> blurred = gaussian_blur(frame, sigma, size);
  const Index oh = frame.height() / scale, ow = frame.width() / scale;
  Tensor<Scalar> out({frame.batch(), frame.channels(), oh, ow});
  for (Index n = 0; n < frame.batch(); ++n)
    for (Index c = 0; c < frame.channels(); ++c)
      for (Index y = 0; y < oh; ++y)
        for (Index x = 0; x < ow; ++x) out(n, c, y, x) = blurred(n, c, y * scale, x * scale);
  return out;
}

template <typename Scalar>
Tensor<Scalar> degrade(const Tensor<Scalar>& frame, const DegradationSpec& spec) {
  spec.validate();
  if (spec.mode == DegradeMode::kBI) {
    require_divisible(frame.shape(), spec.scale, "degrade_bi");
    return imresize(frame, frame.height() / spec.scale, frame.width() / spec.scale, spec.cubic_a);
  }
  return degrade_bd(frame, spec.sigma, spec.scale, spec.kernel_size);
}

Clip degrade_clip(const Clip& clip, const DegradationSpec& spec) {
  clip.validate();
  Clip out;
  out.id = clip.id;
  out.source = clip.source;
  out.motion = clip.motion;
  for (auto& m : out.motion) {
    m.dx /= spec.scale;
    m.dy /= spec.scale;
  }
  for (const auto& f : clip.frames) out.frames.push_back(degrade(f, spec));
  return out;
}

template <typename Scalar>
Tensor<Scalar> upsample_bicubic(const Tensor<Scalar>& frame, int scale) {
  require_nchw(frame, "upsample_bicubic");
  return imresize(frame, frame.height() * scale, frame.width() * scale);
}

// ---- synthetic clips -----------------------------------------------------

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "translate") return SynthKind::kTranslate;
  if (s == "rotate_zoom") return SynthKind::kRotateZoom;
  if (s == "texture_noise") return SynthKind::kTextureNoise;
  throw std::invalid_argument("unknown synthetic clip kind '" + s + "'");
}

const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::kTranslate: return "translate";
    case SynthKind::kRotateZoom: return "rotate_zoom";
    case SynthKind::kTextureNoise: return "texture_noise";
  }
  return "?";
}

namespace {

struct Wave {
  double fx, fy, amplitude;
  double phase[3];
  double gain[3];
};

}  // namespace

Clip synth_clip(SynthKind kind, int frames, std::uint64_t seed, const SynthOptions& options) {
  if (frames < 1) throw std::invalid_argument("synth_clip: need at least one frame");
  if (options.height < 1 || options.width < 1 || options.components < 1) {
    throw std::invalid_argument("synth_clip: sizes and component count must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const Index h = options.height, w = options.width;

  // Integer cycles per frame keep every component periodic on the canvas.
  const long kx_max = static_cast<long>(std::floor(options.max_frequency * static_cast<double>(w)));
  const long ky_max = static_cast<long>(std::floor(options.max_frequency * static_cast<double>(h)));
  if (kx_max == 0 && ky_max == 0) {
    throw std::invalid_argument("synth_clip: canvas too small for max_frequency " +
                                std::to_string(options.max_frequency));
  }
  std::vector<Wave> waves;
  double amp_total = 0.0;
  while (static_cast<int>(waves.size()) < options.components) {
    const long kx = static_cast<long>(std::floor(unit(rng) * static_cast<double>(2 * kx_max + 1))) - kx_max;
    const long ky = static_cast<long>(std::floor(unit(rng) * static_cast<double>(ky_max + 1)));
    Wave wv{};
    wv.fx = static_cast<double>(kx) / static_cast<double>(w);
    wv.fy = static_cast<double>(ky) / static_cast<double>(h);
    const double f = std::hypot(wv.fx, wv.fy);
    if (f == 0.0 || f > options.max_frequency) continue;
    wv.amplitude = (0.5 + unit(rng)) / (1.0 + f / 0.05);
    const double base = two_pi * unit(rng);
    for (int c = 0; c < 3; ++c) {
      wv.phase[c] = base + (unit(rng) - 0.5);
      wv.gain[c] = 0.7 + 0.6 * unit(rng);
    }
    amp_total += wv.amplitude * 1.3;
    waves.push_back(wv);
  }
  const double norm = 0.45 / amp_total;

  const double speed = options.max_speed * std::sqrt(unit(rng));
  const double heading = two_pi * unit(rng);
  const double vx = speed * std::cos(heading), vy = speed * std::sin(heading);
  const double omega = kind == SynthKind::kRotateZoom ? (unit(rng) - 0.5) * 0.04 : 0.0;
  const double zeta = kind == SynthKind::kRotateZoom ? (unit(rng) - 0.5) * 0.02 : 0.0;
  const double checker_period = std::max(8.0, 1.0 / std::max(options.max_frequency, 1e-3));
  const double cx = 0.5 * static_cast<double>(w - 1), cy = 0.5 * static_cast<double>(h - 1);

  Clip clip;
  clip.id = std::string(to_string(kind)) + "-" + std::to_string(seed);
  clip.source = "synthetic:" + std::string(to_string(kind)) + " seed=" + std::to_string(seed);
  for (int t = 0; t < frames; ++t) {
    FrameMotion m;
    m.dx = vx * t;
    m.dy = vy * t;
    m.angle = omega * t;
    m.zoom = 1.0 + zeta * t;
    clip.motion.push_back(m);
    const double ca = std::cos(m.angle), sa = std::sin(m.angle);
    Tensorf frame({1, 3, h, w});
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        // Content point shown at (x, y): undo zoom/rotation about the centre, then the translation.
        const double qx = (static_cast<double>(x) - cx) / m.zoom, qy = (static_cast<double>(y) - cy) / m.zoom;
        const double px = cx + ca * qx + sa * qy - m.dx;
        const double py = cy - sa * qx + ca * qy - m.dy;
        double v[3] = {0.5, 0.5, 0.5};
        for (const Wave& wv : waves) {
          const double arg = two_pi * (wv.fx * px + wv.fy * py);
          for (int c = 0; c < 3; ++c) v[c] += norm * wv.amplitude * wv.gain[c] * std::cos(arg + wv.phase[c]);
        }
        if (kind == SynthKind::kTextureNoise) {
          const double chk = std::tanh(3.0 * std::sin(two_pi * px / checker_period) *
                                       std::sin(two_pi * py / checker_period));
          for (int c = 0; c < 3; ++c) v[c] = 0.5 + 0.6 * (v[c] - 0.5) + 0.18 * chk;
        }
        for (int c = 0; c < 3; ++c) frame(0, c, y, x) = static_cast<float>(std::clamp(v[c], 0.0, 1.0));
      }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

// ---- metrics -------------------------------------------------------------

Convention parse_convention(const std::string& s) {
  if (s == "rgb") return Convention::kRgb;
  if (s == "y") return Convention::kY;
  throw std::invalid_argument("unknown convention '" + s + "' (expected rgb or y)");
}

const char* to_string(Convention c) { return c == Convention::kRgb ? "rgb" : "y"; }

template <typename Scalar>
Tensor<Scalar> rgb_to_y(const Tensor<Scalar>& rgb) {
  require_nchw(rgb, "rgb_to_y");
  if (rgb.channels() != 3) throw DimensionError("rgb_to_y: expected 3 channels");
  Tensor<Scalar> y({rgb.batch(), 1, rgb.height(), rgb.width()});
  const Index n_px = rgb.plane_size();
  for (Index n = 0; n < rgb.batch(); ++n) {
    const Scalar *r = rgb.plane(n, 0), *g = rgb.plane(n, 1), *b = rgb.plane(n, 2);
    Scalar* out = y.plane(n, 0);
    for (Index p = 0; p < n_px; ++p) {
      const double v = 16.0 + 65.481 * static_cast<double>(r[p]) + 128.553 * static_cast<double>(g[p]) +
                       24.966 * static_cast<double>(b[p]);
      out[p] = static_cast<Scalar>(v / 255.0);
    }
  }
  return y;
}

namespace {

template <typename Scalar>
Tensor<double> metric_input(const Tensor<Scalar>& t, Convention convention) {
  Tensor<double> d = t.template cast<double>();
  d.array() = d.array().max(0.0).min(1.0);
  return convention == Convention::kY ? rgb_to_y(d) : d;
}

}  // namespace

template <typename Scalar>
double psnr(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Convention convention) {
  require_same_shape(pred, target, "psnr");
  const Tensor<double> a = metric_input(pred, convention), b = metric_input(target, convention);
  const double mse = (a.array() - b.array()).square().mean();
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

template <typename Scalar>
double ssim(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Convention convention) {
  require_same_shape(pred, target, "ssim");
  constexpr int kWin = 11;
  if (pred.height() < kWin || pred.width() < kWin) {
    throw DimensionError("ssim: frames smaller than the 11x11 window: " + shape_string(pred.shape()));
  }
  const Tensor<double> a = metric_input(pred, convention), b = metric_input(target, convention);
  const std::vector<double> g = gaussian_kernel(1.5, kWin);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const Index h = a.height(), w = a.width(), oh = h - kWin + 1, ow = w - kWin + 1;
  using Mat = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  auto filter = [&](const Mat& m) {
    Mat rows = Mat::Zero(oh, w);
    for (int k = 0; k < kWin; ++k) rows += g[static_cast<size_t>(k)] * m.block(k, 0, oh, w);
    Mat out = Mat::Zero(oh, ow);
    for (int k = 0; k < kWin; ++k) out += g[static_cast<size_t>(k)] * rows.block(0, k, oh, ow);
    return out;
  };
  double total = 0.0;
  Index planes = 0;
  for (Index n = 0; n < a.batch(); ++n)
    for (Index c = 0; c < a.channels(); ++c) {
      const Mat x = Eigen::Map<const Mat>(a.plane(n, c), h, w);
      const Mat y = Eigen::Map<const Mat>(b.plane(n, c), h, w);
      const Mat mx = filter(x), my = filter(y);
      const Mat sxx = filter(x * x) - mx * mx, syy = filter(y * y) - my * my, sxy = filter(x * y) - mx * my;
      const Mat map = ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      total += map.mean();
      ++planes;
    }
  return total / static_cast<double>(planes);
}

TemporalProfile temporal_profile(const std::vector<Tensorf>& frames, Index column) {
  if (frames.empty()) throw DimensionError("temporal_profile: no frames");
  const Tensorf& first = frames.front();
  require_nchw(first, "temporal_profile");
  if (column < 0 || column >= first.width()) {
    throw DimensionError("temporal_profile: column " + std::to_string(column) + " outside width " +
                         std::to_string(first.width()));
  }
  const Index t_count = static_cast<Index>(frames.size()), ch = first.channels(), h = first.height();
  TemporalProfile out;
  out.image = Tensorf({1, ch, t_count, h});
  for (Index t = 0; t < t_count; ++t) {
    require_same_shape(first, frames[static_cast<size_t>(t)], "temporal_profile frame");
    for (Index c = 0; c < ch; ++c)
      for (Index y = 0; y < h; ++y) out.image(0, c, t, y) = frames[static_cast<size_t>(t)](0, c, y, column);
  }
  if (t_count < 2) return out;
  double acc = 0.0;
  for (Index c = 0; c < ch; ++c)
    for (Index t = 1; t < t_count; ++t)
      for (Index y = 0; y < h; ++y)
        acc += std::abs(static_cast<double>(out.image(0, c, t, y)) - static_cast<double>(out.image(0, c, t - 1, y)));
  out.score = acc / static_cast<double>(ch * (t_count - 1) * h);
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows, Convention convention) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "# convention=" << to_string(convention) << " border_crop=0\n";
  out << "clip,frame,psnr,ssim\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.clip << ',';
    if (r.frame < 0) out << "mean"; else out << r.frame;
    out << ',';
    if (std::isinf(r.psnr)) out << "inf"; else out << r.psnr;
    out << ',' << r.ssim << '\n';
  }
}

// ---- PNG IO --------------------------------------------------------------

Tensorf load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("16-bit PNG not supported (8-bit only): " + path.string());
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const Index h = image.height, w = image.width;
  Tensorf out({1, 3, h, w});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < 3; ++c) out(0, c, y, x) = static_cast<float>(buf[static_cast<size_t>((y * w + x) * 3 + c)]) / 255.0f;
  return out;
}

void save_png(const std::filesystem::path& path, const Tensorf& image_t) {
  require_nchw(image_t, "save_png");
  if (image_t.batch() != 1 || (image_t.channels() != 3 && image_t.channels() != 1)) {
    throw DimensionError("save_png: expected 1 x 3 x H x W or 1 x 1 x H x W, got " + shape_string(image_t.shape()));
  }
  const Index h = image_t.height(), w = image_t.width(), ch = image_t.channels();
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(static_cast<size_t>(h * w * ch));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < ch; ++c) {
        const float v = std::clamp(image_t(0, c, y, x), 0.0f, 1.0f);
        buf[static_cast<size_t>((y * w + x) * ch + c)] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw FormatError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::string frame_filename(size_t index) {
  std::ostringstream s;
  s << std::setw(8) << std::setfill('0') << index << ".png";
  return s.str();
}

Clip load_clip_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  static const std::regex pattern(R"(^(\d{8})\.png$)");
  std::map<long, std::filesystem::path> numbered;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pattern)) numbered.emplace(std::stol(m[1].str()), entry.path());
  }
  if (numbered.empty()) throw FormatError("no numbered PNG frames in " + dir.string());
  Clip clip;
  clip.id = dir.filename().string();
  if (clip.id.empty()) clip.id = dir.parent_path().filename().string();
  clip.source = dir.string();
  long expect = 0;
  for (const auto& [index, path] : numbered) {
    if (index != expect) throw FormatError("missing frame " + frame_filename(static_cast<size_t>(expect)) + " in " + dir.string());
    Tensorf frame = load_png(path);
    if (!clip.frames.empty() && frame.shape() != clip.frames.front().shape()) {
      throw FormatError("frame " + path.filename().string() + " has size " + shape_string(frame.shape()) +
                        ", expected " + shape_string(clip.frames.front().shape()));
    }
    clip.frames.push_back(std::move(frame));
    ++expect;
  }
  return clip;
}

void save_clip_dir(const Clip& clip, const std::filesystem::path& dir) {
  clip.validate();
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < clip.frames.size(); ++i) save_png(dir / frame_filename(i), clip.frames[i]);
}

#define VSRPP_INSTANTIATE_DATA(T)                                                           \
  template Tensor<T> imresize(const Tensor<T>&, Index, Index, double);                      \
  template Tensor<T> degrade_bi(const Tensor<T>&, int);                                     \
  template Tensor<T> gaussian_blur(const Tensor<T>&, double, int);                          \
  template Tensor<T> degrade_bd(const Tensor<T>&, double, int, int);                        \
  template Tensor<T> degrade(const Tensor<T>&, const DegradationSpec&);                     \
  template Tensor<T> upsample_bicubic(const Tensor<T>&, int);                               \
  template Tensor<T> rgb_to_y(const Tensor<T>&);                                            \
  template double psnr(const Tensor<T>&, const Tensor<T>&, Convention);                     \
  template double ssim(const Tensor<T>&, const Tensor<T>&, Convention);

VSRPP_INSTANTIATE_DATA(float)
VSRPP_INSTANTIATE_DATA(double)

}  // namespace vsrpp
