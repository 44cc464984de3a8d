#pragma once

// Clips, degradation models, procedural test clips and image metrics.
// Frames are 1 x 3 x H x W tensors with values in [0, 1].

#include "vsrpp/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace vsrpp {

/// Motion of frame t relative to frame 0, in HR pixels / radians.
struct FrameMotion {
  double dx = 0.0;
  double dy = 0.0;
  double angle = 0.0;
  double zoom = 1.0;
};

struct Clip {
  std::string id;
  std::string source;
  std::vector<Tensorf> frames;
  std::vector<FrameMotion> motion;

  Index height() const { return frames.at(0).height(); }
  Index width() const { return frames.at(0).width(); }
  void validate() const;
};

// ---- degradation ---------------------------------------------------------

enum class DegradeMode { kBI, kBD };

struct DegradationSpec {
  DegradeMode mode = DegradeMode::kBI;
  int scale = 4;
  double sigma = 1.6;
  int kernel_size = 13;
  double cubic_a = -0.5;

  void validate() const;
};

DegradeMode parse_degrade_mode(const std::string& s);

/// Cubic convolution kernel with parameter a.
double cubic_kernel(double x, double a = -0.5);

/// One output sample of a 1-D resampler: input taps and their weights.
struct ResampleTaps {
  std::vector<Index> index;
  std::vector<double> weight;
};

/// Bicubic resampling weights from `in` to `out` samples, imresize style:
/// output u (1-based) maps to x = u / s + 0.5 (1 - 1 / s), the kernel is
/// stretched by 1 / s when shrinking, weights are normalised and
/// out-of-range taps mirror symmetrically.
std::vector<ResampleTaps> bicubic_taps(Index in, Index out, double a = -0.5, bool antialias = true);

template <typename Scalar>
Tensor<Scalar> imresize(const Tensor<Scalar>& input, Index out_h, Index out_w, double a = -0.5);

template <typename Scalar>
Tensor<Scalar> degrade_bi(const Tensor<Scalar>& frame, int scale = 4);

/// Normalised, truncated 1-D Gaussian of odd `size`.
std::vector<double> gaussian_kernel(double sigma, int size);

/// Separable Gaussian blur with reflect-101 borders.
template <typename Scalar>
Tensor<Scalar> gaussian_blur(const Tensor<Scalar>& frame, double sigma, int size);

/// Blur, then keep every `scale`-th pixel starting at index 0.
template <typename Scalar>
Tensor<Scalar> degrade_bd(const Tensor<Scalar>& frame, double sigma = 1.6, int scale = 4, int size = 13);

template <typename Scalar>
Tensor<Scalar> degrade(const Tensor<Scalar>& frame, const DegradationSpec& spec);

Clip degrade_clip(const Clip& clip, const DegradationSpec& spec);

/// Per-frame bicubic upsampling by an integer factor.
template <typename Scalar>
Tensor<Scalar> upsample_bicubic(const Tensor<Scalar>& frame, int scale = 4);

// ---- synthetic clips -----------------------------------------------------

enum class SynthKind { kTranslate, kRotateZoom, kTextureNoise };

SynthKind parse_synth_kind(const std::string& s);
const char* to_string(SynthKind k);

struct SynthOptions {
  Index height = 64;
  Index width = 64;
  int components = 24;
  /// Highest spatial frequency in cycles per HR pixel.
  double max_frequency = 0.12;
  /// Largest per-frame translation in HR pixels.
  double max_speed = 3.0;
};

/// Deterministic procedural clip with known global motion. Content is a sum
/// of cosines, so translated frames are exact rather than resampled.
Clip synth_clip(SynthKind kind, int frames, std::uint64_t seed, const SynthOptions& options = {});

// ---- metrics -------------------------------------------------------------

enum class Convention { kRgb, kY };

Convention parse_convention(const std::string& s);
const char* to_string(Convention c);

/// Y on the [0, 1] scale: (16 + 65.481 R + 128.553 G + 24.966 B) / 255.
template <typename Scalar>
Tensor<Scalar> rgb_to_y(const Tensor<Scalar>& rgb);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Inputs are clamped to [0, 1]; identical inputs give +inf.
template <typename Scalar>
double psnr(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Convention convention = Convention::kY);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), mean over valid
/// window positions and channels.
template <typename Scalar>
double ssim(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Convention convention = Convention::kY);

struct TemporalProfile {
  /// 1 x C x frames x H.
  Tensorf image;
  /// Mean absolute difference between consecutive profile rows.
  double score = 0.0;
};

TemporalProfile temporal_profile(const std::vector<Tensorf>& frames, Index column);

struct MetricRow {
  std::string clip;
  /// Negative for a per-clip mean row.
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// CSV with a comment line naming the convention, then clip,frame,psnr,ssim.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows, Convention convention);

// ---- PNG IO --------------------------------------------------------------

Tensorf load_png(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void save_png(const std::filesystem::path& path, const Tensorf& image);

/// Frames 00000000.png, 00000001.png, ... with no gaps.
Clip load_clip_dir(const std::filesystem::path& dir);
void save_clip_dir(const Clip& clip, const std::filesystem::path& dir);
std::string frame_filename(size_t index);

}  // namespace vsrpp
