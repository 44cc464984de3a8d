#pragma once

#include "vsrpp/kernels.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vsrpp {

/// N x 2 x H x W displacement in LR pixels; channel 0 is x, channel 1 is y.
/// Warping a neighbour feature by s_{i->j} aligns it to frame i.
using FlowField = Tensorf;

enum class Direction { kBackward = 0, kForward = 1 };

const char* to_string(Direction d);

struct PyramidOptions {
  int levels = 3;
  int iters = 5;
  int window_radius = 2;
  /// Exhaustive integer search radius at the coarsest level (0 disables).
  int search_radius = 2;
  /// Levels whose smaller side would drop below this are skipped.
  Index min_level_size = 12;
  /// Per-vector magnitude cap in pixels.
  float max_magnitude = 32.0f;
  /// Smallest structure-tensor eigenvalue (per pixel, luma in [0,1]) that
  /// still counts as textured; below it the update is zero.
  double min_eigen = 1e-6;
};

/// Estimates s_{ref->nbr}: for each ref pixel x, nbr(x + s(x)) ~ ref(x).
class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual FlowField estimate(const Tensorf& ref, const Tensorf& nbr) const = 0;
  virtual bool trainable() const { return false; }
  virtual std::string name() const = 0;
};

class ZeroFlowProvider final : public FlowProvider {
 public:
  FlowField estimate(const Tensorf& ref, const Tensorf& nbr) const override;
  std::string name() const override { return "zero"; }
};

class PyramidalFlowProvider final : public FlowProvider {
 public:
  explicit PyramidalFlowProvider(PyramidOptions options = {}) : options_(options) {}
  FlowField estimate(const Tensorf& ref, const Tensorf& nbr) const override;
  std::string name() const override { return "pyramidal-lk"; }
  const PyramidOptions& options() const { return options_; }

 private:
  PyramidOptions options_;
};

/// Coarse-to-fine Lucas-Kanade over same-shape RGB or luma frames in [0,1].
FlowField estimate_pyramidal(const Tensorf& ref, const Tensorf& nbr, const PyramidOptions& options = {});

/// Scales each flow vector down to at most `max_magnitude` pixels.
void cap_flow_magnitude(FlowField& flow, float max_magnitude);

/// Zero flow matching a frame's batch and spatial size.
FlowField zero_flow_like(const Tensorf& frame);

/// Per-timestep flows for one propagation direction: first[i] is
/// s_{i->i-1} (forward) or s_{i->i+1} (backward), second[i] likewise for a
/// gap of two. Neighbours outside the sequence give exact zero flow.
struct FlowPairs {
  Direction direction = Direction::kForward;
  std::vector<FlowField> first;
  std::vector<FlowField> second;
};

class FlowCache;

FlowPairs flow_pairs(const std::vector<Tensorf>& frames, Direction direction, const FlowProvider& provider,
                     int order = 2, FlowCache* cache = nullptr);

/// Neighbour index of timestep i at gap p in a direction (may be out of range).
inline long neighbour_index(long i, int p, Direction d) { return d == Direction::kForward ? i - p : i + p; }

/// On-disk flow cache. One file per (clip, i, p, direction): eight
/// little-endian 32-bit integers (magic "VSRF", version, 2, H, W, direction,
/// i, p) followed by 2*H*W little-endian 32-bit floats.
class FlowCache {
 public:
  FlowCache(std::filesystem::path dir, std::string clip_id);

  std::filesystem::path path_for(long i, int p, Direction d) const;
  std::optional<FlowField> load(long i, int p, Direction d) const;
  void store(long i, int p, Direction d, const FlowField& flow) const;

 private:
  std::filesystem::path dir_;
  std::string clip_id_;
};

void write_flow_file(const std::filesystem::path& path, const FlowField& flow, Direction d, long i, int p);
FlowField read_flow_file(const std::filesystem::path& path, Direction* d = nullptr, long* i = nullptr,
                         int* p = nullptr);

}  // namespace vsrpp
