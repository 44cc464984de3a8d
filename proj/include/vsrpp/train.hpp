#pragma once

// Patch-based training: Charbonnier loss, two-group Adam with a cosine
// schedule and an initial window in which the flow refiner is frozen.

#include "vsrpp/data.hpp"
#include "vsrpp/net.hpp"
#include "vsrpp/optim.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vsrpp {

struct TrainConfig {
  std::int64_t steps = 500;
  std::int64_t freeze_steps = 50;
  std::uint64_t seed = 0;
  int batch = 1;
  /// Frames per training sequence.
  int frames = 5;
  /// LR patch side; HR patches are 4x larger.
  Index lr_patch = 16;
  double lr_main = 1e-3;
  double lr_flow = 2.5e-4;
  double charbonnier_eps = 1e-8;
  int log_every = 50;
  /// Fixed batches scored before and after training.
  int probe_batches = 4;

  static TrainConfig toy();
  /// Paper-scale schedule: 600000 steps, 5000 frozen, lr 1e-4 / 2.5e-5,
  /// batch 8, 30 frames of 64 x 64.
  static TrainConfig paper();

  void validate() const;
};

/// Degraded clips with flows precomputed over whole clips.
struct TrainingSet {
  std::vector<Clip> hr;
  std::vector<Clip> lr;
  std::vector<SequenceFlows<float>> flows;
};

TrainingSet make_training_set(std::vector<Clip> hr, const DegradationSpec& degradation, const FlowProvider& provider,
                              int order = 2);

struct Batch {
  std::vector<Tensorf> lr;
  std::vector<Tensorf> hr;
  SequenceFlows<float> flows;
  std::uint64_t seed = 0;
};

/// Random clip, temporal window and spatial crop, deterministic in `seed`.
/// Flows to neighbours outside the window are zero.
Batch sample_batch(const TrainingSet& data, const TrainConfig& config, std::uint64_t seed);

std::uint64_t batch_seed(std::uint64_t run_seed, std::int64_t step);

/// Mean Charbonnier loss of the network on a batch.
double batch_loss(const NetConfig& net, const ModelWeights& weights, const Batch& batch, double eps = 1e-8);

struct TrainLog {
  std::vector<double> step_loss;
  double probe_initial = 0.0;
  double probe_final = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  TrainLog log;
};

using StepCallback = std::function<void(std::int64_t step, double loss, double lr)>;

/// Throws NonFiniteError naming the step and batch seed if the loss or an
/// activation stops being finite.
TrainResult train(const NetConfig& net, const TrainConfig& config, const TrainingSet& data,
                  const StepCallback& on_log = {});

/// Continues from given weights; `initial` must match `net`.
TrainResult train_from(const NetConfig& net, const TrainConfig& config, const TrainingSet& data, ModelWeights initial,
                       const StepCallback& on_log = {});

// ---- toy protocol ----------------------------------------------------------

/// Synthetic training and held-out data shared by the CLI and the
/// acceptance run.
struct ToyProtocol {
  SynthKind kind = SynthKind::kTranslate;
  int train_clips = 8;
  int train_frames = 10;
  Index train_size = 64;
  std::uint64_t train_seed = 100;
  int eval_frames = 7;
  Index eval_size = 128;
  std::uint64_t eval_seed = 999;
};

/// Reduced-width (16 channel) network with the flow refiner, for toy runs.
NetConfig toy_net(const std::string& variant = "full");

std::vector<Clip> toy_training_clips(const ToyProtocol& protocol);
Clip toy_eval_clip(const ToyProtocol& protocol);

struct EvalSummary {
  double psnr_y = 0.0;
  double ssim_y = 0.0;
  double bicubic_psnr_y = 0.0;
  double bilinear_psnr_y = 0.0;
  /// Temporal-profile scores at the centre column.
  double profile_score = 0.0;
  double bicubic_profile_score = 0.0;
  double gt_profile_score = 0.0;
  /// Mean |d_t(out) - d_t(gt)| along the profile; informational.
  double profile_gt_deviation = 0.0;
  double bicubic_profile_gt_deviation = 0.0;
  std::vector<Tensorf> restored;
};

/// Degrades `gt` with BI, restores it and compares with per-frame bicubic.
EvalSummary evaluate_clip(const NetConfig& net, const ModelWeights& weights, const Clip& gt,
                          const FlowProvider& provider);

}  // namespace vsrpp
