#pragma once

// The propagation network: per-frame feature extraction, alternating
// backward/forward propagation branches with second-order flow-guided
// deformable alignment, and a pixel-shuffle reconstruction head.
//
// Parameter names:
//   extract.conv_in, extract.block<b>.conv{1,2}
//   branch<j>.align.{conv0,conv1,conv2,offset,mask,dcn}   (flow-guided DCN)
//   branch<j>.align.fuse                                  (other modes, order 2)
//   branch<j>.res.conv_in, branch<j>.res.block<b>.conv{1,2}
//   recon.up1, recon.up2, recon.out
//   flow.conv1, flow.conv2                                (optional refiner)
// each with .weight and .bias; branches are numbered from 1.

#include "vsrpp/align.hpp"
#include "vsrpp/flow.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vsrpp {

enum class AlignmentMode { kFlowGuidedDcn, kFlowWarpOnly, kNone };

const char* to_string(AlignmentMode m);
AlignmentMode parse_alignment_mode(const std::string& s);

struct NetConfig {
  Index channels = 64;
  int extraction_blocks = 5;
  int branch_blocks = 7;
  int num_branches = 4;
  int order = 2;
  bool use_grid = true;
  AlignmentMode alignment_mode = AlignmentMode::kFlowGuidedDcn;
  int upscale = 4;
  Index dcn_groups = 16;
  /// Small trainable correction on top of the fixed flow estimator.
  bool flow_refiner = false;
  /// Direction of branch 1; later branches alternate.
  Direction first_direction = Direction::kBackward;

  void validate() const;
  Direction branch_direction(int j) const;
  AlignmentSpec alignment_spec() const { return {channels, dcn_groups, order}; }

  /// Ablation variants: "A" flow warping, first order, no grid; "B" adds
  /// flow-guided DCN; "C" adds second order; "full" adds grid propagation.
  static NetConfig variant(const std::string& name, Index channels = 64);

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// key=value lines, '#' starts a comment. Unknown keys are rejected.
NetConfig parse_config(const std::string& text);
std::string config_to_text(const NetConfig& config);
NetConfig read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const NetConfig& config);

ParamLayout describe(const NetConfig& config);
ModelWeights init_weights(const NetConfig& config, std::uint64_t seed);
Index param_count(const ModelWeights& weights);
Index param_count(const NetConfig& config);

/// Flows for both propagation directions.
template <typename Scalar>
struct DirectionFlows {
  std::vector<Tensor<Scalar>> first;
  std::vector<Tensor<Scalar>> second;
};

template <typename Scalar>
struct SequenceFlows {
  DirectionFlows<Scalar> backward;
  DirectionFlows<Scalar> forward;

  const DirectionFlows<Scalar>& get(Direction d) const { return d == Direction::kBackward ? backward : forward; }

  template <typename Other>
  SequenceFlows<Other> cast() const;
};

SequenceFlows<float> compute_flows(const std::vector<Tensorf>& frames, const FlowProvider& provider, int order,
                                   FlowCache* cache = nullptr);

/// Feature sequences of every branch; branches[0] holds the extracted
/// features. A branch is appended only once complete and is never modified
/// afterwards.
template <typename Scalar>
class PropagationState {
 public:
  explicit PropagationState(std::vector<Var<Scalar>> extracted) { branches_.push_back(std::move(extracted)); }

  const std::vector<Var<Scalar>>& branch(int j) const { return branches_.at(static_cast<size_t>(j)); }
  const std::vector<Var<Scalar>>& last() const { return branches_.back(); }
  int completed() const { return static_cast<int>(branches_.size()) - 1; }
  size_t length() const { return branches_.front().size(); }

  /// Number of times a feature two steps back was read.
  long gap2_reads = 0;

  void append(std::vector<Var<Scalar>> branch);

 private:
  std::vector<std::vector<Var<Scalar>>> branches_;
};

template <typename Scalar>
std::vector<Var<Scalar>> extract_features(const NetConfig& config, ParamBinder<Scalar>& params,
                                          const std::vector<Var<Scalar>>& frames);

/// Flows after the optional refiner; out-of-range neighbours keep zero flow.
template <typename Scalar>
struct RefinedFlows {
  std::vector<Var<Scalar>> first;
  std::vector<Var<Scalar>> second;
};

template <typename Scalar>
RefinedFlows<Scalar> refine_flows(const NetConfig& config, ParamBinder<Scalar>& params,
                                  const std::vector<Var<Scalar>>& frames, const DirectionFlows<Scalar>& flows,
                                  Direction direction);

/// Computes branch j (1-based) from branch j-1 and appends it.
template <typename Scalar>
void propagate_branch(const NetConfig& config, ParamBinder<Scalar>& params, PropagationState<Scalar>& state, int j,
                      const RefinedFlows<Scalar>& flows);

template <typename Scalar>
std::vector<Var<Scalar>> reconstruct(const NetConfig& config, ParamBinder<Scalar>& params,
                                     const std::vector<Var<Scalar>>& features, const std::vector<Var<Scalar>>& frames);

/// Full network over N x 3 x H x W frames in [0,1]; returns N x 3 x 4H x 4W.
template <typename Scalar>
std::vector<Var<Scalar>> forward_graph(const NetConfig& config, ParamBinder<Scalar>& params,
                                       const std::vector<Var<Scalar>>& frames, const SequenceFlows<Scalar>& flows,
                                       PropagationState<Scalar>* state = nullptr);

/// Inference with fixed weights.
std::vector<Tensorf> forward(const NetConfig& config, const ModelWeights& weights, const std::vector<Tensorf>& frames,
                             const SequenceFlows<float>& flows);
std::vector<Tensorf> forward(const NetConfig& config, const ModelWeights& weights, const std::vector<Tensorf>& frames,
                             const FlowProvider& provider, FlowCache* cache = nullptr);

/// "VSRW" weight files: version, count, then per tensor the name, rank,
/// extents and little-endian float32 data.
void save_weights(const std::filesystem::path& path, const ModelWeights& weights);
ModelWeights load_weights(const std::filesystem::path& path);
void write_weights(std::ostream& os, const ModelWeights& weights);
ModelWeights read_weights(std::istream& is);

/// Throws FormatError unless `weights` has exactly the tensors of `config`.
void check_weights(const NetConfig& config, const ModelWeights& weights);

}  // namespace vsrpp
