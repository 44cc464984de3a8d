#include "vsrpp/net.hpp"

#include "binary_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vsrpp {

const char* to_string(AlignmentMode m) {
  switch (m) {
    case AlignmentMode::kFlowGuidedDcn: return "flow_guided_dcn";
    case AlignmentMode::kFlowWarpOnly: return "flow_warp_only";
    case AlignmentMode::kNone: return "none";
  }
  return "?";
}

AlignmentMode parse_alignment_mode(const std::string& s) {
  if (s == "flow_guided_dcn") return AlignmentMode::kFlowGuidedDcn;
  if (s == "flow_warp_only") return AlignmentMode::kFlowWarpOnly;
  if (s == "none") return AlignmentMode::kNone;
  throw FormatError("unknown alignment_mode '" + s + "'");
}

void NetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (channels < 1) fail("channels must be positive");
  if (extraction_blocks < 0 || branch_blocks < 0) fail("block counts must be non-negative");
  if (order != 1 && order != 2) fail("order must be 1 or 2");
  if (num_branches < 2 || num_branches % 2 != 0) fail("num_branches must be even and at least 2");
  if (!use_grid && num_branches != 2) fail("use_grid=false requires num_branches=2");
  if (use_grid && num_branches < 4) fail("use_grid=true requires num_branches >= 4");
  if (upscale != 4) fail("only upscale=4 is supported");
  if (alignment_mode == AlignmentMode::kFlowGuidedDcn) alignment_spec().validate();
}

Direction NetConfig::branch_direction(int j) const {
  const bool same = (j % 2) == 1;
  if (same) return first_direction;
  return first_direction == Direction::kBackward ? Direction::kForward : Direction::kBackward;
}

NetConfig NetConfig::variant(const std::string& name, Index channels) {
  NetConfig c;
  c.channels = channels;
  if (name == "A") {
    c.alignment_mode = AlignmentMode::kFlowWarpOnly;
    c.order = 1;
    c.use_grid = false;
    c.num_branches = 2;
  } else if (name == "B") {
    c.order = 1;
    c.use_grid = false;
    c.num_branches = 2;
  } else if (name == "C") {
    c.use_grid = false;
    c.num_branches = 2;
  } else if (name != "full") {
    throw std::invalid_argument("unknown variant '" + name + "' (expected A, B, C or full)");
  }
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long parse_int(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw FormatError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config: " + key + " expects true or false, got '" + v + "'");
}

}  // namespace

NetConfig parse_config(const std::string& text) {
  NetConfig c;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw FormatError("config: duplicate key '" + key + "'");
    if (key == "channels") c.channels = parse_int(key, value);
    else if (key == "extraction_blocks") c.extraction_blocks = static_cast<int>(parse_int(key, value));
    else if (key == "branch_blocks") c.branch_blocks = static_cast<int>(parse_int(key, value));
    else if (key == "num_branches") c.num_branches = static_cast<int>(parse_int(key, value));
    else if (key == "order") c.order = static_cast<int>(parse_int(key, value));
    else if (key == "use_grid") c.use_grid = parse_bool(key, value);
    else if (key == "alignment_mode") c.alignment_mode = parse_alignment_mode(value);
    else if (key == "upscale") c.upscale = static_cast<int>(parse_int(key, value));
    else if (key == "dcn_groups") c.dcn_groups = parse_int(key, value);
    else if (key == "flow_refiner") c.flow_refiner = parse_bool(key, value);
    else if (key == "first_direction") {
      if (value == "backward") c.first_direction = Direction::kBackward;
      else if (value == "forward") c.first_direction = Direction::kForward;
      else throw FormatError("config: first_direction expects backward or forward, got '" + value + "'");
    } else {
      throw FormatError("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string config_to_text(const NetConfig& c) {
  std::ostringstream out;
  out << "channels=" << c.channels << "\n"
      << "extraction_blocks=" << c.extraction_blocks << "\n"
      << "branch_blocks=" << c.branch_blocks << "\n"
      << "num_branches=" << c.num_branches << "\n"
      << "order=" << c.order << "\n"
      << "use_grid=" << (c.use_grid ? "true" : "false") << "\n"
      << "alignment_mode=" << to_string(c.alignment_mode) << "\n"
      << "upscale=" << c.upscale << "\n"
      << "dcn_groups=" << c.dcn_groups << "\n"
      << "flow_refiner=" << (c.flow_refiner ? "true" : "false") << "\n"
      << "first_direction=" << to_string(c.first_direction) << "\n";
  return out.str();
}

NetConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void write_config(const std::filesystem::path& path, const NetConfig& config) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write config " + path.string());
  out << config_to_text(config);
}

ParamLayout describe(const NetConfig& config) {
  config.validate();
  const Index c = config.channels;
  ParamLayout layout;
  declare_residual_stack(layout, "extract", 3, c, config.extraction_blocks);
  for (int j = 1; j <= config.num_branches; ++j) {
    const std::string prefix = "branch" + std::to_string(j);
    if (config.alignment_mode == AlignmentMode::kFlowGuidedDcn) {
      declare_alignment(layout, prefix + ".align", config.alignment_spec());
    } else if (config.order == 2) {
      layout.add_conv(prefix + ".align.fuse", ConvSpec::same(2 * c, c));
    }
    declare_residual_stack(layout, prefix + ".res", 2 * c, c, config.branch_blocks);
  }
  layout.add_conv("recon.up1", ConvSpec::same(c, 4 * c));
  layout.add_conv("recon.up2", ConvSpec::same(c, 4 * c));
  layout.add_conv("recon.out", ConvSpec::same(c, 3));
  if (config.flow_refiner) {
    layout.add_conv("flow.conv1", ConvSpec::same(8, 16));
    layout.add_conv("flow.conv2", ConvSpec::same(16, 2), 0.0);
  }
  return layout;
}

ModelWeights init_weights(const NetConfig& config, std::uint64_t seed) { return describe(config).initialise(seed); }

Index param_count(const ModelWeights& weights) { return weights.param_count(); }

Index param_count(const NetConfig& config) { return describe(config).param_count(); }

void check_weights(const NetConfig& config, const ModelWeights& weights) {
  const ParamLayout layout = describe(config);
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& d : layout.decls()) {
    expected.insert(d.name);
    if (!weights.contains(d.name)) {
      problems.push_back(d.name + " (missing)");
    } else if (weights.at(d.name).shape() != d.shape) {
      problems.push_back(d.name + " (shape " + shape_string(weights.at(d.name).shape()) + ", expected " +
                         shape_string(d.shape) + ")");
    }
  }
  for (const auto& e : weights) {
    if (!expected.count(e.name)) problems.push_back(e.name + " (unexpected)");
  }
  if (problems.empty()) return;
  std::string msg = "weights incompatible with config:";
  for (size_t i = 0; i < problems.size(); ++i) msg += (i ? ", " : " ") + problems[i];
  throw FormatError(msg);
}

template <typename Scalar>
template <typename Other>
SequenceFlows<Other> SequenceFlows<Scalar>::cast() const {
  auto conv = [](const std::vector<Tensor<Scalar>>& v) {
    std::vector<Tensor<Other>> out;
    out.reserve(v.size());
    for (const auto& t : v) out.push_back(t.template cast<Other>());
    return out;
  };
  SequenceFlows<Other> out;
  out.backward = {conv(backward.first), conv(backward.second)};
  out.forward = {conv(forward.first), conv(forward.second)};
  return out;
}

SequenceFlows<float> compute_flows(const std::vector<Tensorf>& frames, const FlowProvider& provider, int order,
                                   FlowCache* cache) {
  SequenceFlows<float> out;
  for (Direction d : {Direction::kBackward, Direction::kForward}) {
    FlowPairs pairs = flow_pairs(frames, d, provider, order, cache);
    auto& dst = d == Direction::kBackward ? out.backward : out.forward;
    dst.first = std::move(pairs.first);
    dst.second = std::move(pairs.second);
  }
  return out;
}

template <typename Scalar>
void PropagationState<Scalar>::append(std::vector<Var<Scalar>> branch) {
  if (branch.size() != length()) throw DimensionError("propagation: branch length mismatch");
  branches_.push_back(std::move(branch));
}

template <typename Scalar>
std::vector<Var<Scalar>> extract_features(const NetConfig& config, ParamBinder<Scalar>& params,
                                          const std::vector<Var<Scalar>>& frames) {
  if (frames.empty()) throw DimensionError("extract_features: empty frame sequence");
  std::vector<Var<Scalar>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    require_same_shape(frames.front().value(), f.value(), "extract_features frame");
    if (f.value().channels() != 3) throw DimensionError("extract_features: frames must have 3 channels");
    out.push_back(apply_residual_stack(params, "extract", 3, config.channels, config.extraction_blocks, f));
  }
  return out;
}

template <typename Scalar>
RefinedFlows<Scalar> refine_flows(const NetConfig& config, ParamBinder<Scalar>& params,
                                  const std::vector<Var<Scalar>>& frames, const DirectionFlows<Scalar>& flows,
                                  Direction direction) {
  const size_t t = frames.size();
  if (flows.first.size() != t || (config.order == 2 && flows.second.size() != t)) {
    throw DimensionError("propagation: expected " + std::to_string(t) + " flows per gap in direction " +
                         to_string(direction));
  }
  RefinedFlows<Scalar> out;
  for (int p = 1; p <= config.order; ++p) {
    const auto& src = p == 1 ? flows.first : flows.second;
    auto& dst = p == 1 ? out.first : out.second;
    for (size_t i = 0; i < t; ++i) {
      Var<Scalar> s = Var<Scalar>::constant(src[i]);
      const long nb = neighbour_index(static_cast<long>(i), p, direction);
      if (config.flow_refiner && nb >= 0 && nb < static_cast<long>(t)) {
        Var<Scalar> in = concat<Scalar>({frames[i], frames[static_cast<size_t>(nb)], s});
        Var<Scalar> h = leaky_relu(apply_conv(params, "flow.conv1", ConvSpec::same(8, 16), in));
        s = s + apply_conv(params, "flow.conv2", ConvSpec::same(16, 2), h);
      }
      dst.push_back(s);
    }
  }
  return out;
}

namespace {

template <typename Scalar>
Var<Scalar> align_step(const NetConfig& config, ParamBinder<Scalar>& params, const std::string& prefix,
                       const Var<Scalar>& anchor, const Var<Scalar>& prev1, const Var<Scalar>& prev2,
                       const Var<Scalar>& s1, const Var<Scalar>& s2) {
  const Index c = config.channels;
  switch (config.alignment_mode) {
    case AlignmentMode::kFlowGuidedDcn:
      if (config.order == 1) return align_first_order(params, prefix, config.alignment_spec(), anchor, prev1, s1);
      return align_second_order(params, prefix, config.alignment_spec(), anchor, prev1, prev2, s1, s2);
    case AlignmentMode::kFlowWarpOnly:
      if (config.order == 1) return warp(prev1, s1);
      return apply_conv(params, prefix + ".fuse", ConvSpec::same(2 * c, c), concat<Scalar>({warp(prev1, s1), warp(prev2, s2)}));
    case AlignmentMode::kNone:
      if (config.order == 1) return prev1;
      return apply_conv(params, prefix + ".fuse", ConvSpec::same(2 * c, c), concat<Scalar>({prev1, prev2}));
  }
  throw std::logic_error("unreachable alignment mode");
}

}  // namespace

template <typename Scalar>
void propagate_branch(const NetConfig& config, ParamBinder<Scalar>& params, PropagationState<Scalar>& state, int j,
                      const RefinedFlows<Scalar>& flows) {
  if (j != state.completed() + 1) {
    throw UsageError("propagate_branch: branch " + std::to_string(j) + " requested after " +
                     std::to_string(state.completed()) + " completed");
  }
  if (j > config.num_branches) throw UsageError("propagate_branch: branch index beyond num_branches");
  const long t = static_cast<long>(state.length());
  if (static_cast<long>(flows.first.size()) != t || (config.order == 2 && static_cast<long>(flows.second.size()) != t)) {
    throw DimensionError("propagate_branch: flow count does not match sequence length");
  }
  const Direction dir = config.branch_direction(j);
  const std::string prefix = "branch" + std::to_string(j);
  const auto& anchors = state.branch(0);
  const auto& below = state.branch(j - 1);
  const Tensor<Scalar> zeros(anchors.front().shape());
  const Var<Scalar> zero = Var<Scalar>::constant(zeros);

  std::vector<Var<Scalar>> current(static_cast<size_t>(t));
  auto fetch = [&](long idx) { return idx >= 0 && idx < t ? current[static_cast<size_t>(idx)] : zero; };
  for (long step = 0; step < t; ++step) {
    const long i = dir == Direction::kForward ? step : t - 1 - step;
    const size_t ui = static_cast<size_t>(i);
    Var<Scalar> prev1 = fetch(neighbour_index(i, 1, dir));
    Var<Scalar> prev2, s2;
    if (config.order == 2) {
      prev2 = fetch(neighbour_index(i, 2, dir));
      s2 = flows.second[ui];
      ++state.gap2_reads;
    }
    Var<Scalar> aligned =
        align_step(config, params, prefix + ".align", anchors[ui], prev1, prev2, flows.first[ui], s2);
    Var<Scalar> fused = concat<Scalar>({below[ui], aligned});
    current[ui] = aligned + apply_residual_stack(params, prefix + ".res", 2 * config.channels, config.channels,
                                                 config.branch_blocks, fused);
  }
  state.append(std::move(current));
}

template <typename Scalar>
std::vector<Var<Scalar>> reconstruct(const NetConfig& config, ParamBinder<Scalar>& params,
                                     const std::vector<Var<Scalar>>& features, const std::vector<Var<Scalar>>& frames) {
  if (features.size() != frames.size()) throw DimensionError("reconstruct: feature and frame counts differ");
  const Index c = config.channels;
  std::vector<Var<Scalar>> out;
  out.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    Var<Scalar> h = leaky_relu(pixel_shuffle(apply_conv(params, "recon.up1", ConvSpec::same(c, 4 * c), features[i]), 2));
    h = leaky_relu(pixel_shuffle(apply_conv(params, "recon.up2", ConvSpec::same(c, 4 * c), h), 2));
    h = apply_conv(params, "recon.out", ConvSpec::same(c, 3), h);
    const Tensor<Scalar>& lr = frames[i].value();
    Var<Scalar> base = Var<Scalar>::constant(resize_bilinear(lr, lr.height() * config.upscale, lr.width() * config.upscale));
    out.push_back(h + base);
  }
  return out;
}

template <typename Scalar>
std::vector<Var<Scalar>> forward_graph(const NetConfig& config, ParamBinder<Scalar>& params,
                                       const std::vector<Var<Scalar>>& frames, const SequenceFlows<Scalar>& flows,
                                       PropagationState<Scalar>* state) {
  config.validate();
  PropagationState<Scalar> local(extract_features(config, params, frames));
  PropagationState<Scalar>& st = state ? (*state = std::move(local)) : local;
  RefinedFlows<Scalar> refined[2];
  bool have[2] = {false, false};
  for (int j = 1; j <= config.num_branches; ++j) {
    const Direction d = config.branch_direction(j);
    const int k = static_cast<int>(d);
    if (!have[k]) {
      refined[k] = refine_flows(config, params, frames, flows.get(d), d);
      have[k] = true;
    }
    propagate_branch(config, params, st, j, refined[k]);
  }
  return reconstruct(config, params, st.last(), frames);
}

std::vector<Tensorf> forward(const NetConfig& config, const ModelWeights& weights, const std::vector<Tensorf>& frames,
                             const SequenceFlows<float>& flows) {
  ParamBinder<float> params(weights);
  std::vector<Varf> in;
  in.reserve(frames.size());
  for (const auto& f : frames) in.push_back(Varf::constant(f));
  std::vector<Tensorf> out;
  for (auto& v : forward_graph(config, params, in, flows)) out.push_back(v.value());
  return out;
}

std::vector<Tensorf> forward(const NetConfig& config, const ModelWeights& weights, const std::vector<Tensorf>& frames,
                             const FlowProvider& provider, FlowCache* cache) {
  config.validate();
  return forward(config, weights, frames, compute_flows(frames, provider, config.order, cache));
}

namespace {
constexpr char kWeightMagic[4] = {'V', 'S', 'R', 'W'};
constexpr std::uint32_t kWeightVersion = 1;
}  // namespace

void write_weights(std::ostream& os, const ModelWeights& weights) {
  os.write(kWeightMagic, 4);
  detail::write_le(os, kWeightVersion);
  detail::write_le(os, static_cast<std::uint32_t>(weights.size()));
  for (const auto& e : weights) {
    detail::write_le(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::write_le(os, static_cast<std::uint32_t>(e.value.rank()));
    for (Index d : e.value.shape()) detail::write_le(os, static_cast<std::uint64_t>(d));
    for (Index k = 0; k < e.value.size(); ++k) detail::write_f32(os, e.value[k]);
  }
  if (!os) throw FormatError("weight write failed");
}

ModelWeights read_weights(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kWeightMagic, 4)) {
    throw FormatError("not a VSRW weight file");
  }
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kWeightVersion) throw FormatError("unsupported weight file version " + std::to_string(version));
  const auto count = detail::read_le<std::uint32_t>(is);
  ModelWeights weights;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = detail::read_le<std::uint32_t>(is);
    if (len == 0 || len > 4096) throw FormatError("implausible tensor name length " + std::to_string(len));
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("unexpected end of file");
    const auto rank = detail::read_le<std::uint32_t>(is);
    if (rank > 8) throw FormatError("implausible rank for '" + name + "'");
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      const auto e = detail::read_le<std::uint64_t>(is);
      if (e > (1u << 30)) throw FormatError("implausible extent for '" + name + "'");
      d = static_cast<Index>(e);
      total *= e;
      if (total > (1ull << 32)) throw FormatError("tensor '" + name + "' too large");
    }
    Tensorf value(shape);
    for (Index k = 0; k < value.size(); ++k) value[k] = detail::read_f32(is);
    if (weights.contains(name)) throw FormatError("duplicate tensor '" + name + "'");
    weights.add(std::move(name), std::move(value));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after weight data");
  return weights;
}

void save_weights(const std::filesystem::path& path, const ModelWeights& weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_weights(out, weights);
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_weights(in);
}

#define VSRPP_INSTANTIATE_NET(T)                                                                               \
  template class PropagationState<T>;                                                                          \
  template std::vector<Var<T>> extract_features(const NetConfig&, ParamBinder<T>&, const std::vector<Var<T>>&); \
  template RefinedFlows<T> refine_flows(const NetConfig&, ParamBinder<T>&, const std::vector<Var<T>>&,         \
                                        const DirectionFlows<T>&, Direction);                                  \
  template void propagate_branch(const NetConfig&, ParamBinder<T>&, PropagationState<T>&, int,                 \
                                 const RefinedFlows<T>&);                                                      \
  template std::vector<Var<T>> reconstruct(const NetConfig&, ParamBinder<T>&, const std::vector<Var<T>>&,      \
                                           const std::vector<Var<T>>&);                                        \
  template std::vector<Var<T>> forward_graph(const NetConfig&, ParamBinder<T>&, const std::vector<Var<T>>&,    \
                                             const SequenceFlows<T>&, PropagationState<T>*);

VSRPP_INSTANTIATE_NET(float)
VSRPP_INSTANTIATE_NET(double)

template SequenceFlows<double> SequenceFlows<float>::cast<double>() const;
template SequenceFlows<float> SequenceFlows<float>::cast<float>() const;

}  // namespace vsrpp
