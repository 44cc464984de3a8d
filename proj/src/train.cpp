#include "vsrpp/train.hpp"

#include <cmath>
#include <random>

namespace vsrpp {

TrainConfig TrainConfig::toy() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.steps = 600000;
  c.freeze_steps = 5000;
  c.batch = 8;
  c.frames = 30;
  c.lr_patch = 64;
  c.lr_main = 1e-4;
  c.lr_flow = 2.5e-5;
  c.log_every = 1000;
  return c;
}

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("train: steps must be positive");
  if (freeze_steps < 0) throw std::invalid_argument("train: freeze_steps must be non-negative");
  if (batch < 1 || frames < 1 || lr_patch < 1) throw std::invalid_argument("train: batch, frames and patch must be positive");
  if (!(lr_main >= 0.0) || !(lr_flow >= 0.0)) throw std::invalid_argument("train: learning rates must be non-negative");
  if (!(charbonnier_eps > 0.0)) throw std::invalid_argument("train: charbonnier eps must be positive");
  if (probe_batches < 1) throw std::invalid_argument("train: probe_batches must be positive");
}

TrainingSet make_training_set(std::vector<Clip> hr, const DegradationSpec& degradation, const FlowProvider& provider,
                              int order) {
  if (hr.empty()) throw std::invalid_argument("training set needs at least one clip");
  TrainingSet set;
  for (auto& clip : hr) {
    Clip lr = degrade_clip(clip, degradation);
    set.flows.push_back(compute_flows(lr.frames, provider, order));
    set.lr.push_back(std::move(lr));
    set.hr.push_back(std::move(clip));
  }
  return set;
}

std::uint64_t batch_seed(std::uint64_t run_seed, std::int64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

Tensorf crop(const Tensorf& t, Index y0, Index x0, Index h, Index w) {
  Tensorf out({t.batch(), t.channels(), h, w});
  for (Index n = 0; n < t.batch(); ++n)
    for (Index c = 0; c < t.channels(); ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) out(n, c, y, x) = t(n, c, y0 + y, x0 + x);
  return out;
}

Tensorf stack_batch(const std::vector<Tensorf>& items) {
  const Tensorf& f = items.front();
  Tensorf out({static_cast<Index>(items.size()), f.channels(), f.height(), f.width()});
  const Index per = f.size();
  for (size_t b = 0; b < items.size(); ++b) out.array().segment(static_cast<Index>(b) * per, per) = items[b].array();
  return out;
}

}  // namespace

Batch sample_batch(const TrainingSet& data, const TrainConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index p = config.lr_patch, scale = data.hr.front().height() / data.lr.front().height();
  const size_t t_len = static_cast<size_t>(config.frames);
  // Per-item crops, stacked along the batch axis afterwards.
  std::vector<std::vector<Tensorf>> lr(t_len), hr(t_len);
  std::vector<std::vector<Tensorf>> flow_parts[2][2];
  for (auto& d : flow_parts)
    for (auto& g : d) g.resize(t_len);

  for (int b = 0; b < config.batch; ++b) {
    const size_t ci = std::uniform_int_distribution<size_t>(0, data.lr.size() - 1)(rng);
    const Clip& lclip = data.lr[ci];
    const Clip& hclip = data.hr[ci];
    if (lclip.frames.size() < t_len || lclip.height() < p || lclip.width() < p) {
      throw DimensionError("sample_batch: clip '" + lclip.id + "' smaller than the requested window");
    }
    const size_t start = std::uniform_int_distribution<size_t>(0, lclip.frames.size() - t_len)(rng);
    const Index y0 = std::uniform_int_distribution<Index>(0, lclip.height() - p)(rng);
    const Index x0 = std::uniform_int_distribution<Index>(0, lclip.width() - p)(rng);
    for (size_t k = 0; k < t_len; ++k) {
      lr[k].push_back(crop(lclip.frames[start + k], y0, x0, p, p));
      hr[k].push_back(crop(hclip.frames[start + k], y0 * scale, x0 * scale, p * scale, p * scale));
      for (Direction d : {Direction::kBackward, Direction::kForward}) {
        const DirectionFlows<float>& full = data.flows[ci].get(d);
        for (int gap = 1; gap <= 2; ++gap) {
          const auto& src = gap == 1 ? full.first : full.second;
          const long j = neighbour_index(static_cast<long>(k), gap, d);
          Tensorf f = (src.empty() || j < 0 || j >= static_cast<long>(t_len))
                          ? Tensorf({1, 2, p, p})
                          : crop(src[start + k], y0, x0, p, p);
          flow_parts[static_cast<int>(d)][gap - 1][k].push_back(std::move(f));
        }
      }
    }
  }

  Batch batch;
  batch.seed = seed;
  for (size_t k = 0; k < t_len; ++k) {
    batch.lr.push_back(stack_batch(lr[k]));
    batch.hr.push_back(stack_batch(hr[k]));
  }
  for (Direction d : {Direction::kBackward, Direction::kForward}) {
    DirectionFlows<float>& dst = d == Direction::kBackward ? batch.flows.backward : batch.flows.forward;
    for (size_t k = 0; k < t_len; ++k) {
      dst.first.push_back(stack_batch(flow_parts[static_cast<int>(d)][0][k]));
      dst.second.push_back(stack_batch(flow_parts[static_cast<int>(d)][1][k]));
    }
  }
  return batch;
}

namespace {

Varf sequence_loss(const NetConfig& net, ParamBinder<float>& params, const Batch& batch, double eps) {
  std::vector<Varf> in;
  for (const auto& f : batch.lr) in.push_back(Varf::constant(f));
  const std::vector<Varf> out = forward_graph(net, params, in, batch.flows);
  Varf total;
  for (size_t t = 0; t < out.size(); ++t) {
    Varf l = charbonnier(out[t], Varf::constant(batch.hr[t]), static_cast<float>(eps));
    total = total ? total + l : l;
  }
  return scale(total, 1.0f / static_cast<float>(out.size()));
}

double probe_loss(const NetConfig& net, const ModelWeights& weights, const std::vector<Batch>& probes, double eps) {
  double acc = 0.0;
  for (const auto& b : probes) acc += batch_loss(net, weights, b, eps);
  return acc / static_cast<double>(probes.size());
}

}  // namespace

double batch_loss(const NetConfig& net, const ModelWeights& weights, const Batch& batch, double eps) {
  ParamBinder<float> params(weights);
  return static_cast<double>(sequence_loss(net, params, batch, eps).value()[0]);
}

TrainResult train(const NetConfig& net, const TrainConfig& config, const TrainingSet& data,
                  const StepCallback& on_log) {
  return train_from(net, config, data, init_weights(net, config.seed), on_log);
}

TrainResult train_from(const NetConfig& net, const TrainConfig& config, const TrainingSet& data, ModelWeights initial,
                       const StepCallback& on_log) {
  config.validate();
  net.validate();
  check_weights(net, initial);
  TrainResult result;
  result.weights = std::move(initial);

  std::vector<Batch> probes;
  for (int k = 0; k < config.probe_batches; ++k) probes.push_back(sample_batch(data, config, batch_seed(~config.seed, k)));
  result.log.probe_initial = probe_loss(net, result.weights, probes, config.charbonnier_eps);

  OptimizerState opt = OptimizerState::two_group(config.lr_main, config.lr_flow);
  for (std::int64_t step = 0; step < config.steps; ++step) {
    freeze_flow(opt, step, config.freeze_steps);
    const std::uint64_t seed = batch_seed(config.seed, step);
    const Batch batch = sample_batch(data, config, seed);
    Graph<float> graph;
    ParamBinder<float> params(result.weights, &graph, [&](const std::string& name) { return opt.trainable(name); });
    double loss = 0.0;
    GradientMap<float> grads;
    try {
      Varf l = sequence_loss(net, params, batch, config.charbonnier_eps);
      loss = static_cast<double>(l.value()[0]);
      if (!std::isfinite(loss)) throw NonFiniteError("loss is " + std::to_string(loss));
      grads = graph.backward(l);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("training diverged at step " + std::to_string(step) + " (batch seed " +
                           std::to_string(seed) + "): " + e.what());
    }
    std::vector<double> lr_now;
    for (const auto& g : opt.groups()) lr_now.push_back(cosine_lr(step, config.steps, g.base_lr));
    opt.adam_step(result.weights, grads, lr_now);
    result.log.step_loss.push_back(loss);
    if (on_log && (step % config.log_every == 0 || step + 1 == config.steps)) on_log(step, loss, lr_now.front());
  }
  result.log.probe_final = probe_loss(net, result.weights, probes, config.charbonnier_eps);
  return result;
}

NetConfig toy_net(const std::string& variant) {
  NetConfig c = NetConfig::variant(variant, 16);
  c.flow_refiner = true;
  return c;
}

std::vector<Clip> toy_training_clips(const ToyProtocol& protocol) {
  SynthOptions options;
  options.height = options.width = protocol.train_size;
  std::vector<Clip> clips;
  for (int k = 0; k < protocol.train_clips; ++k) {
    clips.push_back(synth_clip(protocol.kind, protocol.train_frames, protocol.train_seed + static_cast<std::uint64_t>(k), options));
  }
  return clips;
}

Clip toy_eval_clip(const ToyProtocol& protocol) {
  SynthOptions options;
  options.height = options.width = protocol.eval_size;
  return synth_clip(protocol.kind, protocol.eval_frames, protocol.eval_seed, options);
}

namespace {

double profile_deviation(const TemporalProfile& a, const TemporalProfile& b) {
  const Index t = a.image.dim(2);
  if (t < 2) return 0.0;
  double acc = 0.0;
  Index count = 0;
  for (Index c = 0; c < a.image.dim(1); ++c)
    for (Index k = 1; k < t; ++k)
      for (Index y = 0; y < a.image.dim(3); ++y) {
        const double da = a.image(0, c, k, y) - a.image(0, c, k - 1, y);
        const double db = b.image(0, c, k, y) - b.image(0, c, k - 1, y);
        acc += std::abs(da - db);
        ++count;
      }
  return acc / static_cast<double>(count);
}

}  // namespace

EvalSummary evaluate_clip(const NetConfig& net, const ModelWeights& weights, const Clip& gt,
                          const FlowProvider& provider) {
  gt.validate();
  const Clip lr = degrade_clip(gt, {});
  EvalSummary s;
  s.restored = forward(net, weights, lr.frames, provider);
  std::vector<Tensorf> bicubic;
  const double n = static_cast<double>(gt.frames.size());
  for (size_t t = 0; t < gt.frames.size(); ++t) {
    Tensorf out = s.restored[t];
    out.array() = out.array().max(0.0f).min(1.0f);
    s.restored[t] = out;
    bicubic.push_back(upsample_bicubic(lr.frames[t]));
    bicubic.back().array() = bicubic.back().array().max(0.0f).min(1.0f);
    s.psnr_y += psnr(out, gt.frames[t]) / n;
    s.ssim_y += ssim(out, gt.frames[t]) / n;
    s.bicubic_psnr_y += psnr(bicubic.back(), gt.frames[t]) / n;
    s.bilinear_psnr_y += psnr(resize_bilinear(lr.frames[t], gt.height(), gt.width()), gt.frames[t]) / n;
  }
  const Index column = gt.width() / 2;
  const TemporalProfile p_net = temporal_profile(s.restored, column);
  const TemporalProfile p_bic = temporal_profile(bicubic, column);
  const TemporalProfile p_gt = temporal_profile(gt.frames, column);
  s.profile_score = p_net.score;
  s.bicubic_profile_score = p_bic.score;
  s.gt_profile_score = p_gt.score;
  s.profile_gt_deviation = profile_deviation(p_net, p_gt);
  s.bicubic_profile_gt_deviation = profile_deviation(p_bic, p_gt);
  return s;
}

}  // namespace vsrpp
