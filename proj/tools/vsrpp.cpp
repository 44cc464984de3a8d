// vsrpp: degrade, train, restore, evaluate and inspect video SR runs.

#include "manifest.hpp"

#include "vsrpp/runtime.hpp"
#include "vsrpp/train.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace vsrpp;
using cli::RunManifest;

namespace {

struct Paths {
  std::string in, out, gt, pred, weights, config, data = "synthetic:translate", manifest, flow_cache;
};

fs::path manifest_path(const Paths& p, const fs::path& out) {
  if (!p.manifest.empty()) return p.manifest;
  if (fs::is_directory(out)) return out / "manifest.jsonl";
  return fs::path(out.string() + ".manifest.jsonl");
}

void record_config(RunManifest& m, const NetConfig& net) {
  m.record()["config"] = config_to_text(net);
  m.record()["param_count"] = param_count(net);
}

std::vector<Clip> load_training_clips(const std::string& data) {
  const std::string prefix = "synthetic:";
  if (data.rfind(prefix, 0) == 0) {
    ToyProtocol protocol;
    protocol.kind = parse_synth_kind(data.substr(prefix.size()));
    return toy_training_clips(protocol);
  }
  const fs::path dir(data);
  if (!fs::is_directory(dir)) throw FormatError("training data not found: " + data);
  if (fs::exists(dir / frame_filename(0))) return {load_clip_dir(dir)};
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<Clip> clips;
  for (const auto& d : subdirs) clips.push_back(load_clip_dir(d));
  if (clips.empty()) throw FormatError("no clips under " + data);
  return clips;
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

int cmd_degrade(const Paths& p, const DegradationSpec& spec, RunManifest& m) {
  spec.validate();
  const Clip hr = load_clip_dir(p.in);
  const Clip lr = degrade_clip(hr, spec);
  save_clip_dir(lr, p.out);
  std::cout << "degraded " << lr.frames.size() << " frames " << hr.width() << "x" << hr.height() << " -> "
            << lr.width() << "x" << lr.height() << " (" << (spec.mode == DegradeMode::kBI ? "BI" : "BD") << ")\n";
  m.record()["degradation"] = {{"mode", spec.mode == DegradeMode::kBI ? "BI" : "BD"},
                               {"scale", spec.scale},
                               {"sigma", spec.sigma},
                               {"kernel_size", spec.kernel_size}};
  m.append_to(manifest_path(p, p.out));
  return 0;
}

void print_paper_preset() {
  const TrainConfig c = TrainConfig::paper();
  std::cout << "preset paper: lr_main=" << c.lr_main << " lr_flow=" << c.lr_flow << " steps=" << c.steps
            << " freeze_steps=" << c.freeze_steps << " batch=" << c.batch << " frames=" << c.frames
            << " lr_patch=" << c.lr_patch << "\n"
            << "warning: paper-scale training is far beyond desk-scale compute; not running.\n";
}

int cmd_train(const Paths& p, TrainConfig tc, const std::string& preset, DegradeMode mode, RunManifest& m) {
  if (preset == "paper") {
    print_paper_preset();
    return 0;
  }
  if (preset != "toy") throw std::invalid_argument("unknown preset '" + preset + "' (expected toy or paper)");
  if (p.out.empty()) throw std::invalid_argument("--out is required");
  const NetConfig net = p.config.empty() ? toy_net() : read_config(p.config);
  DegradationSpec deg;
  deg.mode = mode;
  PyramidalFlowProvider provider;
  const TrainingSet data = make_training_set(load_training_clips(p.data), deg, provider, net.order);
  std::cout << "training " << param_count(net) << " parameters for " << tc.steps << " steps (seed " << tc.seed
            << ")\n";
  const TrainResult r = train(net, tc, data, [](std::int64_t step, double loss, double lr) {
    std::cout << "step " << step << " loss " << std::setprecision(6) << loss << " lr " << lr << "\n" << std::flush;
  });
  save_weights(p.out, r.weights);
  write_config(p.out + ".cfg", net);
  std::cout << "probe loss " << r.log.probe_initial << " -> " << r.log.probe_final << "\nwrote " << p.out << "\n";
  record_config(m, net);
  m.record()["seed"] = tc.seed;
  m.record()["steps"] = tc.steps;
  m.record()["data"] = p.data;
  m.record()["weights_hash"] = cli::git_blob_hash(p.out);
  m.record()["metrics"] = {{"probe_loss_initial", r.log.probe_initial},
                           {"probe_loss_final", r.log.probe_final},
                           {"last_step_loss", r.log.step_loss.back()}};
  m.append_to(manifest_path(p, p.out));
  return 0;
}

int cmd_restore(const Paths& p, RunManifest& m) {
  const NetConfig net = read_config(p.config);
  const ModelWeights weights = load_weights(p.weights);
  check_weights(net, weights);
  const Clip lr = load_clip_dir(p.in);
  PyramidalFlowProvider provider;
  std::unique_ptr<FlowCache> cache;
  if (!p.flow_cache.empty()) cache = std::make_unique<FlowCache>(p.flow_cache, lr.id);
  Clip out;
  out.id = lr.id;
  out.frames = forward(net, weights, lr.frames, provider, cache.get());
  save_clip_dir(out, p.out);
  std::cout << "restored " << out.frames.size() << " frames " << lr.width() << "x" << lr.height() << " -> "
            << out.width() << "x" << out.height() << "\n";
  record_config(m, net);
  m.record()["weights_hash"] = cli::git_blob_hash(p.weights);
  m.append_to(manifest_path(p, p.out));
  return 0;
}

int cmd_eval(const Paths& p, Convention convention, RunManifest& m) {
  const Clip pred = load_clip_dir(p.pred), gt = load_clip_dir(p.gt);
  if (pred.frames.size() != gt.frames.size()) {
    throw DimensionError("frame count mismatch: pred has " + std::to_string(pred.frames.size()) + ", gt has " +
                         std::to_string(gt.frames.size()));
  }
  std::vector<MetricRow> rows;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (size_t t = 0; t < gt.frames.size(); ++t) {
    MetricRow r{gt.id, static_cast<int>(t), psnr(pred.frames[t], gt.frames[t], convention),
                ssim(pred.frames[t], gt.frames[t], convention)};
    psnr_sum += r.psnr;
    ssim_sum += r.ssim;
    rows.push_back(r);
  }
  const double n = static_cast<double>(rows.size());
  rows.push_back({gt.id, -1, psnr_sum / n, ssim_sum / n});
  const fs::path out = p.out.empty() ? fs::path("metrics.csv") : fs::path(p.out);
  write_metrics_csv(out, rows, convention);
  std::cout << "clip " << gt.id << " (" << to_string(convention) << "): PSNR " << fmt_db(rows.back().psnr)
            << " dB, SSIM " << std::setprecision(6) << rows.back().ssim << " over " << rows.size() - 1
            << " frames\nwrote " << out.string() << "\n";
  m.record()["convention"] = to_string(convention);
  m.record()["metrics"] = {{"psnr", std::isinf(rows.back().psnr) ? std::string("inf") : fmt_db(rows.back().psnr)},
                           {"ssim", rows.back().ssim}};
  m.append_to(manifest_path(p, out));
  return 0;
}

double paper_reference(const std::string& variant) {
  if (variant == "A") return 31.48;
  if (variant == "B") return 31.94;
  if (variant == "C") return 32.08;
  return 32.39;
}

int cmd_ablate(const Paths& p, const std::string& variant, TrainConfig tc, RunManifest& m) {
  const NetConfig net = toy_net(variant);
  if (p.out.empty()) throw std::invalid_argument("--out is required");
  ToyProtocol protocol;
  PyramidalFlowProvider provider;
  const TrainingSet data = make_training_set(toy_training_clips(protocol), {}, provider, net.order);
  std::cout << "variant " << variant << ": " << param_count(net) << " parameters, " << tc.steps << " steps\n";
  const TrainResult r = train(net, tc, data, [](std::int64_t step, double loss, double) {
    std::cout << "step " << step << " loss " << std::setprecision(6) << loss << "\n" << std::flush;
  });
  const EvalSummary e = evaluate_clip(net, r.weights, toy_eval_clip(protocol), provider);
  const bool fresh = !fs::exists(p.out);
  std::ofstream csv(p.out, std::ios::app);
  if (!csv) throw FormatError("cannot append " + p.out);
  if (fresh) csv << "variant,params,steps,seed,psnr_y,bicubic_psnr_y,paper_reds4_psnr\n";
  csv << variant << ',' << param_count(net) << ',' << tc.steps << ',' << tc.seed << ',' << fmt_db(e.psnr_y) << ','
      << fmt_db(e.bicubic_psnr_y) << ',' << paper_reference(variant) << '\n';
  std::cout << "held-out Y-PSNR " << fmt_db(e.psnr_y) << " dB (bicubic " << fmt_db(e.bicubic_psnr_y) << " dB)\n"
            << "paper REDS4 reference (not reproducible at toy scale): A 31.48, B 31.94, C 32.08, full 32.39\n";
  record_config(m, net);
  m.record()["variant"] = variant;
  m.record()["seed"] = tc.seed;
  m.record()["metrics"] = {{"psnr_y", e.psnr_y}, {"bicubic_psnr_y", e.bicubic_psnr_y},
                           {"paper_reference", paper_reference(variant)}};
  m.append_to(manifest_path(p, p.out));
  return 0;
}

int cmd_profile(const Paths& p, long column, RunManifest& m) {
  const Clip clip = load_clip_dir(p.in);
  const TemporalProfile prof = temporal_profile(clip.frames, column);
  save_png(p.out, prof.image);
  std::cout << "temporal profile of column " << column << " over " << clip.frames.size()
            << " frames: consistency score " << std::setprecision(8) << prof.score << "\nwrote " << p.out << "\n";
  m.record()["metrics"] = {{"column", column}, {"consistency_score", prof.score}};
  m.append_to(manifest_path(p, p.out));
  return 0;
}

int cmd_synth(const Paths& p, const std::string& kind, int frames, std::uint64_t seed, long size, RunManifest& m) {
  SynthOptions options;
  options.height = options.width = size;
  const Clip clip = synth_clip(parse_synth_kind(kind), frames, seed, options);
  save_clip_dir(clip, p.out);
  std::cout << "wrote " << frames << " frames " << size << "x" << size << " (" << clip.source << ")\n";
  nlohmann::json motion = nlohmann::json::array();
  for (const auto& fm : clip.motion) motion.push_back({fm.dx, fm.dy, fm.angle, fm.zoom});
  m.record()["seed"] = seed;
  m.record()["motion"] = motion;
  m.append_to(manifest_path(p, p.out));
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(const char* kind, const std::string& what, int code) {
  std::cerr << "vsrpp: error[" << kind << "]: " << one_line(what) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video super-resolution with second-order grid propagation and flow-guided deformable alignment"};
  app.require_subcommand(1);
  Paths p;
  app.add_option("--manifest", p.manifest, "Run manifest (JSON lines, appended)");

  DegradationSpec deg;
  std::string mode = "BI";
  auto* degrade = app.add_subcommand("degrade", "Synthesise LR frames from an HR clip directory");
  degrade->add_option("--in", p.in, "HR clip directory")->required();
  degrade->add_option("--out", p.out, "LR clip directory")->required();
  degrade->add_option("--mode", mode, "BI or BD")->capture_default_str();
  degrade->add_option("--scale", deg.scale, "Downsampling factor")->capture_default_str();
  degrade->add_option("--sigma", deg.sigma, "BD Gaussian sigma")->capture_default_str();
  degrade->add_option("--kernel-size", deg.kernel_size, "BD Gaussian size")->capture_default_str();

  TrainConfig tc = TrainConfig::toy();
  std::string preset = "toy", train_mode = "BI";
  auto* train_cmd = app.add_subcommand("train-toy", "Train on patches of synthetic or on-disk clips");
  train_cmd->add_option("--config", p.config, "Network config file (default: 16-channel full model)");
  train_cmd->add_option("--data", p.data, "Clip directory, directory of clips, or synthetic:<kind>")
      ->capture_default_str();
  train_cmd->add_option("--steps", tc.steps)->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  train_cmd->add_option("--out", p.out, "Output weight file");
  train_cmd->add_option("--preset", preset, "toy or paper")->capture_default_str();
  train_cmd->add_option("--batch", tc.batch)->capture_default_str();
  train_cmd->add_option("--frames", tc.frames)->capture_default_str();
  train_cmd->add_option("--patch", tc.lr_patch, "LR patch side")->capture_default_str();
  train_cmd->add_option("--freeze-steps", tc.freeze_steps)->capture_default_str();
  train_cmd->add_option("--lr", tc.lr_main)->capture_default_str();
  train_cmd->add_option("--flow-lr", tc.lr_flow)->capture_default_str();
  train_cmd->add_option("--log-every", tc.log_every)->capture_default_str();
  train_cmd->add_option("--degradation", train_mode, "BI or BD")->capture_default_str();

  auto* restore = app.add_subcommand("restore", "Upscale a clip x4 with trained weights");
  restore->add_option("--weights", p.weights)->required();
  restore->add_option("--in", p.in, "LR clip directory")->required();
  restore->add_option("--out", p.out, "Output clip directory")->required();
  restore->add_option("--config", p.config)->required();
  restore->add_option("--flow-cache", p.flow_cache, "Directory for cached flows");

  std::string convention = "y";
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of a restored clip against ground truth");
  eval->add_option("--pred", p.pred)->required();
  eval->add_option("--gt", p.gt)->required();
  eval->add_option("--convention", convention, "rgb or y")->capture_default_str();
  eval->add_option("--out", p.out, "Metrics CSV (default metrics.csv)");

  std::string variant;
  TrainConfig ablate_tc = TrainConfig::toy();
  auto* ablate = app.add_subcommand("ablate", "Train and score one ablation variant, appending a CSV row");
  ablate->add_option("--variant", variant, "A, B, C or full")->required();
  ablate->add_option("--steps", ablate_tc.steps)->capture_default_str();
  ablate->add_option("--seed", ablate_tc.seed)->capture_default_str();
  ablate->add_option("--out", p.out, "Comparison CSV")->required();

  long column = 0;
  auto* profile = app.add_subcommand("profile", "Temporal profile image and consistency score");
  profile->add_option("--in", p.in)->required();
  profile->add_option("--column", column)->required();
  profile->add_option("--out", p.out, "Profile PNG")->required();

  std::string synth_kind = "translate";
  int synth_frames = 10;
  std::uint64_t synth_seed = 0;
  long synth_size = 64;
  auto* synth = app.add_subcommand("synth", "Write a procedural HR clip with known motion");
  synth->add_option("--kind", synth_kind, "translate, rotate_zoom or texture_noise")->capture_default_str();
  synth->add_option("--frames", synth_frames)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--size", synth_size, "Frame side in pixels")->capture_default_str();
  synth->add_option("--out", p.out, "Clip directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    const int threads = configure_threads();
    auto* sub = app.get_subcommands().front();
    RunManifest m(sub->get_name(), args);
    m.record()["threads"] = threads;
    if (sub == degrade) {
      deg.mode = parse_degrade_mode(mode);
      return cmd_degrade(p, deg, m);
    }
    if (sub == train_cmd) return cmd_train(p, tc, preset, parse_degrade_mode(train_mode), m);
    if (sub == restore) return cmd_restore(p, m);
    if (sub == eval) return cmd_eval(p, parse_convention(convention), m);
    if (sub == ablate) return cmd_ablate(p, variant, ablate_tc, m);
    if (sub == profile) return cmd_profile(p, column, m);
    if (sub == synth) return cmd_synth(p, synth_kind, synth_frames, synth_seed, synth_size, m);
    return fail("usage", "no command", 2);
  } catch (const FormatError& e) {
    return fail("format", e.what(), 3);
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), 3);
  } catch (const DimensionError& e) {
    return fail("dimension", e.what(), 4);
  } catch (const NonFiniteError& e) {
    return fail("numeric", e.what(), 5);
  } catch (const std::invalid_argument& e) {
    return fail("usage", e.what(), 2);
  } catch (const UsageError& e) {
    return fail("usage", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
