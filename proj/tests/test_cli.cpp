#include "vsrpp/data.hpp"
#include "vsrpp/net.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace vsrpp;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun vsrpp_cli(const std::string& args) {
  const std::string cmd = std::string(VSRPP_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vsrpp_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir_bytes(const fs::path& dir) {
  std::string all;
  for (size_t i = 0; fs::exists(dir / frame_filename(i)); ++i) all += slurp(dir / frame_filename(i));
  return all;
}

size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

NetConfig tiny_config() {
  NetConfig c;
  c.channels = 8;
  c.dcn_groups = 4;
  c.extraction_blocks = 1;
  c.branch_blocks = 1;
  return c;
}

}  // namespace

TEST(Cli, DegradeShapesDeterminismAndManifest) {
  const fs::path root = scratch("degrade");
  ASSERT_EQ(vsrpp_cli("synth --frames 2 --size 256 --seed 3 --out " + q(root / "hr")).code, 0);
  const CliRun bi = vsrpp_cli("degrade --in " + q(root / "hr") + " --out " + q(root / "lr"));
  ASSERT_EQ(bi.code, 0) << bi.out;
  const Clip lr = load_clip_dir(root / "lr");
  EXPECT_EQ(lr.frames.size(), 2u);
  EXPECT_EQ(lr.frames[0].shape(), (Shape{1, 3, 64, 64}));
  const std::string first = dir_bytes(root / "lr");
  ASSERT_EQ(vsrpp_cli("degrade --in " + q(root / "hr") + " --out " + q(root / "lr")).code, 0);
  EXPECT_EQ(dir_bytes(root / "lr"), first);
  EXPECT_EQ(line_count(root / "lr" / "manifest.jsonl"), 2u);

  const CliRun bd = vsrpp_cli("degrade --mode BD --in " + q(root / "hr") + " --out " + q(root / "bd"));
  ASSERT_EQ(bd.code, 0) << bd.out;
  const std::string manifest = slurp(root / "bd" / "manifest.jsonl");
  EXPECT_NE(manifest.find("\"sigma\":1.6"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("\"mode\":\"BD\""), std::string::npos) << manifest;
  EXPECT_FALSE(dir_bytes(root / "bd") == first);
}

TEST(Cli, EvalIdenticalClipAndConventionFlag) {
  const fs::path root = scratch("eval");
  ASSERT_EQ(vsrpp_cli("synth --frames 2 --size 32 --out " + q(root / "gt")).code, 0);
  const CliRun same = vsrpp_cli("eval --pred " + q(root / "gt") + " --gt " + q(root / "gt") + " --out " + q(root / "m.csv"));
  ASSERT_EQ(same.code, 0) << same.out;
  EXPECT_NE(same.out.find("PSNR inf dB, SSIM 1 "), std::string::npos) << same.out;
  EXPECT_NE(slurp(root / "m.csv").find(",mean,inf,1\n"), std::string::npos);

  // A chroma-only change moves RGB PSNR far more than Y PSNR.
  Clip pred = load_clip_dir(root / "gt");
  for (auto& f : pred.frames)
    for (Index i = 0; i < f.plane_size(); ++i) {
      f.plane(0, 0)[i] = std::clamp(f.plane(0, 0)[i] + 0.1f, 0.0f, 1.0f);
      f.plane(0, 2)[i] = std::clamp(f.plane(0, 2)[i] - 0.1f, 0.0f, 1.0f);
    }
  save_clip_dir(pred, root / "pred");
  auto mean_psnr = [&](const std::string& conv) {
    const CliRun r = vsrpp_cli("eval --pred " + q(root / "pred") + " --gt " + q(root / "gt") + " --convention " + conv +
                            " --out " + q(root / (conv + ".csv")));
    EXPECT_EQ(r.code, 0) << r.out;
    std::smatch m;
    EXPECT_TRUE(std::regex_search(r.out, m, std::regex("PSNR ([0-9.]+) dB")));
    return std::stod(m[1].str());
  };
  const double y = mean_psnr("y"), rgb = mean_psnr("rgb");
  EXPECT_GT(y, rgb + 5.0);
  EXPECT_NE(slurp(root / "rgb.csv").find("# convention=rgb"), std::string::npos);
}

TEST(Cli, BicubicBaselineEvalIsReproducible) {
  const fs::path root = scratch("baseline");
  ASSERT_EQ(vsrpp_cli("synth --frames 2 --size 64 --seed 5 --out " + q(root / "gt")).code, 0);
  ASSERT_EQ(vsrpp_cli("degrade --in " + q(root / "gt") + " --out " + q(root / "lr")).code, 0);
  Clip up = load_clip_dir(root / "lr");
  for (auto& f : up.frames) f = upsample_bicubic(f);
  save_clip_dir(up, root / "bic");
  const std::string args = "eval --pred " + q(root / "bic") + " --gt " + q(root / "gt") + " --out ";
  ASSERT_EQ(vsrpp_cli(args + q(root / "a.csv")).code, 0);
  ASSERT_EQ(vsrpp_cli(args + q(root / "b.csv")).code, 0);
  const std::string a = slurp(root / "a.csv");
  EXPECT_EQ(a, slurp(root / "b.csv"));
  EXPECT_EQ(a.find("inf"), std::string::npos);
  EXPECT_EQ(a.find("nan"), std::string::npos);
}

TEST(Cli, PaperPresetPrintsScheduleWithoutRunning) {
  const CliRun r = vsrpp_cli("train-toy --preset paper");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("lr_main=0.0001"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("lr_flow=2.5e-05"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("steps=600000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("batch=8"), std::string::npos) << r.out;
}

TEST(Cli, TrainToyLowersLossAndIsDeterministic) {
  const fs::path root = scratch("train");
  write_config(root / "net.cfg", tiny_config());
  const std::string base = "train-toy --config " + q(root / "net.cfg") + " --patch 12 --frames 3 --seed 4 ";
  const CliRun r = vsrpp_cli(base + "--steps 200 --log-every 50 --out " + q(root / "w.vsrw"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex("probe loss ([0-9.e-]+) -> ([0-9.e-]+)"))) << r.out;
  EXPECT_LT(std::stod(m[2].str()), std::stod(m[1].str()));
  EXPECT_TRUE(fs::exists(root / "w.vsrw.cfg"));
  EXPECT_NE(slurp(root / "w.vsrw.manifest.jsonl").find("weights_hash"), std::string::npos);

  ASSERT_EQ(vsrpp_cli(base + "--steps 12 --out " + q(root / "a.vsrw")).code, 0);
  ASSERT_EQ(vsrpp_cli(base + "--steps 12 --out " + q(root / "b.vsrw")).code, 0);
  EXPECT_EQ(slurp(root / "a.vsrw"), slurp(root / "b.vsrw"));
}

TEST(Cli, RestoreZeroWeightsIsBilinearAndRepeatable) {
  const fs::path root = scratch("restore");
  const NetConfig c = tiny_config();
  write_config(root / "net.cfg", c);
  ModelWeights w = init_weights(c, 1);
  for (auto& e : w) e.value = Tensorf::Zeros(e.value.shape());
  save_weights(root / "zero.vsrw", w);
  ASSERT_EQ(vsrpp_cli("synth --frames 3 --size 12 --out " + q(root / "lr")).code, 0);
  const std::string args = "restore --weights " + q(root / "zero.vsrw") + " --config " + q(root / "net.cfg") +
                           " --in " + q(root / "lr") + " --out ";
  const CliRun r = vsrpp_cli(args + q(root / "a"));
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_EQ(vsrpp_cli(args + q(root / "b")).code, 0);
  EXPECT_EQ(dir_bytes(root / "a"), dir_bytes(root / "b"));

  const Clip lr = load_clip_dir(root / "lr");
  Clip expect;
  for (const auto& f : lr.frames) expect.frames.push_back(resize_bilinear(f, 48, 48));
  save_clip_dir(expect, root / "expect");
  EXPECT_EQ(dir_bytes(root / "a"), dir_bytes(root / "expect"));
}

TEST(Cli, RestoreRejectsMismatchedWeightsByName) {
  const fs::path root = scratch("mismatch");
  NetConfig c = tiny_config();
  write_config(root / "net.cfg", c);
  c.order = 1;
  save_weights(root / "w.vsrw", init_weights(c, 1));
  ASSERT_EQ(vsrpp_cli("synth --frames 2 --size 12 --out " + q(root / "lr")).code, 0);
  const CliRun r = vsrpp_cli("restore --weights " + q(root / "w.vsrw") + " --config " + q(root / "net.cfg") + " --in " +
                          q(root / "lr") + " --out " + q(root / "o"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("branch1.align.conv0.weight"), std::string::npos) << r.out;
}

TEST(Cli, ErrorsAreSingleLineRecordsWithExitCodes) {
  const fs::path root = scratch("errors");
  auto check = [](const CliRun& r, int code, const std::string& kind) {
    EXPECT_EQ(r.code, code) << r.out;
    EXPECT_EQ(r.out.rfind("vsrpp: error[" + kind + "]: ", 0), 0u) << r.out;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1) << r.out;
  };
  check(vsrpp_cli("degrade --in " + q(root / "none") + " --out " + q(root / "o")), 3, "format");
  check(vsrpp_cli("degrade --bogus"), 2, "usage");
  check(vsrpp_cli("degrade --mode XY --in " + q(root) + " --out " + q(root / "o")), 2, "usage");
  check(vsrpp_cli("ablate --variant D --out " + q(root / "x.csv")), 2, "usage");

  ASSERT_EQ(vsrpp_cli("synth --frames 2 --size 16 --out " + q(root / "two")).code, 0);
  ASSERT_EQ(vsrpp_cli("synth --frames 3 --size 16 --out " + q(root / "three")).code, 0);
  check(vsrpp_cli("eval --pred " + q(root / "two") + " --gt " + q(root / "three")), 4, "dimension");
  check(vsrpp_cli("profile --in " + q(root / "two") + " --column 16 --out " + q(root / "p.png")), 4, "dimension");
  check(vsrpp_cli("synth --size 4 --out " + q(root / "tiny")), 2, "usage");
  EXPECT_EQ(vsrpp_cli("synth --out " + q(root / "ok")).code, 0);
}

TEST(Cli, ProfileOfStaticClipScoresZero) {
  const fs::path root = scratch("profile");
  Clip clip;
  std::mt19937_64 rng(3);
  const Tensorf f = Tensorf::Uniform({1, 3, 10, 12}, rng, 0.0f, 1.0f);
  clip.frames.assign(4, f);
  save_clip_dir(clip, root / "static");
  const CliRun r = vsrpp_cli("profile --in " + q(root / "static") + " --column 5 --out " + q(root / "p.png"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("consistency score 0\n"), std::string::npos) << r.out;
  EXPECT_EQ(load_png(root / "p.png").shape(), (Shape{1, 3, 4, 10}));
}

TEST(Cli, AblationParamCountsIncreaseAndPaperReferenceIsPrinted) {
  const fs::path root = scratch("ablate");
  long previous = 0;
  for (const char* v : {"A", "B", "C", "full"}) {
    const CliRun r = vsrpp_cli(std::string("ablate --steps 1 --variant ") + v + " --out " + q(root / "rows.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex("variant \\w+: (\\d+) parameters"))) << r.out;
    const long count = std::stol(m[1].str());
    EXPECT_GT(count, previous) << v;
    previous = count;
    EXPECT_NE(r.out.find("A 31.48, B 31.94, C 32.08, full 32.39"), std::string::npos) << r.out;
  }
  EXPECT_EQ(line_count(root / "rows.csv"), 5u);
  EXPECT_NE(slurp(root / "rows.csv").find(",32.39\n"), std::string::npos);
}
