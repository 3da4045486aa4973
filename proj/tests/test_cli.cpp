#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "flowsync/cli/commands.hpp"
#include "flowsync/cli/config.hpp"
#include "flowsync/error.hpp"
#include "flowsync/io.hpp"
#include "support.hpp"

namespace flowsync::cli {
namespace {

using flowsync::testing::ScratchDir;
using flowsync::testing::file_bytes;
using flowsync::testing::same_tree;

RunConfig small_config() {
  RunConfig c;
  c.set("data.n_pseudo", "2");
  c.set("data.n_arbitrary", "2");
  c.set("data.clip_len", "3");
  c.set("model.hidden", "8");
  c.set("train.steps", "3");
  c.set("train.batch", "4");
  c.set("sample.steps", "4");
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FLOWSYNC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunConfig, SerializeParseIsAFixedPoint) {
  RunConfig c;
  c.set("train.lr", " 0.0010 ");
  c.set("model.hidden", "256, 0128");
  c.set("sample.trace", "off");
  const std::string once = c.serialize();
  const std::string twice = RunConfig::parse(once).serialize();
  EXPECT_EQ(once, twice);
  EXPECT_EQ(c.raw("train.lr"), "0.001");
  EXPECT_EQ(c.raw("model.hidden"), "256,128");
  EXPECT_FALSE(c.flag("sample.trace"));
  EXPECT_EQ(RunConfig::keys().size(), static_cast<std::size_t>(std::count(once.begin(), once.end(), '\n')));
}

TEST(RunConfig, ParsesCommentsAndRejectsUnknownKeys) {
  const RunConfig c = RunConfig::parse("# comment\n\ntrain.steps = 12  # inline\n");
  EXPECT_EQ(c.count("train.steps"), 12u);
  try {
    RunConfig::parse("train.stepz = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.stepz"), std::string::npos);
  }
  EXPECT_THROW(RunConfig::parse("just text\n"), ConfigError);
  RunConfig d;
  EXPECT_THROW(d.set("train.batch", "-3"), ConfigError);
  EXPECT_THROW(d.set("train.lr", "nan"), ConfigError);
  EXPECT_THROW(d.set("guidance.mode", "loud"), ConfigError);
  EXPECT_THROW(d.set("model.hidden", "12,0"), ConfigError);
  EXPECT_THROW(d.set_assignment("train.lr"), ConfigError);
}

TEST(RunConfig, DerivedSettings) {
  RunConfig c;
  const TrainConfig t = train_config(c);
  EXPECT_EQ(t.batch_size, 64u);
  EXPECT_EQ(t.n_steps, 2000u);
  EXPECT_EQ(t.hidden, std::vector<std::size_t>{1024});
  FaceSpec spec;
  const SamplerConfig s = sampler_config(c, spec);
  EXPECT_EQ(s.tau_start, 0.92);
  EXPECT_EQ(s.n_steps, 50u);
  EXPECT_EQ(s.guidance.spatial.sigma, 9.0);
  c.set("data.pose_max", "9");
  EXPECT_THROW(facegen_config(c), GeometryError);
}

TEST(ExitCodes, DistinctPerErrorClass) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(ContractError("x")), 3);
  EXPECT_EQ(exit_code_for(ShapeError("x")), 3);
  EXPECT_EQ(exit_code_for(GeometryError("x")), 3);
  EXPECT_EQ(exit_code_for(NumericError("x")), 4);
  EXPECT_EQ(exit_code_for(IoError("x")), 5);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST(GenData, CountsPoolsAndReproducibility) {
  ScratchDir dir("gendata");
  const RunConfig c = small_config();
  cmd_gen_data(c, dir / "a", false);
  cmd_gen_data(c, dir / "b", false);
  EXPECT_TRUE(same_tree(dir / "a", dir / "b"));

  const auto rows = read_manifest(dir / "a");
  ASSERT_EQ(rows.size(), 4u);
  std::size_t pseudo = 0;
  for (const auto& row : rows) {
    const std::string cond = read_text_file(dir / "a" / row.pair / "cond" / "face.txt");
    const std::string target = read_text_file(dir / "a" / row.pair / "target" / "face.txt");
    if (row.pool == PoolTag::kPseudoPaired) {
      ++pseudo;
      EXPECT_EQ(cond, target);
    } else {
      EXPECT_NE(parse_face_spec(cond).pose, parse_face_spec(target).pose);
    }
    EXPECT_EQ(row.clip_len, 3u);
  }
  EXPECT_EQ(pseudo, 2u);

  EXPECT_THROW(cmd_gen_data(c, dir / "a", false), IoError);
  EXPECT_NO_THROW(cmd_gen_data(c, dir / "a", true));
}

TEST(Train, ZeroStepsWritesInitialCheckpointAndRunsReproduce) {
  ScratchDir dir("cli_train");
  RunConfig c = small_config();
  std::ostringstream log;
  c.set("train.steps", "0");
  cmd_train(c, dir / "zero", false, false, log);
  EXPECT_TRUE(std::filesystem::exists(dir / "zero" / "model.ckpt"));

  c.set("train.steps", "3");
  cmd_train(c, dir / "a", false, false, log);
  cmd_train(c, dir / "b", false, false, log);
  EXPECT_EQ(file_bytes(dir / "a" / "model.ckpt"), file_bytes(dir / "b" / "model.ckpt"));
  EXPECT_EQ(file_bytes(dir / "a" / "loss.csv"), file_bytes(dir / "b" / "loss.csv"));
}

TEST(Train, ResumeContinuesTheLog) {
  ScratchDir dir("cli_resume");
  RunConfig c = small_config();
  std::ostringstream log;
  c.set("train.steps", "5");
  cmd_train(c, dir / "straight", false, false, log);
  c.set("train.steps", "2");
  cmd_train(c, dir / "split", false, false, log);
  c.set("train.steps", "3");
  cmd_train(c, dir / "split", true, true, log);
  EXPECT_EQ(file_bytes(dir / "straight" / "loss.csv"), file_bytes(dir / "split" / "loss.csv"));
  EXPECT_EQ(file_bytes(dir / "straight" / "model.ckpt"), file_bytes(dir / "split" / "model.ckpt"));
}

TEST(Sample, GuidanceOffMatchesZeroPeakAndValidatesInputs) {
  ScratchDir dir("cli_sample");
  RunConfig c = small_config();
  std::ostringstream log;
  cmd_gen_data(c, dir / "data", false);
  cmd_train(c, dir / "model", false, false, log);
  const auto ckpt = dir / "model" / "model.ckpt";
  const auto source = dir / "data" / "pair_0002" / "cond";
  const auto audio = dir / "data" / "pair_0002" / "target" / "frames.csv";

  RunConfig off = c, zero = c;
  off.set("guidance.mode", "off");
  zero.set("guidance.omega_peak", "0");
  const auto ra = cmd_sample(off, ckpt, source, audio, dir / "off", false);
  const auto rb = cmd_sample(zero, ckpt, source, audio, dir / "zero", false);
  ASSERT_TRUE(ra.has_value());
  for (int t = 0; t < 3; ++t) {
    const std::string f = "frame_00" + std::to_string(t) + ".pgm";
    EXPECT_EQ(file_bytes(dir / "off" / f), file_bytes(dir / "zero" / f)) << f;
  }
  EXPECT_EQ(ra->lmd, rb->lmd);

  EXPECT_THROW(cmd_sample(c, ckpt, source, {}, dir / "noaudio", false), ContractError);
  RunConfig other = c;
  other.set("data.frame_h", "40");
  other.set("data.frame_w", "40");
  cmd_gen_data(other, dir / "big", false);
  try {
    cmd_sample(c, ckpt, dir / "big" / "pair_0000" / "cond", dir / "big" / "pair_0000" / "target" / "frames.csv",
               dir / "mismatch", false);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("32x32"), std::string::npos) << what;
    EXPECT_NE(what.find("40x40"), std::string::npos) << what;
  }
}

TEST(EvalAndReport, RoundTrip) {
  ScratchDir dir("cli_eval");
  RunConfig c = small_config();
  std::ostringstream log;
  cmd_gen_data(c, dir / "data", false);
  cmd_train(c, dir / "model", false, false, log);
  const auto source = dir / "data" / "pair_0002" / "cond";
  const auto target = dir / "data" / "pair_0002" / "target" / "frames.csv";
  cmd_sample(c, dir / "model" / "model.ckpt", source, target, dir / "out", false);
  const EvalReport r = cmd_eval(dir / "out", source, target);
  EXPECT_EQ(r.n_frames, 3u);
  write_text_file(dir / "a.csv", eval_csv_header() + eval_csv_row("a", r));
  write_text_file(dir / "b.csv", eval_csv_header() + eval_csv_row("b", {0, 0, 1, 0, true, 3}));
  const std::string ranking = cmd_report({dir / "a.csv", dir / "b.csv"});
  EXPECT_EQ(ranking.substr(0, ranking.find('\n')), "metric,rank,label,value,best");
  EXPECT_NE(ranking.find("lmd,1,b,0,1"), std::string::npos);
}

TEST(Binary, ExitCodes) {
  ScratchDir dir("cli_binary");
  const std::string out = (dir / "x").string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train --set train.stepz=3 --out " + out), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("sample --checkpoint a --source b --out " + out), 3);
  EXPECT_EQ(run_cli("eval --output nowhere --source nowhere --target nowhere.csv"), 5);
  EXPECT_EQ(run_cli("gen-data --set data.n_pseudo=1 --set data.n_arbitrary=1 --set data.clip_len=2 --out " + out), 0);
  EXPECT_EQ(run_cli("gen-data --out " + out), 5);
}

}  // namespace
}  // namespace flowsync::cli
