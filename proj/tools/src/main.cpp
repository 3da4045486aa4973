#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowsync/cli/commands.hpp"
#include "flowsync/error.hpp"
#include "flowsync/io.hpp"

using namespace flowsync;
using namespace flowsync::cli;

int main(int argc, char** argv) {
  CLI::App app{"flowsync: flow-matching lip-sync toolkit on a synthetic face domain"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::string seed;
  std::string out_dir;
  bool force = false;
  std::vector<std::string> sets;
  std::string steps, guidance, omega_peak;
  app.add_option("--config", config_path, "flat `section.key = value` config file");
  app.add_option("--seed", seed, "sets data.seed, train.seed and sample.seed");
  app.add_option("--out", out_dir, "output directory (or file for `report`)");
  app.add_flag("--force", force, "overwrite a non-empty output directory");
  app.add_option("--set", sets, "override a config key: --set section.key=value");
  app.add_option("--steps", steps, "train.steps for train/ablate, sample.steps for sample");
  app.add_option("--guidance", guidance, "guidance.mode: dscfg | static | off");
  app.add_option("--omega-peak", omega_peak, "guidance.omega_peak");

  auto* gen = app.add_subcommand("gen-data", "write pseudo-paired and arbitrary clip pairs");
  auto* train = app.add_subcommand("train", "train a velocity model");
  bool resume = false;
  train->add_flag("--resume", resume, "continue from <out>/model.ckpt.state");
  auto* sample = app.add_subcommand("sample", "lip-sync a source clip to new audio");
  std::string checkpoint, source, audio;
  sample->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  sample->add_option("--source", source, "source clip directory")->required();
  sample->add_option("--audio", audio, "audio CSV (frame_idx,...,audio_0..)");
  auto* ablate = app.add_subcommand("ablate", "train ablation arms and compare them on a held-out set");
  auto* eval = app.add_subcommand("eval", "evaluate a sampled clip");
  std::string output_clip, target_csv;
  eval->add_option("--output", output_clip, "sampled clip directory")->required();
  eval->add_option("--source", source, "source clip directory")->required();
  eval->add_option("--target", target_csv, "CSV with the target `aperture` column")->required();
  auto* report = app.add_subcommand("report", "rank evaluation CSVs");
  std::vector<std::string> inputs;
  report->add_option("inputs", inputs, "evaluation CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
    for (const auto& s : sets) cfg.set_assignment(s);
    if (!seed.empty()) {
      for (const char* k : {"data.seed", "train.seed", "sample.seed"}) cfg.set(k, seed);
    }
    if (!steps.empty()) cfg.set(sample->parsed() ? "sample.steps" : "train.steps", steps);
    if (!guidance.empty()) cfg.set("guidance.mode", guidance);
    if (!omega_peak.empty()) cfg.set("guidance.omega_peak", omega_peak);

    auto need_out = [&] {
      if (out_dir.empty()) throw ConfigError("--out is required for this command");
      return fs::path(out_dir);
    };

    if (gen->parsed()) {
      cmd_gen_data(cfg, need_out(), force);
      std::cout << "wrote dataset to " << out_dir << "\n";
    } else if (train->parsed()) {
      const TrainSummary s = cmd_train(cfg, need_out(), force, resume, std::cerr);
      std::cout << "final loss " << format_double(s.final_loss) << " after " << s.steps
                << " steps; checkpoint " << s.checkpoint.string() << "\n";
    } else if (sample->parsed()) {
      const auto r = cmd_sample(cfg, checkpoint, source, audio, need_out(), force);
      if (r) std::cout << eval_csv_header() << eval_csv_row("sample", *r);
    } else if (ablate->parsed()) {
      const AblationOutcome o = cmd_ablate(cfg, need_out(), std::cerr);
      std::cout << eval_csv_header();
      for (std::size_t a = 0; a < o.arms.size(); ++a) std::cout << eval_csv_row(o.arms[a], o.means[a]);
      for (const auto& k : o.orderings) {
        std::cout << (k.pass ? "PASS " : "FAIL ") << k.name << " win_rate=" << format_double(k.win_rate)
                  << "\n";
      }
    } else if (eval->parsed()) {
      const EvalReport r = cmd_eval(output_clip, source, target_csv);
      const std::string csv = eval_csv_header() + eval_csv_row("eval", r);
      if (!out_dir.empty()) write_text_file(out_dir, csv);
      std::cout << csv;
    } else if (report->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      const std::string table = cmd_report(paths);
      if (!out_dir.empty()) write_text_file(out_dir, table);
      std::cout << table;
    }
    return 0;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    const char* kind = "error";
    if (const auto* err = dynamic_cast<const Error*>(&e)) kind = to_string(err->kind());
    std::cerr << "flowsync: " << kind << " error: " << e.what() << "\n";
    return code;
  }
}
