#include "flowsync/cli/commands.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"
#include "flowsync/sampler.hpp"
#include "flowsync/training.hpp"
#include "flowsync/velocity_model.hpp"

namespace flowsync::cli {

std::string training_signature(const RunConfig& cfg) {
  std::string sig;
  for (const auto& key : RunConfig::keys()) {
    if (key.rfind("data.", 0) == 0 || key.rfind("model.", 0) == 0 || key.rfind("train.", 0) == 0) {
      sig += key + " = " + cfg.raw(key) + "\n";
    }
  }
  return sig;
}

namespace {

std::string numbered(const char* prefix, std::size_t i, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, i, suffix);
  return buf;
}

void prepare_out_dir(const fs::path& out, bool force) {
  std::error_code ec;
  if (fs::exists(out, ec) && !fs::is_directory(out, ec)) {
    throw IoError("output path '" + out.string() + "' exists and is not a directory");
  }
  if (fs::exists(out, ec) && !fs::is_empty(out, ec) && !force) {
    throw IoError("output directory '" + out.string() + "' is not empty (use --force)");
  }
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
}

std::unique_ptr<ExampleSource> make_source(const RunConfig& cfg) {
  const std::string& data = cfg.raw("train.data");
  if (!data.empty()) return std::make_unique<DatasetSource>(data);
  return std::make_unique<SyntheticFaceSource>(facegen_config(cfg));
}

struct HeldoutClip {
  FaceSpec spec;
  FrameSequence source;
  std::vector<double> source_apertures;
  std::vector<double> target_apertures;
  AudioTrack audio;
};

std::vector<HeldoutClip> make_heldout(const RunConfig& cfg) {
  const FacegenConfig fc = facegen_config(cfg);
  const std::size_t n = cfg.count("ablate.n_clips");
  const std::size_t len = cfg.count("ablate.clip_len");
  if (n == 0 || len == 0) throw ConfigError("ablate.n_clips and ablate.clip_len must be positive");
  std::vector<HeldoutClip> clips;
  for (std::size_t c = 0; c < n; ++c) {
    RngStream rng(cfg.u64("ablate.seed"), c);
    HeldoutClip h;
    h.spec = sample_face_spec(rng, fc);
    h.source_apertures = sample_aperture_trajectory(rng, len);
    h.target_apertures = sample_aperture_trajectory(rng, len);
    h.audio = make_audio_track(h.target_apertures, rng, fc.audio_noise_std);
    const FaceRenderer r(h.spec);
    for (double a : h.source_apertures) h.source.push_back(r.render(a));
    clips.push_back(std::move(h));
  }
  return clips;
}

fs::path train_arm(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  const std::string sig = training_signature(cfg);
  const fs::path ckpt = dir / "model.ckpt";
  std::error_code ec;
  if (fs::exists(ckpt, ec) && fs::exists(dir / "train_signature.txt", ec) &&
      read_text_file(dir / "train_signature.txt") == sig) {
    log << "reusing " << ckpt.string() << "\n";
    return ckpt;
  }
  log << "training " << dir.filename().string() << " (" << cfg.raw("train.pool_mode") << " pools)\n";
  const TrainConfig tc = train_config(cfg);
  const auto source = make_source(cfg);
  TrainState state = init_train_state(tc, *source);
  train(state, tc, *source, {ckpt, dir / "loss.csv"});
  const SmoothedLoss s = smoothed_loss(state.log);
  log << "  loss " << s.initial << " -> " << s.final << "\n";
  write_text_file(dir / "train_signature.txt", sig);
  return ckpt;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kConfig: return 2;
      case ErrorKind::kShape:
      case ErrorKind::kGeometry:
      case ErrorKind::kContract: return 3;
      case ErrorKind::kNumeric: return 4;
      case ErrorKind::kIo: return 5;
    }
  }
  return 1;
}

void cmd_gen_data(const RunConfig& cfg, const fs::path& out, bool force) {
  const FacegenConfig fc = facegen_config(cfg);
  const std::size_t len = cfg.count("data.clip_len");
  if (len == 0) throw ConfigError("data.clip_len must be at least 1");
  prepare_out_dir(out, force);
  const std::size_t n_pseudo = cfg.count("data.n_pseudo");
  const std::size_t total = n_pseudo + cfg.count("data.n_arbitrary");
  std::vector<ManifestRow> manifest;
  for (std::size_t i = 0; i < total; ++i) {
    const PoolTag pool = i < n_pseudo ? PoolTag::kPseudoPaired : PoolTag::kArbitrary;
    RngStream rng(cfg.u64("data.seed"), i);
    const ClipPair pair = sample_clip_pair(pool, rng, len, fc);
    const std::string name = numbered("pair_", i);
    write_clip_pair(out / name, pair);
    manifest.push_back({name, pool, len});
  }
  write_manifest(out, manifest);
  write_text_file(out / "config.txt", cfg.serialize());
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out, bool force, bool resume,
                       std::ostream& log) {
  const TrainConfig tc = train_config(cfg);
  const auto source = make_source(cfg);
  const fs::path ckpt = out / "model.ckpt";
  TrainState state;
  if (resume) {
    state = load_train_state(fs::path(ckpt.string() + ".state"), load_checkpoint(ckpt));
    log << "resuming at step " << state.step << "\n";
  } else {
    prepare_out_dir(out, force);
    state = init_train_state(tc, *source);
  }
  write_text_file(out / "config.txt", cfg.serialize());
  train(state, tc, *source, {ckpt, out / "loss.csv"}, [&](const LossRow& r) {
    if ((r.step + 1) % 100 == 0) log << "step " << r.step + 1 << "  loss " << r.loss << "\n";
  });
  TrainSummary s{ckpt, state.log.empty() ? 0.0 : state.log.back().loss, state.step};
  if (!state.log.empty()) {
    const SmoothedLoss sm = smoothed_loss(state.log);
    log << "final loss " << s.final_loss << " (smoothed " << sm.initial << " -> " << sm.final << ")\n";
  }
  return s;
}

std::optional<EvalReport> cmd_sample(const RunConfig& cfg, const fs::path& checkpoint,
                                     const fs::path& source_dir, const fs::path& audio_csv,
                                     const fs::path& out, bool force) {
  if (audio_csv.empty()) throw ContractError("sample: an audio CSV is required (--audio)");
  const LearnedVelocityModel model = load_checkpoint(checkpoint);
  const ClipRecord source = read_clip(source_dir);
  if (source.frames.empty()) throw ContractError("sample: source clip has no frames");
  const Grid2D& f0 = source.frames.front();
  if (f0.height() != model.frame().height || f0.width() != model.frame().width) {
    throw ShapeError("checkpoint expects " + std::to_string(model.frame().height) + "x" +
                     std::to_string(model.frame().width) + " frames, source clip has " +
                     std::to_string(f0.height()) + "x" + std::to_string(f0.width()));
  }
  const AudioTrack audio = read_audio_csv(audio_csv);
  if (audio.dim() != model.audio_dim()) {
    throw ShapeError("checkpoint expects " + std::to_string(model.audio_dim()) +
                     " audio features, audio CSV has " + std::to_string(audio.dim()));
  }
  const SamplerConfig sc = sampler_config(cfg, source.spec);
  prepare_out_dir(out, force);
  const std::vector<SampleResult> results = sample_clip(model, source.frames, audio, sc);

  ClipRecord output{source.spec, {}, {}, audio};
  for (std::size_t t = 0; t < results.size(); ++t) {
    output.frames.push_back(results[t].frame);
    output.apertures.push_back(measure_aperture(results[t].frame, source.spec));
    if (sc.keep_trace) {
      write_text_file(out / numbered("trace_", t, ".csv"),
                      trace_csv(results[t].trace, source.frames[t], source.spec.mouth_box()));
    }
  }
  write_clip(out, output);
  write_text_file(out / "config.txt", cfg.serialize());

  const auto target = read_csv_column(audio_csv, "aperture");
  if (!target) return std::nullopt;
  const EvalReport r =
      eval_clip(output.frames, source.frames, source.spec, *target, source.apertures);
  write_text_file(out / "eval.csv", eval_csv_header() + eval_csv_row("sample", r));
  return r;
}

AblationOutcome cmd_ablate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  write_text_file(out / "config.txt", cfg.serialize());

  RunConfig single = cfg;
  single.set("train.pool_mode", "single");
  RunConfig timestep = cfg;
  timestep.set("train.pool_mode", "timestep");
  const LearnedVelocityModel full_model = load_checkpoint(train_arm(timestep, out / "train_timestep", log));
  const LearnedVelocityModel single_model = load_checkpoint(train_arm(single, out / "train_single", log));

  struct Arm {
    std::string label;
    const LearnedVelocityModel* model;
    RunConfig cfg;
  };
  std::vector<Arm> arms;
  RunConfig full = cfg;
  full.set("guidance.mode", "dscfg");
  // DS-CFG peaks at the high static scale; it differs only in being local and decaying.
  full.set("guidance.omega_peak", cfg.raw("ablate.high_scale"));
  full.set("sample.trace", "false");
  arms.push_back({"full", &full_model, full});
  RunConfig no_init = full;
  no_init.set("sample.tau_start", "1");
  arms.push_back({"no_progressive_init", &full_model, no_init});
  arms.push_back({"single_pool", &single_model, full});
  RunConfig low = full;
  low.set("guidance.mode", "static");
  low.set("guidance.static_scale", cfg.raw("ablate.low_scale"));
  arms.push_back({"low_static_cfg", &full_model, low});
  RunConfig high = low;
  high.set("guidance.static_scale", cfg.raw("ablate.high_scale"));
  arms.push_back({"high_static_cfg", &full_model, high});

  const std::vector<HeldoutClip> clips = make_heldout(cfg);
  AblationOutcome outcome;
  std::string per_clip = "arm,clip,lmd,outside_mse,csim,leakage,n_frames\n";
  for (const Arm& arm : arms) {
    log << "sampling arm " << arm.label << "\n";
    std::vector<EvalReport> reports;
    for (std::size_t c = 0; c < clips.size(); ++c) {
      const HeldoutClip& h = clips[c];
      const SamplerConfig sc = sampler_config(arm.cfg, h.spec);
      // Every arm sees the same noise draws for a given clip (paired comparison).
      const auto results = sample_clip(*arm.model, h.source, h.audio, sc, c * h.source.size());
      FrameSequence frames;
      for (const auto& r : results) frames.push_back(r.frame);
      reports.push_back(eval_clip(frames, h.source, h.spec, h.target_apertures, h.source_apertures));
      std::string row = eval_csv_row(std::to_string(c), reports.back());
      per_clip += arm.label + "," + row;
    }
    outcome.arms.push_back(arm.label);
    outcome.means.push_back(mean_report(reports));
    outcome.per_clip.push_back(std::move(reports));
  }

  std::string summary = eval_csv_header();
  std::vector<std::pair<std::string, EvalReport>> labelled;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    summary += eval_csv_row(arms[a].label, outcome.means[a]);
    labelled.emplace_back(arms[a].label, outcome.means[a]);
  }
  outcome.ranking_csv = compare_runs(labelled);

  auto metric_of = [&](std::size_t arm, double (*get)(const EvalReport&)) {
    std::vector<double> v;
    for (const auto& r : outcome.per_clip[arm]) v.push_back(get(r));
    return v;
  };
  struct Check {
    const char* name;
    std::size_t better, worse;
    const char* metric;
    double (*get)(const EvalReport&);
    bool lower;
  };
  const Check checks[] = {
      {"progressive_init_outside_mse", 0, 1, "outside_mse", [](const EvalReport& r) { return r.outside_mse; }, true},
      {"timestep_pools_csim", 0, 2, "csim", [](const EvalReport& r) { return r.csim; }, false},
      {"dscfg_vs_low_static_lmd", 0, 3, "lmd", [](const EvalReport& r) { return r.lmd; }, true},
      {"dscfg_vs_high_static_outside_mse", 0, 4, "outside_mse", [](const EvalReport& r) { return r.outside_mse; }, true},
  };
  std::string orderings = "check,better,worse,metric,win_rate,pass\n";
  for (const Check& k : checks) {
    OrderingCheck o{k.name, arms[k.better].label, arms[k.worse].label, k.metric, 0.0, false};
    o.win_rate = bootstrap_win_rate(metric_of(k.better, k.get), metric_of(k.worse, k.get), k.lower,
                                    cfg.count("ablate.bootstrap"), cfg.u64("ablate.seed"));
    o.pass = o.win_rate >= 0.9;
    orderings += o.name + "," + o.better + "," + o.worse + "," + o.metric + "," +
                 format_double(o.win_rate) + "," + (o.pass ? "1" : "0") + "\n";
    outcome.orderings.push_back(o);
  }

  write_text_file(out / "per_clip.csv", per_clip);
  write_text_file(out / "ablation.csv", summary);
  write_text_file(out / "ranking.csv", outcome.ranking_csv);
  write_text_file(out / "orderings.csv", orderings);
  return outcome;
}

EvalReport cmd_eval(const fs::path& output_dir, const fs::path& source_dir, const fs::path& target_csv) {
  const ClipRecord output = read_clip(output_dir);
  const ClipRecord source = read_clip(source_dir);
  const auto target = read_csv_column(target_csv, "aperture");
  if (!target) throw ContractError(target_csv.string() + ": no aperture column with target apertures");
  return eval_clip(output.frames, source.frames, source.spec, *target, source.apertures);
}

std::string cmd_report(const std::vector<fs::path>& inputs) {
  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const fs::path& p : inputs) {
    std::istringstream in(read_text_file(p));
    std::string line;
    std::getline(in, line);
    if (line.rfind("label,lmd,outside_mse,csim,leakage,n_frames", 0) != 0) {
      throw IoError(p.string() + ": not an evaluation CSV");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::vector<std::string> cells;
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      if (cells.size() != 6) throw IoError(p.string() + ": malformed row '" + line + "'");
      EvalReport r;
      try {
        r.lmd = std::stod(cells[1]);
        r.outside_mse = std::stod(cells[2]);
        r.csim = std::stod(cells[3]);
        r.leakage_defined = cells[4] != "nan";
        r.leakage = r.leakage_defined ? std::stod(cells[4]) : 0.0;
        r.n_frames = std::stoul(cells[5]);
      } catch (const std::exception&) {
        throw IoError(p.string() + ": malformed row '" + line + "'");
      }
      reports.emplace_back(cells[0], r);
    }
  }
  return compare_runs(std::move(reports));
}

}  // namespace flowsync::cli
