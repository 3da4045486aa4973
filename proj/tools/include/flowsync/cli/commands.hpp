#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowsync/cli/config.hpp"
#include "flowsync/evalmetrics.hpp"

namespace flowsync::cli {

namespace fs = std::filesystem;

/// The data/model/train keys that determine a checkpoint; `ablate` reuses an arm
/// whose stored signature matches.
std::string training_signature(const RunConfig& cfg);

/// 0 success, 1 unexpected, 2 config, 3 contract/shape/geometry, 4 numeric, 5 I/O.
int exit_code_for(const std::exception& e);

/// N pseudo-paired then M arbitrary clip pairs (`pair_NNNN/{cond,target}`), a
/// manifest and the resolved config. Refuses a non-empty `out` unless `force`.
void cmd_gen_data(const RunConfig& cfg, const fs::path& out, bool force);

struct TrainSummary {
  fs::path checkpoint;
  double final_loss = 0.0;
  std::size_t steps = 0;
};

/// Trains into `out/model.ckpt` with `out/loss.csv`. `resume` continues from the
/// exact state saved next to the checkpoint.
TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out, bool force, bool resume,
                       std::ostream& log);

/// Samples every frame of the source clip with the target audio. Returns the
/// evaluation when the audio CSV also carries target apertures.
std::optional<EvalReport> cmd_sample(const RunConfig& cfg, const fs::path& checkpoint,
                                     const fs::path& source_dir, const fs::path& audio_csv,
                                     const fs::path& out, bool force);

struct OrderingCheck {
  std::string name;
  std::string better;
  std::string worse;
  std::string metric;
  double win_rate = 0.0;
  bool pass = false;
};

struct AblationOutcome {
  std::vector<std::string> arms;
  std::vector<std::vector<EvalReport>> per_clip;  ///< [arm][clip]
  std::vector<EvalReport> means;                  ///< [arm]
  std::vector<OrderingCheck> orderings;
  std::string ranking_csv;
};

/// Trains (or reuses) the timestep-pool and single-pool checkpoints, samples the
/// held-out set under each arm and writes ablation.csv, per_clip.csv, ranking.csv
/// and orderings.csv.
AblationOutcome cmd_ablate(const RunConfig& cfg, const fs::path& out, std::ostream& log);

/// Evaluates a sampled clip directory against its source clip and target apertures.
EvalReport cmd_eval(const fs::path& output_dir, const fs::path& source_dir,
                    const fs::path& target_csv);

/// Ranks the rows of one or more eval CSVs (`label,lmd,...`).
std::string cmd_report(const std::vector<fs::path>& inputs);

}  // namespace flowsync::cli
