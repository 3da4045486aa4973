#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowsync/facegen.hpp"
#include "flowsync/grid.hpp"

namespace flowsync {

struct EvalReport {
  double lmd = 0.0;          ///< mean |measured aperture - target aperture|
  double outside_mse = 0.0;  ///< vs. source, outside the mouth bounding box
  double csim = 0.0;         ///< Pearson correlation of outside-box pixels, output vs. source
  double leakage = 0.0;      ///< partial correlation of output and source apertures given target
  bool leakage_defined = true;
  std::size_t n_frames = 0;
};

/// Partial correlation corr(a, b | c) from the residuals of a and b regressed on c
/// (with intercept). A residual with no variance gives 0.
double partial_correlation(const std::vector<double>& a, const std::vector<double>& b,
                           const std::vector<double>& c);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// All four metrics for one clip. The leakage control is the target trajectory as the
/// aperture measurement reports it (rendered at `spec`, then measured), so a perfect
/// renderer of the target scores exactly 0. Clips shorter than 3 frames get an
/// undefined leakage. Throws ContractError on length mismatches.
EvalReport eval_clip(const FrameSequence& output, const FrameSequence& source, const FaceSpec& spec,
                     const std::vector<double>& target_apertures,
                     const std::vector<double>& source_apertures);

/// Mean of each metric over clips; leakage over the clips where it is defined.
EvalReport mean_report(const std::vector<EvalReport>& reports);

std::string eval_csv_header();
/// `label,lmd,outside_mse,csim,leakage,n_frames`
std::string eval_csv_row(const std::string& label, const EvalReport& r);

/// Long-format ranking `metric,rank,label,value,best`. lmd and outside_mse rank
/// ascending, csim descending, leakage by ascending magnitude; ties keep label order.
/// Rows tied with the best value are marked best = 1. Throws ContractError on < 2 reports.
std::string compare_runs(std::vector<std::pair<std::string, EvalReport>> reports);

/// Paired bootstrap over clips: fraction of resamples in which mean(a) is strictly
/// better than mean(b).
double bootstrap_win_rate(const std::vector<double>& a, const std::vector<double>& b,
                          bool lower_is_better, std::size_t n_resamples, std::uint64_t seed);

}  // namespace flowsync
