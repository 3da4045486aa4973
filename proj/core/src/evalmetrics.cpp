#include "flowsync/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"
#include "flowsync/rng.hpp"

namespace flowsync {
namespace {

std::vector<double> residuals(const std::vector<double>& y, const std::vector<double>& x) {
  const double n = static_cast<double>(y.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = (y[i] - my) - slope * (x[i] - mx);
  return r;
}

constexpr double kTinyVariance = 1e-12;

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ContractError("pearson: length mismatch or empty");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= kTinyVariance * n || sbb <= kTinyVariance * n) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double partial_correlation(const std::vector<double>& a, const std::vector<double>& b,
                           const std::vector<double>& c) {
  if (a.size() != b.size() || a.size() != c.size()) {
    throw ContractError("partial_correlation: length mismatch");
  }
  return pearson(residuals(a, c), residuals(b, c));
}

EvalReport eval_clip(const FrameSequence& output, const FrameSequence& source, const FaceSpec& spec,
                     const std::vector<double>& target_apertures,
                     const std::vector<double>& source_apertures) {
  const std::size_t n = output.size();
  if (source.size() != n || target_apertures.size() != n || source_apertures.size() != n) {
    throw ContractError("eval_clip: output, source and aperture sequences must have equal length");
  }
  if (n == 0) throw ContractError("eval_clip: empty clip");
  EvalReport r;
  r.n_frames = n;
  const MouthBox box = spec.mouth_box();
  const FaceRenderer renderer(spec);

  std::vector<double> measured(n), control(n), out_px, src_px;
  double sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    require_same_shape(output[t], source[t], "eval_clip");
    measured[t] = measure_aperture(output[t], spec);
    control[t] = measure_aperture(renderer.render(std::clamp(target_apertures[t], 0.0, 1.0)), spec);
    r.lmd += std::abs(measured[t] - target_apertures[t]) / static_cast<double>(n);
    for (std::size_t y = 0; y < output[t].height(); ++y) {
      for (std::size_t x = 0; x < output[t].width(); ++x) {
        if (box.contains(y, x)) continue;
        const double d = output[t](y, x) - source[t](y, x);
        sq += d * d;
        out_px.push_back(output[t](y, x));
        src_px.push_back(source[t](y, x));
      }
    }
  }
  r.outside_mse = out_px.empty() ? 0.0 : sq / static_cast<double>(out_px.size());
  r.csim = out_px.empty() ? 0.0 : pearson(out_px, src_px);
  if (n < 3) {
    r.leakage_defined = false;
    r.leakage = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.leakage = partial_correlation(measured, source_apertures, control);
  }
  return r;
}

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport m;
  if (reports.empty()) return m;
  std::size_t n_leak = 0;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    m.lmd += r.lmd / n;
    m.outside_mse += r.outside_mse / n;
    m.csim += r.csim / n;
    m.n_frames += r.n_frames;
    if (r.leakage_defined) {
      m.leakage += r.leakage;
      ++n_leak;
    }
  }
  m.leakage_defined = n_leak > 0;
  m.leakage = n_leak > 0 ? m.leakage / static_cast<double>(n_leak)
                         : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::string eval_csv_header() { return "label,lmd,outside_mse,csim,leakage,n_frames\n"; }

std::string eval_csv_row(const std::string& label, const EvalReport& r) {
  std::ostringstream out;
  out << label << "," << format_double(r.lmd) << "," << format_double(r.outside_mse) << ","
      << format_double(r.csim) << "," << (r.leakage_defined ? format_double(r.leakage) : "nan")
      << "," << r.n_frames << "\n";
  return out.str();
}

std::string compare_runs(std::vector<std::pair<std::string, EvalReport>> reports) {
  if (reports.size() < 2) throw ContractError("compare_runs needs at least two reports");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  struct Metric {
    const char* name;
    double (*value)(const EvalReport&);
    double (*key)(double);  // smaller key ranks first
  };
  const Metric metrics[] = {
      {"lmd", [](const EvalReport& r) { return r.lmd; }, [](double v) { return v; }},
      {"outside_mse", [](const EvalReport& r) { return r.outside_mse; }, [](double v) { return v; }},
      {"csim", [](const EvalReport& r) { return r.csim; }, [](double v) { return -v; }},
      {"leakage",
       [](const EvalReport& r) {
         return r.leakage_defined ? r.leakage : std::numeric_limits<double>::quiet_NaN();
       },
       [](double v) { return std::abs(v); }},
  };

  std::ostringstream out;
  out << "metric,rank,label,value,best\n";
  for (const Metric& m : metrics) {
    std::vector<std::size_t> order(reports.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto key = [&](std::size_t i) {
      const double v = m.value(reports[i].second);
      return std::isnan(v) ? std::numeric_limits<double>::infinity() : m.key(v);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    const double best = key(order.front());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const std::size_t i = order[rank];
      const double v = m.value(reports[i].second);
      out << m.name << "," << rank + 1 << "," << reports[i].first << ","
          << (std::isnan(v) ? std::string("nan") : format_double(v)) << ","
          << (key(i) == best && !std::isnan(v) ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

double bootstrap_win_rate(const std::vector<double>& a, const std::vector<double>& b,
                          bool lower_is_better, std::size_t n_resamples, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) throw ContractError("bootstrap: paired samples required");
  if (n_resamples == 0) throw ConfigError("bootstrap: at least one resample required");
  RngStream rng(seed, 0x626f6f74ULL);  // "boot"
  std::size_t wins = 0;
  const std::size_t n = a.size();
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double diff = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = rng.below(n);
      diff += a[i] - b[i];
    }
    if (lower_is_better ? diff < 0.0 : diff > 0.0) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(n_resamples);
}

}  // namespace flowsync
