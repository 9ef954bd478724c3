#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowtab/algorithms.hpp"
#include "flowtab/analytic.hpp"
#include "flowtab/generator.hpp"
#include "flowtab/model.hpp"

namespace flowtab {

enum class OutputFormat { csv, markdown, plotdata };

OutputFormat parse_output_format(std::string_view text);
/// File suffix for an output format: ".csv", ".md" or ".plot.csv".
std::string_view output_suffix(OutputFormat format);

/// Powers of two from 1 packet (length) or 64 bytes (size), as in the published tables.
std::vector<double> default_thresholds(Axis axis);
/// 1, 1/2, 1/4, ... with as many entries as default_thresholds(axis).
std::vector<double> default_probabilities(Axis axis);

struct SweepSpec {
  std::optional<TrafficModel> model;  // needed for generation and analytic columns
  Axis axis = Axis::length;
  std::vector<AlgorithmKind> algorithms{AlgorithmKind::first, AlgorithmKind::threshold, AlgorithmKind::sampling};
  std::vector<double> thresholds;
  std::vector<double> probabilities;
  std::vector<std::uint64_t> seeds{1};
  std::int64_t flow_count = 1'000'000;
  Coupling coupling = Coupling::comonotone;
  std::int64_t min_packet = 64;
  DurationModel duration = DurationModel::equal;
  int jobs = 1;
  /// When non-empty these flows are evaluated instead of generated ones.
  std::vector<FlowRecord> flows;
  bool analytic = true;
  SizeAxisLaw size_law = SizeAxisLaw::packets;

  bool includes(AlgorithmKind kind) const;
  double max_packet_size() const { return model ? model->max_packet_size : 1518.0; }
  void validate() const;
};

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation across seeds (0 for one seed)
};

struct CellResult {
  AlgorithmSpec spec;
  std::vector<MetricsReport> runs;  // one per seed, in seed order
  MetricStats coverage;
  MetricStats ops_reduction;
  MetricStats occ_reduction;
  std::optional<AnalyticReport> analytic;

  double parameter() const {
    return spec.kind == AlgorithmKind::sampling ? spec.probability : spec.threshold;
  }
};

struct SweepResult {
  std::string model_name;
  Axis axis = Axis::length;
  std::int64_t flows_per_run = 0;
  std::size_t seed_count = 0;
  double clamped_fraction = 0.0;  // mean over seeds; 0 for ingested flows
  std::vector<CellResult> first;
  std::vector<CellResult> threshold;
  std::vector<CellResult> sampling;

  const std::vector<CellResult>& cells(AlgorithmKind kind) const;
};

/// Runs every (algorithm, parameter) cell on the same flows for each seed.
/// Results are identical for any number of jobs.
SweepResult run_sweep(const SweepSpec& spec);

/// Paper-style table: threshold | first | threshold || probability | sampling.
std::string emit_table(const SweepResult& result, OutputFormat format);

/// One point of a reduction-versus-coverage curve.
struct CurvePoint {
  AlgorithmKind algorithm = AlgorithmKind::first;
  double target = 0.0;
  Inversion inversion;
  double occ_relative_to_first = 1.0;  // first's occupancy reduction / this one's
  double ops_relative_to_first = 1.0;
};

/// Unreachable targets are left out.
std::vector<CurvePoint> coverage_curve(const TrafficModel& model, Axis axis,
                                       const std::vector<AlgorithmKind>& algorithms,
                                       const std::vector<double>& targets,
                                       DurationModel duration = DurationModel::equal,
                                       SizeAxisLaw law = SizeAxisLaw::packets);

/// Default coverage grid: 1..99 % in steps of 1, then 99.5 and 99.9.
std::vector<double> default_coverage_targets();

/// CSV: algorithm,target_coverage,param,coverage,occ_reduction,ops_reduction,occ_rel_first,ops_rel_first
std::string emit_curve(const std::vector<CurvePoint>& curve);

}  // namespace flowtab
