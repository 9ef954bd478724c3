#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flowtab/generator.hpp"
#include "flowtab/model.hpp"

namespace flowtab {

enum class AlgorithmKind { first, threshold, sampling };
enum class SamplingMode { uniform, size_scaled };

/// How long a flow (and therefore its entry) stays in the table.
///  - equal: every flow lasts one time unit; an entry created at packet j of
///    an n-packet flow lives (n - j + 1) / n of it.
///  - proportional: flow duration is proportional to its packet count.
enum class DurationModel { equal, proportional };

std::string_view to_string(AlgorithmKind kind);
AlgorithmKind parse_algorithm(std::string_view text);
std::string_view to_string(DurationModel model);
DurationModel parse_duration_model(std::string_view text);

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::first;
  Axis axis = Axis::length;
  double threshold = 0.0;    // packets or bytes (first, threshold)
  double probability = 1.0;  // sampling
  SamplingMode mode = SamplingMode::uniform;
  double max_packet_size = 1518.0;  // s_max for size-scaled sampling

  static AlgorithmSpec first(Axis axis, double threshold);
  static AlgorithmSpec counting(Axis axis, double threshold);
  /// Uniform sampling on the length axis, size-scaled sampling on the size axis.
  static AlgorithmSpec sampling(Axis axis, double probability, double max_packet_size = 1518.0);

  void validate() const;
};

struct FlowOutcome {
  bool entry_created = false;
  std::int64_t covered_bytes = 0;
  double occupancy_fraction = 0.0;
  std::int64_t flow_bytes = 0;
  std::int64_t flow_packets = 0;
  std::int64_t covered_packets = 0;  // packets from the triggering one onward
};

FlowOutcome eval_first(const FlowRecord& flow, const AlgorithmSpec& spec);
FlowOutcome eval_threshold(const FlowRecord& flow, const AlgorithmSpec& spec);

/// Sampling driven by one uniform variate `u` in (0, 1): the sampled packet is
/// the first index whose cumulative detection probability reaches `u`, which
/// is distributed exactly as independent per-packet Bernoulli trials.
FlowOutcome eval_sampling(const FlowRecord& flow, const AlgorithmSpec& spec, double u);
FlowOutcome eval_sampling(const FlowRecord& flow, const AlgorithmSpec& spec, UniformSource& rng);

/// Dispatches on spec.kind; `u` is only consumed by sampling.
FlowOutcome evaluate(const FlowRecord& flow, const AlgorithmSpec& spec, double u);

/// 1 - (1 - p)^n.
double p_total(double p, double n);

struct PathProfile {
  struct Path {
    double probability = 1.0;
    std::vector<double> switch_probabilities;
  };
  std::vector<Path> paths;

  void validate() const;
};

/// Effective probability when every switch on the path samples independently.
double p_eff_paths(const PathProfile& profile);
/// Equiprobable-path simplification with average path length l_avg.
double p_eff_avg(double p, double l_avg);

struct MetricsReport {
  double coverage = 0.0;  // percent of bytes
  double ops_reduction = 0.0;
  double occ_reduction = 0.0;
  std::int64_t flows = 0;
  std::int64_t entries = 0;

  bool degenerate() const { return entries == 0; }
};

/// Order-insensitive sums over flow outcomes; merging partial accumulators
/// in a fixed order gives bit-identical reports.
class MetricsAccumulator {
 public:
  void add(const FlowOutcome& outcome);
  void merge(const MetricsAccumulator& other);
  MetricsReport report(DurationModel duration = DurationModel::equal) const;

  std::int64_t flows() const { return flows_; }
  std::int64_t entries() const { return entries_; }

 private:
  std::int64_t flows_ = 0;
  std::int64_t entries_ = 0;
  std::int64_t flow_bytes_ = 0;
  std::int64_t covered_bytes_ = 0;
  std::int64_t flow_packets_ = 0;
  std::int64_t covered_packets_ = 0;
  double occupancy_ = 0.0;
};

/// Throws ValidationError on an empty stream and DegenerateError when no
/// entry was created (the report then has infinite reductions).
MetricsReport aggregate(std::span<const FlowOutcome> outcomes, DurationModel duration = DurationModel::equal);

}  // namespace flowtab
