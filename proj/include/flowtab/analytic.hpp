#pragma once

#include <functional>
#include <string_view>

#include "flowtab/algorithms.hpp"
#include "flowtab/generator.hpp"
#include "flowtab/model.hpp"

namespace flowtab {

/// Metrics computed directly from the model mixtures.
struct AnalyticReport {
  double coverage = 0.0;  // percent of bytes
  double ops_reduction = 0.0;
  double occ_reduction = 0.0;
  double truncation_bound = 0.0;  // probability mass left out of the sums
  bool cap_hit = false;

  /// Set when the truncation bound is too large to trust the reported values.
  bool flagged() const { return cap_hit || truncation_bound >= 1e-6; }
};

/// How size-axis threshold and sampling metrics treat packets.
///  - packets: each size is mapped to its flow length through the model's
///    comonotone quantile coupling and split into packets as the generator
///    does, so entries start at packet boundaries.
///  - continuous: bytes are a continuum (threshold fraction 1 - T/s,
///    exponential detection at rate p / s_max per byte).
enum class SizeAxisLaw { packets, continuous };

std::string_view to_string(SizeAxisLaw law);
SizeAxisLaw parse_size_axis_law(std::string_view text);

/// Expected fraction of an l-packet flow's packets that are covered when each
/// packet is sampled with probability p: 1 - (1 - p)(1 - (1 - p)^l) / (p l).
double sampled_fraction(double p, double l);

AnalyticReport analytic_first(const TrafficModel& model, Axis axis, double threshold,
                              DurationModel duration = DurationModel::equal);
AnalyticReport analytic_threshold(const TrafficModel& model, Axis axis, double threshold,
                                  DurationModel duration = DurationModel::equal);
AnalyticReport analytic_sampling_length(const TrafficModel& model, double p,
                                        DurationModel duration = DurationModel::equal);
/// Continuous-byte approximation: detection rate p / s_max per byte.
AnalyticReport analytic_sampling_size(const TrafficModel& model, double p,
                                      DurationModel duration = DurationModel::equal);

/// Packet-granular size-axis variants (see SizeAxisLaw::packets).
AnalyticReport analytic_threshold_packets(const TrafficModel& model, double threshold,
                                          DurationModel duration = DurationModel::equal);
AnalyticReport analytic_sampling_size_packets(const TrafficModel& model, double p,
                                              DurationModel duration = DurationModel::equal);

/// Dispatches on the algorithm kind; sampling on the size axis is size-scaled.
AnalyticReport analytic(const TrafficModel& model, const AlgorithmSpec& spec,
                        DurationModel duration = DurationModel::equal, SizeAxisLaw law = SizeAxisLaw::packets);

struct Inversion {
  double parameter = 0.0;  // threshold or probability
  AnalyticReport report;
};

/// Parameter at which the coverage curve crosses `coverage_percent`: the
/// smallest threshold (largest probability) whose coverage does not exceed it.
/// Length-axis thresholds are whole packets.
Inversion invert_for_coverage(const TrafficModel& model, AlgorithmKind kind, Axis axis, double coverage_percent,
                              DurationModel duration = DurationModel::equal, SizeAxisLaw law = SizeAxisLaw::packets);

namespace detail {

struct Expectation {
  double value = 0.0;
  double truncation = 0.0;
  bool cap_hit = false;
};

/// E[f(X); X > from] for a mixture; `f` must map into [0, 1]. Discrete
/// mixtures sum the probability mass exactly near `from` and integrate the
/// far tail with a half-packet continuity correction.
Expectation expect_above(const Mixture& mixture, double from, const std::function<double(double)>& f,
                         double cap = 0x1p40);

/// Flow of `size` bytes as the comonotone generator produces it: the length
/// is the length quantile at the size's CDF level (the midpoint of an atom).
FlowRecord comonotone_flow(const TrafficModel& model, double size);

}  // namespace detail

}  // namespace flowtab
