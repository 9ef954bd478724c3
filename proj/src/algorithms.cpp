#include "flowtab/algorithms.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flowtab/error.hpp"

namespace flowtab {

std::string_view to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::first: return "first";
    case AlgorithmKind::threshold: return "threshold";
    case AlgorithmKind::sampling: return "sampling";
  }
  return "?";
}

AlgorithmKind parse_algorithm(std::string_view text) {
  if (text == "first") return AlgorithmKind::first;
  if (text == "threshold") return AlgorithmKind::threshold;
  if (text == "sampling") return AlgorithmKind::sampling;
  throw ValidationError("unknown algorithm '" + std::string(text) + "' (expected first, threshold or sampling)");
}

std::string_view to_string(DurationModel model) { return model == DurationModel::equal ? "equal" : "proportional"; }

DurationModel parse_duration_model(std::string_view text) {
  if (text == "equal") return DurationModel::equal;
  if (text == "proportional") return DurationModel::proportional;
  throw ValidationError("unknown duration model '" + std::string(text) + "' (expected equal or proportional)");
}

AlgorithmSpec AlgorithmSpec::first(Axis axis, double threshold) {
  AlgorithmSpec spec;
  spec.kind = AlgorithmKind::first;
  spec.axis = axis;
  spec.threshold = threshold;
  return spec;
}

AlgorithmSpec AlgorithmSpec::counting(Axis axis, double threshold) {
  AlgorithmSpec spec = first(axis, threshold);
  spec.kind = AlgorithmKind::threshold;
  return spec;
}

AlgorithmSpec AlgorithmSpec::sampling(Axis axis, double probability, double max_packet_size) {
  AlgorithmSpec spec;
  spec.kind = AlgorithmKind::sampling;
  spec.axis = axis;
  spec.probability = probability;
  spec.mode = axis == Axis::size ? SamplingMode::size_scaled : SamplingMode::uniform;
  spec.max_packet_size = max_packet_size;
  return spec;
}

void AlgorithmSpec::validate() const {
  if (kind == AlgorithmKind::sampling) {
    if (!(probability > 0.0 && probability <= 1.0)) throw ValidationError("sampling probability must lie in (0, 1]");
    if (mode == SamplingMode::size_scaled && axis != Axis::size) {
      throw ValidationError("size-scaled sampling requires the size axis");
    }
    if (!(max_packet_size > 0.0)) throw ValidationError("max packet size must be positive");
  } else if (!(threshold >= 0.0)) {
    throw ValidationError("threshold must be non-negative");
  }
}

namespace {

FlowOutcome not_created(const FlowRecord& flow) {
  FlowOutcome out;
  out.flow_bytes = flow.size;
  out.flow_packets = flow.length;
  return out;
}

// Entry created at packet `index` (1-based); that packet and all later ones are covered.
FlowOutcome created_at(const FlowRecord& flow, const PacketLayout& layout, std::int64_t index) {
  FlowOutcome out = not_created(flow);
  out.entry_created = true;
  out.covered_packets = flow.length - index + 1;
  out.covered_bytes = flow.size - layout.bytes_before(index);
  out.occupancy_fraction = static_cast<double>(out.covered_packets) / static_cast<double>(flow.length);
  return out;
}

double axis_value(const FlowRecord& flow, Axis axis) {
  return static_cast<double>(axis == Axis::length ? flow.length : flow.size);
}

// Smallest j >= 1 with 1 - (1 - q)^j >= u, or 0 when it exceeds `limit`.
std::int64_t first_success(double q, double u, std::int64_t limit) {
  if (limit <= 0 || q <= 0.0) return 0;
  if (q >= 1.0) return 1;
  const double ratio = std::log1p(-u) / std::log1p(-q);
  if (ratio <= 1.0) return 1;
  if (ratio > static_cast<double>(limit)) return 0;
  return static_cast<std::int64_t>(std::ceil(ratio));
}

}  // namespace

FlowOutcome eval_first(const FlowRecord& flow, const AlgorithmSpec& spec) {
  if (axis_value(flow, spec.axis) <= spec.threshold) return not_created(flow);
  return created_at(flow, PacketLayout{}, 1);
}

FlowOutcome eval_threshold(const FlowRecord& flow, const AlgorithmSpec& spec) {
  const auto layout = packet_layout(flow, std::numeric_limits<double>::infinity());
  if (axis_value(flow, spec.axis) <= spec.threshold) return not_created(flow);
  const std::int64_t index = spec.axis == Axis::length ? static_cast<std::int64_t>(std::floor(spec.threshold)) + 1
                                                       : layout.packet_exceeding(spec.threshold);
  return created_at(flow, layout, std::min(index, flow.length));
}

FlowOutcome eval_sampling(const FlowRecord& flow, const AlgorithmSpec& spec, double u) {
  const double p = spec.probability;
  if (spec.mode == SamplingMode::uniform) {
    const auto layout = packet_layout(flow, std::numeric_limits<double>::infinity());
    const std::int64_t index = first_success(p, u, flow.length);
    return index == 0 ? not_created(flow) : created_at(flow, layout, index);
  }
  const double s_max = spec.max_packet_size;
  const auto layout = packet_layout(flow, s_max);
  const double q_body = p * static_cast<double>(layout.body_size) / s_max;
  const double q_tail = p * static_cast<double>(layout.tail_size) / s_max;
  if (const std::int64_t index = first_success(q_body, u, layout.body_count); index != 0) {
    return created_at(flow, layout, index);
  }
  // Missed every body packet: the tail packets continue the same inverse transform.
  if (layout.tail_count == 0 || q_tail <= 0.0) return not_created(flow);
  if (q_tail >= 1.0) return created_at(flow, layout, layout.body_count + 1);
  const double log_miss_body = layout.body_count == 0 ? 0.0 : static_cast<double>(layout.body_count) * std::log1p(-q_body);
  const double ratio = (std::log1p(-u) - log_miss_body) / std::log1p(-q_tail);
  if (ratio > static_cast<double>(layout.tail_count)) return not_created(flow);
  const auto in_tail = ratio <= 1.0 ? std::int64_t{1} : static_cast<std::int64_t>(std::ceil(ratio));
  return created_at(flow, layout, layout.body_count + in_tail);
}

FlowOutcome eval_sampling(const FlowRecord& flow, const AlgorithmSpec& spec, UniformSource& rng) {
  return eval_sampling(flow, spec, rng());
}

FlowOutcome evaluate(const FlowRecord& flow, const AlgorithmSpec& spec, double u) {
  switch (spec.kind) {
    case AlgorithmKind::first: return eval_first(flow, spec);
    case AlgorithmKind::threshold: return eval_threshold(flow, spec);
    case AlgorithmKind::sampling: return eval_sampling(flow, spec, u);
  }
  return not_created(flow);
}

double p_total(double p, double n) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  if (!(n >= 0.0)) throw ValidationError("packet count must be non-negative");
  if (n == 0.0 || p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  return -std::expm1(n * std::log1p(-p));
}

void PathProfile::validate() const {
  if (paths.empty()) throw ValidationError("path profile needs at least one path");
  double total = 0.0;
  for (const auto& path : paths) {
    if (!(path.probability >= 0.0 && path.probability <= 1.0)) {
      throw ValidationError("path probability must lie in [0, 1]");
    }
    for (double p : path.switch_probabilities) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("switch sampling probability must lie in [0, 1]");
    }
    total += path.probability;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ValidationError("path probabilities must sum to 1");
}

double p_eff_paths(const PathProfile& profile) {
  profile.validate();
  double total = 0.0;
  for (const auto& path : profile.paths) {
    double log_miss = 0.0;
    for (double p : path.switch_probabilities) log_miss += std::log1p(-p);
    total += path.probability * -std::expm1(log_miss);
  }
  return total;
}

double p_eff_avg(double p, double l_avg) {
  if (!(l_avg >= 1.0)) throw ValidationError("average path length must be at least 1");
  return p_total(p, l_avg);
}

void MetricsAccumulator::add(const FlowOutcome& outcome) {
  ++flows_;
  flow_bytes_ += outcome.flow_bytes;
  flow_packets_ += outcome.flow_packets;
  if (!outcome.entry_created) return;
  ++entries_;
  covered_bytes_ += outcome.covered_bytes;
  covered_packets_ += outcome.covered_packets;
  occupancy_ += outcome.occupancy_fraction;
}

void MetricsAccumulator::merge(const MetricsAccumulator& other) {
  flows_ += other.flows_;
  entries_ += other.entries_;
  flow_bytes_ += other.flow_bytes_;
  covered_bytes_ += other.covered_bytes_;
  flow_packets_ += other.flow_packets_;
  covered_packets_ += other.covered_packets_;
  occupancy_ += other.occupancy_;
}

MetricsReport MetricsAccumulator::report(DurationModel duration) const {
  MetricsReport r;
  r.flows = flows_;
  r.entries = entries_;
  if (entries_ == 0) {
    r.coverage = 0.0;
    r.ops_reduction = std::numeric_limits<double>::infinity();
    r.occ_reduction = std::numeric_limits<double>::infinity();
    return r;
  }
  r.coverage = 100.0 * static_cast<double>(covered_bytes_) / static_cast<double>(flow_bytes_);
  r.ops_reduction = static_cast<double>(flows_) / static_cast<double>(entries_);
  r.occ_reduction = duration == DurationModel::equal
                        ? static_cast<double>(flows_) / occupancy_
                        : static_cast<double>(flow_packets_) / static_cast<double>(covered_packets_);
  return r;
}

MetricsReport aggregate(std::span<const FlowOutcome> outcomes, DurationModel duration) {
  if (outcomes.empty()) throw ValidationError("cannot aggregate an empty outcome stream");
  MetricsAccumulator acc;
  for (const auto& o : outcomes) acc.add(o);
  auto report = acc.report(duration);
  if (report.degenerate()) throw DegenerateError("no flow entry was created; reductions are infinite");
  return report;
}

}  // namespace flowtab
