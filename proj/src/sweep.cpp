#include "flowtab/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "flowtab/error.hpp"

namespace flowtab {

OutputFormat parse_output_format(std::string_view text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "md" || text == "markdown") return OutputFormat::markdown;
  if (text == "plot" || text == "plotdata") return OutputFormat::plotdata;
  throw ValidationError("unknown output format '" + std::string(text) + "' (expected csv, markdown or plotdata)");
}

std::string_view output_suffix(OutputFormat format) {
  switch (format) {
    case OutputFormat::csv: return ".csv";
    case OutputFormat::markdown: return ".md";
    case OutputFormat::plotdata: return ".plot.csv";
  }
  return "";
}

namespace {

int series_length(Axis axis) { return axis == Axis::length ? 22 : 25; }

}  // namespace

std::vector<double> default_thresholds(Axis axis) {
  const double base = axis == Axis::length ? 1.0 : 64.0;
  std::vector<double> out;
  for (int k = 0; k < series_length(axis); ++k) out.push_back(std::ldexp(base, k));
  return out;
}

std::vector<double> default_probabilities(Axis axis) {
  std::vector<double> out;
  for (int k = 0; k < series_length(axis); ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

bool SweepSpec::includes(AlgorithmKind kind) const {
  for (auto a : algorithms) {
    if (a == kind) return true;
  }
  return false;
}

void SweepSpec::validate() const {
  if (algorithms.empty()) throw ValidationError("sweep needs at least one algorithm");
  const bool wants_thresholds = includes(AlgorithmKind::first) || includes(AlgorithmKind::threshold);
  if (wants_thresholds && thresholds.empty()) throw ValidationError("sweep needs at least one threshold");
  if (includes(AlgorithmKind::sampling) && probabilities.empty()) {
    throw ValidationError("sweep needs at least one sampling probability");
  }
  for (double t : thresholds) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("thresholds must be finite and non-negative");
  }
  for (double p : probabilities) {
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("sampling probabilities must lie in (0, 1]");
  }
  if (jobs < 1) throw ValidationError("jobs must be at least 1");
  if (flows.empty()) {
    if (!model) throw ValidationError("sweep needs a model or ingested flows");
    if (seeds.empty()) throw ValidationError("sweep needs at least one seed");
    if (flow_count < 1) throw ValidationError("flow count must be at least 1");
    if (min_packet < 1) throw ValidationError("minimum packet size must be at least 1");
  }
}

const std::vector<CellResult>& SweepResult::cells(AlgorithmKind kind) const {
  switch (kind) {
    case AlgorithmKind::first: return first;
    case AlgorithmKind::threshold: return threshold;
    case AlgorithmKind::sampling: return sampling;
  }
  return first;
}

namespace {

std::vector<AlgorithmSpec> build_cells(const SweepSpec& spec) {
  std::vector<AlgorithmSpec> cells;
  for (auto kind : {AlgorithmKind::first, AlgorithmKind::threshold, AlgorithmKind::sampling}) {
    if (!spec.includes(kind)) continue;
    if (kind == AlgorithmKind::sampling) {
      for (double p : spec.probabilities) cells.push_back(AlgorithmSpec::sampling(spec.axis, p, spec.max_packet_size()));
    } else {
      for (double t : spec.thresholds) {
        cells.push_back(kind == AlgorithmKind::first ? AlgorithmSpec::first(spec.axis, t)
                                                     : AlgorithmSpec::counting(spec.axis, t));
      }
    }
  }
  return cells;
}

MetricStats stats(const std::vector<double>& values) {
  MetricStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1 && std::isfinite(s.mean)) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct RunOutput {
  std::vector<MetricsAccumulator> cells;
  std::int64_t flows = 0;
  std::int64_t clamped = 0;
};

// One seed: shards are processed by `jobs` workers and merged in shard order.
RunOutput run_one(const SweepSpec& spec, const std::vector<AlgorithmSpec>& cells, std::uint64_t seed) {
  const bool ingested = !spec.flows.empty();
  const std::int64_t total = ingested ? static_cast<std::int64_t>(spec.flows.size()) : spec.flow_count;
  const std::int64_t shards = shard_count(total);
  std::vector<RunOutput> parts(static_cast<std::size_t>(shards));

  GeneratorConfig config;
  config.seed = seed;
  config.flow_count = total;
  config.coupling = spec.coupling;
  config.min_packet = spec.min_packet;

  auto work = [&](std::int64_t shard) {
    RunOutput& part = parts[static_cast<std::size_t>(shard)];
    part.cells.assign(cells.size(), MetricsAccumulator{});
    Population generated;
    std::span<const FlowRecord> flows;
    if (ingested) {
      const std::int64_t begin = shard * kShardSize;
      const std::int64_t end = std::min(total, begin + kShardSize);
      flows = std::span<const FlowRecord>(spec.flows).subspan(static_cast<std::size_t>(begin),
                                                             static_cast<std::size_t>(end - begin));
    } else {
      generated = generate_shard(*spec.model, config, shard);
      part.clamped = generated.clamped;
      flows = generated.flows;
    }
    UniformSource rng(stream_seed(seed, shard, StreamTag::sampling));
    for (const auto& flow : flows) {
      const double u = rng();
      for (std::size_t c = 0; c < cells.size(); ++c) part.cells[c].add(evaluate(flow, cells[c], u));
    }
    part.flows = static_cast<std::int64_t>(flows.size());
  };

  const int jobs = static_cast<int>(std::min<std::int64_t>(spec.jobs, shards));
  if (jobs <= 1) {
    for (std::int64_t s = 0; s < shards; ++s) work(s);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    {
      std::vector<std::jthread> workers;
      for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
          try {
            for (std::int64_t s = w; s < shards; s += jobs) work(s);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  RunOutput merged;
  merged.cells.assign(cells.size(), MetricsAccumulator{});
  for (const auto& part : parts) {
    for (std::size_t c = 0; c < cells.size(); ++c) merged.cells[c].merge(part.cells[c]);
    merged.flows += part.flows;
    merged.clamped += part.clamped;
  }
  return merged;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto cells = build_cells(spec);
  for (const auto& c : cells) c.validate();

  const bool ingested = !spec.flows.empty();
  const std::vector<std::uint64_t> seeds = ingested ? std::vector<std::uint64_t>{spec.seeds.empty() ? 1 : spec.seeds[0]}
                                                    : spec.seeds;

  SweepResult result;
  result.model_name = spec.model ? spec.model->name : "ingested";
  result.axis = spec.axis;
  result.seed_count = seeds.size();

  std::vector<std::vector<MetricsReport>> runs(cells.size());
  double clamped = 0.0;
  for (auto seed : seeds) {
    const auto out = run_one(spec, cells, seed);
    result.flows_per_run = out.flows;
    clamped += out.flows > 0 ? static_cast<double>(out.clamped) / static_cast<double>(out.flows) : 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) runs[c].push_back(out.cells[c].report(spec.duration));
  }
  result.clamped_fraction = clamped / static_cast<double>(seeds.size());

  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult cell;
    cell.spec = cells[c];
    cell.runs = runs[c];
    std::vector<double> cov, ops, occ;
    for (const auto& r : cell.runs) {
      cov.push_back(r.coverage);
      ops.push_back(r.ops_reduction);
      occ.push_back(r.occ_reduction);
    }
    cell.coverage = stats(cov);
    cell.ops_reduction = stats(ops);
    cell.occ_reduction = stats(occ);
    if (spec.analytic && spec.model) {
      try {
        cell.analytic = analytic(*spec.model, cell.spec, spec.duration, spec.size_law);
      } catch (const DegenerateError&) {
        AnalyticReport none;
        none.ops_reduction = none.occ_reduction = std::numeric_limits<double>::infinity();
        cell.analytic = none;
      }
    }
    switch (cell.spec.kind) {
      case AlgorithmKind::first: result.first.push_back(std::move(cell)); break;
      case AlgorithmKind::threshold: result.threshold.push_back(std::move(cell)); break;
      case AlgorithmKind::sampling: result.sampling.push_back(std::move(cell)); break;
    }
  }
  return result;
}

namespace {

std::string fixed2(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string sig4(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string param_text(double t) {
  char buf[64];
  if (t == std::floor(t) && std::fabs(t) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", t);
  } else {
    std::snprintf(buf, sizeof buf, "%g", t);
  }
  return buf;
}

std::string prob_text(double p) {
  if (p == 1.0) return "1.00";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", p);
  return buf;
}

struct Block {
  std::string prefix;
  const std::vector<CellResult>* cells;
};

std::vector<std::string> mean_fields(const CellResult* c) {
  if (!c) return {"", "", ""};
  return {fixed2(c->coverage.mean), fixed2(c->ops_reduction.mean), fixed2(c->occ_reduction.mean)};
}

std::vector<std::string> sd_fields(const CellResult* c) {
  if (!c) return {"", "", ""};
  return {sig4(c->coverage.sd), sig4(c->ops_reduction.sd), sig4(c->occ_reduction.sd)};
}

std::vector<std::string> analytic_fields(const CellResult* c) {
  if (!c || !c->analytic) return {"", "", ""};
  return {fixed2(c->analytic->coverage), fixed2(c->analytic->ops_reduction), fixed2(c->analytic->occ_reduction)};
}

const CellResult* at(const std::vector<CellResult>& cells, std::size_t row) {
  return row < cells.size() ? &cells[row] : nullptr;
}

std::size_t row_count(const SweepResult& r) {
  return std::max({r.first.size(), r.threshold.size(), r.sampling.size()});
}

std::string threshold_param(const SweepResult& r, std::size_t row) {
  if (const auto* c = at(r.first, row)) return param_text(c->spec.threshold);
  if (const auto* c = at(r.threshold, row)) return param_text(c->spec.threshold);
  return "";
}

std::string join(const std::vector<std::string>& fields, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

std::string emit_csv(const SweepResult& r) {
  std::vector<std::string> header{"param", "first_cov", "first_ops", "first_occ", "thr_cov", "thr_ops", "thr_occ",
                                  "prob",  "samp_cov",  "samp_ops",  "samp_occ"};
  for (const char* suffix : {"_sd", "_ana"}) {
    for (const char* block : {"first", "thr", "samp"}) {
      for (const char* metric : {"_cov", "_ops", "_occ"}) header.push_back(std::string(block) + metric + suffix);
    }
  }
  std::string out = join(header, ",") + "\n";
  for (std::size_t row = 0; row < row_count(r); ++row) {
    const auto* f = at(r.first, row);
    const auto* t = at(r.threshold, row);
    const auto* s = at(r.sampling, row);
    std::vector<std::string> fields{threshold_param(r, row)};
    append(fields, mean_fields(f));
    append(fields, mean_fields(t));
    fields.push_back(s ? prob_text(s->spec.probability) : "");
    append(fields, mean_fields(s));
    for (const auto* c : {f, t, s}) append(fields, sd_fields(c));
    for (const auto* c : {f, t, s}) append(fields, analytic_fields(c));
    out += join(fields, ",") + "\n";
  }
  return out;
}

std::string emit_markdown(const SweepResult& r) {
  const bool by_length = r.axis == Axis::length;
  std::ostringstream out;
  out << "# Simulation results (decision by " << to_string(r.axis) << ")\n\n";
  out << "Model `" << r.model_name << "`, " << r.flows_per_run << " flows per run, mean of " << r.seed_count
      << (r.seed_count == 1 ? " run" : " runs") << ".\n\n";
  std::vector<std::string> header{by_length ? "Threshold (packets)" : "Threshold (bytes)"};
  const bool f = !r.first.empty(), t = !r.threshold.empty(), s = !r.sampling.empty();
  auto metric_headers = [&](const std::string& name) {
    header.push_back(name + " coverage (%)");
    header.push_back(name + " ops. reduction");
    header.push_back(name + " occ. reduction");
  };
  if (f) metric_headers("First");
  if (t) metric_headers("Threshold");
  if (s) {
    header.push_back("Sampling prob.");
    metric_headers("Sampling");
  }
  out << "| " << join(header, " | ") << " |\n";
  out << "|" << join(std::vector<std::string>(header.size(), "---:"), "|") << "|\n";
  for (std::size_t row = 0; row < row_count(r); ++row) {
    std::vector<std::string> fields{threshold_param(r, row)};
    if (f) append(fields, mean_fields(at(r.first, row)));
    if (t) append(fields, mean_fields(at(r.threshold, row)));
    if (s) {
      const auto* c = at(r.sampling, row);
      fields.push_back(c ? prob_text(c->spec.probability) : "");
      append(fields, mean_fields(c));
    }
    out << "| " << join(fields, " | ") << " |\n";
  }
  return out.str();
}

std::string full(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string emit_plot(const SweepResult& r) {
  std::string out = "algorithm,param,coverage,occ_reduction,ops_reduction,source\n";
  for (const auto* cells : {&r.first, &r.threshold, &r.sampling}) {
    for (const auto& c : *cells) {
      const std::string head = std::string(to_string(c.spec.kind)) + "," + full(c.parameter()) + ",";
      out += head + full(c.coverage.mean) + "," + full(c.occ_reduction.mean) + "," + full(c.ops_reduction.mean) +
             ",simulation\n";
      if (c.analytic) {
        out += head + full(c.analytic->coverage) + "," + full(c.analytic->occ_reduction) + "," +
               full(c.analytic->ops_reduction) + ",analytic\n";
      }
    }
  }
  return out;
}

}  // namespace

std::string emit_table(const SweepResult& result, OutputFormat format) {
  switch (format) {
    case OutputFormat::csv: return emit_csv(result);
    case OutputFormat::markdown: return emit_markdown(result);
    case OutputFormat::plotdata: return emit_plot(result);
  }
  return {};
}

std::vector<double> default_coverage_targets() {
  std::vector<double> out;
  for (int c = 1; c <= 99; ++c) out.push_back(c);
  out.push_back(99.5);
  out.push_back(99.9);
  return out;
}

std::vector<CurvePoint> coverage_curve(const TrafficModel& model, Axis axis,
                                       const std::vector<AlgorithmKind>& algorithms,
                                       const std::vector<double>& targets, DurationModel duration,
                                       SizeAxisLaw law) {
  if (algorithms.empty()) throw ValidationError("curve needs at least one algorithm");
  if (targets.empty()) throw ValidationError("curve needs at least one coverage target");
  for (double c : targets) {
    if (!(c > 0.0 && c <= 100.0)) throw ValidationError("coverage targets must lie in (0, 100]");
  }
  std::vector<std::optional<Inversion>> first_at;
  for (double c : targets) {
    try {
      first_at.push_back(invert_for_coverage(model, AlgorithmKind::first, axis, c, duration, law));
    } catch (const UnreachableError&) {
      first_at.push_back(std::nullopt);
    }
  }
  std::vector<CurvePoint> curve;
  for (auto kind : algorithms) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      CurvePoint point;
      point.algorithm = kind;
      point.target = targets[i];
      try {
        point.inversion = kind == AlgorithmKind::first && first_at[i]
                              ? *first_at[i]
                              : invert_for_coverage(model, kind, axis, targets[i], duration, law);
      } catch (const UnreachableError&) {
        continue;
      }
      const auto& inv = point.inversion.report;
      if (first_at[i]) {
        point.occ_relative_to_first = first_at[i]->report.occ_reduction / inv.occ_reduction;
        point.ops_relative_to_first = first_at[i]->report.ops_reduction / inv.ops_reduction;
      } else {
        point.occ_relative_to_first = point.ops_relative_to_first = std::numeric_limits<double>::quiet_NaN();
      }
      if (kind == AlgorithmKind::first) point.occ_relative_to_first = point.ops_relative_to_first = 1.0;
      curve.push_back(point);
    }
  }
  return curve;
}

std::string emit_curve(const std::vector<CurvePoint>& curve) {
  std::string out = "algorithm,target_coverage,param,coverage,occ_reduction,ops_reduction,occ_rel_first,ops_rel_first\n";
  for (const auto& p : curve) {
    const auto& r = p.inversion.report;
    out += std::string(to_string(p.algorithm)) + "," + full(p.target) + "," + full(p.inversion.parameter) + "," +
           full(r.coverage) + "," + full(r.occ_reduction) + "," + full(r.ops_reduction) + "," +
           full(p.occ_relative_to_first) + "," + full(p.ops_relative_to_first) + "\n";
  }
  return out;
}

}  // namespace flowtab
