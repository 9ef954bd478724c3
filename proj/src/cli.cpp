#include "flowtab/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "flowtab/algorithms.hpp"
#include "flowtab/analytic.hpp"
#include "flowtab/error.hpp"
#include "flowtab/generator.hpp"
#include "flowtab/model.hpp"
#include "flowtab/sweep.hpp"

namespace flowtab {

namespace {

using json = nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out.flush()) throw Error("failed writing '" + path + "'");
}

double parse_number(const std::string& text, const std::string& flag) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ValidationError(flag + ": '" + text + "' is not a number");
  return v;
}

std::int64_t parse_count(const std::string& text, const std::string& flag, std::int64_t minimum) {
  const double v = parse_number(text, flag);
  if (!(v >= static_cast<double>(minimum)) || v != std::floor(v) || v > 0x1p62) {
    throw ValidationError(flag + " must be an integer >= " + std::to_string(minimum) + ", got '" + text + "'");
  }
  return static_cast<std::int64_t>(v);
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split(text)) out.push_back(parse_number(item, flag));
  if (out.empty()) throw ValidationError(flag + " needs at least one value");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(text)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item[0] == '-') {
      throw ValidationError("--seeds: '" + item + "' is not a non-negative integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--seeds needs at least one value");
  return out;
}

std::vector<AlgorithmKind> parse_algorithms(const std::string& text) {
  std::vector<AlgorithmKind> out;
  for (const auto& item : split(text)) {
    const auto kind = parse_algorithm(item);
    if (std::find(out.begin(), out.end(), kind) == out.end()) out.push_back(kind);
  }
  if (out.empty()) throw ValidationError("--algo needs at least one algorithm");
  return out;
}

// Expands `--config file.json` into trailing `--key value` flags.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> kept;
  std::vector<std::string> config_paths;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file path");
      config_paths.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_paths.push_back(args[i].substr(9));
    } else {
      kept.push_back(args[i]);
    }
  }
  for (const auto& path : config_paths) {
    json doc;
    try {
      doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw ValidationError("config file '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config file '" + path + "' must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
      const std::string flag = "--" + key;
      if (value.is_boolean()) {
        if (value.get<bool>()) kept.push_back(flag);
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& item : value) {
          if (!joined.empty()) joined += ",";
          joined += item.is_string() ? item.get<std::string>() : item.dump();
        }
        kept.push_back(flag);
        kept.push_back(joined);
      } else if (value.is_string()) {
        kept.push_back(flag);
        kept.push_back(value.get<std::string>());
      } else if (value.is_number()) {
        kept.push_back(flag);
        kept.push_back(value.dump());
      } else {
        throw ValidationError("config key '" + key + "' has an unsupported value");
      }
    }
  }
  return kept;
}

struct SimulateFlags {
  std::string model;
  std::string axis = "length";
  std::string algo = "first,threshold,sampling";
  std::string thresholds;
  std::string probs;
  std::string flows = "1e6";
  std::string seeds = "1";
  std::string coupling = "comonotone";
  std::string min_packet = "64";
  std::string duration = "equal";
  std::string format = "csv,md,plot";
  std::string size_law = "packets";
  std::string out;
  std::string flows_csv;
  int jobs = 1;
  bool no_analytic = false;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  SweepSpec spec;
  if (f.model.empty() && f.flows_csv.empty()) throw ValidationError("simulate needs --model or --flows-csv");
  if (!f.model.empty()) spec.model = load_model(f.model);
  spec.axis = parse_axis(f.axis);
  spec.algorithms = parse_algorithms(f.algo);
  spec.thresholds = f.thresholds.empty() ? default_thresholds(spec.axis) : parse_numbers(f.thresholds, "--thresholds");
  spec.probabilities = f.probs.empty() ? default_probabilities(spec.axis) : parse_numbers(f.probs, "--probs");
  spec.seeds = parse_seeds(f.seeds);
  spec.coupling = parse_coupling(f.coupling);
  spec.min_packet = parse_count(f.min_packet, "--min-packet", 1);
  spec.duration = parse_duration_model(f.duration);
  spec.jobs = f.jobs;
  spec.analytic = !f.no_analytic;
  spec.size_law = parse_size_axis_law(f.size_law);
  if (f.jobs < 1) throw ValidationError("--jobs must be at least 1");
  if (!f.flows_csv.empty()) {
    std::ifstream in(f.flows_csv, std::ios::binary);
    if (!in) throw Error("cannot open '" + f.flows_csv + "'");
    spec.flows = read_flows_csv(in);
    if (spec.flows.empty()) throw ValidationError("'" + f.flows_csv + "' holds no flows");
    for (auto& flow : spec.flows) assign_packetization(flow, spec.max_packet_size());
  } else {
    spec.flow_count = parse_count(f.flows, "--flows", 1);
  }

  std::vector<OutputFormat> formats;
  for (const auto& item : split(f.format)) formats.push_back(parse_output_format(item));
  if (formats.empty()) throw ValidationError("--format needs at least one format");

  const auto result = run_sweep(spec);
  if (result.clamped_fraction > 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "note: %.4g%% of generated flows had their size clamped\n",
                  100.0 * result.clamped_fraction);
    err << buf;
  }
  if (f.out == "-") {
    for (auto format : formats) out << emit_table(result, format);
    return kExitOk;
  }
  const std::string prefix = f.out.empty() ? result.model_name + "_" + std::string(to_string(spec.axis)) : f.out;
  for (auto format : formats) {
    const std::string path = prefix + std::string(output_suffix(format));
    write_file(path, emit_table(result, format));
    out << path << "\n";
  }
  return kExitOk;
}

struct AnalyzeFlags {
  std::string model;
  std::string axis = "length";
  std::string algo = "first,threshold,sampling";
  std::string coverage;
  std::string duration = "equal";
  std::string size_law = "packets";
  std::string out;
};

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out, std::ostream& err) {
  const auto model = load_model(f.model);
  const auto axis = parse_axis(f.axis);
  const auto algorithms = parse_algorithms(f.algo);
  const auto targets = f.coverage.empty() ? default_coverage_targets() : parse_numbers(f.coverage, "--coverage");
  const auto curve = coverage_curve(model, axis, algorithms, targets, parse_duration_model(f.duration),
                                    parse_size_axis_law(f.size_law));
  const std::size_t expected = algorithms.size() * targets.size();
  if (curve.size() < expected) {
    err << "note: " << expected - curve.size() << " unreachable (algorithm, coverage) targets left out\n";
  }
  const auto text = emit_curve(curve);
  if (f.out.empty() || f.out == "-") {
    out << text;
  } else {
    write_file(f.out, text);
    out << f.out << "\n";
  }
  return kExitOk;
}

PathProfile load_profile(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("path profile '" + path + "': " + e.what());
  }
  PathProfile profile;
  try {
    for (const auto& p : doc.at("paths")) {
      PathProfile::Path path_entry;
      path_entry.probability = p.value("probability", 1.0);
      path_entry.switch_probabilities = p.at("switches").get<std::vector<double>>();
      profile.paths.push_back(std::move(path_entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError("path profile '" + path + "' must be {\"paths\": [{\"probability\": w, \"switches\": [p, ...]}]}: " +
                          e.what());
  }
  return profile;
}

int cmd_peff(const std::string& p, const std::string& l_avg, const std::string& profile, std::ostream& out) {
  double value = 0.0;
  if (!profile.empty()) {
    if (!p.empty() || !l_avg.empty()) throw ValidationError("--profile cannot be combined with --p/--l-avg");
    value = p_eff_paths(load_profile(profile));
  } else {
    if (p.empty() || l_avg.empty()) throw ValidationError("peff needs --p and --l-avg, or --profile");
    value = p_eff_avg(parse_number(p, "--p"), parse_number(l_avg, "--l-avg"));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g\n", value);
  out << buf;
  return kExitOk;
}

struct GenerateFlags {
  std::string model;
  std::string flows = "1e6";
  std::string seed = "1";
  std::string coupling = "comonotone";
  std::string min_packet = "64";
  std::string out;
  int jobs = 1;
};

int cmd_generate(const GenerateFlags& f, std::ostream& out, std::ostream& err) {
  const auto model = load_model(f.model);
  GeneratorConfig config;
  config.flow_count = parse_count(f.flows, "--flows", 1);
  const auto seeds = parse_seeds(f.seed);
  if (seeds.size() != 1) throw ValidationError("--seed takes a single value");
  config.seed = seeds[0];
  config.coupling = parse_coupling(f.coupling);
  config.min_packet = parse_count(f.min_packet, "--min-packet", 1);
  config.jobs = f.jobs;
  const auto population = generate_population(model, config);
  if (population.clamped > 0) err << "note: " << population.clamped << " flows had their size clamped\n";
  if (f.out.empty() || f.out == "-") {
    write_flows_csv(out, population.flows);
  } else {
    std::ostringstream buffer;
    write_flows_csv(buffer, population.flows);
    write_file(f.out, buffer.str());
  }
  return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  json report;
  report["model"] = path;
  std::vector<ModelIssue> issues;
  int code = kExitOk;
  std::string document;
  try {
    document = read_file(resolve_model_path(path).string());
  } catch (const Error& e) {
    issues.push_back({"IOError", e.what()});
    code = kExitRuntime;
  }
  if (code == kExitOk) {
    issues = check_model(document);
    for (const auto& issue : issues) {
      const bool structural = issue.kind == "SchemaError" || issue.kind == "WeightError";
      if (structural) {
        code = kExitValidation;
      } else if (code == kExitOk) {
        code = kExitConsistency;
      }
    }
  }
  report["valid"] = issues.empty();
  report["errors"] = json::array();
  for (const auto& issue : issues) report["errors"].push_back({{"type", issue.kind}, {"message", issue.message}});
  out << report.dump(2) << "\n";
  return code;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow-table usage reduction: simulation and analytic evaluation", "flowtab"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", "flowtab 0.1.0");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-model", "Check a model file and print a JSON error list");
  validate->add_option("path", validate_path, "Model JSON file")->required();

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo sweep over thresholds and probabilities");
  simulate->add_option("--model", sim.model, "Model JSON file or name under $FLOWTAB_MODEL_DIR");
  simulate->add_option("--axis", sim.axis, "length or size")->capture_default_str();
  simulate->add_option("--algo", sim.algo, "Comma-separated algorithms")->capture_default_str();
  simulate->add_option("--thresholds", sim.thresholds, "Comma-separated thresholds (default: powers of two)");
  simulate->add_option("--probs", sim.probs, "Comma-separated sampling probabilities (default: 2^-k)");
  auto* flows_opt = simulate->add_option("--flows", sim.flows, "Flows per run, e.g. 1e6")->capture_default_str();
  auto* seeds_opt = simulate->add_option("--seeds", sim.seeds, "Comma-separated seeds")->capture_default_str();
  auto* coupling_opt =
      simulate->add_option("--coupling", sim.coupling, "comonotone or independent")->capture_default_str();
  auto* min_opt = simulate->add_option("--min-packet", sim.min_packet, "Smallest packet in bytes")->capture_default_str();
  simulate->add_option("--duration-model", sim.duration, "equal or proportional")->capture_default_str();
  simulate->add_option("--format", sim.format, "Comma-separated: csv, md, plot")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output prefix ('-' for stdout; default <model>_<axis>)");
  auto* csv_opt = simulate->add_option("--flows-csv", sim.flows_csv, "Evaluate flows from a CSV instead of generating");
  csv_opt->excludes(flows_opt)->excludes(seeds_opt)->excludes(coupling_opt)->excludes(min_opt);
  simulate->add_option("--jobs", sim.jobs, "Worker threads")->capture_default_str();
  simulate->add_flag("--no-analytic", sim.no_analytic, "Leave out the analytic columns");
  simulate->add_option("--size-law", sim.size_law, "Size-axis analytic law: packets or continuous")
      ->capture_default_str();

  AnalyzeFlags ana;
  auto* analyze = app.add_subcommand("analyze", "Analytic reduction versus coverage curves");
  analyze->add_option("--model", ana.model, "Model JSON file")->required();
  analyze->add_option("--axis", ana.axis, "length or size")->capture_default_str();
  analyze->add_option("--algo", ana.algo, "Comma-separated algorithms")->capture_default_str();
  analyze->add_option("--coverage", ana.coverage, "Comma-separated coverage targets in percent (default 1..99.9)");
  analyze->add_option("--duration-model", ana.duration, "equal or proportional")->capture_default_str();
  analyze->add_option("--size-law", ana.size_law, "Size-axis analytic law: packets or continuous")
      ->capture_default_str();
  analyze->add_option("--out", ana.out, "Output CSV file (default stdout)");

  std::string peff_p, peff_l, peff_profile;
  auto* peff = app.add_subcommand("peff", "Effective sampling probability over several switches");
  peff->add_option("--p", peff_p, "Per-switch sampling probability");
  peff->add_option("--l-avg", peff_l, "Average path length in switches");
  peff->add_option("--profile", peff_profile, "Path profile JSON");

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic flow population as CSV");
  generate->add_option("--model", gen.model, "Model JSON file")->required();
  generate->add_option("--flows", gen.flows, "Number of flows")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  generate->add_option("--coupling", gen.coupling, "comonotone or independent")->capture_default_str();
  generate->add_option("--min-packet", gen.min_packet, "Smallest packet in bytes")->capture_default_str();
  generate->add_option("--out", gen.out, "Output CSV file (default stdout)");
  generate->add_option("--jobs", gen.jobs, "Worker threads")->capture_default_str();

  try {
    args = expand_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }
    if (*validate) return cmd_validate(validate_path, out);
    if (*simulate) return cmd_simulate(sim, out, err);
    if (*analyze) return cmd_analyze(ana, out, err);
    if (*peff) return cmd_peff(peff_p, peff_l, peff_profile, out);
    if (*generate) return cmd_generate(gen, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConsistencyError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitConsistency;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace flowtab
