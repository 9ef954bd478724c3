// Acceptance run: prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero when any criterion fails.
//
//   flowtab_acceptance [--agh-model PATH] [--only A4]
//
// A7 runs when a model reproducing the agh_2015 fits is given through
// --agh-model or FLOWTAB_AGH_MODEL; it is skipped otherwise.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flowtab/analytic.hpp"
#include "flowtab/cli.hpp"
#include "flowtab/error.hpp"
#include "flowtab/sweep.hpp"

using namespace flowtab;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

enum class Status { pass, fail, skip };

struct Verdict {
  Status status = Status::pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string model_file(const char* name) { return std::string(FLOWTAB_TEST_MODELS) + "/" + name; }

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> powers(int from, int to, double base = 1.0) {
  std::vector<double> out;
  for (int k = from; k <= to; ++k) out.push_back(base * std::exp2(k));
  return out;
}

// ---------------------------------------------------------------------------

Verdict a1_equalities() {
  const auto model = load_model(model_file("example_heavytail.json"));
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t rows = 0, bad = 0;
  for (Axis axis : {Axis::length, Axis::size}) {
    SweepSpec s;
    s.model = model;
    s.axis = axis;
    s.algorithms = {AlgorithmKind::first, AlgorithmKind::threshold};
    s.thresholds = default_thresholds(axis);
    s.flow_count = 1'000'000;
    s.analytic = false;
    s.jobs = workers();
    const auto r = run_sweep(s);
    const auto& first = r.cells(AlgorithmKind::first);
    const auto& thr = r.cells(AlgorithmKind::threshold);
    for (std::size_t i = 0; i < first.size(); ++i) {
      ++rows;
      const auto& f = first[i].runs.front();
      const auto& t = thr[i].runs.front();
      if (!(f.ops_reduction == f.occ_reduction && t.ops_reduction == f.ops_reduction)) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  Verdict v{bad == 0 && secs < 60.0 ? Status::pass : Status::fail,
            fmt("%zu rows, %zu violations, %.1f s for both axes at 1e6 flows", rows, bad, secs)};
  return v;
}

Verdict a2_full_sampling() {
  std::vector<std::string> files{model_file("toy_twopoint.json"), model_file("example_heavytail.json")};
  if (const char* agh = std::getenv("FLOWTAB_AGH_MODEL")) files.emplace_back(agh);
  std::size_t bad = 0;
  std::string info;
  for (const auto& file : files) {
    const auto model = load_model(file);
    SweepSpec s;
    s.model = model;
    s.algorithms = {AlgorithmKind::sampling};
    s.probabilities = {1.0};
    s.flow_count = 200'000;
    const auto r = run_sweep(s);
    const auto& c = r.cells(AlgorithmKind::sampling).front();
    if (!(c.coverage.mean == 100.0 && c.ops_reduction.mean == 1.0 && c.occ_reduction.mean == 1.0)) ++bad;
    const auto& a = *c.analytic;
    if (std::abs(a.coverage - 100.0) > 1e-9 || std::abs(a.ops_reduction - 1.0) > 1e-9 ||
        std::abs(a.occ_reduction - 1.0) > 1e-9) {
      ++bad;
    }
    // Size-scaled sampling at p = 1 still skips small packets; shown for reference only.
    const auto sz = analytic(model, AlgorithmSpec::sampling(Axis::size, 1.0, model.max_packet_size));
    info += fmt("; %s size-scaled p=1: %.2f%%/%.2f/%.2f", model.name.c_str(), sz.coverage, sz.ops_reduction,
                sz.occ_reduction);
  }
  return {bad == 0 ? Status::pass : Status::fail,
          fmt("length-axis p=1 gives 100.00%%/1.00/1.00 on %zu models, simulated and analytic", files.size()) + info};
}

Verdict a3_toy() {
  const auto model = load_model(model_file("toy_twopoint.json"));
  SweepSpec s;
  s.model = model;
  s.algorithms = {AlgorithmKind::first, AlgorithmKind::threshold};
  s.thresholds = {1.0};
  s.seeds = {1, 2, 3, 4, 5};
  s.flow_count = 1'000'000;
  s.jobs = workers();
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_sweep(s);

  // Hand arithmetic: a share pi of the flows is 10 packets of 100 B, the rest 1 packet.
  const double pi = 0.5;
  const double sd_pi = std::sqrt(pi * (1 - pi) / (1e6 * 5));
  struct Expect {
    const char* name;
    double sim, ana, want, sd;
  };
  const auto& f = r.cells(AlgorithmKind::first).front();
  const auto& t = r.cells(AlgorithmKind::threshold).front();
  const double denom = 9 * pi + 1;
  const std::vector<Expect> checks{
      {"first cov", f.coverage.mean, f.analytic->coverage, 100.0 * 10 / 11, 100.0 * 10 / (denom * denom) * sd_pi},
      {"first ops", f.ops_reduction.mean, f.analytic->ops_reduction, 2.0, sd_pi / (pi * pi)},
      {"first occ", f.occ_reduction.mean, f.analytic->occ_reduction, 2.0, sd_pi / (pi * pi)},
      {"thr cov", t.coverage.mean, t.analytic->coverage, 100.0 * 9 / 11, 100.0 * 9 / (denom * denom) * sd_pi},
      {"thr ops", t.ops_reduction.mean, t.analytic->ops_reduction, 2.0, sd_pi / (pi * pi)},
      {"thr occ", t.occ_reduction.mean, t.analytic->occ_reduction, 1.0 / 0.45, sd_pi / (0.9 * pi * pi)},
  };
  bool ok = true;
  double worst_z = 0.0, worst_ana = 0.0;
  for (const auto& c : checks) {
    const double z = std::abs(c.sim - c.want) / c.sd;
    const double da = std::abs(c.ana - c.want);
    worst_z = std::max(worst_z, z);
    worst_ana = std::max(worst_ana, da);
    ok = ok && z <= 3.0 && da <= 1e-9;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok ? Status::pass : Status::fail,
          fmt("first T=1 %.2f%%/%.2f/%.2f, threshold T=1 %.2f%%/%.2f/%.4f; worst |z| %.2f (limit 3), "
              "worst analytic error %.1e (limit 1e-9), %.1f s",
              f.coverage.mean, f.ops_reduction.mean, f.occ_reduction.mean, t.coverage.mean, t.ops_reduction.mean,
              t.occ_reduction.mean, worst_z, worst_ana, secs)};
}

Verdict a4_equivalence() {
  const auto model = load_model(model_file("example_heavytail.json"));
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cells = 0, bad = 0;
  double worst = 0.0;
  std::string worst_where;
  std::string failures;
  for (Axis axis : {Axis::length, Axis::size}) {
    SweepSpec s;
    s.model = model;
    s.axis = axis;
    s.thresholds = axis == Axis::length ? powers(0, 9) : powers(10, 19);
    s.probabilities = axis == Axis::length ? powers(-10, -1) : powers(-12, -3);
    s.seeds = {1, 2, 3, 4, 5};
    s.flow_count = 1'000'000;
    s.jobs = workers();
    const auto r = run_sweep(s);
    for (AlgorithmKind kind : {AlgorithmKind::first, AlgorithmKind::threshold, AlgorithmKind::sampling}) {
      const double rel = kind == AlgorithmKind::sampling && axis == Axis::size ? 0.03 : 0.02;
      for (const auto& c : r.cells(kind)) {
        ++cells;
        const auto& a = *c.analytic;
        const std::pair<const MetricStats*, double> metrics[] = {
            {&c.coverage, a.coverage}, {&c.ops_reduction, a.ops_reduction}, {&c.occ_reduction, a.occ_reduction}};
        const char* names[] = {"cov", "ops", "occ"};
        for (int m = 0; m < 3; ++m) {
          const double se = metrics[m].first->sd / std::sqrt(5.0);
          const double tol = std::max(3.0 * se, rel * std::abs(metrics[m].second));
          const double ratio = std::abs(metrics[m].first->mean - metrics[m].second) / tol;
          const auto where = fmt("%s %s %s=%g %s", std::string(to_string(axis)).c_str(),
                                 std::string(to_string(kind)).c_str(),
                                 kind == AlgorithmKind::sampling ? "p" : "T", c.parameter(), names[m]);
          if (!(ratio <= 1.0)) {
            ++bad;
            failures += fmt(" [%s sim %.6g ana %.6g]", where.c_str(), metrics[m].first->mean, metrics[m].second);
          }
          if (ratio > worst) {
            worst = ratio;
            worst_where = where;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 600.0 ? Status::pass : Status::fail,
          fmt("%zu cells x 3 metrics, %zu outside max(3 SE, 2%%|3%%); worst |diff|/tol %.2f at %s; %.0f s", cells, bad,
              worst, worst_where.c_str(), secs) +
              failures};
}

Verdict a5_closed_forms() {
  double worst_g = 0.0;
  for (double p : {1e-4, 1e-2, 0.1, 0.5, 1.0}) {
    const big bp(p), bq = 1 - bp;
    big weighted = 0, partial = 0, qk = 1;
    for (int l = 1; l <= 10'000; ++l) {
      partial += bp * qk;
      qk *= bq;
      weighted += partial;
      worst_g = std::max(worst_g, std::abs(sampled_fraction(p, l) - (weighted / l).convert_to<double>()));
    }
  }
  double worst_p = 0.0;
  for (double p = 1e-9; p <= 1.0 + 1e-12; p *= 10.0) {
    for (double n = 1.0; n <= 1e9 + 1; n *= 10.0) {
      for (double scale : {1.0, 3.0}) {
        const double pp = std::min(1.0, p * scale);
        const big exact = 1 - boost::multiprecision::pow(1 - big(pp), big(n));
        const double want = exact.convert_to<double>();
        worst_p = std::max(worst_p, std::abs(p_total(pp, n) - want) / want);
      }
    }
  }
  return {worst_g <= 1e-12 && worst_p <= 1e-9 ? Status::pass : Status::fail,
          fmt("G(l) max abs error %.2e (limit 1e-12) for l<=1e4; p_total max rel error %.2e (limit 1e-9)", worst_g,
              worst_p)};
}

Verdict a6_ordering() {
  const std::vector<double> targets{50, 75, 80, 90, 95, 99};
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t compared = 0, bad = 0;
  std::string failures;
  for (const char* file : {"example_heavytail.json"}) {
    const auto model = load_model(model_file(file));
    for (Axis axis : {Axis::length, Axis::size}) {
      const auto curve = coverage_curve(model, axis,
                                        {AlgorithmKind::first, AlgorithmKind::threshold, AlgorithmKind::sampling},
                                        targets);
      for (double target : targets) {
        const CurvePoint* pts[3] = {nullptr, nullptr, nullptr};
        for (const auto& p : curve) {
          if (p.target == target) pts[static_cast<int>(p.algorithm)] = &p;
        }
        if (!pts[0] || !pts[1] || !pts[2]) {
          ++bad;
          failures += fmt(" [%s %g%% unreachable]", std::string(to_string(axis)).c_str(), target);
          continue;
        }
        const auto& f = pts[0]->inversion.report;
        const auto& t = pts[1]->inversion.report;
        const auto& s = pts[2]->inversion.report;
        ++compared;
        const bool ok = f.occ_reduction >= t.occ_reduction && t.occ_reduction >= s.occ_reduction &&
                        f.ops_reduction >= t.ops_reduction && t.ops_reduction >= s.ops_reduction;
        if (!ok) {
          ++bad;
          failures += fmt(" [%s %g%%: occ %.3g/%.3g/%.3g ops %.3g/%.3g/%.3g]", std::string(to_string(axis)).c_str(),
                          target, f.occ_reduction, t.occ_reduction, s.occ_reduction, f.ops_reduction,
                          t.ops_reduction, s.ops_reduction);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60.0 ? Status::pass : Status::fail,
          fmt("example_heavytail, both axes: %zu coverage targets, %zu ordering violations, %.1f s", compared, bad,
              secs) +
              failures};
}

struct TableRow {
  double param, prob;
  double values[9];  // first, threshold, sampling x (coverage, ops, occ)
};

std::vector<TableRow> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open reference table '" + path + "'");
  std::vector<TableRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    TableRow r{v[0], v[7], {}};
    for (int i = 0; i < 6; ++i) r.values[i] = v[1 + i];
    for (int i = 0; i < 3; ++i) r.values[6 + i] = v[8 + i];
    rows.push_back(r);
  }
  return rows;
}

Verdict a7_reference(const std::string& path) {
  if (path.empty()) return {Status::skip, "no agh_2015 model supplied (use --agh-model PATH or FLOWTAB_AGH_MODEL)"};
  const auto model = load_model(path);
  const std::int64_t flows = [] {
    const char* env = std::getenv("FLOWTAB_A7_FLOWS");
    return env ? static_cast<std::int64_t>(std::stod(env)) : std::int64_t{1'000'000};
  }();
  std::size_t compared = 0, bad = 0;
  double worst = 0.0;
  std::string failures;
  for (Axis axis : {Axis::length, Axis::size}) {
    const auto table = read_table(std::string(FLOWTAB_ACCEPTANCE_DATA) + "/" + std::string(to_string(axis)) +
                                  "_table.csv");
    SweepSpec s;
    s.model = model;
    s.axis = axis;
    s.thresholds = default_thresholds(axis);
    s.probabilities = default_probabilities(axis);
    s.thresholds.resize(table.size());
    s.probabilities.resize(table.size());
    s.seeds = {1, 2, 3, 4, 5};
    s.flow_count = flows;
    s.analytic = false;
    s.jobs = workers();
    const auto r = run_sweep(s);
    const AlgorithmKind kinds[3] = {AlgorithmKind::first, AlgorithmKind::threshold, AlgorithmKind::sampling};
    // The last rows of each table are dominated by extreme-tail noise.
    const std::size_t rows = std::min<std::size_t>(table.size(), 19);
    for (std::size_t i = 0; i < rows; ++i) {
      for (int k = 0; k < 3; ++k) {
        const auto& c = r.cells(kinds[k])[i];
        const double want[3] = {table[i].values[3 * k], table[i].values[3 * k + 1], table[i].values[3 * k + 2]};
        if (want[0] < 10.0) continue;
        const double got[3] = {c.coverage.mean, c.ops_reduction.mean, c.occ_reduction.mean};
        for (int m = 0; m < 3; ++m) {
          ++compared;
          const double rel = std::abs(got[m] - want[m]) / want[m];
          worst = std::max(worst, rel);
          if (rel > 0.05) {
            ++bad;
            failures += fmt(" [%s %s row %zu metric %d: %.4g vs %.4g]", std::string(to_string(axis)).c_str(),
                            std::string(to_string(kinds[k])).c_str(), i, m, got[m], want[m]);
          }
        }
      }
    }
  }
  return {bad == 0 ? Status::pass : Status::fail,
          fmt("%zu values compared at %lld flows x 5 seeds, %zu beyond 5%%, worst relative error %.3f", compared,
              static_cast<long long>(flows), bad, worst) +
              failures};
}

std::string capture(std::vector<std::string> args, int* code = nullptr) {
  std::ostringstream out, err;
  args.insert(args.begin(), "flowtab");
  const int rc = run_cli(std::move(args), out, err);
  if (code) *code = rc;
  return out.str();
}

Verdict a8_determinism() {
  const auto heavy = model_file("example_heavytail.json");
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t commands = 0, bad = 0;
  std::string failures;
  auto same = [&](const std::string& label, std::vector<std::string> a, std::vector<std::string> b) {
    ++commands;
    int ca = 0, cb = 0;
    const auto oa = capture(a, &ca);
    const auto ob = capture(b, &cb);
    if (ca != 0 || cb != 0 || oa != ob || oa.empty()) {
      ++bad;
      failures += " [" + label + "]";
    }
  };
  for (const char* axis : {"length", "size"}) {
    std::vector<std::string> sim{"simulate", "--model", heavy, "--axis", axis, "--flows", "2e5", "--seeds", "1,2",
                                 "--format", "csv,md,plot", "--out", "-"};
    auto jobs4 = sim;
    jobs4.insert(jobs4.end(), {"--jobs", "4"});
    same(std::string("simulate ") + axis + " rerun", sim, sim);
    same(std::string("simulate ") + axis + " jobs 1 vs 4", sim, jobs4);
  }
  std::vector<std::string> gen{"generate", "--model", heavy, "--flows", "2e5", "--seed", "9"};
  auto gen4 = gen;
  gen4.insert(gen4.end(), {"--jobs", "4"});
  same("generate rerun", gen, gen);
  same("generate jobs 1 vs 4", gen, gen4);
  std::vector<std::string> ana{"analyze", "--model", heavy, "--coverage", "50,90,99"};
  same("analyze rerun", ana, ana);
  same("peff rerun", {"peff", "--p", "0.1", "--l-avg", "3"}, {"peff", "--p", "0.1", "--l-avg", "3"});
  return {bad == 0 ? Status::pass : Status::fail,
          fmt("%zu command pairs byte-identical out of %zu, %.1f s", commands - bad, commands, seconds_since(t0)) +
              failures};
}

}  // namespace

int main(int argc, char** argv) {
  std::string agh;
  if (const char* env = std::getenv("FLOWTAB_AGH_MODEL")) agh = env;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--agh-model" && i + 1 < argc) {
      agh = argv[++i];
      setenv("FLOWTAB_AGH_MODEL", agh.c_str(), 1);
    } else if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--agh-model PATH] [--only A<n>]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"A1", a1_equalities},
      {"A2", a2_full_sampling},
      {"A3", a3_toy},
      {"A4", a4_equivalence},
      {"A5", a5_closed_forms},
      {"A6", a6_ordering},
      {"A7", [&] { return a7_reference(agh); }},
      {"A8", a8_determinism},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && only != id) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {Status::fail, std::string("error: ") + e.what()};
    }
    const char* word = v.status == Status::pass ? "PASS" : v.status == Status::fail ? "FAIL" : "SKIP";
    std::printf("%s %s  %s\n", id.c_str(), word, v.detail.c_str());
    std::fflush(stdout);
    failed += v.status == Status::fail;
  }
  return failed == 0 ? 0 : 1;
}
