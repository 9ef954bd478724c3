#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flowtab/algorithms.hpp"
#include "flowtab/analytic.hpp"
#include "flowtab/error.hpp"
#include "flowtab/generator.hpp"
#include "flowtab/model.hpp"
#include "flowtab/sweep.hpp"

namespace py = pybind11;
using namespace flowtab;

namespace {

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["coverage"] = r.coverage;
  d["ops_reduction"] = r.ops_reduction;
  d["occ_reduction"] = r.occ_reduction;
  d["flows"] = r.flows;
  d["entries"] = r.entries;
  return d;
}

py::dict report_dict(const AnalyticReport& r) {
  py::dict d;
  d["coverage"] = r.coverage;
  d["ops_reduction"] = r.ops_reduction;
  d["occ_reduction"] = r.occ_reduction;
  d["truncation_bound"] = r.truncation_bound;
  d["cap_hit"] = r.cap_hit;
  d["flagged"] = r.flagged();
  return d;
}

AlgorithmSpec make_spec(const TrafficModel& model, const std::string& algorithm, const std::string& axis,
                        double param) {
  const auto kind = parse_algorithm(algorithm);
  const auto a = parse_axis(axis);
  switch (kind) {
    case AlgorithmKind::first: return AlgorithmSpec::first(a, param);
    case AlgorithmKind::threshold: return AlgorithmSpec::counting(a, param);
    case AlgorithmKind::sampling: return AlgorithmSpec::sampling(a, param, model.max_packet_size);
  }
  throw ValidationError("unknown algorithm");
}

py::list cells_list(const std::vector<CellResult>& cells) {
  py::list out;
  for (const auto& c : cells) {
    py::dict d;
    d["algorithm"] = std::string(to_string(c.spec.kind));
    d["param"] = c.parameter();
    d["coverage"] = py::make_tuple(c.coverage.mean, c.coverage.sd);
    d["ops_reduction"] = py::make_tuple(c.ops_reduction.mean, c.ops_reduction.sd);
    d["occ_reduction"] = py::make_tuple(c.occ_reduction.mean, c.occ_reduction.sd);
    py::list runs;
    for (const auto& r : c.runs) runs.append(report_dict(r));
    d["runs"] = runs;
    d["analytic"] = c.analytic ? py::object(report_dict(*c.analytic)) : py::object(py::none());
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Flow-table usage reduction: traffic models, simulation and analytic evaluation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", validation.ptr());
  py::register_exception<WeightError>(m, "WeightError", validation.ptr());
  auto consistency = py::register_exception<ConsistencyError>(m, "ConsistencyError", base.ptr());
  py::register_exception<DominanceError>(m, "DominanceError", consistency.ptr());
  py::register_exception<PacketizeError>(m, "PacketizeError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<UnreachableError>(m, "UnreachableError", base.ptr());

  py::class_<Mixture>(m, "Mixture")
      .def_property_readonly("domain_min", &Mixture::domain_min)
      .def_property_readonly("discrete", &Mixture::discrete)
      .def("cdf", &Mixture::cdf)
      .def("sf", &Mixture::sf)
      .def("pmass", &Mixture::pmass)
      .def("quantile", &Mixture::quantile)
      .def("mean", &Mixture::mean);

  py::class_<AxisModel>(m, "AxisModel")
      .def_readonly("flows", &AxisModel::flows)
      .def_readonly("packets", &AxisModel::packets)
      .def_readonly("octets", &AxisModel::octets);

  py::class_<TrafficModel>(m, "TrafficModel")
      .def_readonly("name", &TrafficModel::name)
      .def_readonly("length", &TrafficModel::length)
      .def_readonly("size", &TrafficModel::size)
      .def_readonly("avg_flow_length", &TrafficModel::avg_flow_length)
      .def_readonly("avg_flow_size", &TrafficModel::avg_flow_size)
      .def_readonly("avg_packet_size", &TrafficModel::avg_packet_size)
      .def_readonly("max_packet_size", &TrafficModel::max_packet_size)
      .def("__repr__", [](const TrafficModel& t) { return "<TrafficModel '" + t.name + "'>"; });

  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));
  m.def("parse_model", [](const std::string& doc) { return parse_model(doc); }, py::arg("document"));
  m.def(
      "check_model",
      [](const std::string& doc) {
        py::list out;
        for (const auto& issue : check_model(doc)) out.append(py::make_tuple(issue.kind, issue.message));
        return out;
      },
      py::arg("document"), "List of (error type, message) pairs; empty when the model is valid.");

  m.def(
      "generate",
      [](const TrafficModel& model, std::int64_t flows, std::uint64_t seed, const std::string& coupling,
         std::int64_t min_packet, int jobs) {
        GeneratorConfig config;
        config.flow_count = flows;
        config.seed = seed;
        config.coupling = parse_coupling(coupling);
        config.min_packet = min_packet;
        config.jobs = jobs;
        Population pop;
        {
          py::gil_scoped_release release;
          pop = generate_population(model, config);
        }
        py::array_t<std::int64_t> lengths(static_cast<py::ssize_t>(pop.flows.size()));
        py::array_t<std::int64_t> sizes(static_cast<py::ssize_t>(pop.flows.size()));
        auto l = lengths.mutable_unchecked<1>();
        auto s = sizes.mutable_unchecked<1>();
        for (std::size_t i = 0; i < pop.flows.size(); ++i) {
          l(static_cast<py::ssize_t>(i)) = pop.flows[i].length;
          s(static_cast<py::ssize_t>(i)) = pop.flows[i].size;
        }
        return py::make_tuple(lengths, sizes);
      },
      py::arg("model"), py::arg("flows"), py::arg("seed") = 1, py::arg("coupling") = "comonotone",
      py::arg("min_packet") = 64, py::arg("jobs") = 1, "Returns (lengths, sizes) as int64 arrays.");

  m.def(
      "packetize",
      [](std::int64_t length, std::int64_t size, double max_packet) {
        FlowRecord f{length, size, Packetization::even_split};
        assign_packetization(f, max_packet);
        return packetize(f, max_packet);
      },
      py::arg("length"), py::arg("size"), py::arg("max_packet") = 1518.0);

  m.def("sampled_fraction", &sampled_fraction, py::arg("p"), py::arg("l"));
  m.def("p_total", &p_total, py::arg("p"), py::arg("n"));
  m.def("p_eff_avg", &p_eff_avg, py::arg("p"), py::arg("l_avg"));
  m.def(
      "p_eff_paths",
      [](const std::vector<std::pair<double, std::vector<double>>>& paths) {
        PathProfile profile;
        for (const auto& [w, ps] : paths) profile.paths.push_back({w, ps});
        return p_eff_paths(profile);
      },
      py::arg("paths"), "paths: list of (path probability, [per-switch sampling probabilities]).");

  m.def(
      "analytic",
      [](const TrafficModel& model, const std::string& algorithm, const std::string& axis, double param,
         const std::string& duration, const std::string& size_law) {
        return report_dict(analytic(model, make_spec(model, algorithm, axis, param), parse_duration_model(duration),
                                    parse_size_axis_law(size_law)));
      },
      py::arg("model"), py::arg("algorithm"), py::arg("axis"), py::arg("param"), py::arg("duration") = "equal",
      py::arg("size_law") = "packets");

  m.def(
      "invert_for_coverage",
      [](const TrafficModel& model, const std::string& algorithm, const std::string& axis, double coverage,
         const std::string& duration, const std::string& size_law) {
        const auto inv = invert_for_coverage(model, parse_algorithm(algorithm), parse_axis(axis), coverage,
                                             parse_duration_model(duration), parse_size_axis_law(size_law));
        return py::make_tuple(inv.parameter, report_dict(inv.report));
      },
      py::arg("model"), py::arg("algorithm"), py::arg("axis"), py::arg("coverage"), py::arg("duration") = "equal",
      py::arg("size_law") = "packets", "Returns (parameter, report).");

  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("model_name", &SweepResult::model_name)
      .def_readonly("flows_per_run", &SweepResult::flows_per_run)
      .def_readonly("clamped_fraction", &SweepResult::clamped_fraction)
      .def("cells", [](const SweepResult& r, const std::string& kind) { return cells_list(r.cells(parse_algorithm(kind))); })
      .def("table", [](const SweepResult& r, const std::string& format) {
        return emit_table(r, parse_output_format(format));
      });

  m.def(
      "simulate",
      [](const TrafficModel& model, const std::string& axis, const std::vector<std::string>& algorithms,
         std::optional<std::vector<double>> thresholds, std::optional<std::vector<double>> probabilities,
         const std::vector<std::uint64_t>& seeds, std::int64_t flows, const std::string& coupling,
         const std::string& duration, int jobs, bool analytic_columns) {
        SweepSpec spec;
        spec.model = model;
        spec.axis = parse_axis(axis);
        spec.algorithms.clear();
        for (const auto& a : algorithms) spec.algorithms.push_back(parse_algorithm(a));
        spec.thresholds = thresholds ? *thresholds : default_thresholds(spec.axis);
        spec.probabilities = probabilities ? *probabilities : default_probabilities(spec.axis);
        spec.seeds = seeds;
        spec.flow_count = flows;
        spec.coupling = parse_coupling(coupling);
        spec.duration = parse_duration_model(duration);
        spec.jobs = jobs;
        spec.analytic = analytic_columns;
        py::gil_scoped_release release;
        return run_sweep(spec);
      },
      py::arg("model"), py::arg("axis") = "length",
      py::arg("algorithms") = std::vector<std::string>{"first", "threshold", "sampling"},
      py::arg("thresholds") = py::none(), py::arg("probabilities") = py::none(),
      py::arg("seeds") = std::vector<std::uint64_t>{1}, py::arg("flows") = 1'000'000,
      py::arg("coupling") = "comonotone", py::arg("duration") = "equal", py::arg("jobs") = 1,
      py::arg("analytic") = true);
}
