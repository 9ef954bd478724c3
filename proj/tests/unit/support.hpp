#pragma once

#include <string>

#include "flowtab/model.hpp"

namespace flowtab::test {

inline std::string model_path(const std::string& file) { return std::string(FLOWTAB_TEST_MODELS) + "/" + file; }

inline const TrafficModel& toy() {
  static const TrafficModel m = load_model(model_path("toy_twopoint.json"));
  return m;
}

inline const TrafficModel& heavytail() {
  static const TrafficModel m = load_model(model_path("example_heavytail.json"));
  return m;
}

inline std::string mixture_json(double domain_min, const std::string& components) {
  return R"({"domain_min": )" + std::to_string(domain_min) + R"(, "components": [)" + components + "]}";
}

inline std::string axis_json(const std::string& flows, const std::string& packets, const std::string& octets) {
  return R"({"flows": )" + flows + R"(, "packets": )" + packets + R"(, "octets": )" + octets + "}";
}

// A model whose three weightings coincide on each axis.
inline std::string model_json(const std::string& length_components, const std::string& size_components,
                              const std::string& extra = "") {
  const auto l = mixture_json(1, length_components);
  const auto s = mixture_json(64, size_components);
  return R"({"name": "inline", )" + extra + R"("axes": {"length": )" + axis_json(l, l, l) + R"(, "size": )" +
         axis_json(s, s, s) + "}}";
}

inline std::string point(double weight, double at) {
  return R"({"kind": "uniform", "weight": )" + std::to_string(weight) + R"(, "params": {"low": )" +
         std::to_string(at) + R"(, "high": )" + std::to_string(at) + "}}";
}

inline std::string lognormal(double weight, double mu, double sigma) {
  return R"({"kind": "lognormal", "weight": )" + std::to_string(weight) + R"(, "params": {"mu": )" +
         std::to_string(mu) + R"(, "sigma": )" + std::to_string(sigma) + "}}";
}

inline std::string genpareto(double weight, double shape, double location, double scale) {
  return R"({"kind": "genpareto", "weight": )" + std::to_string(weight) + R"(, "params": {"shape": )" +
         std::to_string(shape) + R"(, "location": )" + std::to_string(location) + R"(, "scale": )" +
         std::to_string(scale) + "}}";
}

}  // namespace flowtab::test
