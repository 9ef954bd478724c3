#include "flowtab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>
#include <json.hpp>

#include "flowtab/error.hpp"
#include "numeric.hpp"

namespace flowtab {

using detail::kInf;
using json = nlohmann::json;

std::string_view to_string(Axis axis) { return axis == Axis::length ? "length" : "size"; }

std::string_view to_string(Weighting weighting) {
  switch (weighting) {
    case Weighting::flows: return "flows";
    case Weighting::packets: return "packets";
    case Weighting::octets: return "octets";
  }
  return "?";
}

Axis parse_axis(std::string_view text) {
  if (text == "length") return Axis::length;
  if (text == "size") return Axis::size;
  throw ValidationError("unknown axis '" + std::string(text) + "' (expected length or size)");
}

// ---------------------------------------------------------------------------
// Components

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Survival of the standardized generalized Pareto variate y >= 0.
double genpareto_sf(double shape, double y) {
  if (y <= 0.0) return 1.0;
  if (shape == 0.0) return std::exp(-y);
  if (shape < 0.0 && y >= -1.0 / shape) return 0.0;
  return std::exp(-std::log1p(shape * y) / shape);
}

double genpareto_cdf(double shape, double y) {
  if (y <= 0.0) return 0.0;
  if (shape == 0.0) return -std::expm1(-y);
  if (shape < 0.0 && y >= -1.0 / shape) return 1.0;
  return -std::expm1(-std::log1p(shape * y) / shape);
}

}  // namespace

std::string_view MixtureComponent::kind_name() const {
  return std::visit(overloaded{[](const UniformParams&) { return std::string_view("uniform"); },
                               [](const LognormalParams&) { return std::string_view("lognormal"); },
                               [](const GenParetoParams&) { return std::string_view("genpareto"); }},
                    params);
}

bool MixtureComponent::is_point_mass() const {
  const auto* u = std::get_if<UniformParams>(&params);
  return u != nullptr && u->low == u->high;
}

double MixtureComponent::cdf(double x) const {
  return std::visit(
      overloaded{[x](const UniformParams& p) {
                   if (p.high == p.low) return x >= p.low ? 1.0 : 0.0;
                   return clamp01((x - p.low) / (p.high - p.low));
                 },
                 [x](const LognormalParams& p) {
                   if (x <= 0.0) return 0.0;
                   return detail::normal_cdf((std::log(x) - p.mu) / p.sigma);
                 },
                 [x](const GenParetoParams& p) { return genpareto_cdf(p.shape, (x - p.location) / p.scale); }},
      params);
}

double MixtureComponent::sf(double x) const {
  return std::visit(
      overloaded{[x](const UniformParams& p) {
                   if (p.high == p.low) return x < p.low ? 1.0 : 0.0;
                   return clamp01((p.high - x) / (p.high - p.low));
                 },
                 [x](const LognormalParams& p) {
                   if (x <= 0.0) return 1.0;
                   return detail::normal_sf((std::log(x) - p.mu) / p.sigma);
                 },
                 [x](const GenParetoParams& p) { return genpareto_sf(p.shape, (x - p.location) / p.scale); }},
      params);
}

double MixtureComponent::pdf(double x) const {
  return std::visit(
      overloaded{[x](const UniformParams& p) {
                   if (p.high == p.low || x < p.low || x > p.high) return 0.0;
                   return 1.0 / (p.high - p.low);
                 },
                 [x](const LognormalParams& p) {
                   if (x <= 0.0) return 0.0;
                   return detail::normal_pdf((std::log(x) - p.mu) / p.sigma) / (x * p.sigma);
                 },
                 [x](const GenParetoParams& p) {
                   const double y = (x - p.location) / p.scale;
                   if (y < 0.0) return 0.0;
                   if (p.shape == 0.0) return std::exp(-y) / p.scale;
                   const double base = 1.0 + p.shape * y;
                   if (base <= 0.0) return 0.0;
                   return std::exp(-(1.0 / p.shape + 1.0) * std::log(base)) / p.scale;
                 }},
      params);
}

double MixtureComponent::quantile(double u) const {
  return std::visit(overloaded{[u](const UniformParams& p) { return p.low + u * (p.high - p.low); },
                               [u](const LognormalParams& p) {
                                 return std::exp(p.mu + p.sigma * detail::normal_quantile(u));
                               },
                               [u](const GenParetoParams& p) {
                                 if (u >= 1.0) {
                                   return p.shape < 0.0 ? p.location - p.scale / p.shape : kInf;
                                 }
                                 const double y = p.shape == 0.0
                                                      ? -std::log1p(-u)
                                                      : std::expm1(-p.shape * std::log1p(-u)) / p.shape;
                                 return p.location + p.scale * y;
                               }},
                    params);
}

std::optional<double> MixtureComponent::mean() const {
  return std::visit(overloaded{[](const UniformParams& p) -> std::optional<double> { return 0.5 * (p.low + p.high); },
                               [](const LognormalParams& p) -> std::optional<double> {
                                 return std::exp(p.mu + 0.5 * p.sigma * p.sigma);
                               },
                               [](const GenParetoParams& p) -> std::optional<double> {
                                 if (p.shape >= 1.0) return std::nullopt;
                                 return p.location + p.scale / (1.0 - p.shape);
                               }},
                    params);
}

double MixtureComponent::support_min() const {
  return std::visit(overloaded{[](const UniformParams& p) { return p.low; },
                               [](const LognormalParams&) { return 0.0; },
                               [](const GenParetoParams& p) { return p.location; }},
                    params);
}

// ---------------------------------------------------------------------------
// Mixture

Mixture::Mixture(std::vector<MixtureComponent> components, double domain_min, bool discrete)
    : components_(std::move(components)), domain_min_(domain_min), discrete_(discrete) {}

double Mixture::raw_cdf(double x) const {
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight > 0.0) total += c.weight * c.cdf(x);
  }
  return clamp01(total);
}

double Mixture::raw_sf(double x) const {
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight > 0.0) total += c.weight * c.sf(x);
  }
  return clamp01(total);
}

double Mixture::cdf(double x) const {
  if (std::isnan(x)) return 0.0;
  if (discrete_) x = std::floor(x);
  if (x < domain_min_) return 0.0;
  return raw_cdf(x);
}

double Mixture::sf(double x) const {
  if (std::isnan(x)) return 1.0;
  if (discrete_) x = std::floor(x);
  if (x < domain_min_) return 1.0;
  return raw_sf(x);
}

double Mixture::pmass(std::int64_t k) const {
  const auto x = static_cast<double>(k);
  if (x < domain_min_) return 0.0;
  if (x - 1.0 < domain_min_) return cdf(x);
  // Upper tail: difference of survivals keeps relative precision.
  const double below = cdf(x - 1.0);
  if (below > 0.5) return std::max(0.0, sf(x - 1.0) - sf(x));
  return std::max(0.0, cdf(x) - below);
}

namespace {

// cdf(x) >= u, decided on the survival side in the upper half where 1 - u is exact.
bool reaches(const Mixture& m, double x, double u, bool raw) {
  if (u > 0.5) return (raw ? m.raw_sf(x) : m.sf(x)) <= 1.0 - u;
  return (raw ? m.raw_cdf(x) : m.cdf(x)) >= u;
}

}  // namespace

double Mixture::continuous_quantile(double u) const {
  if (!(u > 0.0)) return domain_min_;
  if (reaches(*this, domain_min_, u, true)) return domain_min_;

  double lo = domain_min_;
  double hi = domain_min_;
  double smallest = kInf;
  for (const auto& c : components_) {
    if (c.weight <= 0.0) continue;
    const double q = c.quantile(u);
    hi = std::max(hi, q);
    smallest = std::min(smallest, q);
  }
  if (!std::isfinite(hi)) hi = 0x1p100;
  // Every component has cdf >= u at hi, so the mixture does too.
  if (smallest > lo && smallest < hi) {
    if (reaches(*this, smallest, u, true)) {
      hi = smallest;
    } else {
      lo = smallest;
    }
  }
  if (hi <= lo) return hi;
  // When u falls inside the jump of a point mass the answer is the atom itself.
  for (const auto& c : components_) {
    if (c.weight <= 0.0 || !c.is_point_mass()) continue;
    const double a = c.support_min();
    if (a > lo && a <= hi && reaches(*this, a, u, true) && !reaches(*this, std::nextafter(a, 0.0), u, true)) return a;
  }

  const double t_lo = std::log(lo);
  const double t_hi = std::log(hi);
  auto point = [&](double t) { return t == t_hi ? hi : (t == t_lo ? lo : std::exp(t)); };
  const bool upper = u > 0.5;
  const double target = upper ? 1.0 - u : u;
  auto f = [&](double t) {
    const double x = point(t);
    return upper ? target - raw_sf(x) : raw_cdf(x) - target;
  };
  const double f_hi = f(t_hi);
  if (f_hi == 0.0) return hi;
  std::uintmax_t max_iter = 200;
  auto tol = [](double a, double b) { return std::fabs(b - a) <= 1e-12; };
  const auto bracket = boost::math::tools::toms748_solve(f, t_lo, t_hi, f(t_lo), f_hi, tol, max_iter);
  // The upper end of the final bracket satisfies cdf >= u.
  return point(bracket.second);
}

double Mixture::quantile(double u) const {
  const double x = continuous_quantile(u);
  if (!discrete_) return x;
  // Smallest integer k >= domain_min with cdf(k) >= u, searched around ceil(x).
  auto ok = [&](double k) { return reaches(*this, k, u, false); };
  double k = std::max(domain_min_, std::ceil(x));
  double good = k;
  double bad = domain_min_ - 1.0;
  if (ok(k)) {
    for (double step = 1.0; good > domain_min_; step *= 2.0) {
      const double probe = std::max(domain_min_, good - step);
      if (!ok(probe)) {
        bad = probe;
        break;
      }
      good = probe;
    }
  } else {
    bad = k;
    for (double step = 1.0;; step *= 2.0) {
      const double probe = bad + step;
      if (ok(probe) || probe >= 0x1p62) {
        good = probe;
        break;
      }
      bad = probe;
    }
  }
  while (good - bad > 1.0) {
    const double mid = std::floor(0.5 * (good + bad));
    if (ok(mid)) {
      good = mid;
    } else {
      bad = mid;
    }
  }
  return good;
}

std::optional<double> Mixture::mean() const {
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight <= 0.0) continue;
    const auto m = c.mean();
    if (!m) return std::nullopt;
    total += c.weight * *m;
  }
  return total;
}

Mixture::Truncation Mixture::truncation_point(double tail, double cap) const {
  if (sf(cap) >= tail) return {cap, true};
  double x = continuous_quantile(1.0 - tail);
  if (discrete_) x = std::ceil(x);
  while (sf(x) >= tail && x < cap) x = std::min(cap, x * 2.0);
  return {std::min(x, cap), false};
}

const Mixture& AxisModel::weighting(Weighting w) const {
  switch (w) {
    case Weighting::flows: return flows;
    case Weighting::packets: return packets;
    case Weighting::octets: return octets;
  }
  return flows;
}

// ---------------------------------------------------------------------------
// Parsing and validation

namespace {

struct Severity {
  static int of(std::string_view kind) {
    if (kind == "SchemaError") return 0;
    if (kind == "WeightError") return 1;
    if (kind == "DominanceError") return 2;
    return 3;
  }
};

class Checker {
 public:
  std::vector<ModelIssue> issues;

  void schema(const std::string& where, const std::string& what) { issues.push_back({"SchemaError", where + ": " + what}); }
  void weight(const std::string& where, const std::string& what) { issues.push_back({"WeightError", where + ": " + what}); }

  bool only_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> required,
                 std::initializer_list<std::string_view> optional) {
    bool ok = true;
    if (!obj.is_object()) {
      schema(where, "expected an object");
      return false;
    }
    for (auto key : required) {
      if (!obj.contains(std::string(key))) {
        schema(where, "missing field '" + std::string(key) + "'");
        ok = false;
      }
    }
    for (const auto& [key, value] : obj.items()) {
      const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                         std::find(optional.begin(), optional.end(), key) != optional.end();
      if (!known) {
        schema(where, "unexpected field '" + key + "'");
        ok = false;
      }
    }
    return ok;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      schema(where, "field '" + key + "' must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      schema(where, "field '" + key + "' must be finite");
      return std::nullopt;
    }
    return d;
  }
};

std::optional<MixtureComponent> parse_component(Checker& chk, const json& doc, const std::string& where,
                                                double domain_min) {
  if (!chk.only_keys(doc, where, {"kind", "weight", "params"}, {})) return std::nullopt;
  if (!doc.at("kind").is_string()) {
    chk.schema(where, "field 'kind' must be a string");
    return std::nullopt;
  }
  const auto kind = doc.at("kind").get<std::string>();
  const auto weight = chk.number(doc, "weight", where);
  if (!weight) return std::nullopt;
  if (*weight < 0.0 || *weight > 1.0) chk.weight(where, "weight must lie in [0, 1]");

  const auto& params = doc.at("params");
  const std::string pwhere = where + ".params";
  MixtureComponent out;
  out.weight = *weight;
  if (kind == "uniform") {
    if (!chk.only_keys(params, pwhere, {"low", "high"}, {})) return std::nullopt;
    const auto low = chk.number(params, "low", pwhere);
    const auto high = chk.number(params, "high", pwhere);
    if (!low || !high) return std::nullopt;
    if (*high < *low) chk.schema(pwhere, "uniform requires high >= low");
    if (*low < domain_min) chk.schema(pwhere, "uniform support starts below domain_min");
    out.params = UniformParams{*low, *high};
  } else if (kind == "lognormal") {
    if (!chk.only_keys(params, pwhere, {"mu", "sigma"}, {})) return std::nullopt;
    const auto mu = chk.number(params, "mu", pwhere);
    const auto sigma = chk.number(params, "sigma", pwhere);
    if (!mu || !sigma) return std::nullopt;
    if (*sigma <= 0.0) chk.schema(pwhere, "lognormal requires sigma > 0");
    out.params = LognormalParams{*mu, *sigma};
  } else if (kind == "genpareto" || kind == "generalized-pareto") {
    if (!chk.only_keys(params, pwhere, {"shape", "location", "scale"}, {})) return std::nullopt;
    const auto shape = chk.number(params, "shape", pwhere);
    const auto location = chk.number(params, "location", pwhere);
    const auto scale = chk.number(params, "scale", pwhere);
    if (!shape || !location || !scale) return std::nullopt;
    if (*scale <= 0.0) chk.schema(pwhere, "genpareto requires scale > 0");
    if (*location < domain_min) chk.schema(pwhere, "genpareto support starts below domain_min");
    out.params = GenParetoParams{*shape, *location, *scale};
  } else {
    chk.schema(where, "unknown component kind '" + kind + "'");
    return std::nullopt;
  }
  return out;
}

std::optional<Mixture> parse_mixture(Checker& chk, const json& doc, const std::string& where, Axis axis) {
  if (!chk.only_keys(doc, where, {"components"}, {"domain_min"})) return std::nullopt;
  const bool discrete = axis == Axis::length;
  double domain_min = discrete ? 1.0 : 64.0;
  if (doc.contains("domain_min")) {
    const auto dm = chk.number(doc, "domain_min", where);
    if (!dm) return std::nullopt;
    if (*dm <= 0.0 || std::floor(*dm) != *dm) {
      chk.schema(where, "domain_min must be a positive integer");
      return std::nullopt;
    }
    domain_min = *dm;
  }
  const auto& comps = doc.at("components");
  if (!comps.is_array() || comps.empty()) {
    chk.schema(where, "components must be a non-empty array");
    return std::nullopt;
  }
  std::vector<MixtureComponent> components;
  bool ok = true;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    auto c = parse_component(chk, comps[i], where + ".components[" + std::to_string(i) + "]", domain_min);
    if (c) {
      components.push_back(*c);
    } else {
      ok = false;
    }
  }
  if (!ok) return std::nullopt;
  double sum = 0.0;
  for (const auto& c : components) sum += c.weight;
  if (std::fabs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "weights sum to " << sum << ", expected 1";
    chk.weight(where, msg.str());
  }
  return Mixture(std::move(components), domain_min, discrete);
}

std::vector<double> dominance_grid(const AxisModel& axis) {
  const double start = std::min({axis.flows.domain_min(), axis.packets.domain_min(), axis.octets.domain_min()});
  std::vector<double> grid;
  if (axis.axis == Axis::length) {
    for (double k = start; k <= 1024.0; k += 1.0) grid.push_back(k);
    for (double e = 10.0; e <= 40.0; e += 0.05) grid.push_back(std::round(std::exp2(e)));
  } else {
    for (double e = std::log2(start); e <= 50.0; e += 0.02) grid.push_back(std::exp2(e));
  }
  return grid;
}

void check_dominance(Checker& chk, const AxisModel& axis) {
  constexpr double kTol = 1e-9;
  for (double x : dominance_grid(axis)) {
    const double f = axis.flows.cdf(x);
    const double p = axis.packets.cdf(x);
    const double o = axis.octets.cdf(x);
    std::ostringstream msg;
    msg.precision(10);
    if (f + kTol < p) {
      msg << "flows CDF " << f << " < packets CDF " << p << " at x=" << x;
    } else if (p + kTol < o) {
      msg << "packets CDF " << p << " < octets CDF " << o << " at x=" << x;
    } else {
      continue;
    }
    chk.issues.push_back({"DominanceError", "axes." + std::string(to_string(axis.axis)) + ": " + msg.str()});
    return;
  }
}

struct ParsedModel {
  std::optional<TrafficModel> model;
  std::vector<ModelIssue> issues;
};

ParsedModel parse_and_check(std::string_view document) {
  Checker chk;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    chk.schema("document", std::string("invalid JSON: ") + e.what());
    return {std::nullopt, chk.issues};
  }
  if (!chk.only_keys(doc, "model", {"name", "axes"},
                     {"max_packet_size", "avg_flow_length", "avg_flow_size", "avg_packet_size"})) {
    return {std::nullopt, chk.issues};
  }
  TrafficModel model;
  if (!doc.at("name").is_string()) {
    chk.schema("model", "field 'name' must be a string");
  } else {
    model.name = doc.at("name").get<std::string>();
  }
  if (doc.contains("max_packet_size")) {
    if (auto v = chk.number(doc, "max_packet_size", "model")) {
      if (*v <= 0.0) chk.schema("model", "max_packet_size must be positive");
      model.max_packet_size = *v;
    }
  }
  std::optional<double> declared_length, declared_size, declared_packet;
  auto declared = [&](const char* key, std::optional<double>& slot) {
    if (!doc.contains(key)) return;
    slot = chk.number(doc, key, "model");
    if (slot && *slot <= 0.0) chk.schema("model", std::string(key) + " must be positive");
  };
  declared("avg_flow_length", declared_length);
  declared("avg_flow_size", declared_size);
  declared("avg_packet_size", declared_packet);

  const auto& axes = doc.at("axes");
  if (!chk.only_keys(axes, "axes", {"length", "size"}, {})) return {std::nullopt, chk.issues};
  bool complete = true;
  for (Axis a : {Axis::length, Axis::size}) {
    const std::string name(to_string(a));
    const auto& ax = axes.at(name);
    AxisModel& target = a == Axis::length ? model.length : model.size;
    target.axis = a;
    if (!chk.only_keys(ax, "axes." + name, {"flows", "packets", "octets"}, {})) {
      complete = false;
      continue;
    }
    for (Weighting w : {Weighting::flows, Weighting::packets, Weighting::octets}) {
      const std::string wname(to_string(w));
      auto m = parse_mixture(chk, ax.at(wname), "axes." + name + "." + wname, a);
      if (!m) {
        complete = false;
        continue;
      }
      (w == Weighting::flows ? target.flows : w == Weighting::packets ? target.packets : target.octets) = *m;
    }
  }
  if (!complete) return {std::nullopt, chk.issues};
  const bool structurally_valid = chk.issues.empty();
  if (structurally_valid) {
    check_dominance(chk, model.length);
    check_dominance(chk, model.size);
  }

  model.avg_flow_length = declared_length.value_or(model.length.flows.mean().value_or(kInf));
  model.avg_flow_size = declared_size.value_or(model.size.flows.mean().value_or(kInf));
  model.avg_packet_size = declared_packet.value_or(model.avg_flow_size / model.avg_flow_length);
  if (declared_length && declared_size && declared_packet) {
    const double implied = *declared_size / *declared_length;
    if (std::fabs(implied - *declared_packet) > 0.01 * *declared_packet) {
      chk.issues.push_back({"ConsistencyError", "model: avg_packet_size disagrees with avg_flow_size / avg_flow_length "
                                                "by more than 1%"});
    }
  }
  if (std::isfinite(model.avg_packet_size) && model.max_packet_size < model.avg_packet_size) {
    chk.issues.push_back({"ConsistencyError", "model: max_packet_size is below avg_packet_size"});
  }
  return {std::move(model), chk.issues};
}

[[noreturn]] void raise(const ModelIssue& issue) {
  if (issue.kind == "SchemaError") throw SchemaError(issue.message);
  if (issue.kind == "WeightError") throw WeightError(issue.message);
  if (issue.kind == "DominanceError") throw DominanceError(issue.message);
  throw ConsistencyError(issue.message);
}

}  // namespace

std::vector<ModelIssue> check_model(std::string_view document) { return parse_and_check(document).issues; }

TrafficModel parse_model(std::string_view document) {
  auto parsed = parse_and_check(document);
  if (!parsed.issues.empty()) {
    const auto worst = std::min_element(parsed.issues.begin(), parsed.issues.end(), [](const auto& a, const auto& b) {
      return Severity::of(a.kind) < Severity::of(b.kind);
    });
    raise(*worst);
  }
  return std::move(*parsed.model);
}

std::filesystem::path resolve_model_path(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) return path;
  if (const char* dir = std::getenv("FLOWTAB_MODEL_DIR"); dir != nullptr && *dir != '\0') {
    const std::filesystem::path base(dir);
    for (auto candidate : {base / path, base / (path.string() + ".json")}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
  }
  return path;
}

TrafficModel load_model(const std::filesystem::path& path) {
  const auto resolved = resolve_model_path(path);
  std::ifstream in(resolved);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

}  // namespace flowtab
