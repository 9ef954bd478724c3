#include "flowtab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#include <variant>

#include <boost/math/quadrature/gauss.hpp>

#include "flowtab/error.hpp"
#include "numeric.hpp"

namespace flowtab {

using detail::kInf;

double sampled_fraction(double p, double l) {
  if (p >= 1.0) return 1.0;
  if (p <= 0.0 || l <= 0.0) return 0.0;
  const double log_q = std::log1p(-p);
  if (p * l > 1.0 || p > 0.25) {
    const double detected = -std::expm1(l * log_q);
    return 1.0 - (1.0 - p) * detected / (p * l);
  }
  // Equivalent form ((1-p)^(l+1) - 1 + (l+1) p) / (p l), split so that the
  // O(1) terms cancel analytically.
  const double n = l + 1.0;
  const double numerator = detail::expm1mx(n * log_q) + n * detail::log1pmx(-p);
  return numerator / (p * l);
}

namespace detail {

namespace {

using Gauss = boost::math::quadrature::gauss<double, 10>;
using Fn = std::function<double(double)>;

constexpr double kNormalSpan = 8.5;   // standard-normal mass beyond is < 1e-17
constexpr double kExpSpan = 40.0;     // exponential mass beyond is < 5e-18
constexpr std::int64_t kExactHead = 2048;

struct Piece {
  double value = 0.0;
  double tail = 0.0;  // mass beyond the integration range
};

// Integral of f(x + shift) over the component's continuous mass on (a, cap].
Piece integrate_continuous(const MixtureComponent& c, double a, double cap, const Fn& f, double shift) {
  Piece out;
  if (const auto* u = std::get_if<UniformParams>(&c.params)) {
    const double lo = std::max(a, u->low);
    const double hi = std::min(cap, u->high);
    out.tail = c.sf(std::max(cap, a));
    if (!(hi > lo)) return out;
    const int panels = std::clamp(static_cast<int>(std::ceil(std::log(hi / lo) / std::log(1.02))), 1, 4000);
    const double ratio = std::pow(hi / lo, 1.0 / panels);
    double left = lo;
    for (int i = 0; i < panels; ++i) {
      const double right = i + 1 == panels ? hi : left * ratio;
      out.value += Gauss::integrate([&](double x) { return f(x + shift); }, left, right);
      left = right;
    }
    out.value /= (u->high - u->low);
    return out;
  }
  if (const auto* ln = std::get_if<LognormalParams>(&c.params)) {
    const double z_a = a > 0.0 ? std::max(-kNormalSpan, (std::log(a) - ln->mu) / ln->sigma) : -kNormalSpan;
    const double z_end = std::min(kNormalSpan, (std::log(cap) - ln->mu) / ln->sigma);
    out.tail = normal_sf(std::max(z_a, z_end));
    if (!(z_end > z_a)) return out;
    const int panels = std::max(1, static_cast<int>(std::ceil((z_end - z_a) / 0.125)));
    const double width = (z_end - z_a) / panels;
    auto integrand = [&](double z) { return f(std::exp(ln->mu + ln->sigma * z) + shift) * normal_pdf(z); };
    for (int i = 0; i < panels; ++i) {
      out.value += Gauss::integrate(integrand, z_a + i * width, z_a + (i + 1) * width);
    }
    return out;
  }
  const auto& gp = std::get<GenParetoParams>(c.params);
  // w = -log(survival) is standard exponential.
  auto w_of = [&](double x) {
    const double s = c.sf(x);
    return s <= 0.0 ? kInf : -std::log(s);
  };
  auto x_of = [&](double w) {
    const double y = gp.shape == 0.0 ? w : std::expm1(gp.shape * w) / gp.shape;
    return gp.location + gp.scale * y;
  };
  const double w_a = std::max(0.0, w_of(a));
  const double w_end = std::min(kExpSpan, w_of(cap));
  out.tail = std::exp(-std::max(w_a, w_end));
  if (!(w_end > w_a)) return out;
  const int panels = std::max(1, static_cast<int>(std::ceil((w_end - w_a) / 0.25)));
  const double width = (w_end - w_a) / panels;
  auto integrand = [&](double w) { return f(x_of(w) + shift) * std::exp(-w); };
  for (int i = 0; i < panels; ++i) {
    out.value += Gauss::integrate(integrand, w_a + i * width, w_a + (i + 1) * width);
  }
  return out;
}

Expectation expect_continuous(const Mixture& m, double from, const Fn& f, double cap) {
  Expectation out;
  const double dmin = m.domain_min();
  const double a = std::max(from, dmin);
  for (const auto& c : m.components()) {
    if (c.weight <= 0.0) continue;
    double value = 0.0;
    double tail = 0.0;
    if (from < dmin) value += c.cdf(dmin) * f(dmin);  // mass lumped at domain_min
    if (c.is_point_mass()) {
      const double at = std::get<UniformParams>(c.params).low;
      if (at > a && at <= cap) value += f(at);
      if (at > cap) tail = 1.0;
    } else {
      const auto piece = integrate_continuous(c, a, cap, f, 0.0);
      value += piece.value;
      tail = piece.tail;
    }
    out.value += c.weight * value;
    out.truncation += c.weight * tail;
  }
  out.cap_hit = m.sf(cap) >= 1e-9;
  return out;
}

Expectation expect_discrete(const Mixture& m, double from, const Fn& f, double cap) {
  Expectation out;
  const double first = std::max(m.domain_min(), std::floor(from) + 1.0);
  const double last_exact = first + static_cast<double>(kExactHead) - 1.0;
  for (double k = first; k <= last_exact; k += 1.0) {
    const double mass = m.pmass(static_cast<std::int64_t>(k));
    if (mass > 0.0) out.value += mass * f(k);
  }
  if (m.sf(last_exact) <= 0.0) return out;
  // Beyond the exact head, pmass(k) is the mass on (k-1, k]; evaluating f half
  // a packet above the continuous variate matches the sum to O(1/k^2).
  for (const auto& c : m.components()) {
    if (c.weight <= 0.0) continue;
    if (c.is_point_mass()) {
      const double at = std::ceil(std::get<UniformParams>(c.params).low);
      if (at > last_exact && at <= cap) out.value += c.weight * f(at);
      if (at > cap) out.truncation += c.weight;
      continue;
    }
    const auto piece = integrate_continuous(c, last_exact, cap, f, 0.5);
    out.value += c.weight * piece.value;
    out.truncation += c.weight * piece.tail;
  }
  out.cap_hit = m.sf(cap) >= 1e-9;
  return out;
}

}  // namespace

Expectation expect_above(const Mixture& mixture, double from, const std::function<double(double)>& f, double cap) {
  return mixture.discrete() ? expect_discrete(mixture, from, f, cap) : expect_continuous(mixture, from, f, cap);
}

}  // namespace detail

namespace {

double axis_cap(const TrafficModel& model, Axis axis) {
  return axis == Axis::length ? 0x1p40 : 0x1p40 * model.max_packet_size;
}

// Length-axis counters are whole packets, so a threshold T acts as floor(T).
double effective_threshold(Axis axis, double threshold) {
  return axis == Axis::length ? std::floor(threshold) : threshold;
}

const Mixture& duration_weighting(const AxisModel& axis, DurationModel duration) {
  return duration == DurationModel::equal ? axis.flows : axis.packets;
}

void check_threshold(double threshold) {
  if (!(threshold >= 0.0)) throw ValidationError("threshold must be non-negative");
}

void check_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("sampling probability must lie in (0, 1]");
}

struct Sums {
  detail::Expectation covered;   // octets-weighted covered fraction
  detail::Expectation created;   // flows-weighted creation probability
  detail::Expectation occupied;  // duration-weighted occupancy fraction
};

AnalyticReport finish(const Sums& s) {
  if (!(s.created.value > 0.0) || !(s.occupied.value > 0.0)) {
    throw DegenerateError("no flow would receive an entry; reductions are infinite");
  }
  AnalyticReport r;
  r.coverage = 100.0 * s.covered.value;
  r.ops_reduction = 1.0 / s.created.value;
  r.occ_reduction = 1.0 / s.occupied.value;
  r.truncation_bound = std::max({s.covered.truncation, s.created.truncation, s.occupied.truncation});
  r.cap_hit = s.covered.cap_hit || s.created.cap_hit || s.occupied.cap_hit;
  return r;
}

}  // namespace

AnalyticReport analytic_first(const TrafficModel& model, Axis axis, double threshold, DurationModel duration) {
  check_threshold(threshold);
  const auto& ax = model.axis(axis);
  const double t = effective_threshold(axis, threshold);
  const double alive = ax.flows.sf(t);
  const double alive_occ = duration_weighting(ax, duration).sf(t);
  if (!(alive > 0.0) || !(alive_occ > 0.0)) {
    throw DegenerateError("threshold lies beyond the support of the flow distribution");
  }
  AnalyticReport r;
  r.coverage = 100.0 * ax.octets.sf(t);
  r.ops_reduction = 1.0 / alive;
  r.occ_reduction = duration == DurationModel::equal ? r.ops_reduction : 1.0 / alive_occ;
  return r;
}

AnalyticReport analytic_threshold(const TrafficModel& model, Axis axis, double threshold, DurationModel duration) {
  check_threshold(threshold);
  const double t = effective_threshold(axis, threshold);
  if (t <= 0.0) return analytic_first(model, axis, 0.0, duration);
  const auto& ax = model.axis(axis);
  const double cap = axis_cap(model, axis);
  const auto remaining = [t](double x) { return std::clamp(1.0 - t / x, 0.0, 1.0); };
  Sums s;
  s.covered = detail::expect_above(ax.octets, t, remaining, cap);
  s.created = {ax.flows.sf(t), 0.0, false};
  s.occupied = detail::expect_above(duration_weighting(ax, duration), t, remaining, cap);
  return finish(s);
}

AnalyticReport analytic_sampling_length(const TrafficModel& model, double p, DurationModel duration) {
  check_probability(p);
  if (p == 1.0) return AnalyticReport{100.0, 1.0, 1.0, 0.0, false};
  const auto& ax = model.length;
  const double cap = axis_cap(model, Axis::length);
  const auto covered = [p](double l) { return sampled_fraction(p, l); };
  const auto created = [p](double l) { return p_total(p, l); };
  Sums s;
  s.covered = detail::expect_above(ax.octets, 0.0, covered, cap);
  s.created = detail::expect_above(ax.flows, 0.0, created, cap);
  s.occupied = detail::expect_above(duration_weighting(ax, duration), 0.0, covered, cap);
  return finish(s);
}

AnalyticReport analytic_sampling_size(const TrafficModel& model, double p, DurationModel duration) {
  check_probability(p);
  const auto& ax = model.size;
  const double cap = axis_cap(model, Axis::size);
  const double rate = p / model.max_packet_size;
  // Covered share of a flow of s bytes: 1 - (1 - e^(-rate s)) / (rate s).
  const auto covered = [rate](double s) {
    const double x = rate * s;
    return x <= 0.0 ? 0.0 : std::clamp(detail::expm1mx(-x) / x, 0.0, 1.0);
  };
  const auto created = [rate](double s) { return -std::expm1(-rate * s); };
  Sums s;
  s.covered = detail::expect_above(ax.octets, 0.0, covered, cap);
  s.created = detail::expect_above(ax.flows, 0.0, created, cap);
  s.occupied = detail::expect_above(duration_weighting(ax, duration), 0.0, covered, cap);
  return finish(s);
}

namespace {

// Length of the comonotone partner of a size level u, with the CDF of the
// first few thousand lengths cached.
class LengthMap {
 public:
  explicit LengthMap(const TrafficModel& model) : model_(model) {
    const auto& lengths = model.length.flows;
    cdf_.reserve(kCached);
    for (std::int64_t k = 1; k <= kCached; ++k) cdf_.push_back(lengths.cdf(static_cast<double>(k)));
  }

  FlowRecord flow(double size) const {
    const auto& sizes = model_.size.flows;
    double at_or_below = sizes.cdf(size);
    double below = at_or_below;
    if (size <= sizes.domain_min()) {
      below = 0.0;
    } else {
      for (const auto& c : sizes.components()) {
        if (c.is_point_mass() && std::get<UniformParams>(c.params).low == size) below -= c.weight;
      }
    }
    const double u = std::clamp(0.5 * (below + at_or_below), 0x1p-54, 1.0 - 0x1p-53);
    FlowRecord f;
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    f.length = it != cdf_.end() ? static_cast<std::int64_t>(it - cdf_.begin()) + 1
                                : std::max<std::int64_t>(1, std::llround(model_.length.flows.quantile(u)));
    const double s_max = model_.max_packet_size;
    const double upper = std::floor(static_cast<double>(f.length) * s_max);
    f.size = static_cast<std::int64_t>(std::clamp(std::round(size), static_cast<double>(f.length), upper));
    assign_packetization(f, s_max);
    return f;
  }

 private:
  static constexpr std::int64_t kCached = 4096;
  const TrafficModel& model_;
  std::vector<double> cdf_;
};


// Per-flow quantities for the packet-granular size law.
struct Granular {
  double covered_bytes = 0.0;    // fraction of the flow's bytes
  double covered_packets = 0.0;  // fraction of the flow's packets
  double created = 0.0;          // probability that an entry is created
};

AnalyticReport granular_report(const TrafficModel& model, double from, DurationModel duration,
                               const std::function<Granular(const FlowRecord&)>& per_flow) {
  const LengthMap map(model);
  const auto& ax = model.size;
  const double cap = axis_cap(model, Axis::size);
  auto eval = [&](double s) { return per_flow(map.flow(s)); };
  Sums sums;
  sums.covered = detail::expect_above(ax.octets, from, [&](double s) { return eval(s).covered_bytes; }, cap);
  sums.created = detail::expect_above(ax.flows, from, [&](double s) { return eval(s).created; }, cap);
  if (duration == DurationModel::equal) {
    sums.occupied = detail::expect_above(ax.flows, from, [&](double s) { return eval(s).covered_packets; }, cap);
  } else {
    // Duration proportional to packet count: covered packets over all packets.
    auto length = [&](double s) { return static_cast<double>(map.flow(s).length); };
    const auto all = detail::expect_above(ax.flows, 0.0, length, cap);
    auto covered = detail::expect_above(
        ax.flows, from, [&](double s) {
          const auto f = map.flow(s);
          return static_cast<double>(f.length) * per_flow(f).covered_packets;
        },
        cap);
    covered.value /= all.value;
    covered.truncation = std::max(covered.truncation, all.truncation);
    covered.cap_hit = covered.cap_hit || all.cap_hit;
    sums.occupied = covered;
  }
  return finish(sums);
}

}  // namespace

std::string_view to_string(SizeAxisLaw law) { return law == SizeAxisLaw::packets ? "packets" : "continuous"; }

SizeAxisLaw parse_size_axis_law(std::string_view text) {
  if (text == "packets") return SizeAxisLaw::packets;
  if (text == "continuous") return SizeAxisLaw::continuous;
  throw ValidationError("unknown size-axis law '" + std::string(text) + "' (expected packets or continuous)");
}

namespace detail {

FlowRecord comonotone_flow(const TrafficModel& model, double size) { return LengthMap(model).flow(size); }

}  // namespace detail

AnalyticReport analytic_threshold_packets(const TrafficModel& model, double threshold, DurationModel duration) {
  check_threshold(threshold);
  if (threshold <= 0.0) return analytic_first(model, Axis::size, 0.0, duration);
  const double s_max = model.max_packet_size;
  return granular_report(model, threshold, duration, [&](const FlowRecord& f) {
    Granular g;
    if (static_cast<double>(f.size) <= threshold) return g;
    const auto layout = packet_layout(f, s_max);
    const std::int64_t j = std::min(layout.packet_exceeding(threshold), f.length);
    g.created = 1.0;
    g.covered_bytes = static_cast<double>(f.size - layout.bytes_before(j)) / static_cast<double>(f.size);
    g.covered_packets = static_cast<double>(f.length - j + 1) / static_cast<double>(f.length);
    return g;
  });
}

AnalyticReport analytic_sampling_size_packets(const TrafficModel& model, double p, DurationModel duration) {
  check_probability(p);
  const double s_max = model.max_packet_size;
  return granular_report(model, 0.0, duration, [&](const FlowRecord& f) {
    const auto layout = packet_layout(f, s_max);
    const auto nb = static_cast<double>(layout.body_count);
    const auto nt = static_cast<double>(layout.tail_count);
    const auto b = static_cast<double>(layout.body_size);
    const auto t = static_cast<double>(layout.tail_size);
    const double qb = std::min(1.0, p * b / s_max);
    const double qt = std::min(1.0, p * t / s_max);
    const double log_miss_body = nb == 0.0 ? 0.0 : (qb >= 1.0 ? -kInf : nb * std::log1p(-qb));
    const double log_miss_tail = nt == 0.0 ? 0.0 : (qt >= 1.0 ? -kInf : nt * std::log1p(-qt));
    const double miss_body = std::exp(log_miss_body);
    // Body packets act as an nb-packet flow sampled at qb; the tail is only
    // reached when every body packet was missed.
    const double gb = nb * sampled_fraction(qb, nb);
    const double gt = nt * sampled_fraction(qt, nt);
    const double hit_body = -std::expm1(log_miss_body);
    Granular g;
    g.created = -std::expm1(log_miss_body + log_miss_tail);
    g.covered_packets = (gb + nt * hit_body + miss_body * gt) / static_cast<double>(f.length);
    g.covered_bytes = (b * gb + t * nt * hit_body + miss_body * t * gt) / static_cast<double>(f.size);
    return g;
  });
}

AnalyticReport analytic(const TrafficModel& model, const AlgorithmSpec& spec, DurationModel duration,
                        SizeAxisLaw law) {
  const bool granular = spec.axis == Axis::size && law == SizeAxisLaw::packets;
  switch (spec.kind) {
    case AlgorithmKind::first: return analytic_first(model, spec.axis, spec.threshold, duration);
    case AlgorithmKind::threshold:
      return granular ? analytic_threshold_packets(model, spec.threshold, duration)
                      : analytic_threshold(model, spec.axis, spec.threshold, duration);
    case AlgorithmKind::sampling:
      if (spec.mode == SamplingMode::uniform) return analytic_sampling_length(model, spec.probability, duration);
      return granular ? analytic_sampling_size_packets(model, spec.probability, duration)
                      : analytic_sampling_size(model, spec.probability, duration);
  }
  throw ValidationError("unknown algorithm");
}

namespace {

constexpr double kRelativeTolerance = 1e-6;
constexpr double kMinProbability = 1e-12;

AnalyticReport degenerate_report() { return AnalyticReport{0.0, kInf, kInf, 0.0, false}; }

AnalyticReport evaluate_or_degenerate(const TrafficModel& model, const AlgorithmSpec& spec, DurationModel duration,
                                     SizeAxisLaw law) {
  try {
    return analytic(model, spec, duration, law);
  } catch (const DegenerateError&) {
    return degenerate_report();
  }
}

Inversion invert_threshold(const TrafficModel& model, AlgorithmKind kind, Axis axis, double target,
                           DurationModel duration, SizeAxisLaw law) {
  auto at = [&](double t) {
    auto spec = AlgorithmSpec::first(axis, t);
    spec.kind = kind;
    return evaluate_or_degenerate(model, spec, duration, law);
  };
  auto zero = at(0.0);
  if (zero.coverage <= target) return {0.0, zero};

  const double cap = axis_cap(model, axis);
  double lo = 0.0;
  double hi = axis == Axis::length ? 1.0 : model.axis(axis).flows.domain_min();
  auto hi_report = at(hi);
  while (hi_report.coverage > target) {
    if (hi >= cap) throw UnreachableError("coverage target cannot be reached below the truncation cap");
    lo = hi;
    hi = std::min(cap, hi * 2.0);
    hi_report = at(hi);
  }
  if (axis == Axis::length) {
    while (hi - lo > 1.0) {
      const double mid = std::floor(0.5 * (lo + hi));
      auto r = at(mid);
      if (r.coverage <= target) {
        hi = mid;
        hi_report = r;
      } else {
        lo = mid;
      }
    }
    return {hi, hi_report};
  }
  while (hi - lo > kRelativeTolerance * hi) {
    const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
    auto r = at(mid);
    if (r.coverage <= target) {
      hi = mid;
      hi_report = r;
    } else {
      lo = mid;
    }
  }
  return {hi, hi_report};
}

Inversion invert_probability(const TrafficModel& model, Axis axis, double target, DurationModel duration,
                             SizeAxisLaw law) {
  auto at = [&](double p) {
    return evaluate_or_degenerate(model, AlgorithmSpec::sampling(axis, p, model.max_packet_size), duration, law);
  };
  auto hi_report = at(1.0);
  if (hi_report.coverage < target) {
    throw UnreachableError("coverage target exceeds what sampling with p = 1 achieves");
  }
  if (hi_report.coverage == target) return {1.0, hi_report};
  double lo = kMinProbability;
  auto lo_report = at(lo);
  if (lo_report.coverage > target) {
    throw UnreachableError("coverage target is below what the smallest sampling probability achieves");
  }
  double hi = 1.0;
  while (hi / lo - 1.0 > kRelativeTolerance) {
    const double mid = std::sqrt(lo * hi);
    auto r = at(mid);
    if (r.coverage <= target) {
      lo = mid;
      lo_report = r;
    } else {
      hi = mid;
    }
  }
  return {lo, lo_report};
}

}  // namespace

Inversion invert_for_coverage(const TrafficModel& model, AlgorithmKind kind, Axis axis, double coverage_percent,
                              DurationModel duration, SizeAxisLaw law) {
  if (!(coverage_percent > 0.0)) throw ValidationError("coverage target must be positive");
  if (coverage_percent > 100.0) throw UnreachableError("coverage target above 100%");
  if (kind == AlgorithmKind::sampling) return invert_probability(model, axis, coverage_percent, duration, law);
  return invert_threshold(model, kind, axis, coverage_percent, duration, law);
}

}  // namespace flowtab
