#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flowtab {

enum class Axis { length, size };
enum class Weighting { flows, packets, octets };

std::string_view to_string(Axis axis);
std::string_view to_string(Weighting weighting);
Axis parse_axis(std::string_view text);

/// Uniform on [low, high]; low == high is a point mass.
struct UniformParams {
  double low = 0.0;
  double high = 0.0;
};

struct LognormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Generalized Pareto with CDF 1 - (1 + shape * (x - location) / scale)^(-1/shape).
struct GenParetoParams {
  double shape = 0.0;
  double location = 0.0;
  double scale = 1.0;
};

using ComponentParams = std::variant<UniformParams, LognormalParams, GenParetoParams>;

struct MixtureComponent {
  double weight = 0.0;
  ComponentParams params;

  std::string_view kind_name() const;
  bool is_point_mass() const;

  double cdf(double x) const;
  double sf(double x) const;
  double pdf(double x) const;
  double quantile(double u) const;
  /// Empty when the mean diverges (generalized Pareto with shape >= 1).
  std::optional<double> mean() const;
  /// Lower end of the support.
  double support_min() const;
};

/// Weighted mixture over one axis.
///
/// Mass that the components place below `domain_min` is lumped at
/// `domain_min`. A discrete mixture describes integer values obtained by
/// rounding the continuous variate up, so pmass(k) = cdf(k) - cdf(k - 1).
class Mixture {
 public:
  Mixture() = default;
  Mixture(std::vector<MixtureComponent> components, double domain_min, bool discrete);

  const std::vector<MixtureComponent>& components() const { return components_; }
  double domain_min() const { return domain_min_; }
  bool discrete() const { return discrete_; }

  double cdf(double x) const;
  /// 1 - cdf(x), computed without cancellation in the tail.
  double sf(double x) const;
  double pmass(std::int64_t k) const;
  /// Smallest x with cdf(x) >= u; integer-valued for discrete mixtures.
  double quantile(double u) const;
  /// Quantile of the underlying continuous mixture (no rounding).
  double continuous_quantile(double u) const;
  std::optional<double> mean() const;

  /// Smallest point beyond which the tail mass is below `tail`, capped at `cap`.
  struct Truncation {
    double point;
    bool cap_hit;
  };
  Truncation truncation_point(double tail = 1e-9, double cap = 0x1p40) const;

  /// Continuous mixture CDF and survival, ignoring domain_min and rounding.
  double raw_cdf(double x) const;
  double raw_sf(double x) const;

 private:

  std::vector<MixtureComponent> components_;
  double domain_min_ = 1.0;
  bool discrete_ = false;
};

struct AxisModel {
  Axis axis = Axis::length;
  Mixture flows;
  Mixture packets;
  Mixture octets;

  const Mixture& weighting(Weighting w) const;
};

struct TrafficModel {
  std::string name;
  AxisModel length;
  AxisModel size;
  double avg_flow_length = 0.0;
  double avg_flow_size = 0.0;
  double avg_packet_size = 0.0;
  double max_packet_size = 1518.0;

  const AxisModel& axis(Axis a) const { return a == Axis::length ? length : size; }
};

/// One problem found while validating a model document.
struct ModelIssue {
  std::string kind;  // SchemaError, WeightError, DominanceError, ConsistencyError
  std::string message;
};

/// Validates a JSON model document and reports every problem found.
std::vector<ModelIssue> check_model(std::string_view document);

/// Parses and validates a model; throws the most severe issue found.
TrafficModel parse_model(std::string_view document);
TrafficModel load_model(const std::filesystem::path& path);

/// Resolves a model path, falling back to $FLOWTAB_MODEL_DIR.
std::filesystem::path resolve_model_path(const std::filesystem::path& path);

}  // namespace flowtab
