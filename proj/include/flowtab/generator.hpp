#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "flowtab/model.hpp"

namespace flowtab {

enum class Coupling { comonotone, independent };
/// even_split: floor(size / length) bytes per packet, the remainder added to
/// the last packet. last_remainder: floor(size / length) bytes per packet, the
/// remainder spread one byte each over the last packets; it fits whenever
/// size <= length * max_packet.
enum class Packetization { even_split, last_remainder };

std::string_view to_string(Coupling coupling);
Coupling parse_coupling(std::string_view text);

/// One synthetic flow.
struct FlowRecord {
  std::int64_t length = 1;  // packets
  std::int64_t size = 64;   // bytes
  Packetization packetization = Packetization::even_split;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Per-packet byte layout of a flow: `body_count` packets of `body_size`
/// bytes followed by `tail_count` packets of `tail_size` bytes.
struct PacketLayout {
  std::int64_t body_size = 0;
  std::int64_t body_count = 0;
  std::int64_t tail_size = 0;
  std::int64_t tail_count = 0;

  /// Bytes carried by packets [1, index) (1-based).
  std::int64_t bytes_before(std::int64_t index) const {
    const std::int64_t before = index - 1;
    if (before <= body_count) return before * body_size;
    return body_count * body_size + (before - body_count) * tail_size;
  }
  /// 1-based index of the packet during which the cumulative byte count
  /// first exceeds `bytes`; past the last packet when it never does.
  std::int64_t packet_exceeding(double bytes) const;
};

/// Throws PacketizeError unless every packet lies in [1, max_packet].
PacketLayout packet_layout(const FlowRecord& flow, double max_packet);

/// Picks even split when it fits, else last-remainder; throws PacketizeError
/// when neither keeps every packet within max_packet.
void assign_packetization(FlowRecord& flow, double max_packet);

/// Expands a flow into its packet sizes; the sizes always sum to `flow.size`.
std::vector<std::int64_t> packetize(const FlowRecord& flow, double max_packet = 1518.0);

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::int64_t flow_count = 1;
  Coupling coupling = Coupling::comonotone;
  std::int64_t min_packet = 64;
  int jobs = 1;

  void validate() const;
};

/// Flows per shard; each shard draws from its own seeded stream.
inline constexpr std::int64_t kShardSize = 1 << 16;

std::uint64_t splitmix64(std::uint64_t x);

/// Independent random streams derived from (seed, shard, purpose).
enum class StreamTag : std::uint64_t { flows = 0x666c6f7773ULL, sampling = 0x73616d706cULL };
std::uint64_t stream_seed(std::uint64_t seed, std::int64_t shard, StreamTag tag);

/// Uniform variates on the open interval (0, 1), bit-reproducible across platforms.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Draws one flow. `clamped` is set when the coupled size had to be moved
/// into [length * min_packet, length * max_packet_size].
FlowRecord sample_flow(const TrafficModel& model, Coupling coupling, std::int64_t min_packet, UniformSource& rng,
                       bool* clamped = nullptr);

struct Population {
  std::vector<FlowRecord> flows;
  std::int64_t clamped = 0;

  double clamped_fraction() const {
    return flows.empty() ? 0.0 : static_cast<double>(clamped) / static_cast<double>(flows.size());
  }
};

std::int64_t shard_count(std::int64_t flow_count);

/// Flows of one shard; identical no matter which worker produces it.
Population generate_shard(const TrafficModel& model, const GeneratorConfig& config, std::int64_t shard);

/// Whole population, shards concatenated in order.
Population generate_population(const TrafficModel& model, const GeneratorConfig& config);

/// `length_packets,size_bytes` CSV with a header row.
void write_flows_csv(std::ostream& out, std::span<const FlowRecord> flows);
/// Reads the CSV written by write_flows_csv (header optional).
std::vector<FlowRecord> read_flows_csv(std::istream& in);

}  // namespace flowtab
