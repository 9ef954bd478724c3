#include "flowtab/generator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <thread>

#include "flowtab/error.hpp"

namespace flowtab {

std::string_view to_string(Coupling coupling) {
  return coupling == Coupling::comonotone ? "comonotone" : "independent";
}

Coupling parse_coupling(std::string_view text) {
  if (text == "comonotone") return Coupling::comonotone;
  if (text == "independent") return Coupling::independent;
  throw ValidationError("unknown coupling '" + std::string(text) + "' (expected comonotone or independent)");
}

namespace {

bool layout_fits(const PacketLayout& l, double max_packet) {
  const auto fits = [max_packet](std::int64_t s) { return s >= 1 && static_cast<double>(s) <= max_packet; };
  return (l.body_count == 0 || fits(l.body_size)) && (l.tail_count == 0 || fits(l.tail_size));
}

PacketLayout raw_layout(std::int64_t length, std::int64_t size, Packetization mode) {
  const std::int64_t body = size / length;
  const std::int64_t rest = size - body * length;
  if (mode == Packetization::even_split || rest == 0) return {body, length - 1, body + rest, 1};
  return {body, length - rest, body + 1, rest};
}

}  // namespace

PacketLayout packet_layout(const FlowRecord& flow, double max_packet) {
  if (flow.length < 1) throw PacketizeError("flow length must be at least one packet");
  if (flow.size < flow.length) throw PacketizeError("flow size is smaller than one byte per packet");
  const auto layout = raw_layout(flow.length, flow.size, flow.packetization);
  if (!layout_fits(layout, max_packet)) {
    throw PacketizeError("flow of " + std::to_string(flow.length) + " packets and " + std::to_string(flow.size) +
                         " bytes cannot be split into packets of at most " + std::to_string(max_packet) + " bytes");
  }
  return layout;
}

void assign_packetization(FlowRecord& flow, double max_packet) {
  flow.packetization = Packetization::even_split;
  if (flow.length >= 1 && flow.size >= flow.length &&
      !layout_fits(raw_layout(flow.length, flow.size, Packetization::even_split), max_packet)) {
    flow.packetization = Packetization::last_remainder;
  }
  packet_layout(flow, max_packet);
}

std::int64_t PacketLayout::packet_exceeding(double bytes) const {
  const double body_total = static_cast<double>(body_count) * static_cast<double>(body_size);
  if (bytes < body_total) return static_cast<std::int64_t>(std::floor(bytes / static_cast<double>(body_size))) + 1;
  const double in_tail = std::floor((bytes - body_total) / static_cast<double>(tail_size));
  return body_count + static_cast<std::int64_t>(std::min(in_tail, static_cast<double>(tail_count))) + 1;
}

std::vector<std::int64_t> packetize(const FlowRecord& flow, double max_packet) {
  const auto layout = packet_layout(flow, max_packet);
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(layout.body_count), layout.body_size);
  sizes.insert(sizes.end(), static_cast<std::size_t>(layout.tail_count), layout.tail_size);
  return sizes;
}

void GeneratorConfig::validate() const {
  if (flow_count < 1) throw ValidationError("flow_count must be at least 1");
  if (min_packet < 1) throw ValidationError("min_packet must be at least 1 byte");
  if (jobs < 1) throw ValidationError("jobs must be at least 1");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::int64_t shard, StreamTag tag) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h + static_cast<std::uint64_t>(shard));
}

FlowRecord sample_flow(const TrafficModel& model, Coupling coupling, std::int64_t min_packet, UniformSource& rng,
                       bool* clamped) {
  const double u = rng();
  const double v = coupling == Coupling::comonotone ? u : rng();
  FlowRecord flow;
  flow.length = std::llround(model.length.flows.quantile(u));
  flow.size = std::llround(model.size.flows.continuous_quantile(v));

  const double max_packet = model.max_packet_size;
  const std::int64_t lo = flow.length * min_packet;
  const auto hi = static_cast<std::int64_t>(std::floor(static_cast<double>(flow.length) * max_packet));
  bool moved = false;
  if (flow.size < lo) {
    flow.size = lo;
    moved = true;
  } else if (flow.size > hi) {
    flow.size = hi;
    moved = true;
  }

  if (!layout_fits(raw_layout(flow.length, flow.size, Packetization::even_split), max_packet)) {
    if (layout_fits(raw_layout(flow.length, flow.size, Packetization::last_remainder), max_packet)) {
      flow.packetization = Packetization::last_remainder;
    } else {
      // Only reachable when max_packet is below min_packet.
      throw PacketizeError("flow of " + std::to_string(flow.length) + " packets and " + std::to_string(flow.size) +
                           " bytes cannot be packetized");
    }
  }
  if (clamped != nullptr) *clamped = moved;
  return flow;
}

std::int64_t shard_count(std::int64_t flow_count) { return (flow_count + kShardSize - 1) / kShardSize; }

Population generate_shard(const TrafficModel& model, const GeneratorConfig& config, std::int64_t shard) {
  const std::int64_t begin = shard * kShardSize;
  const std::int64_t count = std::min(kShardSize, config.flow_count - begin);
  Population out;
  if (count <= 0) return out;
  out.flows.reserve(static_cast<std::size_t>(count));
  UniformSource rng(stream_seed(config.seed, shard, StreamTag::flows));
  for (std::int64_t i = 0; i < count; ++i) {
    bool clamped = false;
    out.flows.push_back(sample_flow(model, config.coupling, config.min_packet, rng, &clamped));
    out.clamped += clamped ? 1 : 0;
  }
  return out;
}

Population generate_population(const TrafficModel& model, const GeneratorConfig& config) {
  config.validate();
  const std::int64_t shards = shard_count(config.flow_count);
  std::vector<Population> parts(static_cast<std::size_t>(shards));
  const int workers = static_cast<int>(std::min<std::int64_t>(config.jobs, shards));
  if (workers <= 1) {
    for (std::int64_t s = 0; s < shards; ++s) parts[static_cast<std::size_t>(s)] = generate_shard(model, config, s);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::int64_t s = w; s < shards; s += workers) {
          parts[static_cast<std::size_t>(s)] = generate_shard(model, config, s);
        }
      });
    }
  }
  Population out;
  out.flows.reserve(static_cast<std::size_t>(config.flow_count));
  for (auto& part : parts) {
    out.flows.insert(out.flows.end(), part.flows.begin(), part.flows.end());
    out.clamped += part.clamped;
  }
  return out;
}

void write_flows_csv(std::ostream& out, std::span<const FlowRecord> flows) {
  out << "length_packets,size_bytes\n";
  for (const auto& f : flows) out << f.length << ',' << f.size << '\n';
}

std::vector<FlowRecord> read_flows_csv(std::istream& in) {
  std::vector<FlowRecord> flows;
  std::string line;
  std::size_t line_no = 0;
  auto parse = [](std::string_view text, std::int64_t& value) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    std::int64_t length = 0;
    std::int64_t size = 0;
    const bool ok = comma != std::string::npos && parse(std::string_view(line).substr(0, comma), length) &&
                    parse(std::string_view(line).substr(comma + 1), size);
    if (!ok) {
      if (line_no == 1 && flows.empty()) continue;  // header
      throw ValidationError("flow CSV line " + std::to_string(line_no) + ": expected 'length_packets,size_bytes'");
    }
    if (length < 1 || size < length) {
      throw ValidationError("flow CSV line " + std::to_string(line_no) + ": need length >= 1 and size >= length");
    }
    flows.push_back({length, size, Packetization::even_split});
  }
  return flows;
}

}  // namespace flowtab
