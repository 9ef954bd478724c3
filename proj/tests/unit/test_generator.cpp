#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "flowtab/error.hpp"
#include "flowtab/generator.hpp"
#include "support.hpp"

using namespace flowtab;
using namespace flowtab::test;

namespace {

Population make(const TrafficModel& m, std::int64_t n, std::uint64_t seed, int jobs = 1) {
  GeneratorConfig c;
  c.flow_count = n;
  c.seed = seed;
  c.jobs = jobs;
  return generate_population(m, c);
}

}  // namespace

TEST_SUITE("generator") {
  TEST_CASE("packetize examples") {
    CHECK(packetize({3, 10}) == std::vector<std::int64_t>{3, 3, 4});
    CHECK(packetize({1, 64}) == std::vector<std::int64_t>{64});
    CHECK(packetize({4, 100}) == std::vector<std::int64_t>{25, 25, 25, 25});
    CHECK(packetize({2, 3036}) == std::vector<std::int64_t>{1518, 1518});
  }

  TEST_CASE("packetize rejects impossible flows") {
    CHECK_THROWS_AS(packetize({3, 2}), PacketizeError);
    CHECK_THROWS_AS(packetize({2, 3037}), PacketizeError);
    FlowRecord f{3, 3 * 1518 + 1};
    CHECK_THROWS_AS(assign_packetization(f, 1518), PacketizeError);
  }

  TEST_CASE("long flows fall back to spreading the remainder") {
    // Even split would put 1499 extra bytes on the last packet.
    FlowRecord f{1500, 1500 * 1517 + 1499};
    CHECK_THROWS_AS(packet_layout(f, 1518), PacketizeError);
    assign_packetization(f, 1518);
    CHECK(f.packetization == Packetization::last_remainder);
    const auto sizes = packetize(f, 1518);
    REQUIRE(sizes.size() == 1500);
    CHECK(std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) == f.size);
    CHECK(*std::max_element(sizes.begin(), sizes.end()) == 1518);
    CHECK(std::count(sizes.begin(), sizes.end(), 1518) == 1499);
    CHECK(sizes.front() == 1517);
  }

  TEST_CASE("layout agrees with packet list") {
    for (FlowRecord f : {FlowRecord{7, 1000}, FlowRecord{5, 5}, FlowRecord{40, 60'000}, FlowRecord{1, 1518}}) {
      assign_packetization(f, 1518);
      const auto sizes = packetize(f, 1518);
      const auto layout = packet_layout(f, 1518);
      std::int64_t before = 0;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        CHECK(layout.bytes_before(static_cast<std::int64_t>(i) + 1) == before);
        // packet_exceeding(b) is the first packet whose arrival pushes the count above b.
        CHECK(layout.packet_exceeding(static_cast<double>(before)) == static_cast<std::int64_t>(i) + 1);
        before += sizes[i];
      }
      CHECK(layout.packet_exceeding(static_cast<double>(f.size)) == f.length + 1);
    }
  }

  TEST_CASE("toy flows") {
    const auto pop = make(toy(), 100'000, 7);
    std::int64_t long_flows = 0;
    for (const auto& f : pop.flows) {
      REQUIRE((f.length == 1 || f.length == 10));
      CHECK(f.size == 100 * f.length);
      long_flows += f.length == 10;
    }
    CHECK(pop.clamped == 0);
    const auto big = make(toy(), 1'000'000, 3);
    const auto n10 = std::count_if(big.flows.begin(), big.flows.end(), [](const FlowRecord& f) { return f.length == 10; });
    CHECK(std::abs(static_cast<double>(n10) / 1e6 - 0.5) < 0.002);
  }

  TEST_CASE("point mass model") {
    const auto m = parse_model(model_json(point(1.0, 1), point(1.0, 64)));
    for (const auto& f : make(m, 1000, 11).flows) CHECK(f == FlowRecord{1, 64});
  }

  TEST_CASE("length distribution matches the model") {
    const auto& m = heavytail();
    const auto pop = make(m, 1'000'000, 2024);
    std::map<std::int64_t, std::int64_t> counts;
    for (const auto& f : pop.flows) ++counts[f.length];
    // Discrete law: the sup distance is attained on the support points.
    double cum = 0.0, ks = 0.0;
    std::int64_t previous = 0;
    for (const auto& [k, c] : counts) {
      ks = std::max(ks, std::abs(cum / 1e6 - m.length.flows.cdf(static_cast<double>(k - 1))));
      cum += static_cast<double>(c);
      ks = std::max(ks, std::abs(cum / 1e6 - m.length.flows.cdf(static_cast<double>(k))));
      previous = k;
    }
    CHECK(previous > 1000);
    CHECK(ks <= 0.005);
    CHECK(pop.clamped_fraction() < 1e-3);
  }

  TEST_CASE("size distribution matches the model") {
    const auto& m = heavytail();
    const auto pop = make(m, 1'000'000, 99);
    std::vector<std::int64_t> sizes;
    for (const auto& f : pop.flows) sizes.push_back(f.size);
    std::sort(sizes.begin(), sizes.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < sizes.size(); i += 997) {
      const double x = static_cast<double>(sizes[i]);
      const auto hi = std::upper_bound(sizes.begin(), sizes.end(), sizes[i]) - sizes.begin();
      // Sizes are rounded to whole bytes.
      ks = std::max(ks, std::abs(static_cast<double>(hi) / 1e6 - m.size.flows.cdf(x + 0.5)));
    }
    CHECK(ks <= 0.005);
  }

  TEST_CASE("determinism") {
    const auto a = make(heavytail(), 200'000, 5, 1);
    const auto b = make(heavytail(), 200'000, 5, 1);
    const auto c = make(heavytail(), 200'000, 5, 3);
    CHECK(a.flows == b.flows);
    CHECK(a.flows == c.flows);
    const auto d = make(heavytail(), 200'000, 6, 1);
    CHECK_FALSE(a.flows == d.flows);
  }

  TEST_CASE("shards are slices of the population") {
    GeneratorConfig c;
    c.flow_count = 3 * kShardSize + 17;
    c.seed = 8;
    const auto all = generate_population(toy(), c);
    CHECK(shard_count(c.flow_count) == 4);
    const auto last = generate_shard(toy(), c, 3);
    REQUIRE(last.flows.size() == 17);
    CHECK(std::equal(last.flows.begin(), last.flows.end(), all.flows.begin() + 3 * kShardSize));
  }

  TEST_CASE("invalid config") {
    GeneratorConfig c;
    c.flow_count = 0;
    CHECK_THROWS_AS(generate_population(toy(), c), ValidationError);
    c.flow_count = 10;
    c.jobs = 0;
    CHECK_THROWS_AS(generate_population(toy(), c), ValidationError);
  }

  TEST_CASE("csv round trip") {
    const auto pop = make(heavytail(), 5000, 1);
    std::stringstream buf;
    write_flows_csv(buf, pop.flows);
    CHECK(buf.str().rfind("length_packets,size_bytes\n", 0) == 0);
    const auto back = read_flows_csv(buf);
    REQUIRE(back.size() == pop.flows.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].length == pop.flows[i].length);
      CHECK(back[i].size == pop.flows[i].size);
    }
  }
}
