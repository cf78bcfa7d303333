#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "obsim/engine.hpp"
#include "obsim/scenario.hpp"

namespace obsim {

// The running state norm collapsed below the renormalization floor before a
// measured step (only possible on scenarios that fail validation).
struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic stream generator: mt19937_64 (bit-exact per the C++
// standard) seeded with the streamIndex-th output of SplitMix64(seed), so
// identical (seed, stream) pairs reproduce identical draw sequences on every
// platform. Unit doubles take the top 53 bits of one 64-bit draw;
// std::uniform_real_distribution is deliberately not used (its sequences are
// implementation-defined).
class StreamRng {
  public:
    StreamRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    double next_unit(); // [0, 1)

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

struct RoundRecord {
    std::int64_t round_index = 0;
    OutcomeTuple outcomes;
    bool halted = false;
    std::optional<Partition> true_partition; // recorded only when asked

    bool operator==(const RoundRecord &o) const = default;
};

// One experiment round: draws a partition from the prior (weights in
// canonical partition order), then walks the steps — merged steps apply
// their isometry, measured steps draw an outcome with probability
// ||op v||^2 / ||v||^2 and collapse. `halted` is true iff every halt-target
// step shows its target outcome; a scenario without a halt rule never halts.
// The prior must already be validated and normalized.
RoundRecord sample_round(const Scenario &s, const PartitionPrior &prior, StreamRng &rng);

// n_rounds independent rounds; round r draws from stream base_stream + r, so
// any batch split reproduces the serial sequence exactly.
void sample_stream(const Scenario &s, const PartitionPrior &prior, std::uint64_t seed,
                   std::int64_t n_rounds, std::uint64_t base_stream, bool record_partition,
                   const std::function<void(const RoundRecord &)> &sink);

std::vector<RoundRecord> sample_many(const Scenario &s, const PartitionPrior &prior,
                                     std::uint64_t seed, std::int64_t n_rounds,
                                     bool record_partition = false, std::uint64_t base_stream = 0);

struct HaltRun {
    // 1-based count of rounds until the first halt; absent when no round
    // halted within max_rounds (records then holds all max_rounds rounds).
    std::optional<std::int64_t> rounds;
    std::vector<RoundRecord> records;
};

HaltRun run_until_halt(const Scenario &s, const PartitionPrior &prior, std::uint64_t seed,
                       std::int64_t max_rounds, std::uint64_t base_stream = 0);

// Replaces every blank with a uniform draw over that step's branches,
// consuming `rng` sequentially in record order.
void uniformize_record(const Scenario &s, RoundRecord &r, StreamRng &rng);
void uniformize_blanks(const Scenario &s, std::vector<RoundRecord> &records, StreamRng &rng);

// JSON-lines record format (keys in this order, blanks encoded "-"):
//   {"round": n, "outcomes": {"I": "h", ...}, "halted": false,
//    "partition": ["I","II"]}
// "partition" appears only when the record carries one and
// include_partition is set.
std::string record_to_jsonl(const Scenario &s, const RoundRecord &r, bool include_partition);
RoundRecord record_from_jsonl(const Scenario &s, const std::string &line);

} // namespace obsim
