#include "obsim/sampler.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "obsim/format.hpp"

namespace obsim {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNormFloor = 1e-12;

std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool matches_halt_target(const Scenario &s, const OutcomeTuple &t) {
    if (s.halt_target.empty()) {
        return false;
    }
    for (const auto &[id, outcome] : s.halt_target) {
        const int idx = s.step_index(id);
        if (idx < 0) {
            return false;
        }
        const int got = t.outcome[static_cast<std::size_t>(idx)];
        if (got == OutcomeTuple::kBlank) {
            return false;
        }
        if (s.steps[static_cast<std::size_t>(idx)].branches[static_cast<std::size_t>(got)].outcome !=
            outcome) {
            return false;
        }
    }
    return true;
}

} // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64_at(seed, stream)) {}

double StreamRng::next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

RoundRecord sample_round(const Scenario &s, const PartitionPrior &prior, StreamRng &rng) {
    RoundRecord rec;
    rec.outcomes.outcome.assign(s.steps.size(), OutcomeTuple::kBlank);

    // Partition draw; the final entry absorbs residual rounding mass.
    const double u = rng.next_unit();
    const Partition *chosen = nullptr;
    double cum = 0.0;
    for (const auto &[p, w] : prior.weights) {
        cum += w;
        chosen = &p;
        if (u < cum) {
            break;
        }
    }
    if (chosen == nullptr) {
        throw ContractError("sample_round: empty prior");
    }
    rec.true_partition = *chosen;

    StateVector v = s.initial;
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const MeasurementStep &st = s.steps[k];
        if (chosen->contains(st.id)) {
            v = apply(*st.merged, v);
            continue;
        }
        const double total = norm2(v);
        if (!(total > kNormFloor)) {
            throw DegeneracyError("round " + std::to_string(rec.round_index) + ", step " + st.id +
                                  ": state norm " + format_double(total) +
                                  " too small to renormalize");
        }
        std::vector<double> weights(st.branches.size());
        std::vector<StateVector> collapsed(st.branches.size());
        for (std::size_t b = 0; b < st.branches.size(); ++b) {
            collapsed[b] = apply(st.branches[b].op, v);
            weights[b] = norm2(collapsed[b]) / total;
        }
        const double draw = rng.next_unit();
        std::size_t pick = 0;
        double acc = 0.0;
        bool picked = false;
        for (std::size_t b = 0; b < st.branches.size(); ++b) {
            if (weights[b] <= 0.0) {
                continue;
            }
            acc += weights[b];
            pick = b;
            picked = true;
            if (draw < acc) {
                break;
            }
        }
        if (!picked) {
            throw DegeneracyError("round " + std::to_string(rec.round_index) + ", step " + st.id +
                                  ": every branch has zero probability");
        }
        rec.outcomes.outcome[k] = static_cast<int>(pick);
        v = std::move(collapsed[pick]);
    }

    rec.halted = matches_halt_target(s, rec.outcomes);
    return rec;
}

void sample_stream(const Scenario &s, const PartitionPrior &prior, std::uint64_t seed,
                   std::int64_t n_rounds, std::uint64_t base_stream, bool record_partition,
                   const std::function<void(const RoundRecord &)> &sink) {
    if (n_rounds < 1) {
        throw ContractError("sample_stream: n_rounds must be >= 1");
    }
    for (std::int64_t r = 0; r < n_rounds; ++r) {
        StreamRng rng(seed, base_stream + static_cast<std::uint64_t>(r));
        RoundRecord rec;
        try {
            rec = sample_round(s, prior, rng);
        } catch (const DegeneracyError &e) {
            throw DegeneracyError("round " + std::to_string(r) + ": " + e.what());
        }
        rec.round_index = r;
        if (!record_partition) {
            rec.true_partition.reset();
        }
        sink(rec);
    }
}

std::vector<RoundRecord> sample_many(const Scenario &s, const PartitionPrior &prior,
                                     std::uint64_t seed, std::int64_t n_rounds,
                                     bool record_partition, std::uint64_t base_stream) {
    std::vector<RoundRecord> out;
    out.reserve(static_cast<std::size_t>(n_rounds));
    sample_stream(s, prior, seed, n_rounds, base_stream, record_partition,
                  [&out](const RoundRecord &r) { out.push_back(r); });
    return out;
}

HaltRun run_until_halt(const Scenario &s, const PartitionPrior &prior, std::uint64_t seed,
                       std::int64_t max_rounds, std::uint64_t base_stream) {
    if (s.halt_target.empty()) {
        throw ContractError("run_until_halt: scenario '" + s.name + "' has no halt target");
    }
    if (max_rounds < 1) {
        throw ContractError("run_until_halt: max_rounds must be >= 1");
    }
    HaltRun run;
    for (std::int64_t r = 0; r < max_rounds; ++r) {
        StreamRng rng(seed, base_stream + static_cast<std::uint64_t>(r));
        RoundRecord rec = sample_round(s, prior, rng);
        rec.round_index = r;
        rec.true_partition.reset();
        run.records.push_back(std::move(rec));
        if (run.records.back().halted) {
            run.rounds = r + 1;
            break;
        }
    }
    return run;
}

void uniformize_record(const Scenario &s, RoundRecord &r, StreamRng &rng) {
    for (std::size_t k = 0; k < r.outcomes.outcome.size(); ++k) {
        if (r.outcomes.outcome[k] != OutcomeTuple::kBlank) {
            continue;
        }
        const std::size_t n = s.steps[k].branches.size();
        const double u = rng.next_unit();
        std::size_t pick = static_cast<std::size_t>(u * static_cast<double>(n));
        if (pick >= n) {
            pick = n - 1;
        }
        r.outcomes.outcome[k] = static_cast<int>(pick);
    }
    r.halted = matches_halt_target(s, r.outcomes);
}

void uniformize_blanks(const Scenario &s, std::vector<RoundRecord> &records, StreamRng &rng) {
    for (RoundRecord &r : records) {
        uniformize_record(s, r, rng);
    }
}

std::string record_to_jsonl(const Scenario &s, const RoundRecord &r, bool include_partition) {
    ordered_json j;
    j["round"] = r.round_index;
    ordered_json outcomes;
    const std::vector<std::string> labels = tuple_labels(s, r.outcomes);
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        outcomes[s.steps[k].id] = labels[k];
    }
    j["outcomes"] = std::move(outcomes);
    j["halted"] = r.halted;
    if (include_partition && r.true_partition) {
        ordered_json ids = ordered_json::array();
        // Step order, so the array reads like the protocol.
        for (const MeasurementStep &st : s.steps) {
            if (r.true_partition->contains(st.id)) {
                ids.push_back(st.id);
            }
        }
        j["partition"] = std::move(ids);
    }
    return j.dump();
}

RoundRecord record_from_jsonl(const Scenario &s, const std::string &line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const std::exception &e) {
        throw std::runtime_error(std::string("bad record line: ") + e.what());
    }
    RoundRecord rec;
    if (!j.contains("round") || !j["round"].is_number_integer()) {
        throw std::runtime_error("bad record line: missing integer 'round'");
    }
    rec.round_index = j["round"].get<std::int64_t>();
    if (!j.contains("outcomes") || !j["outcomes"].is_object()) {
        throw std::runtime_error("bad record line: missing 'outcomes' object");
    }
    std::vector<std::string> labels(s.steps.size());
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const auto &obj = j["outcomes"];
        if (!obj.contains(s.steps[k].id) || !obj[s.steps[k].id].is_string()) {
            throw std::runtime_error("bad record line: no outcome for step " + s.steps[k].id);
        }
        labels[k] = obj[s.steps[k].id].get<std::string>();
    }
    rec.outcomes = tuple_from_labels(s, labels);
    if (!j.contains("halted") || !j["halted"].is_boolean()) {
        throw std::runtime_error("bad record line: missing boolean 'halted'");
    }
    rec.halted = j["halted"].get<bool>();
    if (j.contains("partition")) {
        if (!j["partition"].is_array()) {
            throw std::runtime_error("bad record line: 'partition' must be an array");
        }
        std::vector<std::string> ids;
        for (const auto &v : j["partition"]) {
            if (!v.is_string()) {
                throw std::runtime_error("bad record line: 'partition' must hold step ids");
            }
            ids.push_back(v.get<std::string>());
        }
        rec.true_partition = Partition{ids};
    }
    return rec;
}

} // namespace obsim
