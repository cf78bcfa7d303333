#include "obsim/engine.hpp"

#include <algorithm>

#include "obsim/format.hpp"

namespace obsim {

namespace {

std::vector<bool> blank_mask(const Scenario &s, const Partition &o) {
    std::vector<bool> mask(s.steps.size(), false);
    for (const std::string &id : o.ids()) {
        const int idx = s.step_index(id);
        if (idx < 0) {
            throw ContractError("partition " + o.display() + ": unknown step '" + id + "'");
        }
        mask[static_cast<std::size_t>(idx)] = true;
    }
    return mask;
}

// Flat odometer index of a tuple within the support defined by `mask`
// (blank steps excluded from the enumeration).
std::size_t support_index(const Scenario &s, const std::vector<bool> &mask,
                          const OutcomeTuple &t) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        if (mask[k]) {
            continue;
        }
        idx = idx * s.steps[k].branches.size() + static_cast<std::size_t>(t.outcome[k]);
    }
    return idx;
}

void check_tuple_matches(const Scenario &s, const std::vector<bool> &mask,
                         const OutcomeTuple &t, const Partition &o) {
    if (t.outcome.size() != s.steps.size()) {
        throw ContractError("tuple has " + std::to_string(t.outcome.size()) + " entries for " +
                            std::to_string(s.steps.size()) + " steps");
    }
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const bool blank = t.outcome[k] == OutcomeTuple::kBlank;
        if (blank != mask[k]) {
            throw ContractError("tuple is " + std::string(blank ? "blank" : "recorded") +
                                " on step " + s.steps[k].id + " but partition " + o.display() +
                                (mask[k] ? " merges it" : " does not merge it"));
        }
        if (!blank && (t.outcome[k] < 0 ||
                       t.outcome[k] >= static_cast<int>(s.steps[k].branches.size()))) {
            throw ContractError("tuple outcome index " + std::to_string(t.outcome[k]) +
                                " out of range on step " + s.steps[k].id);
        }
    }
}

} // namespace

std::vector<std::string> tuple_labels(const Scenario &s, const OutcomeTuple &t) {
    if (t.outcome.size() != s.steps.size()) {
        throw ContractError("tuple has " + std::to_string(t.outcome.size()) + " entries for " +
                            std::to_string(s.steps.size()) + " steps");
    }
    std::vector<std::string> out;
    out.reserve(t.outcome.size());
    for (std::size_t k = 0; k < t.outcome.size(); ++k) {
        if (t.outcome[k] == OutcomeTuple::kBlank) {
            out.push_back("-");
        } else {
            out.push_back(s.steps[k].branches[static_cast<std::size_t>(t.outcome[k])].outcome);
        }
    }
    return out;
}

OutcomeTuple tuple_from_labels(const Scenario &s, const std::vector<std::string> &labels) {
    if (labels.size() != s.steps.size()) {
        throw ContractError("tuple has " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(s.steps.size()) + " steps");
    }
    OutcomeTuple t;
    t.outcome.resize(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == "-") {
            t.outcome[k] = OutcomeTuple::kBlank;
            continue;
        }
        int found = -1;
        for (std::size_t b = 0; b < s.steps[k].branches.size(); ++b) {
            if (s.steps[k].branches[b].outcome == labels[k]) {
                found = static_cast<int>(b);
                break;
            }
        }
        if (found < 0) {
            throw ContractError("step " + s.steps[k].id + " has no outcome '" + labels[k] + "'");
        }
        t.outcome[k] = found;
    }
    return t;
}

double OutcomeDistribution::total() const {
    double acc = 0.0;
    for (const auto &[t, p] : entries) {
        acc += p;
    }
    return acc;
}

double OutcomeDistribution::probability(const OutcomeTuple &t) const {
    // Supports are small (exponential enumeration is capped upstream), so a
    // scan keeps this free of any parallel index bookkeeping.
    for (const auto &[tuple, p] : entries) {
        if (tuple == t) {
            return p;
        }
    }
    throw ContractError("tuple outside the distribution's support");
}

std::int64_t fill_count(const Scenario &s, const Partition &o) {
    require_valid_partition(s, o);
    std::int64_t n = 1;
    for (const std::string &id : o.ids()) {
        n *= static_cast<std::int64_t>(s.find_step(id)->branches.size());
    }
    return n;
}

double chain_probability(const Scenario &s, const Partition &o, const OutcomeTuple &t) {
    require_valid_partition(s, o);
    const std::vector<bool> mask = blank_mask(s, o);
    check_tuple_matches(s, mask, t, o);

    StateVector v = s.initial;
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const MeasurementStep &st = s.steps[k];
        if (mask[k]) {
            v = apply(*st.merged, v);
        } else {
            v = apply(st.branches[static_cast<std::size_t>(t.outcome[k])].op, v);
        }
    }
    return norm2(v);
}

OutcomeDistribution exact_distribution(const Scenario &s, const Partition &o) {
    require_valid_partition(s, o);
    const std::vector<bool> mask = blank_mask(s, o);
    if (s.steps.size() > 16) {
        throw CapacityError("scenario has " + std::to_string(s.steps.size()) +
                            " steps; enumeration is capped at 16");
    }

    std::size_t n_support = 1;
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        if (!mask[k]) {
            n_support *= s.steps[k].branches.size();
        }
        if (n_support > (std::size_t{1} << 24)) {
            throw CapacityError("support too large to enumerate");
        }
    }

    OutcomeDistribution dist;
    dist.partition = o;
    dist.entries.reserve(n_support);

    // Odometer over measured steps (first step slowest); merged steps stay
    // blank. Spaces are small, so each tuple just replays its full chain.
    OutcomeTuple t;
    t.outcome.resize(s.steps.size());
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        t.outcome[k] = mask[k] ? OutcomeTuple::kBlank : 0;
    }
    for (std::size_t idx = 0; idx < n_support; ++idx) {
        StateVector v = s.initial;
        for (std::size_t k = 0; k < s.steps.size(); ++k) {
            const MeasurementStep &st = s.steps[k];
            v = mask[k] ? apply(*st.merged, v)
                        : apply(st.branches[static_cast<std::size_t>(t.outcome[k])].op, v);
        }
        dist.entries.push_back({t, norm2(v)});
        for (std::size_t k = s.steps.size(); k-- > 0;) {
            if (mask[k]) {
                continue;
            }
            if (++t.outcome[k] < static_cast<int>(s.steps[k].branches.size())) {
                break;
            }
            t.outcome[k] = 0;
        }
    }
    return dist;
}

OutcomeDistribution mixture_distribution(const Scenario &s, const PartitionPrior &prior) {
    const std::vector<Violation> bad = validate_prior(s, prior);
    if (!bad.empty()) {
        throw ContractError("mixture: " + bad.front().message);
    }
    const PartitionPrior normed = prior.normalized();

    // Full support: every step measured.
    std::size_t n_full = 1;
    for (const MeasurementStep &st : s.steps) {
        n_full *= st.branches.size();
        if (n_full > (std::size_t{1} << 24)) {
            throw CapacityError("mixture support too large");
        }
    }

    OutcomeDistribution dist;
    dist.partition = std::nullopt;
    dist.entries.resize(n_full);

    // Enumerate full tuples in odometer order.
    OutcomeTuple t;
    t.outcome.assign(s.steps.size(), 0);
    for (std::size_t idx = 0; idx < n_full; ++idx) {
        dist.entries[idx] = {t, 0.0};
        for (std::size_t k = s.steps.size(); k-- > 0;) {
            if (++t.outcome[k] < static_cast<int>(s.steps[k].branches.size())) {
                break;
            }
            t.outcome[k] = 0;
        }
    }

    for (const auto &[o, weight] : normed.weights) {
        if (weight == 0.0) {
            continue;
        }
        const OutcomeDistribution comp = exact_distribution(s, o);
        const std::vector<bool> mask = blank_mask(s, o);
        const double fill = 1.0 / static_cast<double>(fill_count(s, o));
        for (auto &[tuple, p] : dist.entries) {
            OutcomeTuple visible = tuple;
            for (std::size_t k = 0; k < mask.size(); ++k) {
                if (mask[k]) {
                    visible.outcome[k] = OutcomeTuple::kBlank;
                }
            }
            p += weight * fill * comp.entries[support_index(s, mask, visible)].second;
        }
    }
    return dist;
}

double halt_probability(const Scenario &s, const PartitionPrior &prior) {
    if (s.halt_target.empty()) {
        throw ContractError("scenario '" + s.name + "' has no halt target");
    }
    const OutcomeDistribution mix = mixture_distribution(s, prior);

    std::vector<int> want(s.steps.size(), OutcomeTuple::kBlank);
    for (const auto &[id, outcome] : s.halt_target) {
        const int idx = s.step_index(id);
        const MeasurementStep &st = s.steps[static_cast<std::size_t>(idx)];
        for (std::size_t b = 0; b < st.branches.size(); ++b) {
            if (st.branches[b].outcome == outcome) {
                want[static_cast<std::size_t>(idx)] = static_cast<int>(b);
            }
        }
    }

    double acc = 0.0;
    for (const auto &[t, p] : mix.entries) {
        bool match = true;
        for (std::size_t k = 0; k < want.size(); ++k) {
            if (want[k] != OutcomeTuple::kBlank && t.outcome[k] != want[k]) {
                match = false;
                break;
            }
        }
        if (match) {
            acc += p;
        }
    }
    return acc;
}

std::string to_tsv(const Scenario &s, const OutcomeDistribution &dist) {
    std::vector<std::pair<std::vector<std::string>, double>> rows;
    rows.reserve(dist.entries.size());
    for (const auto &[t, p] : dist.entries) {
        rows.push_back({tuple_labels(s, t), p});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });

    std::string out;
    for (const MeasurementStep &st : s.steps) {
        out += st.id;
        out += '\t';
    }
    out += "prob\n";
    for (const auto &[labels, p] : rows) {
        for (const std::string &l : labels) {
            out += l;
            out += '\t';
        }
        out += format_double(p);
        out += '\n';
    }
    return out;
}

} // namespace obsim
