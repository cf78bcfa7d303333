#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "obsim/scenario.hpp"

namespace obsim {

// One recorded outcome per step, as an index into that step's branch list.
// kBlank marks a step that ran merged (no outcome exists).
struct OutcomeTuple {
    static constexpr int kBlank = -1;

    std::vector<int> outcome;

    bool operator<(const OutcomeTuple &o) const { return outcome < o.outcome; }
    bool operator==(const OutcomeTuple &o) const { return outcome == o.outcome; }
};

// Outcome labels for a tuple, blank steps printed as "-".
std::vector<std::string> tuple_labels(const Scenario &s, const OutcomeTuple &t);

// Inverse of tuple_labels; throws ContractError on unknown labels or arity.
OutcomeTuple tuple_from_labels(const Scenario &s, const std::vector<std::string> &labels);

// Probability map over outcome tuples with a fixed support: every enumerable
// tuple is present, including explicit zeros. Entries are stored in odometer
// order (first step slowest, branch order within a step).
struct OutcomeDistribution {
    std::optional<Partition> partition; // nullopt for a mixture
    std::vector<std::pair<OutcomeTuple, double>> entries;

    double total() const;
    // Probability of t; throws ContractError when t is outside the support.
    double probability(const OutcomeTuple &t) const;
};

// Number of ways to fill the blanks a partition leaves: the product over its
// merged steps of their branch counts. Under the mixture law each unrecorded
// outcome counts as a uniform draw over that step's branches, so partition o
// contributes weight p_o / fill_count(o) to every compatible full tuple.
std::int64_t fill_count(const Scenario &s, const Partition &o);

// ||M_n ... M_1 |initial>||^2 where M_k is the branch operator of the
// recorded outcome for measured steps and the merged isometry for steps in o.
// t must be blank exactly on o's steps.
double chain_probability(const Scenario &s, const Partition &o, const OutcomeTuple &t);

// Enumerates every outcome tuple (blank on o's steps) with its probability.
OutcomeDistribution exact_distribution(const Scenario &s, const Partition &o);

// Distribution over fully-labeled tuples: sum over partitions of
// p_o / fill_count(o) * P_o(tuple with o's steps blanked). The prior is
// normalized internally; it must pass validate_prior first.
OutcomeDistribution mixture_distribution(const Scenario &s, const PartitionPrior &prior);

// Marginal probability under the mixture that every halt-target step shows
// its target outcome. Throws ContractError when s has no halt target.
double halt_probability(const Scenario &s, const PartitionPrior &prior);

// TSV serialization: header = step ids + "prob", one tuple per row, rows
// sorted lexicographically by outcome labels, blanks printed "-".
std::string to_tsv(const Scenario &s, const OutcomeDistribution &dist);

} // namespace obsim
