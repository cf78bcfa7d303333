#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "obsim/engine.hpp"
#include "obsim/sampler.hpp"
#include "obsim/scenario.hpp"

namespace obsim {

// A tuple with observed counts has zero probability under every component.
struct DataModelMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Component distributions over the fixed full-tuple support: entry(t, o) is
// the probability partition o assigns to the full tuple t after filling its
// blanks uniformly, i.e. P_o(visible(t)) / fill_count(o). Rows follow the
// engine's full-tuple odometer order; columns follow the supplied partition
// order.
struct ModelMatrix {
    std::vector<OutcomeTuple> row_tuples;
    std::vector<std::vector<std::string>> row_labels;
    std::vector<Partition> partitions;
    std::vector<double> entries; // row-major
    int rank = 0;                // singular values above 1e-10 * sigma_max
    double sigma_max = 0.0;

    std::size_t rows() const { return row_tuples.size(); }
    std::size_t cols() const { return partitions.size(); }
    double at(std::size_t r, std::size_t c) const { return entries[r * cols() + c]; }
    bool identifiable() const { return rank == static_cast<int>(cols()); }

    // Row index of a full tuple; throws ContractError on blanks/arity.
    std::size_t row_of(const OutcomeTuple &t) const;
};

ModelMatrix build_model_matrix(const Scenario &s, const std::vector<Partition> &partitions);

using CountsMap = std::map<OutcomeTuple, std::int64_t>;

struct EstimationResult {
    PartitionPrior p_hat;
    double log_likelihood = 0.0;
    std::int64_t iterations = 0;
    bool converged = false;
    bool identifiable = false;
    // Log-likelihood after each iteration (EM fills this; LS leaves it
    // empty). Non-decreasing by construction of the EM update.
    std::vector<double> ll_trajectory;
};

// One EM update for the mixture weights: responsibilities
// r_o(t) = p_o m(t,o) / sum_o' p_o' m(t,o'), then
// p_o <- sum_t counts(t) r_o(t) / sum counts. Returns the log-likelihood of
// the INPUT weights. Exposed so tests can audit per-iteration invariants.
double em_step(const ModelMatrix &m, const std::vector<double> &counts, std::vector<double> &p);

// Mixture-weight maximum likelihood from uniform initialization; stops when
// max |delta p| <= tol or after max_iter iterations.
EstimationResult estimate_em(const ModelMatrix &m, const CountsMap &counts, double tol = 1e-10,
                             std::int64_t max_iter = 100000);

// Simplex-constrained least squares ||m p - f||_2 (f = empirical
// frequencies) by projected gradient: update p <- proj(p - m^T (m p - f) /
// sigma_max^2), projection by sort-and-threshold; stops at a relative
// objective change of 1e-12 or 10^5 iterations. Rank-deficient systems still
// return a solution, flagged identifiable = false.
EstimationResult estimate_ls(const ModelMatrix &m, const CountsMap &counts);

// Counts over full tuples from uniformized records; throws
// ContractError when a record still carries a blank.
CountsMap counts_from_records(const Scenario &s, const std::vector<RoundRecord> &records);

} // namespace obsim
