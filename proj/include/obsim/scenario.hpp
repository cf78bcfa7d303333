#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "obsim/linalg.hpp"

namespace obsim {

// API misuse (partition/tuple mismatches, missing halt rule, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Comparison tolerances. `structural` gates scenario well-formedness
// (completeness, isometry, normalization); `arithmetic` gates value-level
// equalities downstream.
struct Tolerances {
    double structural = 1e-9;
    double arithmetic = 1e-12;
};

struct FactorSpace {
    std::string name;
    std::vector<std::string> basis_labels;

    std::size_t dim() const { return basis_labels.size(); }
};

struct Branch {
    std::string outcome;
    LinearMap op;
    // Canonical DSL text of the operator when one was recorded (built-ins and
    // parsed scenarios). Purely an emission cache: code that mutates `op`
    // must clear it.
    std::string expr;
};

struct MeasurementStep {
    std::string id;
    std::string observer;
    std::vector<Branch> branches;
    std::optional<LinearMap> merged;
    std::string merged_expr;
    // Factors spanned by the output space, as indices into Scenario::factors
    // (ascending). The input space is the previous step's row_factors (or the
    // scenario's initial_factors for the first step).
    std::vector<int> row_factors;

    bool mergeable() const { return merged.has_value(); }
    std::size_t rows() const { return branches.empty() ? 0 : branches.front().op.rows(); }
    std::size_t cols() const { return branches.empty() ? 0 : branches.front().op.cols(); }
};

struct Scenario {
    std::string name;
    std::vector<FactorSpace> factors;
    StateVector initial;
    std::string initial_expr; // emission cache, like Branch::expr
    std::vector<int> initial_factors;
    std::vector<MeasurementStep> steps;
    std::map<std::string, std::string> halt_target; // step id -> outcome label

    const MeasurementStep *find_step(const std::string &id) const;
    // Index into steps, or -1.
    int step_index(const std::string &id) const;
};

// The subset of steps executed as a single observer (their measurement is
// replaced by the merged isometry). Ids are stored sorted; the sorted
// comma-joined form is the canonical key ("" for the empty partition).
class Partition {
  public:
    Partition() = default;
    explicit Partition(std::vector<std::string> ids);

    const std::vector<std::string> &ids() const { return ids_; }
    bool contains(const std::string &id) const;
    bool empty() const { return ids_.empty(); }

    std::string key() const;     // "I,II", "" when empty
    std::string display() const; // "{I,II}", "{}" when empty

    bool operator<(const Partition &o) const { return ids_ < o.ids_; }
    bool operator==(const Partition &o) const { return ids_ == o.ids_; }

  private:
    std::vector<std::string> ids_;
};

// Probability weights over partitions. Weights listed may include zeros;
// consumers call normalized() after validation.
struct PartitionPrior {
    std::map<Partition, double> weights;

    double sum() const;
    PartitionPrior normalized() const;

    static PartitionPrior point_mass(Partition p);
    static PartitionPrior uniform(const std::vector<Partition> &ps);
};

struct Violation {
    std::string where;   // "step I", "initial", "factor coin", "halt", "prior"
    std::string message;
    double magnitude = 0.0; // measured defect size; 0 when not applicable
};

// Structural validation. Empty result iff the scenario is well-formed:
// unique factor names and labels, normalized initial state, chained operator
// shapes, per-step completeness sum(op† op) = I, merged isometry U†U = I,
// and a halt target that references only non-mergeable steps.
//
// Completeness/isometry defect magnitudes are reported as the probability
// mass error the defect causes on this scenario: the expectation of the
// deviation operator in the ensemble reached by running every earlier step
// non-selectively from the initial state. When that expectation is below the
// structural tolerance (the defect is invisible to the initial state) the
// largest |entry| of the deviation is reported instead.
std::vector<Violation> validate(const Scenario &s, const Tolerances &tol = {});

// Throws ContractError unless every id exists in s and is mergeable.
void require_valid_partition(const Scenario &s, const Partition &p);

// Simplex check (weights >= 0, sum within tol.structural of 1) plus, when a
// scenario is given, partition validity against it.
std::vector<Violation> validate_prior(const PartitionPrior &prior, const Tolerances &tol = {});
std::vector<Violation> validate_prior(const Scenario &s, const PartitionPrior &prior,
                                      const Tolerances &tol = {});

} // namespace obsim
