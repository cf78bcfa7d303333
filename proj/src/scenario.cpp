#include "obsim/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "obsim/format.hpp"

namespace obsim {

namespace {

// Square density-like matrix as a LinearMap; used only for the defect
// magnitude computation inside validate().
LinearMap outer_self(const StateVector &v) {
    return outer(v, v);
}

// rho -> sum_b op_b rho op_b† (non-selective application of a step).
LinearMap propagate(const LinearMap &rho, const std::vector<Branch> &branches) {
    const std::size_t rows = branches.front().op.rows();
    LinearMap out(rows, rows);
    for (const Branch &b : branches) {
        out = out + compose(compose(b.op, rho), adjoint(b.op));
    }
    return out;
}

// Re(tr(rho * dev)).
double expectation(const LinearMap &rho, const LinearMap &dev) {
    Complex acc{0.0, 0.0};
    for (std::size_t r = 0; r < rho.rows(); ++r) {
        for (std::size_t c = 0; c < rho.cols(); ++c) {
            acc += rho.at(r, c) * dev.at(c, r);
        }
    }
    return acc.real();
}

double factor_product_dim(const std::vector<FactorSpace> &factors, const std::vector<int> &idx) {
    double prod = 1.0;
    for (int i : idx) {
        prod *= static_cast<double>(factors[static_cast<std::size_t>(i)].dim());
    }
    return prod;
}

bool ascending_valid(const std::vector<int> &idx, std::size_t n_factors) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= static_cast<int>(n_factors)) {
            return false;
        }
        if (k > 0 && idx[k] <= idx[k - 1]) {
            return false;
        }
    }
    return true;
}

} // namespace

const MeasurementStep *Scenario::find_step(const std::string &id) const {
    for (const MeasurementStep &st : steps) {
        if (st.id == id) {
            return &st;
        }
    }
    return nullptr;
}

int Scenario::step_index(const std::string &id) const {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].id == id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

Partition::Partition(std::vector<std::string> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool Partition::contains(const std::string &id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::string Partition::key() const {
    std::string out;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += ids_[i];
    }
    return out;
}

std::string Partition::display() const {
    return "{" + key() + "}";
}

double PartitionPrior::sum() const {
    double acc = 0.0;
    for (const auto &[p, w] : weights) {
        acc += w;
    }
    return acc;
}

PartitionPrior PartitionPrior::normalized() const {
    const double s = sum();
    if (!(s > 0.0)) {
        throw ContractError("prior: cannot normalize, total weight " + format_double(s));
    }
    PartitionPrior out;
    for (const auto &[p, w] : weights) {
        out.weights[p] = w / s;
    }
    return out;
}

PartitionPrior PartitionPrior::point_mass(Partition p) {
    PartitionPrior out;
    out.weights[std::move(p)] = 1.0;
    return out;
}

PartitionPrior PartitionPrior::uniform(const std::vector<Partition> &ps) {
    if (ps.empty()) {
        throw ContractError("prior: uniform over empty partition list");
    }
    PartitionPrior out;
    for (const Partition &p : ps) {
        out.weights[p] = 0.0;
    }
    const double w = 1.0 / static_cast<double>(out.weights.size());
    for (auto &[p, weight] : out.weights) {
        weight = w;
    }
    return out;
}

std::vector<Violation> validate(const Scenario &s, const Tolerances &tol) {
    std::vector<Violation> out;

    // Factor structure.
    std::set<std::string> factor_names;
    for (const FactorSpace &f : s.factors) {
        if (!factor_names.insert(f.name).second) {
            out.push_back({"factor " + f.name, "duplicate factor name", 0.0});
        }
        if (f.dim() < 2) {
            out.push_back({"factor " + f.name,
                           "needs at least 2 basis labels, has " + std::to_string(f.dim()), 0.0});
        }
        std::set<std::string> labels;
        for (const std::string &l : f.basis_labels) {
            if (!labels.insert(l).second) {
                out.push_back({"factor " + f.name, "duplicate basis label '" + l + "'", 0.0});
            }
        }
    }

    // Factor schedule bookkeeping.
    bool schedule_ok = ascending_valid(s.initial_factors, s.factors.size());
    if (!schedule_ok) {
        out.push_back({"initial", "initial_factors is not an ascending list of factor indices", 0.0});
    } else if (factor_product_dim(s.factors, s.initial_factors) !=
               static_cast<double>(s.initial.dim())) {
        schedule_ok = false;
        out.push_back({"initial", "initial dim " + std::to_string(s.initial.dim()) +
                                      " does not match its declared factors", 0.0});
    }

    // Initial state.
    if (s.initial.dim() == 0) {
        out.push_back({"initial", "empty initial state", 0.0});
    } else {
        if (!all_finite(s.initial)) {
            out.push_back({"initial", "non-finite amplitude", 0.0});
        } else {
            const double defect = std::abs(std::sqrt(norm2(s.initial)) - 1.0);
            if (defect > tol.structural) {
                out.push_back({"initial", "not normalized, |norm - 1| = " + format_double(defect),
                               defect});
            }
        }
    }

    // Step structure, shape chaining, completeness, isometries.
    std::set<std::string> step_ids;
    std::size_t expect_cols = s.initial.dim();
    std::vector<int> prev_factors = s.initial_factors;
    bool chain_ok = true;

    // Ensemble state reached by running earlier steps non-selectively; used
    // only to weight defect magnitudes.
    LinearMap rho = s.initial.dim() > 0 ? outer_self(s.initial) : LinearMap();
    bool rho_ok = s.initial.dim() > 0 && all_finite(s.initial);

    for (const MeasurementStep &st : s.steps) {
        const std::string where = "step " + st.id;
        if (!step_ids.insert(st.id).second) {
            out.push_back({where, "duplicate step id", 0.0});
        }
        if (st.branches.size() < 2) {
            out.push_back({where, "needs at least 2 branches, has " +
                                      std::to_string(st.branches.size()), 0.0});
            if (st.branches.empty()) {
                chain_ok = false;
                rho_ok = false;
                continue;
            }
            // A single remaining branch still gets its completeness defect
            // measured below.
        }

        std::set<std::string> outcomes;
        bool shapes_ok = true;
        const std::size_t rows = st.branches.front().op.rows();
        const std::size_t cols = st.branches.front().op.cols();
        for (const Branch &b : st.branches) {
            if (!outcomes.insert(b.outcome).second) {
                out.push_back({where, "duplicate outcome label '" + b.outcome + "'", 0.0});
            }
            if (!all_finite(b.op)) {
                out.push_back({where, "branch '" + b.outcome + "' has a non-finite entry", 0.0});
                shapes_ok = false;
            }
            if (b.op.rows() != rows || b.op.cols() != cols) {
                out.push_back({where, "branch '" + b.outcome + "' is " +
                                          std::to_string(b.op.rows()) + "x" +
                                          std::to_string(b.op.cols()) + ", expected " +
                                          std::to_string(rows) + "x" + std::to_string(cols),
                               0.0});
                shapes_ok = false;
            }
        }

        if (chain_ok && cols != expect_cols) {
            out.push_back({where, "operator cols " + std::to_string(cols) +
                                      " do not match incoming dim " + std::to_string(expect_cols),
                           0.0});
            rho_ok = false;
        }

        if (schedule_ok) {
            if (!ascending_valid(st.row_factors, s.factors.size())) {
                out.push_back({where, "row_factors is not an ascending list of factor indices", 0.0});
                schedule_ok = false;
            } else if (!std::includes(st.row_factors.begin(), st.row_factors.end(),
                                      prev_factors.begin(), prev_factors.end())) {
                out.push_back({where, "row factors do not contain the incoming factors", 0.0});
                schedule_ok = false;
            } else if (factor_product_dim(s.factors, st.row_factors) !=
                       static_cast<double>(rows)) {
                out.push_back({where, "operator rows " + std::to_string(rows) +
                                          " do not match the declared row factors", 0.0});
                schedule_ok = false;
            } else {
                prev_factors = st.row_factors;
            }
        }

        if (shapes_ok) {
            // Completeness: sum op† op = identity on the input space.
            LinearMap sum = LinearMap::zero(cols, cols);
            for (const Branch &b : st.branches) {
                sum = sum + compose(adjoint(b.op), b.op);
            }
            const double op_defect = max_abs_deviation_from_identity(sum);
            if (op_defect > tol.structural) {
                double magnitude = op_defect;
                if (rho_ok && rho.rows() == cols) {
                    const double mass = std::abs(expectation(rho, sum - LinearMap::identity(cols)));
                    if (mass > tol.structural) {
                        magnitude = mass;
                    }
                }
                out.push_back({where, "completeness defect " + format_double(magnitude) +
                                          " (max entry deviation " + format_double(op_defect) + ")",
                               magnitude});
            }

            if (st.merged) {
                if (st.merged->rows() != rows || st.merged->cols() != cols) {
                    out.push_back({where, "merged map is " + std::to_string(st.merged->rows()) +
                                              "x" + std::to_string(st.merged->cols()) +
                                              ", expected " + std::to_string(rows) + "x" +
                                              std::to_string(cols),
                                   0.0});
                } else if (!all_finite(*st.merged)) {
                    out.push_back({where, "merged map has a non-finite entry", 0.0});
                } else {
                    const LinearMap gram = compose(adjoint(*st.merged), *st.merged);
                    const double op_dev = max_abs_deviation_from_identity(gram);
                    if (op_dev > tol.structural) {
                        double magnitude = op_dev;
                        if (rho_ok && rho.rows() == cols) {
                            const double mass =
                                std::abs(expectation(rho, gram - LinearMap::identity(cols)));
                            if (mass > tol.structural) {
                                magnitude = mass;
                            }
                        }
                        out.push_back({where, "merged map is not an isometry, defect " +
                                                  format_double(magnitude) +
                                                  " (max entry deviation " + format_double(op_dev) +
                                                  ")",
                                       magnitude});
                    }
                }
            }

            if (rho_ok && rho.rows() == cols) {
                rho = propagate(rho, st.branches);
            } else {
                rho_ok = false;
            }
            expect_cols = rows;
        } else {
            chain_ok = false;
            rho_ok = false;
        }
    }

    // Halt target.
    for (const auto &[id, outcome] : s.halt_target) {
        const MeasurementStep *st = s.find_step(id);
        if (st == nullptr) {
            out.push_back({"halt", "references unknown step '" + id + "'", 0.0});
            continue;
        }
        if (st->mergeable()) {
            out.push_back({"halt", "references mergeable step '" + id + "'", 0.0});
        }
        bool found = false;
        for (const Branch &b : st->branches) {
            found = found || b.outcome == outcome;
        }
        if (!found) {
            out.push_back({"halt", "step '" + id + "' has no outcome '" + outcome + "'", 0.0});
        }
    }

    return out;
}

void require_valid_partition(const Scenario &s, const Partition &p) {
    for (const std::string &id : p.ids()) {
        const MeasurementStep *st = s.find_step(id);
        if (st == nullptr) {
            throw ContractError("partition " + p.display() + ": unknown step '" + id + "'");
        }
        if (!st->mergeable()) {
            throw ContractError("partition " + p.display() + ": step '" + id +
                                "' is not mergeable");
        }
    }
}

std::vector<Violation> validate_prior(const PartitionPrior &prior, const Tolerances &tol) {
    std::vector<Violation> out;
    if (prior.weights.empty()) {
        out.push_back({"prior", "no partitions listed", 0.0});
        return out;
    }
    for (const auto &[p, w] : prior.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            out.push_back({"prior", "weight of " + p.display() + " is " + format_double(w),
                           std::abs(w)});
        }
    }
    const double total = prior.sum();
    const double defect = std::abs(total - 1.0);
    if (!(defect <= tol.structural)) {
        out.push_back({"prior", "weights sum to " + format_double(total), defect});
    }
    return out;
}

std::vector<Violation> validate_prior(const Scenario &s, const PartitionPrior &prior,
                                      const Tolerances &tol) {
    std::vector<Violation> out = validate_prior(prior, tol);
    for (const auto &[p, w] : prior.weights) {
        try {
            require_valid_partition(s, p);
        } catch (const ContractError &e) {
            out.push_back({"prior", e.what(), 0.0});
        }
    }
    return out;
}

} // namespace obsim
