#include "obsim/inference.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "obsim/format.hpp"

namespace obsim {

namespace {

std::string label_string(const std::vector<std::string> &labels) {
    std::string out = "(";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += labels[i];
    }
    return out + ")";
}

// Euclidean projection onto the probability simplex (sort-and-threshold).
void project_simplex(std::vector<double> &x) {
    std::vector<double> u = x;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cum = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double candidate = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) {
            tau = candidate;
        }
    }
    for (double &v : x) {
        v = std::max(v - tau, 0.0);
    }
}

std::vector<double> dense_counts(const ModelMatrix &m, const CountsMap &counts) {
    std::vector<double> c(m.rows(), 0.0);
    double total = 0.0;
    for (const auto &[t, n] : counts) {
        if (n < 0) {
            throw ContractError("negative count");
        }
        c[m.row_of(t)] += static_cast<double>(n);
        total += static_cast<double>(n);
    }
    if (!(total >= 1.0)) {
        throw ContractError("counts are empty");
    }
    return c;
}

// Tuples that were observed but have zero probability under every component
// can never be explained; fail up front with the offending tuple.
void check_support(const ModelMatrix &m, const std::vector<double> &c) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (c[r] <= 0.0) {
            continue;
        }
        double best = 0.0;
        for (std::size_t o = 0; o < m.cols(); ++o) {
            best = std::max(best, m.at(r, o));
        }
        if (best <= 0.0) {
            throw DataModelMismatch("tuple " + label_string(m.row_labels[r]) + " has " +
                                    format_double(c[r]) +
                                    " observations but zero probability under every partition");
        }
    }
}

PartitionPrior weights_to_prior(const ModelMatrix &m, const std::vector<double> &p) {
    PartitionPrior prior;
    for (std::size_t o = 0; o < m.cols(); ++o) {
        prior.weights[m.partitions[o]] += p[o];
    }
    return prior;
}

double log_likelihood(const ModelMatrix &m, const std::vector<double> &c,
                      const std::vector<double> &p) {
    double ll = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (c[r] <= 0.0) {
            continue;
        }
        double mix = 0.0;
        for (std::size_t o = 0; o < m.cols(); ++o) {
            mix += p[o] * m.at(r, o);
        }
        ll += c[r] * std::log(std::max(mix, 1e-300));
    }
    return ll;
}

} // namespace

std::size_t ModelMatrix::row_of(const OutcomeTuple &t) const {
    if (row_tuples.empty() || t.outcome.size() != row_tuples.front().outcome.size()) {
        throw ContractError("tuple arity does not match the model matrix");
    }
    // Rows are in odometer order; recover the flat index from the digits.
    std::size_t idx = 0;
    std::size_t stride = 1;
    // Radix per step = max outcome index + 1, derived from the last row.
    const OutcomeTuple &last = row_tuples.back();
    for (std::size_t k = t.outcome.size(); k-- > 0;) {
        const int digit = t.outcome[k];
        const int radix = last.outcome[k] + 1;
        if (digit < 0 || digit >= radix) {
            throw ContractError("tuple has a blank or out-of-range outcome at position " +
                                std::to_string(k));
        }
        idx += static_cast<std::size_t>(digit) * stride;
        stride *= static_cast<std::size_t>(radix);
    }
    return idx;
}

ModelMatrix build_model_matrix(const Scenario &s, const std::vector<Partition> &partitions) {
    if (partitions.empty()) {
        throw ContractError("model matrix needs at least one partition");
    }
    ModelMatrix m;
    m.partitions = partitions;

    // Fixed support: the mixture's full-tuple enumeration under any single
    // partition's point mass covers all tuples, so borrow the first one.
    const OutcomeDistribution full =
        mixture_distribution(s, PartitionPrior::point_mass(partitions.front()));
    m.row_tuples.reserve(full.entries.size());
    for (const auto &[t, p] : full.entries) {
        m.row_tuples.push_back(t);
        m.row_labels.push_back(tuple_labels(s, t));
    }

    m.entries.assign(m.rows() * m.cols(), 0.0);
    for (std::size_t o = 0; o < partitions.size(); ++o) {
        const OutcomeDistribution comp =
            mixture_distribution(s, PartitionPrior::point_mass(partitions[o]));
        for (std::size_t r = 0; r < m.rows(); ++r) {
            m.entries[r * m.cols() + o] = comp.entries[r].second;
        }
    }

    Eigen::MatrixXd mat(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    const auto &sv = svd.singularValues();
    m.sigma_max = sv.size() > 0 ? sv(0) : 0.0;
    m.rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) >= 1e-10 * m.sigma_max) {
            ++m.rank;
        }
    }
    return m;
}

double em_step(const ModelMatrix &m, const std::vector<double> &counts, std::vector<double> &p) {
    const std::size_t n_cols = m.cols();
    std::vector<double> next(n_cols, 0.0);
    double total = 0.0;
    double ll = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double c = counts[r];
        if (c <= 0.0) {
            continue;
        }
        double mix = 0.0;
        for (std::size_t o = 0; o < n_cols; ++o) {
            mix += p[o] * m.at(r, o);
        }
        ll += c * std::log(std::max(mix, 1e-300));
        if (mix <= 0.0) {
            continue;
        }
        for (std::size_t o = 0; o < n_cols; ++o) {
            next[o] += c * p[o] * m.at(r, o) / mix;
        }
        total += c;
    }
    for (std::size_t o = 0; o < n_cols; ++o) {
        p[o] = next[o] / total;
    }
    return ll;
}

EstimationResult estimate_em(const ModelMatrix &m, const CountsMap &counts, double tol,
                             std::int64_t max_iter) {
    const std::vector<double> c = dense_counts(m, counts);
    check_support(m, c);

    std::vector<double> p(m.cols(), 1.0 / static_cast<double>(m.cols()));
    EstimationResult res;
    res.identifiable = m.identifiable();

    for (std::int64_t it = 0; it < max_iter; ++it) {
        const std::vector<double> prev = p;
        em_step(m, c, p);
        res.iterations = it + 1;
        res.ll_trajectory.push_back(log_likelihood(m, c, p));
        double delta = 0.0;
        for (std::size_t o = 0; o < p.size(); ++o) {
            delta = std::max(delta, std::abs(p[o] - prev[o]));
        }
        if (delta <= tol) {
            res.converged = true;
            break;
        }
    }
    res.log_likelihood = log_likelihood(m, c, p);
    res.p_hat = weights_to_prior(m, p);
    return res;
}

EstimationResult estimate_ls(const ModelMatrix &m, const CountsMap &counts) {
    const std::vector<double> c = dense_counts(m, counts);
    double total = 0.0;
    for (double v : c) {
        total += v;
    }
    std::vector<double> f(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        f[r] = c[r] / total;
    }

    std::vector<double> p(m.cols(), 1.0 / static_cast<double>(m.cols()));
    const double step = 1.0 / (m.sigma_max * m.sigma_max);

    const auto objective = [&](const std::vector<double> &x) {
        double acc = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double resid = -f[r];
            for (std::size_t o = 0; o < m.cols(); ++o) {
                resid += m.at(r, o) * x[o];
            }
            acc += resid * resid;
        }
        return acc;
    };

    EstimationResult res;
    res.identifiable = m.identifiable();
    double prev_obj = objective(p);
    const std::int64_t max_iter = 100000;
    for (std::int64_t it = 0; it < max_iter; ++it) {
        // Half-gradient m^T (m p - f) with step 1/sigma_max^2 keeps the
        // effective step within the descent bound 1/(2 sigma_max^2).
        std::vector<double> resid(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            resid[r] = -f[r];
            for (std::size_t o = 0; o < m.cols(); ++o) {
                resid[r] += m.at(r, o) * p[o];
            }
        }
        for (std::size_t o = 0; o < m.cols(); ++o) {
            double g = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r) {
                g += m.at(r, o) * resid[r];
            }
            p[o] -= step * g;
        }
        project_simplex(p);
        res.iterations = it + 1;
        const double obj = objective(p);
        // Relative change: consistent systems polish down to the exact
        // floating-point fixed point instead of stalling at sqrt(1e-12)
        // parameter error.
        if (std::abs(prev_obj - obj) <= 1e-12 * std::max(obj, 1e-300)) {
            res.converged = true;
            break;
        }
        prev_obj = obj;
    }
    res.log_likelihood = log_likelihood(m, c, p);
    res.p_hat = weights_to_prior(m, p);
    return res;
}

CountsMap counts_from_records(const Scenario &s, const std::vector<RoundRecord> &records) {
    CountsMap counts;
    for (const RoundRecord &r : records) {
        for (std::size_t k = 0; k < r.outcomes.outcome.size(); ++k) {
            if (r.outcomes.outcome[k] == OutcomeTuple::kBlank) {
                throw ContractError("round " + std::to_string(r.round_index) +
                                    " still has a blank outcome on step " + s.steps[k].id +
                                    "; uniformize first");
            }
        }
        ++counts[r.outcomes];
    }
    return counts;
}

} // namespace obsim
