#pragma once

// Shared helpers for the test suites: deterministic random generators (built
// on StreamRng so expected statistics are reproducible on every platform),
// random valid scenarios for round-trip checks, and scenario comparison.

#include <cmath>
#include <string>
#include <vector>

#include "obsim/builtins.hpp"
#include "obsim/engine.hpp"
#include "obsim/sampler.hpp"
#include "obsim/scenario.hpp"

namespace test_support {

using obsim::Complex;
using obsim::LinearMap;
using obsim::Scenario;
using obsim::StateVector;
using obsim::StreamRng;

inline double gauss(StreamRng &rng) {
    // Box-Muller; guards the log against a zero draw.
    double u1 = rng.next_unit();
    if (u1 <= 0.0) {
        u1 = 0.5;
    }
    const double u2 = rng.next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

inline Complex random_complex(StreamRng &rng) {
    return Complex{gauss(rng), gauss(rng)};
}

inline StateVector random_state(StreamRng &rng, std::size_t dim) {
    StateVector v;
    v.amps.resize(dim);
    for (Complex &a : v.amps) {
        a = random_complex(rng);
    }
    const double n = std::sqrt(obsim::norm2(v));
    for (Complex &a : v.amps) {
        a /= n;
    }
    return v;
}

// Gram-Schmidt on a random complex Gaussian matrix.
inline LinearMap random_unitary(StreamRng &rng, std::size_t n) {
    std::vector<StateVector> cols(n);
    for (std::size_t c = 0; c < n; ++c) {
        StateVector v = random_state(rng, n);
        for (std::size_t prev = 0; prev < c; ++prev) {
            const Complex overlap = obsim::inner(cols[prev], v);
            v = v - overlap * cols[prev];
        }
        const double norm = std::sqrt(obsim::norm2(v));
        v = Complex{1.0 / norm, 0.0} * v;
        cols[c] = v;
    }
    LinearMap u(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < n; ++r) {
            u.at(r, c) = cols[c].amps[r];
        }
    }
    return u;
}

// First `cols` columns of a random unitary: V with adjoint(V) V = identity.
inline LinearMap random_isometry(StreamRng &rng, std::size_t rows, std::size_t cols) {
    const LinearMap u = random_unitary(rng, rows);
    LinearMap v(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            v.at(r, c) = u.at(r, c);
        }
    }
    return v;
}

inline int random_int(StreamRng &rng, int lo, int hi) { // inclusive
    const double u = rng.next_unit();
    int v = lo + static_cast<int>(u * static_cast<double>(hi - lo + 1));
    if (v > hi) {
        v = hi;
    }
    return v;
}

// A structurally valid random scenario: 1-3 factors of dimension 2-3, a
// random normalized initial state over a prefix of the factors, 1-4 steps
// built from projector slices of random unitaries/isometries (so every
// branch set is complete by construction), some steps mergeable, sometimes a
// halt rule. No recorded expressions: emission exercises the decimal path.
inline Scenario random_scenario(StreamRng &rng, int tag) {
    Scenario s;
    s.name = "rand" + std::to_string(tag);

    const int n_factors = random_int(rng, 1, 3);
    for (int f = 0; f < n_factors; ++f) {
        obsim::FactorSpace fs;
        fs.name = "f" + std::to_string(f);
        const int dim = random_int(rng, 2, 3);
        for (int d = 0; d < dim; ++d) {
            fs.basis_labels.push_back("x" + std::to_string(f) + std::to_string(d));
        }
        s.factors.push_back(std::move(fs));
    }

    const int n_init_factors = random_int(rng, 1, n_factors);
    std::size_t dim = 1;
    for (int f = 0; f < n_init_factors; ++f) {
        s.initial_factors.push_back(f);
        dim *= s.factors[static_cast<std::size_t>(f)].dim();
    }
    s.initial = random_state(rng, dim);

    std::vector<int> space = s.initial_factors;
    const int n_steps = random_int(rng, 1, 4);
    for (int k = 0; k < n_steps; ++k) {
        obsim::MeasurementStep st;
        st.id = "S" + std::to_string(k);
        st.observer = "obs" + std::to_string(k);

        const bool can_raise = space.size() < s.factors.size();
        const bool raise = can_raise && rng.next_unit() < 0.5;
        std::size_t rows = dim;
        LinearMap base;
        if (raise) {
            const int new_factor = static_cast<int>(space.size()); // next unused, keeps order
            space.push_back(new_factor);
            rows = dim * s.factors[static_cast<std::size_t>(new_factor)].dim();
            base = random_isometry(rng, rows, dim);
        } else {
            base = random_unitary(rng, rows);
        }
        st.row_factors = space;

        const int n_branches = random_int(rng, 2, std::min<int>(3, static_cast<int>(rows)));
        // Partition the output basis into branch groups, round-robin so none
        // is empty, then apply op_b = P_b * base.
        for (int b = 0; b < n_branches; ++b) {
            LinearMap op(rows, dim);
            for (std::size_t r = b; r < rows; r += static_cast<std::size_t>(n_branches)) {
                for (std::size_t c = 0; c < dim; ++c) {
                    op.at(r, c) = base.at(r, c);
                }
            }
            st.branches.push_back({"o" + std::to_string(b), std::move(op), ""});
        }
        if (rng.next_unit() < 0.5) {
            st.merged = base;
        }
        dim = rows;
        s.steps.push_back(std::move(st));
    }

    if (rng.next_unit() < 0.4) {
        std::vector<std::size_t> fixed;
        for (std::size_t k = 0; k < s.steps.size(); ++k) {
            if (!s.steps[k].mergeable()) {
                fixed.push_back(k);
            }
        }
        if (!fixed.empty()) {
            const std::size_t k =
                fixed[static_cast<std::size_t>(random_int(rng, 0, static_cast<int>(fixed.size()) - 1))];
            const obsim::MeasurementStep &st = s.steps[k];
            const int b = random_int(rng, 0, static_cast<int>(st.branches.size()) - 1);
            s.halt_target[st.id] = st.branches[static_cast<std::size_t>(b)].outcome;
        }
    }
    return s;
}

inline double max_entry_diff(const LinearMap &a, const LinearMap &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return 1e300;
    }
    double worst = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            worst = std::max(worst, std::abs(a.at(r, c) - b.at(r, c)));
        }
    }
    return worst;
}

inline double max_amp_diff(const StateVector &a, const StateVector &b) {
    if (a.dim() != b.dim()) {
        return 1e300;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        worst = std::max(worst, std::abs(a.amps[i] - b.amps[i]));
    }
    return worst;
}

// Largest entrywise difference across every numeric field of two scenarios;
// 1e300 on any structural mismatch.
inline double scenario_diff(const Scenario &a, const Scenario &b) {
    if (a.name != b.name || a.factors.size() != b.factors.size() ||
        a.steps.size() != b.steps.size() || a.halt_target != b.halt_target ||
        a.initial_factors != b.initial_factors) {
        return 1e300;
    }
    for (std::size_t f = 0; f < a.factors.size(); ++f) {
        if (a.factors[f].name != b.factors[f].name ||
            a.factors[f].basis_labels != b.factors[f].basis_labels) {
            return 1e300;
        }
    }
    double worst = max_amp_diff(a.initial, b.initial);
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        const obsim::MeasurementStep &sa = a.steps[k];
        const obsim::MeasurementStep &sb = b.steps[k];
        if (sa.id != sb.id || sa.observer != sb.observer ||
            sa.branches.size() != sb.branches.size() || sa.mergeable() != sb.mergeable() ||
            sa.row_factors != sb.row_factors) {
            return 1e300;
        }
        for (std::size_t j = 0; j < sa.branches.size(); ++j) {
            if (sa.branches[j].outcome != sb.branches[j].outcome) {
                return 1e300;
            }
            worst = std::max(worst, max_entry_diff(sa.branches[j].op, sb.branches[j].op));
        }
        if (sa.mergeable()) {
            worst = std::max(worst, max_entry_diff(*sa.merged, *sb.merged));
        }
    }
    return worst;
}

// Two-step scenario-free fixtures for halting behavior.
inline Scenario certain_halt_scenario() {
    Scenario s;
    s.name = "certain";
    s.factors = {{"b", {"x", "y"}}};
    s.initial_factors = {0};
    s.initial = StateVector::basis(2, 0);
    s.initial.labels = {"x", "y"};
    obsim::MeasurementStep st;
    st.id = "S";
    st.observer = "o";
    st.row_factors = {0};
    st.branches.push_back({"x", obsim::outer(StateVector::basis(2, 0), StateVector::basis(2, 0)), ""});
    st.branches.push_back({"y", obsim::outer(StateVector::basis(2, 1), StateVector::basis(2, 1)), ""});
    s.steps.push_back(std::move(st));
    s.halt_target = {{"S", "x"}};
    return s;
}

inline Scenario impossible_halt_scenario() {
    Scenario s = certain_halt_scenario();
    s.name = "impossible";
    s.halt_target = {{"S", "y"}}; // the initial state is |x>, so P(y) = 0
    return s;
}

} // namespace test_support
