#include "obsim/linalg.hpp"

#include <cmath>

namespace obsim {

StateVector::StateVector(std::vector<Complex> a, std::vector<std::string> l)
    : amps(std::move(a)), labels(std::move(l)) {
    if (!labels.empty() && labels.size() != amps.size()) {
        throw ShapeError("StateVector: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(amps.size()) + " amplitudes");
    }
}

StateVector StateVector::basis(std::size_t dim, std::size_t index) {
    if (index >= dim) {
        throw ShapeError("basis: index " + std::to_string(index) + " out of range for dim " +
                         std::to_string(dim));
    }
    StateVector v;
    v.amps.assign(dim, Complex{0.0, 0.0});
    v.amps[index] = Complex{1.0, 0.0};
    return v;
}

LinearMap::LinearMap(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, Complex{0.0, 0.0}) {}

LinearMap::LinearMap(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
        throw ShapeError("LinearMap: " + std::to_string(entries_.size()) + " entries for " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

LinearMap LinearMap::identity(std::size_t n) {
    LinearMap m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m.at(i, i) = Complex{1.0, 0.0};
    }
    return m;
}

LinearMap LinearMap::zero(std::size_t rows, std::size_t cols) {
    return LinearMap(rows, cols);
}

StateVector tensor(const StateVector &a, const StateVector &b, std::size_t dim_cap) {
    const std::size_t da = a.dim();
    const std::size_t db = b.dim();
    if (da == 0 || db == 0) {
        throw ShapeError("tensor: zero-dimensional operand");
    }
    if (da > dim_cap || db > dim_cap || da * db > dim_cap) {
        throw CapacityError("tensor: result dim " + std::to_string(da) + "*" +
                            std::to_string(db) + " exceeds cap " + std::to_string(dim_cap));
    }
    StateVector out;
    out.amps.resize(da * db);
    for (std::size_t i = 0; i < da; ++i) {
        for (std::size_t j = 0; j < db; ++j) {
            out.amps[i * db + j] = a.amps[i] * b.amps[j];
        }
    }
    if (!a.labels.empty() && !b.labels.empty()) {
        out.labels.resize(da * db);
        for (std::size_t i = 0; i < da; ++i) {
            for (std::size_t j = 0; j < db; ++j) {
                out.labels[i * db + j] = a.labels[i] + "," + b.labels[j];
            }
        }
    }
    return out;
}

StateVector apply(const LinearMap &m, const StateVector &v) {
    if (m.cols() != v.dim()) {
        throw ShapeError("apply: map is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " but vector dim is " +
                         std::to_string(v.dim()));
    }
    StateVector out;
    out.amps.assign(m.rows(), Complex{0.0, 0.0});
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Complex acc{0.0, 0.0};
        for (std::size_t c = 0; c < m.cols(); ++c) {
            acc += m.at(r, c) * v.amps[c];
        }
        out.amps[r] = acc;
    }
    return out;
}

LinearMap adjoint(const LinearMap &m) {
    LinearMap out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out.at(c, r) = std::conj(m.at(r, c));
        }
    }
    return out;
}

LinearMap compose(const LinearMap &m2, const LinearMap &m1) {
    if (m2.cols() != m1.rows()) {
        throw ShapeError("compose: " + std::to_string(m2.rows()) + "x" + std::to_string(m2.cols()) +
                         " cannot follow " + std::to_string(m1.rows()) + "x" +
                         std::to_string(m1.cols()));
    }
    LinearMap out(m2.rows(), m1.cols());
    for (std::size_t r = 0; r < m2.rows(); ++r) {
        for (std::size_t k = 0; k < m2.cols(); ++k) {
            const Complex a = m2.at(r, k);
            if (a == Complex{0.0, 0.0}) {
                continue;
            }
            for (std::size_t c = 0; c < m1.cols(); ++c) {
                out.at(r, c) += a * m1.at(k, c);
            }
        }
    }
    return out;
}

LinearMap tensor(const LinearMap &a, const LinearMap &b, std::size_t dim_cap) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    if (a.rows() == 0 || b.rows() == 0 || a.cols() == 0 || b.cols() == 0) {
        throw ShapeError("tensor: zero-dimensional operand");
    }
    if (rows > dim_cap || cols > dim_cap) {
        throw CapacityError("tensor: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " exceeds cap " + std::to_string(dim_cap));
    }
    LinearMap out(rows, cols);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const Complex aij = a.at(i, j);
            if (aij == Complex{0.0, 0.0}) {
                continue;
            }
            for (std::size_t k = 0; k < b.rows(); ++k) {
                for (std::size_t l = 0; l < b.cols(); ++l) {
                    out.at(i * b.rows() + k, j * b.cols() + l) = aij * b.at(k, l);
                }
            }
        }
    }
    return out;
}

LinearMap outer(const StateVector &ket, const StateVector &bra) {
    LinearMap out(ket.dim(), bra.dim());
    for (std::size_t r = 0; r < ket.dim(); ++r) {
        for (std::size_t c = 0; c < bra.dim(); ++c) {
            out.at(r, c) = ket.amps[r] * std::conj(bra.amps[c]);
        }
    }
    return out;
}

double norm2(const StateVector &v) {
    double acc = 0.0;
    for (const Complex &a : v.amps) {
        acc += std::norm(a);
    }
    return acc;
}

Complex inner(const StateVector &a, const StateVector &b) {
    if (a.dim() != b.dim()) {
        throw ShapeError("inner: dims " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
    }
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) {
        acc += std::conj(a.amps[i]) * b.amps[i];
    }
    return acc;
}

double max_abs_deviation_from_identity(const LinearMap &m) {
    if (m.rows() != m.cols()) {
        throw ShapeError("deviation from identity: map is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
    }
    double worst = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const Complex want = (r == c) ? Complex{1.0, 0.0} : Complex{0.0, 0.0};
            worst = std::max(worst, std::abs(m.at(r, c) - want));
        }
    }
    return worst;
}

double max_abs_entry(const LinearMap &m) {
    double worst = 0.0;
    for (const Complex &e : m.entries()) {
        worst = std::max(worst, std::abs(e));
    }
    return worst;
}

bool all_finite(const StateVector &v) {
    for (const Complex &a : v.amps) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
            return false;
        }
    }
    return true;
}

bool all_finite(const LinearMap &m) {
    for (const Complex &e : m.entries()) {
        if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) {
            return false;
        }
    }
    return true;
}

StateVector operator+(const StateVector &a, const StateVector &b) {
    if (a.dim() != b.dim()) {
        throw ShapeError("vector add: dims " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
    }
    StateVector out = a;
    out.labels.clear();
    for (std::size_t i = 0; i < b.dim(); ++i) {
        out.amps[i] += b.amps[i];
    }
    return out;
}

StateVector operator-(const StateVector &a, const StateVector &b) {
    return a + (Complex{-1.0, 0.0} * b);
}

StateVector operator*(const Complex &c, const StateVector &v) {
    StateVector out = v;
    for (Complex &a : out.amps) {
        a *= c;
    }
    return out;
}

LinearMap operator+(const LinearMap &a, const LinearMap &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("matrix add: shapes differ");
    }
    LinearMap out = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out.at(r, c) += b.at(r, c);
        }
    }
    return out;
}

LinearMap operator-(const LinearMap &a, const LinearMap &b) {
    return a + (Complex{-1.0, 0.0} * b);
}

LinearMap operator*(const Complex &c, const LinearMap &m) {
    LinearMap out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t col = 0; col < m.cols(); ++col) {
            out.at(r, col) *= c;
        }
    }
    return out;
}

} // namespace obsim
