#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace obsim {

using Complex = std::complex<double>;

// Hard cap on dimensions produced by tensor products and parsed scenario
// files. Every built-in experiment lives in dim <= 4; the cap keeps a
// malformed scenario file from allocating unbounded state.
inline constexpr std::size_t kDefaultDimCap = std::size_t{1} << 20;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense complex column vector. `labels`, when non-empty, names the basis
// states and has the same length as `amps`.
struct StateVector {
    std::vector<Complex> amps;
    std::vector<std::string> labels;

    StateVector() = default;
    explicit StateVector(std::vector<Complex> a, std::vector<std::string> l = {});

    std::size_t dim() const { return amps.size(); }

    static StateVector basis(std::size_t dim, std::size_t index);
};

// Dense row-major complex matrix. Rectangular maps are first-class:
// measurement steps may raise dimension by attaching a new factor space.
class LinearMap {
  public:
    LinearMap() = default;
    LinearMap(std::size_t rows, std::size_t cols);
    LinearMap(std::size_t rows, std::size_t cols, std::vector<Complex> entries);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Complex &at(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    const Complex &at(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    const std::vector<Complex> &entries() const { return entries_; }

    static LinearMap identity(std::size_t n);
    static LinearMap zero(std::size_t rows, std::size_t cols);

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> entries_;
};

// Kronecker product; the left factor is the slow index:
// out[i*b.dim + j] = a[i] * b[j].
StateVector tensor(const StateVector &a, const StateVector &b, std::size_t dim_cap = kDefaultDimCap);

// Matrix-vector product. The result is not renormalized.
StateVector apply(const LinearMap &m, const StateVector &v);

// Conjugate transpose.
LinearMap adjoint(const LinearMap &m);

// Matrix product m2 * m1 (m1 acts first).
LinearMap compose(const LinearMap &m2, const LinearMap &m1);

// Kronecker product with the same slow-left convention as the vector tensor:
// out(i*b.rows + k, j*b.cols + l) = a(i,j) * b(k,l).
LinearMap tensor(const LinearMap &a, const LinearMap &b, std::size_t dim_cap = kDefaultDimCap);

// |ket><bra|; rows = ket.dim(), cols = bra.dim().
LinearMap outer(const StateVector &ket, const StateVector &bra);

// Squared 2-norm.
double norm2(const StateVector &v);

// Inner product, conjugate-linear in the first argument.
Complex inner(const StateVector &a, const StateVector &b);

// Largest |entry| of m - identity (m must be square) and of m itself.
double max_abs_deviation_from_identity(const LinearMap &m);
double max_abs_entry(const LinearMap &m);

bool all_finite(const StateVector &v);
bool all_finite(const LinearMap &m);

StateVector operator+(const StateVector &a, const StateVector &b);
StateVector operator-(const StateVector &a, const StateVector &b);
StateVector operator*(const Complex &c, const StateVector &v);
LinearMap operator+(const LinearMap &a, const LinearMap &b);
LinearMap operator-(const LinearMap &a, const LinearMap &b);
LinearMap operator*(const Complex &c, const LinearMap &m);

} // namespace obsim
