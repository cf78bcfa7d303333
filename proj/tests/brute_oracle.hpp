#pragma once

// Brute-force reference enumeration for the two built-in experiments,
// deliberately independent of the library: operators are hand-coded numeric
// grids on the full joint space, chains are raw loops over std::complex, and
// distributions come from nested loops over the outcome indices. Tests
// compare the engine against this, never the other way around.

#include <cmath>
#include <complex>
#include <vector>

namespace brute_oracle {

using C = std::complex<double>;
using Vec = std::vector<C>;
using Mat = std::vector<std::vector<C>>; // [row][col]

inline Vec matvec(const Mat &m, const Vec &v) {
    Vec out(m.size(), C{0.0, 0.0});
    for (std::size_t r = 0; r < m.size(); ++r) {
        for (std::size_t c = 0; c < v.size(); ++c) {
            out[r] += m[r][c] * v[c];
        }
    }
    return out;
}

inline double norm2(const Vec &v) {
    double acc = 0.0;
    for (const C &a : v) {
        acc += std::norm(a);
    }
    return acc;
}

// --- Four-step experiment. Joint basis index = coin*2 + spin with
// coin h=0,t=1 and spin down=0,up=1. Outcome index conventions match the
// built-in branch order: step III okbar=0,failbar=1; step IV ok=0,fail=1.

inline Vec frw_init() {
    return {C{1.0 / std::sqrt(3.0), 0.0}, C{std::sqrt(2.0 / 3.0), 0.0}};
}

inline Mat frw_step1(int x) { // 4x2
    const double r = 1.0 / std::sqrt(2.0);
    Mat m(4, std::vector<C>(2, C{0.0, 0.0}));
    if (x == 0) {
        m[0][0] = 1.0; // |h,down><h|
    } else {
        m[2][1] = r; // |t,down><t| / sqrt(2)
        m[3][1] = r; // |t,up><t|   / sqrt(2)
    }
    return m;
}

inline Mat frw_merged1() { // 4x2 isometry
    const double r = 1.0 / std::sqrt(2.0);
    Mat m(4, std::vector<C>(2, C{0.0, 0.0}));
    m[0][0] = 1.0;
    m[2][1] = r;
    m[3][1] = r;
    return m;
}

inline Mat frw_step2(int y) { // 4x4 spin projector
    Mat m(4, std::vector<C>(4, C{0.0, 0.0}));
    if (y == 0) {
        m[0][0] = 1.0;
        m[2][2] = 1.0;
    } else {
        m[1][1] = 1.0;
        m[3][3] = 1.0;
    }
    return m;
}

// Rotated coin projector tensored with spin identity.
inline Mat frw_step3(int z) {
    const double sgn = (z == 0) ? -1.0 : 1.0; // okbar = (h - t)/sqrt(2)
    Mat coin(2, std::vector<C>(2, C{0.0, 0.0}));
    coin[0][0] = 0.5;
    coin[0][1] = 0.5 * sgn;
    coin[1][0] = 0.5 * sgn;
    coin[1][1] = 0.5;
    Mat m(4, std::vector<C>(4, C{0.0, 0.0}));
    for (int c = 0; c < 2; ++c) {
        for (int c2 = 0; c2 < 2; ++c2) {
            for (int s = 0; s < 2; ++s) {
                m[static_cast<std::size_t>(c * 2 + s)][static_cast<std::size_t>(c2 * 2 + s)] =
                    coin[static_cast<std::size_t>(c)][static_cast<std::size_t>(c2)];
            }
        }
    }
    return m;
}

// Coin identity tensored with the rotated spin projector.
inline Mat frw_step4(int w) {
    const double sgn = (w == 0) ? -1.0 : 1.0; // ok = (down - up)/sqrt(2)
    Mat spin(2, std::vector<C>(2, C{0.0, 0.0}));
    spin[0][0] = 0.5;
    spin[0][1] = 0.5 * sgn;
    spin[1][0] = 0.5 * sgn;
    spin[1][1] = 0.5;
    Mat m(4, std::vector<C>(4, C{0.0, 0.0}));
    for (int c = 0; c < 2; ++c) {
        for (int s = 0; s < 2; ++s) {
            for (int s2 = 0; s2 < 2; ++s2) {
                m[static_cast<std::size_t>(c * 2 + s)][static_cast<std::size_t>(c * 2 + s2)] =
                    spin[static_cast<std::size_t>(s)][static_cast<std::size_t>(s2)];
            }
        }
    }
    return m;
}

// Norm form, blanks (merged coordinates) as -1.
inline double frw_probability(bool merge1, bool merge2, int x, int y, int z, int w) {
    Vec v = frw_init();
    v = merge1 ? matvec(frw_merged1(), v) : matvec(frw_step1(x), v);
    if (!merge2) {
        v = matvec(frw_step2(y), v); // merged step II is the identity
    }
    v = matvec(frw_step3(z), v);
    v = matvec(frw_step4(w), v);
    return norm2(v);
}

struct FrwEntry {
    int x, y, z, w; // -1 = blank
    double p;
};

inline std::vector<FrwEntry> frw_distribution(bool merge1, bool merge2) {
    std::vector<FrwEntry> out;
    for (int x = merge1 ? -1 : 0; x < (merge1 ? 0 : 2); ++x) {
        for (int y = merge2 ? -1 : 0; y < (merge2 ? 0 : 2); ++y) {
            for (int z = 0; z < 2; ++z) {
                for (int w = 0; w < 2; ++w) {
                    out.push_back({x, y, z, w, frw_probability(merge1, merge2, x, y, z, w)});
                }
            }
        }
    }
    return out;
}

// The contraction |<z|<w| A4 A3 A2 A1 |init>|^2 with <z|<w| the joint bra of
// the rotated basis vectors; defined for fully measured chains.
inline double frw_bra_form(int x, int y, int z, int w) {
    Vec v = frw_init();
    v = matvec(frw_step1(x), v);
    v = matvec(frw_step2(y), v);
    v = matvec(frw_step3(z), v);
    v = matvec(frw_step4(w), v);

    const double r = 1.0 / std::sqrt(2.0);
    const double zs = (z == 0) ? -1.0 : 1.0;
    const double ws = (w == 0) ? -1.0 : 1.0;
    const double coin_bra[2] = {r, zs * r};
    const double spin_bra[2] = {r, ws * r};
    C amp{0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        for (int s = 0; s < 2; ++s) {
            amp += coin_bra[c] * spin_bra[s] * v[static_cast<std::size_t>(c * 2 + s)];
        }
    }
    return std::norm(amp);
}

// --- Single-spin experiment. Basis index up=0, down=1. Outcome conventions:
// step M up=0,down=1; step W s=0,sperp=1.

inline Vec wigner_init() {
    const double r = 1.0 / std::sqrt(2.0);
    return {C{r, 0.0}, C{r, 0.0}};
}

inline Mat wigner_step_m(int m) {
    Mat out(2, std::vector<C>(2, C{0.0, 0.0}));
    out[static_cast<std::size_t>(m)][static_cast<std::size_t>(m)] = 1.0;
    return out;
}

inline Mat wigner_step_w(int w) {
    const double sgn = (w == 0) ? 1.0 : -1.0; // s = (up + down)/sqrt(2)
    Mat out(2, std::vector<C>(2, C{0.0, 0.0}));
    out[0][0] = 0.5;
    out[0][1] = 0.5 * sgn;
    out[1][0] = 0.5 * sgn;
    out[1][1] = 0.5;
    return out;
}

struct WignerEntry {
    int m, w; // m = -1 when merged
    double p;
};

inline std::vector<WignerEntry> wigner_distribution(bool merge_m) {
    std::vector<WignerEntry> out;
    for (int m = merge_m ? -1 : 0; m < (merge_m ? 0 : 2); ++m) {
        for (int w = 0; w < 2; ++w) {
            Vec v = wigner_init();
            if (!merge_m) {
                v = matvec(wigner_step_m(m), v); // merged M is the identity
            }
            v = matvec(wigner_step_w(w), v);
            out.push_back({m, w, norm2(v)});
        }
    }
    return out;
}

} // namespace brute_oracle
