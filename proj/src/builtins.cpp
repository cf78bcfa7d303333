#include "obsim/builtins.hpp"

#include <cmath>

namespace obsim {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt3 = 1.0 / std::sqrt(3.0);

Complex re(double x) {
    return Complex{x, 0.0};
}

} // namespace

Scenario builtin_frw() {
    Scenario s;
    s.name = "frw";
    s.factors = {{"coin", {"h", "t"}}, {"spin", {"down", "up"}}};
    s.initial_factors = {0};

    const StateVector h = StateVector::basis(2, 0);
    const StateVector t = StateVector::basis(2, 1);
    const StateVector down = StateVector::basis(2, 0);
    const StateVector up = StateVector::basis(2, 1);
    const StateVector right = re(kInvSqrt2) * (down + up);

    s.initial = re(kInvSqrt3) * h + re(std::sqrt(2.0 / 3.0)) * t;
    s.initial.labels = {"h", "t"};
    s.initial_expr = "1/sqrt(3)*|h> + sqrt(2/3)*|t>";

    // Step I: coin measurement; the outcome decides the spin preparation, so
    // both branches raise the space from coin to coin (x) spin.
    MeasurementStep one;
    one.id = "I";
    one.observer = "Fbar";
    one.row_factors = {0, 1};
    one.branches.push_back({"h", outer(tensor(h, down), h), "|h,down><h|"});
    one.branches.push_back({"t", outer(tensor(t, right), t),
                            "1/sqrt(2)*|t,down><t| + 1/sqrt(2)*|t,up><t|"});
    one.merged = one.branches[0].op + one.branches[1].op;
    one.merged_expr = "|h,down><h| + 1/sqrt(2)*|t,down><t| + 1/sqrt(2)*|t,up><t|";
    s.steps.push_back(std::move(one));

    // Step II: spin measurement inside the second laboratory.
    MeasurementStep two;
    two.id = "II";
    two.observer = "F";
    two.row_factors = {0, 1};
    two.branches.push_back({"down", tensor(LinearMap::identity(2), outer(down, down)),
                            "|down><down|"});
    two.branches.push_back({"up", tensor(LinearMap::identity(2), outer(up, up)), "|up><up|"});
    two.merged = LinearMap::identity(4);
    two.merged_expr = "|down><down| + |up><up|";
    s.steps.push_back(std::move(two));

    // Step III: outside measurement of the coin laboratory in the rotated
    // basis okbar = (h - t)/sqrt(2), failbar = (h + t)/sqrt(2).
    const StateVector okbar = re(kInvSqrt2) * (h - t);
    const StateVector failbar = re(kInvSqrt2) * (h + t);
    MeasurementStep three;
    three.id = "III";
    three.observer = "Wbar";
    three.row_factors = {0, 1};
    three.branches.push_back({"okbar", tensor(outer(okbar, okbar), LinearMap::identity(2)),
                              "0.5*|h><h| - 0.5*|h><t| - 0.5*|t><h| + 0.5*|t><t|"});
    three.branches.push_back({"failbar", tensor(outer(failbar, failbar), LinearMap::identity(2)),
                              "0.5*|h><h| + 0.5*|h><t| + 0.5*|t><h| + 0.5*|t><t|"});
    s.steps.push_back(std::move(three));

    // Step IV: outside measurement of the spin laboratory in the rotated
    // basis ok = (down - up)/sqrt(2), fail = (down + up)/sqrt(2).
    const StateVector ok = re(kInvSqrt2) * (down - up);
    const StateVector fail = re(kInvSqrt2) * (down + up);
    MeasurementStep four;
    four.id = "IV";
    four.observer = "W";
    four.row_factors = {0, 1};
    four.branches.push_back({"ok", tensor(LinearMap::identity(2), outer(ok, ok)),
                             "0.5*|down><down| - 0.5*|down><up| - 0.5*|up><down| + 0.5*|up><up|"});
    four.branches.push_back({"fail", tensor(LinearMap::identity(2), outer(fail, fail)),
                             "0.5*|down><down| + 0.5*|down><up| + 0.5*|up><down| + 0.5*|up><up|"});
    s.steps.push_back(std::move(four));

    s.halt_target = {{"III", "okbar"}, {"IV", "ok"}};
    return s;
}

Scenario builtin_wigner() {
    Scenario s;
    s.name = "wigner";
    s.factors = {{"spin", {"up", "down"}}};
    s.initial_factors = {0};

    const StateVector up = StateVector::basis(2, 0);
    const StateVector down = StateVector::basis(2, 1);

    s.initial = re(kInvSqrt2) * (up + down);
    s.initial.labels = {"up", "down"};
    s.initial_expr = "1/sqrt(2)*|up> + 1/sqrt(2)*|down>";

    MeasurementStep m;
    m.id = "M";
    m.observer = "F";
    m.row_factors = {0};
    m.branches.push_back({"up", outer(up, up), "|up><up|"});
    m.branches.push_back({"down", outer(down, down), "|down><down|"});
    m.merged = LinearMap::identity(2);
    m.merged_expr = "|up><up| + |down><down|";
    s.steps.push_back(std::move(m));

    const StateVector sv = re(kInvSqrt2) * (up + down);
    const StateVector sperp = re(kInvSqrt2) * (up - down);
    MeasurementStep w;
    w.id = "W";
    w.observer = "W";
    w.row_factors = {0};
    w.branches.push_back({"s", outer(sv, sv),
                          "0.5*|up><up| + 0.5*|up><down| + 0.5*|down><up| + 0.5*|down><down|"});
    w.branches.push_back({"sperp", outer(sperp, sperp),
                          "0.5*|up><up| - 0.5*|up><down| - 0.5*|down><up| + 0.5*|down><down|"});
    s.steps.push_back(std::move(w));

    return s;
}

} // namespace obsim
