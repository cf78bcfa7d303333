#pragma once

#include "obsim/scenario.hpp"

namespace obsim {

// The four-step two-laboratory protocol: a coin measurement whose outcome
// decides the spin preparation, a spin measurement, then one outside
// measurement of each laboratory in a rotated basis. Steps I and II are
// mergeable; the halt rule is (III = okbar, IV = ok).
Scenario builtin_frw();

// Single spin in an isolated laboratory: a mergeable inside measurement M in
// the {up, down} basis, then an outside measurement W in the basis spanned by
// the initial state and its orthogonal complement. No halt rule.
Scenario builtin_wigner();

} // namespace obsim
