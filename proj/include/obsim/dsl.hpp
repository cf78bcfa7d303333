#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "obsim/scenario.hpp"

namespace obsim {

struct SourcePosition {
    int line = 1;
    int column = 1;
};

// First failure wins; the message is reproducible bit-exactly for a given
// input. Post-parse semantic problems (completeness, normalization, halt
// references) are NOT parse errors — validate() reports those.
struct ParseError {
    SourcePosition position;
    std::string expected;
    std::string found;

    std::string message() const;
};

// Scenario text format. Grammar ('#' starts a line comment, newlines are
// whitespace):
//
//   scenario   := "scenario" STRING decl*
//   decl       := factor | init | step | halt
//   factor     := "factor" IDENT "{" IDENT ("," IDENT)* "}"
//   init       := "init" "=" ketExpr
//   step       := "step" IDENT "observer" STRING ["mergeable" "=" opExpr]
//                 "{" branch+ "}"
//   branch     := "branch" IDENT ":" opExpr
//   halt       := "halt" "{" IDENT "=" IDENT ("," IDENT "=" IDENT)* "}"
//   ketExpr    := ["-"] term (("+"|"-") term)*
//   term       := [amp "*"] ket
//   ket        := "|" IDENT ("," IDENT)* ">"
//   opExpr     := ["-"] opTerm (("+"|"-") opTerm)*
//   opTerm     := [amp "*"] ket "<" IDENT ("," IDENT)* "|"
//   amp        := ampFactor ("*" ampFactor)*
//   ampFactor  := "-" ampFactor | "i" | "sqrt" "(" rational ")"
//                 | NUMBER ["/" "sqrt" "(" rational ")"]
//   rational   := INT ["/" INT]
//
// Factors must be declared before `init`, and `init` before any step. Ket
// and bra labels resolve to factors by lookup; labels must follow factor
// declaration order. A ket/bra mentioning only a subset of the current
// factors is legal in square (non-dimension-raising) step operators and
// expands by tensoring with identity on the unmentioned factors. A
// dimension-raising operator must spell out every output factor in its kets
// and every input factor in its bras. The total joint dimension is capped at
// 2^20 and a single operator grid at 2^24 entries.
std::variant<Scenario, ParseError> parse_scenario(std::string_view text);

// Prior text format: entries of the form `p{<comma-separated step ids>} = w`
// (empty braces for the no-merge partition). Weights are validated by
// validate_prior, not here; only syntax and duplicate partitions fail the
// parse.
std::variant<PartitionPrior, ParseError> parse_prior(std::string_view text);

// Canonical text: factors in declaration order, then init, steps, halt; one
// statement per line. Amplitudes print as the exact expression recorded by
// the parser or the built-in constructors, else as shortest-round-trip
// decimals, so parse(emit(s)) reproduces s bit-for-bit in both cases.
std::string emit_scenario(const Scenario &s);

} // namespace obsim
