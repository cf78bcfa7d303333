#include "obsim/dsl.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

#include "obsim/format.hpp"

namespace obsim {

namespace {

constexpr std::size_t kMaxOpEntries = std::size_t{1} << 24;

struct ParseThrow {
    ParseError err;
};

[[noreturn]] void fail(SourcePosition pos, std::string expected, std::string found) {
    throw ParseThrow{ParseError{pos, std::move(expected), std::move(found)}};
}

enum class Tok {
    Ident,
    Number,
    String,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Langle,
    Rangle,
    Pipe,
    Comma,
    Equals,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double num = 0.0;
    bool is_integer = false;
    SourcePosition pos;
};

std::string describe(const Token &t) {
    switch (t.kind) {
        case Tok::Ident: return "identifier '" + t.text + "'";
        case Tok::Number: return "number '" + t.text + "'";
        case Tok::String: return "string \"" + t.text + "\"";
        case Tok::End: return "end of input";
        default: return "'" + t.text + "'";
    }
}

class Lexer {
  public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        skip_blank();
        Token t;
        t.pos = pos_;
        if (at_end()) {
            t.kind = Tok::End;
            return t;
        }
        const char c = peek();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            t.kind = Tok::Ident;
            while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
                t.text += take();
            }
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            return lex_number(t);
        }
        if (c == '"') {
            return lex_string(t);
        }
        t.text = std::string(1, take());
        switch (c) {
            case '{': t.kind = Tok::LBrace; return t;
            case '}': t.kind = Tok::RBrace; return t;
            case '(': t.kind = Tok::LParen; return t;
            case ')': t.kind = Tok::RParen; return t;
            case '<': t.kind = Tok::Langle; return t;
            case '>': t.kind = Tok::Rangle; return t;
            case '|': t.kind = Tok::Pipe; return t;
            case ',': t.kind = Tok::Comma; return t;
            case '=': t.kind = Tok::Equals; return t;
            case ':': t.kind = Tok::Colon; return t;
            case '+': t.kind = Tok::Plus; return t;
            case '-': t.kind = Tok::Minus; return t;
            case '*': t.kind = Tok::Star; return t;
            case '/': t.kind = Tok::Slash; return t;
            default: fail(t.pos, "a token", "character '" + t.text + "'");
        }
    }

  private:
    std::string_view text_;
    std::size_t at_ = 0;
    SourcePosition pos_{1, 1};

    bool at_end() const { return at_ >= text_.size(); }
    char peek() const { return text_[at_]; }

    char take() {
        const char c = text_[at_++];
        if (c == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        return c;
    }

    void skip_blank() {
        while (!at_end()) {
            const char c = peek();
            if (c == '#') {
                while (!at_end() && peek() != '\n') {
                    take();
                }
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                take();
            } else {
                break;
            }
        }
    }

    Token lex_number(Token t) {
        t.kind = Tok::Number;
        t.is_integer = true;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
            t.text += take();
        }
        if (!at_end() && peek() == '.') {
            t.is_integer = false;
            t.text += take();
            if (at_end() || !std::isdigit(static_cast<unsigned char>(peek()))) {
                fail(pos_, "digit after decimal point", at_end() ? "end of input"
                                                                 : "character '" +
                                                                       std::string(1, peek()) + "'");
            }
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
                t.text += take();
            }
        }
        if (!at_end() && (peek() == 'e' || peek() == 'E')) {
            t.is_integer = false;
            t.text += take();
            if (!at_end() && (peek() == '+' || peek() == '-')) {
                t.text += take();
            }
            if (at_end() || !std::isdigit(static_cast<unsigned char>(peek()))) {
                fail(pos_, "exponent digits", at_end() ? "end of input"
                                                       : "character '" + std::string(1, peek()) +
                                                             "'");
            }
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
                t.text += take();
            }
        }
        t.num = std::strtod(t.text.c_str(), nullptr);
        return t;
    }

    Token lex_string(Token t) {
        t.kind = Tok::String;
        take(); // opening quote
        while (true) {
            if (at_end() || peek() == '\n') {
                fail(t.pos, "closing '\"'", at_end() ? "end of input" : "end of line");
            }
            const char c = take();
            if (c == '"') {
                break;
            }
            if (c == '\\') {
                if (at_end()) {
                    fail(t.pos, "escaped character", "end of input");
                }
                const char e = take();
                if (e != '"' && e != '\\') {
                    fail(pos_, "'\\\"' or '\\\\'", "'\\" + std::string(1, e) + "'");
                }
                t.text += e;
            } else {
                t.text += c;
            }
        }
        return t;
    }
};

// ---------------------------------------------------------------------------
// Amplitude expressions. The AST is kept so the canonical form can be
// re-rendered exactly (sqrt factors stay symbolic).

struct AmpFactor {
    enum Kind { Num, Sqrt, NumOverSqrt, Imag } kind = Num;
    double num = 0.0;
    std::int64_t p = 0;
    std::int64_t q = 1;
};

struct Amp {
    bool neg = false;
    std::vector<AmpFactor> factors;

    Complex value() const {
        Complex v{neg ? -1.0 : 1.0, 0.0};
        for (const AmpFactor &f : factors) {
            switch (f.kind) {
                case AmpFactor::Num: v *= f.num; break;
                case AmpFactor::Sqrt:
                    v *= std::sqrt(static_cast<double>(f.p) / static_cast<double>(f.q));
                    break;
                case AmpFactor::NumOverSqrt:
                    v *= f.num / std::sqrt(static_cast<double>(f.p) / static_cast<double>(f.q));
                    break;
                case AmpFactor::Imag: v *= Complex{0.0, 1.0}; break;
            }
        }
        return v;
    }

    // Without the leading sign; the caller renders the sign at term level.
    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (i > 0) {
                out += "*";
            }
            const AmpFactor &f = factors[i];
            switch (f.kind) {
                case AmpFactor::Num: out += format_double(f.num); break;
                case AmpFactor::Sqrt:
                    out += "sqrt(" + std::to_string(f.p);
                    if (f.q != 1) {
                        out += "/" + std::to_string(f.q);
                    }
                    out += ")";
                    break;
                case AmpFactor::NumOverSqrt:
                    out += format_double(f.num) + "/sqrt(" + std::to_string(f.p);
                    if (f.q != 1) {
                        out += "/" + std::to_string(f.q);
                    }
                    out += ")";
                    break;
                case AmpFactor::Imag: out += "i"; break;
            }
        }
        return out;
    }
};

// A parsed ket or bra: the factor subset it mentions (ascending) and one
// basis digit per mentioned factor.
struct KetRef {
    std::vector<int> factors;
    std::vector<int> digits;
    SourcePosition pos;
    std::string text; // canonical "a,b" label list
};

std::size_t subset_dim(const std::vector<FactorSpace> &factors, const std::vector<int> &subset) {
    std::size_t d = 1;
    for (int f : subset) {
        d *= factors[static_cast<std::size_t>(f)].dim();
    }
    return d;
}

std::string subset_names(const std::vector<FactorSpace> &factors, const std::vector<int> &subset) {
    std::string out;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += factors[static_cast<std::size_t>(subset[i])].name;
    }
    return out;
}

// Mixed-radix index over `space` where positions listed in `where` carry
// `digits` and all others carry `fill` digits (aligned with `fill_where`).
std::size_t joint_index(const std::vector<FactorSpace> &factors, const std::vector<int> &space,
                        const std::vector<int> &where, const std::vector<int> &digits,
                        const std::vector<int> &fill_where, const std::vector<int> &fill) {
    std::size_t idx = 0;
    for (int f : space) {
        int digit = -1;
        for (std::size_t i = 0; i < where.size(); ++i) {
            if (where[i] == f) {
                digit = digits[i];
            }
        }
        for (std::size_t i = 0; i < fill_where.size(); ++i) {
            if (fill_where[i] == f) {
                digit = fill[i];
            }
        }
        idx = idx * factors[static_cast<std::size_t>(f)].dim() + static_cast<std::size_t>(digit);
    }
    return idx;
}

// ---------------------------------------------------------------------------

class Parser {
  public:
    explicit Parser(std::string_view text) : lex_(text) { cur_ = lex_.next(); }

    Scenario parse_scenario_text() {
        expect_keyword("scenario");
        s_.name = expect(Tok::String, "scenario name").text;
        while (cur_.kind != Tok::End) {
            const Token head = cur_;
            if (head.kind != Tok::Ident) {
                fail(head.pos, "'factor', 'init', 'step' or 'halt'", describe(head));
            }
            if (head.text == "factor") {
                parse_factor();
            } else if (head.text == "init") {
                parse_init();
            } else if (head.text == "step") {
                parse_step();
            } else if (head.text == "halt") {
                parse_halt();
            } else {
                fail(head.pos, "'factor', 'init', 'step' or 'halt'", describe(head));
            }
        }
        if (!have_init_) {
            fail(cur_.pos, "an 'init' declaration", "end of input");
        }
        return std::move(s_);
    }

    PartitionPrior parse_prior_text() {
        PartitionPrior prior;
        while (cur_.kind != Tok::End) {
            const Token head = expect(Tok::Ident, "'p'");
            if (head.text != "p") {
                fail(head.pos, "'p'", describe(head));
            }
            expect(Tok::LBrace, "'{'");
            std::vector<std::string> ids;
            if (cur_.kind != Tok::RBrace) {
                while (true) {
                    const Token id = expect(Tok::Ident, "step id");
                    for (const std::string &seen : ids) {
                        if (seen == id.text) {
                            fail(id.pos, "distinct step ids", "duplicate '" + id.text + "'");
                        }
                    }
                    ids.push_back(id.text);
                    if (cur_.kind == Tok::Comma) {
                        advance();
                        continue;
                    }
                    break;
                }
            }
            expect(Tok::RBrace, "'}'");
            expect(Tok::Equals, "'='");
            bool neg = false;
            if (cur_.kind == Tok::Minus) {
                neg = true;
                advance();
            }
            const Token w = expect(Tok::Number, "a weight");
            Partition part{ids};
            if (prior.weights.count(part) != 0) {
                fail(head.pos, "distinct partitions", "duplicate 'p" + part.display() + "'");
            }
            prior.weights[part] = neg ? -w.num : w.num;
        }
        if (prior.weights.empty()) {
            fail(cur_.pos, "at least one 'p{...} = weight' entry", "end of input");
        }
        return prior;
    }

  private:
    Lexer lex_;
    Token cur_;
    Scenario s_;
    bool have_init_ = false;
    std::vector<int> space_; // factor subset of the current state space

    void advance() { cur_ = lex_.next(); }

    Token expect(Tok kind, const std::string &what) {
        if (cur_.kind != kind) {
            fail(cur_.pos, what, describe(cur_));
        }
        Token t = cur_;
        advance();
        return t;
    }

    void expect_keyword(const std::string &kw) {
        if (cur_.kind != Tok::Ident || cur_.text != kw) {
            fail(cur_.pos, "'" + kw + "'", describe(cur_));
        }
        advance();
    }

    bool at_keyword(const char *kw) const { return cur_.kind == Tok::Ident && cur_.text == kw; }

    void parse_factor() {
        advance(); // factor
        const Token name = expect(Tok::Ident, "factor name");
        for (const FactorSpace &f : s_.factors) {
            if (f.name == name.text) {
                fail(name.pos, "a new factor name", "duplicate '" + name.text + "'");
            }
        }
        if (have_init_ || !s_.steps.empty()) {
            fail(name.pos, "factor declarations before 'init'", "'factor'");
        }
        expect(Tok::LBrace, "'{'");
        FactorSpace f;
        f.name = name.text;
        while (true) {
            const Token label = expect(Tok::Ident, "basis label");
            for (const std::string &seen : f.basis_labels) {
                if (seen == label.text) {
                    fail(label.pos, "distinct basis labels", "duplicate '" + label.text + "'");
                }
            }
            f.basis_labels.push_back(label.text);
            if (cur_.kind == Tok::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(Tok::RBrace, "'}'");
        if (f.basis_labels.size() < 2) {
            fail(name.pos, "at least 2 basis labels", std::to_string(f.basis_labels.size()));
        }
        s_.factors.push_back(std::move(f));
        std::size_t total = 1;
        for (const FactorSpace &fs : s_.factors) {
            total *= fs.dim();
            if (total > kDefaultDimCap) {
                fail(name.pos, "total dimension <= " + std::to_string(kDefaultDimCap),
                     "a larger joint space");
            }
        }
    }

    // (factor, digit) of a basis label; the label must identify exactly one
    // factor.
    std::pair<int, int> resolve_label(const Token &label) {
        int factor = -1;
        int digit = -1;
        for (std::size_t f = 0; f < s_.factors.size(); ++f) {
            const FactorSpace &fs = s_.factors[f];
            for (std::size_t d = 0; d < fs.basis_labels.size(); ++d) {
                if (fs.basis_labels[d] == label.text) {
                    if (factor >= 0) {
                        fail(label.pos, "an unambiguous basis label",
                             "'" + label.text + "' (declared by several factors)");
                    }
                    factor = static_cast<int>(f);
                    digit = static_cast<int>(d);
                }
            }
        }
        if (factor < 0) {
            fail(label.pos, "a declared basis label", "'" + label.text + "'");
        }
        return {factor, digit};
    }

    // Shared by kets (|...>) and bras (<...|): the label list between the
    // delimiters.
    KetRef parse_label_list(Tok closer, const char *what) {
        KetRef ref;
        ref.pos = cur_.pos;
        while (true) {
            const Token label = expect(Tok::Ident, "basis label");
            const auto [factor, digit] = resolve_label(label);
            if (!ref.factors.empty() && factor <= ref.factors.back()) {
                fail(label.pos, "labels in factor declaration order",
                     "'" + label.text + "' out of order");
            }
            ref.factors.push_back(factor);
            ref.digits.push_back(digit);
            if (!ref.text.empty()) {
                ref.text += ",";
            }
            ref.text += label.text;
            if (cur_.kind == Tok::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(closer, what);
        return ref;
    }

    KetRef parse_ket() {
        expect(Tok::Pipe, "'|'");
        KetRef ref = parse_label_list(Tok::Rangle, "'>'");
        return ref;
    }

    KetRef parse_bra() {
        expect(Tok::Langle, "'<'");
        KetRef ref = parse_label_list(Tok::Pipe, "'|'");
        return ref;
    }

    AmpFactor parse_amp_factor(bool &neg) {
        if (cur_.kind == Tok::Minus) {
            advance();
            neg = !neg;
            return parse_amp_factor(neg);
        }
        if (at_keyword("i")) {
            advance();
            return AmpFactor{AmpFactor::Imag, 0.0, 0, 1};
        }
        if (at_keyword("sqrt")) {
            advance();
            const auto [p, q] = parse_sqrt_args();
            return AmpFactor{AmpFactor::Sqrt, 0.0, p, q};
        }
        if (cur_.kind == Tok::Number) {
            const Token num = cur_;
            advance();
            if (cur_.kind == Tok::Slash) {
                advance();
                expect_keyword("sqrt");
                const auto [p, q] = parse_sqrt_args();
                return AmpFactor{AmpFactor::NumOverSqrt, num.num, p, q};
            }
            return AmpFactor{AmpFactor::Num, num.num, 0, 1};
        }
        fail(cur_.pos, "a number, 'sqrt(...)', 'i' or '-'", describe(cur_));
    }

    std::pair<std::int64_t, std::int64_t> parse_sqrt_args() {
        expect(Tok::LParen, "'('");
        const Token p = expect(Tok::Number, "an integer");
        if (!p.is_integer) {
            fail(p.pos, "an integer", describe(p));
        }
        std::int64_t q = 1;
        if (cur_.kind == Tok::Slash) {
            advance();
            const Token qtok = expect(Tok::Number, "an integer");
            if (!qtok.is_integer) {
                fail(qtok.pos, "an integer", describe(qtok));
            }
            q = static_cast<std::int64_t>(qtok.num);
            if (q == 0) {
                fail(qtok.pos, "a nonzero denominator", "'0'");
            }
        }
        expect(Tok::RParen, "')'");
        return {static_cast<std::int64_t>(p.num), q};
    }

    bool amp_starts_here() const {
        return cur_.kind == Tok::Number || cur_.kind == Tok::Minus || at_keyword("i") ||
               at_keyword("sqrt");
    }

    // Parses [amp "*"]; returns nullopt when the term has no coefficient.
    // The '*' separating the amp from the ket is consumed here.
    std::optional<Amp> parse_term_amp() {
        if (!amp_starts_here()) {
            return std::nullopt;
        }
        Amp amp;
        amp.factors.push_back(parse_amp_factor(amp.neg));
        while (cur_.kind == Tok::Star) {
            advance();
            if (amp_starts_here()) {
                amp.factors.push_back(parse_amp_factor(amp.neg));
                continue;
            }
            return amp; // the star was the amp-ket separator
        }
        fail(cur_.pos, "'*' before the ket", describe(cur_));
    }

    void parse_init() {
        const Token head = cur_;
        advance(); // init
        if (have_init_) {
            fail(head.pos, "a single 'init' declaration", "'init'");
        }
        if (!s_.steps.empty()) {
            fail(head.pos, "'init' before any step", "'init'");
        }
        expect(Tok::Equals, "'='");

        std::vector<int> subset;
        std::vector<Complex> amps;
        std::string expr;
        bool first = true;
        bool neg_first = false;
        if (cur_.kind == Tok::Minus) {
            neg_first = true;
            advance();
        }
        while (true) {
            bool neg = first ? neg_first : false;
            if (!first) {
                if (cur_.kind == Tok::Plus) {
                    advance();
                } else if (cur_.kind == Tok::Minus) {
                    neg = true;
                    advance();
                } else {
                    break;
                }
            }
            std::optional<Amp> amp = parse_term_amp();
            const KetRef ket = parse_ket();
            if (first) {
                subset = ket.factors;
                amps.assign(subset_dim(s_.factors, subset), Complex{0.0, 0.0});
            } else if (ket.factors != subset) {
                fail(ket.pos, "a ket over factors " + subset_names(s_.factors, subset),
                     "ket over factors " + subset_names(s_.factors, ket.factors));
            }
            Complex coeff = amp ? amp->value() : Complex{1.0, 0.0};
            if (neg) {
                coeff = -coeff;
            }
            amps[joint_index(s_.factors, subset, ket.factors, ket.digits, {}, {})] += coeff;

            const bool render_neg = neg != (amp && amp->neg);
            std::string body = amp ? amp->render() + "*|" + ket.text + ">" : "|" + ket.text + ">";
            if (first) {
                expr = (render_neg ? "-" : "") + body;
            } else {
                expr += (render_neg ? " - " : " + ") + body;
            }
            first = false;
        }
        if (first) {
            fail(cur_.pos, "a ket expression", describe(cur_));
        }

        have_init_ = true;
        s_.initial_factors = subset;
        s_.initial = StateVector(std::move(amps));
        s_.initial_expr = expr;
        std::size_t d = s_.initial.dim();
        s_.initial.labels.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            s_.initial.labels[i] = joint_label(subset, i);
        }
        space_ = subset;
    }

    std::string joint_label(const std::vector<int> &subset, std::size_t index) const {
        std::vector<std::string> parts(subset.size());
        std::size_t rem = index;
        for (std::size_t i = subset.size(); i-- > 0;) {
            const FactorSpace &f = s_.factors[static_cast<std::size_t>(subset[i])];
            parts[i] = f.basis_labels[rem % f.dim()];
            rem /= f.dim();
        }
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i > 0) {
                out += ",";
            }
            out += parts[i];
        }
        return out;
    }

    // Output-space state shared by the merged map and every branch of one
    // step; the first term parsed decides whether the step raises dimension.
    struct OpSpace {
        std::vector<int> cols;
        std::optional<std::vector<int>> rows;
    };

    std::pair<LinearMap, std::string> parse_op_expr(OpSpace &sp) {
        LinearMap map;
        bool allocated = false;
        std::string expr;
        bool first = true;
        bool neg_first = false;
        if (cur_.kind == Tok::Minus) {
            neg_first = true;
            advance();
        }
        while (true) {
            bool neg = first ? neg_first : false;
            if (!first) {
                if (cur_.kind == Tok::Plus) {
                    advance();
                } else if (cur_.kind == Tok::Minus) {
                    neg = true;
                    advance();
                } else {
                    break;
                }
            }
            std::optional<Amp> amp = parse_term_amp();
            const KetRef ket = parse_ket();
            const KetRef bra = parse_bra();

            // Decide / check the output space.
            bool subset_of_cols = true;
            for (int f : ket.factors) {
                bool in_cols = false;
                for (int c : sp.cols) {
                    in_cols = in_cols || c == f;
                }
                subset_of_cols = subset_of_cols && in_cols;
            }
            if (!sp.rows) {
                if (subset_of_cols) {
                    sp.rows = sp.cols;
                } else {
                    // Dimension raising: the ket must cover the incoming
                    // factors plus the new ones.
                    bool covers = true;
                    for (int c : sp.cols) {
                        bool found = false;
                        for (int f : ket.factors) {
                            found = found || f == c;
                        }
                        covers = covers && found;
                    }
                    if (!covers) {
                        fail(ket.pos,
                             "a ket covering the incoming factors " +
                                 subset_names(s_.factors, sp.cols),
                             "ket over factors " + subset_names(s_.factors, ket.factors));
                    }
                    sp.rows = ket.factors;
                }
            }
            const bool square = *sp.rows == sp.cols;
            if (square) {
                if (!subset_of_cols) {
                    fail(ket.pos, "a ket within factors " + subset_names(s_.factors, sp.cols),
                         "ket over factors " + subset_names(s_.factors, ket.factors));
                }
                if (bra.factors != ket.factors) {
                    if (bra.factors.size() != ket.factors.size()) {
                        fail(bra.pos, "bra of arity " + std::to_string(ket.factors.size()),
                             "bra of arity " + std::to_string(bra.factors.size()));
                    }
                    fail(bra.pos, "a bra over factors " + subset_names(s_.factors, ket.factors),
                         "bra over factors " + subset_names(s_.factors, bra.factors));
                }
            } else {
                if (ket.factors != *sp.rows) {
                    if (ket.factors.size() != sp.rows->size()) {
                        fail(ket.pos, "ket of arity " + std::to_string(sp.rows->size()),
                             "ket of arity " + std::to_string(ket.factors.size()));
                    }
                    fail(ket.pos, "a ket over factors " + subset_names(s_.factors, *sp.rows),
                         "ket over factors " + subset_names(s_.factors, ket.factors));
                }
                if (bra.factors != sp.cols) {
                    if (bra.factors.size() != sp.cols.size()) {
                        fail(bra.pos, "bra of arity " + std::to_string(sp.cols.size()),
                             "bra of arity " + std::to_string(bra.factors.size()));
                    }
                    fail(bra.pos, "a bra over factors " + subset_names(s_.factors, sp.cols),
                         "bra over factors " + subset_names(s_.factors, bra.factors));
                }
            }

            if (!allocated) {
                const std::size_t rows = subset_dim(s_.factors, *sp.rows);
                const std::size_t cols = subset_dim(s_.factors, sp.cols);
                if (rows * cols > kMaxOpEntries) {
                    fail(ket.pos, "an operator grid within capacity",
                         std::to_string(rows) + "x" + std::to_string(cols));
                }
                map = LinearMap::zero(rows, cols);
                allocated = true;
            }

            Complex coeff = amp ? amp->value() : Complex{1.0, 0.0};
            if (neg) {
                coeff = -coeff;
            }

            if (square) {
                // Expand with identity on the unmentioned factors: iterate
                // every assignment of the complement digits.
                std::vector<int> comp;
                for (int c : sp.cols) {
                    bool mentioned = false;
                    for (int f : ket.factors) {
                        mentioned = mentioned || f == c;
                    }
                    if (!mentioned) {
                        comp.push_back(c);
                    }
                }
                const std::size_t comp_dim = subset_dim(s_.factors, comp);
                std::vector<int> fill(comp.size(), 0);
                for (std::size_t u = 0; u < comp_dim; ++u) {
                    const std::size_t r = joint_index(s_.factors, sp.cols, ket.factors, ket.digits,
                                                      comp, fill);
                    const std::size_t c = joint_index(s_.factors, sp.cols, bra.factors, bra.digits,
                                                      comp, fill);
                    map.at(r, c) += coeff;
                    for (std::size_t i = comp.size(); i-- > 0;) {
                        const int dim =
                            static_cast<int>(s_.factors[static_cast<std::size_t>(comp[i])].dim());
                        if (++fill[i] < dim) {
                            break;
                        }
                        fill[i] = 0;
                    }
                }
            } else {
                const std::size_t r =
                    joint_index(s_.factors, *sp.rows, ket.factors, ket.digits, {}, {});
                const std::size_t c =
                    joint_index(s_.factors, sp.cols, bra.factors, bra.digits, {}, {});
                map.at(r, c) += coeff;
            }

            const bool render_neg = neg != (amp && amp->neg);
            std::string body = "|" + ket.text + "><" + bra.text + "|";
            if (amp) {
                body = amp->render() + "*" + body;
            }
            if (first) {
                expr = (render_neg ? "-" : "") + body;
            } else {
                expr += (render_neg ? " - " : " + ") + body;
            }
            first = false;
        }
        if (first) {
            fail(cur_.pos, "an operator expression", describe(cur_));
        }
        return {std::move(map), std::move(expr)};
    }

    void parse_step() {
        advance(); // step
        const Token id = expect(Tok::Ident, "step id");
        if (s_.find_step(id.text) != nullptr) {
            fail(id.pos, "a new step id", "duplicate '" + id.text + "'");
        }
        if (!have_init_) {
            fail(id.pos, "'init' before any step", "'step'");
        }
        expect_keyword("observer");
        const Token obs = expect(Tok::String, "observer name");

        MeasurementStep st;
        st.id = id.text;
        st.observer = obs.text;

        OpSpace sp;
        sp.cols = space_;

        if (at_keyword("mergeable")) {
            advance();
            expect(Tok::Equals, "'='");
            auto [map, expr] = parse_op_expr(sp);
            st.merged = std::move(map);
            st.merged_expr = std::move(expr);
        }

        expect(Tok::LBrace, "'{'");
        while (at_keyword("branch")) {
            advance();
            const Token outcome = expect(Tok::Ident, "outcome label");
            for (const Branch &b : st.branches) {
                if (b.outcome == outcome.text) {
                    fail(outcome.pos, "distinct outcome labels", "duplicate '" + outcome.text + "'");
                }
            }
            expect(Tok::Colon, "':'");
            auto [map, expr] = parse_op_expr(sp);
            st.branches.push_back({outcome.text, std::move(map), std::move(expr)});
        }
        if (st.branches.empty()) {
            fail(cur_.pos, "'branch'", describe(cur_));
        }
        expect(Tok::RBrace, "'}'");

        st.row_factors = sp.rows ? *sp.rows : sp.cols;
        space_ = st.row_factors;
        s_.steps.push_back(std::move(st));
    }

    void parse_halt() {
        const Token head = cur_;
        advance(); // halt
        if (!s_.halt_target.empty()) {
            fail(head.pos, "a single 'halt' declaration", "'halt'");
        }
        expect(Tok::LBrace, "'{'");
        while (true) {
            const Token id = expect(Tok::Ident, "step id");
            if (s_.halt_target.count(id.text) != 0) {
                fail(id.pos, "distinct step ids", "duplicate '" + id.text + "'");
            }
            expect(Tok::Equals, "'='");
            const Token outcome = expect(Tok::Ident, "outcome label");
            s_.halt_target[id.text] = outcome.text;
            if (cur_.kind == Tok::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(Tok::RBrace, "'}'");
    }
};

// ---------------------------------------------------------------------------
// Emission.

std::string escape(const std::string &raw) {
    std::string out;
    for (char c : raw) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

std::string joint_label_of(const Scenario &s, const std::vector<int> &subset, std::size_t index) {
    std::vector<std::string> parts(subset.size());
    std::size_t rem = index;
    for (std::size_t i = subset.size(); i-- > 0;) {
        const FactorSpace &f = s.factors[static_cast<std::size_t>(subset[i])];
        parts[i] = f.basis_labels[rem % f.dim()];
        rem /= f.dim();
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += parts[i];
    }
    return out;
}

// One signed term per nonzero real/imaginary part of each coefficient.
void append_terms(std::string &expr, const Complex &coeff, const std::string &kets) {
    const auto push = [&expr](bool neg, const std::string &body) {
        if (expr.empty()) {
            expr += (neg ? "-" : "") + body;
        } else {
            expr += (neg ? " - " : " + ") + body;
        }
    };
    if (coeff.real() != 0.0) {
        const double mag = std::abs(coeff.real());
        push(coeff.real() < 0.0, mag == 1.0 ? kets : format_double(mag) + "*" + kets);
    }
    if (coeff.imag() != 0.0) {
        const double mag = std::abs(coeff.imag());
        push(coeff.imag() < 0.0, mag == 1.0 ? "i*" + kets : "i*" + format_double(mag) + "*" + kets);
    }
}

std::string synth_ket_expr(const Scenario &s, const StateVector &v,
                           const std::vector<int> &subset) {
    std::string expr;
    for (std::size_t i = 0; i < v.dim(); ++i) {
        if (v.amps[i] == Complex{0.0, 0.0}) {
            continue;
        }
        append_terms(expr, v.amps[i], "|" + joint_label_of(s, subset, i) + ">");
    }
    if (expr.empty()) {
        // All-zero states do not occur in valid scenarios; emit an explicit
        // zero term so the text still parses.
        expr = "0*|" + joint_label_of(s, subset, 0) + ">";
    }
    return expr;
}

std::string synth_op_expr(const Scenario &s, const LinearMap &m, const std::vector<int> &rows,
                          const std::vector<int> &cols) {
    std::string expr;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (m.at(r, c) == Complex{0.0, 0.0}) {
                continue;
            }
            append_terms(expr, m.at(r, c),
                         "|" + joint_label_of(s, rows, r) + "><" + joint_label_of(s, cols, c) +
                             "|");
        }
    }
    if (expr.empty()) {
        expr = "0*|" + joint_label_of(s, rows, 0) + "><" + joint_label_of(s, cols, 0) + "|";
    }
    return expr;
}

} // namespace

std::string ParseError::message() const {
    return std::to_string(position.line) + ":" + std::to_string(position.column) + ": expected " +
           expected + ", found " + found;
}

std::variant<Scenario, ParseError> parse_scenario(std::string_view text) {
    try {
        Parser p(text);
        return p.parse_scenario_text();
    } catch (const ParseThrow &t) {
        return t.err;
    }
}

std::variant<PartitionPrior, ParseError> parse_prior(std::string_view text) {
    try {
        Parser p(text);
        return p.parse_prior_text();
    } catch (const ParseThrow &t) {
        return t.err;
    }
}

std::string emit_scenario(const Scenario &s) {
    std::string out = "scenario \"" + escape(s.name) + "\"\n";
    for (const FactorSpace &f : s.factors) {
        out += "factor " + f.name + " {";
        for (std::size_t i = 0; i < f.basis_labels.size(); ++i) {
            out += (i == 0 ? " " : ", ") + f.basis_labels[i];
        }
        out += " }\n";
    }
    out += "init = ";
    out += s.initial_expr.empty() ? synth_ket_expr(s, s.initial, s.initial_factors)
                                  : s.initial_expr;
    out += "\n";

    std::vector<int> cols = s.initial_factors;
    for (const MeasurementStep &st : s.steps) {
        out += "step " + st.id + " observer \"" + escape(st.observer) + "\"";
        if (st.merged) {
            out += " mergeable = ";
            out += st.merged_expr.empty() ? synth_op_expr(s, *st.merged, st.row_factors, cols)
                                          : st.merged_expr;
        }
        out += " {\n";
        for (const Branch &b : st.branches) {
            out += "  branch " + b.outcome + " : ";
            out += b.expr.empty() ? synth_op_expr(s, b.op, st.row_factors, cols) : b.expr;
            out += "\n";
        }
        out += "}\n";
        cols = st.row_factors;
    }

    if (!s.halt_target.empty()) {
        out += "halt {";
        bool first = true;
        for (const MeasurementStep &st : s.steps) {
            const auto it = s.halt_target.find(st.id);
            if (it == s.halt_target.end()) {
                continue;
            }
            out += (first ? " " : ", ") + st.id + " = " + it->second;
            first = false;
        }
        // Halt entries naming unknown steps (validation reports them) still
        // need to round-trip.
        for (const auto &[id, outcome] : s.halt_target) {
            if (s.find_step(id) == nullptr) {
                out += (first ? " " : ", ") + id + " = " + outcome;
                first = false;
            }
        }
        out += " }\n";
    }
    return out;
}

} // namespace obsim
