#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "astsa/symbolize.hpp"

namespace astsa::query {

using symbol::SymbolSequence;
using symbol::SymbolToken;
using symbol::TokenKind;

/// One qualifier constraint inside a token atom. `dur` compares the token
/// duration numerically; every other key compares qualifier strings and
/// only supports '='.
struct QualConstraint {
    std::string key;
    char op = '=';  // '=', '>', '<'
    std::string value;
    std::int64_t num = 0;  // parsed value when key == "dur"

    friend bool operator==(const QualConstraint&, const QualConstraint&) = default;
};

struct TokenAtom {
    TokenKind kind = TokenKind::noun;
    std::string label;  // "*" = wildcard
    std::vector<QualConstraint> quals;

    bool matches(const SymbolToken& tok) const;
    friend bool operator==(const TokenAtom&, const TokenAtom&) = default;
};

/// Wall-clock gap between the surrounding matched tokens: any tokens may
/// sit inside as long as next.t_start - previous.t_end lies in [min, max].
struct GapAtom {
    std::int64_t min_s = 0;
    std::int64_t max_s = 0;

    friend bool operator==(const GapAtom&, const GapAtom&) = default;
};

struct Seq;

struct GroupAtom {
    std::vector<Seq> alternatives;

    friend bool operator==(const GroupAtom&, const GroupAtom&);
};

using Atom = std::variant<TokenAtom, GapAtom, GroupAtom>;

struct Term {
    Atom atom;
    int min_rep = 1;
    int max_rep = 1;  // -1 = unbounded

    friend bool operator==(const Term&, const Term&);
};

struct Seq {
    std::vector<Term> terms;

    friend bool operator==(const Seq&, const Seq&);
};

/// Compiled nondeterministic automaton. Gap constraints ride on the
/// simulation threads, not on extra alphabet symbols.
struct Nfa {
    struct Transition {
        enum class Type { eps, token, gap };
        Type type = Type::eps;
        int to = -1;
        int pred = -1;            // token: index into preds
        std::int64_t min_s = 0;   // gap bounds
        std::int64_t max_s = 0;
    };
    std::vector<std::vector<Transition>> states;  // adjacency
    std::vector<TokenAtom> preds;
    int start = 0;
    int accept = 0;
};

struct Pattern {
    std::string text;
    Seq ast;
    Nfa nfa;
};

struct Match {
    std::size_t first_token_index = 0;
    std::size_t last_token_index = 0;
    Timestamp t_start;
    Timestamp t_end;  // end of the last token

    friend bool operator==(const Match&, const Match&) = default;
};

/// Grammar:
///   seq   := term+
///   term  := atom quant?
///   atom  := token | '(' seq ('|' seq)* ')' | gap
///   token := kind ':' label ('[' qual (',' qual)* ']')?
///   kind  := 'noun'|'verb'|'punct'|'state'
///   qual  := key ('='|'>'|'<') value
///   gap   := '~{' int ',' int '}'
///   quant := '*'|'+'|'?'|'{' int (',' int)? '}'
/// Labels may be '*'. Gaps cannot be quantified, adjacent to each other,
/// or the first/last term of any sequence. Throws SyntaxError with the
/// offset and an expected-token hint.
Pattern parse_pattern(const std::string& text);

/// Canonical text form; parsing it again yields an equal AST.
std::string print_pattern(const Pattern& pattern);

/// Leftmost, non-overlapping matches; within a leftmost start the
/// shortest accepting extension wins. Matches consume at least one token.
std::vector<Match> find_matches(const Pattern& pattern, const SymbolSequence& seq);

}  // namespace astsa::query
