#include "astsa/symquery.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace astsa::query {

bool operator==(const GroupAtom& a, const GroupAtom& b) { return a.alternatives == b.alternatives; }
bool operator==(const Term& a, const Term& b) {
    return a.min_rep == b.min_rep && a.max_rep == b.max_rep && a.atom == b.atom;
}
bool operator==(const Seq& a, const Seq& b) { return a.terms == b.terms; }

bool TokenAtom::matches(const SymbolToken& tok) const {
    if (tok.kind != kind) return false;
    if (label != "*" && tok.label != label) return false;
    for (const auto& q : quals) {
        if (q.key == "dur") {
            if (q.op == '=' && tok.duration_s != q.num) return false;
            if (q.op == '>' && !(tok.duration_s > q.num)) return false;
            if (q.op == '<' && !(tok.duration_s < q.num)) return false;
        } else {
            auto it = tok.qualifiers.find(q.key);
            if (it == tok.qualifiers.end() || it->second != q.value) return false;
        }
    }
    return true;
}

namespace {

bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}
bool value_char(char c) { return ident_char(c) || c == '.' || c == '-'; }

struct PatternParser {
    const std::string& text;
    std::size_t pos = 0;

    explicit PatternParser(const std::string& t) : text(t) {}

    [[noreturn]] void fail(const std::string& expected) {
        throw SyntaxError("expected " + expected, pos);
    }

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    std::string ident() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() && ident_char(text[pos])) ++pos;
        if (pos == start) fail("identifier");
        return text.substr(start, pos - start);
    }

    std::int64_t integer() {
        skip_ws();
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (ec != std::errc{} || ptr == text.data() + pos) fail("integer");
        pos = static_cast<std::size_t>(ptr - text.data());
        return v;
    }

    void expect(char c, const char* what) {
        if (peek() != c) fail(what);
        ++pos;
    }

    Seq parse() {
        Seq s = seq();
        if (peek() != '\0') fail("end of pattern");
        return s;
    }

    Seq seq() {
        Seq s;
        std::vector<std::size_t> term_offsets;
        std::vector<bool> is_gap;
        while (true) {
            const char c = peek();
            if (c == '\0' || c == ')' || c == '|') break;
            term_offsets.push_back(pos);
            Term t = term();
            is_gap.push_back(std::holds_alternative<GapAtom>(t.atom));
            s.terms.push_back(std::move(t));
        }
        if (s.terms.empty()) fail("token, group or gap");
        if (is_gap.front()) {
            throw SyntaxError("expected a token before the gap", term_offsets.front());
        }
        if (is_gap.back()) {
            throw SyntaxError("expected a token after the gap", term_offsets.back());
        }
        for (std::size_t i = 1; i < is_gap.size(); ++i) {
            if (is_gap[i] && is_gap[i - 1]) {
                throw SyntaxError("expected a token between gaps", term_offsets[i]);
            }
        }
        return s;
    }

    Term term() {
        Term t;
        const bool gap = peek() == '~';
        t.atom = atom();
        const std::size_t quant_pos = pos;
        if (parse_quant(t)) {
            if (gap) throw SyntaxError("gaps cannot be quantified", quant_pos);
        }
        return t;
    }

    bool parse_quant(Term& t) {
        const char c = peek();
        if (c == '*') { ++pos; t.min_rep = 0; t.max_rep = -1; return true; }
        if (c == '+') { ++pos; t.min_rep = 1; t.max_rep = -1; return true; }
        if (c == '?') { ++pos; t.min_rep = 0; t.max_rep = 1; return true; }
        if (c == '{') {
            ++pos;
            const std::int64_t m = integer();
            std::int64_t n = m;
            if (peek() == ',') {
                ++pos;
                n = integer();
            }
            if (m < 0 || n < m) fail("repetition bounds in order");
            expect('}', "'}'");
            t.min_rep = static_cast<int>(m);
            t.max_rep = static_cast<int>(n);
            return true;
        }
        return false;
    }

    Atom atom() {
        const char c = peek();
        if (c == '~') {
            ++pos;
            expect('{', "'{' after '~'");
            GapAtom g;
            g.min_s = integer();
            expect(',', "','");
            g.max_s = integer();
            if (g.min_s < 0 || g.max_s < g.min_s) fail("gap bounds in order");
            expect('}', "'}'");
            return g;
        }
        if (c == '(') {
            ++pos;
            GroupAtom g;
            g.alternatives.push_back(seq());
            while (peek() == '|') {
                ++pos;
                g.alternatives.push_back(seq());
            }
            expect(')', "')'");
            return g;
        }
        return token_atom();
    }

    Atom token_atom() {
        const std::size_t kind_pos = pos;
        const std::string kind = ident();
        TokenAtom t;
        if (kind == "noun") t.kind = TokenKind::noun;
        else if (kind == "verb") t.kind = TokenKind::verb;
        else if (kind == "punct") t.kind = TokenKind::punct;
        else if (kind == "state") t.kind = TokenKind::state;
        else throw SyntaxError("expected kind noun|verb|punct|state", kind_pos);
        expect(':', "':' after kind");
        if (peek() == '*') {
            ++pos;
            t.label = "*";
        } else {
            skip_ws();
            const std::size_t start = pos;
            while (pos < text.size() && ident_char(text[pos])) ++pos;
            if (pos == start) fail("label");
            t.label = text.substr(start, pos - start);
        }
        if (peek() == '[') {
            ++pos;
            while (true) {
                QualConstraint q;
                q.key = ident();
                const std::size_t op_pos = pos;
                const char op = peek();
                if (op != '=' && op != '>' && op != '<') fail("'=', '>' or '<'");
                ++pos;
                q.op = op;
                skip_ws();
                const std::size_t vstart = pos;
                while (pos < text.size() && value_char(text[pos])) ++pos;
                if (pos == vstart) fail("value");
                q.value = text.substr(vstart, pos - vstart);
                if (q.key == "dur") {
                    auto [ptr, ec] = std::from_chars(q.value.data(),
                                                     q.value.data() + q.value.size(), q.num);
                    if (ec != std::errc{} || ptr != q.value.data() + q.value.size()) {
                        throw SyntaxError("expected integer for dur", vstart);
                    }
                } else if (op != '=') {
                    throw SyntaxError("expected '=' (only dur orders)", op_pos);
                }
                t.quals.push_back(std::move(q));
                if (peek() == ',') { ++pos; continue; }
                expect(']', "']' or ','");
                break;
            }
        }
        return t;
    }
};

struct Compiler {
    Nfa& nfa;

    int state() {
        nfa.states.emplace_back();
        return static_cast<int>(nfa.states.size()) - 1;
    }
    void eps(int a, int b) { nfa.states[a].push_back({Nfa::Transition::Type::eps, b, -1, 0, 0}); }

    struct Frag {
        int start, end;
    };

    Frag atom(const Atom& a) {
        Frag f{state(), state()};
        if (const auto* tok = std::get_if<TokenAtom>(&a)) {
            const int pred = static_cast<int>(nfa.preds.size());
            nfa.preds.push_back(*tok);
            nfa.states[f.start].push_back({Nfa::Transition::Type::token, f.end, pred, 0, 0});
        } else if (const auto* gap = std::get_if<GapAtom>(&a)) {
            nfa.states[f.start].push_back(
                {Nfa::Transition::Type::gap, f.end, -1, gap->min_s, gap->max_s});
        } else {
            const auto& group = std::get<GroupAtom>(a);
            for (const auto& alt : group.alternatives) {
                Frag inner = seq(alt);
                eps(f.start, inner.start);
                eps(inner.end, f.end);
            }
        }
        return f;
    }

    Frag term(const Term& t) {
        Frag f{state(), -1};
        int tail = f.start;
        for (int i = 0; i < t.min_rep; ++i) {
            Frag a = atom(t.atom);
            eps(tail, a.start);
            tail = a.end;
        }
        if (t.max_rep == -1) {
            Frag a = atom(t.atom);
            const int out = state();
            eps(tail, a.start);
            eps(tail, out);
            eps(a.end, a.start);
            eps(a.end, out);
            tail = out;
        } else {
            for (int i = t.min_rep; i < t.max_rep; ++i) {
                Frag a = atom(t.atom);
                const int out = state();
                eps(tail, a.start);
                eps(tail, out);
                eps(a.end, out);
                tail = out;
            }
        }
        f.end = tail;
        return f;
    }

    Frag seq(const Seq& s) {
        Frag f{state(), -1};
        int tail = f.start;
        for (const auto& t : s.terms) {
            Frag a = term(t);
            eps(tail, a.start);
            tail = a.end;
        }
        f.end = tail;
        return f;
    }
};

Nfa compile(const Seq& ast) {
    Nfa nfa;
    Compiler c{nfa};
    const Compiler::Frag f = c.seq(ast);
    nfa.start = f.start;
    nfa.accept = f.end;
    return nfa;
}

struct Thread {
    int state;
    bool pending;
    std::int64_t gmin, gmax;
    Timestamp anchor;
    bool has_anchor;

    friend auto operator<=>(const Thread&, const Thread&) = default;
};

/// Expands epsilon and gap transitions. Gap transitions require an anchor
/// (a previously consumed token); unanchored gaps kill the thread. Pending
/// bounds are clamped to the last reachable token start: spans beyond it
/// are never tested, and the clamp keeps the thread state space finite
/// when repetition loops reach a gap without consuming anything.
void eclose(std::vector<Thread>& threads, const Nfa& nfa, Timestamp horizon) {
    std::set<Thread> seen(threads.begin(), threads.end());
    std::vector<Thread> work = threads;
    while (!work.empty()) {
        const Thread t = work.back();
        work.pop_back();
        for (const auto& tr : nfa.states[t.state]) {
            if (tr.type == Nfa::Transition::Type::token) continue;
            Thread n = t;
            n.state = tr.to;
            if (tr.type == Nfa::Transition::Type::gap) {
                if (!t.has_anchor) continue;
                if (t.pending) {
                    n.gmin += tr.min_s;  // gaps chained by emptied terms compose
                    n.gmax += tr.max_s;
                } else {
                    n.pending = true;
                    n.gmin = tr.min_s;
                    n.gmax = tr.max_s;
                }
                const std::int64_t reach = horizon - n.anchor;
                if (n.gmin > reach) continue;
                n.gmax = std::min(n.gmax, reach);
            }
            if (seen.insert(n).second) {
                threads.push_back(n);
                work.push_back(n);
            }
        }
    }
}

/// Shortest accepting end index for a match starting at token s, or -1.
std::ptrdiff_t shortest_match_end(const Nfa& nfa, const std::vector<SymbolToken>& tokens,
                                  std::size_t s) {
    const Timestamp horizon = tokens.empty() ? Timestamp{0} : tokens.back().t_start;
    std::vector<Thread> threads{{nfa.start, false, 0, 0, Timestamp{0}, false}};
    eclose(threads, nfa, horizon);
    for (std::size_t i = s; i < tokens.size(); ++i) {
        const SymbolToken& tok = tokens[i];
        std::vector<Thread> next;
        for (const Thread& t : threads) {
            for (const auto& tr : nfa.states[t.state]) {
                if (tr.type != Nfa::Transition::Type::token) continue;
                if (!nfa.preds[tr.pred].matches(tok)) continue;
                if (t.pending) {
                    const std::int64_t span = tok.t_start - t.anchor;
                    if (span < t.gmin || span > t.gmax) continue;
                }
                next.push_back({tr.to, false, 0, 0, tok.t_end(), true});
            }
            if (t.pending && tok.t_start - t.anchor <= t.gmax) {
                next.push_back(t);  // token swallowed by the gap
            }
        }
        eclose(next, nfa, horizon);
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        for (const Thread& t : next) {
            if (t.state == nfa.accept && !t.pending) return static_cast<std::ptrdiff_t>(i);
        }
        if (next.empty()) return -1;
        threads = std::move(next);
    }
    return -1;
}

void print_seq(const Seq& s, std::string& out);

void print_atom(const Atom& a, std::string& out) {
    if (const auto* tok = std::get_if<TokenAtom>(&a)) {
        out += symbol::to_string(tok->kind);
        out += ':';
        out += tok->label;
        if (!tok->quals.empty()) {
            out += '[';
            for (std::size_t i = 0; i < tok->quals.size(); ++i) {
                if (i) out += ',';
                out += tok->quals[i].key;
                out += tok->quals[i].op;
                out += tok->quals[i].value;
            }
            out += ']';
        }
    } else if (const auto* gap = std::get_if<GapAtom>(&a)) {
        out += "~{" + std::to_string(gap->min_s) + "," + std::to_string(gap->max_s) + "}";
    } else {
        const auto& group = std::get<GroupAtom>(a);
        out += '(';
        for (std::size_t i = 0; i < group.alternatives.size(); ++i) {
            if (i) out += '|';
            print_seq(group.alternatives[i], out);
        }
        out += ')';
    }
}

void print_seq(const Seq& s, std::string& out) {
    for (std::size_t i = 0; i < s.terms.size(); ++i) {
        if (i) out += ' ';
        const Term& t = s.terms[i];
        print_atom(t.atom, out);
        if (t.min_rep == 1 && t.max_rep == 1) continue;
        if (t.min_rep == 0 && t.max_rep == -1) out += '*';
        else if (t.min_rep == 1 && t.max_rep == -1) out += '+';
        else if (t.min_rep == 0 && t.max_rep == 1) out += '?';
        else if (t.min_rep == t.max_rep) out += '{' + std::to_string(t.min_rep) + '}';
        else out += '{' + std::to_string(t.min_rep) + ',' + std::to_string(t.max_rep) + '}';
    }
}

}  // namespace

Pattern parse_pattern(const std::string& text) {
    PatternParser p(text);
    Pattern pat;
    pat.text = text;
    pat.ast = p.parse();
    pat.nfa = compile(pat.ast);
    return pat;
}

std::string print_pattern(const Pattern& pattern) {
    std::string out;
    print_seq(pattern.ast, out);
    return out;
}

std::vector<Match> find_matches(const Pattern& pattern, const SymbolSequence& seq) {
    std::vector<Match> out;
    const auto& tokens = seq.tokens;
    std::size_t s = 0;
    while (s < tokens.size()) {
        const std::ptrdiff_t e = shortest_match_end(pattern.nfa, tokens, s);
        if (e < 0) {
            ++s;
            continue;
        }
        Match m;
        m.first_token_index = s;
        m.last_token_index = static_cast<std::size_t>(e);
        m.t_start = tokens[s].t_start;
        m.t_end = tokens[e].t_end();
        out.push_back(m);
        s = static_cast<std::size_t>(e) + 1;
    }
    return out;
}

}  // namespace astsa::query
