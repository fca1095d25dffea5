#include "astsa/symbolize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace astsa::symbol {

const char* to_string(TokenKind k) {
    switch (k) {
        case TokenKind::noun: return "noun";
        case TokenKind::verb: return "verb";
        case TokenKind::punct: return "punct";
        case TokenKind::state: return "state";
    }
    return "?";
}

void Lexicon::validate() const {
    if (!valid_channel_id(channel_id)) {
        throw ConfigError("lexicon has malformed channel_id '" + channel_id + "'");
    }
    if (noun_bins.empty()) throw ConfigError("lexicon '" + channel_id + "' has no noun bins");
    double prev = -std::numeric_limits<double>::infinity();
    double min_width = std::numeric_limits<double>::infinity();
    for (const auto& b : noun_bins) {
        if (!(b.upper_bound > prev)) {
            throw ConfigError("lexicon '" + channel_id + "' noun bin bounds must increase");
        }
        if (b.label.empty()) throw ConfigError("lexicon '" + channel_id + "' has unlabeled bin");
        if (std::isfinite(prev)) min_width = std::min(min_width, b.upper_bound - prev);
        prev = b.upper_bound;
    }
    if (std::isfinite(prev)) {
        throw ConfigError("lexicon '" + channel_id + "' last noun bin bound must be +inf");
    }
    if (hysteresis < 0.0 || hysteresis >= min_width) {
        throw ConfigError("lexicon '" + channel_id +
                          "' hysteresis must be nonnegative and below the smallest bin width");
    }
    prev = 0.0;
    for (const auto& b : adverb_bins) {
        if (!(b.upper_bound > prev) || b.label.empty()) {
            throw ConfigError("lexicon '" + channel_id + "' adverb bins must increase");
        }
        prev = b.upper_bound;
    }
    for (const auto& r : adjective_rules) {
        if (r.comparator != ">" && r.comparator != "<" && r.comparator != ">=" &&
            r.comparator != "<=") {
            throw ConfigError("lexicon '" + channel_id + "' adjective comparator '" +
                              r.comparator + "' is not one of > < >= <=");
        }
    }
    if (!pause_noun.empty()) {
        const bool known = std::any_of(noun_bins.begin(), noun_bins.end(),
                                       [&](const NounBin& b) { return b.label == pause_noun; });
        if (!known) {
            throw ConfigError("lexicon '" + channel_id + "' pause noun '" + pause_noun +
                              "' is not a noun bin label");
        }
        if (comma_max_s <= 0 || comma_max_s >= semicolon_max_s) {
            throw ConfigError("lexicon '" + channel_id +
                              "' pause thresholds must satisfy 0 < comma_max_s < semicolon_max_s");
        }
    }
}

std::string Lexicon::verb_label(const std::string& from, const std::string& to) const {
    auto it = verb_naming.find({from, to});
    if (it != verb_naming.end()) return it->second;
    return "goto_" + to;
}

std::size_t Lexicon::raw_bin(double v) const {
    for (std::size_t i = 0; i < noun_bins.size(); ++i) {
        if (v <= noun_bins[i].upper_bound) return i;
    }
    return noun_bins.size() - 1;
}

void StateLexicon::validate() const {
    if (id.empty()) throw ConfigError("state lexicon id must not be empty");
    if (inputs.empty()) throw ConfigError("state lexicon '" + id + "' has no inputs");
    if (default_label.empty()) {
        throw ConfigError("state lexicon '" + id + "' default_label must not be empty");
    }
    for (const auto& [key, label] : mapping) {
        if (key.size() != inputs.size()) {
            throw ArityMismatch("state lexicon '" + id + "' mapping key of arity " +
                                std::to_string(key.size()) + " for " +
                                std::to_string(inputs.size()) + " inputs");
        }
        if (label.empty()) throw ConfigError("state lexicon '" + id + "' has unlabeled state");
    }
}

namespace {

int kind_rank(TokenKind k) {
    switch (k) {
        case TokenKind::verb: return 0;
        case TokenKind::noun: return 1;
        case TokenKind::punct: return 2;
        case TokenKind::state: return 3;
    }
    return 4;
}

void apply_adjectives(SymbolToken& tok, const Lexicon& lex, const Series& series,
                      const Stream* context) {
    for (const auto& rule : lex.adjective_rules) {
        double v;
        if (rule.channel_id == series.meta.channel_id) {
            v = series.value_at(tok.t_start);
        } else if (context && context->has_channel(rule.channel_id)) {
            v = context->channel(rule.channel_id).value_at(tok.t_start);
        } else {
            throw UnknownChannel("adjective rule needs channel '" + rule.channel_id +
                                 "' which is not in the provided context");
        }
        if (is_missing(v)) continue;
        bool hit = false;
        if (rule.comparator == ">") hit = v > rule.threshold;
        else if (rule.comparator == "<") hit = v < rule.threshold;
        else if (rule.comparator == ">=") hit = v >= rule.threshold;
        else hit = v <= rule.threshold;
        if (hit) tok.qualifiers[rule.label] = "true";
    }
}

}  // namespace

SymbolSequence symbolize(const Series& series, const Lexicon& lex, const Stream* context) {
    if (series.meta.channel_id != lex.channel_id) {
        throw LexiconMismatch("lexicon for '" + lex.channel_id + "' applied to channel '" +
                              series.meta.channel_id + "'");
    }
    lex.validate();

    SymbolSequence seq;
    seq.source = series.meta.channel_id;
    seq.dt_seconds = series.dt_seconds;

    const std::int64_t dt = series.dt_seconds;
    const std::size_t n = series.size();

    bool have_bin = false;
    std::size_t bin = 0;
    bool token_open = false;
    SymbolToken noun;

    auto close_noun = [&] {
        if (!token_open) return;
        seq.tokens.push_back(noun);
        token_open = false;
    };
    auto open_noun = [&](Timestamp t) {
        noun = SymbolToken{TokenKind::noun, lex.noun_bins[bin].label, t, dt, {}};
        apply_adjectives(noun, lex, series, context);
        token_open = true;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double v = series.values[i];
        if (is_missing(v)) {
            close_noun();
            continue;
        }
        const Timestamp t = series.timestamp_at(i);
        if (!have_bin) {
            bin = lex.raw_bin(v);
            have_bin = true;
            open_noun(t);
            continue;
        }

        bool commit = false;
        if (bin + 1 < lex.noun_bins.size() &&
            v - lex.noun_bins[bin].upper_bound > lex.hysteresis) {
            commit = true;
        } else if (bin > 0 && lex.noun_bins[bin - 1].upper_bound - v > lex.hysteresis) {
            commit = true;
        }

        if (commit) {
            const std::size_t from = bin;
            bin = lex.raw_bin(v);
            close_noun();
            SymbolToken verb{TokenKind::verb,
                             lex.verb_label(lex.noun_bins[from].label, lex.noun_bins[bin].label),
                             t, dt, {}};
            if (i > 0 && !is_missing(series.values[i - 1]) && !lex.adverb_bins.empty()) {
                const double slope = std::fabs(v - series.values[i - 1]) / static_cast<double>(dt);
                for (const auto& ab : lex.adverb_bins) {
                    if (slope <= ab.upper_bound) {
                        verb.qualifiers["adverb"] = ab.label;
                        break;
                    }
                }
            }
            seq.tokens.push_back(std::move(verb));
            open_noun(t);
        } else if (token_open) {
            noun.duration_s += dt;
        } else {
            open_noun(t);  // same committed bin resumes after a gap
        }
    }
    close_noun();

    if (!lex.pause_noun.empty()) {
        const std::size_t noun_count = seq.tokens.size();
        for (std::size_t i = 0; i < noun_count; ++i) {
            const SymbolToken& tok = seq.tokens[i];
            if (tok.kind != TokenKind::noun || tok.label != lex.pause_noun) continue;
            const char* cls = tok.duration_s <= lex.comma_max_s      ? "comma"
                              : tok.duration_s <= lex.semicolon_max_s ? "semicolon"
                                                                      : "full_stop";
            SymbolToken punct{TokenKind::punct, cls, tok.t_start, tok.duration_s, {}};
            punct.qualifiers["class"] = cls;
            seq.tokens.push_back(std::move(punct));
        }
    }

    std::stable_sort(seq.tokens.begin(), seq.tokens.end(),
                     [](const SymbolToken& a, const SymbolToken& b) {
                         if (a.t_start != b.t_start) return a.t_start < b.t_start;
                         return kind_rank(a.kind) < kind_rank(b.kind);
                     });
    return seq;
}

SymbolSequence fuse_states(const std::vector<SymbolSequence>& sequences,
                           const StateLexicon& slex) {
    slex.validate();
    if (sequences.size() != slex.inputs.size()) {
        throw ArityMismatch("state lexicon '" + slex.id + "' expects " +
                            std::to_string(slex.inputs.size()) + " sequences, got " +
                            std::to_string(sequences.size()));
    }
    const std::size_t k = sequences.size();
    for (std::size_t i = 0; i < k; ++i) {
        if (sequences[i].source != slex.inputs[i]) {
            throw ArityMismatch("state lexicon '" + slex.id + "' input " + std::to_string(i) +
                                " should come from '" + slex.inputs[i] + "', got '" +
                                sequences[i].source + "'");
        }
        if (sequences[i].dt_seconds != sequences[0].dt_seconds) {
            throw ArityMismatch("state lexicon '" + slex.id + "' inputs disagree on dt");
        }
    }

    // Boundary sweep over the per-channel noun intervals: between two
    // consecutive boundaries the label tuple is constant.
    struct Edge {
        Timestamp t;
        std::size_t input;
        const std::string* label;  // nullptr closes the interval
    };
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < k; ++i) {
        for (const auto& tok : sequences[i].tokens) {
            if (tok.kind != TokenKind::noun) continue;
            edges.push_back({tok.t_start, i, &tok.label});
            edges.push_back({tok.t_end(), i, nullptr});
        }
    }
    SymbolSequence out;
    out.source = slex.id;
    out.dt_seconds = sequences.empty() ? 1 : sequences[0].dt_seconds;
    if (edges.empty()) return out;

    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.t != b.t) return a.t < b.t;
        return (a.label == nullptr) > (b.label == nullptr);  // close before open
    });

    std::vector<const std::string*> current(k, nullptr);
    std::vector<std::string> tuple(k);
    bool open = false;
    SymbolToken state;

    auto close_state = [&](Timestamp at) {
        if (!open) return;
        state.duration_s = at - state.t_start;
        out.tokens.push_back(state);
        open = false;
    };

    std::size_t e = 0;
    while (e < edges.size()) {
        const Timestamp t = edges[e].t;
        while (e < edges.size() && edges[e].t == t) {
            current[edges[e].input] = edges[e].label;
            ++e;
        }
        const bool all = std::none_of(current.begin(), current.end(),
                                      [](const std::string* p) { return p == nullptr; });
        std::string label;
        if (all) {
            for (std::size_t i = 0; i < k; ++i) tuple[i] = *current[i];
            auto it = slex.mapping.find(tuple);
            label = it != slex.mapping.end() ? it->second : slex.default_label;
        }
        if (open && (!all || label != state.label)) close_state(t);
        if (all && !open) {
            state = SymbolToken{TokenKind::state, label, t, 0, {}};
            open = true;
        }
    }
    close_state(edges.back().t);
    return out;
}

std::vector<TimeRange> reconstruct_partition(const SymbolSequence& seq) {
    std::vector<TimeRange> ranges;
    Timestamp prev_end{std::numeric_limits<std::int64_t>::min()};
    for (const auto& tok : seq.tokens) {
        if (tok.kind != TokenKind::noun && tok.kind != TokenKind::state) continue;
        if (tok.duration_s <= 0) {
            throw BrokenTiling("token '" + tok.label + "' at " + to_iso8601(tok.t_start) +
                               " has nonpositive duration");
        }
        if (tok.t_start < prev_end) {
            throw BrokenTiling("token '" + tok.label + "' at " + to_iso8601(tok.t_start) +
                               " overlaps its predecessor");
        }
        ranges.emplace_back(tok.t_start, tok.t_end());
        prev_end = tok.t_end();
    }
    return ranges;
}

}  // namespace astsa::symbol
