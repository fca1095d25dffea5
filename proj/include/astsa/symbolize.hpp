#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "astsa/core.hpp"

namespace astsa::symbol {

/// One value bin: label applies to values in (previous upper bound, upper_bound].
struct NounBin {
    double upper_bound;  // +inf on the last bin
    std::string label;
};

/// Slope-magnitude bin for adverbs, same shape as NounBin over |units/s|.
struct AdverbBin {
    double upper_bound;
    std::string label;
};

/// Predicate evaluated at noun-token start against another channel.
struct AdjectiveRule {
    std::string channel_id;
    std::string comparator;  // ">", "<", ">=", "<="
    double threshold = 0.0;
    std::string label;
};

/// Per-channel symbolization vocabulary: value bins become nouns,
/// committed bin changes become verbs, slope bins become adverbs,
/// predicates become adjectives, and idle runs become punctuation.
struct Lexicon {
    std::string channel_id;
    std::vector<NounBin> noun_bins;          // strictly increasing bounds, last = +inf
    double hysteresis = 0.0;                 // same units as the channel
    std::map<std::pair<std::string, std::string>, std::string> verb_naming;
    std::vector<AdverbBin> adverb_bins;      // optional; empty = no adverbs
    std::vector<AdjectiveRule> adjective_rules;
    std::string pause_noun;                  // empty = no punctuation
    std::int64_t comma_max_s = 0;            // pause runs <= comma_max_s
    std::int64_t semicolon_max_s = 0;        // <= semicolon_max_s, longer = full_stop

    /// Throws ConfigError on non-increasing bins, hysteresis >= smallest
    /// bin width, unknown pause noun or inverted pause thresholds.
    void validate() const;

    /// Verb label for a committed transition, verb_naming with the
    /// `goto_<to>` default.
    std::string verb_label(const std::string& from, const std::string& to) const;

    /// Bin index for a raw value (no hysteresis): first bin whose upper
    /// bound is >= v.
    std::size_t raw_bin(double v) const;
};

enum class TokenKind { noun, verb, punct, state };

const char* to_string(TokenKind k);

struct SymbolToken {
    TokenKind kind;
    std::string label;
    Timestamp t_start;
    std::int64_t duration_s = 0;
    std::map<std::string, std::string> qualifiers;

    Timestamp t_end() const { return t_start + duration_s; }

    friend bool operator==(const SymbolToken&, const SymbolToken&) = default;
};

struct SymbolSequence {
    std::string source;  // channel_id or state-lexicon id
    std::uint32_t dt_seconds = 1;
    std::vector<SymbolToken> tokens;

    friend bool operator==(const SymbolSequence&, const SymbolSequence&) = default;
};

/// Combines per-channel nouns into machine states: at each instant where
/// every input has a noun, the label tuple maps through `mapping`.
struct StateLexicon {
    std::string id;
    std::vector<std::string> inputs;  // channel ids, order defines tuple order
    std::map<std::vector<std::string>, std::string> mapping;
    std::string default_label;

    void validate() const;
};

/// Converts one channel into its symbol sequence.
///
/// Nouns: each present sample belongs to exactly one noun token. The bin
/// only changes when the value clears the current noun's boundary by more
/// than the hysteresis; the committed bin then follows the raw value.
/// Noun tokens never span gaps; after a gap the committed bin persists.
///
/// Verbs: one token per committed transition, duration dt, adverb
/// qualifier from the one-step slope when the previous grid sample is
/// present.
///
/// Punctuation: every maximal pause-noun run additionally yields a punct
/// token classed comma / semicolon / full_stop by its duration.
///
/// Adjectives: rules evaluated at noun-token start; `context` supplies
/// predicate channels (falls back to `series` itself for its own id).
/// Throws LexiconMismatch when series and lexicon disagree, UnknownChannel
/// when a rule's channel is unavailable.
SymbolSequence symbolize(const Series& series, const Lexicon& lex,
                         const Stream* context = nullptr);

/// Fuses per-channel sequences (same order as slex.inputs) into state
/// tokens. Instants where any input lacks a noun produce no state.
/// Throws ArityMismatch on input/mapping arity violations.
SymbolSequence fuse_states(const std::vector<SymbolSequence>& sequences,
                           const StateLexicon& slex);

/// Ranges of noun/state tokens, in order. Throws BrokenTiling when they
/// overlap or are unordered; used to audit the tiling invariant.
std::vector<TimeRange> reconstruct_partition(const SymbolSequence& seq);

}  // namespace astsa::symbol
