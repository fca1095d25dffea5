#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "astsa/core.hpp"
#include "astsa/derived.hpp"
#include "astsa/symbolize.hpp"

namespace astsa::config {

/// Named pattern with the sequence it runs over: a channel id (symbolized
/// through its lexicon) or a state-lexicon id. The source may stay empty
/// for patterns only used with an explicit --source.
struct PatternDecl {
    std::string text;
    std::string source;
};

/// The per-machine metadata authority: channels, derivations, lexicons,
/// fused states and named patterns, one JSON document per machine.
struct MachineConfig {
    std::string machine_id;
    std::uint32_t nominal_dt_seconds = 1;
    std::vector<ChannelMeta> channels;
    std::vector<derived::DerivedSpec> derived;
    std::vector<symbol::Lexicon> lexicons;
    std::vector<symbol::StateLexicon> state_lexicons;
    std::map<std::string, PatternDecl> patterns;
    std::int64_t context_window_s = 300;
    std::vector<std::string> report_channels;  // empty = all sensor channels

    const ChannelMeta* find_channel(const std::string& id) const;
    const derived::DerivedSpec* find_derived(const std::string& id) const;
    const symbol::Lexicon* find_lexicon(const std::string& channel_id) const;
    const symbol::StateLexicon* find_state_lexicon(const std::string& id) const;

    /// Channels to slice into event reports: report_channels, or every
    /// sensor channel when unset.
    std::vector<std::string> effective_report_channels() const;
};

/// Parses and cross-validates a config document. Error messages carry the
/// JSON path of the offending element ("$.lexicons[0].noun_bins[2]...").
MachineConfig parse_machine_config(const std::string& json_text, const std::string& origin);

MachineConfig load_machine_config(const std::string& path);

}  // namespace astsa::config
