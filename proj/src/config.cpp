#include "astsa/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "astsa/symquery.hpp"

namespace astsa::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& what) {
    throw ConfigError(origin + ": " + path + ": " + what);
}

const json& member(const json& obj, const std::string& origin, const std::string& path,
                   const char* key) {
    if (!obj.is_object()) fail(origin, path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(origin, path, std::string("missing required key '") + key + "'");
    return *it;
}

std::string get_string(const json& obj, const std::string& origin, const std::string& path,
                       const char* key) {
    const json& v = member(obj, origin, path, key);
    if (!v.is_string()) fail(origin, path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::string get_string_or(const json& obj, const char* key, const std::string& def) {
    auto it = obj.find(key);
    return it != obj.end() && it->is_string() ? it->get<std::string>() : def;
}

double get_number(const json& obj, const std::string& origin, const std::string& path,
                  const char* key) {
    const json& v = member(obj, origin, path, key);
    if (!v.is_number()) fail(origin, path + "." + key, "expected a number");
    return v.get<double>();
}

/// Bin upper bounds accept the string "inf" for the open last bin.
double get_bound(const json& v, const std::string& origin, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    }
    fail(origin, path, "expected a number or \"inf\"");
}

ChannelMeta parse_channel(const json& j, const std::string& origin, const std::string& path,
                          const std::string& machine_id, ChannelKind kind) {
    ChannelMeta m;
    m.channel_id = get_string(j, origin, path, "channel_id");
    m.name = get_string_or(j, "name", m.channel_id);
    m.unit = get_string_or(j, "unit", "");
    m.phys_min = get_number(j, origin, path, "phys_min");
    m.phys_max = get_number(j, origin, path, "phys_max");
    m.machine_id = machine_id;
    m.location = get_string_or(j, "location", "");
    m.hypothesis = get_string_or(j, "hypothesis", "");
    m.kind = kind;
    try {
        m.validate();
    } catch (const ConfigError& e) {
        fail(origin, path, e.what());
    }
    return m;
}

}  // namespace

const ChannelMeta* MachineConfig::find_channel(const std::string& id) const {
    for (const auto& c : channels) {
        if (c.channel_id == id) return &c;
    }
    for (const auto& d : derived) {
        if (d.output.channel_id == id) return &d.output;
    }
    return nullptr;
}

const derived::DerivedSpec* MachineConfig::find_derived(const std::string& id) const {
    for (const auto& d : derived) {
        if (d.output.channel_id == id) return &d;
    }
    return nullptr;
}

const symbol::Lexicon* MachineConfig::find_lexicon(const std::string& channel_id) const {
    for (const auto& l : lexicons) {
        if (l.channel_id == channel_id) return &l;
    }
    return nullptr;
}

const symbol::StateLexicon* MachineConfig::find_state_lexicon(const std::string& id) const {
    for (const auto& s : state_lexicons) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::vector<std::string> MachineConfig::effective_report_channels() const {
    if (!report_channels.empty()) return report_channels;
    std::vector<std::string> out;
    for (const auto& c : channels) out.push_back(c.channel_id);
    return out;
}

MachineConfig parse_machine_config(const std::string& json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(origin + ": $: expected an object");

    MachineConfig cfg;
    cfg.machine_id = get_string(doc, origin, "$", "machine_id");
    const double dt = get_number(doc, origin, "$", "nominal_dt_seconds");
    if (dt < 1.0 || dt != static_cast<double>(static_cast<std::uint32_t>(dt)) ||
        86400 % static_cast<std::uint32_t>(dt) != 0) {
        fail(origin, "$.nominal_dt_seconds", "expected a positive integer dividing 86400");
    }
    cfg.nominal_dt_seconds = static_cast<std::uint32_t>(dt);

    std::set<std::string> channel_ids;
    const json& channels = member(doc, origin, "$", "channels");
    if (!channels.is_array() || channels.empty()) {
        fail(origin, "$.channels", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const std::string path = "$.channels[" + std::to_string(i) + "]";
        ChannelMeta m =
            parse_channel(channels[i], origin, path, cfg.machine_id, ChannelKind::sensor);
        if (!channel_ids.insert(m.channel_id).second) {
            fail(origin, path, "duplicate channel_id '" + m.channel_id + "'");
        }
        cfg.channels.push_back(std::move(m));
    }

    if (auto it = doc.find("derived"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "$.derived[" + std::to_string(i) + "]";
            const json& d = (*it)[i];
            derived::DerivedSpec spec;
            spec.output = parse_channel(member(d, origin, path, "output"), origin,
                                        path + ".output", cfg.machine_id, ChannelKind::derived);
            if (!channel_ids.insert(spec.output.channel_id).second) {
                fail(origin, path, "duplicate channel_id '" + spec.output.channel_id + "'");
            }
            spec.expression = get_string(d, origin, path, "expression");
            if (auto c = d.find("constants"); c != d.end()) {
                for (const auto& [name, value] : c->items()) {
                    if (!value.is_number()) {
                        fail(origin, path + ".constants." + name, "expected a number");
                    }
                    spec.constants[name] = value.get<double>();
                }
            }
            try {
                spec.tree = derived::parse_expression(spec.expression);
            } catch (const SyntaxError& e) {
                fail(origin, path + ".expression", e.what());
            }
            for (const auto& ref : derived::referenced_channels(spec.tree)) {
                bool known = false;
                for (const auto& c : cfg.channels) known |= c.channel_id == ref;
                if (!known) {
                    fail(origin, path + ".expression",
                         "references unknown sensor channel '" + ref + "'");
                }
            }
            cfg.derived.push_back(std::move(spec));
        }
    }

    if (auto it = doc.find("lexicons"); it != doc.end()) {
        std::set<std::string> lexed;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "$.lexicons[" + std::to_string(i) + "]";
            const json& l = (*it)[i];
            symbol::Lexicon lex;
            lex.channel_id = get_string(l, origin, path, "channel_id");
            if (!cfg.find_channel(lex.channel_id)) {
                fail(origin, path + ".channel_id",
                     "unknown channel '" + lex.channel_id + "'");
            }
            if (!lexed.insert(lex.channel_id).second) {
                fail(origin, path, "duplicate lexicon for channel '" + lex.channel_id + "'");
            }
            const json& bins = member(l, origin, path, "noun_bins");
            for (std::size_t b = 0; b < bins.size(); ++b) {
                const std::string bpath = path + ".noun_bins[" + std::to_string(b) + "]";
                lex.noun_bins.push_back(
                    {get_bound(member(bins[b], origin, bpath, "upper_bound"), origin,
                               bpath + ".upper_bound"),
                     get_string(bins[b], origin, bpath, "label")});
            }
            if (auto h = l.find("hysteresis"); h != l.end()) {
                lex.hysteresis = h->get<double>();
            }
            if (auto v = l.find("verb_naming"); v != l.end()) {
                for (std::size_t b = 0; b < v->size(); ++b) {
                    const std::string vpath = path + ".verb_naming[" + std::to_string(b) + "]";
                    lex.verb_naming[{get_string((*v)[b], origin, vpath, "from"),
                                     get_string((*v)[b], origin, vpath, "to")}] =
                        get_string((*v)[b], origin, vpath, "name");
                }
            }
            if (auto a = l.find("adverb_bins"); a != l.end()) {
                for (std::size_t b = 0; b < a->size(); ++b) {
                    const std::string apath = path + ".adverb_bins[" + std::to_string(b) + "]";
                    lex.adverb_bins.push_back(
                        {get_bound(member((*a)[b], origin, apath, "upper_bound"), origin,
                                   apath + ".upper_bound"),
                         get_string((*a)[b], origin, apath, "label")});
                }
            }
            if (auto a = l.find("adjective_rules"); a != l.end()) {
                for (std::size_t b = 0; b < a->size(); ++b) {
                    const std::string apath =
                        path + ".adjective_rules[" + std::to_string(b) + "]";
                    symbol::AdjectiveRule rule;
                    rule.channel_id = get_string((*a)[b], origin, apath, "channel_id");
                    rule.comparator = get_string((*a)[b], origin, apath, "comparator");
                    rule.threshold = get_number((*a)[b], origin, apath, "threshold");
                    rule.label = get_string((*a)[b], origin, apath, "label");
                    if (!cfg.find_channel(rule.channel_id)) {
                        fail(origin, apath + ".channel_id",
                             "unknown channel '" + rule.channel_id + "'");
                    }
                    lex.adjective_rules.push_back(std::move(rule));
                }
            }
            if (auto p = l.find("pause_noun"); p != l.end()) {
                lex.pause_noun = p->get<std::string>();
                const json& th = member(l, origin, path, "pause_thresholds");
                lex.comma_max_s = static_cast<std::int64_t>(
                    get_number(th, origin, path + ".pause_thresholds", "comma_max_s"));
                lex.semicolon_max_s = static_cast<std::int64_t>(
                    get_number(th, origin, path + ".pause_thresholds", "semicolon_max_s"));
            }
            try {
                lex.validate();
            } catch (const ConfigError& e) {
                fail(origin, path, e.what());
            }
            cfg.lexicons.push_back(std::move(lex));
        }
    }

    if (auto it = doc.find("state_lexicons"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "$.state_lexicons[" + std::to_string(i) + "]";
            const json& s = (*it)[i];
            symbol::StateLexicon slex;
            slex.id = get_string(s, origin, path, "id");
            if (cfg.find_channel(slex.id) || cfg.find_state_lexicon(slex.id)) {
                fail(origin, path + ".id", "id '" + slex.id + "' is already taken");
            }
            const json& inputs = member(s, origin, path, "inputs");
            for (std::size_t b = 0; b < inputs.size(); ++b) {
                const std::string ch = inputs[b].get<std::string>();
                if (!cfg.find_lexicon(ch)) {
                    fail(origin, path + ".inputs[" + std::to_string(b) + "]",
                         "channel '" + ch + "' has no lexicon");
                }
                slex.inputs.push_back(ch);
            }
            const json& mapping = member(s, origin, path, "mapping");
            for (std::size_t b = 0; b < mapping.size(); ++b) {
                const std::string mpath = path + ".mapping[" + std::to_string(b) + "]";
                const json& nouns = member(mapping[b], origin, mpath, "nouns");
                std::vector<std::string> key;
                for (const auto& n : nouns) key.push_back(n.get<std::string>());
                slex.mapping[key] = get_string(mapping[b], origin, mpath, "label");
            }
            slex.default_label = get_string(s, origin, path, "default_label");
            try {
                slex.validate();
            } catch (const Error& e) {
                fail(origin, path, e.what());
            }
            cfg.state_lexicons.push_back(std::move(slex));
        }
    }

    if (auto it = doc.find("patterns"); it != doc.end()) {
        for (const auto& [name, value] : it->items()) {
            const std::string path = "$.patterns." + name;
            PatternDecl decl;
            if (value.is_string()) {
                decl.text = value.get<std::string>();
            } else if (value.is_object()) {
                decl.text = get_string(value, origin, path, "text");
                decl.source = get_string_or(value, "source", "");
            } else {
                fail(origin, path, "expected a string or {text, source} object");
            }
            try {
                query::parse_pattern(decl.text);
            } catch (const SyntaxError& e) {
                fail(origin, path, e.what());
            }
            if (!decl.source.empty() && !cfg.find_state_lexicon(decl.source) &&
                !cfg.find_lexicon(decl.source)) {
                fail(origin, path + ".source",
                     "'" + decl.source + "' is neither a lexed channel nor a state lexicon");
            }
            cfg.patterns[name] = std::move(decl);
        }
    }

    if (auto it = doc.find("context_window_s"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() <= 0) {
            fail(origin, "$.context_window_s", "expected a positive integer");
        }
        cfg.context_window_s = it->get<std::int64_t>();
    }

    if (auto it = doc.find("report_channels"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string ch = (*it)[i].get<std::string>();
            if (!cfg.find_channel(ch)) {
                fail(origin, "$.report_channels[" + std::to_string(i) + "]",
                     "unknown channel '" + ch + "'");
            }
            cfg.report_channels.push_back(ch);
        }
    }

    return cfg;
}

MachineConfig load_machine_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_machine_config(buf.str(), path);
}

}  // namespace astsa::config
