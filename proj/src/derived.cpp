#include "astsa/derived.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace astsa::derived {

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;

    explicit Parser(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    bool eof() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    [[noreturn]] void fail(const std::string& what) { throw SyntaxError(what, pos); }

    ExpressionTree parse() {
        auto e = expr();
        if (!eof()) fail("unexpected trailing input");
        return e;
    }

    ExpressionTree expr() {
        auto lhs = term();
        while (true) {
            const char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos;
            auto rhs = term();
            auto node = std::make_shared<ExprNode>();
            node->op = c == '+' ? ExprNode::Op::add : ExprNode::Op::sub;
            node->lhs = std::move(lhs);
            node->rhs = std::move(rhs);
            lhs = std::move(node);
        }
    }

    ExpressionTree term() {
        auto lhs = factor();
        while (true) {
            const char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos;
            auto rhs = factor();
            auto node = std::make_shared<ExprNode>();
            node->op = c == '*' ? ExprNode::Op::mul : ExprNode::Op::div;
            node->lhs = std::move(lhs);
            node->rhs = std::move(rhs);
            lhs = std::move(node);
        }
    }

    ExpressionTree factor() {
        const char c = peek();
        if (c == '-') {
            ++pos;
            auto node = std::make_shared<ExprNode>();
            node->op = ExprNode::Op::neg;
            node->lhs = factor();
            return node;
        }
        if (c == '(') {
            ++pos;
            auto inner = expr();
            if (peek() != ')') fail("expected ')'");
            ++pos;
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return number();
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return identifier();
        fail("expected number, identifier or '('");
    }

    ExpressionTree number() {
        skip_ws();
        double v = 0.0;
        const char* begin = text.data() + pos;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc{}) fail("malformed number");
        pos = static_cast<std::size_t>(ptr - text.data());
        auto node = std::make_shared<ExprNode>();
        node->op = ExprNode::Op::literal;
        node->value = v;
        return node;
    }

    ExpressionTree identifier() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size()) {
            const char c = text[pos];
            const bool ident = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                               (c >= '0' && c <= '9') || c == '_';
            if (!ident) break;
            ++pos;
        }
        std::string name = text.substr(start, pos - start);
        auto node = std::make_shared<ExprNode>();
        if (name == "meta") {
            if (pos >= text.size() || text[pos] != '.') fail("expected '.' after 'meta'");
            ++pos;
            const std::size_t cstart = pos;
            while (pos < text.size()) {
                const char c = text[pos];
                const bool ident = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                                   (c >= '0' && c <= '9') || c == '_';
                if (!ident) break;
                ++pos;
            }
            if (pos == cstart) fail("expected constant name after 'meta.'");
            node->op = ExprNode::Op::constant;
            node->name = text.substr(cstart, pos - cstart);
        } else {
            node->op = ExprNode::Op::channel;
            node->name = std::move(name);
        }
        return node;
    }
};

void collect_channels(const ExpressionTree& tree, std::set<std::string>& out) {
    if (!tree) return;
    if (tree->op == ExprNode::Op::channel) out.insert(tree->name);
    collect_channels(tree->lhs, out);
    collect_channels(tree->rhs, out);
}

struct Binding {
    const std::vector<double>* samples = nullptr;  // channel
    double constant = 0.0;                         // literal or meta constant
};

/// Flattens the tree into post-order instructions so the per-sample loop
/// stays branch-light over year-scale series.
struct Program {
    struct Instr {
        ExprNode::Op op;
        int a = -1, b = -1;                       // operand slots
        const std::vector<double>* samples = nullptr;
        double constant = 0.0;
    };
    std::vector<Instr> instrs;

    int compile(const ExpressionTree& node, const Stream& stream,
                const std::map<std::string, double>& constants) {
        Instr in;
        in.op = node->op;
        switch (node->op) {
            case ExprNode::Op::literal:
                in.constant = node->value;
                break;
            case ExprNode::Op::constant: {
                auto it = constants.find(node->name);
                if (it == constants.end()) {
                    throw UnknownConstant("meta constant '" + node->name + "' is not defined");
                }
                in.constant = it->second;
                break;
            }
            case ExprNode::Op::channel:
                in.samples = &stream.channel(node->name).values;
                break;
            case ExprNode::Op::neg:
                in.a = compile(node->lhs, stream, constants);
                break;
            default:
                in.a = compile(node->lhs, stream, constants);
                in.b = compile(node->rhs, stream, constants);
                break;
        }
        instrs.push_back(in);
        return static_cast<int>(instrs.size()) - 1;
    }

    double run(std::size_t sample, std::vector<double>& slots) const {
        for (std::size_t i = 0; i < instrs.size(); ++i) {
            const Instr& in = instrs[i];
            double v = 0.0;
            switch (in.op) {
                case ExprNode::Op::literal:
                case ExprNode::Op::constant:
                    v = in.constant;
                    break;
                case ExprNode::Op::channel:
                    v = (*in.samples)[sample];
                    break;
                case ExprNode::Op::neg:
                    v = -slots[in.a];
                    break;
                case ExprNode::Op::add:
                    v = slots[in.a] + slots[in.b];
                    break;
                case ExprNode::Op::sub:
                    v = slots[in.a] - slots[in.b];
                    break;
                case ExprNode::Op::mul:
                    v = slots[in.a] * slots[in.b];
                    break;
                case ExprNode::Op::div:
                    v = slots[in.b] == 0.0 ? missing_value() : slots[in.a] / slots[in.b];
                    break;
            }
            slots[i] = v;
        }
        return slots[instrs.size() - 1];
    }
};

}  // namespace

ExpressionTree parse_expression(const std::string& text) {
    Parser p(text);
    return p.parse();
}

std::vector<std::string> referenced_channels(const ExpressionTree& tree) {
    std::set<std::string> set;
    collect_channels(tree, set);
    return {set.begin(), set.end()};
}

Series evaluate(const DerivedSpec& spec, const Stream& stream) {
    ExpressionTree tree = spec.tree ? spec.tree : parse_expression(spec.expression);
    for (const auto& id : referenced_channels(tree)) {
        if (!stream.has_channel(id)) {
            throw UnknownChannel("derived expression references unknown channel '" + id + "'");
        }
    }

    Program prog;
    prog.compile(tree, stream, spec.constants);

    Series out;
    out.meta = spec.output;
    out.t0 = stream.t0();
    out.dt_seconds = stream.dt_seconds();
    out.values.assign(stream.length(), missing_value());

    std::vector<double> slots(prog.instrs.size());
    for (std::size_t i = 0; i < stream.length(); ++i) {
        bool any_missing = false;
        for (const auto& in : prog.instrs) {
            if (in.samples && is_missing((*in.samples)[i])) {
                any_missing = true;
                break;
            }
        }
        if (any_missing) continue;
        const double v = prog.run(i, slots);
        out.values[i] = std::isfinite(v) ? v : missing_value();
    }
    return out;
}

}  // namespace astsa::derived
