#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "astsa/core.hpp"

namespace astsa::derived {

/// Node of a parsed arithmetic expression. Shared ownership keeps
/// ExpressionTree cheap to copy alongside its DerivedSpec.
struct ExprNode;
using ExpressionTree = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Op { add, sub, mul, div, neg, literal, channel, constant };

    Op op;
    double value = 0.0;     // literal
    std::string name;       // channel id or meta constant name
    ExpressionTree lhs, rhs;
};

/// A derived channel: an arithmetic expression over sensor channels and
/// machine metadata constants, evaluated sample-wise on the stream grid.
struct DerivedSpec {
    ChannelMeta output;                      // kind = derived
    std::string expression;
    std::map<std::string, double> constants; // e.g. piston_area_m2
    ExpressionTree tree;                     // filled by parse_expression
};

/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := ['-'] (number | ident | 'meta.' ident | '(' expr ')')
/// Throws SyntaxError with the byte offset of the failure.
ExpressionTree parse_expression(const std::string& text);

/// Channel ids referenced by the tree, sorted, deduplicated.
std::vector<std::string> referenced_channels(const ExpressionTree& tree);

/// Sample-wise evaluation on the stream grid. A sample is missing iff any
/// referenced channel sample is missing; division by zero and non-finite
/// results also map to missing rather than aborting a year-long pass.
/// Throws UnknownChannel / UnknownConstant on unresolved identifiers.
Series evaluate(const DerivedSpec& spec, const Stream& stream);

}  // namespace astsa::derived
