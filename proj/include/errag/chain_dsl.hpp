// chain_dsl.hpp - the GET/JOIN chain language: AST, parser, canonical renderer
//
// Surface grammar (keywords case-insensitive, rendered upper-case):
//
//   chain    := get ( "." "JOIN" "(" joinspec ")" "." get )*
//   get      := "GET" "(" source "," [cond] "," "{" attrs "}" ")" [ "AS" ident ]
//   joinspec := "left" "." ident op "right" "." ident
//             | ident "," ident "," ident                  (semantic triple)
//   cond     := or-expr over AND / OR / NOT, parentheses, and
//               comparisons `ident op literal`
//   op       := "=" | "!=" | "<" | "<=" | ">" | ">=" | "LIKE" | "~"
//   literal  := double-quoted string (backslash escapes) | decimal number
//               (optional sign, fraction, exponent) | "null"
//
// Condition trees are kept canonical: AND/OR nodes hold two or more children
// and never directly nest a node of the same kind. The renderer emits a
// single canonical spelling (single spaces, sorted attribute sets, aliases
// omitted when they match the positional defaults g1, g2, ...), so that
// parse(render(chain)) reproduces the chain structurally.
#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "errag/common.hpp"

namespace errag {

//============================================================================
// AST
//============================================================================

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge, Like, Fuzzy };

inline const char* cmp_op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        case CmpOp::Like: return "LIKE";
        case CmpOp::Fuzzy: return "~";
    }
    return "?";
}

/// Boolean expression over attribute comparisons.
struct Condition {
    enum class Kind { Or, And, Not, Cmp };

    Kind kind = Kind::Cmp;
    std::vector<Condition> children;  // Or/And: >=2, Not: exactly 1
    std::string attr;                 // Cmp only
    CmpOp op = CmpOp::Eq;             // Cmp only
    Value literal;                    // Cmp only

    static Condition cmp(std::string attr, CmpOp op, Value literal) {
        Condition c;
        c.kind = Kind::Cmp;
        c.attr = std::move(attr);
        c.op = op;
        c.literal = std::move(literal);
        return c;
    }
    static Condition negate(Condition child) {
        Condition c;
        c.kind = Kind::Not;
        c.children.push_back(std::move(child));
        return c;
    }
    /// Builds a canonical AND/OR node: same-kind children are spliced in and
    /// a single child collapses to itself.
    static Condition combine(Kind kind, std::vector<Condition> parts) {
        if (parts.size() == 1) return std::move(parts.front());
        Condition c;
        c.kind = kind;
        for (Condition& p : parts) {
            if (p.kind == kind) {
                for (Condition& sub : p.children) c.children.push_back(std::move(sub));
            } else {
                c.children.push_back(std::move(p));
            }
        }
        return c;
    }
    static Condition conj(std::vector<Condition> parts) { return combine(Kind::And, std::move(parts)); }
    static Condition disj(std::vector<Condition> parts) { return combine(Kind::Or, std::move(parts)); }

    bool operator==(const Condition& o) const {
        if (kind != o.kind) return false;
        if (kind == Kind::Cmp)
            return attr == o.attr && op == o.op && literal == o.literal;
        return children == o.children;
    }
};

// Reserved attribute names understood by every source adapter.
inline constexpr std::string_view kAttrContent = "content";    // full page/document text
inline constexpr std::string_view kAttrChunk = "chunk";        // retrieved chunk text
inline constexpr std::string_view kAttrSearchKey = "search_key";  // entity lookup key

inline bool is_reserved_attr(std::string_view name) {
    return name == kAttrContent || name == kAttrChunk || name == kAttrSearchKey;
}

/// One GET operation: source, optional filter, projected attribute set.
/// `attributes` is kept sorted and unique; names in `internal_attrs` were
/// added automatically because a join edge consumes them, and are omitted
/// when the node is rendered back to text.
struct GetNode {
    std::string alias;
    std::string source;
    std::optional<Condition> condition;
    std::vector<std::string> attributes;
    std::set<std::string> internal_attrs;

    bool has_attribute(std::string_view name) const {
        return std::binary_search(attributes.begin(), attributes.end(), name);
    }

    bool operator==(const GetNode& o) const {
        return alias == o.alias && source == o.source && condition == o.condition &&
               attributes == o.attributes && internal_attrs == o.internal_attrs;
    }
};

/// Join edge between two adjacent GETs. A relational edge keeps pairs where
/// `left.left_attr op right.right_attr` holds (for LIKE and ~ the left value
/// acts as the pattern applied to the right attribute). A semantic edge
/// keeps pairs where the relation extracted from the left attribute's text
/// equals the right attribute.
struct JoinEdge {
    enum class Kind { Relational, SemanticTriple };

    Kind kind = Kind::Relational;
    std::string left_attr;
    CmpOp op = CmpOp::Eq;      // Relational only
    std::string relation;      // SemanticTriple only
    std::string right_attr;

    static JoinEdge relational(std::string left, CmpOp op, std::string right) {
        JoinEdge e;
        e.kind = Kind::Relational;
        e.left_attr = std::move(left);
        e.op = op;
        e.right_attr = std::move(right);
        return e;
    }
    static JoinEdge semantic(std::string left, std::string relation, std::string right) {
        JoinEdge e;
        e.kind = Kind::SemanticTriple;
        e.left_attr = std::move(left);
        e.relation = std::move(relation);
        e.right_attr = std::move(right);
        return e;
    }

    bool operator==(const JoinEdge& o) const {
        return kind == o.kind && left_attr == o.left_attr && op == o.op &&
               relation == o.relation && right_attr == o.right_attr;
    }
};

/// Parsed chain: nodes joined left to right; edge i links node i and i+1.
struct ApiChain {
    std::vector<GetNode> nodes;
    std::vector<JoinEdge> edges;

    bool operator==(const ApiChain& o) const { return nodes == o.nodes && edges == o.edges; }
};

inline std::string auto_alias(std::size_t index) { return "g" + std::to_string(index + 1); }

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

inline bool ieq(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

}  // namespace detail

//============================================================================
// Validation / normalization
//============================================================================

/// Assigns default aliases, sorts attribute sets, auto-adds attributes that
/// join edges consume (flagged internal) and checks the chain invariants.
/// Throws Errc::ValidationError. Both the parser and programmatic builders
/// funnel through here so equality is well-defined.
inline void finalize_chain(ApiChain& chain) {
    if (chain.nodes.empty())
        throw Error(Errc::ValidationError, "chain has no GET nodes");
    if (chain.edges.size() + 1 != chain.nodes.size())
        throw Error(Errc::ValidationError, "chain requires exactly one JOIN between consecutive GETs");

    for (std::size_t i = 0; i < chain.nodes.size(); ++i) {
        GetNode& n = chain.nodes[i];
        if (n.alias.empty()) n.alias = auto_alias(i);
        if (n.source.empty())
            throw Error(Errc::ValidationError, "node " + n.alias + " has an empty source");
        if (n.attributes.empty())
            throw Error(Errc::ValidationError, "node " + n.alias + " requests no attributes");
        std::sort(n.attributes.begin(), n.attributes.end());
        n.attributes.erase(std::unique(n.attributes.begin(), n.attributes.end()), n.attributes.end());
    }

    std::set<std::string> seen;
    for (const GetNode& n : chain.nodes)
        if (!seen.insert(n.alias).second)
            throw Error(Errc::ValidationError, "duplicate node alias '" + n.alias + "'");

    auto ensure_attr = [](GetNode& n, const std::string& attr) {
        if (!n.has_attribute(attr)) {
            n.attributes.insert(
                std::upper_bound(n.attributes.begin(), n.attributes.end(), attr), attr);
            n.internal_attrs.insert(attr);
        }
    };
    for (std::size_t i = 0; i < chain.edges.size(); ++i) {
        const JoinEdge& e = chain.edges[i];
        if (e.left_attr.empty() || e.right_attr.empty() ||
            (e.kind == JoinEdge::Kind::SemanticTriple && e.relation.empty()))
            throw Error(Errc::ValidationError, "join edge " + std::to_string(i) + " has empty parts");
        ensure_attr(chain.nodes[i], e.left_attr);
        ensure_attr(chain.nodes[i + 1], e.right_attr);
    }
}

//============================================================================
// Parser
//============================================================================

namespace detail {

class ChainParser {
public:
    explicit ChainParser(std::string_view text) : text_(text) {}

    ApiChain parse() {
        ApiChain chain;
        skip_ws();
        chain.nodes.push_back(parse_get());
        skip_ws();
        while (!at_end() && peek() == '.') {
            ++pos_;
            expect_keyword("JOIN");
            expect('(');
            chain.edges.push_back(parse_joinspec());
            expect(')');
            skip_ws();
            expect('.');
            chain.nodes.push_back(parse_get());
            skip_ws();
        }
        if (!at_end()) fail("end of input");
        finalize_chain(chain);
        return chain;
    }

    /// Entry point for parsing a bare condition (used by tests and tools).
    Condition parse_condition_only() {
        skip_ws();
        Condition c = parse_or(0);
        skip_ws();
        if (!at_end()) fail("end of input");
        return c;
    }

private:
    static constexpr int kMaxDepth = 256;

    std::string_view text_;
    std::size_t pos_ = 0;

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    [[noreturn]] void fail(const std::string& expected) {
        throw Error(Errc::SyntaxError, "expected " + expected, pos_);
    }

    void skip_ws() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            ++pos_;
    }

    void expect(char c) {
        skip_ws();
        if (at_end() || peek() != c) fail(std::string("'") + c + "'");
        ++pos_;
    }

    bool try_char(char c) {
        skip_ws();
        if (!at_end() && peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string_view peek_ident() {
        skip_ws();
        if (at_end() || !is_ident_start(peek())) return {};
        std::size_t start = pos_;
        std::size_t end = start;
        while (end < text_.size() && is_ident_char(text_[end])) ++end;
        return text_.substr(start, end - start);
    }

    std::string take_ident(const char* what) {
        std::string_view id = peek_ident();
        if (id.empty()) fail(what);
        pos_ += id.size();
        return std::string(id);
    }

    bool try_keyword(std::string_view kw) {
        std::string_view id = peek_ident();
        if (!id.empty() && ieq(id, kw)) {
            pos_ += id.size();
            return true;
        }
        return false;
    }

    void expect_keyword(std::string_view kw) {
        if (!try_keyword(kw)) fail(std::string("keyword ") + std::string(kw));
    }

    GetNode parse_get() {
        expect_keyword("GET");
        expect('(');
        GetNode node;
        node.source = take_ident("source name");
        expect(',');
        skip_ws();
        if (!at_end() && peek() != ',') node.condition = parse_or(0);
        expect(',');
        expect('{');
        skip_ws();
        if (!at_end() && peek() != '}') {
            node.attributes.push_back(take_ident("attribute name"));
            while (try_char(',')) node.attributes.push_back(take_ident("attribute name"));
        }
        expect('}');
        expect(')');
        // Optional explicit alias.
        std::size_t mark = pos_;
        skip_ws();
        std::string_view id = peek_ident();
        if (!id.empty() && ieq(id, "AS")) {
            pos_ += id.size();
            node.alias = take_ident("alias");
        } else {
            pos_ = mark;
        }
        return node;
    }

    JoinEdge parse_joinspec() {
        skip_ws();
        std::size_t mark = pos_;
        std::string_view first = peek_ident();
        if (!first.empty() && ieq(first, "left")) {
            pos_ += first.size();
            if (try_char('.')) {
                JoinEdge edge;
                edge.kind = JoinEdge::Kind::Relational;
                edge.left_attr = take_ident("left attribute");
                edge.op = parse_op();
                expect_keyword("right");
                expect('.');
                edge.right_attr = take_ident("right attribute");
                return edge;
            }
            pos_ = mark;  // an identifier that merely starts with "left"
        }
        JoinEdge edge;
        edge.kind = JoinEdge::Kind::SemanticTriple;
        edge.left_attr = take_ident("join attribute");
        expect(',');
        edge.relation = take_ident("relation name");
        expect(',');
        edge.right_attr = take_ident("join attribute");
        return edge;
    }

    CmpOp parse_op() {
        skip_ws();
        if (at_end()) fail("comparison operator");
        char c = peek();
        if (c == '=') { ++pos_; return CmpOp::Eq; }
        if (c == '~') { ++pos_; return CmpOp::Fuzzy; }
        if (c == '!') {
            ++pos_;
            if (at_end() || peek() != '=') fail("'=' after '!'");
            ++pos_;
            return CmpOp::Ne;
        }
        if (c == '<') {
            ++pos_;
            if (!at_end() && peek() == '=') { ++pos_; return CmpOp::Le; }
            return CmpOp::Lt;
        }
        if (c == '>') {
            ++pos_;
            if (!at_end() && peek() == '=') { ++pos_; return CmpOp::Ge; }
            return CmpOp::Gt;
        }
        if (try_keyword("LIKE")) return CmpOp::Like;
        fail("comparison operator");
    }

    Condition parse_or(int depth) {
        guard_depth(depth);
        std::vector<Condition> parts;
        parts.push_back(parse_and(depth + 1));
        while (true) {
            std::size_t mark = pos_;
            skip_ws();
            if (!try_keyword("OR")) {
                pos_ = mark;
                break;
            }
            parts.push_back(parse_and(depth + 1));
        }
        return Condition::disj(std::move(parts));
    }

    Condition parse_and(int depth) {
        guard_depth(depth);
        std::vector<Condition> parts;
        parts.push_back(parse_not(depth + 1));
        while (true) {
            std::size_t mark = pos_;
            skip_ws();
            if (!try_keyword("AND")) {
                pos_ = mark;
                break;
            }
            parts.push_back(parse_not(depth + 1));
        }
        return Condition::conj(std::move(parts));
    }

    Condition parse_not(int depth) {
        guard_depth(depth);
        skip_ws();
        if (try_keyword("NOT")) return Condition::negate(parse_not(depth + 1));
        if (try_char('(')) {
            Condition inner = parse_or(depth + 1);
            expect(')');
            return inner;
        }
        Condition c;
        c.kind = Condition::Kind::Cmp;
        c.attr = take_ident("attribute name");
        c.op = parse_op();
        c.literal = parse_literal();
        return c;
    }

    void guard_depth(int depth) {
        if (depth > kMaxDepth)
            throw Error(Errc::SyntaxError, "expression nested too deeply", pos_);
    }

    Value parse_literal() {
        skip_ws();
        if (at_end()) fail("literal");
        char c = peek();
        if (c == '"') return parse_string();
        if (c == '-' || (c >= '0' && c <= '9')) return parse_num();
        if (try_keyword("null")) return Value{};
        fail("literal");
    }

    Value parse_string() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (at_end()) fail("closing '\"'");
            char c = text_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (at_end()) fail("escape character");
                char e = text_[pos_++];
                switch (e) {
                    case '\\': out.push_back('\\'); break;
                    case '"': out.push_back('"'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    default:
                        throw Error(Errc::SyntaxError, "unknown escape sequence", pos_ - 1);
                }
            } else {
                out.push_back(c);
            }
        }
        return Value{std::move(out)};
    }

    Value parse_num() {
        std::size_t start = pos_;
        if (peek() == '-') ++pos_;
        while (!at_end() && peek() >= '0' && peek() <= '9') ++pos_;
        if (!at_end() && peek() == '.') {
            ++pos_;
            while (!at_end() && peek() >= '0' && peek() <= '9') ++pos_;
        }
        if (!at_end() && (peek() == 'e' || peek() == 'E')) {
            ++pos_;
            if (!at_end() && (peek() == '+' || peek() == '-')) ++pos_;
            while (!at_end() && peek() >= '0' && peek() <= '9') ++pos_;
        }
        auto parsed = parse_number(std::string(text_.substr(start, pos_ - start)));
        if (!parsed) throw Error(Errc::SyntaxError, "malformed number", start);
        return Value{*parsed};
    }
};

}  // namespace detail

/// Parses chain text into a validated ApiChain.
/// Throws Errc::SyntaxError (with byte position) or Errc::ValidationError.
inline ApiChain parse_chain(std::string_view text) {
    if (text.empty()) throw Error(Errc::SyntaxError, "expected GET", std::size_t{0});
    return detail::ChainParser(text).parse();
}

/// Parses a bare condition expression (tooling helper).
inline Condition parse_condition(std::string_view text) {
    return detail::ChainParser(text).parse_condition_only();
}

//============================================================================
// Renderer
//============================================================================

inline std::string quote_string(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

inline std::string render_literal(const Value& v) {
    if (is_null(v)) return "null";
    if (const double* d = std::get_if<double>(&v)) {
        if (*d == std::floor(*d) && std::isfinite(*d) && std::fabs(*d) < 9.007199254740992e15)
            return format_number(*d);
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, *d);
        (void)ec;
        return std::string(buf, p);
    }
    return quote_string(std::get<std::string>(v));
}

namespace detail {

// Levels: 0 = or, 1 = and, 2 = unary.
inline void render_cond(const Condition& c, int level, std::string& out) {
    switch (c.kind) {
        case Condition::Kind::Cmp:
            out += c.attr;
            out += ' ';
            out += cmp_op_text(c.op);
            out += ' ';
            out += render_literal(c.literal);
            return;
        case Condition::Kind::Not:
            out += "NOT ";
            render_cond(c.children.front(), 2, out);
            return;
        case Condition::Kind::And: {
            bool parens = level >= 2;
            if (parens) out += '(';
            for (std::size_t i = 0; i < c.children.size(); ++i) {
                if (i) out += " AND ";
                render_cond(c.children[i], 2, out);
            }
            if (parens) out += ')';
            return;
        }
        case Condition::Kind::Or: {
            bool parens = level >= 1;
            if (parens) out += '(';
            for (std::size_t i = 0; i < c.children.size(); ++i) {
                if (i) out += " OR ";
                render_cond(c.children[i], 1, out);
            }
            if (parens) out += ')';
            return;
        }
    }
}

}  // namespace detail

inline std::string render_condition(const Condition& c) {
    std::string out;
    detail::render_cond(c, 0, out);
    return out;
}

/// Canonical text for one node; `index` decides whether the alias is the
/// positional default and can be omitted.
inline std::string render_node(const GetNode& n, std::size_t index) {
    std::string out = "GET(";
    out += n.source;
    out += ", ";
    if (n.condition) out += render_condition(*n.condition);
    out += ", {";
    bool first = true;
    for (const std::string& a : n.attributes) {
        if (n.internal_attrs.count(a)) continue;
        if (!first) out += ", ";
        out += a;
        first = false;
    }
    out += "})";
    if (n.alias != auto_alias(index)) {
        out += " AS ";
        out += n.alias;
    }
    return out;
}

inline std::string render_edge(const JoinEdge& e) {
    if (e.kind == JoinEdge::Kind::Relational) {
        std::string out = "JOIN(left.";
        out += e.left_attr;
        out += ' ';
        out += cmp_op_text(e.op);
        out += " right.";
        out += e.right_attr;
        out += ')';
        return out;
    }
    return "JOIN(" + e.left_attr + ", " + e.relation + ", " + e.right_attr + ")";
}

/// Canonical chain text; parse_chain(render_chain(c)) == c for valid chains.
inline std::string render_chain(const ApiChain& chain) {
    std::string out;
    for (std::size_t i = 0; i < chain.nodes.size(); ++i) {
        if (i) {
            out += '.';
            out += render_edge(chain.edges[i - 1]);
            out += '.';
        }
        out += render_node(chain.nodes[i], i);
    }
    return out;
}

//============================================================================
// Condition utilities
//============================================================================

/// Top-level conjuncts of a condition (nested ANDs flattened).
inline void collect_conjuncts(const Condition& c, std::vector<const Condition*>& out) {
    if (c.kind == Condition::Kind::And) {
        for (const Condition& child : c.children) collect_conjuncts(child, out);
    } else {
        out.push_back(&c);
    }
}

inline std::vector<const Condition*> collect_conjuncts(const Condition& c) {
    std::vector<const Condition*> out;
    collect_conjuncts(c, out);
    return out;
}

/// Entity lookup keys bound by a condition, plus the residual filter.
/// A key is bound by a `search_key = <literal>` conjunct, or by an OR whose
/// branches are all such comparisons (the shape join expansion produces).
struct SearchKeySplit {
    std::vector<std::string> keys;  // first-occurrence order, deduplicated
    std::optional<Condition> residual;
};

inline SearchKeySplit split_search_keys(const std::optional<Condition>& cond) {
    SearchKeySplit split;
    if (!cond) return split;

    auto is_key_eq = [](const Condition& c) {
        return c.kind == Condition::Kind::Cmp && c.attr == kAttrSearchKey && c.op == CmpOp::Eq &&
               !is_null(c.literal);
    };
    auto add_key = [&split](const Value& v) {
        std::string key = to_display(v);
        for (const std::string& existing : split.keys)
            if (existing == key) return;
        split.keys.push_back(std::move(key));
    };

    std::vector<Condition> rest;
    for (const Condition* c : collect_conjuncts(*cond)) {
        if (is_key_eq(*c)) {
            add_key(c->literal);
            continue;
        }
        if (c->kind == Condition::Kind::Or && !c->children.empty()) {
            bool all_keys = true;
            for (const Condition& child : c->children)
                if (!is_key_eq(child)) {
                    all_keys = false;
                    break;
                }
            if (all_keys) {
                for (const Condition& child : c->children) add_key(child.literal);
                continue;
            }
        }
        rest.push_back(*c);
    }
    if (!rest.empty()) split.residual = Condition::conj(std::move(rest));
    return split;
}

/// Literal values in depth-first order (nulls skipped). Document retrieval
/// builds its query text from these.
inline void collect_literal_values(const Condition& c, std::vector<std::string>& out) {
    if (c.kind == Condition::Kind::Cmp) {
        if (!is_null(c.literal)) out.push_back(to_display(c.literal));
        return;
    }
    for (const Condition& child : c.children) collect_literal_values(child, out);
}

}  // namespace errag
