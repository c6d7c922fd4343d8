// executor.hpp - cardinality estimation, join-condition expansion, and
// greedy cardinality-first execution of a GET/JOIN graph.
//
// Execution keeps a priority queue of components keyed by cardinality
// (estimated for pending GETs, actual row counts once materialized). Each
// step pops the smallest component, runs or merges it (pushing an OR of the
// bound values into the pending side's condition), reinserts the merged
// component with its actual count, and re-estimates the neighbors, recording
// the best join partner whenever an estimate drops. Join semantics equal
// filtering the Cartesian product of the member sets by every edge
// predicate, so the result is independent of the greedy order.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errag/catalog.hpp"
#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/llm_gateway.hpp"

namespace errag {

//============================================================================
// Cardinality
//============================================================================

/// Finite count or infinite; the priority key of the execution queue.
/// Total order: Finite(a) < Finite(b) iff a < b, and every Finite < Infinite.
class Cardinality {
public:
    static Cardinality finite(std::uint64_t n) { return Cardinality(false, n); }
    static Cardinality infinite() { return Cardinality(true, 0); }

    bool is_infinite() const { return infinite_; }
    std::uint64_t count() const { return count_; }

    friend bool operator==(const Cardinality& a, const Cardinality& b) {
        return a.infinite_ == b.infinite_ && (a.infinite_ || a.count_ == b.count_);
    }
    friend bool operator<(const Cardinality& a, const Cardinality& b) {
        if (a.infinite_) return false;
        if (b.infinite_) return true;
        return a.count_ < b.count_;
    }
    friend bool operator<=(const Cardinality& a, const Cardinality& b) { return a < b || a == b; }

    std::string to_string() const { return infinite_ ? "inf" : std::to_string(count_); }

private:
    Cardinality(bool inf, std::uint64_t n) : infinite_(inf), count_(n) {}
    bool infinite_;
    std::uint64_t count_;
};

//============================================================================
// Graph
//============================================================================

/// Edge between two GET nodes, identified by alias. The chain DSL yields a
/// path; the executor accepts any connected graph built programmatically.
struct ExecutionEdge {
    std::string left;
    std::string right;
    JoinEdge spec;
};

struct ExecutionGraph {
    std::vector<GetNode> nodes;
    std::vector<ExecutionEdge> edges;

    static ExecutionGraph from_chain(const ApiChain& chain) {
        ExecutionGraph g;
        g.nodes = chain.nodes;
        for (std::size_t i = 0; i < chain.edges.size(); ++i)
            g.edges.push_back(
                {chain.nodes[i].alias, chain.nodes[i + 1].alias, chain.edges[i]});
        return g;
    }

    const GetNode* find_node(const std::string& alias) const {
        for (const GetNode& n : nodes)
            if (n.alias == alias) return &n;
        return nullptr;
    }
};

/// Planner view of one GET: its current estimate and the recorded partner
/// (alias) whose results would make it cheapest to execute.
struct PlanNode {
    GetNode node;
    Cardinality est = Cardinality::infinite();
    std::optional<std::string> join_hint;
};

//============================================================================
// Cardinality estimation
//============================================================================

namespace detail {

inline std::optional<std::string> lenient_table_of(const GetNode& node) {
    if (!node.condition) return std::nullopt;
    for (const Condition* c : collect_conjuncts(*node.condition))
        if (c->kind == Condition::Kind::Cmp && c->attr == "table" && c->op == CmpOp::Eq &&
            std::holds_alternative<std::string>(c->literal))
            return std::get<std::string>(c->literal);
    return std::nullopt;
}

inline double clamp01(double x) { return x < 0 ? 0 : (x > 1 ? 1 : x); }

/// Per-predicate selectivity against table statistics: equality 1/distinct,
/// ranges the covered fraction of [min,max] under a uniform assumption,
/// pattern ops 0.1, AND multiplies, OR adds (clamped), NOT complements.
/// Missing statistics mean selectivity 1; a null literal never matches.
inline double selectivity(const Condition& c, const TableStats& stats) {
    switch (c.kind) {
        case Condition::Kind::And: {
            double s = 1.0;
            for (const Condition& child : c.children) s *= selectivity(child, stats);
            return s;
        }
        case Condition::Kind::Or: {
            double s = 0.0;
            for (const Condition& child : c.children) s += selectivity(child, stats);
            return clamp01(s);
        }
        case Condition::Kind::Not:
            return clamp01(1.0 - selectivity(c.children.front(), stats));
        case Condition::Kind::Cmp: {
            if (c.attr == "table") return 1.0;
            if (is_null(c.literal)) return 0.0;
            const ColumnStats* col = stats.column(c.attr);
            switch (c.op) {
                case CmpOp::Eq:
                    if (col && col->distinct_count && *col->distinct_count > 0)
                        return 1.0 / double(*col->distinct_count);
                    return 1.0;
                case CmpOp::Like:
                case CmpOp::Fuzzy:
                    return 0.1;
                case CmpOp::Lt:
                case CmpOp::Le:
                case CmpOp::Gt:
                case CmpOp::Ge: {
                    auto v = as_number(c.literal);
                    if (!v && std::holds_alternative<std::string>(c.literal))
                        v = parse_number(std::get<std::string>(c.literal));
                    if (!col || !col->min || !col->max || !v) return 1.0;
                    double span = *col->max - *col->min;
                    if (span <= 0) {
                        double point = *col->min;
                        bool sat = c.op == CmpOp::Lt   ? point < *v
                                   : c.op == CmpOp::Le ? point <= *v
                                   : c.op == CmpOp::Gt ? point > *v
                                                       : point >= *v;
                        return sat ? 1.0 : 0.0;
                    }
                    if (c.op == CmpOp::Lt || c.op == CmpOp::Le)
                        return clamp01((*v - *col->min) / span);
                    return clamp01((*col->max - *v) / span);
                }
                case CmpOp::Ne:
                    return 1.0;
            }
            return 1.0;
        }
    }
    return 1.0;
}

}  // namespace detail

/// Estimated result size of one GET. Relational nodes use the selected
/// table's row count scaled by predicate selectivity; knowledge-graph and
/// document nodes are Finite(#bound search keys) or Infinite; SELF is 1.
inline Cardinality estimate_cardinality(const GetNode& node, const Catalog& catalog) {
    const SourceDescriptor& src = catalog.source(node.source);
    switch (src.kind) {
        case SourceKind::Self:
            return Cardinality::finite(1);
        case SourceKind::KnowledgeGraph:
        case SourceKind::Documents: {
            SearchKeySplit split = split_search_keys(node.condition);
            if (split.keys.empty()) return Cardinality::infinite();
            return Cardinality::finite(split.keys.size());
        }
        case SourceKind::Relational: {
            auto table = detail::lenient_table_of(node);
            if (!table) return Cardinality::infinite();
            const TableStats* stats = catalog.table_stats(node.source, *table);
            if (!stats) return Cardinality::infinite();
            double sel = 1.0;
            if (node.condition) sel = detail::selectivity(*node.condition, *stats);
            double est = double(stats->row_count) * sel;
            if (est < 0) est = 0;
            return Cardinality::finite(static_cast<std::uint64_t>(std::llround(est)));
        }
    }
    return Cardinality::infinite();
}

namespace detail {

inline std::optional<std::uint64_t> column_distinct(const GetNode& node, const std::string& attr,
                                                    const Catalog& catalog) {
    if (!catalog.has_source(node.source)) return std::nullopt;
    if (catalog.source(node.source).kind != SourceKind::Relational) return std::nullopt;
    auto table = lenient_table_of(node);
    if (!table) return std::nullopt;
    const TableStats* stats = catalog.table_stats(node.source, *table);
    if (!stats) return std::nullopt;
    const ColumnStats* col = stats->column(attr);
    if (!col || !col->distinct_count) return std::nullopt;
    return *col->distinct_count;
}

inline std::optional<std::uint64_t> table_rows(const GetNode& node, const Catalog& catalog) {
    auto table = lenient_table_of(node);
    if (!table || !catalog.has_source(node.source)) return std::nullopt;
    if (catalog.source(node.source).kind != SourceKind::Relational) return std::nullopt;
    const TableStats* stats = catalog.table_stats(node.source, *table);
    if (!stats) return std::nullopt;
    return stats->row_count;
}

inline Cardinality saturating_product(Cardinality a, Cardinality b) {
    if (a.is_infinite() || b.is_infinite()) return Cardinality::infinite();
    long double p = static_cast<long double>(a.count()) * static_cast<long double>(b.count());
    if (p > 1e18L) return Cardinality::finite(static_cast<std::uint64_t>(1e18));
    return Cardinality::finite(static_cast<std::uint64_t>(p));
}

/// Direction-aware join estimate; `toward_right` says the neighbor sits on
/// the edge's right side.
inline Cardinality estimate_join_impl(Cardinality bound_card, const GetNode& bound_node,
                                      const GetNode& neighbor_node, Cardinality neighbor_card,
                                      const JoinEdge& edge, bool toward_right,
                                      const Catalog& catalog) {
    const std::string& neighbor_attr = toward_right ? edge.right_attr : edge.left_attr;
    const std::string& bound_attr = toward_right ? edge.left_attr : edge.right_attr;

    if (edge.kind == JoinEdge::Kind::SemanticTriple) {
        // Extraction runs from the left attribute's text, so only a bound
        // left side pins the right; the reverse direction stays unbound.
        if (toward_right) return bound_card;
        if (neighbor_card.is_infinite()) return Cardinality::infinite();
        return saturating_product(bound_card, neighbor_card);
    }

    if (edge.op == CmpOp::Eq && neighbor_attr == kAttrSearchKey) return bound_card;

    if (edge.op == CmpOp::Eq) {
        auto d_bound = column_distinct(bound_node, bound_attr, catalog);
        auto d_neighbor = column_distinct(neighbor_node, neighbor_attr, catalog);
        Cardinality n_card = neighbor_card;
        if (n_card.is_infinite()) {
            if (auto rows = table_rows(neighbor_node, catalog))
                n_card = Cardinality::finite(*rows);
        }
        if (d_bound && d_neighbor && !bound_card.is_infinite() && !n_card.is_infinite()) {
            std::uint64_t d = std::max<std::uint64_t>({*d_bound, *d_neighbor, 1});
            long double est = static_cast<long double>(bound_card.count()) *
                              static_cast<long double>(n_card.count()) / d;
            if (est > 1e18L) return Cardinality::finite(static_cast<std::uint64_t>(1e18));
            return Cardinality::finite(static_cast<std::uint64_t>(std::llroundl(est)));
        }
        neighbor_card = n_card;
    }

    if (neighbor_card.is_infinite()) return Cardinality::infinite();
    return saturating_product(bound_card, neighbor_card);
}

}  // namespace detail

/// Estimated size of joining an already-bound node into its neighbor along
/// `edge`. Mirrors the queue update in the greedy loop.
inline Cardinality estimate_join(const PlanNode& bound, const PlanNode& neighbor,
                                 const ExecutionEdge& edge, const Catalog& catalog) {
    const bool bound_left = bound.node.alias == edge.left && neighbor.node.alias == edge.right;
    const bool bound_right = bound.node.alias == edge.right && neighbor.node.alias == edge.left;
    if (!bound_left && !bound_right)
        throw Error(Errc::EdgeMismatch, "edge does not link " + bound.node.alias + " and " +
                                            neighbor.node.alias);
    return detail::estimate_join_impl(bound.est, bound.node, neighbor.node, neighbor.est,
                                      edge.spec, bound_left, catalog);
}

//============================================================================
// Join-condition expansion
//============================================================================

/// Cache of semantic extractions, keyed by (context text, relation). Filled
/// during expansion and reused by the merge filter so each context is
/// extracted once.
using ExtractionCache = std::map<std::pair<std::string, std::string>, std::optional<std::string>>;

namespace detail {

inline CmpOp converse_op(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return CmpOp::Gt;
        case CmpOp::Le: return CmpOp::Ge;
        case CmpOp::Gt: return CmpOp::Lt;
        case CmpOp::Ge: return CmpOp::Le;
        default: return op;  // =, !=, LIKE, ~ keep their spelling
    }
}

inline std::optional<std::string> cached_extraction(ExtractionCache& cache, Gateway& gateway,
                                                    const std::string& context,
                                                    const std::string& relation,
                                                    const std::string& query) {
    auto key = std::make_pair(context, relation);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::optional<std::string> value =
        context.empty() ? std::nullopt : gateway.extract_relation(context, relation, query);
    cache.emplace(std::move(key), value);
    return value;
}

struct Expansion {
    std::optional<Condition> condition;  // nullopt: not pushable in this direction
};

/// Builds the OR condition a bound side pushes into its pending neighbor.
/// `bound_is_left` orients the predicate; ordered operators flip to their
/// converse so the surface meaning `left op right` is preserved.
inline Expansion expand_join(const EntitySet& bound, const ExecutionEdge& edge,
                             bool bound_is_left, Gateway& gateway, ExtractionCache& cache,
                             std::size_t max_fanout, const std::string& query) {
    const std::string bound_alias = bound_is_left ? edge.left : edge.right;
    const std::string target_attr = bound_is_left ? edge.spec.right_attr : edge.spec.left_attr;
    const std::string bound_key =
        bound_alias + "." + (bound_is_left ? edge.spec.left_attr : edge.spec.right_attr);

    // Extraction contexts and LIKE/~ patterns come from the left side, so
    // these edges only push left-to-right; the merge filter still applies
    // the predicate when execution binds the right side first.
    const bool left_sourced = edge.spec.kind == JoinEdge::Kind::SemanticTriple ||
                              edge.spec.op == CmpOp::Like || edge.spec.op == CmpOp::Fuzzy;
    if (left_sourced && !bound_is_left) return {};

    std::vector<Value> values;
    std::vector<std::string> seen;
    for (const Record& rec : bound.records) {
        auto it = rec.find(bound_key);
        if (it == rec.end())
            throw Error(Errc::MissingJoinAttribute, "records lack '" + bound_key + "'");
        if (is_null(it->second)) continue;
        std::string display = to_display(it->second);
        if (std::find(seen.begin(), seen.end(), display) != seen.end()) continue;
        seen.push_back(display);
        values.push_back(it->second);
        if (values.size() > max_fanout)
            throw Error(Errc::JoinFanoutExceeded,
                        "join expansion exceeds " + std::to_string(max_fanout) + " values");
    }

    if (edge.spec.kind == JoinEdge::Kind::SemanticTriple) {
        std::vector<Condition> cmps;
        std::vector<std::string> extracted_seen;
        bool any_extracted = false;
        for (const Value& v : values) {
            auto extracted =
                cached_extraction(cache, gateway, to_display(v), edge.spec.relation, query);
            if (!extracted) continue;
            any_extracted = true;
            if (std::find(extracted_seen.begin(), extracted_seen.end(), *extracted) !=
                extracted_seen.end())
                continue;
            extracted_seen.push_back(*extracted);
            cmps.push_back(Condition::cmp(target_attr, CmpOp::Eq, Value{*extracted}));
        }
        if (!any_extracted)
            throw Error(Errc::ExtractionFailed,
                        "relation '" + edge.spec.relation + "' extracted from no record");
        return {Condition::disj(std::move(cmps))};
    }

    // Ordered comparisons are only pushed when every bound value is plain
    // text: an engine comparing a pushed number (or digit string) against a
    // text column lexicographically could drop pairs the join predicate
    // keeps, and a pushed condition must over-approximate. Unpushed edges
    // run the neighbor on its own condition; the merge filter decides.
    if (edge.spec.op == CmpOp::Lt || edge.spec.op == CmpOp::Le || edge.spec.op == CmpOp::Gt ||
        edge.spec.op == CmpOp::Ge) {
        for (const Value& v : values) {
            if (as_number(v)) return {};
            if (parse_number(std::get<std::string>(v))) return {};
        }
    }

    CmpOp push_op = bound_is_left ? converse_op(edge.spec.op) : edge.spec.op;
    std::vector<Condition> cmps;
    cmps.reserve(values.size());
    for (const Value& v : values) cmps.push_back(Condition::cmp(target_attr, push_op, v));
    if (cmps.empty()) {
        Condition never;
        never.kind = Condition::Kind::Or;  // all bound values were null
        return {never};
    }
    return {Condition::disj(std::move(cmps))};
}

}  // namespace detail

/// Expands a JOIN edge into the filter its bound left side imposes on the
/// right GET: an OR of one comparison per distinct bound value (semantic
/// edges go through the gateway's relation extraction first).
inline Condition expand_join_condition(const EntitySet& left_result, const ExecutionEdge& edge,
                                       Gateway& gateway, std::size_t max_fanout = 200,
                                       const std::string& query = {}) {
    ExtractionCache cache;
    detail::Expansion exp =
        detail::expand_join(left_result, edge, /*bound_is_left=*/true, gateway, cache,
                            max_fanout, query);
    if (!exp.condition)
        throw Error(Errc::EdgeMismatch, "edge cannot expand from its left side");
    return *exp.condition;
}

//============================================================================
// Execution
//============================================================================

/// Adapter executing one GET against a concrete source. Throwing adapters
/// surface as AdapterError tagged with the node alias.
using SourceAdapter = std::function<EntitySet(const GetNode&)>;
using AdapterMap = std::map<std::string, SourceAdapter>;

struct ExecConfig {
    std::size_t max_rows = 10000;
    std::size_t max_fanout = 200;
    std::function<void(const std::string&)> trace;
    bool parallel_prefetch = false;
    std::string query_context;  // passed to gateway extraction calls
};

namespace detail {

struct Component {
    std::set<std::string> aliases;
    std::vector<Record> records;
    bool materialized = false;
    std::size_t node_idx = 0;  // pending only
    Cardinality key = Cardinality::infinite();
    struct Hint {
        std::shared_ptr<Component> partner;
        std::size_t edge_idx = 0;
    };
    std::optional<Hint> hint;
    std::shared_ptr<Component> absorbed_into;

    const std::string& min_alias() const { return *aliases.begin(); }
    std::string display_name() const {
        std::string out;
        for (const std::string& a : aliases) {
            if (!out.empty()) out += '+';
            out += a;
        }
        return out;
    }
};

using ComponentPtr = std::shared_ptr<Component>;

inline ComponentPtr resolve_component(ComponentPtr c) {
    while (c && c->absorbed_into) c = c->absorbed_into;
    return c;
}

inline bool like_match_ci(std::string_view hay, std::string_view pattern) {
    // SQL LIKE: % any run, _ single char; ASCII case-insensitive.
    std::size_t h = 0, p = 0;
    std::size_t star_p = std::string_view::npos, star_h = 0;
    auto lower = [](char c) {
        return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    };
    while (h < hay.size()) {
        if (p < pattern.size() &&
            (pattern[p] == '_' || lower(pattern[p]) == lower(hay[h]))) {
            ++p;
            ++h;
        } else if (p < pattern.size() && pattern[p] == '%') {
            star_p = p++;
            star_h = h;
        } else if (star_p != std::string_view::npos) {
            p = star_p + 1;
            h = ++star_h;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '%') ++p;
    return p == pattern.size();
}

/// Edge predicate over a joined pair, oriented by the edge's declared
/// left/right sides regardless of execution order.
inline bool edge_predicate(const ExecutionEdge& edge, const Record& left_rec,
                           const Record& right_rec, Gateway& gateway, ExtractionCache& cache,
                           const std::string& query) {
    auto lval = left_rec.find(edge.left + "." + edge.spec.left_attr);
    auto rval = right_rec.find(edge.right + "." + edge.spec.right_attr);
    if (lval == left_rec.end())
        throw Error(Errc::MissingJoinAttribute,
                    "records lack '" + edge.left + "." + edge.spec.left_attr + "'");
    if (rval == right_rec.end())
        throw Error(Errc::MissingJoinAttribute,
                    "records lack '" + edge.right + "." + edge.spec.right_attr + "'");
    const Value& l = lval->second;
    const Value& r = rval->second;
    if (is_null(l) || is_null(r)) return false;

    if (edge.spec.kind == JoinEdge::Kind::SemanticTriple) {
        auto extracted =
            cached_extraction(cache, gateway, to_display(l), edge.spec.relation, query);
        return extracted && *extracted == to_display(r);
    }
    switch (edge.spec.op) {
        case CmpOp::Like:
            return like_match_ci(to_display(r), to_display(l));
        case CmpOp::Fuzzy: {
            std::string hay = fold_ascii_lower(to_display(r));
            return hay.find(fold_ascii_lower(to_display(l))) != std::string::npos;
        }
        default: {
            int cmp = 0;
            if (compare_values(l, r, cmp) != Tri::True) return false;
            switch (edge.spec.op) {
                case CmpOp::Eq: return cmp == 0;
                case CmpOp::Ne: return cmp != 0;
                case CmpOp::Lt: return cmp < 0;
                case CmpOp::Le: return cmp <= 0;
                case CmpOp::Gt: return cmp > 0;
                case CmpOp::Ge: return cmp >= 0;
                default: return false;
            }
        }
    }
}

}  // namespace detail

/// Greedy executor for one GET/JOIN graph.
class Executor {
public:
    Executor(const Catalog& catalog, AdapterMap adapters, Gateway& gateway, ExecConfig config = {})
        : catalog_(catalog), adapters_(std::move(adapters)), gateway_(gateway),
          config_(std::move(config)) {}

    EntitySet execute(const ExecutionGraph& graph) {
        validate(graph);
        graph_ = &graph;
        cache_.clear();

        // Seed one component per GET with its base estimate.
        queue_.clear();
        bool any_finite = false;
        for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
            auto comp = std::make_shared<detail::Component>();
            comp->aliases.insert(graph.nodes[i].alias);
            comp->node_idx = i;
            comp->key = estimate_cardinality(graph.nodes[i], catalog_);
            any_finite = any_finite || !comp->key.is_infinite();
            queue_.push_back(std::move(comp));
        }
        if (!any_finite)
            throw Error(Errc::UnanchoredPlan, "no GET in the graph has a finite estimate");

        if (config_.parallel_prefetch) prefetch_finite_leaves();

        while (true) {
            if (queue_.size() == 1 && queue_.front()->materialized) {
                EntitySet out;
                out.records = queue_.front()->records;
                out.provenance = queue_.front()->aliases;
                return out;
            }
            step();
        }
    }

private:
    const Catalog& catalog_;
    AdapterMap adapters_;
    Gateway& gateway_;
    ExecConfig config_;
    const ExecutionGraph* graph_ = nullptr;
    std::vector<detail::ComponentPtr> queue_;
    ExtractionCache cache_;

    void validate(const ExecutionGraph& graph) const {
        if (graph.nodes.empty()) throw Error(Errc::ValidationError, "graph has no nodes");
        std::set<std::string> aliases;
        for (const GetNode& n : graph.nodes)
            if (!aliases.insert(n.alias).second)
                throw Error(Errc::ValidationError, "duplicate alias '" + n.alias + "'");
        std::map<std::string, std::string> parent;
        for (const std::string& a : aliases) parent[a] = a;
        std::function<std::string(const std::string&)> find = [&](const std::string& x) {
            std::string r = x;
            while (parent[r] != r) r = parent[r];
            return r;
        };
        for (const ExecutionEdge& e : graph.edges) {
            if (!aliases.count(e.left) || !aliases.count(e.right) || e.left == e.right)
                throw Error(Errc::EdgeMismatch,
                            "edge " + e.left + "-" + e.right + " does not link two graph nodes");
            parent[find(e.left)] = find(e.right);
        }
        std::string root = find(*aliases.begin());
        for (const std::string& a : aliases)
            if (find(a) != root)
                throw Error(Errc::ValidationError, "graph is not connected at '" + a + "'");
    }

    detail::ComponentPtr pop_min() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < queue_.size(); ++i) {
            const auto& a = queue_[i];
            const auto& b = queue_[best];
            if (a->key < b->key || (a->key == b->key && a->min_alias() < b->min_alias()))
                best = i;
        }
        detail::ComponentPtr v = queue_[best];
        queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(best));
        for (const auto& other : queue_)
            if (other->key < v->key)
                throw std::logic_error("greedy invariant violated: popped key exceeds a queued key");
        return v;
    }

    void remove_from_queue(const detail::ComponentPtr& c) {
        queue_.erase(std::remove(queue_.begin(), queue_.end(), c), queue_.end());
    }

    void step() {
        detail::ComponentPtr v = pop_min();
        std::string line = "POP " + v->display_name() + " card=" + v->key.to_string();

        detail::ComponentPtr merged;
        if (!v->materialized) {
            detail::ComponentPtr partner =
                v->hint ? detail::resolve_component(v->hint->partner) : nullptr;
            if (!partner && v->key.is_infinite())
                throw Error(Errc::UnanchoredPlan,
                            "node " + v->display_name() + " is unbound and infinite");
            merged = run_pending(v, partner, v->hint ? std::optional<std::size_t>(v->hint->edge_idx)
                                                     : std::nullopt,
                                 line);
        } else if (v->hint) {
            detail::ComponentPtr partner = detail::resolve_component(v->hint->partner);
            if (partner == v)
                throw Error(Errc::PlanConflict,
                            "join hint of " + v->display_name() + " resolved to itself");
            remove_from_queue(partner);
            merged = merge_components(v, partner, line);
        } else {
            // A settled result popped with no recorded partner claims its
            // cheapest dependent (or neighbor) so the loop always advances.
            detail::ComponentPtr claimed = pick_claim(v);
            if (!claimed)
                throw Error(Errc::PlanConflict,
                            "component " + v->display_name() + " has no joinable neighbor");
            remove_from_queue(claimed);
            line += " | CLAIM " + claimed->display_name();
            if (claimed->materialized) {
                merged = merge_components(v, claimed, line);
            } else {
                std::optional<std::size_t> edge_idx;
                if (claimed->hint && detail::resolve_component(claimed->hint->partner) == v)
                    edge_idx = claimed->hint->edge_idx;
                else
                    edge_idx = first_connecting_edge(*v, *claimed);
                merged = run_pending(claimed, v, edge_idx, line);
            }
        }

        queue_.push_back(merged);
        update_neighbors(merged, line);
        if (config_.trace) config_.trace(line);
    }

    void prefetch_finite_leaves() {
        std::vector<std::pair<detail::ComponentPtr, std::future<EntitySet>>> jobs;
        for (auto& comp : queue_) {
            if (comp->materialized || comp->key.is_infinite()) continue;
            const GetNode& node = graph_->nodes[comp->node_idx];
            jobs.emplace_back(comp, std::async(std::launch::async, [this, &node] {
                                  return fetch(node, node.condition);
                              }));
        }
        for (auto& [comp, fut] : jobs) {
            EntitySet rows = fut.get();
            comp->records = namespace_records(graph_->nodes[comp->node_idx].alias, rows);
            comp->materialized = true;
            comp->key = Cardinality::finite(comp->records.size());
            if (config_.trace)
                config_.trace("PREFETCH " + comp->display_name() +
                              " rows=" + std::to_string(comp->records.size()));
        }
    }

    std::optional<std::size_t> first_connecting_edge(const detail::Component& a,
                                                     const detail::Component& b) const {
        for (std::size_t i = 0; i < graph_->edges.size(); ++i) {
            const ExecutionEdge& e = graph_->edges[i];
            if ((a.aliases.count(e.left) && b.aliases.count(e.right)) ||
                (a.aliases.count(e.right) && b.aliases.count(e.left)))
                return i;
        }
        return std::nullopt;
    }

    detail::ComponentPtr pick_claim(const detail::ComponentPtr& v) {
        detail::ComponentPtr best;
        auto better = [&](const detail::ComponentPtr& cand) {
            return !best || cand->key < best->key ||
                   (cand->key == best->key && cand->min_alias() < best->min_alias());
        };
        for (const auto& cand : queue_) {
            if (cand->hint && detail::resolve_component(cand->hint->partner) == v && better(cand))
                best = cand;
        }
        if (best) return best;
        for (const auto& cand : queue_) {
            if (first_connecting_edge(*v, *cand) && better(cand)) best = cand;
        }
        return best;
    }

    EntitySet fetch(const GetNode& node, const std::optional<Condition>& condition) {
        auto it = adapters_.find(node.source);
        if (it == adapters_.end())
            throw Error(Errc::AdapterError, "no adapter for source '" + node.source + "'",
                        node.alias);
        GetNode effective = node;
        effective.condition = condition;
        EntitySet rows;
        try {
            rows = it->second(effective);
        } catch (const Error& e) {
            throw Error(Errc::AdapterError, e.what(), node.alias);
        } catch (const std::exception& e) {
            throw Error(Errc::AdapterError, e.what(), node.alias);
        }
        if (rows.records.size() > config_.max_rows)
            throw Error(Errc::ResultTooLarge, "GET " + node.alias + " returned " +
                                                  std::to_string(rows.records.size()) + " rows");
        return rows;
    }

    static std::vector<Record> namespace_records(const std::string& alias, const EntitySet& rows) {
        std::vector<Record> out;
        out.reserve(rows.records.size());
        for (const Record& rec : rows.records) {
            Record namespaced;
            for (const auto& [key, value] : rec) namespaced[alias + "." + key] = value;
            out.push_back(std::move(namespaced));
        }
        return out;
    }

    /// Executes a pending node's GET, pushing the partner's bound values
    /// through the hint edge when a partner exists, then merges.
    detail::ComponentPtr run_pending(const detail::ComponentPtr& pending,
                                     const detail::ComponentPtr& partner,
                                     std::optional<std::size_t> edge_idx, std::string& line) {
        const GetNode& node = graph_->nodes[pending->node_idx];
        std::optional<Condition> effective = node.condition;

        bool expanded = false;
        if (partner && edge_idx) {
            const ExecutionEdge& edge = graph_->edges[*edge_idx];
            bool partner_is_left = partner->aliases.count(edge.left) > 0;
            EntitySet bound;
            bound.records = partner->records;
            detail::Expansion exp =
                detail::expand_join(bound, edge, partner_is_left, gateway_, cache_,
                                    config_.max_fanout, config_.query_context);
            if (exp.condition) {
                expanded = true;
                if (effective)
                    effective = Condition::conj({*effective, *exp.condition});
                else
                    effective = exp.condition;
            }
        }
        // An infinite GET is only runnable once a join binds it.
        if (pending->key.is_infinite() && !expanded)
            throw Error(Errc::UnanchoredPlan,
                        "node " + node.alias + " stays unbound (no expandable join edge)");

        EntitySet rows = fetch(node, effective);
        line += " | EXEC rows=" + std::to_string(rows.records.size());
        std::vector<Record> namespaced = namespace_records(node.alias, rows);

        auto fresh = std::make_shared<detail::Component>();
        fresh->aliases.insert(node.alias);
        fresh->records = std::move(namespaced);
        fresh->materialized = true;
        fresh->key = Cardinality::finite(fresh->records.size());
        pending->absorbed_into = fresh;

        if (!partner) return fresh;
        remove_from_queue(partner);
        return merge_components(fresh, partner, line);
    }

    /// Filters the Cartesian product of two materialized components by every
    /// edge that connects them. The component holding the smallest alias
    /// iterates in the outer loop, so record order is deterministic.
    detail::ComponentPtr merge_components(const detail::ComponentPtr& x,
                                          const detail::ComponentPtr& y, std::string& line) {
        const detail::ComponentPtr& outer = x->min_alias() <= y->min_alias() ? x : y;
        const detail::ComponentPtr& inner = outer == x ? y : x;

        std::vector<const ExecutionEdge*> connecting;
        for (const ExecutionEdge& e : graph_->edges) {
            bool lo = outer->aliases.count(e.left), ro = outer->aliases.count(e.right);
            bool li = inner->aliases.count(e.left), ri = inner->aliases.count(e.right);
            if ((lo && ri) || (ro && li)) connecting.push_back(&e);
        }

        auto merged = std::make_shared<detail::Component>();
        merged->aliases = outer->aliases;
        merged->aliases.insert(inner->aliases.begin(), inner->aliases.end());
        merged->materialized = true;

        for (const Record& a : outer->records) {
            for (const Record& b : inner->records) {
                bool keep = true;
                for (const ExecutionEdge* e : connecting) {
                    const Record& left_rec = outer->aliases.count(e->left) ? a : b;
                    const Record& right_rec = outer->aliases.count(e->right) ? a : b;
                    if (!detail::edge_predicate(*e, left_rec, right_rec, gateway_, cache_,
                                                config_.query_context)) {
                        keep = false;
                        break;
                    }
                }
                if (!keep) continue;
                Record rec = a;
                rec.insert(b.begin(), b.end());
                merged->records.push_back(std::move(rec));
            }
        }
        merged->key = Cardinality::finite(merged->records.size());
        x->absorbed_into = merged;
        y->absorbed_into = merged;
        if (line.find(" | EXEC ") == std::string::npos)
            line += " | EXEC rows=" + std::to_string(merged->records.size());
        return merged;
    }

    /// Re-estimates every component adjacent to the freshly merged one and
    /// records it as the join hint wherever the estimate drops.
    void update_neighbors(const detail::ComponentPtr& merged, std::string& line) {
        for (auto& neighbor : queue_) {
            if (neighbor == merged) continue;
            std::optional<Cardinality> best;
            std::optional<std::size_t> best_edge;
            for (std::size_t i = 0; i < graph_->edges.size(); ++i) {
                const ExecutionEdge& e = graph_->edges[i];
                bool merged_left =
                    merged->aliases.count(e.left) && neighbor->aliases.count(e.right);
                bool merged_right =
                    merged->aliases.count(e.right) && neighbor->aliases.count(e.left);
                if (!merged_left && !merged_right) continue;
                const GetNode* bound_node =
                    graph_->find_node(merged_left ? e.left : e.right);
                const GetNode* neighbor_node =
                    graph_->find_node(merged_left ? e.right : e.left);
                Cardinality c = detail::estimate_join_impl(merged->key, *bound_node,
                                                           *neighbor_node, neighbor->key, e.spec,
                                                           merged_left, catalog_);
                if (!best || c < *best) {
                    best = c;
                    best_edge = i;
                }
            }
            if (best && *best < neighbor->key) {
                neighbor->key = *best;
                neighbor->hint = detail::Component::Hint{merged, *best_edge};
                line += " | UPDATE neighbor=" + neighbor->display_name() +
                        " card=" + best->to_string();
            }
        }
    }
};

/// One-shot convenience wrapper.
inline EntitySet execute(const ExecutionGraph& graph, const Catalog& catalog,
                         const AdapterMap& adapters, Gateway& gateway, ExecConfig config = {}) {
    Executor ex(catalog, adapters, gateway, std::move(config));
    return ex.execute(graph);
}

}  // namespace errag
