// Test-only random generators: chains for round-trip fuzzing, typed tables
// and condition trees for translation soundness, small graphs for the
// plan-equivalence oracle.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "errag/catalog.hpp"
#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/executor.hpp"

#include "support/condition_eval.hpp"

namespace errag::testing {

using Rng = std::mt19937;

inline int rand_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}
inline double rand_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline bool chance(Rng& rng, double p) { return rand_real(rng, 0, 1) < p; }

template <typename T>
inline const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[static_cast<std::size_t>(rand_int(rng, 0, int(pool.size()) - 1))];
}

//============================================================================
// Random chains (round-trip fuzzing)
//============================================================================

inline std::string random_ident(Rng& rng) {
    static const std::vector<std::string> pool = {
        "alpha", "beta",  "gamma", "delta", "price", "date", "symbol", "name",
        "year",  "title", "score", "x1",    "_tmp",  "valUe", "k9",    "content",
        "chunk", "search_key"};
    return pick(rng, pool);
}

inline std::string random_source(Rng& rng) {
    static const std::vector<std::string> pool = {"DB_Finance", "WIKI", "WEB", "DB_movie",
                                                  "SELF", "Src_1"};
    return pick(rng, pool);
}

inline std::string random_string_literal(Rng& rng) {
    static const std::string alphabet =
        "abcXYZ 09_-\\\"\n\t'%{}();,.~=<>!\xc3\xa9";  // includes escapes and UTF-8 bytes
    std::string out;
    int len = rand_int(rng, 0, 12);
    for (int i = 0; i < len; ++i)
        out.push_back(alphabet[static_cast<std::size_t>(
            rand_int(rng, 0, int(alphabet.size()) - 1))]);
    return out;
}

inline Value random_literal(Rng& rng) {
    switch (rand_int(rng, 0, 5)) {
        case 0: return Value{double(rand_int(rng, -1000, 1000))};
        case 1: return Value{rand_real(rng, -1e6, 1e6)};
        case 2: return Value{rand_real(rng, -1, 1) * 1e-4};
        case 3: return Value{};  // null
        default: return Value{random_string_literal(rng)};
    }
}

inline CmpOp random_op(Rng& rng) {
    static const CmpOp ops[] = {CmpOp::Eq, CmpOp::Ne,   CmpOp::Lt,  CmpOp::Le,
                                CmpOp::Gt, CmpOp::Ge,   CmpOp::Like, CmpOp::Fuzzy};
    return ops[rand_int(rng, 0, 7)];
}

inline Condition random_condition(Rng& rng, int depth) {
    int kind = depth <= 0 ? 3 : rand_int(rng, 0, 3);
    switch (kind) {
        case 0: {  // And
            std::vector<Condition> parts;
            int n = rand_int(rng, 2, 3);
            for (int i = 0; i < n; ++i) parts.push_back(random_condition(rng, depth - 1));
            return Condition::conj(std::move(parts));
        }
        case 1: {  // Or
            std::vector<Condition> parts;
            int n = rand_int(rng, 2, 3);
            for (int i = 0; i < n; ++i) parts.push_back(random_condition(rng, depth - 1));
            return Condition::disj(std::move(parts));
        }
        case 2:
            return Condition::negate(random_condition(rng, depth - 1));
        default:
            return Condition::cmp(random_ident(rng), random_op(rng), random_literal(rng));
    }
}

inline ApiChain random_chain(Rng& rng) {
    ApiChain chain;
    int nodes = rand_int(rng, 1, 4);
    for (int i = 0; i < nodes; ++i) {
        GetNode node;
        node.source = random_source(rng);
        if (chance(rng, 0.8)) node.condition = random_condition(rng, rand_int(rng, 0, 3));
        int attrs = rand_int(rng, 1, 4);
        for (int a = 0; a < attrs; ++a) node.attributes.push_back(random_ident(rng));
        if (chance(rng, 0.25)) node.alias = "n" + std::to_string(rand_int(rng, 0, 9)) + "_" +
                                            std::to_string(i);
        chain.nodes.push_back(std::move(node));
    }
    for (int i = 0; i + 1 < nodes; ++i) {
        if (chance(rng, 0.5)) {
            chain.edges.push_back(
                JoinEdge::relational(random_ident(rng), random_op(rng), random_ident(rng)));
        } else {
            chain.edges.push_back(
                JoinEdge::semantic(random_ident(rng), random_ident(rng), random_ident(rng)));
        }
    }
    finalize_chain(chain);
    return chain;
}

inline std::string random_bytes(Rng& rng, std::size_t max_len) {
    std::size_t len = static_cast<std::size_t>(rand_int(rng, 0, int(max_len)));
    std::string out;
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i)
        out.push_back(static_cast<char>(rand_int(rng, 0, 255)));
    return out;
}

/// Chain-shaped noise: valid-ish fragments glued with mutations, harder on
/// the parser than pure random bytes.
inline std::string random_chainlike_noise(Rng& rng) {
    static const std::vector<std::string> fragments = {
        "GET(", "JOIN(", ").", "{", "}", ",", "\"", "\\", "left.", "right.", "AND", "OR",
        "NOT",  "LIKE", "~",  "=", "!=", "<=", "x", "DB", " ", "(", ")", "null", "1e", "-",
        "9.9",  "AS g1"};
    std::string out;
    int n = rand_int(rng, 1, 40);
    for (int i = 0; i < n; ++i) out += pick(rng, fragments);
    return out;
}

//============================================================================
// Typed fixture table + conditions (translation soundness)
//============================================================================

struct SoundnessFixture {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;  // CSV-level cells ("" = null)
    std::string csv;
};

inline SoundnessFixture make_soundness_fixture(Rng& rng, std::size_t rows) {
    SoundnessFixture f;
    f.header = {"id", "year", "price", "name", "city", "note"};
    static const std::vector<std::string> names = {
        "Ada",   "Grace", "Alan",  "Edsger", "Barbara", "Donald", "Tony",
        "John",  "Leslie", "Ken",  "Dennis", "Bjarne",  "Anita",  "Radia"};
    static const std::vector<std::string> cities = {"Paris", "London", "Oslo", "Kyoto", "Lima"};
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(i + 1));
        row.push_back(std::to_string(rand_int(rng, 1990, 2010)));
        row.push_back(std::to_string(rand_int(rng, 0, 400)) + (chance(rng, 0.5) ? ".5" : ".0"));
        row.push_back(pick(rng, names) + (chance(rng, 0.3) ? " Jr" : ""));
        row.push_back(pick(rng, cities));
        row.push_back(chance(rng, 0.15) ? "" : "note " + std::to_string(rand_int(rng, 0, 30)));
        f.cells.push_back(std::move(row));
    }
    std::string csv;
    for (std::size_t i = 0; i < f.header.size(); ++i) {
        if (i) csv += ',';
        csv += f.header[i];
    }
    csv += '\n';
    for (const auto& row : f.cells) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) csv += ',';
            csv += row[i];
        }
        csv += '\n';
    }
    f.csv = std::move(csv);
    return f;
}

/// Type-consistent comparison for the fixture: numeric literals (integers or
/// halves) on numeric columns, strings on text columns, LIKE and ~ on text
/// columns only, occasional nulls and numeric-looking strings.
inline Condition random_typed_cmp(Rng& rng, bool allow_fuzzy) {
    int col = rand_int(rng, 0, 5);
    if (chance(rng, 0.05)) {
        static const char* cols[] = {"id", "year", "price", "name", "city", "note"};
        return Condition::cmp(cols[col], CmpOp::Eq, Value{});  // null literal
    }
    switch (col) {
        case 0: {
            CmpOp ops[] = {CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
            double v = rand_int(rng, 0, 210);
            if (chance(rng, 0.25))
                return Condition::cmp("id", ops[rand_int(rng, 0, 5)],
                                      Value{std::to_string(int(v))});
            return Condition::cmp("id", ops[rand_int(rng, 0, 5)], Value{v});
        }
        case 1: {
            CmpOp ops[] = {CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
            return Condition::cmp("year", ops[rand_int(rng, 0, 5)],
                                  Value{double(rand_int(rng, 1988, 2012))});
        }
        case 2: {
            CmpOp ops[] = {CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq};
            return Condition::cmp("price", ops[rand_int(rng, 0, 4)],
                                  Value{double(rand_int(rng, 0, 400)) + (chance(rng, 0.5) ? 0.5 : 0.0)});
        }
        default: {
            static const char* cols[] = {"name", "city", "note"};
            const char* column = cols[col - 3];
            int form = rand_int(rng, 0, allow_fuzzy ? 4 : 3);
            static const std::vector<std::string> needles = {"ada", "GRACE", "on", "ar", "note 1",
                                                             "Jr",  "zzz",   "a"};
            switch (form) {
                case 0:
                    return Condition::cmp(column, CmpOp::Eq,
                                          Value{pick(rng, needles)});
                case 1:
                    return Condition::cmp(column, chance(rng, 0.5) ? CmpOp::Lt : CmpOp::Ge,
                                          Value{pick(rng, needles)});
                case 2:
                    return Condition::cmp(column, CmpOp::Like,
                                          Value{"%" + pick(rng, needles) + (chance(rng, 0.5) ? "%" : "")});
                case 3:
                    return Condition::cmp(column, CmpOp::Like,
                                          Value{pick(rng, needles) + "_"});
                default:
                    return Condition::cmp(column, CmpOp::Fuzzy, Value{pick(rng, needles)});
            }
        }
    }
}

inline Condition random_typed_condition(Rng& rng, int depth, bool allow_fuzzy) {
    if (depth <= 0 || chance(rng, 0.5)) return random_typed_cmp(rng, allow_fuzzy);
    switch (rand_int(rng, 0, 2)) {
        case 0: {
            std::vector<Condition> parts;
            int n = rand_int(rng, 2, 3);
            for (int i = 0; i < n; ++i)
                parts.push_back(random_typed_condition(rng, depth - 1, allow_fuzzy));
            return Condition::conj(std::move(parts));
        }
        case 1: {
            std::vector<Condition> parts;
            int n = rand_int(rng, 2, 3);
            for (int i = 0; i < n; ++i)
                parts.push_back(random_typed_condition(rng, depth - 1, allow_fuzzy));
            return Condition::disj(std::move(parts));
        }
        default:
            return Condition::negate(random_typed_condition(rng, depth - 1, allow_fuzzy));
    }
}

//============================================================================
// Random join graphs + brute-force oracle (plan equivalence)
//============================================================================

struct TestTable {
    std::vector<std::string> columns;
    std::vector<Record> rows;  // plain attribute names
};

struct TestGraph {
    ExecutionGraph graph;
    std::map<std::string, TestTable> tables;  // keyed by node alias
};

/// Each node gets its own small table with integer `k` and text `s` columns
/// drawn from collision-rich domains so joins actually connect.
inline TestGraph random_test_graph(Rng& rng) {
    TestGraph tg;
    int node_count = rand_int(rng, 1, 4);
    static const std::vector<std::string> words = {"ax", "bx", "cx", "dx", "ex"};

    for (int i = 0; i < node_count; ++i) {
        std::string alias = "g" + std::to_string(i + 1);
        TestTable table;
        table.columns = {"k", "s", "v"};
        int rows = rand_int(rng, 1, 20);
        for (int r = 0; r < rows; ++r) {
            Record rec;
            rec["k"] = chance(rng, 0.05) ? Value{} : Value{double(rand_int(rng, 0, 6))};
            rec["s"] = Value{pick(rng, words)};
            rec["v"] = Value{double(rand_int(rng, 0, 100))};
            table.rows.push_back(std::move(rec));
        }

        GetNode node;
        node.alias = alias;
        node.source = "T_" + alias;
        std::vector<Condition> conjuncts;
        conjuncts.push_back(Condition::cmp("table", CmpOp::Eq, Value{std::string("t")}));
        if (chance(rng, 0.6)) {
            if (chance(rng, 0.5))
                conjuncts.push_back(Condition::cmp(
                    "k", chance(rng, 0.5) ? CmpOp::Le : CmpOp::Ge, Value{double(rand_int(rng, 0, 6))}));
            else
                conjuncts.push_back(Condition::cmp("s", CmpOp::Ne, Value{pick(rng, words)}));
        }
        node.condition = Condition::conj(std::move(conjuncts));
        node.attributes = {"k", "s", "v"};
        tg.graph.nodes.push_back(std::move(node));
        tg.tables.emplace(alias, std::move(table));
    }

    // spanning path plus an occasional extra edge (cycle)
    auto random_edge = [&](int a, int b) {
        ExecutionEdge e;
        e.left = "g" + std::to_string(a + 1);
        e.right = "g" + std::to_string(b + 1);
        static const CmpOp ops[] = {CmpOp::Eq, CmpOp::Eq, CmpOp::Eq, CmpOp::Ne, CmpOp::Lt,
                                    CmpOp::Ge};
        if (chance(rng, 0.75))
            e.spec = JoinEdge::relational("k", ops[rand_int(rng, 0, 5)], "k");
        else
            e.spec = JoinEdge::relational("s", CmpOp::Eq, "s");
        return e;
    };
    for (int i = 0; i + 1 < node_count; ++i) tg.graph.edges.push_back(random_edge(i, i + 1));
    if (node_count >= 3 && chance(rng, 0.3))
        tg.graph.edges.push_back(random_edge(0, node_count - 1));
    return tg;
}

/// Strips the table-selector conjunct the way a relational adapter would.
inline std::optional<Condition> strip_table_conjunct(const std::optional<Condition>& cond) {
    if (!cond) return std::nullopt;
    std::vector<Condition> rest;
    for (const Condition* c : collect_conjuncts(*cond)) {
        if (c->kind == Condition::Kind::Cmp && c->attr == "table") continue;
        rest.push_back(*c);
    }
    if (rest.empty()) return std::nullopt;
    return Condition::conj(std::move(rest));
}

/// Pure in-memory adapter over one TestTable (plain condition evaluation,
/// requested-attributes projection).
inline SourceAdapter make_test_adapter(const TestTable& table) {
    return [&table](const GetNode& node) {
        EntitySet out;
        std::optional<Condition> residual = strip_table_conjunct(node.condition);
        for (const Record& row : table.rows) {
            if (residual && !plain_eval(row, *residual)) continue;
            Record rec;
            for (const std::string& attr : node.attributes) {
                auto it = row.find(attr);
                rec[attr] = it == row.end() ? Value{} : it->second;
            }
            out.records.push_back(std::move(rec));
        }
        return out;
    };
}

/// Brute-force semantics: filter each node's table by its own condition,
/// then keep exactly the tuples of the full Cartesian product on which every
/// edge predicate holds. Independent of any execution order by construction.
inline std::vector<Record> brute_force_execute(const TestGraph& tg) {
    std::vector<std::vector<Record>> locals;
    for (const GetNode& node : tg.graph.nodes) {
        std::vector<Record> local;
        std::optional<Condition> residual = strip_table_conjunct(node.condition);
        for (const Record& row : tg.tables.at(node.alias).rows) {
            if (residual && !plain_eval(row, *residual)) continue;
            Record rec;
            for (const std::string& attr : node.attributes) {
                auto it = row.find(attr);
                rec[node.alias + "." + attr] = it == row.end() ? Value{} : it->second;
            }
            local.push_back(std::move(rec));
        }
        locals.push_back(std::move(local));
    }

    std::vector<Record> out;
    for (const auto& local : locals)
        if (local.empty()) return out;
    std::vector<std::size_t> idx(locals.size(), 0);
    while (true) {
        bool keep = true;
        for (const ExecutionEdge& e : tg.graph.edges) {
            std::size_t li = 0, ri = 0;
            for (std::size_t i = 0; i < tg.graph.nodes.size(); ++i) {
                if (tg.graph.nodes[i].alias == e.left) li = i;
                if (tg.graph.nodes[i].alias == e.right) ri = i;
            }
            const Record& lrec = locals[li][idx[li]];
            const Record& rrec = locals[ri][idx[ri]];
            const Value& lv = lrec.at(e.left + "." + e.spec.left_attr);
            const Value& rv = rrec.at(e.right + "." + e.spec.right_attr);
            if (!plain_cmp(lv, e.spec.op, rv)) {
                keep = false;
                break;
            }
        }
        if (keep) {
            Record merged;
            for (std::size_t i = 0; i < locals.size(); ++i)
                for (const auto& [k, v] : locals[i][idx[i]]) merged[k] = v;
            out.push_back(std::move(merged));
        }
        std::size_t pos = 0;
        while (pos < idx.size()) {
            if (++idx[pos] < locals[pos].size()) break;
            idx[pos] = 0;
            ++pos;
        }
        if (pos == idx.size()) break;
    }
    return out;
}

/// Canonical multiset form for record-set comparison.
inline std::vector<std::string> canonical_multiset(const std::vector<Record>& records) {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const Record& rec : records) {
        std::string line;
        for (const auto& [k, v] : rec) {
            line += k;
            line += '=';
            line += is_null(v) ? "<null>" : to_display(v);
            line += ';';
        }
        out.push_back(std::move(line));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Catalog with one relational source per node, carrying real statistics
/// computed from the test table.
inline Catalog make_test_catalog(const TestGraph& tg) {
    Catalog catalog;
    for (const GetNode& node : tg.graph.nodes) {
        const TestTable& table = tg.tables.at(node.alias);
        TableStats stats;
        stats.table = "t";
        stats.row_count = table.rows.size();
        for (const std::string& col : table.columns) {
            ColumnStats cs;
            cs.column = col;
            std::set<std::string> distinct;
            std::optional<double> mn, mx;
            for (const Record& row : table.rows) {
                const Value& v = row.at(col);
                if (is_null(v)) continue;
                distinct.insert(to_display(v));
                if (auto n = as_number(v)) {
                    mn = mn ? std::min(*mn, *n) : *n;
                    mx = mx ? std::max(*mx, *n) : *n;
                }
            }
            if (!distinct.empty())
                cs.distinct_count = distinct.size();
            cs.min = mn;
            cs.max = mx;
            stats.columns.push_back(std::move(cs));
        }
        SourceDescriptor desc;
        desc.name = node.source;
        desc.kind = SourceKind::Relational;
        desc.schema_summary = "test table for " + node.alias;
        desc.tables = {stats};
        catalog.register_source(std::move(desc));
    }
    return catalog;
}

inline AdapterMap make_test_adapters(const TestGraph& tg) {
    AdapterMap adapters;
    for (const GetNode& node : tg.graph.nodes)
        adapters[node.source] = make_test_adapter(tg.tables.at(node.alias));
    return adapters;
}

}  // namespace errag::testing
