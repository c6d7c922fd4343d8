// Test-only oracles: pure in-memory condition interpreters kept independent
// of the library's SQL translation and executor paths.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"

namespace errag::testing {

enum class Truth { False, True, Unknown };

inline Truth truth_and(Truth a, Truth b) {
    if (a == Truth::False || b == Truth::False) return Truth::False;
    if (a == Truth::Unknown || b == Truth::Unknown) return Truth::Unknown;
    return Truth::True;
}
inline Truth truth_or(Truth a, Truth b) {
    if (a == Truth::True || b == Truth::True) return Truth::True;
    if (a == Truth::Unknown || b == Truth::Unknown) return Truth::Unknown;
    return Truth::False;
}
inline Truth truth_not(Truth a) {
    if (a == Truth::Unknown) return Truth::Unknown;
    return a == Truth::True ? Truth::False : Truth::True;
}

// SQL LIKE with ASCII case-insensitivity, % and _ wildcards, \ escapes.
inline bool oracle_like(const std::string& hay, const std::string& pattern, bool escapes) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
    std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t h,
                                                              std::size_t p) -> bool {
        while (p < pattern.size()) {
            char pc = pattern[p];
            if (escapes && pc == '\\' && p + 1 < pattern.size()) {
                if (h >= hay.size() || lower(hay[h]) != lower(pattern[p + 1])) return false;
                ++h;
                p += 2;
                continue;
            }
            if (pc == '%') {
                for (std::size_t skip = h; skip <= hay.size(); ++skip)
                    if (match(skip, p + 1)) return true;
                return false;
            }
            if (pc == '_') {
                if (h >= hay.size()) return false;
                ++h;
                ++p;
                continue;
            }
            if (h >= hay.size() || lower(hay[h]) != lower(pc)) return false;
            ++h;
            ++p;
        }
        return h == hay.size();
    };
    return match(0, 0);
}

inline bool contains_ci(const std::string& hay, const std::string& needle) {
    return fold_ascii_lower(hay).find(fold_ascii_lower(needle)) != std::string::npos;
}

//============================================================================
// SQLite-mirroring evaluator (translation-soundness oracle)
//============================================================================

/// One table held as plain values, with the same affinity convention the
/// store uses: a column is numeric when every non-empty CSV cell parses as a
/// number. Evaluation mirrors SQLite three-valued logic and comparison
/// affinities for the envelope the translator emits (numeric literals are
/// integers or short decimals; LIKE and ~ operate on text columns).
struct OracleTable {
    std::vector<std::string> columns;
    std::vector<bool> numeric;                // affinity per column
    std::vector<std::vector<Value>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw Error(Errc::UnknownColumn, name);
    }
};

inline OracleTable oracle_table_from_csv(const std::vector<std::string>& header,
                                         const std::vector<std::vector<std::string>>& cells) {
    OracleTable t;
    t.columns = header;
    t.numeric.assign(header.size(), true);
    for (std::size_t c = 0; c < header.size(); ++c) {
        bool any = false;
        for (const auto& row : cells) {
            if (row[c].empty()) continue;
            if (!parse_number(row[c])) {
                t.numeric[c] = false;
                break;
            }
            any = true;
        }
        if (!any && t.numeric[c]) t.numeric[c] = false;  // all-empty column stores text
    }
    for (const auto& row : cells) {
        std::vector<Value> out;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (row[c].empty())
                out.emplace_back();
            else if (t.numeric[c])
                out.emplace_back(*parse_number(row[c]));
            else
                out.emplace_back(row[c]);
        }
        t.rows.push_back(std::move(out));
    }
    return t;
}

inline Truth sqlite_eval_cmp(const OracleTable& table, const std::vector<Value>& row,
                             const Condition& cmp) {
    std::size_t col = table.column_index(cmp.attr);
    const Value& stored = row[col];
    if (is_null(stored) || is_null(cmp.literal)) return Truth::Unknown;

    if (cmp.op == CmpOp::Like)
        return oracle_like(to_display(stored), to_display(cmp.literal), false) ? Truth::True
                                                                               : Truth::False;
    if (cmp.op == CmpOp::Fuzzy)
        return contains_ci(to_display(stored), to_display(cmp.literal)) ? Truth::True
                                                                        : Truth::False;

    // Comparison affinity: a numeric column coerces a text literal that
    // looks numeric; a text column renders a numeric literal as text.
    std::optional<double> lhs_num;
    std::optional<double> rhs_num;
    std::string lhs_text;
    std::string rhs_text;
    bool numeric_compare = false;
    if (table.numeric[col]) {
        lhs_num = as_number(stored);
        if (auto n = as_number(cmp.literal)) {
            rhs_num = n;
        } else {
            rhs_num = parse_number(std::get<std::string>(cmp.literal));
            if (!rhs_num) {
                // numeric storage sorts before text
                int cmp_rank = -1;
                switch (cmp.op) {
                    case CmpOp::Eq: return Truth::False;
                    case CmpOp::Ne: return Truth::True;
                    case CmpOp::Lt: return cmp_rank < 0 ? Truth::True : Truth::False;
                    case CmpOp::Le: return cmp_rank <= 0 ? Truth::True : Truth::False;
                    case CmpOp::Gt: return cmp_rank > 0 ? Truth::True : Truth::False;
                    case CmpOp::Ge: return cmp_rank >= 0 ? Truth::True : Truth::False;
                    default: return Truth::False;
                }
            }
        }
        numeric_compare = true;
    } else {
        lhs_text = to_display(stored);
        rhs_text = to_display(cmp.literal);  // text affinity renders numbers
    }

    int c;
    if (numeric_compare) {
        c = *lhs_num < *rhs_num ? -1 : (*lhs_num > *rhs_num ? 1 : 0);
    } else {
        int raw = lhs_text.compare(rhs_text);
        c = raw < 0 ? -1 : (raw > 0 ? 1 : 0);
    }
    bool result;
    switch (cmp.op) {
        case CmpOp::Eq: result = c == 0; break;
        case CmpOp::Ne: result = c != 0; break;
        case CmpOp::Lt: result = c < 0; break;
        case CmpOp::Le: result = c <= 0; break;
        case CmpOp::Gt: result = c > 0; break;
        case CmpOp::Ge: result = c >= 0; break;
        default: result = false;
    }
    return result ? Truth::True : Truth::False;
}

inline Truth sqlite_eval(const OracleTable& table, const std::vector<Value>& row,
                         const Condition& cond) {
    switch (cond.kind) {
        case Condition::Kind::Cmp:
            return sqlite_eval_cmp(table, row, cond);
        case Condition::Kind::Not:
            return truth_not(sqlite_eval(table, row, cond.children.front()));
        case Condition::Kind::And: {
            Truth acc = Truth::True;
            for (const Condition& child : cond.children)
                acc = truth_and(acc, sqlite_eval(table, row, child));
            return acc;
        }
        case Condition::Kind::Or: {
            Truth acc = Truth::False;
            for (const Condition& child : cond.children)
                acc = truth_or(acc, sqlite_eval(table, row, child));
            return acc;
        }
    }
    return Truth::Unknown;
}

/// Full oracle query: rows satisfying the residual condition, projected.
inline std::vector<Record> oracle_select(const OracleTable& table,
                                         const std::vector<std::string>& attrs,
                                         const std::optional<Condition>& residual) {
    std::vector<Record> out;
    for (const auto& row : table.rows) {
        if (residual && sqlite_eval(table, row, *residual) != Truth::True) continue;
        Record rec;
        for (const std::string& attr : attrs) rec[attr] = row[table.column_index(attr)];
        out.push_back(std::move(rec));
    }
    return out;
}

//============================================================================
// Plain evaluator (executor-side adapters and the brute-force join oracle)
//============================================================================

/// Value-level comparison matching the executor's join predicate semantics.
inline bool plain_cmp(const Value& lhs, CmpOp op, const Value& rhs) {
    if (is_null(lhs) || is_null(rhs)) return false;
    if (op == CmpOp::Like) return oracle_like(to_display(lhs), to_display(rhs), false);
    if (op == CmpOp::Fuzzy) return contains_ci(to_display(lhs), to_display(rhs));
    int c = 0;
    if (compare_values(lhs, rhs, c) != Tri::True) return false;
    switch (op) {
        case CmpOp::Eq: return c == 0;
        case CmpOp::Ne: return c != 0;
        case CmpOp::Lt: return c < 0;
        case CmpOp::Le: return c <= 0;
        case CmpOp::Gt: return c > 0;
        case CmpOp::Ge: return c >= 0;
        default: return false;
    }
}

inline bool plain_eval(const Record& rec, const Condition& cond) {
    switch (cond.kind) {
        case Condition::Kind::Cmp: {
            auto it = rec.find(cond.attr);
            if (it == rec.end()) return false;
            return plain_cmp(it->second, cond.op, cond.literal);
        }
        case Condition::Kind::Not:
            return !plain_eval(rec, cond.children.front());
        case Condition::Kind::And: {
            if (cond.children.empty()) return true;
            for (const Condition& child : cond.children)
                if (!plain_eval(rec, child)) return false;
            return true;
        }
        case Condition::Kind::Or: {
            for (const Condition& child : cond.children)
                if (plain_eval(rec, child)) return true;
            return false;
        }
    }
    return false;
}

}  // namespace errag::testing
