// source_relational.hpp - GET over relational tables: CSV ingest into an
// embedded SQLite database, SQL translation, tiered fuzzy matching.
#pragma once

#include <sqlite3.h>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "errag/catalog.hpp"
#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/csv.hpp"
#include "errag/embedder.hpp"

namespace errag {

enum class ColumnAffinity { Integer, Real, Text };

struct FuzzyResult {
    std::vector<std::string> values;
    int tier = 0;  // 1 exact, 2 case-insensitive partial, 3 embedding; 0 = all tiers empty
};

namespace detail {

inline bool plain_sql_ident(std::string_view name) {
    if (name.empty()) return false;
    auto is_start = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    };
    auto is_part = [&](char c) { return is_start(c) || (c >= '0' && c <= '9'); };
    if (!is_start(name[0])) return false;
    for (char c : name)
        if (!is_part(c)) return false;
    static const char* reserved[] = {"select", "from",  "where", "and",   "or",    "not",
                                     "like",   "null",  "order", "group", "by",    "limit",
                                     "union",  "join",  "on",    "case",  "when",  "then",
                                     "else",   "end",   "table", "index", "set",   "values",
                                     "insert", "update", "delete", "create", "drop", "key",
                                     "primary", "default", "check", "references", "foreign",
                                     "escape", "between", "in",  "is",    "exists"};
    std::string folded = fold_ascii_lower(name);
    for (const char* word : reserved)
        if (folded == word) return false;
    return true;
}

/// Identifiers stay bare when they are plain non-reserved names, matching
/// the translated-SQL surface; anything else is double-quoted.
inline std::string quote_sql_ident(std::string_view name) {
    if (plain_sql_ident(name)) return std::string(name);
    std::string out = "\"";
    for (char c : name) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

inline std::string quote_sql_string(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        out.push_back(c);
        if (c == '\'') out.push_back('\'');
    }
    out.push_back('\'');
    return out;
}

inline std::string escape_like_pattern(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '%' || c == '_' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline std::string render_sql_literal(const Value& v) {
    if (is_null(v)) return "NULL";
    if (const double* d = std::get_if<double>(&v)) return format_number(*d);
    return quote_sql_string(std::get<std::string>(v));
}

// Renders a condition tree as a SQL boolean expression. AND/OR nodes with no
// children are internal markers produced by the fuzzy rewrite: an empty OR
// is never-true, an empty AND always-true.
inline void render_sql_cond(const Condition& c, int level, std::string& out) {
    switch (c.kind) {
        case Condition::Kind::Cmp: {
            out += quote_sql_ident(c.attr);
            if (c.op == CmpOp::Fuzzy) {
                if (!std::holds_alternative<std::string>(c.literal))
                    throw Error(Errc::TypeError, "operator ~ requires a string operand");
                out += " LIKE '%";
                std::string pat = escape_like_pattern(std::get<std::string>(c.literal));
                for (char ch : pat) {
                    out.push_back(ch);
                    if (ch == '\'') out.push_back('\'');
                }
                out += "%' ESCAPE '\\'";
                return;
            }
            if (c.op == CmpOp::Like && !std::holds_alternative<std::string>(c.literal))
                throw Error(Errc::TypeError, "LIKE requires a string pattern");
            out += ' ';
            out += cmp_op_text(c.op);
            out += ' ';
            out += render_sql_literal(c.literal);
            return;
        }
        case Condition::Kind::Not:
            out += "NOT ";
            render_sql_cond(c.children.front(), 2, out);
            return;
        case Condition::Kind::And: {
            if (c.children.empty()) {
                out += "(1=1)";
                return;
            }
            bool parens = level >= 2;
            if (parens) out += '(';
            for (std::size_t i = 0; i < c.children.size(); ++i) {
                if (i) out += " AND ";
                render_sql_cond(c.children[i], 2, out);
            }
            if (parens) out += ')';
            return;
        }
        case Condition::Kind::Or: {
            if (c.children.empty()) {
                out += "(1=0)";
                return;
            }
            bool parens = level >= 1;
            if (parens) out += '(';
            for (std::size_t i = 0; i < c.children.size(); ++i) {
                if (i) out += " OR ";
                render_sql_cond(c.children[i], 1, out);
            }
            if (parens) out += ')';
            return;
        }
    }
}

}  // namespace detail

/// Splits a node's condition into the mandatory `table = "<name>"` selector
/// and the residual condition. The selector must appear exactly once among
/// the top-level conjuncts.
struct TableSplit {
    std::string table;
    std::optional<Condition> residual;
};

inline TableSplit split_table_selector(const GetNode& node) {
    if (!node.condition)
        throw Error(Errc::NoTableSelector, "node " + node.alias + " names no table");
    std::vector<const Condition*> conjuncts;
    if (node.condition->kind == Condition::Kind::And) {
        for (const Condition& c : node.condition->children) conjuncts.push_back(&c);
    } else {
        conjuncts.push_back(&*node.condition);
    }

    TableSplit split;
    std::vector<Condition> rest;
    int selectors = 0;
    for (const Condition* c : conjuncts) {
        if (c->kind == Condition::Kind::Cmp && c->attr == "table" && c->op == CmpOp::Eq &&
            std::holds_alternative<std::string>(c->literal)) {
            ++selectors;
            split.table = std::get<std::string>(c->literal);
        } else {
            rest.push_back(*c);
        }
    }
    if (selectors == 0)
        throw Error(Errc::NoTableSelector, "node " + node.alias + " names no table");
    if (selectors > 1)
        throw Error(Errc::MultipleTableSelectors,
                    "node " + node.alias + " names more than one table");
    if (!rest.empty()) split.residual = Condition::conj(std::move(rest));
    return split;
}

/// Renders a GET as `SELECT <attrs> FROM <table> WHERE <Condition'>;` with
/// the table selector stripped. `~` renders as a case-insensitive
/// containment LIKE. Pure translation; fuzzy-tier resolution happens in
/// RelationalStore::get.
inline std::string translate_get_to_sql(const GetNode& node) {
    TableSplit split = split_table_selector(node);
    std::string sql = "SELECT ";
    for (std::size_t i = 0; i < node.attributes.size(); ++i) {
        if (i) sql += ", ";
        sql += detail::quote_sql_ident(node.attributes[i]);
    }
    sql += " FROM ";
    sql += detail::quote_sql_ident(split.table);
    sql += " WHERE ";
    if (split.residual) {
        detail::render_sql_cond(*split.residual, 0, sql);
    } else {
        sql += "TRUE";
    }
    sql += ";";
    return sql;
}

/// Embedded relational store. Tables are ingested from CSV (header row,
/// RFC 4180); column affinities are sniffed (INTEGER when every non-empty
/// cell parses as an integer, REAL for numbers, TEXT otherwise) and empty
/// cells become NULL. Read-only after ingest; the connection serializes
/// concurrent readers.
class RelationalStore {
public:
    RelationalStore() {
        sqlite3* raw = nullptr;
        if (sqlite3_open(":memory:", &raw) != SQLITE_OK) {
            std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
            sqlite3_close(raw);
            throw Error(Errc::StoreError, "cannot open store: " + msg);
        }
        db_.reset(raw);
    }

    void set_embedder(const Embedder* embedder) { embedder_ = embedder; }
    void set_fallback_threshold(std::uint64_t n) { fallback_threshold_ = n; }

    void load_csv_text(const std::string& table, const std::string& csv_text) {
        if (tables_.count(table))
            throw Error(Errc::StoreError, "table '" + table + "' already loaded");
        CsvTable csv = parse_csv(csv_text);
        TableInfo info;
        info.name = table;
        info.columns = csv.header;
        info.affinities.resize(csv.header.size(), ColumnAffinity::Integer);
        sniff_affinities(csv, info.affinities);
        create_and_fill(info, csv);
        info.row_count = csv.rows.size();
        tables_.emplace(table, std::move(info));
    }

    void load_csv_file(const std::string& table, const std::string& path) {
        load_csv_text(table, read_file(path));
    }

    /// Loads every *.csv in a directory; the table name is the file stem.
    void load_directory(const std::string& dir) {
        if (!std::filesystem::is_directory(dir))
            throw Error(Errc::IoError, "'" + dir + "' is not a directory");
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error(Errc::IoError, "no .csv files in '" + dir + "'");
        for (const auto& f : files) load_csv_file(f.stem().string(), f.string());
    }

    bool has_table(const std::string& table) const { return tables_.count(table) != 0; }

    std::vector<std::string> table_names() const {
        std::vector<std::string> out;
        for (const auto& [name, _] : tables_) out.push_back(name);
        return out;
    }

    const std::vector<std::string>& columns(const std::string& table) const {
        return table_info(table).columns;
    }

    /// Catalog statistics: row counts, per-column distinct counts, min/max
    /// for numeric columns. Computed from the loaded data, never sampled.
    std::vector<TableStats> compute_stats() const {
        std::vector<TableStats> out;
        for (const auto& [name, info] : tables_) {
            TableStats ts;
            ts.table = name;
            ts.row_count = info.row_count;
            for (std::size_t i = 0; i < info.columns.size(); ++i) {
                ColumnStats cs;
                cs.column = info.columns[i];
                std::string q = "SELECT COUNT(DISTINCT " + detail::quote_sql_ident(cs.column) +
                                ") FROM " + detail::quote_sql_ident(name) + ";";
                cs.distinct_count = static_cast<std::uint64_t>(query_scalar_int(q));
                if (info.affinities[i] != ColumnAffinity::Text) {
                    auto mn = query_scalar_double("SELECT MIN(" +
                                                  detail::quote_sql_ident(cs.column) + ") FROM " +
                                                  detail::quote_sql_ident(name) + ";");
                    auto mx = query_scalar_double("SELECT MAX(" +
                                                  detail::quote_sql_ident(cs.column) + ") FROM " +
                                                  detail::quote_sql_ident(name) + ";");
                    cs.min = mn;
                    cs.max = mx;
                }
                ts.columns.push_back(std::move(cs));
            }
            out.push_back(std::move(ts));
        }
        return out;
    }

    /// Tiered lookup of a needle in one column. Tier 1 is exact equality,
    /// tier 2 case-insensitive containment, tier 3 embedding nearest
    /// neighbour over the distinct values (only when the column has at most
    /// `fallback_threshold` distinct values and an embedder is wired in).
    /// The first non-empty tier wins; tiers never mix.
    FuzzyResult fuzzy_resolve(const std::string& table, const std::string& column,
                              const std::string& needle) const {
        const TableInfo& info = table_info(table);
        require_column(info, column);

        FuzzyResult result;
        const std::string col = detail::quote_sql_ident(column);
        const std::string tbl = detail::quote_sql_ident(table);

        result.values = query_text_column(
            "SELECT DISTINCT " + col + " FROM " + tbl + " WHERE " + col + " = ?1 ORDER BY " +
                col + ";",
            needle);
        if (!result.values.empty()) {
            result.tier = 1;
            return result;
        }

        result.values = query_text_column("SELECT DISTINCT " + col + " FROM " + tbl + " WHERE " +
                                              col + " LIKE '%' || ?1 || '%' ESCAPE '\\' ORDER BY " +
                                              col + ";",
                                          detail::escape_like_pattern(needle));
        if (!result.values.empty()) {
            result.tier = 2;
            return result;
        }

        if (embedder_) {
            std::vector<std::string> domain = query_text_column(
                "SELECT DISTINCT " + col + " FROM " + tbl + " WHERE " + col +
                    " IS NOT NULL ORDER BY " + col + ";",
                std::nullopt);
            if (!domain.empty() && domain.size() <= fallback_threshold_) {
                Embedder::Vec probe = embedder_->embed(needle);
                double best = -2.0;
                std::size_t best_idx = 0;
                for (std::size_t i = 0; i < domain.size(); ++i) {
                    double score = Embedder::cosine(probe, embedder_->embed(domain[i]));
                    if (score > best) {
                        best = score;
                        best_idx = i;
                    }
                }
                result.values.push_back(domain[best_idx]);
                result.tier = 3;
            }
        }
        return result;
    }

    /// Executes a GET against the store. `~` comparisons are resolved
    /// through the fuzzy tiers and rewritten to an OR of equalities before
    /// translation; a full miss contributes a never-true predicate, so the
    /// GET yields an empty set rather than an error.
    EntitySet get(const GetNode& node) const {
        TableSplit split = split_table_selector(node);
        const TableInfo& info = table_info(split.table);
        for (const std::string& attr : node.attributes) require_column(info, attr);
        if (split.residual) validate_condition_columns(info, *split.residual);

        GetNode effective = node;
        if (split.residual) {
            Condition rewritten = rewrite_fuzzy(split.table, *split.residual);
            effective.condition =
                Condition::conj({Condition::cmp("table", CmpOp::Eq, Value{split.table}),
                                 std::move(rewritten)});
        }
        return run_sql(translate_get_to_sql(effective), node.attributes);
    }

    /// Runs an already-translated SELECT (the shape translate_get_to_sql
    /// produces) and keys each row by the given attribute names, which must
    /// match the select list in order.
    EntitySet run_sql(const std::string& sql, const std::vector<std::string>& attrs) const {
        EntitySet out;
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_.get(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        std::unique_ptr<sqlite3_stmt, StmtCloser> guard(stmt);
        int rc;
        while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
            Record rec;
            int columns = std::min<int>(sqlite3_column_count(stmt), int(attrs.size()));
            for (int i = 0; i < columns; ++i)
                rec[attrs[static_cast<std::size_t>(i)]] = column_value(stmt, i);
            out.records.push_back(std::move(rec));
        }
        if (rc != SQLITE_DONE) throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        return out;
    }

private:
    struct DbCloser {
        void operator()(sqlite3* db) const { sqlite3_close(db); }
    };
    struct StmtCloser {
        void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
    };
    struct TableInfo {
        std::string name;
        std::vector<std::string> columns;
        std::vector<ColumnAffinity> affinities;
        std::uint64_t row_count = 0;
    };

    std::unique_ptr<sqlite3, DbCloser> db_;
    std::map<std::string, TableInfo> tables_;
    const Embedder* embedder_ = nullptr;
    std::uint64_t fallback_threshold_ = 1000;

    const TableInfo& table_info(const std::string& table) const {
        auto it = tables_.find(table);
        if (it == tables_.end())
            throw Error(Errc::UnknownTable, "table '" + table + "' not loaded");
        return it->second;
    }

    static void require_column(const TableInfo& info, const std::string& column) {
        if (std::find(info.columns.begin(), info.columns.end(), column) == info.columns.end())
            throw Error(Errc::UnknownColumn,
                        "table '" + info.name + "' has no column '" + column + "'");
    }

    void validate_condition_columns(const TableInfo& info, const Condition& c) const {
        if (c.kind == Condition::Kind::Cmp) {
            require_column(info, c.attr);
            return;
        }
        for (const Condition& child : c.children) validate_condition_columns(info, child);
    }

    static void sniff_affinities(const CsvTable& csv, std::vector<ColumnAffinity>& affinities) {
        for (std::size_t col = 0; col < affinities.size(); ++col) {
            bool any = false;
            ColumnAffinity aff = ColumnAffinity::Integer;
            for (const auto& row : csv.rows) {
                const std::string& cell = row[col];
                if (cell.empty()) continue;
                auto num = parse_number(cell);
                if (!num) {
                    aff = ColumnAffinity::Text;
                    break;
                }
                any = true;
                if (aff == ColumnAffinity::Integer && *num != std::floor(*num))
                    aff = ColumnAffinity::Real;
            }
            affinities[col] = any || aff == ColumnAffinity::Text ? aff : ColumnAffinity::Text;
        }
    }

    void exec_or_throw(const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_.get(), sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            throw Error(Errc::StoreError, msg);
        }
    }

    void create_and_fill(const TableInfo& info, const CsvTable& csv) {
        std::string ddl = "CREATE TABLE " + detail::quote_sql_ident(info.name) + " (";
        for (std::size_t i = 0; i < info.columns.size(); ++i) {
            if (i) ddl += ", ";
            ddl += detail::quote_sql_ident(info.columns[i]);
            switch (info.affinities[i]) {
                case ColumnAffinity::Integer: ddl += " INTEGER"; break;
                case ColumnAffinity::Real: ddl += " REAL"; break;
                case ColumnAffinity::Text: ddl += " TEXT"; break;
            }
        }
        ddl += ");";
        exec_or_throw(ddl);

        std::string insert = "INSERT INTO " + detail::quote_sql_ident(info.name) + " VALUES (";
        for (std::size_t i = 0; i < info.columns.size(); ++i) {
            if (i) insert += ", ";
            insert += "?";
        }
        insert += ");";

        exec_or_throw("BEGIN;");
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_.get(), insert.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        std::unique_ptr<sqlite3_stmt, StmtCloser> guard(stmt);
        for (const auto& row : csv.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                int idx = static_cast<int>(i) + 1;
                const std::string& cell = row[i];
                if (cell.empty()) {
                    sqlite3_bind_null(stmt, idx);
                } else if (info.affinities[i] == ColumnAffinity::Text) {
                    sqlite3_bind_text(stmt, idx, cell.c_str(),
                                      static_cast<int>(cell.size()), SQLITE_TRANSIENT);
                } else {
                    double num = *parse_number(cell);
                    if (info.affinities[i] == ColumnAffinity::Integer)
                        sqlite3_bind_int64(stmt, idx, static_cast<sqlite3_int64>(num));
                    else
                        sqlite3_bind_double(stmt, idx, num);
                }
            }
            if (sqlite3_step(stmt) != SQLITE_DONE)
                throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
            sqlite3_reset(stmt);
        }
        exec_or_throw("COMMIT;");
    }

    Condition rewrite_fuzzy(const std::string& table, const Condition& c) const {
        if (c.kind == Condition::Kind::Cmp) {
            if (c.op != CmpOp::Fuzzy) return c;
            if (!std::holds_alternative<std::string>(c.literal))
                throw Error(Errc::TypeError, "operator ~ requires a string operand");
            FuzzyResult fuzzy =
                fuzzy_resolve(table, c.attr, std::get<std::string>(c.literal));
            if (fuzzy.values.empty()) {
                Condition never;
                never.kind = Condition::Kind::Or;  // empty OR renders never-true
                return never;
            }
            std::vector<Condition> eqs;
            eqs.reserve(fuzzy.values.size());
            for (const std::string& v : fuzzy.values)
                eqs.push_back(Condition::cmp(c.attr, CmpOp::Eq, Value{v}));
            return Condition::disj(std::move(eqs));
        }
        Condition out = c;
        for (Condition& child : out.children) child = rewrite_fuzzy(table, child);
        return out;
    }

    static Value column_value(sqlite3_stmt* stmt, int i) {
        switch (sqlite3_column_type(stmt, i)) {
            case SQLITE_NULL: return Value{};
            case SQLITE_INTEGER:
                return Value{static_cast<double>(sqlite3_column_int64(stmt, i))};
            case SQLITE_FLOAT: return Value{sqlite3_column_double(stmt, i)};
            default: {
                const unsigned char* text = sqlite3_column_text(stmt, i);
                return Value{std::string(reinterpret_cast<const char*>(text))};
            }
        }
    }

    long long query_scalar_int(const std::string& sql) const {
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_.get(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        std::unique_ptr<sqlite3_stmt, StmtCloser> guard(stmt);
        if (sqlite3_step(stmt) != SQLITE_ROW)
            throw Error(Errc::StoreError, "scalar query returned no row");
        return sqlite3_column_int64(stmt, 0);
    }

    std::optional<double> query_scalar_double(const std::string& sql) const {
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_.get(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        std::unique_ptr<sqlite3_stmt, StmtCloser> guard(stmt);
        if (sqlite3_step(stmt) != SQLITE_ROW) return std::nullopt;
        if (sqlite3_column_type(stmt, 0) == SQLITE_NULL) return std::nullopt;
        return sqlite3_column_double(stmt, 0);
    }

    std::vector<std::string> query_text_column(const std::string& sql,
                                               std::optional<std::string> bind) const {
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_.get(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        std::unique_ptr<sqlite3_stmt, StmtCloser> guard(stmt);
        if (bind)
            sqlite3_bind_text(stmt, 1, bind->c_str(), static_cast<int>(bind->size()),
                              SQLITE_TRANSIENT);
        std::vector<std::string> out;
        int rc;
        while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
            if (sqlite3_column_type(stmt, 0) == SQLITE_NULL) continue;
            const unsigned char* text = sqlite3_column_text(stmt, 0);
            out.emplace_back(reinterpret_cast<const char*>(text));
        }
        if (rc != SQLITE_DONE) throw Error(Errc::StoreError, sqlite3_errmsg(db_.get()));
        return out;
    }
};

}  // namespace errag
