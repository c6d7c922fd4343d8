// catalog.hpp - registry of sources, schemas, and cardinality statistics
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errag/common.hpp"

namespace errag {

enum class SourceKind { Relational, KnowledgeGraph, Documents, Self };

inline const char* source_kind_name(SourceKind k) {
    switch (k) {
        case SourceKind::Relational: return "relational";
        case SourceKind::KnowledgeGraph: return "kg";
        case SourceKind::Documents: return "documents";
        case SourceKind::Self: return "self";
    }
    return "?";
}

struct ColumnStats {
    std::string column;
    std::optional<double> min;
    std::optional<double> max;
    std::optional<std::uint64_t> distinct_count;
};

struct TableStats {
    std::string table;
    std::uint64_t row_count = 0;
    std::vector<ColumnStats> columns;

    const ColumnStats* column(const std::string& name) const {
        for (const ColumnStats& c : columns)
            if (c.column == name) return &c;
        return nullptr;
    }
};

/// Registered source. `schema_summary` is the human-readable description the
/// selection and generation prompts embed; `tables` is populated for
/// relational sources at ingest time.
struct SourceDescriptor {
    std::string name;
    SourceKind kind = SourceKind::Documents;
    std::string schema_summary;
    std::vector<TableStats> tables;
    double typical_latency_ms = 0.0;
};

/// Name-keyed source registry. Registration happens in an exclusive setup
/// phase; afterwards the catalog is read-only and may be shared across
/// threads. Lookups are independent of registration order.
class Catalog {
public:
    void register_source(SourceDescriptor desc) {
        if (desc.name.empty())
            throw Error(Errc::ValidationError, "source name must be non-empty");
        if (sources_.count(desc.name))
            throw Error(Errc::DuplicateSource, "source '" + desc.name + "' already registered");
        if (desc.kind == SourceKind::Self && !desc.tables.empty())
            throw Error(Errc::ValidationError, "SELF source carries no tables");
        if (desc.typical_latency_ms < 0)
            throw Error(Errc::ValidationError, "latency must be non-negative");
        for (const TableStats& t : desc.tables) {
            for (const ColumnStats& c : t.columns) {
                if (c.min && c.max && *c.min > *c.max)
                    throw Error(Errc::ValidationError,
                                "column " + t.table + "." + c.column + " has min > max");
                if (c.distinct_count && *c.distinct_count > t.row_count)
                    throw Error(Errc::ValidationError,
                                "column " + t.table + "." + c.column +
                                    " has distinct_count > row_count");
            }
        }
        std::string key = desc.name;
        sources_.emplace(std::move(key), std::move(desc));
    }

    bool has_source(const std::string& name) const { return sources_.count(name) != 0; }

    const SourceDescriptor& source(const std::string& name) const {
        auto it = sources_.find(name);
        if (it == sources_.end())
            throw Error(Errc::UnknownSource, "source '" + name + "' not registered");
        return it->second;
    }

    /// Stats for one column, or nullopt when the table or column carries
    /// none. Never fabricates values.
    std::optional<ColumnStats> column_stats(const std::string& source_name,
                                            const std::string& table,
                                            const std::string& column) const {
        const SourceDescriptor& s = source(source_name);
        if (s.kind != SourceKind::Relational)
            throw Error(Errc::NotRelational, "source '" + source_name + "' is not relational");
        for (const TableStats& t : s.tables) {
            if (t.table != table) continue;
            if (const ColumnStats* c = t.column(column)) return *c;
            return std::nullopt;
        }
        return std::nullopt;
    }

    const TableStats* table_stats(const std::string& source_name, const std::string& table) const {
        const SourceDescriptor& s = source(source_name);
        if (s.kind != SourceKind::Relational) return nullptr;
        for (const TableStats& t : s.tables)
            if (t.table == table) return &t;
        return nullptr;
    }

    /// Source names in deterministic (lexicographic) order.
    std::vector<std::string> source_names() const {
        std::vector<std::string> out;
        out.reserve(sources_.size());
        for (const auto& [name, _] : sources_) out.push_back(name);
        return out;
    }

    std::size_t size() const { return sources_.size(); }
    bool empty() const { return sources_.empty(); }

private:
    std::map<std::string, SourceDescriptor> sources_;
};

}  // namespace errag
