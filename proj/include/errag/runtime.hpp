// runtime.hpp - assembles a working system from a catalog config file:
// stores, adapters, catalog entries, gateway, and mock seeding.
//
// Config format (JSON):
//   {
//     "sources": [
//       {"name": "DB_Finance", "kind": "relational", "latency_ms": 120,
//        "schema_summary": "stock prices ...", "data_path": "db"},
//       {"name": "WIKI", "kind": "kg", ...},
//       {"name": "WEB", "kind": "documents", ...},
//       {"name": "SELF", "kind": "self", "latency_ms": 0, "schema_summary": "..."}
//     ],
//     "gateway": {"mode": "mock" | "remote", "endpoint": "...", "model": "..."},
//     "docs": {"k": 5},
//     "units": {"mi": 1609.34},          // extends the built-in unit table
//     "index_dir": ".errag-index",
//     "mock": {
//       "relations":   [{"page": "DeepMind", "relation": "parent_company", "value": "Google"}],
//       "attributes":  [{"page": "...", "attribute": "...", "value": "..."},
//                       {"context": "raw text", "attribute": "...", "value": "..."}],
//       "completions": [{"prompt": "...", "response": "..."}]
//     }
//   }
// data_path entries resolve relative to the config file's directory.
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "errag/errag.hpp"

namespace errag {

struct IngestReport {
    struct SourceCount {
        std::string name;
        std::string kind;
        std::uint64_t tables = 0;
        std::uint64_t rows = 0;
        std::uint64_t pages = 0;
        std::uint64_t parents = 0;
        std::uint64_t children = 0;
    };
    std::vector<SourceCount> sources;
};

/// Everything a command needs to run chains against the configured sources.
class Runtime {
public:
    Catalog catalog;
    AdapterMap adapters;
    std::unique_ptr<Gateway> gateway;
    Embedder embedder;
    DocsGetConfig docs_config;
    UnitTable units = default_unit_table();
    IngestReport report;

    MockGateway* mock() {
        return dynamic_cast<MockGateway*>(gateway.get());
    }

    static Runtime from_config_file(const std::string& config_path) {
        std::string text;
        try {
            text = read_file(config_path);
        } catch (const Error& e) {
            throw Error(Errc::ConfigError, e.what());
        }
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::ConfigError, "config is not valid JSON");
        return from_config(j, std::filesystem::path(config_path).parent_path().string());
    }

    static Runtime from_config(const nlohmann::json& j, const std::string& base_dir) {
        Runtime rt;
        rt.gateway = make_gateway(parse_gateway_config(j));
        if (j.contains("docs") && j["docs"].contains("k"))
            rt.docs_config.k = j["docs"]["k"].get<std::size_t>();
        if (j.contains("units"))
            for (const auto& [suffix, factor] : j["units"].items())
                rt.units[suffix] = factor.get<double>();

        if (!j.contains("sources") || !j["sources"].is_array() || j["sources"].empty())
            throw Error(Errc::ConfigError, "config lists no sources");

        for (const auto& src : j["sources"]) {
            std::string name = src.value("name", "");
            std::string kind = src.value("kind", "");
            if (name.empty() || kind.empty())
                throw Error(Errc::ConfigError, "source entries need name and kind");
            SourceDescriptor desc;
            desc.name = name;
            desc.schema_summary = src.value("schema_summary", "");
            desc.typical_latency_ms = src.value("latency_ms", 0.0);

            IngestReport::SourceCount count;
            count.name = name;
            count.kind = kind;

            if (kind == "relational") {
                desc.kind = SourceKind::Relational;
                auto store = std::make_shared<RelationalStore>();
                store->set_embedder(&rt.embedder);
                store->load_directory(resolve(base_dir, require_path(src, name)));
                desc.tables = store->compute_stats();
                for (const TableStats& t : desc.tables) {
                    ++count.tables;
                    count.rows += t.row_count;
                }
                rt.adapters[name] = [store](const GetNode& node) { return store->get(node); };
                rt.relational_stores_[name] = store;
            } else if (kind == "kg" || kind == "knowledge_graph") {
                desc.kind = SourceKind::KnowledgeGraph;
                auto store = std::make_shared<PageStore>();
                store->load_directory(resolve(base_dir, require_path(src, name)));
                count.pages = store->size();
                Gateway* gw = rt.gateway.get();
                rt.adapters[name] = [store, gw](const GetNode& node) {
                    return kg_get(*store, node, *gw);
                };
                rt.page_stores_[name] = store;
            } else if (kind == "documents" || kind == "docs" || kind == "web") {
                desc.kind = SourceKind::Documents;
                auto store = std::make_shared<DocumentStore>();
                store->load_directory(resolve(base_dir, require_path(src, name)));
                count.parents = store->index().parent_count();
                count.children = store->index().child_count();
                Gateway* gw = rt.gateway.get();
                DocsGetConfig cfg = rt.docs_config;
                rt.adapters[name] = [store, gw, cfg](const GetNode& node) {
                    return docs_get(store->index(), node, *gw, cfg);
                };
                rt.document_stores_[name] = store;
            } else if (kind == "self") {
                desc.kind = SourceKind::Self;
                rt.adapters[name] = [](const GetNode& node) {
                    EntitySet out;
                    Record rec;
                    for (const std::string& attr : node.attributes) rec[attr] = Value{};
                    out.records.push_back(std::move(rec));
                    return out;
                };
            } else {
                throw Error(Errc::ConfigError, "unknown source kind '" + kind + "'");
            }
            rt.catalog.register_source(std::move(desc));
            rt.report.sources.push_back(std::move(count));
        }

        if (j.contains("index_dir")) {
            rt.index_dir_ = resolve(base_dir, j["index_dir"].get<std::string>());
        }
        if (j.contains("mock")) rt.seed_mock(j["mock"]);
        return rt;
    }

    const RelationalStore* relational_store(const std::string& name) const {
        auto it = relational_stores_.find(name);
        return it == relational_stores_.end() ? nullptr : it->second.get();
    }
    const PageStore* page_store(const std::string& name) const {
        auto it = page_stores_.find(name);
        return it == page_stores_.end() ? nullptr : it->second.get();
    }
    const DocumentStore* document_store(const std::string& name) const {
        auto it = document_stores_.find(name);
        return it == document_stores_.end() ? nullptr : it->second.get();
    }

    /// Writes every document index into index_dir (no-op when unset).
    void persist_indexes() const {
        if (index_dir_.empty()) return;
        std::filesystem::create_directories(index_dir_);
        for (const auto& [name, store] : document_stores_)
            store->index().save((std::filesystem::path(index_dir_) / (name + ".erdx")).string());
    }

private:
    std::map<std::string, std::shared_ptr<RelationalStore>> relational_stores_;
    std::map<std::string, std::shared_ptr<PageStore>> page_stores_;
    std::map<std::string, std::shared_ptr<DocumentStore>> document_stores_;
    std::string index_dir_;

    static GatewayConfig parse_gateway_config(const nlohmann::json& j) {
        GatewayConfig cfg;
        if (!j.contains("gateway")) return cfg;
        const auto& g = j["gateway"];
        std::string mode = g.value("mode", "mock");
        cfg.mode = mode == "remote" ? GatewayMode::Remote : GatewayMode::Mock;
        cfg.endpoint = g.value("endpoint", "");
        cfg.model = g.value("model", "");
        cfg.temperature = g.value("temperature", 0.0);
        cfg.timeout_ms = g.value("timeout_ms", 30000);
        cfg.max_retries = g.value("max_retries", 3);
        return cfg;
    }

    static std::string require_path(const nlohmann::json& src, const std::string& name) {
        if (!src.contains("data_path"))
            throw Error(Errc::ConfigError, "source '" + name + "' needs data_path");
        return src["data_path"].get<std::string>();
    }

    static std::string resolve(const std::string& base, const std::string& path) {
        std::filesystem::path p(path);
        if (p.is_absolute() || base.empty()) return path;
        return (std::filesystem::path(base) / p).string();
    }

    void seed_mock(const nlohmann::json& m) {
        MockGateway* mg = mock();
        if (!mg) return;
        auto context_of = [this](const nlohmann::json& item) -> std::string {
            if (item.contains("context")) return item["context"].get<std::string>();
            if (item.contains("page")) {
                std::string title = item["page"].get<std::string>();
                for (const auto& [name, store] : page_stores_)
                    if (const EntityPage* page = store->find_title(title)) return page->body;
                throw Error(Errc::ConfigError, "mock entry names unknown page '" + title + "'");
            }
            throw Error(Errc::ConfigError, "mock entry needs context or page");
        };
        if (m.contains("relations"))
            for (const auto& item : m["relations"])
                mg->register_relation(context_of(item), item.at("relation").get<std::string>(),
                                      item.at("value").get<std::string>());
        if (m.contains("attributes"))
            for (const auto& item : m["attributes"])
                mg->register_attribute(context_of(item), item.at("attribute").get<std::string>(),
                                       item.at("value").get<std::string>());
        if (m.contains("completions"))
            for (const auto& item : m["completions"])
                mg->register_completion(item.at("prompt").get<std::string>(),
                                        item.at("response").get<std::string>());
    }
};

/// JSON rendering of result records (stable key order; integral numbers
/// emitted without a fraction).
inline nlohmann::json entity_set_to_json(const EntitySet& set) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Record& rec : set.records) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& [key, value] : rec) {
            if (is_null(value)) {
                obj[key] = nullptr;
            } else if (auto n = as_number(value)) {
                if (*n == std::floor(*n) && std::fabs(*n) < 9.007199254740992e15)
                    obj[key] = static_cast<long long>(*n);
                else
                    obj[key] = *n;
            } else {
                obj[key] = std::get<std::string>(value);
            }
        }
        arr.push_back(std::move(obj));
    }
    return arr;
}

}  // namespace errag
