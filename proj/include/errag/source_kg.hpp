// source_kg.hpp - GET over a knowledge-graph page store: entity resolution
// with disambiguation, structured-first attribute extraction, text fallback.
#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/csv.hpp"
#include "errag/llm_gateway.hpp"

namespace errag {

/// One entity page: title, aliases, structured infobox, body text. A page
/// whose `disambiguation_of` list is non-empty is a disambiguation page; its
/// candidates name other pages in the store.
struct EntityPage {
    std::string title;
    std::vector<std::string> aliases;
    std::map<std::string, std::string> infobox;  // keys normalized at ingest
    std::string body;
    std::vector<std::string> disambiguation_of;

    bool is_disambiguation() const { return !disambiguation_of.empty(); }
};

/// Case-fold plus space/underscore normalization used for infobox keys and
/// attribute names. Anything looser is the gateway's job.
inline std::string normalize_attr_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        if (c == '_') c = ' ';
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    // collapse runs of spaces and trim
    std::string folded;
    bool in_space = true;
    for (char c : out) {
        if (c == ' ') {
            if (!in_space) folded.push_back(' ');
            in_space = true;
        } else {
            folded.push_back(c);
            in_space = false;
        }
    }
    while (!folded.empty() && folded.back() == ' ') folded.pop_back();
    return folded;
}

/// Local page store standing in for a live wiki. Pages are ingested from
/// JSON ({title, aliases[], infobox{}, body, disambiguation_of[]?}); an
/// optional fetch hook can populate misses. Read-only after ingest.
class PageStore {
public:
    using FetchHook = std::function<std::optional<EntityPage>(const std::string& title)>;

    void add_page(EntityPage page) {
        if (page.title.empty()) throw Error(Errc::ValidationError, "page title must be non-empty");
        if (pages_.count(page.title))
            throw Error(Errc::ValidationError, "duplicate page title '" + page.title + "'");
        std::map<std::string, std::string> normalized;
        for (const auto& [key, value] : page.infobox) {
            std::string norm = normalize_attr_name(key);
            if (!normalized.emplace(norm, value).second)
                throw Error(Errc::ValidationError,
                            "page '" + page.title + "' has duplicate infobox key '" + norm + "'");
        }
        page.infobox = std::move(normalized);
        for (const std::string& alias : page.aliases) aliases_[alias].push_back(page.title);
        std::string title = page.title;
        pages_.emplace(std::move(title), std::move(page));
    }

    void load_json_text(const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::IoError, "page JSON is malformed");
        if (j.is_array()) {
            for (const auto& item : j) add_page(page_from_json(item));
        } else {
            add_page(page_from_json(j));
        }
    }

    void load_json_file(const std::string& path) { load_json_text(read_file(path)); }

    void load_directory(const std::string& dir) {
        if (!std::filesystem::is_directory(dir))
            throw Error(Errc::IoError, "'" + dir + "' is not a directory");
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error(Errc::IoError, "no .json pages in '" + dir + "'");
        for (const auto& f : files) load_json_file(f.string());
    }

    /// Wires a fetch hook for titles missing from the store. Fetched pages
    /// are kept in memory; when `cache_dir` is given they are also written
    /// there as JSON, so later ingests see them without refetching.
    void set_fetch_hook(FetchHook hook, std::string cache_dir = {}) {
        fetch_hook_ = std::move(hook);
        fetch_cache_dir_ = std::move(cache_dir);
    }

    bool empty() const { return pages_.empty(); }
    std::size_t size() const { return pages_.size(); }

    const EntityPage* find_title(const std::string& title) const {
        auto it = pages_.find(title);
        if (it != pages_.end()) return &it->second;
        if (fetch_hook_) {
            if (auto fetched = fetch_hook_(title)) {
                if (!fetch_cache_dir_.empty())
                    const_cast<PageStore*>(this)->cache_page_to_disk(*fetched);
                const_cast<PageStore*>(this)->add_page(*fetched);
                return &pages_.at(title);
            }
        }
        return nullptr;
    }

    /// Exact title match wins; otherwise exact alias match. An alias shared
    /// by several pages and any hit on a disambiguation page route through
    /// the gateway's disambiguation step.
    const EntityPage& resolve_entity(const std::string& search_key,
                                     const std::string& query_context, Gateway& gateway) const {
        if (pages_.empty()) throw Error(Errc::EntityNotFound, "page store is empty");
        const EntityPage* page = find_title(search_key);
        if (!page) {
            auto it = aliases_.find(search_key);
            if (it == aliases_.end())
                throw Error(Errc::EntityNotFound, "no page for '" + search_key + "'");
            const std::vector<std::string>& titles = it->second;
            const std::string& chosen =
                titles.size() == 1
                    ? titles.front()
                    : titles[gateway.choose_disambiguation(query_context, titles)];
            page = find_title(chosen);
            if (!page) throw Error(Errc::EntityNotFound, "alias target '" + chosen + "' missing");
        }
        if (page->is_disambiguation()) {
            std::size_t idx =
                gateway.choose_disambiguation(query_context, page->disambiguation_of);
            const std::string& chosen = page->disambiguation_of[idx];
            const EntityPage* resolved = find_title(chosen);
            if (!resolved)
                throw Error(Errc::EntityNotFound,
                            "disambiguation candidate '" + chosen + "' missing");
            return *resolved;
        }
        return *page;
    }

private:
    std::map<std::string, EntityPage> pages_;
    std::map<std::string, std::vector<std::string>> aliases_;
    FetchHook fetch_hook_;
    std::string fetch_cache_dir_;

    void cache_page_to_disk(const EntityPage& page) {
        std::filesystem::create_directories(fetch_cache_dir_);
        nlohmann::json j;
        j["title"] = page.title;
        j["aliases"] = page.aliases;
        j["infobox"] = page.infobox;
        j["body"] = page.body;
        if (!page.disambiguation_of.empty()) j["disambiguation_of"] = page.disambiguation_of;
        std::string name;
        for (char c : page.title)
            name.push_back((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                                   (c >= '0' && c <= '9')
                               ? c
                               : '_');
        write_file((std::filesystem::path(fetch_cache_dir_) / (name + ".json")).string(),
                   j.dump(2));
    }

    static EntityPage page_from_json(const nlohmann::json& j) {
        EntityPage page;
        page.title = j.value("title", "");
        if (j.contains("aliases"))
            for (const auto& a : j["aliases"]) page.aliases.push_back(a.get<std::string>());
        if (j.contains("infobox"))
            for (const auto& [key, value] : j["infobox"].items())
                page.infobox[key] = value.is_string() ? value.get<std::string>() : value.dump();
        page.body = j.value("body", "");
        if (j.contains("disambiguation_of"))
            for (const auto& d : j["disambiguation_of"])
                page.disambiguation_of.push_back(d.get<std::string>());
        return page;
    }
};

/// Looks one attribute up on a page without invoking the gateway. Reserved
/// names: `content` is the body, `search_key` the title.
inline std::optional<std::string> page_attribute_direct(const EntityPage& page,
                                                        const std::string& attr) {
    if (attr == kAttrContent) return page.body;
    if (attr == kAttrSearchKey) return page.title;
    auto it = page.infobox.find(normalize_attr_name(attr));
    if (it != page.infobox.end()) return it->second;
    return std::nullopt;
}

/// Builds the record for one page: infobox first (exact match after
/// normalization), gateway extraction over the body as fallback. Misses are
/// null; the record always carries every requested attribute.
inline Record get_attributes(const EntityPage& page, const std::vector<std::string>& attrs,
                             Gateway& gateway, const std::string& query_context) {
    Record rec;
    for (const std::string& attr : attrs) {
        if (auto direct = page_attribute_direct(page, attr)) {
            rec[attr] = Value{*direct};
            continue;
        }
        std::optional<std::string> extracted;
        try {
            extracted = gateway.extract_attribute(page.body, attr, query_context);
        } catch (const Error& e) {
            if (e.code() == Errc::GatewayError) throw;
            throw Error(Errc::GatewayError, std::string("attribute extraction failed: ") + e.what());
        }
        rec[attr] = extracted ? Value{*extracted} : Value{};
    }
    return rec;
}

namespace detail {

// Two-valued verification of a residual condition against page attributes.
// Missing attributes fail the comparison they appear in.
inline bool verify_page_condition(const EntityPage& page, const Condition& c) {
    switch (c.kind) {
        case Condition::Kind::And:
            for (const Condition& child : c.children)
                if (!verify_page_condition(page, child)) return false;
            return true;
        case Condition::Kind::Or:
            for (const Condition& child : c.children)
                if (verify_page_condition(page, child)) return true;
            return false;
        case Condition::Kind::Not:
            return !verify_page_condition(page, c.children.front());
        case Condition::Kind::Cmp: {
            auto actual = page_attribute_direct(page, c.attr);
            if (!actual || is_null(c.literal)) return false;
            Value lhs{*actual};
            if (c.op == CmpOp::Like || c.op == CmpOp::Fuzzy) {
                std::string hay = fold_ascii_lower(*actual);
                std::string needle = fold_ascii_lower(to_display(c.literal));
                return hay.find(needle) != std::string::npos;
            }
            int cmp = 0;
            if (compare_values(lhs, c.literal, cmp) != Tri::True) return false;
            switch (c.op) {
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
    return false;
}

}  // namespace detail

/// GET over the page store. The condition must bind `search_key` (directly
/// or as the OR a join pushed in); residual conjuncts are verified against
/// the resolved page and drop it on failure. With several keys, pages that
/// fail to resolve are skipped; a single explicit key that misses raises
/// EntityNotFound.
inline EntitySet kg_get(const PageStore& store, const GetNode& node, Gateway& gateway,
                        const std::string& query_context = {}) {
    SearchKeySplit split = split_search_keys(node.condition);
    if (split.keys.empty())
        throw Error(Errc::ValidationError,
                    "node " + node.alias + " reads a knowledge graph without a search_key");

    EntitySet out;
    std::set<std::string> seen_titles;
    for (const std::string& key : split.keys) {
        const EntityPage* page = nullptr;
        try {
            page = &store.resolve_entity(key, query_context, gateway);
        } catch (const Error& e) {
            if (e.code() == Errc::EntityNotFound && split.keys.size() > 1) continue;
            throw;
        }
        if (!seen_titles.insert(page->title).second) continue;
        if (split.residual && !detail::verify_page_condition(*page, *split.residual)) continue;
        out.records.push_back(get_attributes(*page, node.attributes, gateway, query_context));
    }
    return out;
}

}  // namespace errag
