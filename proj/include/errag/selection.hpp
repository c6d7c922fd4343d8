// selection.hpp - source-selection policies, training-set builders for the
// selection module, and the SFT/DPO losses as pure numeric functions.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "errag/catalog.hpp"
#include "errag/common.hpp"

namespace errag {

/// One executed (query, source) trial from an offline run. `top1`/`top2`
/// optionally carry the base model's two most probable sources for the
/// query, which the DPO builder consumes.
struct ExecutionLogEntry {
    std::string query;
    std::string source;
    bool correct = false;
    double retrieval_time_ms = 0.0;
    std::optional<std::string> top1;
    std::optional<std::string> top2;
};

struct PreferencePair {
    std::string query;
    std::string winner;
    std::string loser;
};

/// Top-2 labels the base reference model assigned to one query.
struct TopTwo {
    std::string query;
    std::string s1;
    std::string s2;
};

//============================================================================
// Heuristic selection
//============================================================================

namespace detail {

inline std::set<std::string> fold_tokens(const std::string& text) {
    std::set<std::string> out;
    std::string token;
    for (char c : text) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (!token.empty()) {
            out.insert(token);
            token.clear();
        }
    }
    if (!token.empty()) out.insert(token);
    return out;
}

}  // namespace detail

/// Offline source ranking: case-folded token overlap between the query and
/// each source's schema summary, ties broken by ascending latency then name.
/// SELF ranks last unless no source overlaps at all, in which case it ranks
/// first. Stands in for the tuned selection module when no model is wired.
inline std::vector<std::string> heuristic_select(const std::string& query,
                                                 const Catalog& catalog) {
    if (catalog.empty()) throw Error(Errc::EmptyCatalog, "no sources registered");
    std::set<std::string> query_tokens = detail::fold_tokens(query);

    struct Ranked {
        std::string name;
        std::size_t overlap = 0;
        double latency = 0;
        bool is_self = false;
    };
    std::vector<Ranked> ranked;
    bool any_overlap = false;
    for (const std::string& name : catalog.source_names()) {
        const SourceDescriptor& src = catalog.source(name);
        Ranked r;
        r.name = name;
        r.latency = src.typical_latency_ms;
        r.is_self = src.kind == SourceKind::Self;
        for (const std::string& token : detail::fold_tokens(src.schema_summary))
            if (query_tokens.count(token)) ++r.overlap;
        any_overlap = any_overlap || r.overlap > 0;
        ranked.push_back(std::move(r));
    }

    std::stable_sort(ranked.begin(), ranked.end(), [&](const Ranked& a, const Ranked& b) {
        if (a.is_self != b.is_self) {
            // SELF pinned last normally, first when nothing overlaps.
            if (any_overlap) return !a.is_self;
            return a.is_self;
        }
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.latency != b.latency) return a.latency < b.latency;
        return a.name < b.name;
    });

    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const Ranked& r : ranked) out.push_back(r.name);
    return out;
}

//============================================================================
// Training-set builders
//============================================================================

/// One (query, source) pair per correctly answered log entry, in log order.
/// A query appears once per correct source; duplicates are preserved.
inline std::vector<std::pair<std::string, std::string>> build_sft_set(
    const std::vector<ExecutionLogEntry>& log) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const ExecutionLogEntry& entry : log)
        if (entry.correct) out.emplace_back(entry.query, entry.source);
    return out;
}

/// Preference pairs from top-2 inferences plus the execution log. When the
/// top-1 source is correct and fastest among the query's correct sources the
/// pair is (top1 > top2); otherwise the fastest correct source beats top1.
/// Queries with no correct source are skipped. The log must contain entries
/// for both top labels of each query (MissingLogEntry otherwise).
inline std::vector<PreferencePair> build_dpo_pairs(
    const std::vector<TopTwo>& tops, const std::vector<ExecutionLogEntry>& log) {
    struct Trial {
        bool correct;
        double time_ms;
    };
    std::map<std::string, std::map<std::string, Trial>> by_query;
    for (const ExecutionLogEntry& entry : log)
        by_query[entry.query].emplace(entry.source, Trial{entry.correct, entry.retrieval_time_ms});

    std::vector<PreferencePair> out;
    for (const TopTwo& top : tops) {
        if (top.s1 == top.s2)
            throw Error(Errc::ValidationError,
                        "top-2 labels for '" + top.query + "' are identical");
        auto qit = by_query.find(top.query);
        if (qit == by_query.end())
            throw Error(Errc::MissingLogEntry, "no log entries for query '" + top.query + "'");
        const auto& trials = qit->second;
        auto s1 = trials.find(top.s1);
        auto s2 = trials.find(top.s2);
        if (s1 == trials.end())
            throw Error(Errc::MissingLogEntry,
                        "query '" + top.query + "' has no log entry for '" + top.s1 + "'");
        if (s2 == trials.end())
            throw Error(Errc::MissingLogEntry,
                        "query '" + top.query + "' has no log entry for '" + top.s2 + "'");

        // fastest correct source; ties broken by label for determinism
        std::optional<std::pair<std::string, double>> best;
        for (const auto& [source, trial] : trials) {
            if (!trial.correct) continue;
            if (!best || trial.time_ms < best->second ||
                (trial.time_ms == best->second && source < best->first))
                best = {source, trial.time_ms};
        }
        if (!best) continue;  // no correct source: nothing to prefer

        if (s1->second.correct && s1->second.time_ms <= best->second) {
            out.push_back({top.query, top.s1, top.s2});
        } else {
            out.push_back({top.query, best->first, top.s1});
        }
    }
    return out;
}

//============================================================================
// Losses
//============================================================================

/// SFT objective as printed: the negated mean of the per-sample
/// probabilities. See sft_loss_log for the cross-entropy-style variant.
inline double sft_loss(const std::vector<double>& probabilities) {
    if (probabilities.empty())
        throw Error(Errc::DomainError, "expectation over an empty sample set");
    double sum = 0;
    for (double p : probabilities) {
        if (p < 0.0 || p > 1.0)
            throw Error(Errc::DomainError, "probability outside [0, 1]");
        sum += p;
    }
    return -sum / double(probabilities.size());
}

/// Negated mean log-probability; companion to sft_loss for trainers that
/// expect the conventional cross-entropy form. Requires p in (0, 1].
inline double sft_loss_log(const std::vector<double>& probabilities) {
    if (probabilities.empty())
        throw Error(Errc::DomainError, "expectation over an empty sample set");
    double sum = 0;
    for (double p : probabilities) {
        if (p <= 0.0 || p > 1.0)
            throw Error(Errc::DomainError, "probability outside (0, 1]");
        sum += std::log(p);
    }
    return -sum / double(probabilities.size());
}

/// DPO loss for one preference pair:
///   -log sigmoid(beta * log(pw_t/pw_b) - beta * log(pl_t/pl_b))
/// computed via softplus for stability across extreme probability ratios.
inline double dpo_loss(double pw_theta, double pw_base, double pl_theta, double pl_base,
                       double beta) {
    auto check = [](double p, const char* name) {
        if (!(p > 0.0) || p > 1.0)
            throw Error(Errc::DomainError, std::string(name) + " must be in (0, 1]");
    };
    check(pw_theta, "pw_theta");
    check(pw_base, "pw_base");
    check(pl_theta, "pl_theta");
    check(pl_base, "pl_base");
    if (!(beta > 0.0)) throw Error(Errc::DomainError, "beta must be positive");

    double h = beta * (std::log(pw_theta / pw_base) - std::log(pl_theta / pl_base));
    // -log(sigmoid(h)) == softplus(-h)
    if (h >= 0) return std::log1p(std::exp(-h));
    return -h + std::log1p(std::exp(h));
}

//============================================================================
// JSON-lines I/O
//============================================================================

inline std::vector<ExecutionLogEntry> parse_log_jsonl(const std::string& text) {
    std::vector<ExecutionLogEntry> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string line = text.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        ++line_no;
        start = end == std::string::npos ? text.size() + 1 : end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw Error(Errc::IoError, "log line " + std::to_string(line_no) + " is not JSON");
        ExecutionLogEntry entry;
        try {
            entry.query = j.at("query").get<std::string>();
            entry.source = j.at("source").get<std::string>();
            entry.correct = j.at("correct").get<bool>();
            entry.retrieval_time_ms = j.at("retrieval_time_ms").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::IoError,
                        "log line " + std::to_string(line_no) + ": " + e.what());
        }
        if (entry.retrieval_time_ms < 0)
            throw Error(Errc::ValidationError,
                        "log line " + std::to_string(line_no) + ": negative retrieval time");
        if (entry.source == "SELF" && entry.retrieval_time_ms != 0)
            throw Error(Errc::ValidationError,
                        "log line " + std::to_string(line_no) + ": SELF must cost 0 ms");
        if (j.contains("top1")) entry.top1 = j["top1"].get<std::string>();
        if (j.contains("top2")) entry.top2 = j["top2"].get<std::string>();
        out.push_back(std::move(entry));
    }
    return out;
}

/// Per-query top-2 labels carried on log lines (first line per query wins).
inline std::vector<TopTwo> tops_from_log(const std::vector<ExecutionLogEntry>& log) {
    std::vector<TopTwo> out;
    std::set<std::string> seen;
    for (const ExecutionLogEntry& entry : log) {
        if (!entry.top1 || !entry.top2) continue;
        if (!seen.insert(entry.query).second) continue;
        out.push_back({entry.query, *entry.top1, *entry.top2});
    }
    return out;
}

inline std::string sft_set_to_jsonl(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    for (const auto& [query, source] : pairs) {
        nlohmann::json j{{"query", query}, {"source", source}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::string dpo_pairs_to_jsonl(const std::vector<PreferencePair>& pairs) {
    std::string out;
    for (const PreferencePair& p : pairs) {
        nlohmann::json j{{"query", p.query}, {"winner", p.winner}, {"loser", p.loser}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace errag
