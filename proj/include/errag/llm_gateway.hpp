// llm_gateway.hpp - single boundary for model calls: prompt templates, a
// deterministic mock, and an OpenAI-compatible HTTP client.
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "errag/common.hpp"

namespace errag {

//============================================================================
// Prompt templates
//============================================================================

/// Text with `{Name}` holes. Only names listed in `holes` are substituted;
/// any other braced text is literal.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::vector<std::string> holes;
};

using Binding = std::variant<std::string, std::vector<std::string>>;
using Bindings = std::map<std::string, Binding>;

namespace prompts {

inline const PromptTemplate kApiGeneration{
    "api_generation",
    "You are an agent for building a retrieval system.\n"
    "### Instruction:\n"
    "You need to generate an API with *{Datasource_name}*.\n"
    "### API Definition: {API_definition}\n"
    "### Datasource Schema: {Datasource_schema}\n"
    "### Query:\n"
    "Please refer to the instructions and generate an API for the following query directly:\n"
    "Query: {Query}\n"
    "Interface:",
    {"Datasource_name", "API_definition", "Datasource_schema", "Query"}};

inline const PromptTemplate kSourceSelection{
    "source_selection",
    "You are an agent for selecting the appropriate data source to answer user queries.\n"
    "### Instruction:\n"
    "Based on the provided query and available data sources ({Datasource_list}), you must "
    "determine the best option for obtaining the information needed.\n"
    "### Source Schema Overview:{Source_description}\n"
    "### Query:\n"
    "Please refer to the instructions and output a most likely data source for the following "
    "query directly.\n"
    "Query: {Query}\n"
    "Source:",
    {"Datasource_list", "Source_description", "Query"}};

inline const PromptTemplate kPostProcessing{
    "post_processing",
    "You are an agent for processing structured data.\n"
    "### Instructions:\n"
    "Extract useful information from the retrieved data that directly addresses the user's "
    "query.\n"
    "If the task involves computation or dynamic formatting, use Python's \"f-string\" to embed "
    "expressions or calculations.\n"
    "### API Definition: {API_definition}\n"
    "### Output Requirements:\n"
    "Complete the Return part in the following Python function template:\n"
    "def solve(Data):\n"
    "    from datetime import datetime\n"
    "    return {{Return}}\n"
    "Replace {{Return}} with your generated f-string or \"no data\" if no relevant data is "
    "found.\n"
    "### Query:\n"
    "Question: {query}\n"
    "API: {api}\n"
    "Data (Limited by maximum length): {data}\n"
    "Return: f'''",
    {"API_definition", "query", "api", "data"}};

inline const PromptTemplate kDisambiguation{
    "disambiguation",
    "You are an entity resolution assistant.\n"
    "### Instruction:\n"
    "Given the query and the list of candidate entities, select the most related entity.\n"
    "Answer with the exact candidate name only.\n"
    "### Query: {Query}\n"
    "### Candidates: {Candidates}\n"
    "Answer:",
    {"Query", "Candidates"}};

inline const PromptTemplate kAttributeExtraction{
    "attribute_extraction",
    "You are an entity information extraction assistant.\n"
    "### Instruction:\n"
    "Extract the value of the requested attribute from the text. Answer with the value only, or "
    "null if the text does not contain it.\n"
    "### Attribute: {Attribute}\n"
    "### Query: {Query}\n"
    "### Text: {Context}\n"
    "Value:",
    {"Attribute", "Query", "Context"}};

// Generic boolean-verdict grader. Not calibrated against any particular
// benchmark's official judge prompt; swap the body if parity with one is
// required.
inline const PromptTemplate kLlmJudge{
    "llm_judge",
    "You are an impartial grader for question answering.\n"
    "### Instruction:\n"
    "Given the question, the ground truth answer, and a predicted answer, decide whether the "
    "prediction is semantically correct. Output exactly True or False.\n"
    "### Question: {Question}\n"
    "### Ground truth: {GroundTruth}\n"
    "### Prediction: {Prediction}\n"
    "Verdict:",
    {"Question", "GroundTruth", "Prediction"}};

inline const PromptTemplate* find(const std::string& name) {
    static const PromptTemplate* all[] = {&kApiGeneration,       &kSourceSelection,
                                          &kPostProcessing,      &kDisambiguation,
                                          &kAttributeExtraction, &kLlmJudge};
    for (const PromptTemplate* t : all)
        if (t->name == name) return t;
    return nullptr;
}

}  // namespace prompts

/// Renders a named template with byte-exact hole substitution. List bindings
/// are joined with ", ". Throws UnknownTemplate / MissingBinding.
inline std::string render_prompt(const std::string& tpl_name, const Bindings& bindings) {
    const PromptTemplate* tpl = prompts::find(tpl_name);
    if (!tpl) throw Error(Errc::UnknownTemplate, "no template named '" + tpl_name + "'");
    std::string out = tpl->body;
    for (const std::string& hole : tpl->holes) {
        auto it = bindings.find(hole);
        if (it == bindings.end())
            throw Error(Errc::MissingBinding, "hole '{" + hole + "}' unbound", hole);
        std::string value;
        if (const std::string* s = std::get_if<std::string>(&it->second)) {
            value = *s;
        } else {
            const auto& list = std::get<std::vector<std::string>>(it->second);
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i) value += ", ";
                value += list[i];
            }
        }
        const std::string marker = "{" + hole + "}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    return out;
}

//============================================================================
// Gateway
//============================================================================

enum class GatewayMode { Mock, Remote };

struct GatewayConfig {
    GatewayMode mode = GatewayMode::Mock;
    std::string endpoint;  // base URL, e.g. http://localhost:8080
    std::string model;
    double temperature = 0.0;
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_base_ms = 250;

    void validate() const {
        if (mode == GatewayMode::Remote && (endpoint.empty() || model.empty()))
            throw Error(Errc::ConfigError, "remote gateway requires endpoint and model");
        if (temperature < 0) throw Error(Errc::ConfigError, "temperature must be >= 0");
    }
};

inline std::string content_digest(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf, 16);
}

inline std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r'))
        --e;
    return std::string(s.substr(b, e - b));
}

/// Abstract model boundary. Every LLM-dependent step in the system funnels
/// through one of these four calls, so swapping the mock for a remote model
/// is a configuration change, not a code change.
class Gateway {
public:
    virtual ~Gateway() = default;

    virtual std::string complete(const std::string& prompt) = 0;

    /// Extracts the entity holding `relation` with the subject described by
    /// `context_text`; null when the text does not answer it.
    virtual std::optional<std::string> extract_relation(const std::string& context_text,
                                                        const std::string& relation,
                                                        const std::string& query) = 0;

    /// Extracts a named attribute value from free text; null on a miss.
    virtual std::optional<std::string> extract_attribute(const std::string& context_text,
                                                         const std::string& attribute,
                                                         const std::string& query) = 0;

    /// Picks one candidate for an ambiguous entity lookup; returns its index.
    virtual std::size_t choose_disambiguation(const std::string& query,
                                              const std::vector<std::string>& candidates) = 0;

    int completion_calls() const { return completion_calls_.load(); }
    int extraction_calls() const { return extraction_calls_.load(); }

protected:
    std::atomic<int> completion_calls_{0};
    std::atomic<int> extraction_calls_{0};
};

/// Deterministic in-process gateway. Completions come from a canned table
/// keyed by the prompt's content hash (with an optional rule-based
/// fallback); extraction answers come from registered
/// (context-digest, name) -> value tables. Performs no network I/O.
class MockGateway : public Gateway {
public:
    using Fallback = std::function<std::optional<std::string>(const std::string& prompt)>;

    void register_completion(const std::string& prompt, std::string response) {
        canned_[content_digest(prompt)] = std::move(response);
    }
    void set_fallback(Fallback fn) { fallback_ = std::move(fn); }

    void register_relation(const std::string& context_text, const std::string& relation,
                           std::string value) {
        relations_[content_digest(context_text) + "/" + relation] = std::move(value);
    }
    void register_attribute(const std::string& context_text, const std::string& attribute,
                            std::string value) {
        attributes_[content_digest(context_text) + "/" + attribute] = std::move(value);
    }
    /// Picker invoked for disambiguation; defaults to the first candidate.
    void set_disambiguation_picker(
        std::function<std::size_t(const std::string&, const std::vector<std::string>&)> fn) {
        picker_ = std::move(fn);
    }

    std::string complete(const std::string& prompt) override {
        ++completion_calls_;
        auto it = canned_.find(content_digest(prompt));
        if (it != canned_.end()) return it->second;
        if (fallback_) {
            if (auto r = fallback_(prompt)) return *r;
        }
        throw Error(Errc::NoCannedResponse, "no canned response for prompt (digest " +
                                                content_digest(prompt) + ")");
    }

    std::optional<std::string> extract_relation(const std::string& context_text,
                                                const std::string& relation,
                                                const std::string&) override {
        ++extraction_calls_;
        if (context_text.empty()) return std::nullopt;
        auto it = relations_.find(content_digest(context_text) + "/" + relation);
        if (it == relations_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> extract_attribute(const std::string& context_text,
                                                 const std::string& attribute,
                                                 const std::string&) override {
        ++extraction_calls_;
        if (context_text.empty()) return std::nullopt;
        auto it = attributes_.find(content_digest(context_text) + "/" + attribute);
        if (it == attributes_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t choose_disambiguation(const std::string& query,
                                      const std::vector<std::string>& candidates) override {
        if (candidates.empty())
            throw Error(Errc::GatewayError, "disambiguation with no candidates");
        if (picker_) {
            std::size_t idx = picker_(query, candidates);
            if (idx >= candidates.size())
                throw Error(Errc::GatewayError, "disambiguation picker out of range");
            return idx;
        }
        return 0;
    }

private:
    std::map<std::string, std::string> canned_;
    std::map<std::string, std::string> relations_;
    std::map<std::string, std::string> attributes_;
    Fallback fallback_;
    std::function<std::size_t(const std::string&, const std::vector<std::string>&)> picker_;
};

/// OpenAI-compatible chat-completions client. Retries 429/5xx with
/// exponential backoff. Plain HTTP; the API key is read from ERRAG_API_KEY.
class RemoteGateway : public Gateway {
public:
    explicit RemoteGateway(GatewayConfig config) : config_(std::move(config)) {
        config_.validate();
        if (config_.mode != GatewayMode::Remote)
            throw Error(Errc::ConfigError, "RemoteGateway requires mode=Remote");
        split_endpoint();
    }

    std::string complete(const std::string& prompt) override {
        ++completion_calls_;
        nlohmann::json body = {
            {"model", config_.model},
            {"temperature", config_.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        };
        const std::string payload = body.dump();

        int attempt = 0;
        while (true) {
            httplib::Client cli(base_url_);
            cli.set_connection_timeout(0, config_.timeout_ms * 1000);
            cli.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
            httplib::Headers headers;
            if (const char* key = std::getenv("ERRAG_API_KEY"))
                headers.emplace("Authorization", std::string("Bearer ") + key);

            auto res = cli.Post(path_, headers, payload, "application/json");
            if (!res) {
                auto err = res.error();
                if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                    err == httplib::Error::Write)
                    throw Error(Errc::Timeout, "request to " + base_url_ + " timed out");
                throw Error(Errc::HttpError, "request to " + base_url_ + " failed: " +
                                                 httplib::to_string(err));
            }
            if (res->status == 429 || res->status >= 500) {
                if (attempt >= config_.max_retries)
                    throw Error(Errc::HttpError,
                                "gave up after " + std::to_string(attempt) + " retries (status " +
                                    std::to_string(res->status) + ")");
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.retry_base_ms << attempt));
                ++attempt;
                continue;
            }
            if (res->status != 200)
                throw Error(Errc::HttpError, "status " + std::to_string(res->status));
            return parse_completion(res->body);
        }
    }

    std::optional<std::string> extract_relation(const std::string& context_text,
                                                const std::string& relation,
                                                const std::string& query) override {
        ++extraction_calls_;
        return extract_with_prompt(context_text, relation, query);
    }

    std::optional<std::string> extract_attribute(const std::string& context_text,
                                                 const std::string& attribute,
                                                 const std::string& query) override {
        ++extraction_calls_;
        return extract_with_prompt(context_text, attribute, query);
    }

    std::size_t choose_disambiguation(const std::string& query,
                                      const std::vector<std::string>& candidates) override {
        if (candidates.empty())
            throw Error(Errc::GatewayError, "disambiguation with no candidates");
        std::string answer = trim_copy(complete(render_prompt(
            "disambiguation", {{"Query", query}, {"Candidates", candidates}})));
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates[i] == answer) return i;
        std::string folded = fold_ascii_lower(answer);
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (fold_ascii_lower(candidates[i]) == folded) return i;
        throw Error(Errc::GatewayError, "disambiguation answer '" + answer +
                                            "' matches no candidate");
    }

private:
    GatewayConfig config_;
    std::string base_url_;
    std::string path_ = "/v1/chat/completions";

    void split_endpoint() {
        const std::string& ep = config_.endpoint;
        std::size_t scheme = ep.find("://");
        std::size_t slash = scheme == std::string::npos ? ep.find('/') : ep.find('/', scheme + 3);
        if (slash == std::string::npos || slash + 1 >= ep.size()) {
            base_url_ = slash == std::string::npos ? ep : ep.substr(0, slash);
        } else {
            base_url_ = ep.substr(0, slash);
            path_ = ep.substr(slash);
        }
    }

    std::optional<std::string> extract_with_prompt(const std::string& context,
                                                   const std::string& name,
                                                   const std::string& query) {
        if (context.empty()) return std::nullopt;
        std::string answer;
        try {
            answer = trim_copy(complete(render_prompt(
                "attribute_extraction",
                {{"Attribute", name}, {"Query", query}, {"Context", context}})));
        } catch (const Error& e) {
            throw Error(Errc::GatewayError, std::string("extraction failed: ") + e.what());
        }
        if (answer.empty() || fold_ascii_lower(answer) == "null" ||
            fold_ascii_lower(answer) == "none")
            return std::nullopt;
        return answer;
    }

    static std::string parse_completion(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw Error(Errc::MalformedResponse, "response is not JSON");
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw Error(Errc::MalformedResponse, "response has no choices");
        const auto& choice = j["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content") ||
            !choice["message"]["content"].is_string())
            throw Error(Errc::MalformedResponse, "choice has no message content");
        return choice["message"]["content"].get<std::string>();
    }
};

/// Builds a gateway from config. Mock gateways start empty; callers register
/// canned answers before use.
inline std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config) {
    config.validate();
    if (config.mode == GatewayMode::Mock) return std::make_unique<MockGateway>();
    return std::make_unique<RemoteGateway>(config);
}

}  // namespace errag
