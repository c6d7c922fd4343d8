// source_docs.hpp - GET over web pages/documents: HTML main-text extraction,
// parent-child chunking, Okapi BM25 retrieval, reranker hook.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errag/chain_dsl.hpp"
#include "errag/common.hpp"
#include "errag/csv.hpp"
#include "errag/embedder.hpp"
#include "errag/llm_gateway.hpp"

namespace errag {

//============================================================================
// HTML -> text
//============================================================================

namespace detail {

inline bool tag_name_eq(std::string_view tag, std::string_view name) {
    if (tag.size() != name.size()) return false;
    for (std::size_t i = 0; i < tag.size(); ++i) {
        char c = tag[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != name[i]) return false;
    }
    return true;
}

inline bool is_block_tag(std::string_view tag) {
    static const char* blocks[] = {"p",  "div", "br",    "li",    "ul",      "ol",    "h1",
                                   "h2", "h3",  "h4",    "h5",    "h6",      "tr",    "table",
                                   "td", "th",  "thead", "tbody", "section", "article"};
    for (const char* b : blocks)
        if (tag_name_eq(tag, b)) return true;
    return false;
}

inline bool is_skipped_container(std::string_view tag) {
    static const char* skipped[] = {"script", "style", "nav", "header", "footer"};
    for (const char* s : skipped)
        if (tag_name_eq(tag, s)) return true;
    return false;
}

inline void decode_entity(std::string_view entity, std::string& out) {
    if (entity == "amp") { out += '&'; return; }
    if (entity == "lt") { out += '<'; return; }
    if (entity == "gt") { out += '>'; return; }
    if (entity == "quot") { out += '"'; return; }
    if (entity == "apos") { out += '\''; return; }
    if (entity == "nbsp") { out += ' '; return; }
    if (!entity.empty() && entity[0] == '#') {
        long code = 0;
        bool ok = false;
        if (entity.size() > 2 && (entity[1] == 'x' || entity[1] == 'X')) {
            code = std::strtol(std::string(entity.substr(2)).c_str(), nullptr, 16);
            ok = true;
        } else if (entity.size() > 1) {
            code = std::strtol(std::string(entity.substr(1)).c_str(), nullptr, 10);
            ok = true;
        }
        if (ok && code > 0 && code < 0x110000) {
            // minimal UTF-8 encode
            unsigned cp = static_cast<unsigned>(code);
            if (cp < 0x80) {
                out += static_cast<char>(cp);
            } else if (cp < 0x800) {
                out += static_cast<char>(0xC0 | (cp >> 6));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else if (cp < 0x10000) {
                out += static_cast<char>(0xE0 | (cp >> 12));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
                out += static_cast<char>(0xF0 | (cp >> 18));
                out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            }
            return;
        }
    }
    out += '&';
    out += entity;
    out += ';';
}

}  // namespace detail

/// Best-effort main-text extraction. Content of script/style/nav/header/
/// footer elements is dropped, block boundaries become newlines, entities
/// are decoded, whitespace is normalized. Input with no markup passes
/// through unchanged.
inline std::string html_to_text(std::string_view html) {
    if (html.find('<') == std::string_view::npos) return std::string(html);

    std::string raw;
    raw.reserve(html.size());
    std::string skip_until;  // inside a skipped container until this tag closes

    std::size_t i = 0;
    while (i < html.size()) {
        char c = html[i];
        if (c == '<') {
            std::size_t close = html.find('>', i + 1);
            if (close == std::string_view::npos) {
                if (skip_until.empty()) raw.append(html.substr(i));
                break;
            }
            std::string_view inner = html.substr(i + 1, close - i - 1);
            bool closing = !inner.empty() && inner[0] == '/';
            if (closing) inner.remove_prefix(1);
            std::size_t name_end = 0;
            while (name_end < inner.size() && inner[name_end] != ' ' && inner[name_end] != '\t' &&
                   inner[name_end] != '\n' && inner[name_end] != '\r' && inner[name_end] != '/')
                ++name_end;
            std::string_view tag = inner.substr(0, name_end);

            if (!skip_until.empty()) {
                if (closing && detail::tag_name_eq(tag, skip_until)) skip_until.clear();
            } else if (!closing && detail::is_skipped_container(tag)) {
                skip_until = fold_ascii_lower(tag);
            } else if (detail::is_block_tag(tag)) {
                raw += '\n';
            }
            i = close + 1;
            continue;
        }
        if (!skip_until.empty()) {
            ++i;
            continue;
        }
        if (c == '&') {
            std::size_t semi = html.find(';', i + 1);
            if (semi != std::string_view::npos && semi - i <= 10) {
                detail::decode_entity(html.substr(i + 1, semi - i - 1), raw);
                i = semi + 1;
                continue;
            }
        }
        raw.push_back(c);
        ++i;
    }

    // Normalize: collapse horizontal whitespace, trim line edges, and cap
    // blank-line runs.
    std::string out;
    out.reserve(raw.size());
    std::istringstream lines(raw);
    std::string line;
    bool wrote_any = false;
    while (std::getline(lines, line)) {
        std::string collapsed;
        bool in_space = true;
        for (char ch : line) {
            if (ch == ' ' || ch == '\t' || ch == '\r') {
                if (!in_space) collapsed.push_back(' ');
                in_space = true;
            } else {
                collapsed.push_back(ch);
                in_space = false;
            }
        }
        while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
        if (collapsed.empty()) continue;
        if (wrote_any) out += '\n';
        out += collapsed;
        wrote_any = true;
    }
    return out;
}

//============================================================================
// Chunking
//============================================================================

struct ChunkingConfig {
    std::size_t parent_tokens = 1024;
    std::size_t child_tokens = 256;
    std::size_t overlap_tokens = 32;
};

struct ParentChunk {
    std::uint32_t doc_id = 0;
    std::uint64_t offset = 0;  // byte offset into the source text
    std::string text;
};

struct ChildChunk {
    std::uint32_t parent = 0;
    std::uint64_t offset = 0;
    std::string text;
    std::uint32_t token_len = 0;
    std::uint32_t overlap_bytes = 0;  // prefix shared with the previous sibling
};

namespace detail {

struct TokenSpan {
    std::size_t begin;
    std::size_t end;
};

inline std::vector<TokenSpan> whitespace_tokens(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                                   text[i] == '\r'))
            ++i;
        if (i >= text.size()) break;
        std::size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\n' &&
               text[i] != '\r')
            ++i;
        out.push_back({start, i});
    }
    return out;
}

inline bool ends_sentence(std::string_view token) {
    std::size_t end = token.size();
    while (end > 0) {
        char c = token[end - 1];
        if (c == '"' || c == '\'' || c == ')' || c == ']') {
            --end;
            continue;
        }
        return c == '.' || c == '!' || c == '?';
    }
    return false;
}

/// Chooses the end (exclusive token index) of a window starting at `begin`
/// with at most `max_len` tokens, preferring a sentence end in the tail
/// quarter of the window but never shrinking below `min_len` tokens.
inline std::size_t window_end(const std::vector<TokenSpan>& tokens, std::string_view text,
                              std::size_t begin, std::size_t max_len, std::size_t min_len,
                              std::size_t total_end) {
    std::size_t hard_end = std::min(begin + max_len, total_end);
    if (hard_end == total_end) return hard_end;
    std::size_t lookback = std::max<std::size_t>(max_len / 4, 1);
    std::size_t floor_end = std::max(begin + min_len, hard_end > lookback ? hard_end - lookback : begin + min_len);
    for (std::size_t e = hard_end; e > floor_end; --e) {
        const TokenSpan& t = tokens[e - 1];
        if (ends_sentence(text.substr(t.begin, t.end - t.begin))) return e;
    }
    return hard_end;
}

}  // namespace detail

//============================================================================
// Chunk index with BM25
//============================================================================

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 per-term contribution with the +1 idf smoothing, so scores
/// never go negative.
inline double bm25_term_score(double tf, double df, double doc_count, double doc_len,
                              double avg_len, const Bm25Params& params = {}) {
    if (tf <= 0) return 0.0;
    double idf = std::log((doc_count - df + 0.5) / (df + 0.5) + 1.0);
    double denom = tf + params.k1 * (1.0 - params.b + params.b * doc_len / std::max(avg_len, 1e-12));
    return idf * tf * (params.k1 + 1.0) / denom;
}

struct RetrievedChunk {
    std::uint32_t child_id = 0;
    double score = 0.0;
    std::string chunk_text;
    std::string parent_text;
    std::string doc_name;
};

/// Hook refining the sparse top-k; receives and returns the hits in ranked
/// order. The default is a pass-through.
using Reranker = std::function<std::vector<RetrievedChunk>(const std::string& query,
                                                           std::vector<RetrievedChunk> hits)>;

/// Inverted index over parent/child chunks. Immutable once built; queries
/// may run concurrently.
class ChunkIndex {
public:
    explicit ChunkIndex(ChunkingConfig chunking = {}, Bm25Params params = {})
        : chunking_(chunking), params_(params) {
        if (chunking_.child_tokens <= chunking_.overlap_tokens)
            throw Error(Errc::ConfigError, "child window must exceed the overlap");
    }

    void add_document(const std::string& name, const std::string& text) {
        if (text.empty()) return;
        std::uint32_t doc_id = static_cast<std::uint32_t>(doc_names_.size());
        doc_names_.push_back(name);
        chunk_document(doc_id, text);
    }

    /// Extracts text from HTML first; plain text is indexed as-is.
    void add_html_document(const std::string& name, const std::string& html) {
        add_document(name, html_to_text(html));
    }

    void finalize() {
        double total = 0;
        for (const ChildChunk& c : children_) total += c.token_len;
        avg_child_len_ = children_.empty() ? 0.0 : total / double(children_.size());
    }

    std::size_t parent_count() const { return parents_.size(); }
    std::size_t child_count() const { return children_.size(); }
    const std::vector<ParentChunk>& parents() const { return parents_; }
    const std::vector<ChildChunk>& children() const { return children_; }
    double average_child_len() const { return avg_child_len_; }

    std::uint64_t term_document_frequency(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    /// BM25 score of a tokenized query against one child.
    double bm25_score(const std::vector<std::string>& query_terms, std::uint32_t child_id) const {
        double score = 0;
        for (const std::string& term : query_terms) {
            auto it = postings_.find(fold_ascii_lower(term));
            if (it == postings_.end()) continue;
            const auto& list = it->second;
            auto hit = std::lower_bound(
                list.begin(), list.end(), child_id,
                [](const Posting& p, std::uint32_t id) { return p.child < id; });
            if (hit == list.end() || hit->child != child_id) continue;
            score += bm25_term_score(hit->tf, double(list.size()), double(children_.size()),
                                     double(children_[child_id].token_len), avg_child_len_,
                                     params_);
        }
        return score;
    }

    /// Top-k children by BM25 (ties broken by child id), each hit carrying
    /// its parent text; the optional reranker reorders the top-k.
    std::vector<RetrievedChunk> retrieve(const std::string& query, std::size_t k,
                                         const Reranker& reranker = {}) const {
        if (children_.empty()) throw Error(Errc::EmptyIndex, "no documents indexed");
        if (k == 0) throw Error(Errc::ValidationError, "k must be >= 1");

        std::vector<std::string> terms;
        for (const auto& span : detail::whitespace_tokens(query))
            terms.push_back(fold_ascii_lower(query.substr(span.begin, span.end - span.begin)));

        std::map<std::uint32_t, double> scores;
        for (const std::string& term : terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            for (const Posting& p : it->second) {
                scores[p.child] +=
                    bm25_term_score(p.tf, double(it->second.size()), double(children_.size()),
                                    double(children_[p.child].token_len), avg_child_len_, params_);
            }
        }

        std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (ranked.size() > k) ranked.resize(k);

        std::vector<RetrievedChunk> hits;
        for (const auto& [child_id, score] : ranked) {
            const ChildChunk& child = children_[child_id];
            const ParentChunk& parent = parents_[child.parent];
            hits.push_back({child_id, score, child.text, parent.text, doc_names_[parent.doc_id]});
        }
        if (reranker) hits = reranker(query, std::move(hits));
        return hits;
    }

    //------------------------------------------------------------------
    // Persistence: little-endian binary with a versioned magic header.
    //------------------------------------------------------------------
    static constexpr char kMagic[6] = {'E', 'R', 'D', 'X', '1', '\0'};

    std::string serialize() const {
        std::string out(kMagic, sizeof kMagic);
        put_u64(out, doc_names_.size());
        for (const std::string& name : doc_names_) put_str(out, name);
        put_u64(out, parents_.size());
        for (const ParentChunk& p : parents_) {
            put_u64(out, p.doc_id);
            put_u64(out, p.offset);
            put_str(out, p.text);
        }
        put_u64(out, children_.size());
        for (const ChildChunk& c : children_) {
            put_u64(out, c.parent);
            put_u64(out, c.offset);
            put_u64(out, c.token_len);
            put_u64(out, c.overlap_bytes);
            put_str(out, c.text);
        }
        put_u64(out, postings_.size());
        for (const auto& [term, list] : postings_) {
            put_str(out, term);
            put_u64(out, list.size());
            for (const Posting& p : list) {
                put_u64(out, p.child);
                put_u64(out, p.tf);
            }
        }
        return out;
    }

    static ChunkIndex deserialize(const std::string& bytes, ChunkingConfig chunking = {},
                                  Bm25Params params = {}) {
        if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
            throw Error(Errc::IoError, "not an index file (bad magic)");
        ChunkIndex idx(chunking, params);
        std::size_t pos = sizeof kMagic;
        std::uint64_t docs = get_u64(bytes, pos);
        for (std::uint64_t i = 0; i < docs; ++i) idx.doc_names_.push_back(get_str(bytes, pos));
        std::uint64_t parents = get_u64(bytes, pos);
        for (std::uint64_t i = 0; i < parents; ++i) {
            ParentChunk p;
            p.doc_id = static_cast<std::uint32_t>(get_u64(bytes, pos));
            p.offset = get_u64(bytes, pos);
            p.text = get_str(bytes, pos);
            idx.parents_.push_back(std::move(p));
        }
        std::uint64_t children = get_u64(bytes, pos);
        for (std::uint64_t i = 0; i < children; ++i) {
            ChildChunk c;
            c.parent = static_cast<std::uint32_t>(get_u64(bytes, pos));
            c.offset = get_u64(bytes, pos);
            c.token_len = static_cast<std::uint32_t>(get_u64(bytes, pos));
            c.overlap_bytes = static_cast<std::uint32_t>(get_u64(bytes, pos));
            c.text = get_str(bytes, pos);
            idx.children_.push_back(std::move(c));
        }
        std::uint64_t terms = get_u64(bytes, pos);
        for (std::uint64_t i = 0; i < terms; ++i) {
            std::string term = get_str(bytes, pos);
            std::uint64_t n = get_u64(bytes, pos);
            std::vector<Posting> list;
            for (std::uint64_t jj = 0; jj < n; ++jj) {
                Posting p;
                p.child = static_cast<std::uint32_t>(get_u64(bytes, pos));
                p.tf = static_cast<std::uint32_t>(get_u64(bytes, pos));
                list.push_back(p);
            }
            idx.postings_.emplace(std::move(term), std::move(list));
        }
        idx.finalize();
        return idx;
    }

    void save(const std::string& path) const { write_file(path, serialize()); }
    static ChunkIndex load(const std::string& path, ChunkingConfig chunking = {},
                           Bm25Params params = {}) {
        return deserialize(read_file(path), chunking, params);
    }

private:
    struct Posting {
        std::uint32_t child;
        std::uint32_t tf;
    };

    ChunkingConfig chunking_;
    Bm25Params params_;
    std::vector<std::string> doc_names_;
    std::vector<ParentChunk> parents_;
    std::vector<ChildChunk> children_;
    std::map<std::string, std::vector<Posting>> postings_;
    double avg_child_len_ = 0.0;

    void chunk_document(std::uint32_t doc_id, const std::string& text) {
        std::vector<detail::TokenSpan> tokens = detail::whitespace_tokens(text);
        if (tokens.empty()) return;

        std::size_t parent_begin_tok = 0;
        std::size_t parent_begin_byte = 0;
        while (parent_begin_tok < tokens.size()) {
            std::size_t parent_end_tok = detail::window_end(
                tokens, text, parent_begin_tok, chunking_.parent_tokens, 1, tokens.size());
            std::size_t parent_end_byte = parent_end_tok == tokens.size()
                                              ? text.size()
                                              : tokens[parent_end_tok].begin;

            std::uint32_t parent_idx = static_cast<std::uint32_t>(parents_.size());
            ParentChunk parent;
            parent.doc_id = doc_id;
            parent.offset = parent_begin_byte;
            parent.text = text.substr(parent_begin_byte, parent_end_byte - parent_begin_byte);
            parents_.push_back(std::move(parent));

            chunk_children(parent_idx, text, tokens, parent_begin_tok, parent_end_tok,
                           parent_begin_byte, parent_end_byte);

            parent_begin_tok = parent_end_tok;
            parent_begin_byte = parent_end_byte;
        }
    }

    void chunk_children(std::uint32_t parent_idx, const std::string& text,
                        const std::vector<detail::TokenSpan>& tokens, std::size_t begin_tok,
                        std::size_t end_tok, std::size_t begin_byte, std::size_t end_byte) {
        std::size_t min_len = chunking_.overlap_tokens + 1;  // guarantees forward progress
        std::size_t s = begin_tok;
        bool first = true;
        while (s < end_tok) {
            std::size_t e =
                detail::window_end(tokens, text, s, chunking_.child_tokens, min_len, end_tok);
            std::size_t slice_begin = first ? begin_byte : tokens[s].begin;
            std::size_t slice_end = e == end_tok ? end_byte : tokens[e].begin;

            ChildChunk child;
            child.parent = parent_idx;
            child.offset = slice_begin;
            child.text = text.substr(slice_begin, slice_end - slice_begin);
            child.token_len = static_cast<std::uint32_t>(e - s);
            if (!first) {
                // bytes shared with the previous sibling: from this child's
                // start to the previous child's end token
                std::size_t prev_end_tok = s + chunking_.overlap_tokens;
                std::size_t prev_end_byte =
                    prev_end_tok >= end_tok ? end_byte : tokens[prev_end_tok].begin;
                child.overlap_bytes = static_cast<std::uint32_t>(prev_end_byte - slice_begin);
            }
            std::uint32_t child_id = static_cast<std::uint32_t>(children_.size());
            index_terms(child_id, text, tokens, s, e);
            children_.push_back(std::move(child));

            if (e >= end_tok) break;
            s = e - chunking_.overlap_tokens;
            first = false;
        }
    }

    void index_terms(std::uint32_t child_id, const std::string& text,
                     const std::vector<detail::TokenSpan>& tokens, std::size_t begin,
                     std::size_t end) {
        std::map<std::string, std::uint32_t> tf;
        for (std::size_t i = begin; i < end; ++i)
            ++tf[fold_ascii_lower(
                std::string_view(text).substr(tokens[i].begin, tokens[i].end - tokens[i].begin))];
        for (const auto& [term, count] : tf) postings_[term].push_back({child_id, count});
    }

    static void put_u64(std::string& out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    static void put_str(std::string& out, const std::string& s) {
        put_u64(out, s.size());
        out += s;
    }
    static std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
        if (pos + 8 > in.size()) throw Error(Errc::IoError, "truncated index file");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    static std::string get_str(const std::string& in, std::size_t& pos) {
        std::uint64_t n = get_u64(in, pos);
        if (pos + n > in.size()) throw Error(Errc::IoError, "truncated index file");
        std::string s = in.substr(pos, n);
        pos += n;
        return s;
    }
};

//============================================================================
// Documents GET
//============================================================================

struct DocsGetConfig {
    std::size_t k = 5;
    Reranker reranker;
    bool dense_fusion = false;           // 0.5 * normalized sparse + 0.5 * dense
    const Embedder* embedder = nullptr;  // required when dense_fusion is on
};

/// Builds the store from a directory of .html/.txt files.
class DocumentStore {
public:
    explicit DocumentStore(ChunkingConfig chunking = {}, Bm25Params params = {})
        : index_(chunking, params) {}

    void load_directory(const std::string& dir) {
        if (!std::filesystem::is_directory(dir))
            throw Error(Errc::IoError, "'" + dir + "' is not a directory");
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension();
            if (ext == ".html" || ext == ".htm" || ext == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error(Errc::IoError, "no .html/.txt documents in '" + dir + "'");
        for (const auto& f : files) {
            std::string body = read_file(f.string());
            if (f.extension() == ".txt")
                index_.add_document(f.filename().string(), body);
            else
                index_.add_html_document(f.filename().string(), body);
        }
        index_.finalize();
    }

    ChunkIndex& index() { return index_; }
    const ChunkIndex& index() const { return index_; }

private:
    ChunkIndex index_;
};

namespace detail {

inline std::vector<RetrievedChunk> retrieve_with_config(const ChunkIndex& index,
                                                        const std::string& query,
                                                        const DocsGetConfig& cfg) {
    std::vector<RetrievedChunk> hits = index.retrieve(query, cfg.k, cfg.reranker);
    if (cfg.dense_fusion && cfg.embedder && !hits.empty()) {
        double max_sparse = 0;
        for (const RetrievedChunk& h : hits) max_sparse = std::max(max_sparse, h.score);
        Embedder::Vec probe = cfg.embedder->embed(query);
        for (RetrievedChunk& h : hits) {
            double sparse = max_sparse > 0 ? h.score / max_sparse : 0.0;
            double dense = Embedder::cosine(probe, cfg.embedder->embed(h.chunk_text));
            h.score = 0.5 * sparse + 0.5 * dense;
        }
        std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.child_id < b.child_id;
        });
    }
    return hits;
}

}  // namespace detail

/// GET over a document index. The retrieval query is the conjunction of the
/// condition's literal values plus the requested attribute names. When the
/// condition binds search_key values, one retrieval runs per key and the
/// records carry that key, so joins into a document source stay pairable.
/// Records expose `chunk` (child text) and `content` (parent text); other
/// requested attributes go through gateway extraction over the chunk.
inline EntitySet docs_get(const ChunkIndex& index, const GetNode& node, Gateway& gateway,
                          const DocsGetConfig& cfg = {}, const std::string& query_context = {}) {
    SearchKeySplit split = split_search_keys(node.condition);

    std::vector<std::string> base_terms;
    if (split.residual) collect_literal_values(*split.residual, base_terms);
    for (const std::string& attr : node.attributes) base_terms.push_back(attr);

    auto run_one = [&](const std::optional<std::string>& key) {
        std::string query;
        if (key) query = *key;
        for (const std::string& term : base_terms) {
            if (!query.empty()) query += ' ';
            query += term;
        }
        std::vector<RetrievedChunk> hits = detail::retrieve_with_config(index, query, cfg);
        std::vector<Record> records;
        for (const RetrievedChunk& hit : hits) {
            Record rec;
            for (const std::string& attr : node.attributes) {
                if (attr == kAttrChunk) {
                    rec[attr] = Value{hit.chunk_text};
                } else if (attr == kAttrContent) {
                    rec[attr] = Value{hit.parent_text};
                } else if (attr == kAttrSearchKey) {
                    rec[attr] = key ? Value{*key} : Value{};
                } else {
                    auto extracted = gateway.extract_attribute(
                        hit.chunk_text, attr, query_context.empty() ? query : query_context);
                    rec[attr] = extracted ? Value{*extracted} : Value{};
                }
            }
            records.push_back(std::move(rec));
        }
        return records;
    };

    EntitySet out;
    if (split.keys.empty()) {
        out.records = run_one(std::nullopt);
    } else {
        for (const std::string& key : split.keys) {
            std::vector<Record> part = run_one(key);
            for (Record& r : part) out.records.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace errag
