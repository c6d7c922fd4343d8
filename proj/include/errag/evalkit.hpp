// evalkit.hpp - answer-scoring metrics: stem-based subset accuracy and an
// LLM judge behind the gateway.
//
// The stemmer is the Porter algorithm as published in 1980 (no later
// amendments such as the logi rule); tokens that are not purely alphabetic
// pass through unstemmed.
#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "errag/common.hpp"
#include "errag/llm_gateway.hpp"

namespace errag {

namespace porter {

class Stemmer {
public:
    std::string stem(std::string word) {
        for (char c : word)
            if (c < 'a' || c > 'z') return word;  // caller lowercases; skip non-alpha
        if (word.size() <= 2) return word;
        w_ = std::move(word);
        step1a();
        step1b();
        step1c();
        step2();
        step3();
        step4();
        step5a();
        step5b();
        return w_;
    }

private:
    std::string w_;

    bool is_consonant(std::size_t i) const {
        char c = w_[i];
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
        if (c == 'y') return i == 0 ? true : !is_consonant(i - 1);
        return true;
    }

    /// Measure of w_[0..len): number of VC sequences in [C](VC)^m[V].
    int measure(std::size_t len) const {
        int m = 0;
        std::size_t i = 0;
        while (i < len && is_consonant(i)) ++i;
        while (i < len) {
            while (i < len && !is_consonant(i)) ++i;
            if (i >= len) break;
            ++m;
            while (i < len && is_consonant(i)) ++i;
        }
        return m;
    }

    bool has_vowel(std::size_t len) const {
        for (std::size_t i = 0; i < len; ++i)
            if (!is_consonant(i)) return true;
        return false;
    }

    bool ends_with(const char* suffix) const {
        std::size_t n = std::strlen(suffix);
        return w_.size() >= n && w_.compare(w_.size() - n, n, suffix) == 0;
    }

    std::size_t stem_len(const char* suffix) const { return w_.size() - std::strlen(suffix); }

    bool double_consonant_at_end() const {
        std::size_t n = w_.size();
        return n >= 2 && w_[n - 1] == w_[n - 2] && is_consonant(n - 1);
    }

    /// *o: stem ends cvc where the final c is not w, x or y.
    bool cvc_at(std::size_t len) const {
        if (len < 3) return false;
        if (!is_consonant(len - 3) || is_consonant(len - 2) || !is_consonant(len - 1))
            return false;
        char c = w_[len - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool replace(const char* suffix, const char* repl, int min_measure) {
        if (!ends_with(suffix)) return false;
        std::size_t len = stem_len(suffix);
        if (measure(len) <= min_measure) return true;  // matched but condition failed
        w_ = w_.substr(0, len) + repl;
        return true;
    }

    void step1a() {
        if (ends_with("sses")) {
            w_.resize(w_.size() - 2);
        } else if (ends_with("ies")) {
            w_.resize(w_.size() - 2);
        } else if (ends_with("ss")) {
            // keep
        } else if (ends_with("s")) {
            w_.pop_back();
        }
    }

    void step1b() {
        if (ends_with("eed")) {
            if (measure(stem_len("eed")) > 0) w_.pop_back();
            return;
        }
        bool fired = false;
        if (ends_with("ed") && has_vowel(stem_len("ed"))) {
            w_.resize(stem_len("ed"));
            fired = true;
        } else if (ends_with("ing") && has_vowel(stem_len("ing"))) {
            w_.resize(stem_len("ing"));
            fired = true;
        }
        if (!fired) return;
        if (ends_with("at") || ends_with("bl") || ends_with("iz")) {
            w_.push_back('e');
        } else if (double_consonant_at_end()) {
            char c = w_.back();
            if (c != 'l' && c != 's' && c != 'z') w_.pop_back();
        } else if (measure(w_.size()) == 1 && cvc_at(w_.size())) {
            w_.push_back('e');
        }
    }

    void step1c() {
        if (ends_with("y") && has_vowel(w_.size() - 1)) w_.back() = 'i';
    }

    void step2() {
        static const std::pair<const char*, const char*> rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        };
        for (const auto& [suffix, repl] : rules)
            if (replace(suffix, repl, 0)) return;
    }

    void step3() {
        static const std::pair<const char*, const char*> rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        };
        for (const auto& [suffix, repl] : rules)
            if (replace(suffix, repl, 0)) return;
    }

    void step4() {
        static const char* suffixes[] = {"al",    "ance", "ence", "er",  "ic",  "able",
                                         "ible",  "ant",  "ement", "ment", "ent", "ion",
                                         "ou",    "ism",  "ate",  "iti", "ous", "ive",
                                         "ize"};
        for (const char* suffix : suffixes) {
            if (!ends_with(suffix)) continue;
            std::size_t len = stem_len(suffix);
            if (std::strcmp(suffix, "ion") == 0) {
                if (len > 0 && (w_[len - 1] == 's' || w_[len - 1] == 't') && measure(len) > 1)
                    w_.resize(len);
                return;
            }
            if (measure(len) > 1) w_.resize(len);
            return;
        }
    }

    void step5a() {
        if (!ends_with("e")) return;
        std::size_t len = w_.size() - 1;
        int m = measure(len);
        if (m > 1 || (m == 1 && !cvc_at(len))) w_.pop_back();
    }

    void step5b() {
        if (measure(w_.size()) > 1 && double_consonant_at_end() && w_.back() == 'l')
            w_.pop_back();
    }
};

inline std::string stem(const std::string& lowercase_word) {
    static thread_local Stemmer stemmer;
    return stemmer.stem(lowercase_word);
}

}  // namespace porter

/// Lowercased tokens split on non-alphanumeric characters.
inline std::vector<std::string> alnum_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string token;
    for (char c : text) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (!token.empty()) {
            out.push_back(token);
            token.clear();
        }
    }
    if (!token.empty()) out.push_back(token);
    return out;
}

inline std::set<std::string> stemmed_token_set(const std::string& text) {
    std::set<std::string> out;
    for (const std::string& token : alnum_tokens(text)) out.insert(porter::stem(token));
    return out;
}

/// 1 iff every stemmed ground-truth token appears among the stemmed
/// prediction tokens; an empty ground truth counts as correct.
inline int stem_accuracy(const std::string& prediction, const std::string& ground_truth) {
    std::set<std::string> truth = stemmed_token_set(ground_truth);
    if (truth.empty()) return 1;
    std::set<std::string> pred = stemmed_token_set(prediction);
    for (const std::string& token : truth)
        if (!pred.count(token)) return 0;
    return 1;
}

/// Boolean judge verdict via the gateway; the completion must be a strict
/// True/False token (surrounding whitespace ignored).
inline bool llm_judge(const std::string& question, const std::string& ground_truth,
                      const std::string& prediction, Gateway& gateway) {
    std::string prompt = render_prompt("llm_judge", {{"Question", question},
                                                     {"GroundTruth", ground_truth},
                                                     {"Prediction", prediction}});
    std::string verdict = fold_ascii_lower(trim_copy(gateway.complete(prompt)));
    if (verdict == "true") return true;
    if (verdict == "false") return false;
    throw Error(Errc::UnparseableVerdict, "judge answered '" + verdict + "'");
}

}  // namespace errag
