// embedder.hpp - deterministic stub text embedder (hashed character trigrams)
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "errag/common.hpp"

namespace errag {

/// Embedding vector interface. The default implementation hashes case-folded
/// character trigrams into a small dense vector; it has no learned weights
/// and exists so retrieval code paths that expect an embedder stay
/// exercisable and deterministic.
class Embedder {
public:
    static constexpr std::size_t kDim = 64;
    using Vec = std::array<float, kDim>;

    virtual ~Embedder() = default;

    virtual Vec embed(std::string_view text) const {
        Vec v{};
        std::string folded = fold_ascii_lower(text);
        if (folded.size() >= 3) {
            for (std::size_t i = 0; i + 3 <= folded.size(); ++i)
                v[hash_trigram(folded.data() + i)] += 1.0f;
        } else if (!folded.empty()) {
            v[hash_trigram_padded(folded)] += 1.0f;
        }
        normalize(v);
        return v;
    }

    static double cosine(const Vec& a, const Vec& b) {
        double dot = 0;
        for (std::size_t i = 0; i < kDim; ++i) dot += double(a[i]) * double(b[i]);
        return dot;
    }

    double similarity(std::string_view a, std::string_view b) const {
        return cosine(embed(a), embed(b));
    }

private:
    static std::size_t fnv1a(const char* data, std::size_t n) {
        std::uint64_t h = 1469598103934665603ull;
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h % kDim);
    }
    static std::size_t hash_trigram(const char* p) { return fnv1a(p, 3); }
    static std::size_t hash_trigram_padded(const std::string& s) {
        char buf[3] = {' ', ' ', ' '};
        for (std::size_t i = 0; i < s.size() && i < 3; ++i) buf[i] = s[i];
        return fnv1a(buf, 3);
    }
    static void normalize(Vec& v) {
        double norm = 0;
        for (float x : v) norm += double(x) * double(x);
        if (norm <= 0) return;
        float inv = static_cast<float>(1.0 / std::sqrt(norm));
        for (float& x : v) x *= inv;
    }
};

}  // namespace errag
