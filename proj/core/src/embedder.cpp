#include "taiji/embedder.hpp"

#include <cctype>
#include <cmath>

#include "taiji/common.hpp"

namespace taiji {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<float> embed_text(const std::string& text, const EmbedderOptions& opts) {
    std::vector<float> v(static_cast<size_t>(opts.dim), 0.0f);
    auto tokens = tokenize(text);
    for (int n = 1; n <= opts.max_ngram; ++n) {
        for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
            std::string gram;
            for (size_t j = i; j < i + static_cast<size_t>(n); ++j) {
                if (j > i) gram += " ";
                gram += tokens[j];
            }
            uint64_t h = stable_hash(gram, opts.seed);
            size_t slot = static_cast<size_t>(h % static_cast<uint64_t>(opts.dim));
            float sign = (h >> 63) ? 1.0f : -1.0f;
            v[slot] += sign;
        }
    }
    l2_normalize(v);
    return v;
}

void l2_normalize(std::vector<float>& v) {
    double norm = 0;
    for (float x : v) norm += static_cast<double>(x) * x;
    if (norm <= 0) return;
    float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (float& x : v) x *= inv;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw Error("cosine over mismatched dimensions");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace taiji
