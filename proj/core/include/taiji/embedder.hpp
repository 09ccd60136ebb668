#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace taiji {

// Deterministic feature-hashing text embedder: lowercase word tokens and
// their n-grams hash into a fixed-dimension signed-count vector, L2
// normalized. A stand-in with the same contract as any real embedding
// provider; everything downstream only assumes cosine geometry.
struct EmbedderOptions {
    int dim = 64;
    int max_ngram = 3;  // unigrams .. n-grams over the token stream
    uint64_t seed = 0x5eedf00d;
};

std::vector<float> embed_text(const std::string& text, const EmbedderOptions& opts = {});

std::vector<std::string> tokenize(const std::string& text);

double cosine_similarity(std::span<const float> a, std::span<const float> b);
void l2_normalize(std::vector<float>& v);

}  // namespace taiji
