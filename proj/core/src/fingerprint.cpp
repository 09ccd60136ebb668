#include "taiji/fingerprint.hpp"

#include <bit>
#include <map>

namespace taiji {

std::vector<std::string> shingles(const std::vector<std::string>& tokens, int n) {
    if (n < 1) throw Error("shingle size must be >= 1");
    if (tokens.size() < static_cast<size_t>(n)) {
        throw Error("document shorter than shingle size " + std::to_string(n));
    }
    std::vector<std::string> out;
    out.reserve(tokens.size() - static_cast<size_t>(n) + 1);
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
        std::string s = tokens[i];
        for (size_t j = i + 1; j < i + static_cast<size_t>(n); ++j) {
            s += '\x1f';
            s += tokens[j];
        }
        out.push_back(std::move(s));
    }
    return out;
}

MinHashSignature minhash_signature(const std::vector<std::string>& tokens, int shingle_n,
                                   int permutations, uint64_t seed) {
    if (permutations < 1) throw Error("permutation count must be >= 1");
    auto grams = shingles(tokens, shingle_n);

    std::vector<uint64_t> base;
    base.reserve(grams.size());
    for (const auto& g : grams) base.push_back(fnv1a64(g));

    MinHashSignature sig;
    sig.values.assign(static_cast<size_t>(permutations),
                      std::numeric_limits<uint64_t>::max());
    for (size_t p = 0; p < sig.values.size(); ++p) {
        uint64_t perm_seed = splitmix64(seed + 0x9e3779b97f4a7c15ULL * (p + 1));
        uint64_t best = std::numeric_limits<uint64_t>::max();
        for (uint64_t h : base) {
            uint64_t v = splitmix64(h ^ perm_seed);
            if (v < best) best = v;
        }
        sig.values[p] = best;
    }
    return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.values.empty()) {
        throw Error("signatures must have equal nonzero length");
    }
    size_t match = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] == b.values[i]) match++;
    }
    return static_cast<double>(match) / static_cast<double>(a.values.size());
}

std::vector<uint64_t> lsh_band_hashes(const MinHashSignature& sig, int bands) {
    if (bands < 1 || sig.values.size() % static_cast<size_t>(bands) != 0) {
        throw Error("band count must divide signature length");
    }
    size_t rows = sig.values.size() / static_cast<size_t>(bands);
    std::vector<uint64_t> out;
    out.reserve(static_cast<size_t>(bands));
    for (int b = 0; b < bands; ++b) {
        uint64_t h = splitmix64(0xba4d0000ULL + static_cast<uint64_t>(b));
        for (size_t r = 0; r < rows; ++r) {
            h = splitmix64(h ^ sig.values[static_cast<size_t>(b) * rows + r]);
        }
        out.push_back(h);
    }
    return out;
}

SimHashFingerprint simhash_fingerprint(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error("simhash over an empty document");
    std::map<std::string, int> tf;
    for (const auto& t : tokens) tf[t]++;

    int acc[64] = {0};
    for (const auto& [token, weight] : tf) {
        uint64_t h = stable_hash(token);
        for (int bit = 0; bit < 64; ++bit) {
            acc[bit] += (h >> bit & 1) ? weight : -weight;
        }
    }
    SimHashFingerprint fp;
    for (int bit = 0; bit < 64; ++bit) {
        if (acc[bit] > 0) fp.bits |= (1ull << bit);
    }
    return fp;
}

int hamming_distance(SimHashFingerprint a, SimHashFingerprint b) {
    return std::popcount(a.bits ^ b.bits);
}

}  // namespace taiji
