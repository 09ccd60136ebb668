#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taiji/common.hpp"

namespace taiji {

// Token-level n-gram shingles of a token stream.
std::vector<std::string> shingles(const std::vector<std::string>& tokens, int n);

// MinHash signature: h independent permutations simulated by seeded mixing of
// a base 64-bit shingle hash. Position-match fraction estimates Jaccard.
struct MinHashSignature {
    std::vector<uint64_t> values;  // length h
};

MinHashSignature minhash_signature(const std::vector<std::string>& tokens, int shingle_n,
                                   int permutations, uint64_t seed);
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

// LSH banding over a signature: band hashes for candidate-pair generation.
// With r = h/b rows per band, any pair whose signatures agree on more than
// h - b positions shares at least one full band (pigeonhole), so candidate
// generation is lossless for thresholds tau >= 1 - b/h.
std::vector<uint64_t> lsh_band_hashes(const MinHashSignature& sig, int bands);

// 64-bit SimHash over the token multiset, weighted by term frequency.
// Identical token multisets produce identical fingerprints.
struct SimHashFingerprint {
    uint64_t bits = 0;
};

SimHashFingerprint simhash_fingerprint(const std::vector<std::string>& tokens);
int hamming_distance(SimHashFingerprint a, SimHashFingerprint b);

}  // namespace taiji
