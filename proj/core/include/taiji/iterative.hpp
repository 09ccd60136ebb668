#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/value.hpp"

namespace taiji {

// Result-quality dimensions of one retrieval pass. composite is the weighted
// combination w . (coverage, 1-redundancy, 1-ambiguity, informativeness).
struct EvidenceScore {
    double coverage = 0.0;
    double redundancy = 0.0;
    double ambiguity = 0.0;
    double informativeness = 0.0;
    double composite = 0.0;

    nlohmann::json to_json() const;
};

struct LoopWeights {
    double coverage = 0.4;
    double redundancy = 0.2;
    double ambiguity = 0.2;
    double informativeness = 0.2;
};

struct LoopConfig {
    LoopWeights weights;
    double confidence_threshold = 0.7;  // composite cutoff for early exit
    int budget = 4;                     // max iterations
    double relax_delta = 0.1;           // threshold relaxation step
    double coverage_low = 0.5;
    double redundancy_high = 0.9;
    double ambiguity_high = 0.9;
};

// The server-local sub-query the loop revises between passes.
struct SubQuery {
    std::string text;
    std::vector<std::string> terms;  // predicate terms scored for coverage
    double threshold = 0.5;          // match threshold passed to retrieval
    int k = 10;
    bool diversify = false;          // dissimilarity constraint requested

    nlohmann::json to_json() const;
};

// One retrieved candidate: relevance score plus optional embedding/text used
// for redundancy and term matching.
struct ScoredItem {
    ItemRef item;
    double score = 0.0;
    std::vector<float> embedding;
    std::string text;
};

struct LoopResult {
    std::vector<ScoredItem> items;
    // ranked candidates beyond k; the k/k+1 margin feeds the ambiguity score
    std::vector<ScoredItem> overflow;
};

using LoopExecutor = std::function<LoopResult(const SubQuery&)>;
using TermMatcher = std::function<bool(const std::string& term, const ScoredItem& item)>;
// Bidirectional clarification: the host may reply with an amended predicate,
// or nullopt for "proceed".
using ClarificationChannel =
    std::function<std::optional<std::string>(const SubQuery&, const EvidenceScore&)>;

// Case-insensitive containment of the term in the item's text.
TermMatcher default_term_matcher();

EvidenceScore score_results(const LoopResult& result, const SubQuery& task,
                            const LoopWeights& weights,
                            const TermMatcher& matches = default_term_matcher());

enum class RefineAction { RelaxThreshold, DropTerm, Diversify, RaiseK, Clarify };
std::string to_string(RefineAction a);

struct RefineOutcome {
    SubQuery query;
    RefineAction action;
};

// First matching deterministic rule: low coverage -> broaden (relax threshold,
// or drop the last term once fully relaxed); high redundancy -> diversify;
// high ambiguity -> raise k; otherwise request clarification.
RefineOutcome refine(const SubQuery& query, const EvidenceScore& score, const LoopConfig& config);

struct LoopTraceEntry {
    int iteration = 0;
    SubQuery query;
    EvidenceScore score;
    std::string action;  // applied after this pass; "stop"/"early-exit" at the end
};

struct LoopOutcome {
    LoopResult best;
    EvidenceScore best_score;
    SubQuery best_query;
    int iterations = 0;
    std::vector<LoopTraceEntry> history;

    nlohmann::json trace_json() const;  // emitted per sub-task for reporting
};

// Executor failures surface as LoopAbort carrying the partial history.
class LoopAbort : public Error {
public:
    LoopAbort(const std::string& what, std::vector<LoopTraceEntry> history)
        : Error(what), history_(std::move(history)) {}
    const std::vector<LoopTraceEntry>& history() const { return history_; }

private:
    std::vector<LoopTraceEntry> history_;
};

LoopOutcome run_loop(SubQuery initial, const LoopExecutor& executor, const LoopConfig& config,
                     const TermMatcher& matches = default_term_matcher(),
                     const ClarificationChannel& clarify = nullptr);

}  // namespace taiji
