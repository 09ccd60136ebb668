#include "taiji/iterative.hpp"

#include <algorithm>
#include <cctype>

#include "taiji/embedder.hpp"

namespace taiji {

nlohmann::json EvidenceScore::to_json() const {
    return {{"coverage", coverage},
            {"redundancy", redundancy},
            {"ambiguity", ambiguity},
            {"informativeness", informativeness},
            {"composite", composite}};
}

nlohmann::json SubQuery::to_json() const {
    return {{"text", text},
            {"terms", terms},
            {"threshold", threshold},
            {"k", k},
            {"diversify", diversify}};
}

std::string to_string(RefineAction a) {
    switch (a) {
        case RefineAction::RelaxThreshold: return "relax-threshold";
        case RefineAction::DropTerm: return "drop-term";
        case RefineAction::Diversify: return "diversify";
        case RefineAction::RaiseK: return "raise-k";
        case RefineAction::Clarify: return "clarify";
    }
    return "?";
}

TermMatcher default_term_matcher() {
    return [](const std::string& term, const ScoredItem& item) {
        auto lower = [](const std::string& s) {
            std::string out = s;
            std::transform(out.begin(), out.end(), out.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            return out;
        };
        return lower(item.text).find(lower(term)) != std::string::npos;
    };
}

EvidenceScore score_results(const LoopResult& result, const SubQuery& task,
                            const LoopWeights& weights, const TermMatcher& matches) {
    if (task.terms.empty()) throw Error("score_results needs at least one predicate term");
    EvidenceScore s;

    size_t satisfied = 0;
    for (const auto& term : task.terms) {
        bool hit = std::any_of(result.items.begin(), result.items.end(),
                               [&](const ScoredItem& item) { return matches(term, item); });
        if (hit) satisfied++;
    }
    s.coverage = static_cast<double>(satisfied) / static_cast<double>(task.terms.size());

    const auto& items = result.items;
    if (items.size() >= 2) {
        double sum = 0;
        size_t pairs = 0;
        for (size_t i = 0; i < items.size(); ++i) {
            for (size_t j = i + 1; j < items.size(); ++j) {
                double sim = 0.0;
                if (!items[i].embedding.empty() && !items[j].embedding.empty()) {
                    sim = cosine_similarity(items[i].embedding, items[j].embedding);
                } else if (!items[i].text.empty() && items[i].text == items[j].text) {
                    sim = 1.0;
                }
                sum += std::clamp(sim, 0.0, 1.0);
                pairs++;
            }
        }
        s.redundancy = sum / static_cast<double>(pairs);
    }

    if (!items.empty() && !result.overflow.empty()) {
        double kth = items.back().score;
        double next = result.overflow.front().score;
        double margin = std::clamp((kth - next) / std::max(std::abs(kth), 1e-9), 0.0, 1.0);
        s.ambiguity = 1.0 - margin;
    }

    if (!items.empty()) {
        double sum = 0;
        for (const auto& item : items) sum += item.score;
        s.informativeness = sum / static_cast<double>(items.size());
    }

    s.composite = weights.coverage * s.coverage + weights.redundancy * (1.0 - s.redundancy) +
                  weights.ambiguity * (1.0 - s.ambiguity) +
                  weights.informativeness * s.informativeness;
    return s;
}

RefineOutcome refine(const SubQuery& query, const EvidenceScore& score,
                     const LoopConfig& config) {
    SubQuery next = query;
    if (score.coverage < config.coverage_low) {
        if (next.threshold > 0.0) {
            next.threshold = std::max(0.0, next.threshold - config.relax_delta);
            return {next, RefineAction::RelaxThreshold};
        }
        if (next.terms.size() > 1) {
            next.terms.pop_back();
            return {next, RefineAction::DropTerm};
        }
        // nothing left to broaden; fall through to the later rules
    }
    if (score.redundancy > config.redundancy_high) {
        next.diversify = true;
        return {next, RefineAction::Diversify};
    }
    if (score.ambiguity > config.ambiguity_high) {
        next.k += std::max(1, next.k / 2);
        return {next, RefineAction::RaiseK};
    }
    return {next, RefineAction::Clarify};
}

nlohmann::json LoopOutcome::trace_json() const {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& e : history) {
        steps.push_back({{"iteration", e.iteration},
                         {"query", e.query.to_json()},
                         {"score", e.score.to_json()},
                         {"action", e.action}});
    }
    return {{"iterations", iterations},
            {"best_score", best_score.to_json()},
            {"best_query", best_query.to_json()},
            {"steps", steps}};
}

LoopOutcome run_loop(SubQuery initial, const LoopExecutor& executor, const LoopConfig& config,
                     const TermMatcher& matches, const ClarificationChannel& clarify) {
    if (config.budget < 1) throw Error("loop budget must be >= 1");

    LoopOutcome out;
    SubQuery query = std::move(initial);
    bool have_best = false;

    for (int iteration = 1; iteration <= config.budget; ++iteration) {
        LoopResult result;
        try {
            result = executor(query);
        } catch (const std::exception& e) {
            throw LoopAbort(std::string("executor failed: ") + e.what(), out.history);
        }
        EvidenceScore score = score_results(result, query, config.weights, matches);

        LoopTraceEntry entry;
        entry.iteration = iteration;
        entry.query = query;
        entry.score = score;
        out.iterations = iteration;

        if (!have_best || score.composite > out.best_score.composite) {
            out.best = result;
            out.best_score = score;
            out.best_query = query;
            have_best = true;
        }

        if (score.composite >= config.confidence_threshold) {
            entry.action = "early-exit";
            out.history.push_back(std::move(entry));
            break;
        }
        if (iteration == config.budget) {
            entry.action = "budget-exhausted";
            out.history.push_back(std::move(entry));
            break;
        }

        RefineOutcome refined = refine(query, score, config);
        entry.action = to_string(refined.action);
        if (refined.action == RefineAction::Clarify && clarify) {
            auto amended = clarify(query, score);
            if (amended) {
                refined.query.text = *amended;
                entry.action = "clarified";
            }
        }
        out.history.push_back(std::move(entry));
        query = std::move(refined.query);
    }
    return out;
}

}  // namespace taiji
