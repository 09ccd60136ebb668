#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "taiji/plan.hpp"

namespace taiji {

struct CatalogSummary {
    std::set<std::string> dataset_ids;
    std::string schema_text;  // human/LLM-readable dataset + column listing
};

// Maps natural language to the operator-expression language. Implementations
// must tolerate concurrent translate() calls.
class AgentClient {
public:
    virtual ~AgentClient() = default;
    // `repair_feedback` carries the previous attempt's parse error on the
    // single bounded retry; empty on the first attempt.
    virtual std::string translate(const std::string& nl_query, const CatalogSummary& catalog,
                                  const std::string& repair_feedback) = 0;
};

// Deterministic keyword/template mapping. Rules are checked in order; the
// first rule whose keywords all appear (case-insensitive) in the query wins.
class RuleStub : public AgentClient {
public:
    struct Rule {
        std::vector<std::string> keywords;
        std::string expression;
    };

    explicit RuleStub(std::vector<Rule> rules) : rules_(std::move(rules)) {}

    // Template table for the furniture lake, covering the reference queries.
    static RuleStub with_default_rules();

    std::string translate(const std::string& nl_query, const CatalogSummary& catalog,
                          const std::string& repair_feedback) override;

private:
    std::vector<Rule> rules_;
};

// These expressions are the canonical translations of the three reference
// furniture queries; the benchmark fixture generator plants matching rows.
extern const char* const kFurnitureQ1Expression;
extern const char* const kFurnitureQ2Expression;
extern const char* const kFurnitureQ3Expression;

// HTTP client for any chat-completion endpoint. Endpoint, key, and model come
// from TAIJI_AGENT_URL / TAIJI_AGENT_KEY / TAIJI_AGENT_MODEL unless given.
class RemoteAgent : public AgentClient {
public:
    struct Options {
        std::string url;    // e.g. http://host:port/v1/chat/completions
        std::string api_key;
        std::string model = "gpt-4.1";
        int timeout_seconds = 30;
    };

    explicit RemoteAgent(Options opts);
    static RemoteAgent from_env();

    std::string translate(const std::string& nl_query, const CatalogSummary& catalog,
                          const std::string& repair_feedback) override;

    // The full instruction prefix sent before the user query.
    static std::string prompt_template(const CatalogSummary& catalog);

private:
    Options opts_;
};

// NL -> validated QueryPlan with one bounded repair round-trip: if the agent
// output fails to parse, the parse error is fed back once before giving up.
QueryPlan translate_nl(const std::string& nl_query, AgentClient& client,
                       const CatalogSummary& catalog);

}  // namespace taiji
