#include "taiji/agent.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "taiji/common.hpp"
#include "taiji/expression.hpp"

namespace taiji {

const char* const kFurnitureQ1Expression =
    "scan(furniture) | filter(category == \"chair\" && pieces == 2) | "
    "join(scan(image), furniture.id == image.fid) | "
    "sem_match(image, \"images with two chairs\", 0.5)";

const char* const kFurnitureQ2Expression =
    "scan(furniture) | filter(category == \"chair\" && color == \"black\" && "
    "material == \"leather\") | "
    "join(scan(image), furniture.id == image.fid) | "
    "sem_match(image, \"images with a black chair\", 0.5)";

const char* const kFurnitureQ3Expression =
    "scan(furniture) | filter(category == \"dining_set\" && material == \"wood\") | "
    "join(scan(image), furniture.id == image.fid) | "
    "sem_match(image, \"images with table and chair\", 0.5)";

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

RuleStub RuleStub::with_default_rules() {
    return RuleStub({
        {{"two chairs"}, kFurnitureQ1Expression},
        {{"table", "chair"}, kFurnitureQ3Expression},
        {{"black", "chair"}, kFurnitureQ2Expression},
    });
}

std::string RuleStub::translate(const std::string& nl_query, const CatalogSummary& catalog,
                                const std::string& /*repair_feedback*/) {
    std::string q = lowercase(nl_query);
    if (q.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error("untranslatable: empty query");
    }
    for (const auto& rule : rules_) {
        bool all = std::all_of(rule.keywords.begin(), rule.keywords.end(),
                               [&](const std::string& k) { return q.find(k) != std::string::npos; });
        if (all) return rule.expression;
    }
    // Generic fallback: strip query stopwords, semantically match images of
    // whatever remains.
    static const std::set<std::string> stop = {"find", "a", "an", "the", "set", "of",
                                               "me",   "show", "get", "some", "with"};
    std::istringstream words(q);
    std::string w, phrase;
    while (words >> w) {
        w.erase(std::remove_if(w.begin(), w.end(),
                               [](unsigned char c) { return !std::isalnum(c); }),
                w.end());
        if (w.empty() || stop.count(w)) continue;
        if (!phrase.empty()) phrase += " ";
        phrase += w;
    }
    if (phrase.empty() || !catalog.dataset_ids.count("furniture")) {
        throw Error("untranslatable: no rule matched \"" + nl_query + "\"");
    }
    return "scan(furniture) | join(scan(image), furniture.id == image.fid) | "
           "sem_match(image, \"images with " + phrase + "\", 0.5)";
}

RemoteAgent::RemoteAgent(Options opts) : opts_(std::move(opts)) {}

RemoteAgent RemoteAgent::from_env() {
    Options o;
    if (const char* url = std::getenv("TAIJI_AGENT_URL")) o.url = url;
    if (const char* key = std::getenv("TAIJI_AGENT_KEY")) o.api_key = key;
    if (const char* model = std::getenv("TAIJI_AGENT_MODEL")) o.model = model;
    return RemoteAgent(std::move(o));
}

std::string RemoteAgent::prompt_template(const CatalogSummary& catalog) {
    std::string p =
        "You translate analytical questions into a pipeline expression language.\n"
        "Grammar:\n"
        "  pipeline  := stage ('|' stage)*\n"
        "  stage     := scan(dataset) | filter(pred) | project(col, ...) | limit(n)\n"
        "             | join(pipeline, left.col == right.col)\n"
        "             | sem_match(modality, \"text\", threshold)\n"
        "             | sem_join(pipeline, left.col == right.col, modality, \"text\", threshold)\n"
        "             | sem_extract(modality, \"field\", ...)\n"
        "  pred      := comparisons (== != < <= > >=), contains(a, b), && || ! ( )\n"
        "  modality  := relational | semi_structured | text | image | vector\n"
        "Datasets:\n" + catalog.schema_text +
        "Reply with exactly one pipeline expression and nothing else.\n";
    return p;
}

std::string RemoteAgent::translate(const std::string& nl_query, const CatalogSummary& catalog,
                                   const std::string& repair_feedback) {
    if (opts_.url.empty()) throw Error("agent unreachable: no endpoint configured");
    auto slash = opts_.url.find('/', opts_.url.find("//") + 2);
    std::string host = slash == std::string::npos ? opts_.url : opts_.url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : opts_.url.substr(slash);

    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", prompt_template(catalog)}});
    messages.push_back({{"role", "user"}, {"content", nl_query}});
    if (!repair_feedback.empty()) {
        messages.push_back({{"role", "user"},
                            {"content", "Your previous reply failed to parse: " + repair_feedback +
                                            "\nReply again with only a valid expression."}});
    }
    nlohmann::json body{{"model", opts_.model}, {"messages", messages}};

    httplib::Client client(host);
    client.set_read_timeout(opts_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw Error("agent unreachable: " + host);
    if (res->status != 200) {
        throw Error("agent error " + std::to_string(res->status) + ": " + res->body);
    }
    auto reply = nlohmann::json::parse(res->body);
    std::string content = reply.at("choices").at(0).at("message").at("content").get<std::string>();

    // Strip code fences and surrounding whitespace.
    auto strip = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r\n`");
        size_t b = s.find_last_not_of(" \t\r\n`");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    return strip(content);
}

QueryPlan translate_nl(const std::string& nl_query, AgentClient& client,
                       const CatalogSummary& catalog) {
    std::string expr = client.translate(nl_query, catalog, "");
    try {
        return parse_expression(expr, catalog.dataset_ids);
    } catch (const Error& first) {
        // One bounded repair round-trip with the parse error.
        std::string repaired = client.translate(nl_query, catalog, first.what());
        try {
            return parse_expression(repaired, catalog.dataset_ids);
        } catch (const Error& second) {
            throw Error("untranslatable after repair: " + std::string(second.what()));
        }
    }
}

}  // namespace taiji
