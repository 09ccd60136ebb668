#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/value.hpp"

namespace taiji {

// Image predicates over the fixture grammar: an "images with ..." phrase
// compiles to label requirements {object, optional color, min count} joined
// by "and". Covers count, color, object, and conjunction.
struct LabelRequirement {
    std::string object;   // singular form
    std::string color;    // empty = any color
    int min_count = 1;

    bool operator==(const LabelRequirement&) const = default;
};

struct ImagePredicate {
    std::string text;
    std::vector<LabelRequirement> required;
};

ImagePredicate compile_image_predicate(const std::string& text);

// An image's label multiset, e.g. {"chair", "chair", "black sofa"}. A label
// is an object word optionally preceded by a color word.
struct ImageLabels {
    std::vector<std::string> labels;
};

bool eval_image_predicate(const ImagePredicate& predicate, const ImageLabels& labels);

// verdict + confidence for one item against a predicate text.
class VisionProvider {
public:
    virtual ~VisionProvider() = default;
    virtual std::pair<bool, double> classify(const ItemRef& item,
                                             const std::string& predicate_text) = 0;
};

// Deterministic fixture oracle: item id -> label multiset.
class LabelOracle : public VisionProvider {
public:
    explicit LabelOracle(std::map<std::string, ImageLabels> fixture);
    static LabelOracle load_json(const std::string& path);
    static std::map<std::string, ImageLabels> fixture_from_json(const nlohmann::json& j);

    std::pair<bool, double> classify(const ItemRef& item, const std::string& text) override;
    bool has_item(const std::string& item_id) const;
    size_t size() const { return fixture_.size(); }

private:
    std::map<std::string, ImageLabels> fixture_;
};

// LabelOracle with a seeded verdict flip of probability epsilon. The flip is
// a pure function of (seed, item id, predicate text), so classification stays
// deterministic across runs and transports.
class NoisyOracle : public VisionProvider {
public:
    NoisyOracle(std::shared_ptr<LabelOracle> inner, double epsilon, uint64_t seed);

    std::pair<bool, double> classify(const ItemRef& item, const std::string& text) override;
    bool would_flip(const std::string& item_id, const std::string& text) const;

private:
    std::shared_ptr<LabelOracle> inner_;
    double epsilon_;
    uint64_t seed_;
};

// HTTP vision model client: POST {item, predicate} -> {verdict, confidence}.
class RemoteVisionModel : public VisionProvider {
public:
    RemoteVisionModel(std::string url, int timeout_seconds = 30);
    std::pair<bool, double> classify(const ItemRef& item, const std::string& text) override;

private:
    std::string url_;
    int timeout_seconds_;
};

// Extraction provider for sem_extract: (item, field) -> value.
class ExtractionProvider {
public:
    virtual ~ExtractionProvider() = default;
    virtual Value extract(const ItemRef& item, const std::string& field) = 0;
};

// Fixture-backed extraction oracle: item id -> {field: value}.
class FieldOracle : public ExtractionProvider {
public:
    explicit FieldOracle(std::map<std::string, std::map<std::string, Value>> fixture);
    static FieldOracle load_json(const std::string& path);

    Value extract(const ItemRef& item, const std::string& field) override;

private:
    std::map<std::string, std::map<std::string, Value>> fixture_;
};

}  // namespace taiji
