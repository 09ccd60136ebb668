#include "taiji/vision.hpp"

#include <fstream>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "taiji/common.hpp"
#include "taiji/embedder.hpp"
#include "taiji/result_set.hpp"

namespace taiji {

namespace {

const std::map<std::string, int>& count_words() {
    static const std::map<std::string, int> words = {
        {"a", 1},    {"an", 1},   {"one", 1},  {"two", 2},  {"three", 3}, {"four", 4},
        {"five", 5}, {"six", 6},  {"seven", 7}, {"eight", 8}, {"nine", 9}, {"ten", 10},
    };
    return words;
}

const std::set<std::string>& color_words() {
    static const std::set<std::string> colors = {"black", "white", "red",    "brown",
                                                 "green", "blue",  "gray",   "grey",
                                                 "yellow", "beige", "orange", "purple"};
    return colors;
}

std::string singular(const std::string& word) {
    if (word.size() > 3 && word.back() == 's' && word[word.size() - 2] != 's') {
        return word.substr(0, word.size() - 1);
    }
    return word;
}

// color + object from a label like "black chair" or "chair".
std::pair<std::string, std::string> parse_label(const std::string& label) {
    auto tokens = tokenize(label);
    std::string color, object;
    for (const auto& t : tokens) {
        if (object.empty() && color.empty() && color_words().count(t)) {
            color = t;
        } else {
            if (!object.empty()) object += " ";
            object += singular(t);
        }
    }
    return {color, object};
}

}  // namespace

ImagePredicate compile_image_predicate(const std::string& text) {
    ImagePredicate out;
    out.text = text;

    auto tokens = tokenize(text);
    // strip the leading "images with" / "image of" style prefix
    size_t start = 0;
    while (start < tokens.size() &&
           (tokens[start] == "image" || tokens[start] == "images" || tokens[start] == "with" ||
            tokens[start] == "of" || tokens[start] == "showing" || tokens[start] == "containing")) {
        start++;
    }

    std::vector<std::vector<std::string>> phrases(1);
    for (size_t i = start; i < tokens.size(); ++i) {
        if (tokens[i] == "and") {
            phrases.emplace_back();
        } else {
            phrases.back().push_back(tokens[i]);
        }
    }

    for (const auto& phrase : phrases) {
        if (phrase.empty()) continue;
        LabelRequirement req;
        size_t i = 0;
        auto cw = count_words().find(phrase[i]);
        if (cw != count_words().end()) {
            req.min_count = cw->second;
            i++;
        }
        if (i < phrase.size() && color_words().count(phrase[i])) {
            req.color = phrase[i];
            i++;
        }
        std::string object;
        for (; i < phrase.size(); ++i) {
            if (!object.empty()) object += " ";
            object += singular(phrase[i]);
        }
        if (object.empty()) {
            throw Error("image predicate phrase without an object: \"" + text + "\"");
        }
        req.object = object;
        out.required.push_back(std::move(req));
    }
    if (out.required.empty()) throw Error("empty image predicate: \"" + text + "\"");
    return out;
}

bool eval_image_predicate(const ImagePredicate& predicate, const ImageLabels& labels) {
    for (const auto& req : predicate.required) {
        int count = 0;
        for (const auto& label : labels.labels) {
            auto [color, object] = parse_label(label);
            if (object != req.object) continue;
            if (!req.color.empty() && color != req.color) continue;
            count++;
        }
        if (count < req.min_count) return false;
    }
    return true;
}

LabelOracle::LabelOracle(std::map<std::string, ImageLabels> fixture)
    : fixture_(std::move(fixture)) {}

std::map<std::string, ImageLabels> LabelOracle::fixture_from_json(const nlohmann::json& j) {
    std::map<std::string, ImageLabels> fixture;
    for (auto it = j.begin(); it != j.end(); ++it) {
        ImageLabels labels;
        for (const auto& l : it.value()) labels.labels.push_back(l.get<std::string>());
        fixture[it.key()] = std::move(labels);
    }
    return fixture;
}

LabelOracle LabelOracle::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing label fixture " + path);
    return LabelOracle(fixture_from_json(nlohmann::json::parse(in)));
}

std::pair<bool, double> LabelOracle::classify(const ItemRef& item, const std::string& text) {
    auto it = fixture_.find(item.item_id);
    if (it == fixture_.end()) throw Error("unresolvable item " + item.item_id);
    return {eval_image_predicate(compile_image_predicate(text), it->second), 1.0};
}

bool LabelOracle::has_item(const std::string& item_id) const {
    return fixture_.count(item_id) > 0;
}

NoisyOracle::NoisyOracle(std::shared_ptr<LabelOracle> inner, double epsilon, uint64_t seed)
    : inner_(std::move(inner)), epsilon_(epsilon), seed_(seed) {
    if (epsilon_ < 0.0 || epsilon_ >= 1.0) throw Error("noise epsilon must be in [0,1)");
}

bool NoisyOracle::would_flip(const std::string& item_id, const std::string& text) const {
    uint64_t h = stable_hash(item_id + "|" + text, seed_);
    double u = static_cast<double>(h >> 11) / static_cast<double>(1ull << 53);
    return u < epsilon_;
}

std::pair<bool, double> NoisyOracle::classify(const ItemRef& item, const std::string& text) {
    auto [verdict, confidence] = inner_->classify(item, text);
    if (would_flip(item.item_id, text)) verdict = !verdict;
    return {verdict, confidence};
}

RemoteVisionModel::RemoteVisionModel(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}

std::pair<bool, double> RemoteVisionModel::classify(const ItemRef& item,
                                                    const std::string& text) {
    auto slash = url_.find('/', url_.find("//") + 2);
    std::string host = slash == std::string::npos ? url_ : url_.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : url_.substr(slash);
    httplib::Client client(host);
    client.set_read_timeout(timeout_seconds_, 0);
    nlohmann::json body{{"item", value_to_json(Value{item})}, {"predicate", text}};
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw Error("vision provider unreachable: " + host);
    if (res->status != 200) throw Error("vision provider error " + std::to_string(res->status));
    auto reply = nlohmann::json::parse(res->body);
    return {reply.at("verdict").get<bool>(), reply.value("confidence", 1.0)};
}

FieldOracle::FieldOracle(std::map<std::string, std::map<std::string, Value>> fixture)
    : fixture_(std::move(fixture)) {}

FieldOracle FieldOracle::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing field fixture " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::map<std::string, std::map<std::string, Value>> fixture;
    for (auto it = j.begin(); it != j.end(); ++it) {
        for (auto f = it.value().begin(); f != it.value().end(); ++f) {
            fixture[it.key()][f.key()] = value_from_json(f.value());
        }
    }
    return FieldOracle(std::move(fixture));
}

Value FieldOracle::extract(const ItemRef& item, const std::string& field) {
    auto it = fixture_.find(item.item_id);
    if (it == fixture_.end()) return std::monostate{};
    auto f = it->second.find(field);
    if (f == it->second.end()) return std::monostate{};
    return f->second;
}

}  // namespace taiji
