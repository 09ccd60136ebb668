#include "taiji/result_set.hpp"

#include <sstream>

namespace taiji {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Relational: return "relational";
        case Modality::SemiStructured: return "semi_structured";
        case Modality::Text: return "text";
        case Modality::Image: return "image";
        case Modality::Vector: return "vector";
    }
    return "relational";
}

std::optional<Modality> modality_from_string(std::string_view s) {
    if (s == "relational") return Modality::Relational;
    if (s == "semi_structured") return Modality::SemiStructured;
    if (s == "text") return Modality::Text;
    if (s == "image") return Modality::Image;
    if (s == "vector") return Modality::Vector;
    return std::nullopt;
}

std::string to_string(ColumnType t) {
    switch (t) {
        case ColumnType::Int: return "int";
        case ColumnType::Float: return "float";
        case ColumnType::String: return "string";
        case ColumnType::Bool: return "bool";
        case ColumnType::ItemRefType: return "item-ref";
    }
    return "string";
}

std::optional<ColumnType> column_type_from_string(std::string_view s) {
    if (s == "int") return ColumnType::Int;
    if (s == "float") return ColumnType::Float;
    if (s == "string") return ColumnType::String;
    if (s == "bool") return ColumnType::Bool;
    if (s == "item-ref") return ColumnType::ItemRefType;
    return std::nullopt;
}

std::string value_to_string(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            std::ostringstream os;
            os.precision(17);
            os << d;
            return os.str();
        }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
        std::string operator()(const ItemRef& r) const {
            return "ref(" + r.dataset_id + "/" + r.item_id + ":" + to_string(r.modality) + ")";
        }
    };
    return std::visit(Visitor{}, v);
}

namespace {

// Numeric cross-comparison: int vs float compares by value.
std::optional<double> as_number(const Value& v) {
    if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

}  // namespace

bool value_equal(const Value& a, const Value& b) {
    auto na = as_number(a), nb = as_number(b);
    if (na && nb) return *na == *nb;
    return a == b;
}

bool value_less(const Value& a, const Value& b) {
    auto na = as_number(a), nb = as_number(b);
    if (na && nb) return *na < *nb;
    if (a.index() != b.index()) return a.index() < b.index();
    return a < b;
}

const Value* ResultTuple::find(std::string_view name) const {
    for (const auto& [n, v] : cells) {
        if (n == name) return &v;
    }
    return nullptr;
}

const Value* ResultTuple::resolve(std::string_view name) const {
    if (const Value* exact = find(name)) return exact;
    const Value* hit = nullptr;
    std::string suffix = std::string(".") + std::string(name);
    for (const auto& [n, v] : cells) {
        if (n.size() > suffix.size() && n.ends_with(suffix)) {
            if (hit) return nullptr;  // ambiguous
            hit = &v;
        }
    }
    return hit;
}

ResultTuple& ResultSet::emplace_row() {
    tuples.emplace_back();
    return tuples.back();
}

nlohmann::json value_to_json(const Value& v) {
    struct Visitor {
        nlohmann::json operator()(std::monostate) const { return nullptr; }
        nlohmann::json operator()(int64_t i) const { return i; }
        nlohmann::json operator()(double d) const { return d; }
        nlohmann::json operator()(bool b) const { return b; }
        nlohmann::json operator()(const std::string& s) const { return s; }
        nlohmann::json operator()(const ItemRef& r) const {
            return {{"$ref", {{"dataset", r.dataset_id}, {"item", r.item_id}, {"modality", to_string(r.modality)}}}};
        }
    };
    return std::visit(Visitor{}, v);
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object() && j.contains("$ref")) {
        const auto& r = j.at("$ref");
        ItemRef ref;
        ref.dataset_id = r.at("dataset").get<std::string>();
        ref.item_id = r.at("item").get<std::string>();
        auto m = modality_from_string(r.at("modality").get<std::string>());
        if (!m) throw Error("bad modality in item ref: " + r.at("modality").get<std::string>());
        ref.modality = *m;
        return ref;
    }
    throw Error("unsupported value encoding: " + j.dump());
}

nlohmann::json result_set_to_json(const ResultSet& rs) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& t : rs.tuples) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& [_, v] : t.cells) row.push_back(value_to_json(v));
        rows.push_back(std::move(row));
    }
    return {{"columns", rs.columns}, {"rows", rows}, {"provenance", rs.provenance}};
}

ResultSet result_set_from_json(const nlohmann::json& j) {
    ResultSet rs;
    rs.columns = j.at("columns").get<std::vector<std::string>>();
    rs.provenance = j.value("provenance", "");
    for (const auto& row : j.at("rows")) {
        ResultTuple t;
        if (row.size() != rs.columns.size()) throw Error("row arity mismatch in result set");
        for (size_t i = 0; i < row.size(); ++i) {
            t.cells.emplace_back(rs.columns[i], value_from_json(row[i]));
        }
        rs.tuples.push_back(std::move(t));
    }
    return rs;
}

std::string tuple_to_string(const ResultTuple& t) {
    std::string out = "{";
    for (size_t i = 0; i < t.cells.size(); ++i) {
        if (i) out += ",";
        out += t.cells[i].first + "=" + value_to_string(t.cells[i].second);
    }
    out += "}";
    return out;
}

}  // namespace taiji
