#include "taiji/predicate.hpp"

#include <charconv>

#include "taiji/common.hpp"
#include "taiji/result_set.hpp"

namespace taiji {

PredicatePtr Predicate::constant(bool v) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::Const;
    p->const_value = v;
    return p;
}

PredicatePtr Predicate::compare(Cmp op, Operand l, Operand r) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::Compare;
    p->cmp = op;
    p->lhs = std::move(l);
    p->rhs = std::move(r);
    return p;
}

PredicatePtr Predicate::contains(Operand l, Operand r) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::Contains;
    p->lhs = std::move(l);
    p->rhs = std::move(r);
    return p;
}

PredicatePtr Predicate::logical_and(std::vector<PredicatePtr> cs) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::And;
    p->children = std::move(cs);
    return p;
}

PredicatePtr Predicate::logical_or(std::vector<PredicatePtr> cs) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::Or;
    p->children = std::move(cs);
    return p;
}

PredicatePtr Predicate::logical_not(PredicatePtr c) {
    auto p = std::make_shared<Predicate>();
    p->kind = Kind::Not;
    p->children = {std::move(c)};
    return p;
}

Predicate::Operand Predicate::column(std::string name) {
    Operand o;
    o.is_column = true;
    o.column = std::move(name);
    return o;
}

Predicate::Operand Predicate::literal(Value v) {
    Operand o;
    o.literal = std::move(v);
    return o;
}

namespace {

Value operand_value(const Predicate::Operand& op, const ColumnResolver& resolve) {
    if (!op.is_column) return op.literal;
    const Value* v = resolve(op.column);
    if (!v) throw Error("unknown or ambiguous column: " + op.column);
    return *v;
}

bool is_ordered_pair(const Value& a, const Value& b) {
    auto numeric = [](const Value& v) {
        return std::holds_alternative<int64_t>(v) || std::holds_alternative<double>(v);
    };
    if (numeric(a) && numeric(b)) return true;
    return a.index() == b.index() &&
           (std::holds_alternative<std::string>(a) || numeric(a));
}

}  // namespace

bool eval_predicate(const Predicate& p, const ColumnResolver& resolve) {
    switch (p.kind) {
        case Predicate::Kind::Const:
            return p.const_value;
        case Predicate::Kind::Compare: {
            Value a = operand_value(p.lhs, resolve);
            Value b = operand_value(p.rhs, resolve);
            switch (p.cmp) {
                case Predicate::Cmp::Eq: return value_equal(a, b);
                case Predicate::Cmp::Ne: return !value_equal(a, b);
                default: break;
            }
            if (!is_ordered_pair(a, b)) {
                throw Error("type mismatch in ordering comparison: " + value_to_string(a) +
                            " vs " + value_to_string(b));
            }
            switch (p.cmp) {
                case Predicate::Cmp::Lt: return value_less(a, b);
                case Predicate::Cmp::Le: return !value_less(b, a);
                case Predicate::Cmp::Gt: return value_less(b, a);
                case Predicate::Cmp::Ge: return !value_less(a, b);
                default: return false;
            }
        }
        case Predicate::Kind::Contains: {
            Value a = operand_value(p.lhs, resolve);
            Value b = operand_value(p.rhs, resolve);
            const auto* sa = std::get_if<std::string>(&a);
            const auto* sb = std::get_if<std::string>(&b);
            if (!sa || !sb) {
                throw Error("contains() requires string operands");
            }
            return sa->find(*sb) != std::string::npos;
        }
        case Predicate::Kind::And:
            for (const auto& c : p.children) {
                if (!eval_predicate(*c, resolve)) return false;
            }
            return true;
        case Predicate::Kind::Or:
            for (const auto& c : p.children) {
                if (eval_predicate(*c, resolve)) return true;
            }
            return false;
        case Predicate::Kind::Not:
            return !eval_predicate(*p.children.at(0), resolve);
    }
    return false;
}

namespace {

std::string format_number(double d) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    std::string s(buf, ptr);
    // keep floats visually distinct from ints
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string render_literal(const Value& v, bool strip) {
    if (strip) return "?";
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_number(d); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const {
            std::string out = "\"";
            for (char c : s) {
                if (c == '"' || c == '\\') out += '\\';
                out += c;
            }
            return out + "\"";
        }
        std::string operator()(const ItemRef& r) const {
            return "ref(" + r.dataset_id + "/" + r.item_id + ")";
        }
    };
    return std::visit(Visitor{}, v);
}

std::string render_operand(const Predicate::Operand& o, bool strip) {
    return o.is_column ? o.column : render_literal(o.literal, strip);
}

const char* cmp_token(Predicate::Cmp c) {
    switch (c) {
        case Predicate::Cmp::Eq: return "==";
        case Predicate::Cmp::Ne: return "!=";
        case Predicate::Cmp::Lt: return "<";
        case Predicate::Cmp::Le: return "<=";
        case Predicate::Cmp::Gt: return ">";
        case Predicate::Cmp::Ge: return ">=";
    }
    return "==";
}

std::string render_impl(const Predicate& p, bool strip) {
    switch (p.kind) {
        case Predicate::Kind::Const:
            return p.const_value ? "true" : "false";
        case Predicate::Kind::Compare:
            return render_operand(p.lhs, strip) + " " + cmp_token(p.cmp) + " " +
                   render_operand(p.rhs, strip);
        case Predicate::Kind::Contains:
            return "contains(" + render_operand(p.lhs, strip) + ", " +
                   render_operand(p.rhs, strip) + ")";
        case Predicate::Kind::And: {
            std::string out;
            for (size_t i = 0; i < p.children.size(); ++i) {
                if (i) out += " && ";
                out += "(" + render_impl(*p.children[i], strip) + ")";
            }
            return out;
        }
        case Predicate::Kind::Or: {
            std::string out;
            for (size_t i = 0; i < p.children.size(); ++i) {
                if (i) out += " || ";
                out += "(" + render_impl(*p.children[i], strip) + ")";
            }
            return out;
        }
        case Predicate::Kind::Not:
            return "!(" + render_impl(*p.children.at(0), strip) + ")";
    }
    return "true";
}

void collect_columns(const Predicate& p, std::set<std::string>& out) {
    if (p.kind == Predicate::Kind::Compare || p.kind == Predicate::Kind::Contains) {
        if (p.lhs.is_column) out.insert(p.lhs.column);
        if (p.rhs.is_column) out.insert(p.rhs.column);
    }
    for (const auto& c : p.children) collect_columns(*c, out);
}

}  // namespace

std::string render_predicate(const Predicate& p) { return render_impl(p, false); }
std::string render_predicate_shape(const Predicate& p) { return render_impl(p, true); }

std::set<std::string> predicate_columns(const Predicate& p) {
    std::set<std::string> out;
    collect_columns(p, out);
    return out;
}

namespace {

nlohmann::json operand_to_json(const Predicate::Operand& o) {
    if (o.is_column) return {{"col", o.column}};
    return {{"lit", value_to_json(o.literal)}};
}

Predicate::Operand operand_from_json(const nlohmann::json& j) {
    if (j.contains("col")) return Predicate::column(j.at("col").get<std::string>());
    return Predicate::literal(value_from_json(j.at("lit")));
}

}  // namespace

nlohmann::json predicate_to_json(const Predicate& p) {
    switch (p.kind) {
        case Predicate::Kind::Const:
            return {{"op", "const"}, {"value", p.const_value}};
        case Predicate::Kind::Compare:
            return {{"op", cmp_token(p.cmp)},
                    {"lhs", operand_to_json(p.lhs)},
                    {"rhs", operand_to_json(p.rhs)}};
        case Predicate::Kind::Contains:
            return {{"op", "contains"},
                    {"lhs", operand_to_json(p.lhs)},
                    {"rhs", operand_to_json(p.rhs)}};
        case Predicate::Kind::And:
        case Predicate::Kind::Or: {
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : p.children) cs.push_back(predicate_to_json(*c));
            return {{"op", p.kind == Predicate::Kind::And ? "and" : "or"}, {"children", cs}};
        }
        case Predicate::Kind::Not:
            return {{"op", "not"}, {"child", predicate_to_json(*p.children.at(0))}};
    }
    return {{"op", "const"}, {"value", true}};
}

PredicatePtr predicate_from_json(const nlohmann::json& j) {
    const std::string op = j.at("op").get<std::string>();
    if (op == "const") return Predicate::constant(j.at("value").get<bool>());
    if (op == "and" || op == "or") {
        std::vector<PredicatePtr> cs;
        for (const auto& c : j.at("children")) cs.push_back(predicate_from_json(c));
        return op == "and" ? Predicate::logical_and(std::move(cs))
                           : Predicate::logical_or(std::move(cs));
    }
    if (op == "not") return Predicate::logical_not(predicate_from_json(j.at("child")));
    auto lhs = operand_from_json(j.at("lhs"));
    auto rhs = operand_from_json(j.at("rhs"));
    if (op == "contains") return Predicate::contains(std::move(lhs), std::move(rhs));
    static const std::pair<const char*, Predicate::Cmp> cmps[] = {
        {"==", Predicate::Cmp::Eq}, {"!=", Predicate::Cmp::Ne}, {"<", Predicate::Cmp::Lt},
        {"<=", Predicate::Cmp::Le}, {">", Predicate::Cmp::Gt},  {">=", Predicate::Cmp::Ge},
    };
    for (const auto& [tok, c] : cmps) {
        if (op == tok) return Predicate::compare(c, std::move(lhs), std::move(rhs));
    }
    throw Error("unknown predicate op: " + op);
}

}  // namespace taiji
