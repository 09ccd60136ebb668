#include "taiji/expression.hpp"

#include <cctype>
#include <charconv>

#include "taiji/common.hpp"

namespace taiji {

namespace {

enum class Tok {
    End, Ident, Number, String, Pipe, LParen, RParen, Comma, Dot,
    EqEq, NotEq, Lt, Le, Gt, Ge, AndAnd, OrOr, Bang,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return cur_; }

    Token take() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) pos_++;
        cur_ = Token{};
        cur_.offset = pos_;
        if (pos_ >= src_.size()) {
            cur_.kind = Tok::End;
            return;
        }
        char c = src_[pos_];
        auto two = [&](char a, char b) {
            return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
        };
        if (two('=', '=')) { cur_.kind = Tok::EqEq; pos_ += 2; return; }
        if (two('!', '=')) { cur_.kind = Tok::NotEq; pos_ += 2; return; }
        if (two('<', '=')) { cur_.kind = Tok::Le; pos_ += 2; return; }
        if (two('>', '=')) { cur_.kind = Tok::Ge; pos_ += 2; return; }
        if (two('&', '&')) { cur_.kind = Tok::AndAnd; pos_ += 2; return; }
        if (two('|', '|')) { cur_.kind = Tok::OrOr; pos_ += 2; return; }
        switch (c) {
            case '|': cur_.kind = Tok::Pipe; pos_++; return;
            case '(': cur_.kind = Tok::LParen; pos_++; return;
            case ')': cur_.kind = Tok::RParen; pos_++; return;
            case ',': cur_.kind = Tok::Comma; pos_++; return;
            case '.': cur_.kind = Tok::Dot; pos_++; return;
            case '<': cur_.kind = Tok::Lt; pos_++; return;
            case '>': cur_.kind = Tok::Gt; pos_++; return;
            case '!': cur_.kind = Tok::Bang; pos_++; return;
            default: break;
        }
        if (c == '"') {
            pos_++;
            std::string out;
            while (pos_ < src_.size() && src_[pos_] != '"') {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) pos_++;
                out += src_[pos_++];
            }
            if (pos_ >= src_.size()) throw ParseError("unterminated string literal", cur_.offset);
            pos_++;  // closing quote
            cur_.kind = Tok::String;
            cur_.text = std::move(out);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            size_t start = pos_;
            if (c == '-') pos_++;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                    src_[pos_] == 'e' || src_[pos_] == 'E' ||
                    ((src_[pos_] == '+' || src_[pos_] == '-') &&
                     (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
                pos_++;
            }
            cur_.kind = Tok::Number;
            cur_.text = src_.substr(start, pos_ - start);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                          src_[pos_] == '_')) {
                pos_++;
            }
            cur_.kind = Tok::Ident;
            cur_.text = src_.substr(start, pos_ - start);
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    const std::string& src_;
    size_t pos_ = 0;
    Token cur_;
};

class Parser {
public:
    Parser(const std::string& src, const std::set<std::string>& datasets)
        : lex_(src), datasets_(datasets) {}

    QueryPlan parse() {
        std::string sink = parse_pipeline();
        expect(Tok::End, "end of input");
        plan_.sink = sink;
        return std::move(plan_);
    }

private:
    Token expect(Tok kind, const std::string& what) {
        if (lex_.peek().kind != kind) {
            throw ParseError("expected " + what, lex_.peek().offset);
        }
        return lex_.take();
    }

    bool accept(Tok kind) {
        if (lex_.peek().kind != kind) return false;
        lex_.take();
        return true;
    }

    // Returns the sink node id of the parsed pipeline.
    std::string parse_pipeline() {
        std::string cur = parse_stage({});
        while (lex_.peek().kind == Tok::Pipe) {
            lex_.take();
            cur = parse_stage(cur);
        }
        return cur;
    }

    std::string parse_stage(const std::string& upstream) {
        Token name = expect(Tok::Ident, "operator name");
        auto kind = op_kind_from_string(name.text);
        if (!kind) throw ParseError("unknown operator name '" + name.text + "'", name.offset);
        if ((input_arity(*kind) == 0) != upstream.empty()) {
            throw ParseError(to_string(*kind) + (upstream.empty()
                                                     ? " requires an upstream stage"
                                                     : " cannot follow an upstream stage"),
                             name.offset);
        }
        expect(Tok::LParen, "'('");
        Operator op;
        op.kind = *kind;
        std::vector<std::string> inputs;
        if (!upstream.empty()) inputs.push_back(upstream);
        switch (*kind) {
            case OpKind::Scan: {
                Token ds = expect(Tok::Ident, "dataset name");
                if (!datasets_.count(ds.text)) {
                    throw ParseError("unknown dataset '" + ds.text + "'", ds.offset);
                }
                op.dataset_id = ds.text;
                break;
            }
            case OpKind::Filter:
                op.predicate = parse_or();
                break;
            case OpKind::Project: {
                op.columns.push_back(parse_column_name());
                while (accept(Tok::Comma)) op.columns.push_back(parse_column_name());
                break;
            }
            case OpKind::Limit: {
                Token n = expect(Tok::Number, "limit count");
                int64_t v = 0;
                auto [p, ec] = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
                if (ec != std::errc() || p != n.text.data() + n.text.size()) {
                    throw ParseError("limit count must be an integer", n.offset);
                }
                op.limit = v;
                break;
            }
            case OpKind::Join: {
                inputs.push_back(parse_pipeline());
                expect(Tok::Comma, "','");
                parse_key_pair(op);
                break;
            }
            case OpKind::SemMatch: {
                op.modality = parse_modality();
                expect(Tok::Comma, "','");
                op.sem_predicate = expect(Tok::String, "predicate string").text;
                expect(Tok::Comma, "','");
                op.threshold = parse_number();
                break;
            }
            case OpKind::SemJoin: {
                inputs.push_back(parse_pipeline());
                expect(Tok::Comma, "','");
                parse_key_pair(op);
                expect(Tok::Comma, "','");
                op.modality = parse_modality();
                expect(Tok::Comma, "','");
                op.sem_predicate = expect(Tok::String, "predicate string").text;
                expect(Tok::Comma, "','");
                op.threshold = parse_number();
                break;
            }
            case OpKind::SemExtract: {
                op.modality = parse_modality();
                while (accept(Tok::Comma)) {
                    op.columns.push_back(expect(Tok::String, "field name").text);
                }
                if (op.columns.empty()) {
                    throw ParseError("sem_extract needs at least one field", name.offset);
                }
                break;
            }
        }
        expect(Tok::RParen, "')'");
        return plan_.add_node(std::move(op), std::move(inputs));
    }

    void parse_key_pair(Operator& op) {
        op.left_key = parse_column_name();
        expect(Tok::EqEq, "'=='");
        op.right_key = parse_column_name();
    }

    std::string parse_column_name() {
        Token id = expect(Tok::Ident, "column name");
        std::string out = id.text;
        while (accept(Tok::Dot)) {
            out += "." + expect(Tok::Ident, "column name").text;
        }
        return out;
    }

    Modality parse_modality() {
        Token id = expect(Tok::Ident, "modality");
        auto m = modality_from_string(id.text);
        if (!m) throw ParseError("unknown modality '" + id.text + "'", id.offset);
        return *m;
    }

    double parse_number() {
        Token n = expect(Tok::Number, "number");
        return std::stod(n.text);
    }

    // Predicate grammar.
    PredicatePtr parse_or() {
        std::vector<PredicatePtr> parts{parse_and()};
        while (accept(Tok::OrOr)) parts.push_back(parse_and());
        return parts.size() == 1 ? parts[0] : Predicate::logical_or(std::move(parts));
    }

    PredicatePtr parse_and() {
        std::vector<PredicatePtr> parts{parse_unary()};
        while (accept(Tok::AndAnd)) parts.push_back(parse_unary());
        return parts.size() == 1 ? parts[0] : Predicate::logical_and(std::move(parts));
    }

    PredicatePtr parse_unary() {
        if (accept(Tok::Bang)) return Predicate::logical_not(parse_unary());
        if (lex_.peek().kind == Tok::LParen) {
            lex_.take();
            auto inner = parse_or();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (lex_.peek().kind == Tok::Ident && lex_.peek().text == "contains") {
            lex_.take();
            expect(Tok::LParen, "'('");
            auto lhs = parse_operand();
            expect(Tok::Comma, "','");
            auto rhs = parse_operand();
            expect(Tok::RParen, "')'");
            return Predicate::contains(std::move(lhs), std::move(rhs));
        }
        size_t offset = lex_.peek().offset;
        auto lhs = parse_operand();
        auto cmp = try_cmp_token();
        if (!cmp) {
            // Bare boolean literal stands alone as a constant predicate.
            if (!lhs.is_column && std::holds_alternative<bool>(lhs.literal)) {
                return Predicate::constant(std::get<bool>(lhs.literal));
            }
            throw ParseError("expected comparison operator", offset);
        }
        auto rhs = parse_operand();
        return Predicate::compare(*cmp, std::move(lhs), std::move(rhs));
    }

    std::optional<Predicate::Cmp> try_cmp_token() {
        switch (lex_.peek().kind) {
            case Tok::EqEq: lex_.take(); return Predicate::Cmp::Eq;
            case Tok::NotEq: lex_.take(); return Predicate::Cmp::Ne;
            case Tok::Lt: lex_.take(); return Predicate::Cmp::Lt;
            case Tok::Le: lex_.take(); return Predicate::Cmp::Le;
            case Tok::Gt: lex_.take(); return Predicate::Cmp::Gt;
            case Tok::Ge: lex_.take(); return Predicate::Cmp::Ge;
            default: return std::nullopt;
        }
    }

    Predicate::Operand parse_operand() {
        const Token& t = lex_.peek();
        switch (t.kind) {
            case Tok::String:
                return Predicate::literal(Value{lex_.take().text});
            case Tok::Number: {
                Token n = lex_.take();
                if (n.text.find('.') == std::string::npos &&
                    n.text.find('e') == std::string::npos &&
                    n.text.find('E') == std::string::npos) {
                    return Predicate::literal(Value{static_cast<int64_t>(std::stoll(n.text))});
                }
                return Predicate::literal(Value{std::stod(n.text)});
            }
            case Tok::Ident: {
                if (t.text == "true" || t.text == "false") {
                    return Predicate::literal(Value{lex_.take().text == "true"});
                }
                if (t.text == "null") {
                    lex_.take();
                    return Predicate::literal(Value{std::monostate{}});
                }
                return Predicate::column(parse_column_name());
            }
            default:
                throw ParseError("expected operand", t.offset);
        }
    }

    Lexer lex_;
    const std::set<std::string>& datasets_;
    QueryPlan plan_;
};

}  // namespace

QueryPlan parse_expression(const std::string& text, const std::set<std::string>& datasets) {
    Parser parser(text, datasets);
    QueryPlan plan = parser.parse();
    auto report = validate_plan(plan);
    if (!report.ok) {
        throw Error("expression parsed to an invalid plan: " + report.violations.front());
    }
    return plan;
}

std::string render_expression(const QueryPlan& plan) { return plan_signature(plan); }

}  // namespace taiji
