#include "taiji/rel_exec.hpp"

#include <map>
#include <unordered_map>

#include "taiji/common.hpp"

namespace taiji {

namespace {

// Hash-join key: canonical rendering keeps int/float equality semantics in
// line with value_equal (34 == 34.0 joins).
std::string join_key(const Value& v) {
    if (const auto* i = std::get_if<int64_t>(&v)) {
        return "n:" + std::to_string(static_cast<double>(*i));
    }
    if (const auto* d = std::get_if<double>(&v)) {
        return "n:" + std::to_string(*d);
    }
    return value_to_string(v);
}

ResultSet exec_node(const QueryPlan& plan, const std::string& id, const ScanResolver& scan,
                    std::map<std::string, ResultSet>& memo) {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const Operator* op = plan.find(id);
    if (!op) throw Error("fragment references unknown node " + id);
    auto inputs = plan.inputs_of(id);

    ResultSet out;
    switch (op->kind) {
        case OpKind::Scan:
            out = scan(op->dataset_id);
            break;
        case OpKind::Filter: {
            ResultSet in = exec_node(plan, inputs.at(0), scan, memo);
            out.columns = in.columns;
            for (auto& t : in.tuples) {
                if (eval_predicate(*op->predicate,
                                   [&](std::string_view n) { return t.resolve(n); })) {
                    out.tuples.push_back(std::move(t));
                }
            }
            break;
        }
        case OpKind::Project: {
            ResultSet in = exec_node(plan, inputs.at(0), scan, memo);
            out.columns = op->columns;
            for (const auto& t : in.tuples) {
                ResultTuple pt;
                for (const auto& c : op->columns) {
                    const Value* v = t.resolve(c);
                    if (!v) throw Error("unknown column " + c);
                    pt.cells.emplace_back(c, *v);
                }
                out.tuples.push_back(std::move(pt));
            }
            break;
        }
        case OpKind::Limit: {
            ResultSet in = exec_node(plan, inputs.at(0), scan, memo);
            out.columns = in.columns;
            size_t n = std::min<size_t>(static_cast<size_t>(op->limit), in.tuples.size());
            out.tuples.assign(std::make_move_iterator(in.tuples.begin()),
                              std::make_move_iterator(in.tuples.begin() + static_cast<long>(n)));
            break;
        }
        case OpKind::Join: {
            ResultSet left = exec_node(plan, inputs.at(0), scan, memo);
            ResultSet right = exec_node(plan, inputs.at(1), scan, memo);
            out.columns = left.columns;
            out.columns.insert(out.columns.end(), right.columns.begin(), right.columns.end());

            std::unordered_multimap<std::string, size_t> build;
            build.reserve(right.tuples.size());
            for (size_t i = 0; i < right.tuples.size(); ++i) {
                const Value* rv = right.tuples[i].resolve(op->right_key);
                if (!rv) throw Error("unknown join key " + op->right_key);
                build.emplace(join_key(*rv), i);
            }
            for (const auto& lt : left.tuples) {
                const Value* lv = lt.resolve(op->left_key);
                if (!lv) throw Error("unknown join key " + op->left_key);
                auto [lo, hi] = build.equal_range(join_key(*lv));
                for (auto it = lo; it != hi; ++it) {
                    ResultTuple joined = lt;
                    const auto& rt = right.tuples[it->second];
                    joined.cells.insert(joined.cells.end(), rt.cells.begin(), rt.cells.end());
                    out.tuples.push_back(std::move(joined));
                }
            }
            break;
        }
        default:
            throw Error("operator " + to_string(op->kind) + " is not relational");
    }
    memo[id] = out;
    return out;
}

}  // namespace

ResultSet rel_execute(const QueryPlan& fragment, const ScanResolver& scan) {
    auto report = validate_plan(fragment);
    if (!report.ok) throw Error("invalid fragment: " + report.violations.front());
    std::map<std::string, ResultSet> memo;
    return exec_node(fragment, fragment.sink, scan, memo);
}

}  // namespace taiji
