#pragma once

#include <random>
#include <string>
#include <vector>

#include "taiji/plan.hpp"

namespace taiji::testsupport {

// Plan-construction shorthands shared across test binaries.

inline Operator scan_op(std::string dataset) {
    Operator op;
    op.kind = OpKind::Scan;
    op.dataset_id = std::move(dataset);
    return op;
}

inline Operator filter_op(PredicatePtr pred) {
    Operator op;
    op.kind = OpKind::Filter;
    op.predicate = std::move(pred);
    return op;
}

inline Operator limit_op(int64_t n) {
    Operator op;
    op.kind = OpKind::Limit;
    op.limit = n;
    return op;
}

inline Operator project_op(std::vector<std::string> cols) {
    Operator op;
    op.kind = OpKind::Project;
    op.columns = std::move(cols);
    return op;
}

inline Operator join_op(std::string left_key, std::string right_key) {
    Operator op;
    op.kind = OpKind::Join;
    op.left_key = std::move(left_key);
    op.right_key = std::move(right_key);
    return op;
}

inline Operator sem_match_op(Modality m, std::string text, double threshold) {
    Operator op;
    op.kind = OpKind::SemMatch;
    op.modality = m;
    op.sem_predicate = std::move(text);
    op.threshold = threshold;
    return op;
}

inline PredicatePtr col_eq_str(std::string col, std::string v) {
    return Predicate::compare(Predicate::Cmp::Eq, Predicate::column(std::move(col)),
                              Predicate::literal(Value{std::move(v)}));
}

inline PredicatePtr col_lt_num(std::string col, double v) {
    return Predicate::compare(Predicate::Cmp::Lt, Predicate::column(std::move(col)),
                              Predicate::literal(Value{v}));
}

}  // namespace taiji::testsupport
