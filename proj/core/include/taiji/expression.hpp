#pragma once

#include <set>
#include <string>

#include "taiji/plan.hpp"

namespace taiji {

// Operator-expression pipeline language:
//
//   pipeline  := stage ('|' stage)*
//   stage     := scan(dataset)
//              | filter(predicate)
//              | project(col, ...)
//              | limit(n)
//              | join(pipeline, left.col == right.col)
//              | sem_match(modality, "text", threshold)
//              | sem_join(pipeline, left.col == right.col, modality, "text", threshold)
//              | sem_extract(modality, "field", ...)
//   predicate := or-expr over comparisons (== != < <= > >=),
//                contains(a, b), ! ( ), && ||, true/false
//
// Parse errors carry the byte offset of the offending token.
QueryPlan parse_expression(const std::string& text, const std::set<std::string>& datasets);

// Canonical rendering; parse_expression(render_expression(p)) has the same
// signature as p.
std::string render_expression(const QueryPlan& plan);

}  // namespace taiji
