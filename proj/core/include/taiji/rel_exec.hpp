#pragma once

#include <functional>

#include "taiji/plan.hpp"
#include "taiji/result_set.hpp"

namespace taiji {

// Resolves a fragment's Scan node to rows. Lets the relational server serve
// both lake tables and shipped intermediate frames ("frames://<handle>").
using ScanResolver = std::function<ResultSet(const std::string& dataset_id)>;

// Exact relational semantics over a fragment restricted to
// {Scan, Filter, Project, Limit, Join}: Filter keeps predicate-true rows,
// Join is an inner hash equi-join, Limit keeps the input-order prefix.
ResultSet rel_execute(const QueryPlan& fragment, const ScanResolver& scan);

}  // namespace taiji
