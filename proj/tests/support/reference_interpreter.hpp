#pragma once

// Independent single-threaded plan interpreter used as the execution oracle.
// Deliberately naive: nested loops, no pushdown, no reordering, no paging.
// Must stay decoupled from the server/host execution path it checks.

#include <functional>
#include <map>
#include <string>

#include "taiji/plan.hpp"
#include "taiji/result_set.hpp"

namespace taiji::testsupport {

struct ReferenceSources {
    // table name -> fully materialized rows with qualified column names
    std::map<std::string, ResultSet> tables;
    // semantic (verdict, confidence) for (modality, predicate text, item)
    std::function<std::pair<bool, double>(Modality, const std::string&, const ItemRef&)> classify;
    // extraction oracle for sem_extract: (item, field) -> value
    std::function<Value(const ItemRef&, const std::string&)> extract;
};

ResultSet reference_execute(const QueryPlan& plan, const ReferenceSources& sources);

// Multiset comparison helper: sorted canonical tuple renderings.
std::vector<std::string> tuple_multiset(const ResultSet& rs);

}  // namespace taiji::testsupport
