#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "taiji/result_set.hpp"

namespace taiji {

// Typed tabular data. item-ref columns hold the item id in the CSV cell and
// materialize as ItemRef values against the declared target dataset.
struct TableColumn {
    std::string name;
    ColumnType type = ColumnType::String;
    std::string ref_dataset;            // item-ref columns only
    Modality ref_modality = Modality::Image;
};

struct Table {
    std::string name;
    std::vector<TableColumn> columns;
    std::vector<std::vector<Value>> rows;

    int column_index(const std::string& name) const;  // -1 if absent
    void check_row(const std::vector<Value>& row) const;

    // Fully qualified result set: columns named "<table>.<column>".
    ResultSet to_result_set() const;
};

Value parse_cell(const std::string& text, const TableColumn& column);
std::string render_cell(const Value& v);

// CSV with a JSON schema sidecar ("<name>.schema.json" next to the CSV).
Table load_table(const std::string& name, const std::string& csv_path,
                 const std::string& schema_path);
void save_table(const Table& table, const std::string& csv_path,
                const std::string& schema_path);

// Directory of tables: <dir>/<name>.csv + <dir>/<name>.schema.json.
// Reads share a lock; mutations take the exclusive writer latch per store.
class TableStore {
public:
    explicit TableStore(std::string dir);

    void load_all();
    std::vector<std::string> table_names() const;
    bool has_table(const std::string& name) const;
    Table snapshot(const std::string& name) const;
    ResultSet scan(const std::string& name) const;
    size_t row_count(const std::string& name) const;

    void put_table(Table table);
    // Returns the ids (first-column values) of the inserted rows.
    std::vector<std::string> insert_rows(const std::string& name,
                                         const std::vector<std::vector<Value>>& rows);
    // Deletes rows whose first-column value matches one of `ids`.
    size_t delete_rows(const std::string& name, const std::vector<std::string>& ids);

    void persist(const std::string& name) const;
    std::string dir() const { return dir_; }

private:
    std::string dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Table> tables_;
};

}  // namespace taiji
