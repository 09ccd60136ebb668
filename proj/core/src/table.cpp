#include "taiji/table.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "taiji/common.hpp"

namespace taiji {

namespace {

bool value_matches_type(const Value& v, ColumnType t) {
    switch (t) {
        case ColumnType::Int: return std::holds_alternative<int64_t>(v);
        case ColumnType::Float:
            return std::holds_alternative<double>(v) || std::holds_alternative<int64_t>(v);
        case ColumnType::String: return std::holds_alternative<std::string>(v);
        case ColumnType::Bool: return std::holds_alternative<bool>(v);
        case ColumnType::ItemRefType: return std::holds_alternative<ItemRef>(v);
    }
    return false;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                i++;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

int Table::column_index(const std::string& col) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == col) return static_cast<int>(i);
    }
    return -1;
}

void Table::check_row(const std::vector<Value>& row) const {
    if (row.size() != columns.size()) {
        throw Error("row arity " + std::to_string(row.size()) + " != column arity " +
                    std::to_string(columns.size()) + " in table " + name);
    }
    for (size_t i = 0; i < row.size(); ++i) {
        if (!value_matches_type(row[i], columns[i].type)) {
            throw Error("type mismatch in table " + name + " column " + columns[i].name +
                        ": got " + value_to_string(row[i]));
        }
    }
}

ResultSet Table::to_result_set() const {
    ResultSet rs;
    for (const auto& c : columns) rs.columns.push_back(name + "." + c.name);
    rs.tuples.reserve(rows.size());
    for (const auto& row : rows) {
        ResultTuple t;
        for (size_t i = 0; i < row.size(); ++i) {
            t.cells.emplace_back(rs.columns[i], row[i]);
        }
        rs.tuples.push_back(std::move(t));
    }
    return rs;
}

Value parse_cell(const std::string& text, const TableColumn& column) {
    switch (column.type) {
        case ColumnType::Int: return static_cast<int64_t>(std::stoll(text));
        case ColumnType::Float: return std::stod(text);
        case ColumnType::Bool: return text == "true" || text == "1";
        case ColumnType::String: return text;
        case ColumnType::ItemRefType:
            return ItemRef{column.ref_dataset, text, column.ref_modality};
    }
    return text;
}

std::string render_cell(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            std::ostringstream os;
            os.precision(17);
            os << d;
            return os.str();
        }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(const ItemRef& r) const { return r.item_id; }
    };
    return std::visit(Visitor{}, v);
}

Table load_table(const std::string& name, const std::string& csv_path,
                 const std::string& schema_path) {
    std::ifstream schema_in(schema_path);
    if (!schema_in) throw Error("missing schema file " + schema_path);
    nlohmann::json schema = nlohmann::json::parse(schema_in);

    Table table;
    table.name = name;
    for (const auto& c : schema.at("columns")) {
        TableColumn col;
        col.name = c.at("name").get<std::string>();
        auto type = column_type_from_string(c.at("type").get<std::string>());
        if (!type) throw Error("unknown column type in " + schema_path);
        col.type = *type;
        if (col.type == ColumnType::ItemRefType) {
            col.ref_dataset = c.at("ref_dataset").get<std::string>();
            auto m = modality_from_string(c.value("ref_modality", "image"));
            col.ref_modality = m.value_or(Modality::Image);
        }
        table.columns.push_back(std::move(col));
    }

    std::ifstream csv(csv_path);
    if (!csv) throw Error("missing csv file " + csv_path);
    std::string line;
    bool header = true;
    while (std::getline(csv, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.columns.size()) {
            throw Error("csv arity mismatch in " + csv_path + ": " + line);
        }
        std::vector<Value> row;
        for (size_t i = 0; i < cells.size(); ++i) {
            row.push_back(parse_cell(cells[i], table.columns[i]));
        }
        table.check_row(row);
        table.rows.push_back(std::move(row));
    }
    return table;
}

void save_table(const Table& table, const std::string& csv_path,
                const std::string& schema_path) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : table.columns) {
        nlohmann::json jc{{"name", c.name}, {"type", to_string(c.type)}};
        if (c.type == ColumnType::ItemRefType) {
            jc["ref_dataset"] = c.ref_dataset;
            jc["ref_modality"] = to_string(c.ref_modality);
        }
        cols.push_back(std::move(jc));
    }
    std::ofstream schema_out(schema_path);
    schema_out << nlohmann::json{{"name", table.name}, {"columns", cols}}.dump(2) << "\n";

    std::ofstream csv(csv_path);
    for (size_t i = 0; i < table.columns.size(); ++i) {
        if (i) csv << ",";
        csv << csv_escape(table.columns[i].name);
    }
    csv << "\n";
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) csv << ",";
            csv << csv_escape(render_cell(row[i]));
        }
        csv << "\n";
    }
}

TableStore::TableStore(std::string dir) : dir_(std::move(dir)) {}

void TableStore::load_all() {
    namespace fs = std::filesystem;
    std::unique_lock lock(mutex_);
    tables_.clear();
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().extension() != ".csv") continue;
        std::string name = entry.path().stem().string();
        std::string schema = (fs::path(dir_) / (name + ".schema.json")).string();
        tables_[name] = load_table(name, entry.path().string(), schema);
    }
}

std::vector<std::string> TableStore::table_names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, _] : tables_) out.push_back(name);
    return out;
}

bool TableStore::has_table(const std::string& name) const {
    std::shared_lock lock(mutex_);
    return tables_.count(name) > 0;
}

Table TableStore::snapshot(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    return it->second;
}

ResultSet TableStore::scan(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    return it->second.to_result_set();
}

size_t TableStore::row_count(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    return it->second.rows.size();
}

void TableStore::put_table(Table table) {
    std::unique_lock lock(mutex_);
    tables_[table.name] = std::move(table);
}

std::vector<std::string> TableStore::insert_rows(const std::string& name,
                                                 const std::vector<std::vector<Value>>& rows) {
    std::unique_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    std::vector<std::string> ids;
    for (const auto& row : rows) {
        it->second.check_row(row);
        it->second.rows.push_back(row);
        ids.push_back(render_cell(row.front()));
    }
    return ids;
}

size_t TableStore::delete_rows(const std::string& name, const std::vector<std::string>& ids) {
    std::unique_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    std::set<std::string> wanted(ids.begin(), ids.end());
    auto& rows = it->second.rows;
    size_t before = rows.size();
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const std::vector<Value>& row) {
                                  return wanted.count(render_cell(row.front())) > 0;
                              }),
               rows.end());
    return before - rows.size();
}

void TableStore::persist(const std::string& name) const {
    namespace fs = std::filesystem;
    std::shared_lock lock(mutex_);
    auto it = tables_.find(name);
    if (it == tables_.end()) throw Error("unknown table " + name);
    save_table(it->second, (fs::path(dir_) / (name + ".csv")).string(),
               (fs::path(dir_) / (name + ".schema.json")).string());
}

}  // namespace taiji
