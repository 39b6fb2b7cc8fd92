#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "teb/envs/classification.hpp"

namespace teb {

/// Column dictionary for a CSV dataset, loaded from a JSON sidecar:
///   {"delimiter": ",", "has_header": false, "missing_token": "?",
///    "drop_missing": true,
///    "columns": [{"name": "age", "kind": "numeric"}, ...,
///                {"name": "income", "kind": "label"}]}
/// Exactly one column carries kind "label". When drop_missing is false the
/// missing token is treated as an ordinary category level.
struct DatasetSchema {
    struct Column {
        std::string name;
        enum class Kind { Numeric, Categorical, Label } kind = Kind::Numeric;
    };
    char delimiter = ',';
    bool has_header = false;
    std::string missing_token = "?";
    bool drop_missing = true;
    std::vector<Column> columns;

    int label_index() const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].kind == Column::Kind::Label) return static_cast<int>(i);
        return -1;
    }

    static DatasetSchema from_json(const nlohmann::json& j) {
        DatasetSchema s;
        if (j.contains("delimiter")) {
            const std::string d = j.at("delimiter").get<std::string>();
            if (d.size() != 1)
                throw std::invalid_argument("schema: delimiter must be one character");
            s.delimiter = d[0];
        }
        if (j.contains("has_header")) s.has_header = j.at("has_header").get<bool>();
        if (j.contains("missing_token"))
            s.missing_token = j.at("missing_token").get<std::string>();
        if (j.contains("drop_missing")) s.drop_missing = j.at("drop_missing").get<bool>();
        if (!j.contains("columns") || !j.at("columns").is_array() ||
            j.at("columns").empty())
            throw std::invalid_argument("schema: columns array required");
        for (const auto& col : j.at("columns")) {
            Column c;
            c.name = col.at("name").get<std::string>();
            const std::string kind = col.at("kind").get<std::string>();
            if (kind == "numeric") c.kind = Column::Kind::Numeric;
            else if (kind == "categorical") c.kind = Column::Kind::Categorical;
            else if (kind == "label") c.kind = Column::Kind::Label;
            else throw std::invalid_argument("schema: unknown column kind '" + kind +
                                             "' for " + c.name);
            s.columns.push_back(std::move(c));
        }
        int labels = 0;
        for (const auto& c : s.columns)
            labels += c.kind == Column::Kind::Label ? 1 : 0;
        if (labels != 1)
            throw std::invalid_argument("schema: exactly one label column required");
        return s;
    }

    static DatasetSchema load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("schema: cannot open " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_row(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    if (delimiter == ' ') {
        while (row >> cell) cells.push_back(cell);
    } else {
        while (std::getline(row, cell, delimiter)) cells.push_back(trim(cell));
    }
    return cells;
}

}  // namespace detail

/// Parses a CSV against its schema sidecar: two passes, the first collecting
/// category and label vocabularies (sorted lexicographically into dense
/// codes), the second materializing validated rows. Rows containing the
/// missing token are dropped and counted when drop_missing is set; malformed
/// rows are reported with their line numbers.
inline std::shared_ptr<ClassificationDataset> ingest_dataset(
    const std::string& csv_path, const DatasetSchema& schema) {
    std::ifstream file(csv_path);
    if (!file) throw std::runtime_error("ingest: cannot open " + csv_path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!detail::trim(line).empty()) lines.push_back(line);
    }
    if (schema.has_header && !lines.empty()) lines.erase(lines.begin());
    if (lines.empty()) throw std::runtime_error("ingest: empty dataset " + csv_path);

    const std::size_t n_cols = schema.columns.size();
    const int label_col = schema.label_index();

    // Pass 1: vocabularies.
    std::vector<std::map<std::string, int>> vocab(n_cols);
    std::map<std::string, int> label_vocab;
    std::vector<std::vector<std::string>> rows;
    rows.reserve(lines.size());
    std::size_t dropped = 0;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        auto cells = detail::split_row(lines[ln], schema.delimiter);
        if (cells.size() != n_cols)
            throw std::runtime_error("ingest: line " + std::to_string(ln + 1) +
                                     ": expected " + std::to_string(n_cols) +
                                     " cells, got " + std::to_string(cells.size()));
        if (schema.drop_missing) {
            bool missing = false;
            for (const auto& c : cells) missing = missing || c == schema.missing_token;
            if (missing) {
                ++dropped;
                continue;
            }
        }
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (schema.columns[c].kind == DatasetSchema::Column::Kind::Categorical)
                vocab[c].emplace(cells[c], 0);
            else if (static_cast<int>(c) == label_col)
                label_vocab.emplace(cells[c], 0);
        }
        rows.push_back(std::move(cells));
    }
    for (auto& v : vocab) {
        int code = 0;
        for (auto& [key, value] : v) value = code++;  // std::map: sorted keys
    }
    {
        int code = 0;
        for (auto& [key, value] : label_vocab) value = code++;
    }
    if (label_vocab.size() < 2)
        throw std::runtime_error("ingest: need at least two label values");

    auto data = std::make_shared<ClassificationDataset>();
    data->dropped_rows = dropped;
    FeatureSchema& fs = data->schema;
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (schema.columns[c].kind == DatasetSchema::Column::Kind::Numeric)
            ++fs.numeric_count;
        else if (schema.columns[c].kind == DatasetSchema::Column::Kind::Categorical)
            fs.categorical_cardinalities.push_back(
                std::max<int>(2, static_cast<int>(vocab[c].size())));
    }
    for (const auto& [name, code] : label_vocab) data->label_names.push_back(name);

    // Pass 2: rows.
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<double> nums;
        std::vector<int> cats;
        int label = -1;
        for (std::size_t c = 0; c < n_cols; ++c) {
            const std::string& cell = rows[r][c];
            switch (schema.columns[c].kind) {
                case DatasetSchema::Column::Kind::Numeric: {
                    char* end = nullptr;
                    const double v = std::strtod(cell.c_str(), &end);
                    if (end == cell.c_str() || *end != '\0')
                        throw std::runtime_error("ingest: row " + std::to_string(r + 1) +
                                                 ": bad numeric value '" + cell + "'");
                    nums.push_back(v);
                    break;
                }
                case DatasetSchema::Column::Kind::Categorical:
                    cats.push_back(vocab[c].at(cell));
                    break;
                case DatasetSchema::Column::Kind::Label:
                    label = label_vocab.at(cell);
                    break;
            }
        }
        data->rows.push_back(make_vector(fs, std::move(nums), std::move(cats)));
        data->labels.push_back(label);
    }
    data->validate();
    return data;
}

inline std::shared_ptr<ClassificationDataset> ingest_dataset(
    const std::string& csv_path, const std::string& schema_path) {
    return ingest_dataset(csv_path, DatasetSchema::load(schema_path));
}

}  // namespace teb
