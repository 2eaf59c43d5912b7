#include "seqtree/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace seqtree {

DataStore::DataStore(int dim)
    : dim_(dim), kind_(ResponseKind::real), num_classes_(0) {
    if (dim <= 0) throw std::invalid_argument("DataStore: dimension must be positive");
}

DataStore::DataStore(int dim, int num_classes)
    : dim_(dim), kind_(ResponseKind::category), num_classes_(num_classes) {
    if (dim <= 0) throw std::invalid_argument("DataStore: dimension must be positive");
    if (num_classes < 2) throw std::invalid_argument("DataStore: need at least two classes");
}

int DataStore::append(std::span<const double> x, const Response& y) {
    if (int(x.size()) != dim_)
        throw std::invalid_argument("DataStore::append: covariate dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("DataStore::append: non-finite covariate");
    if (y.kind != kind_)
        throw std::invalid_argument("DataStore::append: response kind mismatch");
    if (kind_ == ResponseKind::real) {
        if (!std::isfinite(y.value))
            throw std::invalid_argument("DataStore::append: non-finite response");
    } else {
        if (y.label < 0 || y.label >= num_classes_)
            throw std::invalid_argument("DataStore::append: class label out of range");
    }
    const int row = size();
    xs_.insert(xs_.end(), x.begin(), x.end());
    if (kind_ == ResponseKind::real) ys_.push_back(y.value);
    else labels_.push_back(y.label);
    return row;
}

Response DataStore::response(int row) const {
    return kind_ == ResponseKind::real ? Response::real(y(row))
                                       : Response::category(label(row));
}

std::uint64_t DataStore::digest() const {
    // FNV-1a over the raw row bytes, order sensitive.
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    feed(&dim_, sizeof dim_);
    feed(&num_classes_, sizeof num_classes_);
    if (!xs_.empty()) feed(xs_.data(), xs_.size() * sizeof(double));
    if (!ys_.empty()) feed(ys_.data(), ys_.size() * sizeof(double));
    if (!labels_.empty()) feed(labels_.data(), labels_.size() * sizeof(int));
    return h;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, int row, const std::string& column) {
    const std::string t = trim(cell);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (t.empty() || pos != t.size())
        throw std::runtime_error("csv parse error at row " + std::to_string(row) +
                                 ", column '" + column + "': not a number: '" + t + "'");
    return v;
}

bool is_integer_string(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) return false;
    for (; i < t.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
    return true;
}

}  // namespace

RawTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    table.columns = split_line(line);
    for (auto& c : table.columns) c = trim(c);
    int row = 1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != table.columns.size())
            throw std::runtime_error("csv parse error at row " + std::to_string(row) +
                                     ": expected " + std::to_string(table.columns.size()) +
                                     " cells, got " + std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
        ++row;
    }
    return table;
}

DataStore load_csv(const std::string& path, const CsvSchema& schema) {
    RawTable table = load_table(path);
    auto it = std::find(table.columns.begin(), table.columns.end(), schema.response_column);
    if (it == table.columns.end())
        throw std::runtime_error("response column '" + schema.response_column +
                                 "' not found in " + path);
    const int resp_idx = int(it - table.columns.begin());
    const int d = int(table.columns.size()) - 1;
    if (d == 0) throw std::runtime_error("no covariate columns in " + path);
    if (table.rows.empty()) throw std::runtime_error("no data rows in " + path);

    int num_classes = 0;
    if (schema.class_response) {
        int max_label = -1;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const std::string& cell = table.rows[r][std::size_t(resp_idx)];
            if (!is_integer_string(cell))
                throw std::runtime_error("csv parse error at row " + std::to_string(int(r) + 1) +
                                         ", column '" + schema.response_column +
                                         "': class label must be an integer: '" + cell + "'");
            max_label = std::max(max_label, int(parse_number(cell, int(r) + 1, schema.response_column)));
        }
        num_classes = max_label + 1;
        if (num_classes < 2)
            throw std::runtime_error("class response needs at least two classes in " + path);
    }

    DataStore store = schema.class_response ? DataStore(d, num_classes) : DataStore(d);
    std::vector<double> x(std::size_t(d), 0.0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        int k = 0;
        for (int c = 0; c < int(table.columns.size()); ++c) {
            if (c == resp_idx) continue;
            x[std::size_t(k++)] = parse_number(table.rows[r][std::size_t(c)], int(r) + 1,
                                               table.columns[std::size_t(c)]);
        }
        if (schema.class_response) {
            store.append(x, Response::category(int(parse_number(
                                table.rows[r][std::size_t(resp_idx)], int(r) + 1,
                                schema.response_column))));
        } else {
            store.append(x, Response::real(parse_number(table.rows[r][std::size_t(resp_idx)],
                                                        int(r) + 1, schema.response_column)));
        }
    }
    return store;
}

std::pair<DataStore, OneHotMapping>
one_hot_encode(const RawTable& table,
               const std::vector<std::string>& categorical_columns,
               const std::string& response_column,
               bool class_response) {
    auto col_index = [&table](const std::string& name) {
        auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end())
            throw std::runtime_error("unknown column name: " + name);
        return int(it - table.columns.begin());
    };

    const int resp_idx = col_index(response_column);
    std::set<int> categorical;
    for (const auto& name : categorical_columns) {
        int c = col_index(name);
        if (c == resp_idx)
            throw std::runtime_error("response column cannot be one-hot encoded: " + name);
        categorical.insert(c);
    }

    // Columns already taking only the values {0,1} stay as single covariates.
    auto is_binary_numeric = [&table](int c) {
        for (const auto& row : table.rows) {
            const std::string t = trim(row[std::size_t(c)]);
            if (t != "0" && t != "1") return false;
        }
        return true;
    };

    OneHotMapping mapping;
    struct ColPlan {
        int src;
        bool encode;
        std::vector<std::string> labels;  // sorted, when encode
    };
    std::vector<ColPlan> plan;
    for (int c = 0; c < int(table.columns.size()); ++c) {
        if (c == resp_idx) continue;
        if (categorical.count(c) && !is_binary_numeric(c)) {
            std::set<std::string> labels;
            for (const auto& row : table.rows) labels.insert(trim(row[std::size_t(c)]));
            plan.push_back({c, true, {labels.begin(), labels.end()}});
        } else {
            plan.push_back({c, false, {}});
        }
    }

    for (const auto& p : plan) {
        const std::string& name = table.columns[std::size_t(p.src)];
        if (p.encode) {
            std::vector<std::pair<std::string, int>> levels;
            for (const auto& label : p.labels) {
                levels.emplace_back(label, int(mapping.encoded_columns.size()));
                mapping.encoded_columns.push_back(name + "=" + label);
            }
            mapping.levels[name] = std::move(levels);
        } else {
            mapping.encoded_columns.push_back(name);
        }
    }

    const int d = int(mapping.encoded_columns.size());
    int num_classes = 0;
    if (class_response) {
        for (const auto& row : table.rows)
            num_classes = std::max(num_classes,
                                   1 + int(parse_number(row[std::size_t(resp_idx)], 0, response_column)));
    }
    DataStore store = class_response ? DataStore(d, num_classes) : DataStore(d);

    std::vector<double> x(std::size_t(d), 0.0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::fill(x.begin(), x.end(), 0.0);
        int out = 0;
        for (const auto& p : plan) {
            const std::string cell = trim(table.rows[r][std::size_t(p.src)]);
            if (p.encode) {
                auto it = std::lower_bound(p.labels.begin(), p.labels.end(), cell);
                x[std::size_t(out + int(it - p.labels.begin()))] = 1.0;
                out += int(p.labels.size());
            } else {
                x[std::size_t(out++)] = parse_number(cell, int(r) + 1,
                                                     table.columns[std::size_t(p.src)]);
            }
        }
        const std::string& resp = table.rows[r][std::size_t(resp_idx)];
        if (class_response)
            store.append(x, Response::category(int(parse_number(resp, int(r) + 1, response_column))));
        else
            store.append(x, Response::real(parse_number(resp, int(r) + 1, response_column)));
    }
    return {std::move(store), std::move(mapping)};
}

}  // namespace seqtree
