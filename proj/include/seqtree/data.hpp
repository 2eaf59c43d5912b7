#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seqtree {

enum class ResponseKind { real, category };

// Tagged response: a real observation or a class label in 0..C-1.
struct Response {
    ResponseKind kind = ResponseKind::real;
    double value = 0.0;
    int label = -1;

    static Response real(double y) { return {ResponseKind::real, y, -1}; }
    static Response category(int c) { return {ResponseKind::category, 0.0, c}; }
};

// Append-only table of covariate rows with a fixed-kind response column.
// Row indices are dense, strictly increasing, and never invalidated; all
// readers (particles) share the store and never see a row change.
class DataStore {
public:
    // Real-response store with covariate dimension d.
    explicit DataStore(int dim);
    // Categorical store with C classes.
    DataStore(int dim, int num_classes);

    // Returns the index of the new row (= previous row count).
    int append(std::span<const double> x, const Response& y);

    std::span<const double> x(int row) const {
        return {xs_.data() + std::size_t(row) * dim_, std::size_t(dim_)};
    }
    double y(int row) const { return ys_[std::size_t(row)]; }
    int label(int row) const { return labels_[std::size_t(row)]; }
    Response response(int row) const;

    int size() const { return int(kind_ == ResponseKind::real ? ys_.size() : labels_.size()); }
    int dim() const { return dim_; }
    int num_classes() const { return num_classes_; }
    ResponseKind response_kind() const { return kind_; }

    // Order-sensitive digest of all rows; used to verify that two model runs
    // saw identical data when forming a Bayes factor.
    std::uint64_t digest() const;

private:
    int dim_;
    ResponseKind kind_;
    int num_classes_;
    std::vector<double> xs_;   // row-major, dim_ per row
    std::vector<double> ys_;
    std::vector<int> labels_;
};

struct CsvSchema {
    std::string response_column;
    bool class_response = false;
};

// Parses a comma-separated, '.'-decimal file with a header row.  All columns
// except the response column become covariates, in file order.  Errors name
// the offending row and column.
DataStore load_csv(const std::string& path, const CsvSchema& schema);

// Raw string table for inputs that still contain categorical label columns.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

RawTable load_table(const std::string& path);

// Maps each original categorical column to the labels (in sorted order) and
// the encoded column index each label occupies.
struct OneHotMapping {
    std::vector<std::string> encoded_columns;
    std::map<std::string, std::vector<std::pair<std::string, int>>> levels;
};

// Expands each named k-level categorical column into k binary 0/1 columns
// (one per label, labels sorted).  Columns already taking values in {0,1}
// pass through unencoded, as do all unnamed columns, which must be numeric.
// The response column is never encoded.
std::pair<DataStore, OneHotMapping>
one_hot_encode(const RawTable& table,
               const std::vector<std::string>& categorical_columns,
               const std::string& response_column,
               bool class_response);

}  // namespace seqtree
