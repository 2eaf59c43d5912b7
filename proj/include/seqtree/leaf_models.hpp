#pragma once

#include "seqtree/data.hpp"
#include "seqtree/student_t.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace seqtree {

enum class LeafModel { constant, linear, multinomial };

// Minimum rows a leaf must hold under each model: the improper constant and
// linear priors need enough data for a proper leaf posterior, the Dirichlet
// prior is proper and only needs nonempty children.
int min_leaf_for(LeafModel model, int dim);

// Gaussian leaf with unknown mean and variance under the scale-free prior.
// Sufficient statistics are the count and the first two response moments.
struct ConstantStats {
    long long n = 0;
    double sum_y = 0.0;
    double sum_y2 = 0.0;

    double ybar() const { return sum_y / double(n); }
    // Centered sum of squares, clamped at zero; exact duplicates make the
    // marginal undefined rather than spuriously enormous.
    double s2() const;
    bool s2_degenerate() const;

    void update(double y);
    void merge(const ConstantStats& other);

    std::optional<double> log_marginal() const;
    std::optional<StudentT> predictive() const;
    std::optional<StudentT> mean_posterior() const;
    std::optional<double> variance_reduction() const;
};

// Linear-mean leaf: intercept + slopes with unknown noise variance under the
// scale-free prior.  Tracks raw sums plus the centered Gram matrix and its
// inverse; the inverse is refreshed by a rank-one update on each arrival and
// rebuilt from scratch when that update would be unstable.
struct LinearStats {
    long long n = 0;
    int dim = 0;
    double sum_y = 0.0;
    double sum_y2 = 0.0;
    Eigen::VectorXd sum_x;
    Eigen::VectorXd sum_xy;
    Eigen::MatrixXd gram;      // sum of (x - xbar)(x - xbar)'
    Eigen::MatrixXd gram_inv;  // valid iff gram_ok
    double log_det_gram = 0.0; // valid iff gram_ok
    bool gram_ok = false;

    explicit LinearStats(int d = 0);

    double ybar() const { return sum_y / double(n); }
    Eigen::VectorXd xbar() const { return sum_x / double(n); }
    double s2() const;
    // Slope for the centered design and the regression sum of squares.
    Eigen::VectorXd slope() const;
    double regression_ss() const;
    double residual_ss() const;  // s2 - R, clamped at zero
    bool residual_degenerate() const;

    void update(std::span<const double> x, double y);
    void merge(const LinearStats& other);

    std::optional<double> log_marginal() const;
    std::optional<StudentT> predictive(std::span<const double> x) const;
    std::optional<StudentT> mean_posterior(std::span<const double> x) const;
    std::optional<double> variance_reduction(std::span<const double> x,
                                             std::span<const double> x_ref) const;

    // 1/n + (x - xbar)' G^{-1} (x_ref - xbar)
    double leverage(std::span<const double> x, std::span<const double> x_ref) const;

private:
    void refresh_inverse_full();
    bool condition_acceptable() const;
};

// Multinomial leaf with a Dirichlet(1/C,...,1/C) prior.
struct MultinomialStats {
    std::vector<long long> counts;

    explicit MultinomialStats(int num_classes = 0)
        : counts(std::size_t(num_classes), 0) {}

    int num_classes() const { return int(counts.size()); }
    long long n() const;

    void update(int label);
    void merge(const MultinomialStats& other);

    // Log probability of the observed label sequence with the class
    // probabilities integrated out.
    double log_marginal() const;
    // Posterior predictive class probabilities (z_c + 1/C) / (n + 1).
    std::vector<double> predictive() const;
};

using LeafStats = std::variant<ConstantStats, LinearStats, MultinomialStats>;

// Kind-dispatched helpers used by the filter.
LeafStats make_empty_stats(LeafModel model, int dim, int num_classes);
LeafStats stats_from_rows(LeafModel model, const DataStore& store, std::span<const int> rows);
void update_stats(LeafStats& stats, std::span<const double> x, const Response& y);
void merge_stats(LeafStats& into, const LeafStats& other);
std::optional<double> log_marginal(const LeafStats& stats);
std::optional<StudentT> predictive_t(const LeafStats& stats, std::span<const double> x);
std::optional<StudentT> mean_posterior_t(const LeafStats& stats, std::span<const double> x);
std::optional<double> variance_reduction(const LeafStats& stats, std::span<const double> x,
                                         std::span<const double> x_ref);
// Log predictive density of a real y, or log predictive probability of a label.
std::optional<double> log_predictive(const LeafStats& stats, std::span<const double> x,
                                     const Response& y);

}  // namespace seqtree
