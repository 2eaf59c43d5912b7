#pragma once

#include "seqtree/data.hpp"
#include "seqtree/leaf_models.hpp"
#include "seqtree/rng.hpp"
#include "seqtree/student_t.hpp"
#include "seqtree/tree.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqtree {

// Raised when the filter cannot continue (e.g. no particle can explain an
// observation); carries the failing step for diagnostics.
class FilterFailure : public std::runtime_error {
public:
    FilterFailure(const std::string& what, int step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

// One posterior sample: a partition tree plus per-leaf sufficient statistics.
struct Particle {
    Tree tree;
    std::map<int, LeafStats> leaf_stats;
};

// Equally weighted mixture of Student-t predictive components.
struct StudentMixture {
    std::vector<StudentT> components;

    double mean() const;
    // Mixture variance E[v + mu^2] - E[mu]^2; undefined if any df <= 2.
    std::optional<double> variance() const;
    double cdf(double q) const;
    // Inverse cdf by bisection; |cdf(result) - p| <= 1e-10.
    double quantile(double p) const;
};

struct PredictiveSummary {
    ResponseKind kind = ResponseKind::real;
    // Real response.
    double mean = 0.0;
    std::optional<double> variance;
    double lo90 = 0.0;
    double hi90 = 0.0;
    // Class response.
    std::vector<double> class_probs;
    int predicted_class = -1;
    double entropy = 0.0;
};

struct CloudConfig {
    LeafModel model = LeafModel::constant;
    int particles = 1000;
    double alpha = 0.95;
    double beta = 2.0;
    std::optional<int> t0;        // defaults per model when unset
    std::uint64_t seed = 0;
    bool freeze_structure = false;  // stay-only propagation (diagnostics)
};

int default_t0(LeafModel model, int dim);

// Completed-run evidence for model comparison.  Bayes factors are only
// meaningful across runs that consumed the same data in the same order with
// the same conditioning prefix.
struct RunEvidence {
    double log_ml = 0.0;
    int t0 = 0;
    std::uint64_t data_digest = 0;
};

double log_bayes_factor(const RunEvidence& a, const RunEvidence& b);
double posterior_prob_a(double log_bf);  // even prior odds

// N equally weighted particles filtered by resample-then-propagate.  The
// cloud owns the append-only store; every particle references rows by index.
class Cloud {
public:
    // All particles start as the root-only tree fitted to the whole prefix.
    static Cloud init(DataStore prefix, const CloudConfig& config);

    // One filtering update: weight, accumulate evidence, resample, append
    // the row, propagate every particle.
    void step(std::span<const double> x, const Response& y);

    // Log one-step predictive weight of (x, y) under each particle.
    std::vector<double> weights(std::span<const double> x, const Response& y) const;

    // Deterministic floor copies plus categorical residual draws.
    void residual_resample(std::span<const double> log_weights, Rng& rng);

    PredictiveSummary predict(std::span<const double> x) const;
    StudentMixture mixture_at(std::span<const double> x) const;
    std::vector<double> class_probabilities(std::span<const double> x) const;
    // Average leaf mean function across particles (defined whenever stats
    // exist, unlike the full predictive).
    double posterior_mean(std::span<const double> x) const;

    // Accumulated log of per-step averaged predictive weights, steps after t0.
    double log_marginal_estimate() const { return log_ml_; }
    RunEvidence evidence() const { return {log_ml_, t0_, store_.digest()}; }

    const DataStore& store() const { return store_; }
    const std::vector<Particle>& particles() const { return particles_; }
    const CloudConfig& config() const { return cfg_; }
    const TreePrior& prior() const { return prior_; }
    int time() const { return t_; }
    int t0() const { return t0_; }

    // Checkpoint plumbing: reassemble a cloud from serialized parts.
    static Cloud restore(const CloudConfig& config, DataStore store,
                         std::vector<Particle> particles, int t, double log_ml);

private:
    Cloud(const CloudConfig& config, DataStore store);

    void propagate(Particle& p, int row, Rng& rng);

    CloudConfig cfg_;
    TreePrior prior_;
    int t0_ = 0;
    DataStore store_;
    std::vector<Particle> particles_;
    int t_ = 0;
    double log_ml_ = 0.0;
};

}  // namespace seqtree
