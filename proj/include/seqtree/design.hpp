#pragma once

#include "seqtree/particle.hpp"
#include "seqtree/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqtree {

// Per-dimension search box.
struct Bounds {
    std::vector<std::pair<double, double>> box;

    int dim() const { return int(box.size()); }
    void validate() const;
};

enum class Heuristic { ei_g, alm, alc, entropy };

struct DesignConfig {
    LeafModel model = LeafModel::constant;
    int particles = 1000;
    int candidates = 100;     // M, per round
    double phi = 1.0;         // precision in G = E[I] + sd/phi
    Heuristic heuristic = Heuristic::ei_g;
    int rounds = 0;
    int init_points = 10;
    int num_classes = 0;      // multinomial model only
    double alpha = 0.95;
    double beta = 2.0;
    std::optional<int> t0;
    std::uint64_t seed = 0;
};

struct DesignRound {
    int round = 0;
    std::vector<double> x_star;
    double criterion = 0.0;              // value at the chosen point
    std::vector<double> criterion_values;  // per candidate; NaN where skipped
    double y_observed = 0.0;
    double y_min_hat = 0.0;              // optimization only
    double posterior_mean_at_x_star = 0.0;
};

struct DesignTrace {
    std::vector<DesignRound> rounds;
    double final_value = 0.0;            // best posterior mean (optimization)
    std::optional<double> rmse;          // vs truth grid (active learning)
};

std::string trace_to_json(const DesignTrace& trace);

// Latin hypercube: one uniformly jittered point per equal-width stratum in
// every dimension, strata permuted independently per dimension.
std::vector<std::vector<double>> lhs(int count, const Bounds& bounds, Rng& rng);

// Closed-form expected improvement under the mean-function posterior,
// averaged over particles.  Skipped (nullopt) when any particle's posterior
// has df <= 1.
std::optional<double> expected_improvement(const Cloud& cloud, std::span<const double> x,
                                           double y_min_hat);

// Minimum posterior mean over a reference point set.
double y_min_hat(const Cloud& cloud, const std::vector<std::vector<double>>& reference);

// E[I] + sd(yhat)/phi with the mean-function sd from the two-term variance
// decomposition; needs df > 2 in every particle.
std::optional<double> g_statistic(const Cloud& cloud, std::span<const double> x, double phi,
                                  double y_min_hat);

// Mixture predictive variance (maximum-variance heuristic).
std::optional<double> alm_statistic(const Cloud& cloud, std::span<const double> x);

// Expected variance reduction summed over a reference set, averaged over
// particles; cross-leaf and undefined terms contribute zero.
double alc_statistic(const Cloud& cloud, std::span<const double> x,
                     const std::vector<std::vector<double>>& reference);

// Entropy of the mixture class probabilities.
double entropy_statistic(const Cloud& cloud, std::span<const double> x);

using Objective = std::function<double(std::span<const double>)>;

struct DesignResult {
    DesignTrace trace;
    Cloud cloud;
};

// Minimization search: per round, draw candidates, maximize G, evaluate the
// objective at the winner, filter the new pair in.
DesignResult optimize_loop(const Objective& objective, const Bounds& bounds,
                           const DesignConfig& config);

// Truth surface for scoring an active-learning run.
struct EvalGrid {
    std::vector<std::vector<double>> points;
    std::vector<double> values;
};

// Surface exploration: per round, draw candidates, maximize the configured
// heuristic (ALC sums over the candidate set itself), observe, filter.
DesignResult active_learn_loop(const Objective& oracle, const Bounds& bounds,
                               const DesignConfig& config,
                               const EvalGrid* truth = nullptr);

}  // namespace seqtree
