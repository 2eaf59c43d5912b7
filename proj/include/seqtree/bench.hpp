#pragma once

#include "seqtree/particle.hpp"
#include "seqtree/test_functions.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace seqtree {

struct SummaryStat {
    double mean = 0.0;
    double sd = 0.0;
};

SummaryStat summarize(std::span<const double> values);

// Streams rows of `data` through a fresh cloud in the given order (the model
// minimum enters as the init prefix, the rest one step at a time).
Cloud run_filter(const DataStore& data, std::span<const int> order, LeafModel model,
                 int particles, std::optional<int> t0, std::uint64_t cloud_seed);

// Repeated random reorderings of one parabola dataset; each rep runs linear
// and constant leaves on the identical sequence and reports the final log
// Bayes factor (linear over constant) plus the linear model's grid RMSE.
struct ParabolaBench {
    std::vector<double> log_bf;
    std::vector<double> rmse_linear;
};
ParabolaBench bench_parabola(int reps, int particles, int n_points, int t0,
                             std::uint64_t seed);

// Fresh train/test draws per rep; single filtering pass per model; RMSE of
// the posterior mean against the true test-point means.
struct FriedmanBench {
    std::vector<double> rmse_linear;
    std::vector<double> rmse_constant;
};
FriedmanBench bench_friedman(int reps, int particles, int n_train, int n_test,
                             std::uint64_t seed);

// Active learning on the sin/Cauchy surface with linear leaves, ALC vs ALM;
// RMSE against the noiseless truth on an even holdout grid.
struct SinCauchyBench {
    std::vector<double> rmse_alc;
    std::vector<double> rmse_alm;
};
SinCauchyBench bench_sincauchy_al(int reps, int particles, int init_points, int rounds,
                                  int candidates, int holdout_points, std::uint64_t seed);

// Optimization of the 2-d exponential surface with constant leaves; reports
// each rep's best posterior-mean value over the evaluated inputs.
struct Exp2dBench {
    std::vector<double> best_value;
};
Exp2dBench bench_exp2d_opt(int reps, int particles, int init_points, int rounds,
                           int candidates, double phi, std::uint64_t seed);

// Synthetic three-class problem split by axis-aligned boundaries with label
// noise; evaluates held-out misclassification and locates the entropy-surface
// maximum on a grid.
struct ClassifyBench {
    double misclassification = 0.0;
    double entropy_max = 0.0;
    std::vector<double> entropy_argmax;        // grid cell center
    double boundary_distance = 0.0;            // argmax center to true boundary
    double cell_width = 0.0;
    int grid_n = 0;
};
ClassifyBench bench_classify(int train_points, int test_points, int particles, int grid_n,
                             double label_noise, std::uint64_t seed);

// True class for the synthetic classification surface on [0,1]^2.
int synthetic_class(std::span<const double> x);

}  // namespace seqtree
