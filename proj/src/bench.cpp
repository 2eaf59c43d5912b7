#include "seqtree/bench.hpp"

#include "seqtree/design.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace seqtree {

namespace {

// Runs fn(rep) for every rep, a bounded number at a time.  Each rep derives
// its own seed, so results are identical however the work is scheduled.
void parallel_reps(int reps, const std::function<void(int)>& fn) {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> pending;
    for (int r = 0; r < reps; ++r) {
        if (pending.size() >= workers) {
            pending.front().get();
            pending.erase(pending.begin());
        }
        pending.push_back(std::async(std::launch::async, fn, r));
    }
    for (auto& f : pending) f.get();
}

std::uint64_t rep_seed(std::uint64_t seed, int rep, int variant = 0) {
    return substream(seed, Stream::replicate, std::uint64_t(rep), std::uint64_t(variant)).next();
}

}  // namespace

SummaryStat summarize(std::span<const double> values) {
    SummaryStat s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= double(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / double(values.size() - 1));
    }
    return s;
}

Cloud run_filter(const DataStore& data, std::span<const int> order, LeafModel model,
                 int particles, std::optional<int> t0, std::uint64_t cloud_seed) {
    const int need = min_leaf_for(model, data.dim());
    if (int(order.size()) < need)
        throw std::invalid_argument("run_filter: dataset smaller than the leaf model minimum");

    DataStore prefix = model == LeafModel::multinomial
                           ? DataStore(data.dim(), data.num_classes())
                           : DataStore(data.dim());
    for (int i = 0; i < need; ++i) {
        const int r = order[std::size_t(i)];
        prefix.append(data.x(r), data.response(r));
    }

    CloudConfig cfg;
    cfg.model = model;
    cfg.particles = particles;
    cfg.t0 = t0;
    cfg.seed = cloud_seed;
    Cloud cloud = Cloud::init(std::move(prefix), cfg);
    for (std::size_t i = std::size_t(need); i < order.size(); ++i) {
        const int r = order[i];
        cloud.step(data.x(r), data.response(r));
    }
    return cloud;
}

ParabolaBench bench_parabola(int reps, int particles, int n_points, int t0,
                             std::uint64_t seed) {
    const TestFunction fn = test_function("parabola");
    Rng noise = substream(seed, Stream::data_noise);
    DataStore data(1);
    for (int i = 0; i < n_points; ++i) {
        const double x = noise.uniform(-3.0, 3.0);
        data.append(std::vector<double>{x},
                    Response::real(fn.eval(std::vector<double>{x}) + fn.noise_sd * noise.normal()));
    }

    const int grid_n = 201;
    std::vector<std::vector<double>> grid;
    std::vector<double> truth;
    for (int i = 0; i < grid_n; ++i) {
        const double x = -3.0 + 6.0 * double(i) / double(grid_n - 1);
        grid.push_back({x});
        truth.push_back(fn.eval(grid.back()));
    }

    ParabolaBench out;
    out.log_bf.resize(std::size_t(reps));
    out.rmse_linear.resize(std::size_t(reps));
    parallel_reps(reps, [&](int rep) {
        std::vector<int> order(std::size_t(n_points), 0);
        std::iota(order.begin(), order.end(), 0);
        Rng perm = substream(seed, Stream::reorder, std::uint64_t(rep));
        perm.shuffle(order);

        Cloud lin = run_filter(data, order, LeafModel::linear, particles, t0,
                               rep_seed(seed, rep, 0));
        Cloud con = run_filter(data, order, LeafModel::constant, particles, t0,
                               rep_seed(seed, rep, 1));
        out.log_bf[std::size_t(rep)] = log_bayes_factor(lin.evidence(), con.evidence());

        std::vector<double> pred;
        pred.reserve(grid.size());
        for (const auto& pt : grid) pred.push_back(lin.posterior_mean(pt));
        out.rmse_linear[std::size_t(rep)] = rmse(pred, truth);
    });
    return out;
}

FriedmanBench bench_friedman(int reps, int particles, int n_train, int n_test,
                             std::uint64_t seed) {
    const TestFunction fn = test_function("friedman");
    FriedmanBench out;
    out.rmse_linear.resize(std::size_t(reps));
    out.rmse_constant.resize(std::size_t(reps));
    parallel_reps(reps, [&](int rep) {
        Rng noise = substream(seed, Stream::data_noise, std::uint64_t(rep));
        DataStore data(5);
        std::vector<double> x(5, 0.0);
        for (int i = 0; i < n_train; ++i) {
            for (double& v : x) v = noise.uniform();
            data.append(x, Response::real(fn.eval(x) + fn.noise_sd * noise.normal()));
        }
        std::vector<std::vector<double>> test_x;
        std::vector<double> truth;
        for (int i = 0; i < n_test; ++i) {
            for (double& v : x) v = noise.uniform();
            test_x.push_back(x);
            truth.push_back(fn.eval(x));
        }

        std::vector<int> order(std::size_t(n_train), 0);
        std::iota(order.begin(), order.end(), 0);

        for (int variant = 0; variant < 2; ++variant) {
            const LeafModel model = variant == 0 ? LeafModel::linear : LeafModel::constant;
            Cloud cloud = run_filter(data, order, model, particles, std::nullopt,
                                     rep_seed(seed, rep, variant));
            std::vector<double> pred;
            pred.reserve(test_x.size());
            for (const auto& pt : test_x) pred.push_back(cloud.posterior_mean(pt));
            (variant == 0 ? out.rmse_linear : out.rmse_constant)[std::size_t(rep)] =
                rmse(pred, truth);
        }
    });
    return out;
}

SinCauchyBench bench_sincauchy_al(int reps, int particles, int init_points, int rounds,
                                  int candidates, int holdout_points, std::uint64_t seed) {
    const TestFunction fn = test_function("sincauchy");

    EvalGrid grid;
    for (int i = 0; i < holdout_points; ++i) {
        const double x = 7.0 * double(i) / double(holdout_points - 1);
        grid.points.push_back({x});
        grid.values.push_back(fn.eval(grid.points.back()));
    }

    SinCauchyBench out;
    out.rmse_alc.resize(std::size_t(reps));
    out.rmse_alm.resize(std::size_t(reps));
    parallel_reps(reps, [&](int rep) {
        for (int variant = 0; variant < 2; ++variant) {
            auto noise = std::make_shared<Rng>(
                substream(seed, Stream::data_noise, std::uint64_t(rep), std::uint64_t(variant)));
            Objective oracle = [&fn, noise](std::span<const double> x) {
                return fn.eval(x) + fn.noise_sd * noise->normal();
            };
            DesignConfig cfg;
            cfg.model = LeafModel::linear;
            cfg.particles = particles;
            cfg.candidates = candidates;
            cfg.rounds = rounds;
            cfg.init_points = init_points;
            cfg.heuristic = variant == 0 ? Heuristic::alc : Heuristic::alm;
            cfg.seed = rep_seed(seed, rep, variant);
            const DesignResult res = active_learn_loop(oracle, fn.bounds, cfg, &grid);
            (variant == 0 ? out.rmse_alc : out.rmse_alm)[std::size_t(rep)] = *res.trace.rmse;
        }
    });
    return out;
}

Exp2dBench bench_exp2d_opt(int reps, int particles, int init_points, int rounds,
                           int candidates, double phi, std::uint64_t seed) {
    const TestFunction fn = test_function("exp2d");
    Exp2dBench out;
    out.best_value.resize(std::size_t(reps));
    parallel_reps(reps, [&](int rep) {
        auto noise = std::make_shared<Rng>(substream(seed, Stream::data_noise, std::uint64_t(rep)));
        Objective objective = [&fn, noise](std::span<const double> x) {
            return fn.eval(x) + fn.noise_sd * noise->normal();
        };
        DesignConfig cfg;
        cfg.model = LeafModel::constant;
        cfg.particles = particles;
        cfg.candidates = candidates;
        cfg.phi = phi;
        cfg.rounds = rounds;
        cfg.init_points = init_points;
        cfg.seed = rep_seed(seed, rep);
        const DesignResult res = optimize_loop(objective, fn.bounds, cfg);
        out.best_value[std::size_t(rep)] = res.trace.final_value;
    });
    return out;
}

int synthetic_class(std::span<const double> x) {
    if (x[0] <= 0.4) return 0;
    return x[1] <= 0.6 ? 1 : 2;
}

namespace {

double boundary_distance_2d(double px, double py) {
    // Boundaries: the segment x0 = 0.4 over all x1, and x1 = 0.6 for x0 > 0.4.
    const double d_vertical = std::abs(px - 0.4);
    const double d_horizontal = px >= 0.4 ? std::abs(py - 0.6)
                                          : std::hypot(px - 0.4, py - 0.6);
    return std::min(d_vertical, d_horizontal);
}

}  // namespace

ClassifyBench bench_classify(int train_points, int test_points, int particles, int grid_n,
                             double label_noise, std::uint64_t seed) {
    Rng noise = substream(seed, Stream::data_noise);
    auto draw_labelled = [&noise, label_noise](std::vector<double>& x) {
        x[0] = noise.uniform();
        x[1] = noise.uniform();
        int label = synthetic_class(x);
        if (noise.uniform() < label_noise) {
            // flip to one of the other two classes
            const int shift = 1 + int(noise.below(2));
            label = (label + shift) % 3;
        }
        return label;
    };

    DataStore data(2, 3);
    std::vector<double> x(2);
    for (int i = 0; i < train_points; ++i) {
        const int label = draw_labelled(x);
        data.append(x, Response::category(label));
    }

    std::vector<int> order(std::size_t(train_points), 0);
    std::iota(order.begin(), order.end(), 0);
    Cloud cloud = run_filter(data, order, LeafModel::multinomial, particles, std::nullopt,
                             rep_seed(seed, 0));

    int wrong = 0;
    for (int i = 0; i < test_points; ++i) {
        const int label = draw_labelled(x);
        if (cloud.predict(x).predicted_class != label) ++wrong;
    }

    ClassifyBench out;
    out.misclassification = double(wrong) / double(test_points);
    out.grid_n = grid_n;
    out.cell_width = 1.0 / double(grid_n);
    out.entropy_max = -1.0;
    for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
            x[0] = (double(i) + 0.5) * out.cell_width;
            x[1] = (double(j) + 0.5) * out.cell_width;
            const double h = entropy_statistic(cloud, x);
            if (h > out.entropy_max) {
                out.entropy_max = h;
                out.entropy_argmax = x;
            }
        }
    }
    out.boundary_distance = boundary_distance_2d(out.entropy_argmax[0], out.entropy_argmax[1]);
    return out;
}

}  // namespace seqtree
