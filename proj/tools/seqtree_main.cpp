#include "seqtree/bench.hpp"
#include "seqtree/checkpoint.hpp"
#include "seqtree/design.hpp"
#include "seqtree/particle.hpp"
#include "seqtree/test_functions.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace {

using namespace seqtree;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

LeafModel parse_leaf(const std::string& name) {
    if (name == "constant") return LeafModel::constant;
    if (name == "linear") return LeafModel::linear;
    if (name == "multinomial") return LeafModel::multinomial;
    throw CLI::ValidationError("--leaf must be constant, linear or multinomial");
}

Heuristic parse_heuristic(const std::string& name) {
    if (name == "alm") return Heuristic::alm;
    if (name == "alc") return Heuristic::alc;
    if (name == "entropy") return Heuristic::entropy;
    if (name == "ei") return Heuristic::ei_g;
    throw CLI::ValidationError("--heuristic must be alm, alc, entropy or ei");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    return out;
}

// "lo:hi:n[,lo:hi:n...]" -> product grid over the axes.
std::vector<std::vector<double>> parse_grid(const std::string& spec) {
    std::vector<std::tuple<double, double, int>> axes;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        double lo, hi;
        int n;
        if (std::sscanf(part.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1 || !(lo <= hi))
            throw std::runtime_error("bad --grid axis '" + part + "', expected lo:hi:n");
        axes.emplace_back(lo, hi, n);
    }
    if (axes.empty()) throw std::runtime_error("empty --grid spec");
    std::vector<std::vector<double>> grid{{}};
    for (const auto& [lo, hi, n] : axes) {
        std::vector<std::vector<double>> next;
        for (const auto& prefix : grid) {
            for (int i = 0; i < n; ++i) {
                auto pt = prefix;
                pt.push_back(n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1));
                next.push_back(std::move(pt));
            }
        }
        grid = std::move(next);
    }
    return grid;
}

std::vector<int> identity_order(int n) {
    std::vector<int> order(std::size_t(n), 0);
    std::iota(order.begin(), order.end(), 0);
    return order;
}

// Query points from a covariate CSV (header row, d numeric columns).
std::vector<std::vector<double>> load_points(const std::string& path, int dim) {
    RawTable table = load_table(path);
    if (int(table.columns.size()) < dim)
        throw std::runtime_error("query file has fewer columns than the model dimension");
    std::vector<std::vector<double>> points;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::vector<double> x;
        for (int c = 0; c < dim; ++c)
            x.push_back(std::stod(table.rows[r][std::size_t(c)]));
        points.push_back(std::move(x));
    }
    return points;
}

struct CommonOpts {
    int particles = 1000;
    std::uint64_t seed = 0;
    double alpha = 0.95;
    double beta = 2.0;
    int t0 = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--particles", particles, "particle count");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--alpha", alpha, "split prior alpha");
        cmd->add_option("--beta", beta, "split prior beta");
        cmd->add_option("--t0", t0, "conditioning prefix size (default per model)");
    }
    std::optional<int> t0_opt() const {
        return t0 >= 0 ? std::optional<int>(t0) : std::nullopt;
    }
};

Cloud fit_cloud(const std::string& data_path, const std::string& response, bool is_class,
                LeafModel model, const CommonOpts& opts) {
    DataStore data = load_csv(data_path, {response, is_class});
    const auto order = identity_order(data.size());
    DataStore prefix = model == LeafModel::multinomial
                           ? DataStore(data.dim(), data.num_classes())
                           : DataStore(data.dim());
    const int need = min_leaf_for(model, data.dim());
    if (data.size() < need) throw std::runtime_error("dataset smaller than the leaf model minimum");
    for (int i = 0; i < need; ++i) prefix.append(data.x(i), data.response(i));

    CloudConfig cfg;
    cfg.model = model;
    cfg.particles = opts.particles;
    cfg.alpha = opts.alpha;
    cfg.beta = opts.beta;
    cfg.t0 = opts.t0_opt();
    cfg.seed = opts.seed;
    Cloud cloud = Cloud::init(std::move(prefix), cfg);
    for (int i = need; i < data.size(); ++i) cloud.step(data.x(i), data.response(i));
    return cloud;
}

void write_predictions(const Cloud& cloud, const std::vector<std::vector<double>>& points,
                       std::ostream& out) {
    const int d = cloud.store().dim();
    if (cloud.store().response_kind() == ResponseKind::category) {
        for (int j = 0; j < d; ++j) out << "x" << j << ",";
        for (int c = 0; c < cloud.store().num_classes(); ++c) out << "p" << c << ",";
        out << "class,entropy\n";
        for (const auto& pt : points) {
            const auto pred = cloud.predict(pt);
            for (double v : pt) out << fmt(v) << ",";
            for (double pc : pred.class_probs) out << fmt(pc) << ",";
            out << pred.predicted_class << "," << fmt(pred.entropy) << "\n";
        }
        return;
    }
    for (int j = 0; j < d; ++j) out << "x" << j << ",";
    out << "mean,variance,lo90,hi90\n";
    for (const auto& pt : points) {
        const auto pred = cloud.predict(pt);
        for (double v : pt) out << fmt(v) << ",";
        out << fmt(pred.mean) << ","
            << (pred.variance ? fmt(*pred.variance) : "nan") << ","
            << fmt(pred.lo90) << "," << fmt(pred.hi90) << "\n";
    }
}

int cmd_fit(const std::string& data_path, const std::string& response, bool is_class,
            const std::string& leaf, const CommonOpts& opts, const std::string& out_path) {
    Cloud cloud = fit_cloud(data_path, response, is_class, parse_leaf(leaf), opts);
    save_cloud(cloud, out_path);
    std::cout << "fitted " << cloud.time() << " rows, log marginal estimate "
              << fmt(cloud.log_marginal_estimate()) << "\n"
              << "checkpoint written to " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& query,
                const std::string& grid_spec, const std::string& out_path) {
    Cloud cloud = load_cloud(checkpoint);
    std::vector<std::vector<double>> points;
    if (!grid_spec.empty()) points = parse_grid(grid_spec);
    else if (!query.empty()) points = load_points(query, cloud.store().dim());
    else throw std::runtime_error("predict needs --query or --grid");
    auto out = open_out(out_path);
    write_predictions(cloud, points, out);
    std::cout << "wrote " << points.size() << " predictions to " << out_path << "\n";
    return 0;
}

int cmd_bf(const std::string& data_path, const std::string& response,
           const std::string& leaf_a, const std::string& leaf_b, int reps,
           const CommonOpts& opts, const std::string& out_path) {
    DataStore data = load_csv(data_path, {response, false});
    const LeafModel ma = parse_leaf(leaf_a);
    const LeafModel mb = parse_leaf(leaf_b);
    const int need = std::max(min_leaf_for(ma, data.dim()), min_leaf_for(mb, data.dim()));

    auto out = open_out(out_path);
    out << "rep,t,log_bf\n";
    std::vector<double> final_bf;
    std::vector<std::vector<double>> traces;
    for (int rep = 0; rep < reps; ++rep) {
        auto order = identity_order(data.size());
        Rng perm = substream(opts.seed, Stream::reorder, std::uint64_t(rep));
        perm.shuffle(order);

        // Both models consume the same prefix and the same permuted sequence.
        DataStore prefix = DataStore(data.dim());
        for (int i = 0; i < need; ++i)
            prefix.append(data.x(order[std::size_t(i)]), data.response(order[std::size_t(i)]));
        CloudConfig cfg;
        cfg.particles = opts.particles;
        cfg.alpha = opts.alpha;
        cfg.beta = opts.beta;
        cfg.t0 = opts.t0_opt();
        cfg.model = ma;
        cfg.seed = substream(opts.seed, Stream::replicate, std::uint64_t(rep), 0).next();
        Cloud a = Cloud::init(prefix, cfg);
        cfg.model = mb;
        cfg.seed = substream(opts.seed, Stream::replicate, std::uint64_t(rep), 1).next();
        Cloud b = Cloud::init(prefix, cfg);

        std::vector<double> trace;
        for (int i = need; i < data.size(); ++i) {
            const int r = order[std::size_t(i)];
            a.step(data.x(r), data.response(r));
            b.step(data.x(r), data.response(r));
            const double bf = a.log_marginal_estimate() - b.log_marginal_estimate();
            trace.push_back(bf);
            out << rep << "," << (i + 1) << "," << fmt(bf) << "\n";
        }
        final_bf.push_back(log_bayes_factor(a.evidence(), b.evidence()));
        traces.push_back(std::move(trace));
    }
    // Mean trajectory across reps (rep = -1 rows).
    if (!traces.empty()) {
        for (std::size_t t = 0; t < traces.front().size(); ++t) {
            double m = 0.0;
            for (const auto& tr : traces) m += tr[t];
            out << -1 << "," << (int(t) + need + 1) << "," << fmt(m / double(traces.size())) << "\n";
        }
    }
    const auto s = summarize(final_bf);
    std::cout << "final log BF (" << leaf_a << " over " << leaf_b << "): mean " << fmt(s.mean)
              << " sd " << fmt(s.sd) << " over " << reps << " reorderings\n";
    return 0;
}

Objective noisy_objective(const TestFunction& fn, std::shared_ptr<Rng> rng) {
    return [fn, rng](std::span<const double> x) {
        return fn.eval(x) + fn.noise_sd * rng->normal();
    };
}

int cmd_optimize(const std::string& function, const std::string& leaf, double phi,
                 int candidates, int rounds, int init_points, const CommonOpts& opts,
                 const std::string& out_path) {
    const TestFunction fn = test_function(function);
    auto noise = std::make_shared<Rng>(substream(opts.seed, Stream::data_noise));
    DesignConfig cfg;
    cfg.model = parse_leaf(leaf);
    cfg.particles = opts.particles;
    cfg.candidates = candidates;
    cfg.phi = phi;
    cfg.rounds = rounds;
    cfg.init_points = init_points;
    cfg.alpha = opts.alpha;
    cfg.beta = opts.beta;
    cfg.t0 = opts.t0_opt();
    cfg.seed = opts.seed;
    const DesignResult res = optimize_loop(noisy_objective(fn, noise), fn.bounds, cfg);
    auto out = open_out(out_path);
    out << trace_to_json(res.trace) << "\n";
    std::cout << "best posterior mean after " << rounds << " rounds: "
              << fmt(res.trace.final_value) << "\n";
    return 0;
}

int cmd_al(const std::string& function, const std::string& leaf, const std::string& heuristic,
           int candidates, int rounds, int init_points, int holdout, const CommonOpts& opts,
           const std::string& out_path) {
    const TestFunction fn = test_function(function);
    auto noise = std::make_shared<Rng>(substream(opts.seed, Stream::data_noise));
    DesignConfig cfg;
    cfg.model = parse_leaf(leaf);
    cfg.particles = opts.particles;
    cfg.candidates = candidates;
    cfg.rounds = rounds;
    cfg.init_points = init_points;
    cfg.heuristic = parse_heuristic(heuristic);
    cfg.alpha = opts.alpha;
    cfg.beta = opts.beta;
    cfg.t0 = opts.t0_opt();
    cfg.seed = opts.seed;

    EvalGrid grid;
    if (fn.bounds.dim() == 1) {
        for (int i = 0; i < holdout; ++i) {
            const auto [lo, hi] = fn.bounds.box[0];
            grid.points.push_back({lo + (hi - lo) * double(i) / double(holdout - 1)});
            grid.values.push_back(fn.eval(grid.points.back()));
        }
    } else {
        Rng grid_rng = substream(opts.seed, Stream::misc);
        grid.points = lhs(holdout, fn.bounds, grid_rng);
        for (const auto& pt : grid.points) grid.values.push_back(fn.eval(pt));
    }

    const DesignResult res = active_learn_loop(noisy_objective(fn, noise), fn.bounds, cfg, &grid);
    auto out = open_out(out_path);
    out << trace_to_json(res.trace) << "\n";
    std::cout << "holdout RMSE after " << rounds << " rounds: " << fmt(*res.trace.rmse) << "\n";
    return 0;
}

int cmd_classify(const std::string& data_path, const std::string& response,
                 const std::string& query, const CommonOpts& opts, const std::string& out_path) {
    Cloud cloud = fit_cloud(data_path, response, true, LeafModel::multinomial, opts);
    RawTable qt = load_table(query);
    const int d = cloud.store().dim();
    std::vector<std::vector<double>> points = load_points(query, d);
    auto out = open_out(out_path);
    write_predictions(cloud, points, out);

    // When the query file carries a trailing label column, report accuracy.
    if (int(qt.columns.size()) == d + 1 && qt.columns.back() == response) {
        int wrong = 0;
        for (std::size_t r = 0; r < qt.rows.size(); ++r) {
            const int truth = std::stoi(qt.rows[r].back());
            if (cloud.predict(points[r]).predicted_class != truth) ++wrong;
        }
        std::cout << "misclassification " << fmt(double(wrong) / double(points.size()))
                  << " over " << points.size() << " rows\n";
    }
    std::cout << "wrote " << points.size() << " predictions to " << out_path << "\n";
    return 0;
}

int cmd_bench(const std::string& name, int reps, const std::string& leaf, const CommonOpts& opts,
              const std::string& out_path) {
    auto out = open_out(out_path);
    if (name == "parabola") {
        const auto res = bench_parabola(reps, opts.particles, 100,
                                        opts.t0 >= 0 ? opts.t0 : 5, opts.seed);
        out << "rep,log_bf,rmse_linear\n";
        for (int r = 0; r < reps; ++r)
            out << r << "," << fmt(res.log_bf[std::size_t(r)]) << ","
                << fmt(res.rmse_linear[std::size_t(r)]) << "\n";
        const auto bf = summarize(res.log_bf);
        const auto rm = summarize(res.rmse_linear);
        std::cout << "log BF mean " << fmt(bf.mean) << " sd " << fmt(bf.sd)
                  << "; linear grid RMSE mean " << fmt(rm.mean) << " sd " << fmt(rm.sd) << "\n";
    } else if (name == "friedman") {
        const auto res = bench_friedman(reps, opts.particles, 200, 1000, opts.seed);
        out << "rep,rmse_linear,rmse_constant\n";
        for (int r = 0; r < reps; ++r)
            out << r << "," << fmt(res.rmse_linear[std::size_t(r)]) << ","
                << fmt(res.rmse_constant[std::size_t(r)]) << "\n";
        const auto lin = summarize(res.rmse_linear);
        const auto con = summarize(res.rmse_constant);
        std::cout << "RMSE linear mean " << fmt(lin.mean) << " sd " << fmt(lin.sd)
                  << "; constant mean " << fmt(con.mean) << " sd " << fmt(con.sd) << "\n";
    } else if (name == "sincauchy") {
        const auto res = bench_sincauchy_al(reps, opts.particles, 10, 40, 20, 200, opts.seed);
        out << "rep,rmse_alc,rmse_alm\n";
        for (int r = 0; r < reps; ++r)
            out << r << "," << fmt(res.rmse_alc[std::size_t(r)]) << ","
                << fmt(res.rmse_alm[std::size_t(r)]) << "\n";
        const auto alc = summarize(res.rmse_alc);
        const auto alm = summarize(res.rmse_alm);
        std::cout << "RMSE ALC mean " << fmt(alc.mean) << " sd " << fmt(alc.sd)
                  << "; ALM mean " << fmt(alm.mean) << " sd " << fmt(alm.sd) << "\n";
    } else if (name == "exp2d") {
        const auto res = bench_exp2d_opt(reps, opts.particles, 10, 10, 200, 1.0, opts.seed);
        out << "rep,best_value\n";
        for (int r = 0; r < reps; ++r)
            out << r << "," << fmt(res.best_value[std::size_t(r)]) << "\n";
        const auto s = summarize(res.best_value);
        std::cout << "best value mean " << fmt(s.mean) << " sd " << fmt(s.sd) << "\n";
    } else if (name == "classify") {
        const auto res = bench_classify(500, 2000, opts.particles, 25, 0.05, opts.seed);
        out << "misclassification,entropy_max,argmax_x0,argmax_x1,boundary_distance\n";
        out << fmt(res.misclassification) << "," << fmt(res.entropy_max) << ","
            << fmt(res.entropy_argmax[0]) << "," << fmt(res.entropy_argmax[1]) << ","
            << fmt(res.boundary_distance) << "\n";
        std::cout << "misclassification " << fmt(res.misclassification)
                  << "; entropy argmax boundary distance " << fmt(res.boundary_distance) << "\n";
    } else {
        throw std::runtime_error("unknown bench experiment: " + name +
                                 " (try parabola, friedman, sincauchy, exp2d, classify)");
    }
    (void)leaf;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"seqtree: on-line partition-tree regression, classification and design"};
    app.require_subcommand(1);

    std::string data_path, response = "y", out_path = "out.csv", checkpoint, query, grid_spec;
    std::string leaf = "constant", leaf_a = "linear", leaf_b = "constant";
    std::string function = "parabola", heuristic = "alc", bench_name;
    bool is_class = false;
    int reps = 30, candidates = 100, rounds = 10, init_points = 10, holdout = 200;
    double phi = 1.0;
    CommonOpts opts;

    auto* fit = app.add_subcommand("fit", "filter a CSV and write a cloud checkpoint");
    fit->add_option("--data", data_path, "training CSV")->required();
    fit->add_option("--response", response, "response column name");
    fit->add_flag("--class", is_class, "categorical response");
    fit->add_option("--leaf", leaf, "constant|linear|multinomial");
    fit->add_option("--out", out_path, "checkpoint path")->required();
    opts.attach(fit);

    auto* predict = app.add_subcommand("predict", "predictions from a checkpoint");
    predict->add_option("--checkpoint", checkpoint, "cloud checkpoint")->required();
    predict->add_option("--query", query, "query CSV of covariates");
    predict->add_option("--grid", grid_spec, "product grid lo:hi:n[,lo:hi:n...]");
    predict->add_option("--out", out_path, "output CSV")->required();

    auto* bf = app.add_subcommand("bf", "log Bayes factor traces over random reorderings");
    bf->add_option("--data", data_path, "training CSV")->required();
    bf->add_option("--response", response, "response column name");
    bf->add_option("--leaf-a", leaf_a, "numerator leaf model");
    bf->add_option("--leaf-b", leaf_b, "denominator leaf model");
    bf->add_option("--reps", reps, "number of reorderings");
    bf->add_option("--out", out_path, "output CSV")->required();
    opts.attach(bf);

    auto* optimize = app.add_subcommand("optimize", "sequential optimization of a test function");
    optimize->add_option("--function", function, "parabola|sincauchy|exp2d|friedman");
    optimize->add_option("--leaf", leaf, "constant|linear");
    optimize->add_option("--phi", phi, "exploration precision");
    optimize->add_option("--candidates", candidates, "LHS candidates per round");
    optimize->add_option("--rounds", rounds, "acquisition rounds");
    optimize->add_option("--init", init_points, "initial design size");
    optimize->add_option("--out", out_path, "trace JSON path")->required();
    opts.attach(optimize);

    auto* al = app.add_subcommand("al", "active learning on a test function");
    al->add_option("--function", function, "parabola|sincauchy|exp2d|friedman");
    al->add_option("--leaf", leaf, "constant|linear");
    al->add_option("--heuristic", heuristic, "alm|alc");
    al->add_option("--candidates", candidates, "LHS candidates per round");
    al->add_option("--rounds", rounds, "acquisition rounds");
    al->add_option("--init", init_points, "initial design size");
    al->add_option("--holdout", holdout, "holdout grid size for RMSE");
    al->add_option("--out", out_path, "trace JSON path")->required();
    opts.attach(al);

    auto* classify = app.add_subcommand("classify", "fit a multinomial cloud and classify a query set");
    classify->add_option("--data", data_path, "training CSV")->required();
    classify->add_option("--response", response, "label column name");
    classify->add_option("--query", query, "query CSV")->required();
    classify->add_option("--out", out_path, "output CSV")->required();
    opts.attach(classify);

    auto* bench = app.add_subcommand("bench", "run a named benchmark experiment");
    bench->add_option("name", bench_name, "parabola|friedman|sincauchy|exp2d|classify")->required();
    bench->add_option("--reps", reps, "repetitions");
    bench->add_option("--leaf", leaf, "leaf model where applicable");
    bench->add_option("--out", out_path, "output CSV")->required();
    opts.attach(bench);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed())
            return cmd_fit(data_path, response, is_class, leaf, opts, out_path);
        if (predict->parsed())
            return cmd_predict(checkpoint, query, grid_spec, out_path);
        if (bf->parsed())
            return cmd_bf(data_path, response, leaf_a, leaf_b, reps, opts, out_path);
        if (optimize->parsed())
            return cmd_optimize(function, leaf, phi, candidates, rounds, init_points, opts, out_path);
        if (al->parsed())
            return cmd_al(function, leaf, heuristic, candidates, rounds, init_points, holdout,
                          opts, out_path);
        if (classify->parsed())
            return cmd_classify(data_path, response, query, opts, out_path);
        if (bench->parsed())
            return cmd_bench(bench_name, reps, leaf, opts, out_path);
    } catch (const FilterFailure& e) {
        std::cerr << "filter failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
