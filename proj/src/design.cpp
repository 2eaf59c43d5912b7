#include "seqtree/design.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace seqtree {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void Bounds::validate() const {
    if (box.empty()) throw std::invalid_argument("Bounds: empty");
    for (const auto& [lo, hi] : box)
        if (!(lo < hi)) throw std::invalid_argument("Bounds: need lo < hi in every dimension");
}

std::vector<std::vector<double>> lhs(int count, const Bounds& bounds, Rng& rng) {
    if (count < 1) throw std::invalid_argument("lhs: count must be positive");
    bounds.validate();
    const int d = bounds.dim();
    std::vector<std::vector<double>> points(std::size_t(count),
                                            std::vector<double>(std::size_t(d), 0.0));
    std::vector<int> strata(std::size_t(count), 0);
    for (int j = 0; j < d; ++j) {
        std::iota(strata.begin(), strata.end(), 0);
        rng.shuffle(strata);
        const auto [lo, hi] = bounds.box[std::size_t(j)];
        const double width = (hi - lo) / double(count);
        for (int i = 0; i < count; ++i)
            points[std::size_t(i)][std::size_t(j)] =
                lo + width * (double(strata[std::size_t(i)]) + rng.uniform());
    }
    return points;
}

std::optional<double> expected_improvement(const Cloud& cloud, std::span<const double> x,
                                           double y_min_hat) {
    double total = 0.0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto t = mean_posterior_t(p.leaf_stats.at(leaf), x);
        if (!t || t->df <= 1.0) return std::nullopt;
        const double gap = y_min_hat - t->location;
        const double sb = std::sqrt(t->scale2);
        const double z = gap / sb;
        const double c = t->df;
        total += gap * StudentT::std_t_cdf(z, c)
               + sb / (c - 1.0) * (c + z * z) * StudentT::std_t_pdf(z, c);
    }
    return total / double(cloud.particles().size());
}

double y_min_hat(const Cloud& cloud, const std::vector<std::vector<double>>& reference) {
    if (reference.empty()) throw std::invalid_argument("y_min_hat: empty reference set");
    double best = kInf;
    for (const auto& pt : reference) best = std::min(best, cloud.posterior_mean(pt));
    return best;
}

std::optional<double> g_statistic(const Cloud& cloud, std::span<const double> x, double phi,
                                  double y_min) {
    if (!(phi > 0.0)) throw std::invalid_argument("g_statistic: phi must be positive");
    // Mean-function moments per particle; Var(yhat) = E[Var | T] + Var(E | T].
    double sum_mean = 0.0, sum_second = 0.0, ei = 0.0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto t = mean_posterior_t(p.leaf_stats.at(leaf), x);
        if (!t || t->df <= 2.0) return std::nullopt;
        sum_mean += t->location;
        sum_second += *t->variance() + t->location * t->location;
        const double gap = y_min - t->location;
        const double sb = std::sqrt(t->scale2);
        const double z = gap / sb;
        const double c = t->df;
        ei += gap * StudentT::std_t_cdf(z, c)
            + sb / (c - 1.0) * (c + z * z) * StudentT::std_t_pdf(z, c);
    }
    const double n = double(cloud.particles().size());
    const double mean = sum_mean / n;
    const double var = std::max(0.0, sum_second / n - mean * mean);
    return ei / n + std::sqrt(var) / phi;
}

std::optional<double> alm_statistic(const Cloud& cloud, std::span<const double> x) {
    double sum_mean = 0.0, sum_second = 0.0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto t = predictive_t(p.leaf_stats.at(leaf), x);
        if (!t || t->df <= 2.0) return std::nullopt;
        sum_mean += t->location;
        sum_second += *t->variance() + t->location * t->location;
    }
    const double n = double(cloud.particles().size());
    const double mean = sum_mean / n;
    return std::max(0.0, sum_second / n - mean * mean);
}

double alc_statistic(const Cloud& cloud, std::span<const double> x,
                     const std::vector<std::vector<double>>& reference) {
    if (reference.empty()) throw std::invalid_argument("alc_statistic: empty reference set");
    double total = 0.0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto& stats = p.leaf_stats.at(leaf);
        for (const auto& ref : reference) {
            if (p.tree.route(ref) != leaf) continue;  // cross-leaf reduction is zero
            const auto vr = variance_reduction(stats, x, ref);
            if (vr && std::isfinite(*vr) && *vr > 0.0) total += *vr;
        }
    }
    return total / double(cloud.particles().size());
}

double entropy_statistic(const Cloud& cloud, std::span<const double> x) {
    const auto probs = cloud.class_probabilities(x);
    double h = 0.0;
    for (double pc : probs)
        if (pc > 0.0) h -= pc * std::log(pc);
    return h;
}

std::string trace_to_json(const DesignTrace& trace) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : trace.rounds) {
        nlohmann::json j;
        j["round"] = r.round;
        j["x_star"] = r.x_star;
        j["criterion"] = r.criterion;
        j["y_observed"] = r.y_observed;
        j["y_min_hat"] = r.y_min_hat;
        j["posterior_mean_at_x_star"] = r.posterior_mean_at_x_star;
        rounds.push_back(std::move(j));
    }
    nlohmann::json j;
    j["rounds"] = std::move(rounds);
    j["final_value"] = trace.final_value;
    if (trace.rmse) j["rmse"] = *trace.rmse;
    return j.dump(2);
}

namespace {

Response make_response(const DesignConfig& config, double y) {
    return config.model == LeafModel::multinomial ? Response::category(int(std::lround(y)))
                                                  : Response::real(y);
}

// Seeds a cloud from an initial design: the model-minimum prefix enters at
// init, the remaining points are filtered one at a time.
Cloud seed_cloud(const Objective& objective, const Bounds& bounds, const DesignConfig& config,
                 std::vector<std::vector<double>>& xs_out, std::vector<double>& ys_out) {
    const int d = bounds.dim();
    const int need = min_leaf_for(config.model, d);
    if (config.init_points < need)
        throw std::invalid_argument("design loop: initial design smaller than the leaf model minimum");

    Rng init_rng = substream(config.seed, Stream::init_design);
    xs_out = lhs(config.init_points, bounds, init_rng);
    ys_out.clear();
    for (const auto& pt : xs_out) ys_out.push_back(objective(pt));

    DataStore store = config.model == LeafModel::multinomial
                          ? DataStore(d, config.num_classes)
                          : DataStore(d);
    for (int i = 0; i < need; ++i)
        store.append(xs_out[std::size_t(i)], make_response(config, ys_out[std::size_t(i)]));

    CloudConfig cc;
    cc.model = config.model;
    cc.particles = config.particles;
    cc.alpha = config.alpha;
    cc.beta = config.beta;
    cc.t0 = config.t0;
    cc.seed = config.seed;
    Cloud cloud = Cloud::init(std::move(store), cc);
    for (int i = need; i < config.init_points; ++i)
        cloud.step(xs_out[std::size_t(i)], make_response(config, ys_out[std::size_t(i)]));
    return cloud;
}

// Argmax over defined criterion values, ties to the lowest index.
std::optional<std::size_t> argmax_defined(const std::vector<double>& values) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) continue;
        if (!best || values[i] > values[*best]) best = i;
    }
    return best;
}

// Fallback criteria averaged over only the particles whose leaf df supports
// them.  With many particles, fresh grows put a small leaf under almost every
// candidate in some particle, so the strict every-particle criteria can rule
// out the whole candidate set; these keep the ranking informative in that
// case.  Undefined when no particle at all qualifies.
std::optional<double> g_partial(const Cloud& cloud, std::span<const double> x, double phi,
                                double y_min) {
    double sum_mean = 0.0, sum_second = 0.0, ei = 0.0;
    int n_ei = 0, n_var = 0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto t = mean_posterior_t(p.leaf_stats.at(leaf), x);
        if (!t || t->df <= 1.0) continue;
        const double gap = y_min - t->location;
        const double sb = std::sqrt(t->scale2);
        const double z = gap / sb;
        const double c = t->df;
        ei += gap * StudentT::std_t_cdf(z, c)
            + sb / (c - 1.0) * (c + z * z) * StudentT::std_t_pdf(z, c);
        ++n_ei;
        if (t->df > 2.0) {
            sum_mean += t->location;
            sum_second += *t->variance() + t->location * t->location;
            ++n_var;
        }
    }
    if (n_ei == 0) return std::nullopt;
    double sd = 0.0;
    if (n_var > 0) {
        const double mean = sum_mean / double(n_var);
        sd = std::sqrt(std::max(0.0, sum_second / double(n_var) - mean * mean));
    }
    return ei / double(n_ei) + sd / phi;
}

std::optional<double> alm_partial(const Cloud& cloud, std::span<const double> x) {
    double sum_mean = 0.0, sum_second = 0.0;
    int n = 0;
    for (const auto& p : cloud.particles()) {
        const int leaf = p.tree.route(x);
        const auto t = predictive_t(p.leaf_stats.at(leaf), x);
        if (!t || t->df <= 2.0) continue;
        sum_mean += t->location;
        sum_second += *t->variance() + t->location * t->location;
        ++n;
    }
    if (n == 0) return std::nullopt;
    const double mean = sum_mean / double(n);
    return std::max(0.0, sum_second / double(n) - mean * mean);
}

}  // namespace

DesignResult optimize_loop(const Objective& objective, const Bounds& bounds,
                           const DesignConfig& config) {
    std::vector<std::vector<double>> observed;
    std::vector<double> observed_y;
    Cloud cloud = seed_cloud(objective, bounds, config, observed, observed_y);

    DesignTrace trace;
    for (int round = 0; round < config.rounds; ++round) {
        Rng lhs_rng = substream(config.seed, Stream::lhs, std::uint64_t(round) + 1);
        const auto candidates = lhs(config.candidates, bounds, lhs_rng);

        std::vector<std::vector<double>> reference = candidates;
        reference.insert(reference.end(), observed.begin(), observed.end());
        const double y_min = y_min_hat(cloud, reference);

        std::vector<double> values(candidates.size(), kNaN);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto g = g_statistic(cloud, candidates[i], config.phi, y_min);
            if (g) values[i] = *g;
        }
        auto pick = argmax_defined(values);
        if (!pick) {
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                const auto g = g_partial(cloud, candidates[i], config.phi, y_min);
                if (g) values[i] = *g;
            }
            pick = argmax_defined(values);
            if (!pick) pick = 0;
        }

        const auto& x_star = candidates[*pick];
        const double y_new = objective(x_star);
        cloud.step(x_star, Response::real(y_new));
        observed.push_back(x_star);
        observed_y.push_back(y_new);

        DesignRound rec;
        rec.round = round;
        rec.x_star = x_star;
        rec.criterion = std::isnan(values[*pick]) ? 0.0 : values[*pick];
        rec.criterion_values = values;
        rec.y_observed = y_new;
        rec.y_min_hat = y_min;
        rec.posterior_mean_at_x_star = cloud.posterior_mean(x_star);
        trace.rounds.push_back(std::move(rec));
    }

    trace.final_value = y_min_hat(cloud, observed);
    return {std::move(trace), std::move(cloud)};
}

DesignResult active_learn_loop(const Objective& oracle, const Bounds& bounds,
                               const DesignConfig& config, const EvalGrid* truth) {
    const bool classification = config.model == LeafModel::multinomial;
    if (config.heuristic == Heuristic::entropy && !classification)
        throw std::invalid_argument("active_learn_loop: entropy needs a multinomial model");
    if (config.heuristic != Heuristic::entropy && classification)
        throw std::invalid_argument("active_learn_loop: ALM/ALC need a real-response model");

    std::vector<std::vector<double>> observed;
    std::vector<double> observed_y;
    Cloud cloud = seed_cloud(oracle, bounds, config, observed, observed_y);

    DesignTrace trace;
    for (int round = 0; round < config.rounds; ++round) {
        Rng lhs_rng = substream(config.seed, Stream::lhs, std::uint64_t(round) + 1);
        const auto candidates = lhs(config.candidates, bounds, lhs_rng);

        std::vector<double> values(candidates.size(), kNaN);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            switch (config.heuristic) {
                case Heuristic::alm: {
                    const auto v = alm_statistic(cloud, candidates[i]);
                    if (v) values[i] = *v;
                    break;
                }
                case Heuristic::alc:
                    values[i] = alc_statistic(cloud, candidates[i], candidates);
                    break;
                case Heuristic::entropy:
                    values[i] = entropy_statistic(cloud, candidates[i]);
                    break;
                case Heuristic::ei_g:
                    throw std::invalid_argument("active_learn_loop: use optimize_loop for EI-G");
            }
        }
        auto pick = argmax_defined(values);
        if (!pick && config.heuristic == Heuristic::alm) {
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                const auto v = alm_partial(cloud, candidates[i]);
                if (v) values[i] = *v;
            }
            pick = argmax_defined(values);
        }
        if (!pick) pick = 0;

        const auto& x_star = candidates[*pick];
        const double y_new = oracle(x_star);
        cloud.step(x_star, make_response(config, y_new));
        observed.push_back(x_star);
        observed_y.push_back(y_new);

        DesignRound rec;
        rec.round = round;
        rec.x_star = x_star;
        rec.criterion = std::isnan(values[*pick]) ? 0.0 : values[*pick];
        rec.criterion_values = values;
        rec.y_observed = y_new;
        rec.y_min_hat = kNaN;
        rec.posterior_mean_at_x_star =
            classification ? kNaN : cloud.posterior_mean(x_star);
        trace.rounds.push_back(std::move(rec));
    }

    trace.final_value = classification ? kNaN : y_min_hat(cloud, observed);
    if (truth && !classification) {
        double se = 0.0;
        for (std::size_t i = 0; i < truth->points.size(); ++i) {
            const double err = cloud.posterior_mean(truth->points[i]) - truth->values[i];
            se += err * err;
        }
        trace.rmse = std::sqrt(se / double(truth->points.size()));
    }
    return {std::move(trace), std::move(cloud)};
}

}  // namespace seqtree
