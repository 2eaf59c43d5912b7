#include "seqtree/particle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqtree {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_mean_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s / double(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// StudentMixture

double StudentMixture::mean() const {
    double s = 0.0;
    for (const auto& c : components) s += c.location;
    return s / double(components.size());
}

std::optional<double> StudentMixture::variance() const {
    double second = 0.0;
    for (const auto& c : components) {
        const auto v = c.variance();
        if (!v) return std::nullopt;
        second += *v + c.location * c.location;
    }
    const double m = mean();
    return second / double(components.size()) - m * m;
}

double StudentMixture::cdf(double q) const {
    double s = 0.0;
    for (const auto& c : components) s += c.cdf(q);
    return s / double(components.size());
}

double StudentMixture::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("StudentMixture::quantile: p must be in (0,1)");
    double lo = components.front().location;
    double hi = lo;
    double width = 1.0;
    for (const auto& c : components) {
        lo = std::min(lo, c.location - std::sqrt(c.scale2));
        hi = std::max(hi, c.location + std::sqrt(c.scale2));
        width = std::max(width, std::sqrt(c.scale2));
    }
    while (cdf(lo) > p) lo -= width, width *= 2.0;
    width = std::max(1.0, hi - lo);
    while (cdf(hi) < p) hi += width, width *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = cdf(mid);
        if (std::abs(f - p) <= 1e-10) return mid;
        (f < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Evidence helpers

int default_t0(LeafModel model, int dim) {
    switch (model) {
        case LeafModel::constant: return 5;
        case LeafModel::linear: return dim + 3;
        case LeafModel::multinomial: return 1;
    }
    return 5;
}

double log_bayes_factor(const RunEvidence& a, const RunEvidence& b) {
    if (a.t0 != b.t0)
        throw std::invalid_argument("log_bayes_factor: conditioning prefixes differ");
    if (a.data_digest != b.data_digest)
        throw std::invalid_argument("log_bayes_factor: runs saw different data orders");
    return a.log_ml - b.log_ml;
}

double posterior_prob_a(double log_bf) {
    return 1.0 / (1.0 + std::exp(-log_bf));
}

// ---------------------------------------------------------------------------
// Cloud

Cloud::Cloud(const CloudConfig& config, DataStore store)
    : cfg_(config),
      prior_{config.alpha, config.beta, min_leaf_for(config.model, store.dim())},
      t0_(config.t0.value_or(default_t0(config.model, store.dim()))),
      store_(std::move(store)) {}

Cloud Cloud::init(DataStore prefix, const CloudConfig& config) {
    if (config.particles < 1)
        throw std::invalid_argument("Cloud::init: need at least one particle");
    const bool wants_class = config.model == LeafModel::multinomial;
    if (wants_class != (prefix.response_kind() == ResponseKind::category))
        throw std::invalid_argument("Cloud::init: leaf model and response kind disagree");
    const int t_start = prefix.size();
    if (t_start < min_leaf_for(config.model, prefix.dim()))
        throw std::invalid_argument("Cloud::init: prefix smaller than the leaf model minimum");

    Cloud cloud(config, std::move(prefix));
    std::vector<int> rows(std::size_t(t_start), 0);
    for (int i = 0; i < t_start; ++i) rows[std::size_t(i)] = i;
    Particle root;
    root.tree = Tree::root_with_rows(rows);
    root.leaf_stats[root.tree.root()] =
        stats_from_rows(config.model, cloud.store_, rows);
    cloud.particles_.assign(std::size_t(config.particles), root);
    cloud.t_ = t_start;
    return cloud;
}

Cloud Cloud::restore(const CloudConfig& config, DataStore store,
                     std::vector<Particle> particles, int t, double log_ml) {
    Cloud cloud(config, std::move(store));
    cloud.particles_ = std::move(particles);
    cloud.t_ = t;
    cloud.log_ml_ = log_ml;
    return cloud;
}

std::vector<double> Cloud::weights(std::span<const double> x, const Response& y) const {
    std::vector<double> logw(particles_.size(), kNegInf);
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        const Particle& p = particles_[i];
        const int leaf = p.tree.route(x);
        const auto lp = log_predictive(p.leaf_stats.at(leaf), x, y);
        if (lp) logw[i] = *lp;
    }
    return logw;
}

void Cloud::residual_resample(std::span<const double> log_weights, Rng& rng) {
    const int n = int(particles_.size());
    double m = kNegInf;
    for (double lw : log_weights) m = std::max(m, lw);
    if (!std::isfinite(m))
        throw FilterFailure("residual_resample: no particle has finite weight", t_);

    std::vector<double> w(std::size_t(n), 0.0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        w[std::size_t(i)] = std::isfinite(log_weights[std::size_t(i)])
                                ? std::exp(log_weights[std::size_t(i)] - m)
                                : 0.0;
        total += w[std::size_t(i)];
    }

    std::vector<int> sources;
    sources.reserve(std::size_t(n));
    std::vector<double> residual(std::size_t(n), 0.0);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double expected = double(n) * w[std::size_t(i)] / total;
        const int copies = int(std::floor(expected));
        for (int k = 0; k < copies; ++k) sources.push_back(i);
        residual[std::size_t(i)] = expected - double(copies);
        assigned += copies;
    }
    for (int k = assigned; k < n; ++k)
        sources.push_back(int(rng.categorical(residual)));

    // Identity multisets (e.g. uniform weights) need no copying at all.
    bool identity = true;
    for (int i = 0; i < n; ++i)
        if (sources[std::size_t(i)] != i) { identity = false; break; }
    if (identity) return;

    std::vector<int> uses(std::size_t(n), 0);
    for (int s : sources) ++uses[std::size_t(s)];
    std::vector<Particle> next;
    next.reserve(std::size_t(n));
    for (int s : sources) {
        if (--uses[std::size_t(s)] == 0) next.push_back(std::move(particles_[std::size_t(s)]));
        else next.push_back(particles_[std::size_t(s)]);
    }
    particles_ = std::move(next);
}

void Cloud::step(std::span<const double> x, const Response& y) {
    const auto logw = weights(x, y);
    const double increment = log_mean_exp(logw);
    if (!std::isfinite(increment))
        throw FilterFailure("filter failure: no particle can explain the observation", t_);
    if (t_ >= t0_) log_ml_ += increment;

    Rng resample_rng = substream(cfg_.seed, Stream::resample, std::uint64_t(t_));
    residual_resample(logw, resample_rng);

    const int row = store_.append(x, y);
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        Rng rng = substream(cfg_.seed, Stream::propagate, std::uint64_t(t_), i);
        propagate(particles_[i], row, rng);
    }
    t_ += 1;
}

void Cloud::propagate(Particle& p, int row, Rng& rng) {
    const auto x = store_.x(row);
    const Response y = store_.response(row);
    const int leaf = p.tree.route(x);
    const int par = p.tree.parent(leaf);

    // Stats for the stay candidate: the target leaf absorbs the new point.
    LeafStats stay_stats = p.leaf_stats.at(leaf);
    update_stats(stay_stats, x, y);

    // Leaves under the local scope other than the target are shared by the
    // stay and grow candidates.
    double others_sum = 0.0;
    std::vector<int> scope_leaves;
    if (par >= 0) {
        scope_leaves = p.tree.leaves_under(par);
        for (int l : scope_leaves) {
            if (l == leaf) continue;
            others_sum += log_marginal(p.leaf_stats.at(l)).value_or(kNegInf);
        }
    }

    struct Candidate {
        MoveKind kind;
        double score;
        SplitRule rule;          // grow
        LeafStats left, right;   // grow children
        LeafStats merged;        // prune result / stay stats
    };
    std::vector<Candidate> candidates;

    {
        const auto lm = log_marginal(stay_stats);
        if (lm) {
            const double score =
                p.tree.local_log_prior_delta(leaf, MoveKind::stay, prior_) + *lm + others_sum;
            if (std::isfinite(score))
                candidates.push_back({MoveKind::stay, score, {}, {}, {}, stay_stats});
        }
    }

    if (par >= 0 && !cfg_.freeze_structure) {
        LeafStats merged = make_empty_stats(cfg_.model, store_.dim(), store_.num_classes());
        for (int l : scope_leaves) merge_stats(merged, p.leaf_stats.at(l));
        update_stats(merged, x, y);
        const auto lm = log_marginal(merged);
        if (lm) {
            const double score =
                p.tree.local_log_prior_delta(leaf, MoveKind::prune, prior_) + *lm;
            if (std::isfinite(score))
                candidates.push_back({MoveKind::prune, score, {}, {}, {}, std::move(merged)});
        }
    }

    if (!cfg_.freeze_structure) {
        std::vector<int> eligible;
        std::vector<std::pair<double, double>> intervals;
        for (int dim = 0; dim < store_.dim(); ++dim) {
            const auto iv = p.tree.grow_interval(leaf, dim, prior_.min_leaf, x, store_);
            if (iv) {
                eligible.push_back(dim);
                intervals.push_back(*iv);
            }
        }
        if (!eligible.empty()) {
            const std::size_t pick = std::size_t(rng.below(eligible.size()));
            SplitRule rule{eligible[pick],
                           rng.uniform(intervals[pick].first, intervals[pick].second)};
            std::vector<int> left_rows, right_rows;
            for (int r : p.tree.node(leaf).rows) {
                if (store_.x(r)[std::size_t(rule.dim)] <= rule.value) left_rows.push_back(r);
                else right_rows.push_back(r);
            }
            (x[std::size_t(rule.dim)] <= rule.value ? left_rows : right_rows).push_back(row);
            LeafStats ls = stats_from_rows(cfg_.model, store_, left_rows);
            LeafStats rs = stats_from_rows(cfg_.model, store_, right_rows);
            const auto lml = log_marginal(ls);
            const auto rml = log_marginal(rs);
            if (lml && rml) {
                const double score =
                    p.tree.local_log_prior_delta(leaf, MoveKind::grow, prior_)
                    + *lml + *rml + others_sum;
                if (std::isfinite(score))
                    candidates.push_back({MoveKind::grow, score, rule, std::move(ls),
                                          std::move(rs), {}});
            }
        }
    }

    if (candidates.empty()) {
        // No candidate has a defined posterior score (e.g. duplicate
        // responses).  Keep the structure, absorb the point; the particle
        // carries an undefined predictive and dies at the next resampling.
        p.tree.add_row_to_leaf(leaf, row);
        p.leaf_stats[leaf] = std::move(stay_stats);
        return;
    }

    double best = kNegInf;
    for (const auto& c : candidates) best = std::max(best, c.score);
    std::vector<double> probs(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        probs[i] = std::exp(candidates[i].score - best);
    Candidate& chosen = candidates[rng.categorical(probs)];

    switch (chosen.kind) {
        case MoveKind::stay:
            p.tree.add_row_to_leaf(leaf, row);
            p.leaf_stats[leaf] = std::move(chosen.merged);
            break;
        case MoveKind::prune:
            for (int l : scope_leaves) p.leaf_stats.erase(l);
            p.tree.apply_prune(leaf);
            p.tree.add_row_to_leaf(par, row);
            p.leaf_stats[par] = std::move(chosen.merged);
            break;
        case MoveKind::grow: {
            p.tree.add_row_to_leaf(leaf, row);
            p.tree.apply_grow(leaf, chosen.rule, store_, prior_.min_leaf);
            p.leaf_stats.erase(leaf);
            const auto& nd = p.tree.node(leaf);
            p.leaf_stats[nd.left] = std::move(chosen.left);
            p.leaf_stats[nd.right] = std::move(chosen.right);
            break;
        }
    }
}

StudentMixture Cloud::mixture_at(std::span<const double> x) const {
    StudentMixture mix;
    mix.components.reserve(particles_.size());
    for (const auto& p : particles_) {
        const int leaf = p.tree.route(x);
        const auto t = predictive_t(p.leaf_stats.at(leaf), x);
        if (!t)
            throw FilterFailure("predict: a particle has an undefined predictive", t_);
        mix.components.push_back(*t);
    }
    return mix;
}

std::vector<double> Cloud::class_probabilities(std::span<const double> x) const {
    std::vector<double> probs(std::size_t(store_.num_classes()), 0.0);
    for (const auto& p : particles_) {
        const int leaf = p.tree.route(x);
        const auto& stats = std::get<MultinomialStats>(p.leaf_stats.at(leaf));
        const auto pc = stats.predictive();
        for (std::size_t c = 0; c < probs.size(); ++c) probs[c] += pc[c];
    }
    for (double& v : probs) v /= double(particles_.size());
    return probs;
}

double Cloud::posterior_mean(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& p : particles_) {
        const int leaf = p.tree.route(x);
        const auto& stats = p.leaf_stats.at(leaf);
        if (const auto* c = std::get_if<ConstantStats>(&stats)) {
            s += c->ybar();
        } else if (const auto* l = std::get_if<LinearStats>(&stats)) {
            if (l->gram_ok) {
                const Eigen::Map<const Eigen::VectorXd> xv(x.data(), l->dim);
                s += l->ybar() + (xv - l->xbar()).dot(l->slope());
            } else {
                s += l->ybar();
            }
        } else {
            throw std::invalid_argument("posterior_mean: classification cloud");
        }
    }
    return s / double(particles_.size());
}

PredictiveSummary Cloud::predict(std::span<const double> x) const {
    PredictiveSummary out;
    if (store_.response_kind() == ResponseKind::category) {
        out.kind = ResponseKind::category;
        out.class_probs = class_probabilities(x);
        out.predicted_class =
            int(std::max_element(out.class_probs.begin(), out.class_probs.end())
                - out.class_probs.begin());
        out.entropy = 0.0;
        for (double pc : out.class_probs)
            if (pc > 0.0) out.entropy -= pc * std::log(pc);
        return out;
    }
    const StudentMixture mix = mixture_at(x);
    out.kind = ResponseKind::real;
    out.mean = mix.mean();
    out.variance = mix.variance();
    out.lo90 = mix.quantile(0.05);
    out.hi90 = mix.quantile(0.95);
    return out;
}

}  // namespace seqtree
