#pragma once

#include "seqtree/data.hpp"
#include "seqtree/leaf_models.hpp"
#include "seqtree/particle.hpp"
#include "seqtree/rng.hpp"
#include "seqtree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace testutil {

inline seqtree::DataStore random_store(seqtree::Rng& rng, int n, int d) {
    seqtree::DataStore store(d);
    std::vector<double> x(std::size_t(d), 0.0);
    for (int i = 0; i < n; ++i) {
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        store.append(x, seqtree::Response::real(rng.normal()));
    }
    return store;
}

// Valid split range on the leaf's own rows (no pending point): both children
// keep at least min_leaf rows.
inline std::optional<std::pair<double, double>>
own_rows_interval(const seqtree::Tree& tree, const seqtree::DataStore& store, int leaf, int dim,
                  int min_leaf) {
    const auto& rows = tree.node(leaf).rows;
    const int m = int(rows.size());
    if (m < 2 * min_leaf) return std::nullopt;
    std::vector<double> coords;
    for (int r : rows) coords.push_back(store.x(r)[std::size_t(dim)]);
    std::sort(coords.begin(), coords.end());
    const double lo = coords[std::size_t(min_leaf - 1)];
    const double hi = coords[std::size_t(m - min_leaf)];
    if (!(lo < hi)) return std::nullopt;
    return std::make_pair(lo, hi);
}

inline bool try_random_grow(seqtree::Tree& tree, const seqtree::DataStore& store,
                            seqtree::Rng& rng, int min_leaf) {
    const auto leaves = tree.leaves();
    const int leaf = leaves[std::size_t(rng.below(leaves.size()))];
    const int dim = int(rng.below(std::uint64_t(store.dim())));
    const auto iv = own_rows_interval(tree, store, leaf, dim, min_leaf);
    if (!iv) return false;
    tree.apply_grow(leaf, {dim, rng.uniform(iv->first, iv->second)}, store, min_leaf);
    return true;
}

inline seqtree::Tree random_tree(const seqtree::DataStore& store, seqtree::Rng& rng,
                                 int grow_attempts, int min_leaf) {
    std::vector<int> rows(std::size_t(store.size()), 0);
    std::iota(rows.begin(), rows.end(), 0);
    seqtree::Tree tree = seqtree::Tree::root_with_rows(rows);
    for (int i = 0; i < grow_attempts; ++i) try_random_grow(tree, store, rng, min_leaf);
    return tree;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// 32-point Gauss-Legendre nodes/weights on [-1, 1] via Newton on Legendre
// polynomials.
inline const std::vector<std::pair<double, double>>& gauss_legendre_32() {
    static const std::vector<std::pair<double, double>> nw = [] {
        constexpr double kPi = 3.141592653589793238463;
        const int n = 32;
        std::vector<std::pair<double, double>> out(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(kPi * (double(i) + 0.75) / (double(n) + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - double(j) * p2) / (double(j) + 1.0);
                }
                dp = double(n) * (x * p0 - p1) / (x * x - 1.0);
                const double step = p0 / dp;
                x -= step;
                if (std::abs(step) < 1e-15) break;
            }
            out[std::size_t(i)] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
        }
        return out;
    }();
    return nw;
}

// Independent oracle for the constant-leaf marginal: numerically integrate
// the Gaussian likelihood against the 1/sigma^2 prior over (mu, sigma^2).
// tau = log sigma^2 absorbs the prior weight into the measure; the inner
// mu-integral uses sigma-scaled panels.
inline double quadrature_log_marginal(const std::vector<double>& ys) {
    constexpr double kPi = 3.141592653589793238463;
    const auto& nodes = gauss_legendre_32();
    const int n = int(ys.size());
    double ybar = 0.0;
    for (double y : ys) ybar += y;
    ybar /= double(n);
    double s2 = 0.0;
    for (double y : ys) s2 += (y - ybar) * (y - ybar);

    auto log_lik = [&](double mu, double tau) {
        const double var = std::exp(tau);
        double ll = -0.5 * double(n) * (std::log(2.0 * kPi) + tau);
        for (double y : ys) ll -= 0.5 * (y - mu) * (y - mu) / var;
        return ll;
    };

    const double tau0 = std::log(s2 / double(n));
    const double tau_lo = tau0 - 20.0, tau_hi = tau0 + 80.0;
    const int tau_panels = 160;
    const double shift = log_lik(ybar, tau0);

    double total = 0.0;
    const double tau_h = (tau_hi - tau_lo) / double(tau_panels);
    for (int tp = 0; tp < tau_panels; ++tp) {
        const double ta = tau_lo + tau_h * double(tp);
        for (const auto& [tx, tw] : nodes) {
            const double tau = ta + 0.5 * tau_h * (tx + 1.0);
            const double sigma = std::exp(0.5 * tau);
            const double half_width = 12.0 * sigma / std::sqrt(double(n));
            double inner = 0.0;
            for (const auto& [mx, mw] : nodes) {
                const double mu = ybar + half_width * mx;
                inner += mw * std::exp(log_lik(mu, tau) - shift);
            }
            total += tw * 0.5 * tau_h * inner * half_width;
        }
    }
    return std::log(total) + shift;
}

// Field-by-field comparison against a batch recomputation.
inline double stats_distance(const seqtree::LeafStats& a, const seqtree::LeafStats& b) {
    using namespace seqtree;
    if (const auto* ca = std::get_if<ConstantStats>(&a)) {
        const auto& cb = std::get<ConstantStats>(b);
        return std::max({double(std::abs(ca->n - cb.n)), rel_err(ca->sum_y, cb.sum_y),
                         rel_err(ca->sum_y2, cb.sum_y2)});
    }
    if (const auto* la = std::get_if<LinearStats>(&a)) {
        const auto& lb = std::get<LinearStats>(b);
        double d = double(std::abs(la->n - lb.n));
        d = std::max(d, rel_err(la->sum_y, lb.sum_y));
        d = std::max(d, rel_err(la->sum_y2, lb.sum_y2));
        d = std::max(d, (la->sum_x - lb.sum_x).cwiseAbs().maxCoeff());
        d = std::max(d, (la->sum_xy - lb.sum_xy).cwiseAbs().maxCoeff());
        const double scale = std::max(1.0, lb.gram.cwiseAbs().maxCoeff());
        d = std::max(d, (la->gram - lb.gram).cwiseAbs().maxCoeff() / scale);
        if (la->gram_ok && lb.gram_ok) {
            const double iscale = std::max(1.0, lb.gram_inv.cwiseAbs().maxCoeff());
            d = std::max(d, (la->gram_inv - lb.gram_inv).cwiseAbs().maxCoeff() / iscale);
            d = std::max(d, rel_err(la->log_det_gram, lb.log_det_gram));
        } else if (la->gram_ok != lb.gram_ok) {
            d = std::max(d, 1.0);
        }
        return d;
    }
    const auto& ma = std::get<seqtree::MultinomialStats>(a);
    const auto& mb = std::get<seqtree::MultinomialStats>(b);
    double d = 0.0;
    for (std::size_t c = 0; c < ma.counts.size(); ++c)
        d = std::max(d, double(std::abs(ma.counts[c] - mb.counts[c])));
    return d;
}

// Every particle's leaf stats must match a from-scratch rebuild of its rows.
inline double cloud_stats_drift(const seqtree::Cloud& cloud) {
    double worst = 0.0;
    for (const auto& p : cloud.particles()) {
        for (int leaf : p.tree.leaves()) {
            const auto batch = seqtree::stats_from_rows(cloud.config().model, cloud.store(),
                                                        p.tree.node(leaf).rows);
            worst = std::max(worst, stats_distance(p.leaf_stats.at(leaf), batch));
        }
    }
    return worst;
}

}  // namespace testutil
