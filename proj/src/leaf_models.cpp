#include "seqtree/leaf_models.hpp"

#include <cmath>
#include <stdexcept>

namespace seqtree {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
// Relative floor under which a centered sum of squares is treated as exactly
// zero (duplicate responses up to roundoff).
constexpr double kDegenerateRel = 1e-13;
constexpr double kConditionLimit = 1e12;
constexpr double kRankOneDenomFloor = 1e-12;

}  // namespace

int min_leaf_for(LeafModel model, int dim) {
    switch (model) {
        case LeafModel::constant: return 3;
        case LeafModel::linear: return dim + 2;
        case LeafModel::multinomial: return 1;
    }
    return 3;
}

// ---------------------------------------------------------------------------
// ConstantStats

double ConstantStats::s2() const {
    const double raw = sum_y2 - double(n) * ybar() * ybar();
    return raw > 0.0 ? raw : 0.0;
}

bool ConstantStats::s2_degenerate() const {
    const double raw = sum_y2 - double(n) * ybar() * ybar();
    return raw <= kDegenerateRel * (std::abs(sum_y2) + 1e-300);
}

void ConstantStats::update(double y) {
    n += 1;
    sum_y += y;
    sum_y2 += y * y;
}

void ConstantStats::merge(const ConstantStats& other) {
    n += other.n;
    sum_y += other.sum_y;
    sum_y2 += other.sum_y2;
}

std::optional<double> ConstantStats::log_marginal() const {
    if (n < 3 || s2_degenerate()) return std::nullopt;
    const double half = 0.5 * double(n - 1);
    return -half * kLog2Pi - 0.5 * std::log(double(n)) - half * std::log(0.5 * s2())
           + std::lgamma(half);
}

std::optional<StudentT> ConstantStats::predictive() const {
    if (n < 3 || s2_degenerate()) return std::nullopt;
    const double df = double(n - 1);
    return StudentT{ybar(), (1.0 + 1.0 / double(n)) * s2() / df, df};
}

std::optional<StudentT> ConstantStats::mean_posterior() const {
    if (n < 3 || s2_degenerate()) return std::nullopt;
    const double df = double(n - 1);
    return StudentT{ybar(), s2() / (double(n) * df), df};
}

std::optional<double> ConstantStats::variance_reduction() const {
    if (n < 4 || s2_degenerate()) return std::nullopt;
    const double inv_n = 1.0 / double(n);
    return s2() / double(n - 3) * (inv_n * inv_n) / (1.0 + inv_n);
}

// ---------------------------------------------------------------------------
// LinearStats

LinearStats::LinearStats(int d)
    : dim(d),
      sum_x(Eigen::VectorXd::Zero(d)),
      sum_xy(Eigen::VectorXd::Zero(d)),
      gram(Eigen::MatrixXd::Zero(d, d)),
      gram_inv(Eigen::MatrixXd::Zero(d, d)) {}

double LinearStats::s2() const {
    const double raw = sum_y2 - double(n) * ybar() * ybar();
    return raw > 0.0 ? raw : 0.0;
}

Eigen::VectorXd LinearStats::slope() const {
    return gram_inv * (sum_xy - xbar() * sum_y);
}

double LinearStats::regression_ss() const {
    const Eigen::VectorXd h = sum_xy - xbar() * sum_y;
    return h.dot(gram_inv * h);
}

double LinearStats::residual_ss() const {
    const double raw = s2() - regression_ss();
    return raw > 0.0 ? raw : 0.0;
}

bool LinearStats::residual_degenerate() const {
    return s2() - regression_ss() <= kDegenerateRel * (std::abs(sum_y2) + 1e-300);
}

bool LinearStats::condition_acceptable() const {
    const double norm_g = gram.cwiseAbs().rowwise().sum().maxCoeff();
    const double norm_gi = gram_inv.cwiseAbs().rowwise().sum().maxCoeff();
    return norm_g * norm_gi < kConditionLimit;
}

void LinearStats::refresh_inverse_full() {
    gram_ok = false;
    if (n < dim + 2) return;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) return;
    gram_inv = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    log_det_gram = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    gram_ok = true;
    if (!condition_acceptable()) gram_ok = false;
}

void LinearStats::update(std::span<const double> x, double y) {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);
    if (n > 0) {
        const Eigen::VectorXd v = xv - xbar();
        const double c = double(n) / double(n + 1);
        gram.noalias() += c * v * v.transpose();
        if (gram_ok) {
            // Sherman-Morrison step; the determinant lemma keeps log|G| current.
            const Eigen::VectorXd gv = gram_inv * v;
            const double denom = 1.0 + c * v.dot(gv);
            if (denom > kRankOneDenomFloor) {
                gram_inv.noalias() -= (c / denom) * gv * gv.transpose();
                log_det_gram += std::log(denom);
                if (!condition_acceptable()) gram_ok = false;
            } else {
                gram_ok = false;
            }
        }
    }
    sum_x += xv;
    sum_xy += xv * y;
    sum_y += y;
    sum_y2 += y * y;
    n += 1;
    if (!gram_ok) refresh_inverse_full();
}

void LinearStats::merge(const LinearStats& other) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    if (other.dim != dim) throw std::invalid_argument("LinearStats::merge: dimension mismatch");
    const Eigen::VectorXd dxbar = xbar() - other.xbar();
    const double w = double(n) * double(other.n) / double(n + other.n);
    gram += other.gram;
    gram.noalias() += w * dxbar * dxbar.transpose();
    sum_x += other.sum_x;
    sum_xy += other.sum_xy;
    sum_y += other.sum_y;
    sum_y2 += other.sum_y2;
    n += other.n;
    refresh_inverse_full();
}

std::optional<double> LinearStats::log_marginal() const {
    if (n < dim + 2 || !gram_ok || residual_degenerate()) return std::nullopt;
    const double half = 0.5 * double(n - dim - 1);
    return -half * kLog2Pi + 0.5 * (-log_det_gram - std::log(double(n)))
           - half * std::log(0.5 * residual_ss()) + std::lgamma(half);
}

double LinearStats::leverage(std::span<const double> x, std::span<const double> x_ref) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);
    const Eigen::Map<const Eigen::VectorXd> rv(x_ref.data(), dim);
    const Eigen::VectorXd xc = xv - xbar();
    const Eigen::VectorXd rc = rv - xbar();
    return 1.0 / double(n) + xc.dot(gram_inv * rc);
}

std::optional<StudentT> LinearStats::predictive(std::span<const double> x) const {
    if (n < dim + 2 || !gram_ok || residual_degenerate()) return std::nullopt;
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);
    const double df = double(n - dim - 1);
    const double mean = ybar() + (xv - xbar()).dot(slope());
    const double scale2 = (1.0 + leverage(x, x)) * residual_ss() / df;
    return StudentT{mean, scale2, df};
}

std::optional<StudentT> LinearStats::mean_posterior(std::span<const double> x) const {
    if (n < dim + 2 || !gram_ok || residual_degenerate()) return std::nullopt;
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);
    const double df = double(n - dim - 1);
    const double mean = ybar() + (xv - xbar()).dot(slope());
    const double scale2 = leverage(x, x) * residual_ss() / df;
    return StudentT{mean, scale2, df};
}

std::optional<double> LinearStats::variance_reduction(std::span<const double> x,
                                                      std::span<const double> x_ref) const {
    if (n < dim + 4 || !gram_ok || residual_degenerate()) return std::nullopt;
    const double q = leverage(x, x_ref);
    if (1.0 + q <= 0.0) return std::nullopt;
    return residual_ss() / double(n - dim - 3) * q * q / (1.0 + q);
}

// ---------------------------------------------------------------------------
// MultinomialStats

long long MultinomialStats::n() const {
    long long total = 0;
    for (long long c : counts) total += c;
    return total;
}

void MultinomialStats::update(int label) {
    counts.at(std::size_t(label)) += 1;
}

void MultinomialStats::merge(const MultinomialStats& other) {
    if (other.counts.size() != counts.size())
        throw std::invalid_argument("MultinomialStats::merge: class count mismatch");
    for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += other.counts[c];
}

double MultinomialStats::log_marginal() const {
    const double inv_c = 1.0 / double(num_classes());
    double lp = -std::lgamma(double(n()) + 1.0);
    for (long long z : counts)
        lp += std::lgamma(double(z) + inv_c) - std::lgamma(inv_c);
    return lp;
}

std::vector<double> MultinomialStats::predictive() const {
    const double inv_c = 1.0 / double(num_classes());
    const double denom = double(n()) + 1.0;
    std::vector<double> p(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        p[c] = (double(counts[c]) + inv_c) / denom;
    return p;
}

// ---------------------------------------------------------------------------
// Variant dispatch

LeafStats make_empty_stats(LeafModel model, int dim, int num_classes) {
    switch (model) {
        case LeafModel::constant: return ConstantStats{};
        case LeafModel::linear: return LinearStats(dim);
        case LeafModel::multinomial: return MultinomialStats(num_classes);
    }
    return ConstantStats{};
}

LeafStats stats_from_rows(LeafModel model, const DataStore& store, std::span<const int> rows) {
    LeafStats stats = make_empty_stats(model, store.dim(), store.num_classes());
    for (int r : rows) update_stats(stats, store.x(r), store.response(r));
    return stats;
}

void update_stats(LeafStats& stats, std::span<const double> x, const Response& y) {
    std::visit([&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantStats>) s.update(y.value);
        else if constexpr (std::is_same_v<T, LinearStats>) s.update(x, y.value);
        else s.update(y.label);
    }, stats);
}

void merge_stats(LeafStats& into, const LeafStats& other) {
    std::visit([&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        s.merge(std::get<T>(other));
    }, into);
}

std::optional<double> log_marginal(const LeafStats& stats) {
    return std::visit([](const auto& s) -> std::optional<double> { return s.log_marginal(); },
                      stats);
}

std::optional<StudentT> predictive_t(const LeafStats& stats, std::span<const double> x) {
    if (const auto* c = std::get_if<ConstantStats>(&stats)) return c->predictive();
    if (const auto* l = std::get_if<LinearStats>(&stats)) return l->predictive(x);
    return std::nullopt;
}

std::optional<StudentT> mean_posterior_t(const LeafStats& stats, std::span<const double> x) {
    if (const auto* c = std::get_if<ConstantStats>(&stats)) return c->mean_posterior();
    if (const auto* l = std::get_if<LinearStats>(&stats)) return l->mean_posterior(x);
    return std::nullopt;
}

std::optional<double> variance_reduction(const LeafStats& stats, std::span<const double> x,
                                         std::span<const double> x_ref) {
    if (const auto* c = std::get_if<ConstantStats>(&stats)) return c->variance_reduction();
    if (const auto* l = std::get_if<LinearStats>(&stats)) return l->variance_reduction(x, x_ref);
    return std::nullopt;
}

std::optional<double> log_predictive(const LeafStats& stats, std::span<const double> x,
                                     const Response& y) {
    if (const auto* m = std::get_if<MultinomialStats>(&stats)) {
        if (y.kind != ResponseKind::category)
            throw std::invalid_argument("log_predictive: expected class response");
        return std::log(m->predictive()[std::size_t(y.label)]);
    }
    if (y.kind != ResponseKind::real)
        throw std::invalid_argument("log_predictive: expected real response");
    const auto t = predictive_t(stats, x);
    if (!t) return std::nullopt;
    return t->log_pdf(y.value);
}

}  // namespace seqtree
