#include "seqtree/leaf_models.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>

using namespace seqtree;
using namespace testutil;

namespace {

constexpr double kPi = 3.141592653589793238463;

ConstantStats constant_over(const std::vector<double>& ys) {
    ConstantStats s;
    for (double y : ys) s.update(y);
    return s;
}

}  // namespace

TEST_CASE("constant stats over {0,1,2}") {
    const ConstantStats s = constant_over({0.0, 1.0, 2.0});
    CHECK(s.n == 3);
    CHECK(s.ybar() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.s2() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("constant marginal matches the closed form and quadrature") {
    const ConstantStats s = constant_over({0.0, 1.0, 2.0});
    const auto lm = s.log_marginal();
    REQUIRE(lm.has_value());
    CHECK(*lm == doctest::Approx(std::log(1.0 / (2.0 * kPi * std::sqrt(3.0)))).epsilon(1e-10));
    CHECK(*lm == doctest::Approx(-2.3871832).epsilon(1e-7));
    CHECK(quadrature_log_marginal({0.0, 1.0, 2.0}) == doctest::Approx(*lm).epsilon(1e-5));
}

TEST_CASE("constant marginal is undefined below the data minimum") {
    CHECK_FALSE(constant_over({0.0, 1.0}).log_marginal().has_value());
    CHECK_FALSE(constant_over({3.0, 3.0, 3.0}).log_marginal().has_value());  // s2 = 0
}

TEST_CASE("constant predictive and mean posterior over {0,1,2}") {
    const ConstantStats s = constant_over({0.0, 1.0, 2.0});
    const auto pred = s.predictive();
    REQUIRE(pred.has_value());
    CHECK(pred->location == doctest::Approx(1.0));
    CHECK(pred->scale2 == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(pred->df == doctest::Approx(2.0));

    const auto mp = s.mean_posterior();
    REQUIRE(mp.has_value());
    CHECK(mp->location == doctest::Approx(1.0));
    CHECK(mp->scale2 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mp->df == doctest::Approx(2.0));
}

TEST_CASE("mean posterior is tighter than the predictive and shrinks with n") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        ConstantStats s;
        const int n = 4 + int(rng.below(30));
        for (int i = 0; i < n; ++i) s.update(rng.normal());
        const auto pred = s.predictive();
        const auto mp = s.mean_posterior();
        REQUIRE((pred && mp));
        if (pred->df > 2.0) CHECK(*mp->variance() < *pred->variance());
    }
    // scale goes to zero as n grows with s2 held fixed
    ConstantStats big;
    big.n = 1000000;
    big.sum_y = 0.0;
    big.sum_y2 = 4.0;
    CHECK(big.mean_posterior()->scale2 < 1e-11);
}

TEST_CASE("constant variance reduction on the worked example") {
    ConstantStats s;
    s.n = 5;
    s.sum_y = 0.0;
    s.sum_y2 = 4.0;  // ybar 0 so s2 = 4
    const auto vr = s.variance_reduction();
    REQUIRE(vr.has_value());
    CHECK(*vr == doctest::Approx(2.0 * (0.04 / 1.2)).epsilon(1e-12));
    CHECK(*vr > 0.0);

    ConstantStats small = constant_over({0.0, 1.0, 2.0});
    CHECK_FALSE(small.variance_reduction().has_value());  // needs n >= 4
}

TEST_CASE("linear incremental updates match a batch rebuild") {
    Rng rng(17);
    const int d = 3;
    DataStore store = random_store(rng, 50, d);
    LeafStats incremental = make_empty_stats(LeafModel::linear, d, 0);
    std::vector<int> rows;
    for (int r = 0; r < store.size(); ++r) {
        update_stats(incremental, store.x(r), Response::real(store.y(r)));
        rows.push_back(r);
    }
    const LeafStats batch = stats_from_rows(LeafModel::linear, store, rows);
    CHECK(stats_distance(incremental, batch) < 1e-8);

    const auto& inc = std::get<LinearStats>(incremental);
    REQUIRE(inc.gram_ok);
    const double identity_err =
        (inc.gram * inc.gram_inv - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    CHECK(identity_err < 1e-8);
    CHECK(inc.regression_ss() >= 0.0);
    CHECK(inc.s2() - inc.regression_ss() >= 0.0);
}

TEST_CASE("linear predictive tracks a nearly-exact line") {
    Rng rng(23);
    LinearStats s(1);
    const double slope = 2.5, intercept = -1.0;
    for (int i = 0; i < 30; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = intercept + slope * x + 1e-5 * rng.normal();
        s.update(std::vector<double>{x}, y);
    }
    const std::vector<double> q{0.35};
    const auto pred = s.predictive(q);
    REQUIRE(pred.has_value());
    CHECK(std::abs(pred->location - (intercept + slope * 0.35)) < 1e-4);
}

TEST_CASE("merge equals stats over the union of rows") {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        DataStore store = random_store(rng, 24, 2);
        std::vector<int> left, right, all;
        for (int r = 0; r < store.size(); ++r) {
            (rng.uniform() < 0.5 ? left : right).push_back(r);
            all.push_back(r);
        }
        for (LeafModel model : {LeafModel::constant, LeafModel::linear}) {
            LeafStats a = stats_from_rows(model, store, left);
            const LeafStats b = stats_from_rows(model, store, right);
            merge_stats(a, b);
            CHECK(stats_distance(a, stats_from_rows(model, store, all)) < 1e-8);
        }
    }
}

TEST_CASE("merge with an empty operand is the identity") {
    const ConstantStats s = constant_over({0.5, 1.5, 4.0});
    ConstantStats empty;
    empty.merge(s);
    CHECK(empty.n == s.n);
    CHECK(empty.sum_y == s.sum_y);

    LinearStats ls(2);
    ls.update(std::vector<double>{1.0, 2.0}, 3.0);
    LinearStats lempty(2);
    lempty.merge(ls);
    CHECK(lempty.n == 1);
    CHECK(lempty.sum_y == 3.0);
}

TEST_CASE("constant merge of {0,1} and {2} equals stats of {0,1,2}") {
    ConstantStats a = constant_over({0.0, 1.0});
    const ConstantStats b = constant_over({2.0});
    a.merge(b);
    const ConstantStats c = constant_over({0.0, 1.0, 2.0});
    CHECK(a.n == c.n);
    CHECK(a.sum_y == doctest::Approx(c.sum_y));
    CHECK(a.sum_y2 == doctest::Approx(c.sum_y2));
}

TEST_CASE("multinomial counting, marginal and predictive") {
    MultinomialStats s(2);
    s.update(1);
    s.update(0);
    s.update(0);
    CHECK(s.counts == std::vector<long long>{2, 1});

    MultinomialStats first(2);
    first.update(0);
    CHECK(first.log_marginal() == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    const auto p = first.predictive();
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));

    MultinomialStats two(2);
    two.update(0);
    two.update(0);
    CHECK(two.log_marginal() == doctest::Approx(std::log(0.375)).epsilon(1e-12));

    MultinomialStats other(2);
    other.update(1);
    s.merge(other);
    CHECK(s.counts == std::vector<long long>{2, 2});
}

TEST_CASE("multinomial chained predictives sum to one over all sequences") {
    for (int C = 2; C <= 3; ++C) {
        const int n = 3;
        double total = 0.0;
        const int sequences = int(std::pow(C, n));
        for (int code = 0; code < sequences; ++code) {
            MultinomialStats s(C);
            int rest = code;
            for (int i = 0; i < n; ++i) {
                s.update(rest % C);
                rest /= C;
            }
            total += std::exp(s.log_marginal());
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sequential factorization identity for all three models") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8 + int(rng.below(20));

        // constant
        {
            std::vector<double> ys;
            for (int i = 0; i < n; ++i) ys.push_back(rng.normal());
            ConstantStats s = constant_over({ys[0], ys[1], ys[2]});
            double chain = *s.log_marginal();
            for (int i = 3; i < n; ++i) {
                chain += s.predictive()->log_pdf(ys[std::size_t(i)]);
                s.update(ys[std::size_t(i)]);
            }
            CHECK(std::abs(chain - *s.log_marginal()) < 1e-8 * std::max(1.0, std::abs(chain)));
        }
        // linear, d = 2
        {
            const int d = 2;
            DataStore store = random_store(rng, n, d);
            LeafStats stats = make_empty_stats(LeafModel::linear, d, 0);
            for (int i = 0; i < d + 2; ++i)
                update_stats(stats, store.x(i), Response::real(store.y(i)));
            double chain = *log_marginal(stats);
            for (int i = d + 2; i < n; ++i) {
                chain += *log_predictive(stats, store.x(i), Response::real(store.y(i)));
                update_stats(stats, store.x(i), Response::real(store.y(i)));
            }
            CHECK(std::abs(chain - *log_marginal(stats)) < 1e-8 * std::max(1.0, std::abs(chain)));
        }
        // multinomial, C = 3
        {
            MultinomialStats s(3);
            const int first = int(rng.below(3));
            s.update(first);
            double chain = s.log_marginal();
            for (int i = 1; i < n; ++i) {
                const int label = int(rng.below(3));
                chain += std::log(s.predictive()[std::size_t(label)]);
                s.update(label);
            }
            CHECK(std::abs(chain - s.log_marginal()) < 1e-8 * std::max(1.0, std::abs(chain)));
        }
    }
}

TEST_CASE("leaf statistics are order invariant") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        DataStore store = random_store(rng, 20, 2);
        std::vector<int> order(20, 0);
        std::iota(order.begin(), order.end(), 0);
        std::vector<int> shuffled = order;
        rng.shuffle(shuffled);
        for (LeafModel model : {LeafModel::constant, LeafModel::linear}) {
            const LeafStats a = stats_from_rows(model, store, order);
            const LeafStats b = stats_from_rows(model, store, shuffled);
            CHECK(stats_distance(a, b) < 1e-10);
            CHECK(std::abs(*log_marginal(a) - *log_marginal(b)) < 1e-10);
        }
    }
}

TEST_CASE("student t predictive density integrates to one") {
    // y = loc + scale*sinh(u) turns the heavy tails exponential, so plain
    // Simpson over u nails the whole real line.
    for (const StudentT t : {StudentT{1.0, 4.0 / 3.0, 2.0}, StudentT{-3.0, 0.25, 5.0}}) {
        const double s = std::sqrt(t.scale2);
        const int steps = 8000;
        const double ulo = -40.0, uhi = 40.0;
        const double h = (uhi - ulo) / double(steps);
        auto f = [&](double u) { return t.pdf(t.location + s * std::sinh(u)) * s * std::cosh(u); };
        double sum = f(ulo) + f(uhi);
        for (int i = 1; i < steps; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(ulo + h * double(i));
        const double integral = sum * h / 3.0;
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("degenerate responses mark the marginal undefined rather than huge") {
    LinearStats s(1);
    for (int i = 0; i < 8; ++i) s.update(std::vector<double>{double(i)}, 2.0 + 3.0 * double(i));
    // exactly collinear responses: residual sum of squares is zero
    CHECK_FALSE(s.log_marginal().has_value());
    CHECK_FALSE(s.predictive(std::vector<double>{1.0}).has_value());
}

TEST_CASE("duplicated covariates leave the gram singular until informative data arrives") {
    LinearStats s(2);
    for (int i = 0; i < 6; ++i) s.update(std::vector<double>{1.0, 2.0}, double(i));
    CHECK_FALSE(s.gram_ok);
    CHECK_FALSE(s.log_marginal().has_value());
    Rng rng(3);
    for (int i = 0; i < 6; ++i)
        s.update(std::vector<double>{rng.uniform(), rng.uniform()}, rng.normal());
    CHECK(s.gram_ok);
    CHECK(s.log_marginal().has_value());
}
