#include "seqtree/checkpoint.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdio>

using namespace seqtree;
using namespace testutil;

namespace {

Cloud filtered_cloud(LeafModel model, int steps, std::uint64_t seed, int particles) {
    Rng rng(404);
    if (model == LeafModel::multinomial) {
        DataStore data(2, 3);
        std::vector<double> x(2, 0.0);
        for (int i = 0; i < steps; ++i) {
            x[0] = rng.uniform();
            x[1] = rng.uniform();
            data.append(x, Response::category(int(rng.below(3))));
        }
        DataStore prefix(2, 3);
        prefix.append(data.x(0), data.response(0));
        CloudConfig cfg;
        cfg.model = model;
        cfg.particles = particles;
        cfg.seed = seed;
        Cloud cloud = Cloud::init(std::move(prefix), cfg);
        for (int i = 1; i < steps; ++i) cloud.step(data.x(i), data.response(i));
        return cloud;
    }
    DataStore data = random_store(rng, steps, 2);
    const int need = min_leaf_for(model, 2);
    DataStore prefix(2);
    for (int i = 0; i < need; ++i) prefix.append(data.x(i), data.response(i));
    CloudConfig cfg;
    cfg.model = model;
    cfg.particles = particles;
    cfg.seed = seed;
    Cloud cloud = Cloud::init(std::move(prefix), cfg);
    for (int i = need; i < steps; ++i) cloud.step(data.x(i), data.response(i));
    return cloud;
}

}  // namespace

TEST_CASE("checkpoints round-trip byte-identically") {
    for (LeafModel model : {LeafModel::constant, LeafModel::linear, LeafModel::multinomial}) {
        Cloud cloud = filtered_cloud(model, 50, 21, 10);
        const std::string once = cloud_to_json(cloud);
        Cloud restored = cloud_from_json(once);
        CHECK(cloud_to_json(restored) == once);
        CHECK(restored.time() == cloud.time());
        CHECK(restored.log_marginal_estimate() == cloud.log_marginal_estimate());
    }
}

TEST_CASE("restoring mid-run and continuing equals an uninterrupted run") {
    Rng rng(505);
    DataStore data = random_store(rng, 80, 2);
    CloudConfig cfg;
    cfg.model = LeafModel::constant;
    cfg.particles = 15;
    cfg.seed = 333;

    DataStore prefix(2);
    for (int i = 0; i < 3; ++i) prefix.append(data.x(i), data.response(i));

    Cloud full = Cloud::init(prefix, cfg);
    for (int i = 3; i < 80; ++i) full.step(data.x(i), data.response(i));

    Cloud half = Cloud::init(prefix, cfg);
    for (int i = 3; i < 40; ++i) half.step(data.x(i), data.response(i));
    Cloud resumed = cloud_from_json(cloud_to_json(half));
    for (int i = 40; i < 80; ++i) resumed.step(data.x(i), data.response(i));

    CHECK(cloud_to_json(resumed) == cloud_to_json(full));

    // bit-identical predictions as well
    const std::vector<double> q{0.2, -0.8};
    const auto a = full.predict(q);
    const auto b = resumed.predict(q);
    CHECK(a.mean == b.mean);
    CHECK(a.lo90 == b.lo90);
    CHECK(a.hi90 == b.hi90);
}

TEST_CASE("save and load through a file") {
    Cloud cloud = filtered_cloud(LeafModel::linear, 40, 77, 6);
    const std::string path = "/tmp/seqtree_test_ckpt.json";
    save_cloud(cloud, path);
    Cloud loaded = load_cloud(path);
    CHECK(cloud_to_json(loaded) == cloud_to_json(cloud));
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    CHECK_THROWS(cloud_from_json("{\"format\":\"bogus\"}"));
    CHECK_THROWS(load_cloud("/tmp/seqtree_no_such_file.json"));
}
