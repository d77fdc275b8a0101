#include "btpmbm/estimator.hpp"
#include "support/batch_smoother.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace btpmbm;

namespace {

Models single_birth_models(double noise_var, double pd, double clutter_rate) {
    Models m;
    m.motion = constant_velocity(1.0, 0.09, 0.98);
    m.measurement = position_sensor(noise_var, pd, clutter_rate, Region{-200, 200, -200, 200});
    BirthComponent b;
    b.log_weight = std::log(0.05);
    b.moments.mean = Vec4(0, 1, 0, 0.5);
    b.moments.cov = 4.0 * Mat4::Identity();
    m.birth.components.push_back(b);
    return m;
}

// One track with one detection per scan plus far-away clutter.
struct Fixture {
    MeasurementBatch batch;
    Models models;
    std::vector<int> track;
};

Fixture track_fixture(int K, int detected_until, double noise_var, double pd) {
    Fixture f;
    f.models = single_birth_models(noise_var, pd, 10.0);
    std::vector<std::vector<Vec2>> scans(static_cast<std::size_t>(K));
    Vec4 x(0.3, 1.0, -0.2, 0.5);
    for (int k = 1; k <= K; ++k) {
        if (k <= detected_until) scans[static_cast<std::size_t>(k - 1)].emplace_back(x(0) + 0.1 * k, x(2) - 0.05 * k);
        scans[static_cast<std::size_t>(k - 1)].emplace_back(150.0, -150.0 + 10 * k);
        x = f.models.motion.F * x;
    }
    f.batch = MeasurementBatch(scans);
    for (int k = 1; k <= detected_until; ++k) f.track.push_back(f.batch.offset(k));
    return f;
}

Association with_track(const MeasurementBatch& batch, const std::vector<int>& track) {
    auto chains = Association::singletons(batch).histories();
    for (std::size_t q = 1; q < track.size(); ++q) chains[static_cast<std::size_t>(track[q])].clear();
    chains[static_cast<std::size_t>(track.front())] = track;
    return Association::from_histories(batch, chains);
}

}  // namespace

TEST(Extract, KeepsOnlyCertainBernoullis) {
    const auto f = track_fixture(4, 4, 1.0, 0.9);
    const TpmbmEngine engine(f.batch, f.models);
    const auto est = extract(engine, with_track(f.batch, f.track));
    ASSERT_EQ(est.size(), 1u);
    EXPECT_EQ(est[0].bernoulli, f.track.front());
    EXPECT_EQ(est[0].measurements, f.track);
    EXPECT_TRUE(extract(engine, Association::singletons(f.batch)).empty());
}

TEST(Extract, FullyDetectedTrackMatchesBatchSmoother) {
    const int K = 5;
    const auto f = track_fixture(K, K, 1.0, 0.9);
    const TpmbmEngine engine(f.batch, f.models);
    const auto est = extract(engine, with_track(f.batch, f.track));
    ASSERT_EQ(est.size(), 1u);
    EXPECT_EQ(est[0].birth, 1);
    EXPECT_EQ(est[0].end, K);
    EXPECT_NEAR(est[0].log_pmf, 0.0, 1e-12);
    std::vector<Vec2> zs;
    for (int g : f.track) zs.push_back(f.batch.value(g));
    const auto ref = oracle::batch_smoother<kStateDim, kMeasDim>(f.models.birth.components[0].moments, f.models.motion,
                                                                 f.models.measurement, zs);
    for (int t = 0; t < K; ++t) {
        EXPECT_LT((est[0].means[static_cast<std::size_t>(t)] - ref[static_cast<std::size_t>(t)].mean).norm(), 1e-8);
        EXPECT_LT((est[0].covariances[static_cast<std::size_t>(t)] - ref[static_cast<std::size_t>(t)].cov).norm(), 1e-8);
    }
}

TEST(Extract, NoiselessTrackReproducesMeasurements) {
    const auto f = track_fixture(3, 3, 1e-12, 0.9);
    const TpmbmEngine engine(f.batch, f.models, TpmbmConfig::exact());
    const auto est = extract(engine, with_track(f.batch, f.track));
    ASSERT_EQ(est.size(), 1u);
    const auto t = est[0].to_trajectory();
    for (int k = 1; k <= 3; ++k)
        EXPECT_LT((t.position_at(k) - f.batch.value(f.track[static_cast<std::size_t>(k - 1)])).norm(), 1e-6);
}

TEST(Extract, MapEndFollowsLastDetectionWhenDetectionIsReliable) {
    // Detected at 1..3 of 8 scans with pd = 0.99: the object almost surely died right after.
    const auto f = track_fixture(8, 3, 1.0, 0.99);
    const TpmbmEngine engine(f.batch, f.models);
    const auto theta = with_track(f.batch, f.track);
    const auto est = extract(engine, theta);
    ASSERT_EQ(est.size(), 1u);
    EXPECT_EQ(est[0].birth, 1);
    EXPECT_EQ(est[0].end, 3);
    EXPECT_GT(std::exp(est[0].log_pmf), 0.9);
    EXPECT_EQ(est[0].means.size(), 3u);

    // The chosen atom is in the support and is the heaviest.
    const auto h = engine.evaluate(f.track, true);
    double best = kNegInf;
    bool found = false;
    for (const auto& c : h.components) {
        best = std::max(best, c.log_weight);
        found |= c.birth == est[0].birth && c.end == est[0].end;
    }
    EXPECT_TRUE(found);
}

TEST(Extract, SmoothedCovarianceNeverExceedsFiltered) {
    const auto f = track_fixture(6, 6, 1.0, 0.7);
    const TpmbmEngine engine(f.batch, f.models);
    const auto est = extract(engine, with_track(f.batch, f.track));
    ASSERT_EQ(est.size(), 1u);
    const auto h = engine.evaluate(f.track, true);
    const auto filtered = h.components.front().marginals();
    ASSERT_EQ(filtered.size(), est[0].covariances.size());
    for (std::size_t t = 0; t < filtered.size(); ++t)
        EXPECT_LE(est[0].covariances[t].trace(), filtered[t].cov.trace() + 1e-12);
}

TEST(EstimateIo, JsonRoundTripAndCsvShape) {
    const auto f = track_fixture(4, 4, 1.0, 0.9);
    const TpmbmEngine engine(f.batch, f.models);
    const auto est = extract(engine, with_track(f.batch, f.track));
    std::stringstream js;
    write_estimates_json(js, est);
    const auto back = read_trajectories_json(js);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].birth, est[0].birth);
    EXPECT_EQ(back[0].end(), est[0].end);
    for (std::size_t t = 0; t < back[0].states.size(); ++t) EXPECT_EQ(back[0].states[t], est[0].means[t]);

    std::stringstream csv;
    write_estimates_csv(csv, est);
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "# schema_version=1");
    std::getline(csv, line);
    EXPECT_EQ(line, "id,birth,end,time,px,py,vx,vy");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 4);
}

TEST(EstimateIo, MalformedJsonThrows) {
    std::istringstream bad1("{\"schema_version\": 1, \"trajectories\": [{\"id\": 1, \"birth\": 2, \"states\": [[3, 0, 0, 0, 0]]}]}");
    EXPECT_THROW((void)read_trajectories_json(bad1), std::invalid_argument);
    std::istringstream bad2("not json");
    EXPECT_THROW((void)read_trajectories_json(bad2), std::invalid_argument);
    std::istringstream bad3("{\"schema_version\": 9, \"trajectories\": []}");
    EXPECT_THROW((void)read_trajectories_json(bad3), std::invalid_argument);
}
