#include "btpmbm/tpmbm.hpp"
#include "support/exact_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace btpmbm;

namespace {

BirthModel six_births() {
    BirthModel b;
    for (int l = 0; l < 6; ++l) {
        BirthComponent c;
        c.log_weight = std::log(0.01);
        c.moments.mean = Vec4(20.0 * l, 0, -10.0 * l, 0);
        c.moments.cov = 4.0 * Mat4::Identity();
        b.components.push_back(c);
    }
    return b;
}

TrajectoryComponent component(double weight, int birth, int end, const Vec4& mean, const Mat4& cov) {
    TrajectoryComponent c;
    c.log_weight = std::log(weight);
    c.birth = birth;
    c.end = end;
    c.state.mean = mean;
    c.state.cov = cov;
    return c;
}

LocalHypothesis hypothesis(double r, int step, std::vector<TrajectoryComponent> comps) {
    LocalHypothesis h;
    h.existence = r;
    h.step = step;
    h.components = std::move(comps);
    return h;
}

double normal2_at_mean(double var) { return 1.0 / (2.0 * std::numbers::pi * var); }

oracle::TinyInstance three_scan_instance() {
    oracle::TinyInstance inst;
    const auto base = benchmark_models();
    inst.models.motion = base.motion;
    inst.models.measurement = base.measurement;
    BirthComponent b;
    b.log_weight = std::log(0.01);
    b.moments.mean = Vec4(0, 1, 0, 1);
    b.moments.cov = 4.0 * Mat4::Identity();
    inst.models.birth.components = {b};
    inst.batch = MeasurementBatch({{Vec2(0.3, -0.2), Vec2(50, 50)},
                                   {Vec2(1.2, 0.9)},
                                   {Vec2(2.1, 2.2), Vec2(-80, 10)}});
    return inst;
}

}  // namespace

TEST(PppPredict, BirthsFromEmpty) {
    const auto out = ppp_predict(PoissonIntensity{}, benchmark_models().motion, six_births());
    ASSERT_EQ(out.components.size(), 6u);
    for (const auto& c : out.components) {
        EXPECT_DOUBLE_EQ(c.log_weight, std::log(0.01));
        EXPECT_EQ(c.birth, 1);
        EXPECT_EQ(c.end, 1);
    }
}

TEST(PppPredict, SurvivalScaling) {
    PoissonIntensity p;
    p.step = 3;
    PoissonComponent c;
    c.log_weight = 0.0;
    c.birth = 2;
    c.end = 3;
    p.components.push_back(c);
    const auto m = benchmark_models().motion;
    const auto once = ppp_predict(p, m, six_births());
    ASSERT_EQ(once.components.size(), 7u);
    EXPECT_NEAR(std::exp(once.components[0].log_weight), 0.98, 1e-15);
    EXPECT_EQ(once.components[0].end, 4);
    const auto twice = ppp_predict(once, m, BirthModel{});
    EXPECT_NEAR(std::exp(twice.components[0].log_weight), 0.9604, 1e-15);
}

TEST(PppUpdate, DetectionScaling) {
    PoissonIntensity p;
    PoissonComponent c;
    c.log_weight = std::log(0.01);
    p.components.push_back(c);
    EXPECT_DOUBLE_EQ(ppp_update(p, 0.0).components[0].log_weight, std::log(0.01));
    EXPECT_EQ(ppp_update(p, 1.0).components[0].log_weight, kNegInf);
    const auto twice = ppp_update(ppp_update(p, 0.7), 0.7);
    EXPECT_NEAR(std::exp(twice.components[0].log_weight), 9e-4, 1e-17);
    auto dead = ppp_update(p, 1.0);
    prune_poisson(dead, 0.0);
    EXPECT_TRUE(dead.components.empty());
}

TEST(BernoulliMisdetect, CertainlyAlive) {
    auto h = hypothesis(1.0, 5, {component(1.0, 1, 5, Vec4::Zero(), Mat4::Identity())});
    const auto out = bernoulli_misdetect(h, 0.7);
    EXPECT_NEAR(out.log_weight, std::log(0.3), 1e-15);
    EXPECT_DOUBLE_EQ(out.existence, 1.0);
    EXPECT_NEAR(out.alive_mass(), 1.0, 1e-15);
}

TEST(BernoulliMisdetect, NoAliveMassIsUnaffected) {
    auto h = hypothesis(0.5, 5, {component(1.0, 1, 3, Vec4::Zero(), Mat4::Identity())});
    const auto out = bernoulli_misdetect(h, 0.7);
    EXPECT_DOUBLE_EQ(out.log_weight, 0.0);
    EXPECT_DOUBLE_EQ(out.existence, 0.5);
}

TEST(BernoulliMisdetect, PartialAliveMass) {
    auto h = hypothesis(1.0, 5,
                        {component(0.6, 1, 5, Vec4::Zero(), Mat4::Identity()),
                         component(0.4, 1, 4, Vec4::Zero(), Mat4::Identity())});
    const auto out = bernoulli_misdetect(h, 0.7);
    EXPECT_NEAR(std::exp(out.log_weight), 0.58, 1e-15);
    EXPECT_NEAR(out.alive_mass(), 0.6 * 0.3 / 0.58, 1e-15);
    EXPECT_NEAR(out.alive_mass(), 0.3103, 1e-4);
}

TEST(BernoulliMisdetect, ImpossibleWhenCertainDetectionMissed) {
    auto h = hypothesis(1.0, 5, {component(1.0, 1, 5, Vec4::Zero(), Mat4::Identity())});
    EXPECT_EQ(bernoulli_misdetect(h, 1.0).log_weight, kNegInf);
}

TEST(BernoulliMisdetect, UncertainExistence) {
    auto h = hypothesis(0.4, 5, {component(1.0, 1, 5, Vec4::Zero(), Mat4::Identity())});
    const auto out = bernoulli_misdetect(h, 0.7);
    EXPECT_NEAR(std::exp(out.log_weight), 1.0 - 0.4 * 0.7, 1e-15);
    EXPECT_NEAR(out.existence, 0.4 * 0.3 / (1.0 - 0.28), 1e-15);
}

TEST(BernoulliDetect, ClosedFormLikelihood) {
    const auto model = benchmark_models().measurement;  // R = I
    Mat4 cov = Mat4::Zero();
    cov(0, 0) = 1.0;
    cov(2, 2) = 1.0;
    auto h = hypothesis(1.0, 3, {component(1.0, 1, 3, Vec4::Zero(), cov)});
    const auto out = bernoulli_detect(h, Measurement{3, 1, Vec2(0, 0)}, model, 0.999);
    EXPECT_NEAR(out.log_weight, std::log(0.7 * normal2_at_mean(2.0)), 1e-14);
    EXPECT_DOUBLE_EQ(out.existence, 1.0);
    ASSERT_EQ(out.history.size(), 1u);
    EXPECT_EQ(out.history[0], (MeasurementRef{3, 1}));
}

TEST(BernoulliDetect, NonexistentOrDeadCannotBeDetected) {
    const auto model = benchmark_models().measurement;
    auto zero = hypothesis(0.0, 3, {component(1.0, 1, 3, Vec4::Zero(), Mat4::Identity())});
    EXPECT_EQ(bernoulli_detect(zero, Measurement{3, 1, Vec2(0, 0)}, model, 0.999).log_weight, kNegInf);
    auto dead = hypothesis(1.0, 3, {component(1.0, 1, 2, Vec4::Zero(), Mat4::Identity())});
    EXPECT_EQ(bernoulli_detect(dead, Measurement{3, 1, Vec2(0, 0)}, model, 0.999).log_weight, kNegInf);
}

TEST(BernoulliDetect, DropsDeadAndGatedOutComponents) {
    const auto model = benchmark_models().measurement;
    auto h = hypothesis(0.8, 3,
                        {component(0.5, 1, 3, Vec4::Zero(), Mat4::Identity()),
                         component(0.3, 1, 3, Vec4(100, 0, 100, 0), Mat4::Identity()),
                         component(0.2, 1, 2, Vec4::Zero(), Mat4::Identity())});
    const auto out = bernoulli_detect(h, Measurement{3, 1, Vec2(0.5, 0.5)}, model, 0.999);
    ASSERT_EQ(out.components.size(), 1u);
    EXPECT_NEAR(out.components[0].log_weight, 0.0, 1e-15);
    const auto ungated = bernoulli_detect(h, Measurement{3, 1, Vec2(0.5, 0.5)}, model, 1.0);
    EXPECT_EQ(ungated.components.size(), 2u);
}

TEST(NewBernoulli, OutsideAllGatesIsClutter) {
    const auto model = benchmark_models().measurement;
    const auto pred = ppp_predict(PoissonIntensity{}, benchmark_models().motion, six_births());
    const auto nb = new_bernoulli(Measurement{1, 1, Vec2(-150, 150)}, pred, model, 0.999);
    EXPECT_NEAR(std::exp(nb.exists.log_weight), 1.875e-4, 1e-18);
    EXPECT_DOUBLE_EQ(nb.exists.existence, 0.0);
    EXPECT_DOUBLE_EQ(nb.null.log_weight, 0.0);
    EXPECT_DOUBLE_EQ(nb.null.existence, 0.0);
    EXPECT_TRUE(nb.null.history.empty());
}

TEST(NewBernoulli, NoClutterMeansCertainObject) {
    auto model = benchmark_models().measurement;
    model.clutter_rate = 0.0;
    const auto pred = ppp_predict(PoissonIntensity{}, benchmark_models().motion, six_births());
    const auto nb = new_bernoulli(Measurement{1, 1, Vec2(0.5, 0.0)}, pred, model, 0.999);
    EXPECT_DOUBLE_EQ(nb.exists.existence, 1.0);
}

TEST(NewBernoulli, DirectFormula) {
    // Predicted measurement density at its mean equals 0.1: S = s I with 1/(2 pi s) = 0.1.
    const auto model = benchmark_models().measurement;
    const double s = 1.0 / (2.0 * std::numbers::pi * 0.1);
    PoissonIntensity pred;
    pred.step = 1;
    PoissonComponent c;
    c.log_weight = std::log(0.01);
    c.birth = 1;
    c.end = 1;
    c.moments.cov = Mat4::Identity();
    c.moments.cov(0, 0) = s - 1.0;
    c.moments.cov(2, 2) = s - 1.0;
    pred.components.push_back(c);
    const auto nb = new_bernoulli(Measurement{1, 1, Vec2(0, 0)}, pred, model, 0.999);
    const double phi = 0.01 * 0.7 * 0.1;
    EXPECT_NEAR(nb.exists.existence, phi / (phi + 1.875e-4), 1e-12);
    EXPECT_NEAR(nb.exists.existence, 0.7887, 1e-4);
    EXPECT_NEAR(std::exp(nb.exists.log_weight), phi + 1.875e-4, 1e-15);
}

TEST(NewBernoulli, EvidenceMatchesQuadrature) {
    // One scan, one measurement: lambda_C + integral of pd * lambda_u * likelihood.
    const auto models = benchmark_models();
    PoissonIntensity pred;
    pred.step = 1;
    PoissonComponent c;
    c.log_weight = std::log(0.05);
    c.birth = 1;
    c.end = 1;
    c.moments.mean = Vec4(1.0, 0.0, -2.0, 0.0);
    c.moments.cov = Mat4::Identity() * 4.0;
    c.moments.cov(0, 2) = c.moments.cov(2, 0) = 1.0;
    pred.components.push_back(c);
    const Vec2 z(2.0, -0.5);
    const auto nb = new_bernoulli(Measurement{1, 1, z}, pred, models.measurement, 1.0);

    Eigen::Matrix2d P;
    P << 4.0, 1.0, 1.0, 4.0;
    const Eigen::Matrix2d Pi = P.inverse();
    const Eigen::Vector2d m(1.0, -2.0);
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(P.determinant()));
    const double h = 0.01;
    double integral = 0.0;
    for (double x = -14.0; x <= 16.0; x += h)
        for (double y = -17.0; y <= 13.0; y += h) {
            const Eigen::Vector2d p(x, y);
            const Eigen::Vector2d d = p - m;
            const Eigen::Vector2d e = z - p;
            integral += norm * std::exp(-0.5 * d.dot(Pi * d)) *
                        std::exp(-0.5 * e.squaredNorm()) / (2.0 * std::numbers::pi) * h * h;
        }
    const double expected = 1.875e-4 + 0.7 * 0.05 * integral;
    EXPECT_NEAR(std::exp(nb.exists.log_weight), expected, 1e-4 * expected);
}

TEST(BernoulliPredict, SplitsAliveComponent) {
    auto h = hypothesis(1.0, 4, {component(1.0, 2, 4, Vec4(0, 1, 0, 1), Mat4::Identity())});
    const auto out = bernoulli_predict(h, benchmark_models().motion);
    ASSERT_EQ(out.components.size(), 2u);
    EXPECT_EQ(out.step, 5);
    EXPECT_NEAR(std::exp(out.components[0].log_weight), 0.02, 1e-15);
    EXPECT_EQ(out.components[0].end, 4);
    EXPECT_NEAR(std::exp(out.components[1].log_weight), 0.98, 1e-15);
    EXPECT_EQ(out.components[1].end, 5);
    EXPECT_DOUBLE_EQ(out.components[1].state.mean(0), 1.0);
}

TEST(BernoulliPredict, DeadHypothesisUnchanged) {
    auto h = hypothesis(1.0, 4, {component(1.0, 2, 3, Vec4(0, 1, 0, 1), Mat4::Identity())});
    const auto out = bernoulli_predict(h, benchmark_models().motion);
    ASSERT_EQ(out.components.size(), 1u);
    EXPECT_EQ(out.components[0].end, 3);
    EXPECT_DOUBLE_EQ(out.components[0].log_weight, 0.0);
}

TEST(BernoulliPredict, GeometricSurvival) {
    auto h = hypothesis(1.0, 1, {component(1.0, 1, 1, Vec4::Zero(), Mat4::Identity())});
    const auto m = benchmark_models().motion;
    for (int t = 0; t < 10; ++t) {
        h = bernoulli_predict(h, m);
        EXPECT_NEAR(h.alive_mass(), std::pow(0.98, t + 1), 1e-14);
    }
    EXPECT_NEAR(h.alive_mass(), 0.8171, 1e-4);
}

TEST(Engine, EmptyHistoryIsNull) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models);
    const auto h = engine.evaluate({});
    EXPECT_DOUBLE_EQ(h.log_weight, 0.0);
    EXPECT_DOUBLE_EQ(h.existence, 0.0);
}

TEST(Engine, SingleDetectionMatchesHandRecursion) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models, TpmbmConfig::exact());
    const int g = 0;
    // new Bernoulli at scan 1, then predict + misdetect at scans 2 and 3.
    auto h = new_bernoulli(inst.batch.measurement(g), engine.predicted_intensity(1),
                           inst.models.measurement, 1.0)
                 .exists;
    for (int k = 2; k <= 3; ++k) {
        h = bernoulli_predict(h, inst.models.motion);
        h = bernoulli_misdetect(h, inst.models.measurement.detection);
    }
    const int key[1] = {g};
    const auto e = engine.evaluate(key);
    EXPECT_DOUBLE_EQ(e.log_weight, h.log_weight);
    EXPECT_DOUBLE_EQ(e.existence, h.existence);
    EXPECT_DOUBLE_EQ(engine.single_detection_log_weight(g), h.log_weight);
    EXPECT_GT(e.existence, 0.0);
    EXPECT_LT(e.existence, 1.0);
}

TEST(Engine, TwoDetectionsGiveCertainExistence) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models);
    const int key[2] = {0, 2};
    EXPECT_DOUBLE_EQ(engine.evaluate(key).existence, 1.0);
}

TEST(Engine, InvalidHistoriesThrow) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models);
    const int same_scan[2] = {0, 1};
    const int backwards[2] = {2, 0};
    const int out_of_range[1] = {99};
    EXPECT_THROW((void)engine.evaluate(same_scan), std::invalid_argument);
    EXPECT_THROW((void)engine.evaluate(backwards), std::invalid_argument);
    EXPECT_THROW((void)engine.evaluate(out_of_range), std::invalid_argument);
}

TEST(Engine, FarMeasurementSingleWeightIsClutterDensity) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models);
    EXPECT_NEAR(std::exp(engine.single_detection_log_weight(4)), 1.875e-4, 1e-15);
    EXPECT_DOUBLE_EQ(engine.single_detection_existence(4), 0.0);
}

TEST(Engine, MoreBirthMassIncreasesSingleWeight) {
    auto inst = three_scan_instance();
    const TpmbmEngine low(inst.batch, inst.models);
    inst.models.birth.components[0].log_weight = std::log(0.05);
    const TpmbmEngine high(inst.batch, inst.models);
    EXPECT_GT(high.single_detection_log_weight(0), low.single_detection_log_weight(0));
}

TEST(Engine, ExactConfigMatchesTrajectoryEnumeration) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto inst = oracle::random_tiny_instance(seed);
        const TpmbmEngine engine(inst.batch, inst.models, TpmbmConfig::exact());
        for (const auto& owner : oracle::enumerate_partitions(inst.batch)) {
            for (const auto& chain : oracle::chains(owner)) {
                if (chain.empty()) continue;
                const auto h = engine.evaluate(chain);
                const auto o = oracle::local_weight(inst.batch, inst.models, chain);
                EXPECT_NEAR(h.log_weight, o.log_weight, 1e-10 * std::max(1.0, std::abs(o.log_weight)))
                    << "seed " << seed;
                EXPECT_NEAR(h.existence, o.existence, 1e-10);
            }
        }
    }
}

TEST(Engine, CacheIsBitIdentical) {
    const auto inst = oracle::random_tiny_instance(17, 5);
    for (const auto& config : {TpmbmConfig{}, TpmbmConfig::exact()}) {
        const TpmbmEngine engine(inst.batch, inst.models, config);
        WeightCache warm(config);
        const auto partitions = oracle::enumerate_partitions(inst.batch);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& owner : partitions) {
                for (const auto& chain : oracle::chains(owner)) {
                    const auto cold = TpmbmEngine::summarize(engine.evaluate(chain));
                    const auto hot = engine.summary(chain, warm);
                    EXPECT_EQ(cold.log_weight, hot.log_weight);
                    EXPECT_EQ(cold.existence, hot.existence);
                    EXPECT_EQ(cold.max_end, hot.max_end);
                }
            }
        }
        EXPECT_GT(warm.stats().hits, 0u);
    }
}

TEST(Engine, ExistenceMatchesHistoryLength) {
    for (std::uint64_t seed = 40; seed < 60; ++seed) {
        const auto inst = oracle::random_tiny_instance(seed);
        const TpmbmEngine engine(inst.batch, inst.models, TpmbmConfig::exact());
        for (const auto& owner : oracle::enumerate_partitions(inst.batch)) {
            for (const auto& chain : oracle::chains(owner)) {
                const auto h = engine.evaluate(chain);
                if (h.log_weight == kNegInf) continue;
                if (chain.size() >= 2) {
                    EXPECT_EQ(h.existence, 1.0);
                } else if (chain.size() == 1) {
                    EXPECT_GT(h.existence, 0.0);
                    EXPECT_LT(h.existence, 1.0);
                } else {
                    EXPECT_EQ(h.existence, 0.0);
                }
            }
        }
    }
}

TEST(Engine, PredictedAtAndGating) {
    const auto inst = three_scan_instance();
    const TpmbmEngine engine(inst.batch, inst.models);
    WeightCache cache;
    const int prefix[1] = {0};
    const auto pred = engine.predicted_at(prefix, 3, cache);
    EXPECT_EQ(pred.step, 3);
    const auto gated = engine.gated_measurements(pred, 3);
    ASSERT_EQ(gated.size(), 1u);
    EXPECT_EQ(gated[0], 3);
}
