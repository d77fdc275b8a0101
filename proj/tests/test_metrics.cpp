#include "btpmbm/lp.hpp"
#include "btpmbm/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace btpmbm;

namespace {

Trajectory line(int id, int birth, int length, Vec2 start, Vec2 step) {
    Trajectory t;
    t.id = id;
    t.birth = birth;
    for (int s = 0; s < length; ++s) {
        const Vec2 p = start + s * step;
        t.states.emplace_back(p(0), step(0), p(1), step(1));
    }
    return t;
}

// Integral trajectory GOSPA straight from its definition: dynamic programming
// over per-scan partial assignments of truths to estimates.
double brute_force_gospa(const std::vector<Trajectory>& x, const std::vector<Trajectory>& y, const GospaConfig& cfg) {
    int lo = 1 << 30, hi = -(1 << 30);
    for (const auto* set : {&x, &y})
        for (const auto& t : *set) {
            lo = std::min(lo, t.birth);
            hi = std::max(hi, t.end());
        }
    if (lo > hi) return 0.0;
    const double cp = std::pow(cfg.c, cfg.p);
    const double gp = std::pow(cfg.gamma, cfg.p);
    std::vector<std::vector<int>> maps;
    std::vector<int> cur(x.size(), -1);
    std::function<void(std::size_t, std::vector<bool>&)> rec = [&](std::size_t i, std::vector<bool>& used) {
        if (i == x.size()) {
            maps.push_back(cur);
            return;
        }
        cur[i] = -1;
        rec(i + 1, used);
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (used[j]) continue;
            used[j] = true;
            cur[i] = static_cast<int>(j);
            rec(i + 1, used);
            used[j] = false;
        }
        cur[i] = -1;
    };
    std::vector<bool> used(y.size(), false);
    rec(0, used);
    auto base = [&](const std::vector<int>& m, int t) {
        double s = 0.0;
        std::vector<bool> hit(y.size(), false);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool xe = x[i].exists_at(t);
            if (m[i] < 0) {
                if (xe) s += cp / 2;
                continue;
            }
            hit[static_cast<std::size_t>(m[i])] = true;
            const auto& yy = y[static_cast<std::size_t>(m[i])];
            const bool ye = yy.exists_at(t);
            if (xe && ye)
                s += std::pow(std::min((x[i].position_at(t) - yy.position_at(t)).norm(), cfg.c), cfg.p);
            else if (xe || ye)
                s += cp / 2;
        }
        for (std::size_t j = 0; j < y.size(); ++j)
            if (!hit[j] && y[j].exists_at(t)) s += cp / 2;
        return s;
    };
    auto sw = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == b[i]) continue;
            s += (a[i] >= 0 && b[i] >= 0) ? gp : gp / 2;
        }
        return s;
    };
    std::vector<double> cost(maps.size());
    for (std::size_t a = 0; a < maps.size(); ++a) cost[a] = base(maps[a], lo);
    for (int t = lo + 1; t <= hi; ++t) {
        std::vector<double> next(maps.size(), INFINITY);
        for (std::size_t b = 0; b < maps.size(); ++b) {
            for (std::size_t a = 0; a < maps.size(); ++a) next[b] = std::min(next[b], cost[a] + sw(maps[a], maps[b]));
            next[b] += base(maps[b], t);
        }
        cost = next;
    }
    return *std::min_element(cost.begin(), cost.end());
}

std::vector<Trajectory> random_set(std::mt19937_64& rng, int n, int horizon, double spread) {
    std::uniform_int_distribution<int> birth(1, horizon);
    std::normal_distribution<double> n01;
    std::vector<Trajectory> out;
    for (int k = 0; k < n; ++k) {
        const int b = birth(rng);
        const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(horizon - b + 1));
        Trajectory t;
        t.id = k + 1;
        t.birth = b;
        Vec2 p(spread * n01(rng), spread * n01(rng));
        for (int s = 0; s < len; ++s) {
            p += Vec2(n01(rng) * 3, n01(rng) * 3);
            t.states.emplace_back(p(0), 0, p(1), 0);
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TEST(LinearProgram, SmallTextbookProblem) {
    // min -x1 - 2 x2  s.t.  x1 + x2 <= 4,  x1 + 3 x2 <= 6  -> x = (3, 1), value -5.
    SparseLp lp;
    lp.rows = 2;
    lp.cols = 4;
    lp.entries = {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}, {1, 0, 1}, {1, 1, 3}, {1, 3, 1}};
    lp.b = Eigen::Vector2d(4, 6);
    lp.c = Eigen::Vector4d(-1, -2, 0, 0);
    const auto s = solve_lp(lp);
    EXPECT_TRUE(s.converged);
    EXPECT_NEAR(s.objective, -5.0, 1e-8);
    EXPECT_NEAR(s.x[0], 3.0, 1e-7);
    EXPECT_NEAR(s.x[1], 1.0, 1e-7);
}

TEST(LinearProgram, AssignmentProblem) {
    // 3x3 assignment, optimum 5 by enumeration of the 6 permutations.
    const double C[3][3] = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
    SparseLp lp;
    lp.rows = 6;
    lp.cols = 9;
    lp.b = Eigen::VectorXd::Ones(6);
    lp.c = Eigen::VectorXd(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            lp.c[3 * i + j] = C[i][j];
            lp.entries.emplace_back(i, 3 * i + j, 1.0);
            lp.entries.emplace_back(3 + j, 3 * i + j, 1.0);
        }
    // The equality system has one redundant row; the regularized normal equations cope.
    const auto s = solve_lp(lp);
    EXPECT_NEAR(s.objective, 5.0, 1e-7);
}

TEST(LinearProgram, BadDimensionsAndInfeasibility) {
    SparseLp lp;
    lp.rows = 1;
    lp.cols = 2;
    lp.b = Eigen::VectorXd::Ones(2);
    lp.c = Eigen::VectorXd::Zero(2);
    EXPECT_THROW((void)solve_lp(lp), std::invalid_argument);
    // x1 + x2 = -1 with x >= 0 has no solution.
    SparseLp bad;
    bad.rows = 1;
    bad.cols = 2;
    bad.entries = {{0, 0, 1}, {0, 1, 1}};
    bad.b = Eigen::VectorXd::Constant(1, -1.0);
    bad.c = Eigen::VectorXd::Ones(2);
    EXPECT_THROW((void)solve_lp(bad), std::runtime_error);
}

TEST(Gospa, IdentityIsZero) {
    const std::vector<Trajectory> x{line(1, 1, 20, {0, 0}, {1, 0}), line(2, 5, 10, {0, 3}, {1, 0})};
    const auto r = trajectory_gospa(x, x);
    EXPECT_EQ(r.total, 0.0);
    EXPECT_TRUE(r.integral);
    EXPECT_EQ(r.switch_, 0.0);
}

TEST(Gospa, EmptyEstimateCostsHalfCutoffPerObjectStep) {
    const std::vector<Trajectory> x{line(1, 1, 20, {0, 0}, {1, 0}), line(2, 5, 10, {0, 3}, {1, 0})};
    const auto r = trajectory_gospa(x, {});
    EXPECT_EQ(r.total, 30 * 5.0);
    EXPECT_EQ(r.missed, 30 * 5.0);
    EXPECT_EQ(trajectory_gospa({}, x).false_, 30 * 5.0);
    EXPECT_EQ(trajectory_gospa({}, {}).total, 0.0);
}

TEST(Gospa, ConstantOffsetAndFarEstimate) {
    const std::vector<Trajectory> x{line(1, 1, 10, {0, 0}, {1, 0})};
    const auto near = trajectory_gospa(x, {line(1, 1, 10, {0, 3}, {1, 0})});
    EXPECT_NEAR(near.total, 30.0, 1e-12);
    EXPECT_NEAR(near.localization, 30.0, 1e-12);
    const auto far = trajectory_gospa(x, {line(1, 1, 10, {0, 30}, {1, 0})});
    EXPECT_NEAR(far.total, 100.0, 1e-12);
    EXPECT_NEAR(far.missed, 50.0, 1e-12);
    EXPECT_NEAR(far.false_, 50.0, 1e-12);
    // Estimate ends early: the remaining truth steps are missed.
    const auto part = trajectory_gospa(x, {line(1, 1, 6, {0, 1}, {1, 0})});
    EXPECT_NEAR(part.localization, 6.0, 1e-12);
    EXPECT_NEAR(part.missed, 20.0, 1e-12);
    EXPECT_NEAR(part.switch_, 0.0, 1e-12);
}

TEST(Gospa, TrackSwitchFixture) {
    // Two parallel truths 6 apart; each estimate follows one truth and then the other.
    const std::vector<Trajectory> x{line(1, 1, 10, {0, 0}, {1, 0}), line(2, 1, 10, {0, 6}, {1, 0})};
    auto a = line(1, 1, 10, {0, 0}, {1, 0});
    auto b = line(2, 1, 10, {0, 6}, {1, 0});
    for (int s = 5; s < 10; ++s) std::swap(a.states[static_cast<std::size_t>(s)], b.states[static_cast<std::size_t>(s)]);
    const auto r = trajectory_gospa(x, {a, b});
    // Re-assigning both truths once costs 2 * γ = 4, cheaper than any other option.
    EXPECT_NEAR(r.total, 4.0, 1e-9);
    EXPECT_NEAR(r.switch_, 4.0, 1e-9);
    EXPECT_NEAR(r.per_time[5].switch_, 4.0, 1e-9);
    EXPECT_NEAR(r.total, brute_force_gospa(x, {a, b}, {}), 1e-9);
}

TEST(Gospa, MatchesDefinitionOnRandomSmallSets) {
    std::mt19937_64 rng(7);
    int integral = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int nx = 1 + static_cast<int>(rng() % 3);
        const int ny = static_cast<int>(rng() % 4);
        const auto x = random_set(rng, nx, 6, 4.0);
        const auto y = random_set(rng, ny, 6, 4.0);
        GospaConfig cfg;
        if (trial % 3 == 1) cfg = {2.0, 5.0, 1.0};
        const auto r = trajectory_gospa(x, y, cfg);
        const double oracle = brute_force_gospa(x, y, cfg);
        EXPECT_LE(r.lp_objective, oracle + 1e-7);
        if (r.integral) {
            ++integral;
            EXPECT_NEAR(r.total, oracle, 1e-9 * std::max(1.0, oracle)) << trial;
        }
        EXPECT_NEAR(r.localization + r.missed + r.false_ + r.switch_, r.total, 1e-9);
        const auto back = trajectory_gospa(y, x, cfg);
        EXPECT_NEAR(back.total, r.total, 1e-12 * std::max(1.0, r.total) + (r.integral ? 0.0 : 1e-7)) << trial;
        EXPECT_NEAR(back.missed, r.false_, 1e-9);
        double bound = 0.0;
        for (const auto* set : {&x, &y})
            for (const auto& t : *set) bound += static_cast<double>(t.states.size()) * std::pow(cfg.c, cfg.p) / 2;
        EXPECT_LE(r.total, bound + 1e-9);
        EXPECT_GE(r.total, 0.0);
    }
    EXPECT_GT(integral, 50);
}

TEST(Gospa, PerTimeSumsToTotals) {
    std::mt19937_64 rng(11);
    const auto x = random_set(rng, 4, 30, 6.0);
    const auto y = random_set(rng, 5, 30, 6.0);
    const auto r = trajectory_gospa(x, y);
    double loc = 0, miss = 0, fa = 0, sw = 0;
    for (const auto& t : r.per_time) {
        loc += t.localization;
        miss += t.missed;
        fa += t.false_;
        sw += t.switch_;
    }
    EXPECT_NEAR(loc, r.localization, 1e-9);
    EXPECT_NEAR(miss, r.missed, 1e-9);
    EXPECT_NEAR(fa, r.false_, 1e-9);
    EXPECT_NEAR(sw, r.switch_, 1e-9);
    EXPECT_EQ(r.per_time[0].switch_, 0.0);
}

TEST(Gospa, RejectsBadConfig) {
    EXPECT_THROW((void)trajectory_gospa({}, {}, {0.5, 10, 2}), std::invalid_argument);
    EXPECT_THROW((void)trajectory_gospa({}, {}, {1, 0, 2}), std::invalid_argument);
    EXPECT_THROW((void)trajectory_gospa({}, {}, {1, 10, 0}), std::invalid_argument);
}

TEST(CorrectAssociations, PerfectSwappedAndEmpty) {
    auto x1 = line(1, 1, 10, {0, 0}, {1, 0});
    auto x2 = line(2, 1, 10, {0, 6}, {1, 0});
    for (int t = 1; t <= 10; ++t) {
        if (t != 4) x1.measurements.push_back({t, 1});
        x2.measurements.push_back({t, 2});
    }
    const std::vector<Trajectory> x{x1, x2};
    auto e1 = x1;
    auto e2 = x2;
    const auto perfect = trajectory_gospa(x, {e1, e2});
    EXPECT_EQ(correct_association_count(x, {e1, e2}, perfect), 19);
    EXPECT_EQ(correct_association_count(x, {}, trajectory_gospa(x, {})), 0);

    // Estimates that exchange their detections for scans 7..8 only: the
    // positions still follow the truths, so exactly those detections are lost.
    for (auto* e : {&e1, &e2}) e->measurements.clear();
    for (int t = 1; t <= 10; ++t) {
        const bool swapped = t == 7 || t == 8;
        if (t != 4) (swapped ? e2 : e1).measurements.push_back({t, 1});
        (swapped ? e1 : e2).measurements.push_back({t, 2});
    }
    const auto r = trajectory_gospa(x, {e1, e2});
    EXPECT_EQ(correct_association_count(x, {e1, e2}, r), 15);

    auto unlabelled = x;
    for (auto& t : unlabelled) t.measurements.clear();
    EXPECT_THROW((void)correct_association_count(unlabelled, {e1, e2}, r), std::invalid_argument);
}
