#include "btpmbm/metrics.hpp"

#include "btpmbm/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace btpmbm {

namespace {

double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    CompensatedSum s;
    for (double v : terms) s.add(v);
    return s.value();
}

struct Problem {
    const std::vector<Trajectory>& x;
    const std::vector<Trajectory>& y;
    GospaConfig cfg;
    int t0 = 1;
    int T = 0;
    double cp = 0.0;  // c^p
    struct Pair {
        int i, j;
        std::vector<double> dist_p;  // d^p when both exist and d < c, else -1
    };
    std::vector<Pair> pairs;

    bool x_at(int i, int t) const { return x[static_cast<std::size_t>(i)].exists_at(t0 + t); }
    bool y_at(int j, int t) const { return y[static_cast<std::size_t>(j)].exists_at(t0 + t); }
};

Problem build(const std::vector<Trajectory>& x, const std::vector<Trajectory>& y, const GospaConfig& cfg) {
    Problem pb{x, y, cfg, 1, 0, 0.0, {}};
    pb.cp = std::pow(cfg.c, cfg.p);
    int lo = 0, hi = -1;
    bool any = false;
    for (const auto* set : {&x, &y}) {
        for (const auto& tr : *set) {
            if (tr.states.empty()) continue;
            lo = any ? std::min(lo, tr.birth) : tr.birth;
            hi = any ? std::max(hi, tr.end()) : tr.end();
            any = true;
        }
    }
    if (!any) return pb;
    pb.t0 = lo;
    pb.T = hi - lo + 1;
    for (int i = 0; i < static_cast<int>(x.size()); ++i) {
        for (int j = 0; j < static_cast<int>(y.size()); ++j) {
            Problem::Pair p{i, j, std::vector<double>(static_cast<std::size_t>(pb.T), -1.0)};
            bool useful = false;
            for (int t = 0; t < pb.T; ++t) {
                if (!pb.x_at(i, t) || !pb.y_at(j, t)) continue;
                const auto& a = x[static_cast<std::size_t>(i)];
                const auto& b = y[static_cast<std::size_t>(j)];
                const double d = (a.position_at(lo + t) - b.position_at(lo + t)).norm();
                if (d < cfg.c) {
                    p.dist_p[static_cast<std::size_t>(t)] = std::pow(d, cfg.p);
                    useful = true;
                }
            }
            // A pair never within the cut-off is never worth assigning.
            if (useful) pb.pairs.push_back(std::move(p));
        }
    }
    return pb;
}

// Costs of an assignment given as w[pair][t].
GospaResult evaluate(const Problem& pb, const std::vector<std::vector<double>>& w) {
    GospaResult r;
    r.first_time = pb.t0;
    r.per_time.resize(static_cast<std::size_t>(pb.T));
    const double half = pb.cp / 2.0;
    const double half_switch = std::pow(pb.cfg.gamma, pb.cfg.p) / 2.0;
    const int nx = static_cast<int>(pb.x.size());
    const int ny = static_cast<int>(pb.y.size());
    for (int t = 0; t < pb.T; ++t) {
        std::vector<double> matched_x(static_cast<std::size_t>(nx), 0.0);
        std::vector<double> matched_y(static_cast<std::size_t>(ny), 0.0);
        std::vector<double> loc, sw;
        for (std::size_t q = 0; q < pb.pairs.size(); ++q) {
            const auto& p = pb.pairs[q];
            const double v = w[q][static_cast<std::size_t>(t)];
            const double dp = p.dist_p[static_cast<std::size_t>(t)];
            if (dp >= 0.0 && v != 0.0) {
                loc.push_back(v * dp);
                matched_x[static_cast<std::size_t>(p.i)] += v;
                matched_y[static_cast<std::size_t>(p.j)] += v;
            }
            if (t > 0) {
                const double dv = std::abs(v - w[q][static_cast<std::size_t>(t - 1)]);
                if (dv != 0.0) sw.push_back(half_switch * dv);
            }
        }
        std::vector<double> miss, fa;
        for (int i = 0; i < nx; ++i)
            if (pb.x_at(i, t)) miss.push_back(half * (1.0 - matched_x[static_cast<std::size_t>(i)]));
        for (int j = 0; j < ny; ++j)
            if (pb.y_at(j, t)) fa.push_back(half * (1.0 - matched_y[static_cast<std::size_t>(j)]));
        auto& terms = r.per_time[static_cast<std::size_t>(t)];
        terms.localization = sorted_sum(loc);
        terms.missed = sorted_sum(miss);
        terms.false_ = sorted_sum(fa);
        terms.switch_ = sorted_sum(sw);
    }
    CompensatedSum loc, miss, fa, sw;
    for (const auto& terms : r.per_time) {
        loc.add(terms.localization);
        miss.add(terms.missed);
        fa.add(terms.false_);
        sw.add(terms.switch_);
    }
    r.localization = loc.value();
    r.missed = miss.value();
    r.false_ = fa.value();
    r.switch_ = sw.value();
    r.total = r.localization + r.missed + r.false_ + r.switch_;
    r.assignment.assign(static_cast<std::size_t>(pb.T), std::vector<int>(static_cast<std::size_t>(nx), -1));
    for (std::size_t q = 0; q < pb.pairs.size(); ++q)
        for (int t = 0; t < pb.T; ++t)
            if (w[q][static_cast<std::size_t>(t)] > 0.5)
                r.assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(pb.pairs[q].i)] = pb.pairs[q].j;
    return r;
}

bool feasible(const Problem& pb, const std::vector<std::vector<double>>& w) {
    for (int t = 0; t < pb.T; ++t) {
        std::vector<double> rx(pb.x.size(), 0.0), ry(pb.y.size(), 0.0);
        for (std::size_t q = 0; q < pb.pairs.size(); ++q) {
            rx[static_cast<std::size_t>(pb.pairs[q].i)] += w[q][static_cast<std::size_t>(t)];
            ry[static_cast<std::size_t>(pb.pairs[q].j)] += w[q][static_cast<std::size_t>(t)];
        }
        for (double v : rx)
            if (v > 1.0) return false;
        for (double v : ry)
            if (v > 1.0) return false;
    }
    return true;
}

}  // namespace

void GospaConfig::validate() const {
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("gospa: order p must be >= 1");
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("gospa: cut-off c must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gospa: switch penalty must be > 0");
}

GospaResult trajectory_gospa(const std::vector<Trajectory>& truth, const std::vector<Trajectory>& estimate,
                             const GospaConfig& cfg) {
    cfg.validate();
    const Problem pb = build(truth, estimate, cfg);
    const std::size_t P = pb.pairs.size();
    const int T = pb.T;
    std::vector<std::vector<double>> w(P, std::vector<double>(static_cast<std::size_t>(T), 0.0));
    if (P == 0) {
        auto r = evaluate(pb, w);
        r.lp_objective = r.total;
        return r;
    }

    // Variables: w[q][t], then u+/u- for each pair and consecutive scans, then row/column slacks.
    const int nw = static_cast<int>(P) * T;
    const int nu = static_cast<int>(P) * (T - 1);
    auto wi = [&](std::size_t q, int t) { return static_cast<int>(q) * T + t; };
    auto up = [&](std::size_t q, int t) { return nw + 2 * (static_cast<int>(q) * (T - 1) + t); };
    std::vector<int> xs, ys;  // truths / estimates that appear in some pair
    for (const auto& p : pb.pairs) {
        xs.push_back(p.i);
        ys.push_back(p.j);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    const int nslack = static_cast<int>(xs.size() + ys.size()) * T;
    SparseLp lp;
    lp.cols = nw + 2 * nu + nslack;
    lp.rows = nslack + nu;
    lp.b = Eigen::VectorXd::Zero(lp.rows);
    lp.c = Eigen::VectorXd::Zero(lp.cols);
    const double half_switch = std::pow(cfg.gamma, cfg.p) / 2.0;
    for (std::size_t q = 0; q < P; ++q) {
        for (int t = 0; t < T; ++t) {
            const double dp = pb.pairs[q].dist_p[static_cast<std::size_t>(t)];
            lp.c[wi(q, t)] = dp >= 0.0 ? dp - pb.cp : 0.0;
        }
        for (int t = 0; t + 1 < T; ++t) {
            lp.c[up(q, t)] = half_switch;
            lp.c[up(q, t) + 1] = half_switch;
        }
    }
    // Rows in time order (assignment rows of scan t, then the switch rows
    // linking t and t + 1) keep the normal equations block tridiagonal.
    int row = 0;
    int slack = nw + 2 * nu;
    for (int t = 0; t < T; ++t) {
        for (int i : xs) {
            for (std::size_t q = 0; q < P; ++q)
                if (pb.pairs[q].i == i) lp.entries.emplace_back(row, wi(q, t), 1.0);
            lp.entries.emplace_back(row, slack++, 1.0);
            lp.b[row++] = 1.0;
        }
        for (int j : ys) {
            for (std::size_t q = 0; q < P; ++q)
                if (pb.pairs[q].j == j) lp.entries.emplace_back(row, wi(q, t), 1.0);
            lp.entries.emplace_back(row, slack++, 1.0);
            lp.b[row++] = 1.0;
        }
        if (t + 1 == T) continue;
        for (std::size_t q = 0; q < P; ++q) {
            lp.entries.emplace_back(row, wi(q, t), 1.0);
            lp.entries.emplace_back(row, wi(q, t + 1), -1.0);
            lp.entries.emplace_back(row, up(q, t), -1.0);
            lp.entries.emplace_back(row, up(q, t) + 1, 1.0);
            ++row;
        }
    }

    LpOptions options;
    options.natural_order = true;
    const auto sol = solve_lp(lp, options);
    CompensatedSum constant;
    for (int t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (pb.x_at(static_cast<int>(i), t)) constant.add(pb.cp / 2.0);
        for (std::size_t j = 0; j < estimate.size(); ++j)
            if (pb.y_at(static_cast<int>(j), t)) constant.add(pb.cp / 2.0);
    }
    const double lp_total = constant.value() + sol.objective;

    for (std::size_t q = 0; q < P; ++q)
        for (int t = 0; t < T; ++t) w[q][static_cast<std::size_t>(t)] = sol.x[wi(q, t)] > 0.5 ? 1.0 : 0.0;
    if (feasible(pb, w)) {
        auto r = evaluate(pb, w);
        if (r.total <= lp_total + 1e-6 * std::max(1.0, std::abs(lp_total))) {
            r.lp_objective = lp_total;
            return r;
        }
    }
    for (std::size_t q = 0; q < P; ++q)
        for (int t = 0; t < T; ++t)
            w[q][static_cast<std::size_t>(t)] = std::clamp(sol.x[wi(q, t)], 0.0, 1.0);
    auto r = evaluate(pb, w);
    r.integral = false;
    r.lp_objective = lp_total;
    return r;
}

int correct_association_count(const std::vector<Trajectory>& truth, const std::vector<Trajectory>& estimate,
                              const GospaResult& result, const GospaConfig& cfg) {
    bool labelled = truth.empty();
    for (const auto& x : truth) labelled |= !x.measurements.empty();
    if (!labelled) throw std::invalid_argument("correct_association_count: truth has no measurement-origin labels");
    int count = 0;
    for (std::size_t t = 0; t < result.assignment.size(); ++t) {
        const int time = result.first_time + static_cast<int>(t);
        for (std::size_t i = 0; i < truth.size() && i < result.assignment[t].size(); ++i) {
            const int j = result.assignment[t][i];
            if (j < 0) continue;
            const auto& x = truth[i];
            const auto& y = estimate.at(static_cast<std::size_t>(j));
            if (!x.exists_at(time) || !y.exists_at(time)) continue;
            if (!((x.position_at(time) - y.position_at(time)).norm() < cfg.c)) continue;
            for (const auto& m : x.measurements) {
                if (m.time != time) continue;
                if (std::find(y.measurements.begin(), y.measurements.end(), m) != y.measurements.end()) ++count;
            }
        }
    }
    return count;
}

}  // namespace btpmbm
