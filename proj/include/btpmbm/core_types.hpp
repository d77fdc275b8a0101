#pragma once

#include "btpmbm/linear_gaussian.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace btpmbm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// (scan, index) of a measurement; both 1-based.
struct MeasurementRef {
    int time = 0;
    int index = 0;

    friend bool operator==(const MeasurementRef&, const MeasurementRef&) = default;
};

struct Measurement {
    int time = 0;
    int index = 0;
    Vec2 value = Vec2::Zero();

    [[nodiscard]] MeasurementRef ref() const { return {time, index}; }
};

/// Per-step record of one mixture component, kept only when sequences are
/// requested (estimation). Nodes are shared between components that split
/// from a common ancestor.
struct TraceNode {
    int step = 0;
    GaussianMoments predicted;
    GaussianMoments filtered;
    std::shared_ptr<const TraceNode> previous;
};

/// One (b, e) atom of a single-trajectory mixture. `state` is the marginal at
/// `end`; earlier marginals live in `trace` when recorded.
struct TrajectoryComponent {
    double log_weight = 0.0;
    int birth = 0;
    int end = 0;
    GaussianMoments state;
    std::shared_ptr<const TraceNode> trace;

    /// Filtered marginals for steps birth..end. Requires a recorded trace.
    [[nodiscard]] std::vector<GaussianMoments> marginals() const;
    /// One-step predictions for steps birth+1..end. Requires a recorded trace.
    [[nodiscard]] std::vector<GaussianMoments> predicted() const;
};

/// Bernoulli local hypothesis (r, f, w, M) at step `step`.
struct LocalHypothesis {
    double existence = 0.0;
    double log_weight = 0.0;
    int step = 0;
    std::vector<TrajectoryComponent> components;
    std::vector<MeasurementRef> history;

    [[nodiscard]] bool has_alive() const;
    [[nodiscard]] double alive_mass() const;
    /// Largest component end time, or -1 for an empty mixture.
    [[nodiscard]] int max_end() const;
};

struct PoissonComponent {
    double log_weight = 0.0;
    int birth = 0;
    int end = 0;
    GaussianMoments moments;
    std::shared_ptr<const TraceNode> trace;
};

/// Set of trajectories used for ground truth and estimates alike.
struct Trajectory {
    int id = 0;
    int birth = 0;
    std::vector<Vec4> states;
    std::vector<Mat4> covariances;       // empty for ground truth
    std::vector<MeasurementRef> measurements;  // associated detections, if known

    [[nodiscard]] int end() const { return birth + static_cast<int>(states.size()) - 1; }
    [[nodiscard]] bool exists_at(int t) const { return t >= birth && t <= end(); }
    [[nodiscard]] Vec2 position_at(int t) const {
        const auto& s = states[static_cast<std::size_t>(t - birth)];
        return {s(0), s(2)};
    }
};

/// All measurements of a batch, addressed either by (scan, index) or by a
/// 0-based global index g = offset(k) + j - 1. Scans are 1-based.
class MeasurementBatch {
public:
    MeasurementBatch() = default;
    explicit MeasurementBatch(std::vector<std::vector<Vec2>> scans);

    [[nodiscard]] int horizon() const { return static_cast<int>(scans_.size()); }
    [[nodiscard]] int count(int k) const { return static_cast<int>(scans_.at(k - 1).size()); }
    /// Number of measurements strictly before scan k (n_{k|k-1}).
    [[nodiscard]] int offset(int k) const { return offsets_.at(k - 1); }
    [[nodiscard]] int total() const { return offsets_.empty() ? 0 : offsets_.back(); }
    [[nodiscard]] int global_index(int k, int j) const;
    [[nodiscard]] int scan_of(int g) const { return scan_of_.at(g); }
    [[nodiscard]] MeasurementRef ref(int g) const;
    [[nodiscard]] const Vec2& value(int g) const;
    [[nodiscard]] Measurement measurement(int g) const;
    [[nodiscard]] const std::vector<std::vector<Vec2>>& scans() const { return scans_; }

private:
    std::vector<std::vector<Vec2>> scans_;
    std::vector<int> offsets_;  // size K + 1
    std::vector<int> scan_of_;
};

[[nodiscard]] double log_sum_exp(std::span<const double> values);

/// Neumaier compensated summation. Infinite terms propagate without NaN.
class CompensatedSum {
public:
    void add(double x) {
        if (!std::isfinite(x) || !std::isfinite(sum_)) {
            sum_ += x;
            comp_ = 0.0;
            return;
        }
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return std::isfinite(sum_) ? sum_ + comp_ : sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct NormalizedWeights {
    std::vector<double> weights;  // linear, sums to one
    double log_total = 0.0;
};

/// Log-sum-exp normalization. Throws std::domain_error("degenerate mixture")
/// when every entry is -inf.
[[nodiscard]] NormalizedWeights normalize_log_weights(std::span<const double> log_weights);

/// Renormalizes component log-weights in place; returns the log of the prior total.
double normalize_components(std::vector<TrajectoryComponent>& components);

struct PruneResult {
    std::vector<TrajectoryComponent> components;
    bool alive_removed = false;  // the hypothesis is dead from here on
};

/// Drops components whose normalized weight is below `threshold`, then
/// renormalizes. Components with end == `current_step` are the alive ones.
[[nodiscard]] PruneResult prune_components(std::vector<TrajectoryComponent> components,
                                           double threshold, int current_step);

/// Truncates the start-time and end-time pmfs of a normalized mixture: every
/// component whose birth (resp. end) marginal is below the threshold goes.
/// Returns true when an alive component was removed.
bool truncate_time_pmfs(std::vector<TrajectoryComponent>& components, double birth_threshold,
                        double end_threshold, int current_step);

}  // namespace btpmbm
