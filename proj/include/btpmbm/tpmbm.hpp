#pragma once

#include "btpmbm/core_types.hpp"
#include "btpmbm/linear_gaussian.hpp"

#include <algorithm>
#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

namespace btpmbm {

struct PoissonIntensity {
    std::vector<PoissonComponent> components;
    int step = 0;
};

struct Models {
    MotionModel motion;
    MeasurementModel measurement;
    BirthModel birth;
};

struct TpmbmConfig {
    double gate_prob = 0.999;            // values >= 1 disable gating
    double ppp_prune = 1e-4;             // absolute Poisson component weight
    double birth_pmf_threshold = 1e-2;
    double end_pmf_threshold = 1e-4;
    double existence_clamp = 1e-2;       // new Bernoullis below this become clutter-only
    std::size_t summary_cache_capacity = 1u << 18;
    std::size_t prefix_cache_capacity = 1u << 13;

    /// No gating, pruning or clamping: the recursion is then exact.
    [[nodiscard]] static TpmbmConfig exact();
    void validate() const;
};

// Single-step operations. Weights stay in the log domain throughout.

/// Survival-weighted propagation of every component plus appended births.
[[nodiscard]] PoissonIntensity ppp_predict(const PoissonIntensity& intensity,
                                           const MotionModel& motion, const BirthModel& birth,
                                           bool record = false);

/// Undetected-mass update: weights scaled by (1 - pd).
[[nodiscard]] PoissonIntensity ppp_update(const PoissonIntensity& intensity, double pd);

/// Removes Poisson components whose (absolute) weight is below threshold.
void prune_poisson(PoissonIntensity& intensity, double threshold);

[[nodiscard]] LocalHypothesis bernoulli_predict(LocalHypothesis h, const MotionModel& motion);

[[nodiscard]] LocalHypothesis bernoulli_misdetect(LocalHypothesis h, double pd);

/// Detection update with z at h.step. gate_prob >= 1 disables gating. Returns a
/// hypothesis with log_weight -inf when the association is impossible.
[[nodiscard]] LocalHypothesis bernoulli_detect(LocalHypothesis h, const Measurement& z,
                                               const MeasurementModel& model, double gate_prob);

struct NewBernoulli {
    LocalHypothesis exists;
    LocalHypothesis null;
};

[[nodiscard]] NewBernoulli new_bernoulli(const Measurement& z, const PoissonIntensity& predicted,
                                         const MeasurementModel& model, double gate_prob,
                                         bool record = false);

/// Ordered global measurement indices of a local hypothesis. The first entry
/// is the creating measurement and equals the Bernoulli index.
using HistoryKey = std::vector<int>;

struct HypothesisSummary {
    double log_weight = 0.0;
    double existence = 0.0;
    int max_end = -1;  // latest component end time, -1 for an empty mixture
};

/// Small LRU map keyed by a 64-bit hash of an int sequence, with the sequence
/// itself kept for collision checks.
template <typename Value>
class SequenceLru {
public:
    explicit SequenceLru(std::size_t capacity) : capacity_(capacity) {}

    const Value* find(std::uint64_t hash, std::span<const int> key) {
        auto it = index_.find(hash);
        if (it == index_.end()) return nullptr;
        auto node = it->second;
        if (!std::equal(node->key.begin(), node->key.end(), key.begin(), key.end())) return nullptr;
        order_.splice(order_.begin(), order_, node);
        return &node->value;
    }

    void insert(std::uint64_t hash, std::span<const int> key, Value value) {
        if (capacity_ == 0) return;
        if (auto it = index_.find(hash); it != index_.end()) {
            order_.erase(it->second);
            index_.erase(it);
        }
        order_.push_front(Node{hash, std::vector<int>(key.begin(), key.end()), std::move(value)});
        index_.emplace(hash, order_.begin());
        while (index_.size() > capacity_) {
            index_.erase(order_.back().hash);
            order_.pop_back();
        }
    }

    [[nodiscard]] std::size_t size() const { return index_.size(); }
    void clear() {
        index_.clear();
        order_.clear();
    }

private:
    struct Node {
        std::uint64_t hash;
        std::vector<int> key;
        Value value;
    };
    std::size_t capacity_;
    std::list<Node> order_;
    std::unordered_map<std::uint64_t, typename std::list<Node>::iterator> index_;
};

/// Chain-local memo of local-hypothesis results: final summaries by full
/// history and intermediate states by detection prefix.
class WeightCache {
public:
    explicit WeightCache(const TpmbmConfig& config = {})
        : summaries_(config.summary_cache_capacity), prefixes_(config.prefix_cache_capacity) {}

    struct Stats {
        std::uint64_t hits = 0;
        std::uint64_t misses = 0;
    };
    [[nodiscard]] const Stats& stats() const { return stats_; }
    void clear() {
        summaries_.clear();
        prefixes_.clear();
    }

private:
    friend class TpmbmEngine;
    SequenceLru<HypothesisSummary> summaries_;
    SequenceLru<LocalHypothesis> prefixes_;
    Stats stats_;
};

[[nodiscard]] std::uint64_t sequence_hash_step(std::uint64_t h, int value);
[[nodiscard]] std::uint64_t sequence_hash(std::span<const int> values);

/// Immutable batch context: measurements, models, precomputed Poisson
/// intensities and single-detection weights. Safe to share between chains.
class TpmbmEngine {
public:
    TpmbmEngine(MeasurementBatch batch, Models models, TpmbmConfig config = {});

    [[nodiscard]] const MeasurementBatch& batch() const { return batch_; }
    [[nodiscard]] const Models& models() const { return models_; }
    [[nodiscard]] const TpmbmConfig& config() const { return config_; }
    [[nodiscard]] int horizon() const { return batch_.horizon(); }
    [[nodiscard]] int bernoulli_count() const { return batch_.total(); }

    /// Predicted Poisson intensity of undetected trajectories at scan k (before update).
    [[nodiscard]] const PoissonIntensity& predicted_intensity(int k) const;

    /// ln of the single-detection weight of measurement g (Bernoulli g detected only by g).
    [[nodiscard]] double single_detection_log_weight(int g) const { return single_log_w_.at(g); }
    [[nodiscard]] double single_detection_existence(int g) const { return single_r_.at(g); }

    /// New Bernoulli created by measurement g, with clamp and truncation applied.
    [[nodiscard]] LocalHypothesis create(int g, bool record = false) const;
    /// Predicts h one step and updates it with measurement g, or with a misdetection if g < 0.
    void advance(LocalHypothesis& h, int g) const;
    /// Misdetections up to and including scan `step`.
    void advance_to(LocalHypothesis& h, int step) const;

    /// Final-step hypothesis for a history, computed from scratch.
    [[nodiscard]] LocalHypothesis evaluate(std::span<const int> history, bool record = false) const;
    /// Memoized summary of the final-step hypothesis. Bit-identical to evaluate().
    [[nodiscard]] HypothesisSummary summary(std::span<const int> history, WeightCache& cache) const;
    /// State predicted to scan k given detections `prefix` (all before k), before the scan-k update.
    [[nodiscard]] LocalHypothesis predicted_at(std::span<const int> prefix, int k,
                                               WeightCache& cache) const;
    /// Scan-k measurements inside the gate of some alive component of `predicted`.
    [[nodiscard]] std::vector<int> gated_measurements(const LocalHypothesis& predicted, int k) const;

    /// Throws std::invalid_argument when the history is not a valid local hypothesis key.
    void validate_history(std::span<const int> history) const;

    [[nodiscard]] static HypothesisSummary summarize(const LocalHypothesis& h);

private:
    [[nodiscard]] LocalHypothesis state_after(std::span<const int> prefix, WeightCache& cache) const;
    void truncate(LocalHypothesis& h) const;
    void predict_step(LocalHypothesis& h) const;
    void update_step(LocalHypothesis& h, int g) const;

    MeasurementBatch batch_;
    Models models_;
    TpmbmConfig config_;
    std::vector<PoissonIntensity> predicted_;  // index k - 1
    std::vector<double> single_log_w_;
    std::vector<double> single_r_;
};

}  // namespace btpmbm
