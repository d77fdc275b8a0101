#pragma once

#include "btpmbm/tpmbm.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace btpmbm {

/// Dense per-scan form: rows[k-1] has n_{k|k} = offset(k) + m_k entries, each
/// 0 (missed / not existing) or a 1-based measurement index at scan k.
using AssociationRows = std::vector<std::vector<int>>;

struct ValidationResult {
    int constraint = 0;  // first violated constraint (1..5), 0 when valid
    std::string detail;

    [[nodiscard]] bool ok() const { return constraint == 0; }
};

/// Checks constraints 1-5 (6 follows from 2 and 5 and is reported as 5).
/// Throws std::invalid_argument on a shape mismatch.
[[nodiscard]] ValidationResult validate_rows(const MeasurementBatch& batch,
                                             const AssociationRows& rows);

/// Replacement of one Bernoulli's detection history; an empty history makes it null.
struct HistoryChange {
    int bernoulli = 0;
    HistoryKey history;
};

/// Track-oriented association θ_{1:K}, stored as a partition of the batch
/// measurements into chains. Bernoulli b (0-based, equal to the global index
/// of its creating measurement) is non-null iff it owns measurement b.
class Association {
public:
    Association() = default;

    /// Every measurement creates its own Bernoulli and is never re-detected.
    [[nodiscard]] static Association singletons(const MeasurementBatch& batch);
    /// Non-null chains; every measurement must appear in exactly one of them.
    [[nodiscard]] static Association from_histories(const MeasurementBatch& batch,
                                                    std::span<const HistoryKey> chains);
    /// Throws std::invalid_argument naming the violated constraint.
    [[nodiscard]] static Association from_rows(const MeasurementBatch& batch,
                                               const AssociationRows& rows);

    [[nodiscard]] int size() const { return static_cast<int>(owner_.size()); }
    [[nodiscard]] int horizon() const { return static_cast<int>(offsets_.size()) - 1; }
    [[nodiscard]] int owner(int g) const { return owner_[static_cast<std::size_t>(g)]; }
    [[nodiscard]] int next(int g) const { return next_[static_cast<std::size_t>(g)]; }
    [[nodiscard]] int prev(int g) const { return prev_[static_cast<std::size_t>(g)]; }
    [[nodiscard]] int scan_of(int g) const { return scan_[static_cast<std::size_t>(g)]; }
    /// n_{k|k-1}; offset(K + 1) is the measurement total.
    [[nodiscard]] int offset(int k) const { return offsets_.at(static_cast<std::size_t>(k - 1)); }
    [[nodiscard]] bool nonempty(int b) const { return owner(b) == b; }
    /// Last measurement of a non-null chain.
    [[nodiscard]] int tail(int b) const { return tail_[static_cast<std::size_t>(b)]; }
    [[nodiscard]] int detections(int b) const { return length_[static_cast<std::size_t>(b)]; }
    [[nodiscard]] int first_scan(int b) const { return scan_of(b); }
    [[nodiscard]] int last_scan(int b) const { return scan_of(tail(b)); }
    /// Measurement of Bernoulli b at scan k, or -1.
    [[nodiscard]] int detection_at(int b, int k) const;

    [[nodiscard]] HistoryKey history(int b) const;
    [[nodiscard]] std::vector<HistoryKey> histories() const;
    [[nodiscard]] std::vector<int> row(int k) const;
    [[nodiscard]] AssociationRows rows() const;

    /// Order-independent 64-bit digest of the partition.
    [[nodiscard]] std::uint64_t hash() const { return hash_; }

    /// Applies history replacements atomically. Throws std::invalid_argument
    /// (leaving the association unchanged) when the result is not a partition.
    void apply(std::span<const HistoryChange> changes);

    friend bool operator==(const Association& a, const Association& b) { return a.owner_ == b.owner_; }

private:
    void init(const MeasurementBatch& batch);
    void link(int b, std::span<const int> chain);
    void unlink(int b);
    static std::uint64_t mix(int g, int owner);

    std::vector<int> owner_;
    std::vector<int> next_;
    std::vector<int> prev_;
    std::vector<int> tail_;
    std::vector<int> length_;
    std::vector<int> scan_;
    std::vector<int> offsets_;
    std::uint64_t hash_ = 0;
};

/// Line-oriented text form: one line per scan, space-separated row entries.
void write_rows(std::ostream& out, const AssociationRows& rows);
[[nodiscard]] AssociationRows read_rows(std::istream& in, int scans);

/// Σ_i ln w^{i} via compensated summation; -inf when any local weight is -inf.
[[nodiscard]] double log_pi(const TpmbmEngine& engine, const Association& theta, WeightCache& cache);
/// -inf for rows that violate a constraint.
[[nodiscard]] double log_pi(const TpmbmEngine& engine, const AssociationRows& rows, WeightCache& cache);

/// ln ŵ indexed [k-1][j-1].
[[nodiscard]] std::vector<std::vector<double>> single_detection_weights(const TpmbmEngine& engine);

/// Mutable chain state: θ plus per-Bernoulli local-hypothesis summaries, the
/// running ln π, and the index sets used by the proposal moves.
class ChainState {
public:
    ChainState(const TpmbmEngine& engine, Association theta);

    [[nodiscard]] const TpmbmEngine& engine() const { return *engine_; }
    [[nodiscard]] const Association& theta() const { return theta_; }
    [[nodiscard]] WeightCache& cache() { return cache_; }
    [[nodiscard]] double log_pi() const { return log_pi_; }
    [[nodiscard]] const HypothesisSummary& summary(int b) const {
        return summaries_[static_cast<std::size_t>(b)];
    }

    /// I_{r=1}: Bernoullis certain to exist. Members are addressed by rank in index order.
    [[nodiscard]] int certain_count() const { return certain_.count(); }
    [[nodiscard]] int certain_at(int r) const { return certain_.select(r); }
    [[nodiscard]] bool is_certain(int b) const { return certain_.contains(b); }
    /// I_{r>0}: Bernoullis that may exist.
    [[nodiscard]] int possible_count() const { return possible_.count(); }
    [[nodiscard]] int possible_at(int r) const { return possible_.select(r); }
    [[nodiscard]] bool is_possible(int b) const { return possible_.contains(b); }
    /// |I_{t^b}|: non-null Bernoullis first detected after b's last detection
    /// or last detected before b's first detection.
    [[nodiscard]] int disjoint_count(int b) const;
    /// The r-th (0-based) member of I_{t^b}, in scan order.
    [[nodiscard]] int disjoint_member(int b, int r) const;

    /// Summary the edit would give each changed Bernoulli, and the resulting ln π change.
    struct Preview {
        std::vector<HypothesisSummary> summaries;
        double delta = 0.0;  // -inf when some new local weight is -inf
    };
    [[nodiscard]] Preview preview(std::span<const HistoryChange> changes);

    struct Undo {
        std::vector<HistoryChange> inverse;
        std::vector<HypothesisSummary> summaries;
        double log_pi = 0.0;
    };
    Undo apply(std::span<const HistoryChange> changes);
    /// Same as apply() with summaries already obtained from preview().
    Undo commit(std::span<const HistoryChange> changes, const Preview& preview);
    /// Restores the state exactly, including the running ln π.
    void undo(const Undo& token);

    /// Exact (compensated) ln π of the current θ; also resets the running value.
    double refresh_log_pi();

private:
    // Membership flags plus a Fenwick tree for rank selection.
    class IndexSet {
    public:
        void resize(int n);
        void set(int b, bool member);
        [[nodiscard]] bool contains(int b) const { return member_[static_cast<std::size_t>(b)] != 0; }
        [[nodiscard]] int count() const { return count_; }
        [[nodiscard]] int select(int r) const;

    private:
        std::vector<char> member_;
        std::vector<int> tree_;
        int count_ = 0;
        int top_bit_ = 0;
    };
    void attach(int b);
    void detach(int b);
    void install(std::span<const HistoryChange> changes, std::span<const HypothesisSummary> summaries);

    const TpmbmEngine* engine_;
    Association theta_;
    WeightCache cache_;
    std::vector<HypothesisSummary> summaries_;
    double log_pi_ = 0.0;
    IndexSet certain_;
    IndexSet possible_;
    std::vector<int> first_count_;  // non-null Bernoullis by first scan, index k
    std::vector<int> last_count_;   // non-null Bernoullis by last scan
};

}  // namespace btpmbm
