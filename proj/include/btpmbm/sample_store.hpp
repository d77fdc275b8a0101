#pragma once

#include "btpmbm/assoc.hpp"
#include "btpmbm/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace btpmbm {

struct SampleEntry {
    double log_pi = 0.0;
    std::uint64_t first_visit = 0;
    std::uint64_t visits = 0;
};

/// Deduplicated visited global hypotheses keyed by the θ digest. Full θ are
/// kept only for the best few (by ln π), which is all MAP extraction needs.
class SampleStore {
public:
    struct Kept {
        Association theta;
        double log_pi = 0.0;
        std::uint64_t first_visit = 0;
    };

    explicit SampleStore(std::size_t keep_best = 8) : keep_best_(keep_best == 0 ? 1 : keep_best) {}

    void record(const ChainState& state, std::uint64_t iteration) {
        record(state.theta(), state.log_pi(), iteration);
    }
    void record(const Association& theta, double log_pi, std::uint64_t iteration);

    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] std::size_t distinct() const { return entries_.size(); }
    [[nodiscard]] std::uint64_t total_visits() const { return total_; }
    [[nodiscard]] const std::unordered_map<std::uint64_t, SampleEntry>& entries() const { return entries_; }
    [[nodiscard]] const std::vector<Kept>& best() const { return best_; }
    /// Order-independent digest of (θ digest, visit count) pairs.
    [[nodiscard]] std::uint64_t digest() const;

private:
    std::size_t keep_best_;
    std::unordered_map<std::uint64_t, SampleEntry> entries_;
    std::vector<Kept> best_;
    std::uint64_t total_ = 0;
};

struct MapHypothesis {
    Association theta;
    double log_pi = 0.0;
    std::uint64_t first_visit = 0;
};

/// argmax ln π over the store, with ln π recomputed exactly for the kept
/// candidates; ties go to the earliest visit. Throws std::invalid_argument on an empty store.
[[nodiscard]] MapHypothesis map_hypothesis(const SampleStore& store, const TpmbmEngine& engine,
                                           WeightCache& cache);

/// Chain checkpoint: iteration count, θ, RNG state and store digest.
struct Checkpoint {
    std::string method;
    std::uint64_t iteration = 0;
    AssociationRows rows;
    std::string rng_state;
    std::uint64_t store_digest = 0;
};

inline constexpr int kCheckpointSchema = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& cp);
/// Throws std::invalid_argument on malformed input.
[[nodiscard]] Checkpoint read_checkpoint(std::istream& in, int scans);

[[nodiscard]] std::string rng_state(const Rng& rng);
[[nodiscard]] Rng rng_from_state(const std::string& state);

}  // namespace btpmbm
