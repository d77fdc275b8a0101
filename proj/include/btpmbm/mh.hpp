#pragma once

#include "btpmbm/gibbs.hpp"

#include <array>
#include <string>

namespace btpmbm {

enum class MoveType { update = 1, merge = 2, split = 3, swap = 4 };

[[nodiscard]] const char* move_name(MoveType m);

/// Mixture weights p(c) over the four moves.
struct MoveConfig {
    std::array<double, 4> probabilities{1.0 / 6, 1.0 / 6, 1.0 / 6, 0.5};
    /// Correct the track-update move for the state dependence of its (i, t)
    /// selection; without it the move is always accepted.
    bool exact_track_update = true;

    [[nodiscard]] static MoveConfig high_switch();
    [[nodiscard]] static MoveConfig medium_switch();
    [[nodiscard]] static MoveConfig low_switch();
    /// "high", "medium" or "low"; throws std::invalid_argument otherwise.
    [[nodiscard]] static MoveConfig preset(const std::string& name);
    [[nodiscard]] double p(MoveType m) const { return probabilities[static_cast<std::size_t>(m) - 1]; }
    void validate() const;
};

struct MoveOutcome {
    MoveType type = MoveType::update;
    bool feasible = false;               // false: empty index set or no reversible proposal
    std::vector<HistoryChange> changes;  // θ → θ' as history replacements
    double log_q_forward = 0.0;          // ln p(c) q_c(θ'|θ)
    double log_q_reverse = 0.0;          // ln p(c') q_c'(θ|θ')
    double log_pi_ratio = 0.0;           // ln π(θ') - ln π(θ)
    double log_accept = kNegInf;         // ln A
    bool accepted = false;
};

/// Draws a proposal of the given type without changing the state (θ is
/// restored when the reverse density needs θ'). No acceptance decision.
[[nodiscard]] MoveOutcome propose(ChainState& state, MoveType type, Rng& rng, const MoveConfig& config);

/// Proposal plus accept/reject; applies θ' when accepted.
MoveOutcome track_update_move(ChainState& state, Rng& rng, const MoveConfig& config = {});
MoveOutcome merge_move(ChainState& state, Rng& rng, const MoveConfig& config = {});
MoveOutcome split_move(ChainState& state, Rng& rng, const MoveConfig& config = {});
MoveOutcome switch_move(ChainState& state, Rng& rng, const MoveConfig& config = {});

/// One iteration of the sampler: draw c ~ p(c), then the move.
MoveOutcome mh_step(ChainState& state, Rng& rng, const MoveConfig& config);

struct MoveStats {
    std::array<std::uint64_t, 4> proposed{};
    std::array<std::uint64_t, 4> feasible{};
    std::array<std::uint64_t, 4> accepted{};
};

struct MhConfig {
    std::uint64_t iterations = 200000;
    MoveConfig moves;
    std::uint64_t trace_every = 200;
    std::size_t keep_best = 8;
};

using MoveObserver = std::function<void(std::uint64_t iteration, const MoveOutcome&, const ChainState&)>;

struct MhRun : ChainRun {
    MoveStats stats;
};

[[nodiscard]] MhRun run_mh(const TpmbmEngine& engine, Association theta0, const MhConfig& config, Rng& rng,
                           const ChainObserver& observer = {}, const MoveObserver& on_move = {},
                           std::uint64_t start_iteration = 0);

}  // namespace btpmbm
