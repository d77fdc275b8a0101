#pragma once

#include "btpmbm/assoc.hpp"
#include "btpmbm/random.hpp"
#include "btpmbm/sample_store.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace btpmbm {

/// Conditional of the block (θ_k(i), θ_k over the scan-k new Bernoullis),
/// indexed by the value of θ_k(i).
struct ConditionalDist {
    std::vector<int> support;        // 0 or a 1-based measurement index at scan k, ascending
    std::vector<double> log_probs;   // unnormalized
    std::size_t current = 0;         // position of the present value in `support`

    [[nodiscard]] std::vector<double> probabilities() const;
};

/// Throws std::invalid_argument unless 1 <= k <= K and i < n_{k|k-1}.
[[nodiscard]] ConditionalDist conditional(ChainState& state, int k, int i);

/// Edit that sets θ_k(i) = value and repairs the scan-k new-Bernoulli rows.
/// The change for Bernoulli i comes first.
[[nodiscard]] std::vector<HistoryChange> block_changes(const Association& theta, int k, int i, int value);

/// Blocks whose conditional is a point mass without computation: null
/// Bernoullis and single-detection Bernoullis with r = 0.
[[nodiscard]] bool block_is_trivial(const ChainState& state, int i);

/// Draws the block from its conditional and applies it. Returns the drawn value.
int sample_block(ChainState& state, int k, int i, Rng& rng, const ConditionalDist* precomputed = nullptr);

/// One pass over all blocks: k ascending, i ascending; with `random_scan` the
/// same number of blocks is drawn uniformly at random instead.
void gibbs_sweep(ChainState& state, Rng& rng, bool random_scan = false);

using ChainObserver = std::function<void(std::uint64_t iteration, ChainState& state)>;

struct GibbsConfig {
    std::uint64_t sweeps = 1000;
    bool random_scan = false;
    std::uint64_t trace_every = 20;  // observer period, 0 = never
    std::size_t keep_best = 8;
};

struct ChainRun {
    SampleStore store;
    Association final_theta;
    double final_log_pi = 0.0;
    std::uint64_t iterations = 0;  // absolute iteration count at the end
    std::string rng_state;
};

/// T sweeps from theta0; the store holds theta0 and the state after every sweep.
/// `start_iteration` offsets iteration numbers when resuming from a checkpoint.
[[nodiscard]] ChainRun run_gibbs(const TpmbmEngine& engine, Association theta0, const GibbsConfig& config,
                                 Rng& rng, const ChainObserver& observer = {},
                                 std::uint64_t start_iteration = 0);

}  // namespace btpmbm
