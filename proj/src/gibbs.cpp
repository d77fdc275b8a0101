#include "btpmbm/gibbs.hpp"

#include <algorithm>
#include <stdexcept>

namespace btpmbm {

namespace {

void check_block(const MeasurementBatch& batch, int k, int i) {
    if (k < 1 || k > batch.horizon()) throw std::invalid_argument("block: scan out of range");
    if (i < 0 || i >= batch.offset(k))
        throw std::invalid_argument("block: Bernoulli does not exist before scan k");
}

HistoryKey with_scan_entry(const HistoryKey& history, int k, int g, const Association& theta) {
    HistoryKey out;
    out.reserve(history.size() + 1);
    bool placed = false;
    for (int h : history) {
        const int s = theta.scan_of(h);
        if (s == k) continue;
        if (s > k && !placed) {
            if (g >= 0) out.push_back(g);
            placed = true;
        }
        out.push_back(h);
    }
    if (!placed && g >= 0) out.push_back(g);
    return out;
}

}  // namespace

std::vector<double> ConditionalDist::probabilities() const { return normalize_log_weights(log_probs).weights; }

bool block_is_trivial(const ChainState& state, int i) {
    const auto& theta = state.theta();
    if (!theta.nonempty(i)) return true;
    return theta.detections(i) == 1 && state.summary(i).existence == 0.0;
}

ConditionalDist conditional(ChainState& state, int k, int i) {
    const auto& engine = state.engine();
    const auto& batch = engine.batch();
    check_block(batch, k, i);
    const auto& theta = state.theta();
    const int first = batch.offset(k);
    const int j_old = theta.detection_at(i, k);
    const int current_value = j_old < 0 ? 0 : j_old - first + 1;

    ConditionalDist d;
    if (block_is_trivial(state, i)) {
        d.support = {current_value};
        d.log_probs = {0.0};
        return d;
    }

    const HistoryKey history = theta.history(i);
    HistoryKey prefix;
    for (int h : history)
        if (theta.scan_of(h) < k) prefix.push_back(h);
    const auto predicted = engine.predicted_at(prefix, k, state.cache());
    const auto gated = engine.gated_measurements(predicted, k);

    std::vector<int> candidates{-1};
    for (int g : gated)
        if (g == j_old || (theta.nonempty(g) && theta.next(g) == -1)) candidates.push_back(g);
    if (j_old >= 0 && std::find(candidates.begin(), candidates.end(), j_old) == candidates.end())
        candidates.push_back(j_old);
    std::sort(candidates.begin(), candidates.end());

    for (int c : candidates) {
        const double lw = engine.summary(with_scan_entry(history, k, c, theta), state.cache()).log_weight;
        double s = lw;
        if (s != kNegInf) {
            if (j_old >= 0 && c != j_old) s += engine.single_detection_log_weight(j_old);
            if (c >= 0 && c != j_old) s -= engine.single_detection_log_weight(c);
        }
        if (s == kNegInf && c != j_old) continue;
        if (c == j_old) d.current = d.support.size();
        d.support.push_back(c < 0 ? 0 : c - first + 1);
        d.log_probs.push_back(s);
    }
    return d;
}

std::vector<HistoryChange> block_changes(const Association& theta, int k, int i, int value) {
    if (k < 1 || k > theta.horizon() || i < 0) throw std::invalid_argument("block: bad index");
    const int j_old = theta.detection_at(i, k);
    int c = -1;
    if (value > 0) {
        c = theta.offset(k) + value - 1;
        if (c >= theta.offset(k + 1)) throw std::invalid_argument("block: measurement index out of range");
        if (c != j_old && !(theta.nonempty(c) && theta.next(c) == -1))
            throw std::invalid_argument("block: measurement is held by another Bernoulli");
    }
    std::vector<HistoryChange> out;
    out.push_back({i, with_scan_entry(theta.history(i), k, c, theta)});
    if (j_old >= 0 && c != j_old) out.push_back({j_old, {j_old}});
    if (c >= 0 && c != j_old) out.push_back({c, {}});
    return out;
}

int sample_block(ChainState& state, int k, int i, Rng& rng, const ConditionalDist* precomputed) {
    ConditionalDist local;
    if (!precomputed) {
        local = conditional(state, k, i);
        precomputed = &local;
    }
    const auto& d = *precomputed;
    if (d.support.size() == 1) return d.support.front();
    const std::size_t pick = sample_log_categorical(d.log_probs, rng);
    const int value = d.support[pick];
    if (pick != d.current) {
        const auto changes = block_changes(state.theta(), k, i, value);
        state.apply(changes);
    }
    return value;
}

void gibbs_sweep(ChainState& state, Rng& rng, bool random_scan) {
    const auto& batch = state.engine().batch();
    const int K = batch.horizon();
    if (!random_scan) {
        for (int k = 1; k <= K; ++k)
            for (int i = 0; i < batch.offset(k); ++i)
                if (!block_is_trivial(state, i)) sample_block(state, k, i, rng);
        return;
    }
    std::vector<long long> cumulative(static_cast<std::size_t>(K) + 1, 0);
    for (int k = 1; k <= K; ++k)
        cumulative[static_cast<std::size_t>(k)] = cumulative[static_cast<std::size_t>(k - 1)] + batch.offset(k);
    const long long total = cumulative.back();
    if (total == 0) return;
    if (total > INT32_MAX) throw std::length_error("random scan: too many blocks");
    for (long long draw = 0; draw < total; ++draw) {
        const long long r = uniform_index(rng, static_cast<int>(total));
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        const int k = static_cast<int>(it - cumulative.begin());
        const int i = static_cast<int>(r - cumulative[static_cast<std::size_t>(k - 1)]);
        if (!block_is_trivial(state, i)) sample_block(state, k, i, rng);
    }
}

ChainRun run_gibbs(const TpmbmEngine& engine, Association theta0, const GibbsConfig& config, Rng& rng,
                   const ChainObserver& observer, std::uint64_t start_iteration) {
    ChainState state(engine, std::move(theta0));
    ChainRun run{SampleStore(config.keep_best), {}, 0.0, start_iteration, {}};
    run.store.record(state, start_iteration);
    if (observer && config.trace_every > 0) observer(start_iteration, state);
    for (std::uint64_t t = 1; t <= config.sweeps; ++t) {
        gibbs_sweep(state, rng, config.random_scan);
        const std::uint64_t it = start_iteration + t;
        run.store.record(state, it);
        if (observer && config.trace_every > 0 && it % config.trace_every == 0) observer(it, state);
    }
    run.iterations = start_iteration + config.sweeps;
    run.final_log_pi = state.refresh_log_pi();
    run.final_theta = state.theta();
    run.rng_state = rng_state(rng);
    return run;
}

}  // namespace btpmbm
