#include "btpmbm/mh.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace btpmbm {

namespace {

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// ln q2: the merge of a and b picked from either side.
double merge_log_q(const ChainState& s, int a, int b) {
    const double n = s.possible_count();
    double q = 0.0;
    if (s.is_possible(a) && s.disjoint_count(a) > 0) q += 1.0 / (n * s.disjoint_count(a));
    if (s.is_possible(b) && s.disjoint_count(b) > 0) q += 1.0 / (n * s.disjoint_count(b));
    return safe_log(q);
}

// ln q3: split of i at one given detection.
double split_log_q(const ChainState& s, int i) {
    if (!s.is_certain(i)) return kNegInf;
    const int tail_choices = s.theta().detections(i) - 1;
    if (tail_choices <= 0) return kNegInf;
    return -std::log(static_cast<double>(s.certain_count())) - std::log(static_cast<double>(tail_choices));
}

// Splits a history into scans before t and scans from t on.
std::pair<HistoryKey, HistoryKey> cut(const Association& theta, const HistoryKey& h, int t) {
    std::pair<HistoryKey, HistoryKey> out;
    for (int g : h) (theta.scan_of(g) < t ? out.first : out.second).push_back(g);
    return out;
}

MoveOutcome infeasible(MoveType type) {
    MoveOutcome o;
    o.type = type;
    return o;
}

void finish_ratio(MoveOutcome& o) {
    if (o.log_pi_ratio == kNegInf || o.log_q_reverse == kNegInf) {
        o.log_accept = kNegInf;
        return;
    }
    o.log_accept = std::min(0.0, o.log_pi_ratio + o.log_q_reverse - o.log_q_forward);
}

MoveOutcome propose_update(ChainState& s, Rng& rng, const MoveConfig& config) {
    const int n = s.certain_count();
    if (n == 0) return infeasible(MoveType::update);
    const int i = s.certain_at(uniform_index(rng, n));
    const int t_first = s.theta().first_scan(i);
    const int t_end = s.summary(i).max_end;
    const int range = t_end - t_first;
    if (range <= 0) return infeasible(MoveType::update);
    const int t = t_first + 1 + uniform_index(rng, range);

    MoveOutcome o;
    o.type = MoveType::update;
    o.feasible = true;
    const auto dist = conditional(s, t, i);
    const std::size_t pick = sample_log_categorical(dist.log_probs, rng);
    const double lp = safe_log(config.p(MoveType::update));
    o.log_q_forward = lp;
    o.log_q_reverse = lp;
    if (pick == dist.current) {
        o.log_pi_ratio = 0.0;
        o.log_accept = 0.0;
        return o;
    }
    o.changes = block_changes(s.theta(), t, i, dist.support[pick]);
    o.log_pi_ratio = dist.log_probs[pick] - dist.log_probs[dist.current];
    // The block conditional cancels π; what is left is the (i, t) selection.
    o.log_q_forward += -std::log(static_cast<double>(n)) - std::log(static_cast<double>(range)) +
                       dist.log_probs[pick];
    if (!config.exact_track_update) {
        o.log_q_reverse = o.log_q_forward - o.log_pi_ratio;
        o.log_accept = 0.0;
        return o;
    }
    const auto token = s.apply(o.changes);
    const bool back = s.is_certain(i);
    const int n2 = s.certain_count();
    const int range2 = s.summary(i).max_end - s.theta().first_scan(i);
    s.undo(token);
    if (!back || t > t_first + range2) {
        o.log_q_reverse = kNegInf;
    } else {
        o.log_q_reverse = lp - std::log(static_cast<double>(n2)) - std::log(static_cast<double>(range2)) +
                          dist.log_probs[dist.current];
    }
    finish_ratio(o);
    return o;
}

MoveOutcome propose_merge(ChainState& s, Rng& rng, const MoveConfig& config) {
    const int n = s.possible_count();
    if (n == 0) return infeasible(MoveType::merge);
    const int i = s.possible_at(uniform_index(rng, n));
    const int m = s.disjoint_count(i);
    if (m == 0) return infeasible(MoveType::merge);
    const int j = s.disjoint_member(i, uniform_index(rng, m));
    const auto& theta = s.theta();
    const bool i_first = theta.last_scan(i) < theta.first_scan(j);
    const int a = i_first ? i : j;
    const int b = i_first ? j : i;

    MoveOutcome o;
    o.type = MoveType::merge;
    o.feasible = true;
    HistoryKey merged = theta.history(a);
    const HistoryKey tail = theta.history(b);
    merged.insert(merged.end(), tail.begin(), tail.end());
    o.changes = {{a, std::move(merged)}, {b, {}}};
    o.log_q_forward = safe_log(config.p(MoveType::merge)) + merge_log_q(s, a, b);
    const auto pv = s.preview(o.changes);
    o.log_pi_ratio = pv.delta;
    if (pv.delta == kNegInf) {
        o.log_q_reverse = kNegInf;
    } else {
        const auto token = s.commit(o.changes, pv);
        o.log_q_reverse = safe_log(config.p(MoveType::split)) + split_log_q(s, a);
        s.undo(token);
    }
    finish_ratio(o);
    return o;
}

MoveOutcome propose_split(ChainState& s, Rng& rng, const MoveConfig& config) {
    const int n = s.certain_count();
    if (n == 0) return infeasible(MoveType::split);
    const int i = s.certain_at(uniform_index(rng, n));
    const auto& theta = s.theta();
    const HistoryKey h = theta.history(i);
    if (h.size() < 2) return infeasible(MoveType::split);
    const int g = h[1 + static_cast<std::size_t>(uniform_index(rng, static_cast<int>(h.size()) - 1))];

    MoveOutcome o;
    o.type = MoveType::split;
    o.feasible = true;
    auto [head, tail] = cut(theta, h, theta.scan_of(g));
    o.changes = {{i, std::move(head)}, {g, std::move(tail)}};
    o.log_q_forward = safe_log(config.p(MoveType::split)) + split_log_q(s, i);
    const auto pv = s.preview(o.changes);
    o.log_pi_ratio = pv.delta;
    if (pv.delta == kNegInf) {
        o.log_q_reverse = kNegInf;
    } else {
        const auto token = s.commit(o.changes, pv);
        o.log_q_reverse = safe_log(config.p(MoveType::merge)) + merge_log_q(s, i, g);
        s.undo(token);
    }
    finish_ratio(o);
    return o;
}

MoveOutcome propose_switch(ChainState& s, Rng& rng, const MoveConfig& config) {
    const int n = s.certain_count();
    if (n < 2) return infeasible(MoveType::swap);
    const int ra = uniform_index(rng, n);
    int rb = uniform_index(rng, n - 1);
    if (rb >= ra) ++rb;
    const int i = s.certain_at(ra);
    const int j = s.certain_at(rb);
    const auto& theta = s.theta();
    const int lo = std::max(theta.first_scan(i), theta.first_scan(j)) + 1;
    const int hi = std::max(theta.last_scan(i), theta.last_scan(j));
    if (lo > hi) return infeasible(MoveType::swap);
    const int t = lo + uniform_index(rng, hi - lo + 1);

    MoveOutcome o;
    o.type = MoveType::swap;
    o.feasible = true;
    auto [head_i, tail_i] = cut(theta, theta.history(i), t);
    auto [head_j, tail_j] = cut(theta, theta.history(j), t);
    head_i.insert(head_i.end(), tail_j.begin(), tail_j.end());
    head_j.insert(head_j.end(), tail_i.begin(), tail_i.end());
    const bool reversible = head_i.size() >= 2 && head_j.size() >= 2;
    // Every t in (s_prev, s_next] cuts the two chains the same way.
    int s_prev = lo - 1;
    int s_next = hi;
    for (const auto* h : {&head_i, &head_j}) {
        for (int g : *h) {
            const int sg = theta.scan_of(g);
            if (sg < t) s_prev = std::max(s_prev, sg);
            else s_next = std::min(s_next, sg);
        }
    }
    o.changes = {{i, std::move(head_i)}, {j, std::move(head_j)}};
    // Both orderings of the pair propose the same swap. The cut multiplicity
    // and the t range are unchanged by the swap.
    o.log_q_forward = safe_log(config.p(MoveType::swap)) + std::log(2.0 * (s_next - s_prev)) -
                      std::log(static_cast<double>(n)) - std::log(static_cast<double>(n - 1)) -
                      std::log(static_cast<double>(hi - lo + 1));
    o.log_pi_ratio = s.preview(o.changes).delta;
    o.log_q_reverse = reversible ? o.log_q_forward : kNegInf;
    finish_ratio(o);
    return o;
}

MoveOutcome decide(ChainState& s, MoveOutcome o, Rng& rng) {
    if (!o.feasible) return o;
    if (o.changes.empty()) {
        o.accepted = true;
        return o;
    }
    if (o.log_accept == 0.0) {
        o.accepted = true;
    } else if (o.log_accept != kNegInf) {
        o.accepted = std::log(uniform01(rng)) < o.log_accept;
    }
    if (o.accepted) s.apply(o.changes);
    return o;
}

}  // namespace

const char* move_name(MoveType m) {
    switch (m) {
        case MoveType::update: return "track_update";
        case MoveType::merge: return "merge";
        case MoveType::split: return "split";
        case MoveType::swap: return "switch";
    }
    return "unknown";
}

MoveConfig MoveConfig::high_switch() { return {}; }

MoveConfig MoveConfig::medium_switch() {
    MoveConfig c;
    c.probabilities = {1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3};
    return c;
}

MoveConfig MoveConfig::low_switch() {
    MoveConfig c;
    c.probabilities = {0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    return c;
}

MoveConfig MoveConfig::preset(const std::string& name) {
    if (name == "high") return high_switch();
    if (name == "medium") return medium_switch();
    if (name == "low") return low_switch();
    throw std::invalid_argument("unknown move preset '" + name + "' (expected high, medium or low)");
}

void MoveConfig::validate() const {
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("move probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("move probabilities must sum to 1");
}

MoveOutcome propose(ChainState& state, MoveType type, Rng& rng, const MoveConfig& config) {
    switch (type) {
        case MoveType::update: return propose_update(state, rng, config);
        case MoveType::merge: return propose_merge(state, rng, config);
        case MoveType::split: return propose_split(state, rng, config);
        case MoveType::swap: return propose_switch(state, rng, config);
    }
    throw std::invalid_argument("unknown move type");
}

MoveOutcome track_update_move(ChainState& state, Rng& rng, const MoveConfig& config) {
    return decide(state, propose_update(state, rng, config), rng);
}
MoveOutcome merge_move(ChainState& state, Rng& rng, const MoveConfig& config) {
    return decide(state, propose_merge(state, rng, config), rng);
}
MoveOutcome split_move(ChainState& state, Rng& rng, const MoveConfig& config) {
    return decide(state, propose_split(state, rng, config), rng);
}
MoveOutcome switch_move(ChainState& state, Rng& rng, const MoveConfig& config) {
    return decide(state, propose_switch(state, rng, config), rng);
}

MoveOutcome mh_step(ChainState& state, Rng& rng, const MoveConfig& config) {
    double u = uniform01(rng);
    int c = 4;
    for (int m = 1; m <= 4; ++m) {
        u -= config.probabilities[static_cast<std::size_t>(m - 1)];
        if (u < 0.0) {
            c = m;
            break;
        }
    }
    while (config.probabilities[static_cast<std::size_t>(c - 1)] == 0.0) --c;
    return decide(state, propose(state, static_cast<MoveType>(c), rng, config), rng);
}

MhRun run_mh(const TpmbmEngine& engine, Association theta0, const MhConfig& config, Rng& rng,
             const ChainObserver& observer, const MoveObserver& on_move, std::uint64_t start_iteration) {
    config.moves.validate();
    ChainState state(engine, std::move(theta0));
    MhRun run;
    run.store = SampleStore(config.keep_best);
    run.store.record(state, start_iteration);
    if (observer && config.trace_every > 0) observer(start_iteration, state);
    for (std::uint64_t t = 1; t <= config.iterations; ++t) {
        const auto o = mh_step(state, rng, config.moves);
        const auto m = static_cast<std::size_t>(o.type) - 1;
        ++run.stats.proposed[m];
        if (o.feasible) ++run.stats.feasible[m];
        if (o.accepted) ++run.stats.accepted[m];
        const std::uint64_t it = start_iteration + t;
        run.store.record(state, it);
        if (on_move) on_move(it, o, state);
        if (observer && config.trace_every > 0 && it % config.trace_every == 0) observer(it, state);
    }
    run.iterations = start_iteration + config.iterations;
    run.final_log_pi = state.refresh_log_pi();
    run.final_theta = state.theta();
    run.rng_state = rng_state(rng);
    return run;
}

}  // namespace btpmbm
