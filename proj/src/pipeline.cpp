#include "btpmbm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace btpmbm {

InitMode parse_init_mode(const std::string& name) {
    if (name == "theta-hat" || name == "singletons") return InitMode::singletons;
    if (name == "greedy") return InitMode::greedy;
    throw std::invalid_argument("unknown init mode '" + name + "' (theta-hat | greedy)");
}

const char* init_mode_name(InitMode mode) { return mode == InitMode::greedy ? "greedy" : "theta-hat"; }

Method parse_method(const std::string& name) {
    if (name == "gibbs") return Method::gibbs;
    if (name == "mh") return Method::mh;
    throw std::invalid_argument("unknown method '" + name + "' (gibbs | mh)");
}

const char* method_name(Method m) { return m == Method::gibbs ? "gibbs" : "mh"; }

Association greedy_association(const TpmbmEngine& engine) {
    const auto& batch = engine.batch();
    ChainState state(engine, Association::singletons(batch));
    struct Candidate {
        double gain;
        int bernoulli;
        int measurement;
    };
    for (int k = 2; k <= batch.horizon(); ++k) {
        if (batch.count(k) == 0) continue;
        const Association& theta = state.theta();
        std::vector<Candidate> cands;
        for (int r = 0; r < state.possible_count(); ++r) {
            const int b = state.possible_at(r);
            if (theta.last_scan(b) >= k) continue;
            const HistoryKey h = theta.history(b);
            const LocalHypothesis pred = engine.predicted_at(h, k, state.cache());
            for (int g : engine.gated_measurements(pred, k)) {
                HistoryKey extended = h;
                extended.push_back(g);
                const HistoryChange changes[2] = {{b, std::move(extended)}, {g, {}}};
                const double gain = state.preview(changes).delta;
                if (gain != kNegInf) cands.push_back({gain, b, g});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
            return std::tie(y.gain, x.bernoulli, x.measurement) < std::tie(x.gain, y.bernoulli, y.measurement);
        });
        // Each edit touches only its own two Bernoullis, so the gains stay exact.
        std::vector<HistoryChange> edit;
        std::vector<char> used_b(static_cast<std::size_t>(batch.total()), 0);
        std::vector<char> used_g(static_cast<std::size_t>(batch.total()), 0);
        for (const auto& c : cands) {
            if (used_b[static_cast<std::size_t>(c.bernoulli)] || used_g[static_cast<std::size_t>(c.measurement)])
                continue;
            used_b[static_cast<std::size_t>(c.bernoulli)] = 1;
            used_g[static_cast<std::size_t>(c.measurement)] = 1;
            HistoryKey h = theta.history(c.bernoulli);
            h.push_back(c.measurement);
            edit.push_back({c.bernoulli, std::move(h)});
            edit.push_back({c.measurement, {}});
        }
        if (!edit.empty()) state.apply(edit);
    }
    return state.theta();
}

Association initial_association(const TpmbmEngine& engine, InitMode mode) {
    return mode == InitMode::greedy ? greedy_association(engine) : Association::singletons(engine.batch());
}

void RunSpec::validate() const {
    if (method == Method::mh) moves.validate();
    gospa.validate();
}

namespace {

RunResult run_chain(const TpmbmEngine& engine, const std::vector<Trajectory>& truth, const RunSpec& spec,
                    Association theta0, Rng& rng, std::uint64_t start_iteration) {
    spec.validate();
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    Clock::duration excluded{};

    RunResult out;
    out.method = spec.method;
    const bool trace = spec.trace_every > 0 && !truth.empty();
    ChainObserver observer;
    if (trace) {
        observer = [&](std::uint64_t it, ChainState& state) {
            const auto s = Clock::now();
            const auto est = to_trajectories(extract(engine, state.theta()));
            const auto g = trajectory_gospa(truth, est, spec.gospa);
            out.trace.push_back({it, state.log_pi(), correct_association_count(truth, est, g, spec.gospa),
                                 static_cast<int>(est.size())});
            excluded += Clock::now() - s;
        };
    }

    ChainRun run;
    if (spec.method == Method::gibbs) {
        GibbsConfig cfg;
        cfg.sweeps = spec.iterations;
        cfg.trace_every = spec.trace_every;
        run = run_gibbs(engine, std::move(theta0), cfg, rng, observer, start_iteration);
    } else {
        MhConfig cfg;
        cfg.iterations = spec.iterations;
        cfg.moves = spec.moves;
        cfg.trace_every = spec.trace_every;
        MhRun mh = run_mh(engine, std::move(theta0), cfg, rng, observer, {}, start_iteration);
        out.moves = mh.stats;
        run = std::move(mh);
    }

    WeightCache cache(engine.config());
    MapHypothesis map = map_hypothesis(run.store, engine, cache);
    out.estimates = extract(engine, map.theta);
    out.runtime_s = std::chrono::duration<double>(Clock::now() - t0 - excluded).count();

    out.iterations = run.iterations;
    out.distinct = run.store.distinct();
    out.map_log_pi = map.log_pi;
    out.map = std::move(map.theta);
    out.checkpoint = {method_name(spec.method), run.iterations, run.final_theta.rows(), run.rng_state,
                      run.store.digest()};
    if (!truth.empty()) out.gospa = trajectory_gospa(truth, to_trajectories(out.estimates), spec.gospa);
    return out;
}

}  // namespace

RunResult run_batch(const TpmbmEngine& engine, const std::vector<Trajectory>& truth, const RunSpec& spec,
                    Rng& rng) {
    spec.validate();
    return run_chain(engine, truth, spec, initial_association(engine, spec.init), rng, 0);
}

RunResult resume_batch(const TpmbmEngine& engine, const std::vector<Trajectory>& truth, const RunSpec& spec,
                       const Checkpoint& checkpoint) {
    if (checkpoint.method != method_name(spec.method))
        throw std::invalid_argument("resume: checkpoint was written by method '" + checkpoint.method + "'");
    Rng rng = rng_from_state(checkpoint.rng_state);
    return run_chain(engine, truth, spec, Association::from_rows(engine.batch(), checkpoint.rows), rng,
                     checkpoint.iteration);
}

MonteCarloRun monte_carlo_run(const Scenario& scenario, const TpmbmConfig& config, const RunSpec& spec,
                              std::uint64_t root, std::uint64_t run) {
    MonteCarloRun out;
    Rng mrng = measurement_rng(root, run);
    const auto truth = generate_truth(scenario);
    out.batch = generate_measurements(truth, scenario.sensor(), scenario.horizon, mrng);
    out.truth = label_truth(truth, out.batch);
    const TpmbmEngine engine(out.batch.batch, scenario.models(), config);
    Rng crng = chain_rng(root, run);
    out.result = run_batch(engine, out.truth, spec, crng);
    return out;
}

void write_results_header(std::ostream& out) {
    out << "# schema_version=" << kResultsSchema << '\n'
        << "run_id,method,iterations,total,localization,missed,false,switch,runtime_s\n";
}

void write_results_row(std::ostream& out, const std::string& run_id, const RunResult& r) {
    out << run_id << ',' << method_name(r.method) << ',' << r.iterations;
    if (r.gospa) {
        const auto& g = *r.gospa;
        out << ',' << g.total << ',' << g.localization << ',' << g.missed << ',' << g.false_ << ',' << g.switch_;
    } else {
        out << ",,,,,";
    }
    out << ',' << r.runtime_s << '\n';
}

void write_trace_csv(std::ostream& out, const std::vector<std::pair<std::string, const RunResult*>>& runs) {
    out << "# schema_version=" << kResultsSchema << '\n' << "run_id,method,iteration,log_pi,correct,tracks\n";
    for (const auto& [id, r] : runs)
        for (const auto& p : r->trace)
            out << id << ',' << method_name(r->method) << ',' << p.iteration << ',' << p.log_pi << ','
                << p.correct << ',' << p.tracks << '\n';
}

void write_per_time_csv(std::ostream& out, const GospaResult& g) {
    out << "# schema_version=" << kResultsSchema << '\n' << "time,localization,missed,false,switch,total\n";
    for (std::size_t t = 0; t < g.per_time.size(); ++t) {
        const auto& p = g.per_time[t];
        out << g.first_time + static_cast<int>(t) << ',' << p.localization << ',' << p.missed << ',' << p.false_
            << ',' << p.switch_ << ',' << p.total() << '\n';
    }
}

}  // namespace btpmbm
