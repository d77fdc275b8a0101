#include "cli.hpp"

#include "btpmbm/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace btpmbm::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kOutDirEnv = "BTPMBM_OUT_DIR";

struct RunConfig {
    std::string name;
    std::string scenario = "benchmark";
    std::string batch;
    std::string truth;
    std::string method = "mh";
    std::optional<std::uint64_t> iterations;  // default: 2e5 for mh, 1e3 for gibbs
    std::string moves = "high";               // preset name or four comma-separated probabilities
    bool exact_track_update = true;
    std::string init = "greedy";
    std::uint64_t seed = 1;
    int monte_carlo_runs = 1;
    std::optional<std::uint64_t> trace_every;  // default: 200 for mh, 20 for gibbs
    double gate_prob = 0.999;
    double ppp_prune = 1e-4;
    double birth_pmf_threshold = 1e-2;
    double end_pmf_threshold = 1e-4;
    GospaConfig gospa;
    int workers = 1;
    std::string out;
    std::string resume;
};

template <typename T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

template <typename T>
void take(const json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void apply_json(RunConfig& c, const json& j) {
    static const char* known[] = {"schema_version", "name", "scenario", "batch", "truth", "method", "iterations",
                                  "moves", "exact_track_update", "init", "seed", "monte_carlo_runs",
                                  "trace_every", "gate_prob", "ppp_prune", "birth_pmf_threshold",
                                  "end_pmf_threshold", "gospa", "workers", "out", "resume"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok |= key == k;
        if (!ok) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
        if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1)
            throw ConfigError("unsupported config schema_version");
        take(j, "name", c.name);
        take(j, "scenario", c.scenario);
        take(j, "batch", c.batch);
        take(j, "truth", c.truth);
        take(j, "method", c.method);
        take(j, "iterations", c.iterations);
        if (j.contains("moves")) {
            const auto& m = j.at("moves");
            if (m.is_array()) {
                std::ostringstream s;
                for (std::size_t i = 0; i < m.size(); ++i) s << (i ? "," : "") << std::setprecision(17) << m.at(i).get<double>();
                c.moves = s.str();
            } else {
                c.moves = m.get<std::string>();
            }
        }
        take(j, "exact_track_update", c.exact_track_update);
        take(j, "init", c.init);
        take(j, "seed", c.seed);
        take(j, "monte_carlo_runs", c.monte_carlo_runs);
        take(j, "trace_every", c.trace_every);
        take(j, "gate_prob", c.gate_prob);
        take(j, "ppp_prune", c.ppp_prune);
        take(j, "birth_pmf_threshold", c.birth_pmf_threshold);
        take(j, "end_pmf_threshold", c.end_pmf_threshold);
        if (j.contains("gospa")) {
            const auto& g = j.at("gospa");
            take(g, "p", c.gospa.p);
            take(g, "c", c.gospa.c);
            take(g, "gamma", c.gospa.gamma);
        }
        take(j, "workers", c.workers);
        take(j, "out", c.out);
        take(j, "resume", c.resume);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

json load_json(const std::string& path, bool config) {
    std::ifstream in(path);
    if (!in) {
        if (config) throw ConfigError("cannot open config '" + path + "'");
        throw DataError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        if (config) throw ConfigError("config '" + path + "': " + e.what());
        throw DataError("'" + path + "': " + e.what());
    }
}

MoveConfig parse_moves(const std::string& text, bool exact) {
    MoveConfig m;
    if (text.find(',') == std::string::npos) {
        m = MoveConfig::preset(text);
    } else {
        std::istringstream in(text);
        std::string item;
        std::size_t i = 0;
        while (std::getline(in, item, ',')) {
            if (i >= 4) throw std::invalid_argument("moves: expected four probabilities");
            std::size_t used = 0;
            m.probabilities[i++] = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument("moves: bad number '" + item + "'");
        }
        if (i != 4) throw std::invalid_argument("moves: expected four probabilities");
    }
    m.exact_track_update = exact;
    return m;
}

struct Resolved {
    RunSpec spec;
    TpmbmConfig tpmbm;
};

Resolved resolve(const RunConfig& c) {
    Resolved r;
    try {
        r.spec.method = parse_method(c.method);
        const bool gibbs = r.spec.method == Method::gibbs;
        r.spec.iterations = c.iterations.value_or(gibbs ? 1000 : 200000);
        r.spec.trace_every = c.trace_every.value_or(gibbs ? 20 : 200);
        r.spec.moves = parse_moves(c.moves, c.exact_track_update);
        r.spec.init = parse_init_mode(c.init);
        r.spec.gospa = c.gospa;
        r.spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    auto unit = [](double v, const char* what) {
        if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(what) + " must lie in (0, 1)");
    };
    unit(c.ppp_prune, "ppp_prune");
    unit(c.birth_pmf_threshold, "birth_pmf_threshold");
    unit(c.end_pmf_threshold, "end_pmf_threshold");
    if (!(c.gate_prob > 0.0 && c.gate_prob <= 1.0)) throw ConfigError("gate_prob must lie in (0, 1]");
    if (c.monte_carlo_runs < 1) throw ConfigError("monte_carlo_runs must be at least 1");
    if (c.workers < 1) throw ConfigError("workers must be at least 1");
    if (!c.resume.empty() && c.monte_carlo_runs != 1) throw ConfigError("resume needs monte_carlo_runs = 1");
    if (!c.truth.empty() && c.batch.empty()) throw ConfigError("truth given without a batch");
    r.tpmbm.gate_prob = c.gate_prob;
    r.tpmbm.ppp_prune = c.ppp_prune;
    r.tpmbm.birth_pmf_threshold = c.birth_pmf_threshold;
    r.tpmbm.end_pmf_threshold = c.end_pmf_threshold;
    return r;
}

Scenario load_scenario(const std::string& spec) {
    if (spec == "benchmark") return benchmark_scenario();
    std::ifstream in(spec);
    if (!in) throw DataError("cannot open scenario '" + spec + "'");
    try {
        return read_scenario_json(in);
    } catch (const std::invalid_argument& e) {
        throw DataError("scenario '" + spec + "': " + e.what());
    }
}

template <typename Reader>
auto read_file(const std::string& path, const char* what, Reader reader) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string("cannot open ") + what + " '" + path + "'");
    try {
        return reader(in);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string(what) + " '" + path + "': " + e.what());
    }
}

fs::path output_dir(const std::string& flag) {
    fs::path dir = flag;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirEnv);
        dir = env && *env ? env : "btpmbm_out";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << std::setprecision(10);
    body(out);
    out.flush();
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

/// Runs job(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
void parallel_for(int n, int workers, const std::function<void(int)>& job) {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const int count = std::max(1, std::min(workers, n));
    std::vector<std::thread> pool;
    for (int w = 1; w < count; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct RunOutput {
    std::string id;
    RunResult result;
};

/// Executes every run of a config; rows are in run order whatever the worker count.
std::vector<RunOutput> execute(const RunConfig& c, const Resolved& r) {
    const int runs = c.monte_carlo_runs;
    std::vector<RunOutput> out(static_cast<std::size_t>(runs));
    if (c.batch.empty()) {
        const Scenario scenario = load_scenario(c.scenario);
        if (!c.resume.empty()) {
            Rng mrng = measurement_rng(c.seed, 0);
            const auto truth = generate_truth(scenario);
            const auto batch = generate_measurements(truth, scenario.sensor(), scenario.horizon, mrng);
            const TpmbmEngine engine(batch.batch, scenario.models(), r.tpmbm);
            const auto cp = read_file(c.resume, "checkpoint",
                                      [&](std::istream& in) { return read_checkpoint(in, batch.batch.horizon()); });
            try {
                out[0] = {"0", resume_batch(engine, label_truth(truth, batch), r.spec, cp)};
            } catch (const std::invalid_argument& e) {
                throw DataError(e.what());
            }
            return out;
        }
        parallel_for(runs, c.workers, [&](int i) {
            auto mc = monte_carlo_run(scenario, r.tpmbm, r.spec, c.seed, static_cast<std::uint64_t>(i));
            out[static_cast<std::size_t>(i)] = {std::to_string(i), std::move(mc.result)};
        });
        return out;
    }

    const auto batch = read_file(c.batch, "batch", [](std::istream& in) { return read_batch_json(in); });
    std::vector<Trajectory> truth;
    if (!c.truth.empty())
        truth = read_file(c.truth, "truth", [](std::istream& in) { return read_trajectories_json(in); });
    const Scenario scenario = load_scenario(c.scenario);
    const TpmbmEngine engine(batch.batch, scenario.models(), r.tpmbm);
    if (!c.resume.empty()) {
        const auto cp = read_file(c.resume, "checkpoint",
                                  [&](std::istream& in) { return read_checkpoint(in, batch.batch.horizon()); });
        try {
            out[0] = {"0", resume_batch(engine, truth, r.spec, cp)};
        } catch (const std::invalid_argument& e) {
            throw DataError(e.what());
        }
        return out;
    }
    parallel_for(runs, c.workers, [&](int i) {
        Rng rng = chain_rng(c.seed, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] = {std::to_string(i), run_batch(engine, truth, r.spec, rng)};
    });
    return out;
}

void write_run_files(const fs::path& dir, const RunOutput& run) {
    const fs::path d = dir / ("run_" + run.id);
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw DataError("cannot create '" + d.string() + "'");
    const RunResult& r = run.result;
    write_file(d / "estimates.json", [&](std::ostream& o) { write_estimates_json(o, r.estimates); });
    write_file(d / "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, r.estimates); });
    write_file(d / "checkpoint.txt", [&](std::ostream& o) { write_checkpoint(o, r.checkpoint); });
    write_file(d / "map_theta.txt", [&](std::ostream& o) {
        o << "# schema_version=1\n# map log_pi=" << std::setprecision(17) << r.map_log_pi << '\n';
        write_rows(o, r.map.rows());
    });
    if (r.gospa) write_file(d / "per_time.csv", [&](std::ostream& o) { write_per_time_csv(o, *r.gospa); });
    if (r.method == Method::mh)
        write_file(d / "moves.csv", [&](std::ostream& o) {
            o << "# schema_version=1\nmove,proposed,feasible,accepted\n";
            for (MoveType m : {MoveType::update, MoveType::merge, MoveType::split, MoveType::swap}) {
                const auto i = static_cast<std::size_t>(m) - 1;
                o << move_name(m) << ',' << r.moves.proposed[i] << ',' << r.moves.feasible[i] << ','
                  << r.moves.accepted[i] << '\n';
            }
        });
}

struct Summary {
    double total = 0, localization = 0, missed = 0, false_ = 0, switch_ = 0, runtime = 0;
    bool evaluated = false;
};

Summary summarize(const std::vector<RunOutput>& runs) {
    Summary s;
    s.evaluated = !runs.empty() && runs.front().result.gospa.has_value();
    for (const auto& r : runs) {
        s.runtime += r.result.runtime_s;
        if (!r.result.gospa) continue;
        s.total += r.result.gospa->total;
        s.localization += r.result.gospa->localization;
        s.missed += r.result.gospa->missed;
        s.false_ += r.result.gospa->false_;
        s.switch_ += r.result.gospa->switch_;
    }
    const double n = static_cast<double>(std::max<std::size_t>(runs.size(), 1));
    for (double* v : {&s.total, &s.localization, &s.missed, &s.false_, &s.switch_, &s.runtime}) *v /= n;
    return s;
}

void write_config(const fs::path& path, const RunConfig& c, const Resolved& r) {
    write_file(path, [&](std::ostream& o) {
        json j;
        j["schema_version"] = 1;
        if (!c.name.empty()) j["name"] = c.name;
        j["scenario"] = c.scenario;
        if (!c.batch.empty()) j["batch"] = c.batch;
        if (!c.truth.empty()) j["truth"] = c.truth;
        j["method"] = c.method;
        j["iterations"] = r.spec.iterations;
        j["moves"] = r.spec.moves.probabilities;
        j["exact_track_update"] = c.exact_track_update;
        j["init"] = init_mode_name(r.spec.init);
        j["seed"] = c.seed;
        j["monte_carlo_runs"] = c.monte_carlo_runs;
        j["trace_every"] = r.spec.trace_every;
        j["gate_prob"] = c.gate_prob;
        j["ppp_prune"] = c.ppp_prune;
        j["birth_pmf_threshold"] = c.birth_pmf_threshold;
        j["end_pmf_threshold"] = c.end_pmf_threshold;
        j["gospa"] = {{"p", c.gospa.p}, {"c", c.gospa.c}, {"gamma", c.gospa.gamma}};
        if (!c.resume.empty()) j["resume"] = c.resume;
        o << j.dump(2) << '\n';
    });
}

/// Options shared by `run` and `sweep`. Flags override values from --config.
class RunFlags {
public:
    void add(CLI::App* app, bool with_resume) {
        app->add_option("--config", config_, "JSON run configuration");
        if (with_resume) bind(app, "--resume", &RunConfig::resume, "continue from a checkpoint.txt");
        bind(app, "--scenario", &RunConfig::scenario, "'benchmark' or a scenario JSON file");
        bind(app, "--batch", &RunConfig::batch, "measurement batch JSON (default: simulate from the scenario)");
        bind(app, "--truth", &RunConfig::truth, "truth JSON for evaluating a given batch");
        bind(app, "--method", &RunConfig::method, "gibbs | mh");
        bind(app, "--iterations,-T", &RunConfig::iterations, "MH iterations or Gibbs sweeps");
        bind(app, "--moves", &RunConfig::moves, "high | medium | low | p1,p2,p3,p4");
        bind(app, "--init", &RunConfig::init, "theta-hat | greedy");
        bind(app, "--seed", &RunConfig::seed, "root seed");
        bind(app, "--runs,--monte-carlo-runs", &RunConfig::monte_carlo_runs, "Monte Carlo runs");
        bind(app, "--trace-every", &RunConfig::trace_every, "trace period, 0 disables");
        bind(app, "--gate-prob", &RunConfig::gate_prob, "gate probability");
        bind(app, "--ppp-prune", &RunConfig::ppp_prune, "Poisson component weight threshold");
        bind(app, "--birth-pmf-threshold", &RunConfig::birth_pmf_threshold, "birth-time pmf pruning threshold");
        bind(app, "--end-pmf-threshold", &RunConfig::end_pmf_threshold, "end-time pmf pruning threshold");
        bind(app, "--workers,-j", &RunConfig::workers, "concurrent Monte Carlo runs");
        bind(app, "--out,-o", &RunConfig::out, "output directory (default $BTPMBM_OUT_DIR or ./btpmbm_out)");
        auto* approx = app->add_flag("--approximate-track-update", "skip the track-update selection correction");
        setters_.push_back([approx](RunConfig& c) {
            if (approx->count()) c.exact_track_update = false;
        });
        auto* p = app->add_option("--gospa-p", gospa_p_, "GOSPA p");
        auto* cc = app->add_option("--gospa-c", gospa_c_, "GOSPA c");
        auto* g = app->add_option("--gospa-gamma", gospa_gamma_, "GOSPA switching penalty");
        setters_.push_back([=, this](RunConfig& c) {
            if (p->count()) c.gospa.p = gospa_p_;
            if (cc->count()) c.gospa.c = gospa_c_;
            if (g->count()) c.gospa.gamma = gospa_gamma_;
        });
    }

    [[nodiscard]] const std::string& config_path() const { return config_; }

    void apply(RunConfig& c) const {
        for (const auto& s : setters_) s(c);
    }

private:
    template <typename T>
    void bind(CLI::App* app, const std::string& names, T RunConfig::*field, const std::string& help) {
        auto holder = std::make_shared<T>();
        auto* opt = app->add_option(names, *holder, help);
        holders_.push_back(holder);
        setters_.push_back([opt, holder, field](RunConfig& c) {
            if (opt->count()) c.*field = *holder;
        });
    }
    template <typename T>
    void bind(CLI::App* app, const std::string& names, std::optional<T> RunConfig::*field, const std::string& help) {
        auto holder = std::make_shared<T>();
        auto* opt = app->add_option(names, *holder, help);
        holders_.push_back(holder);
        setters_.push_back([opt, holder, field](RunConfig& c) {
            if (opt->count()) c.*field = *holder;
        });
    }

    std::string config_;
    double gospa_p_ = 1.0, gospa_c_ = 10.0, gospa_gamma_ = 2.0;
    std::vector<std::shared_ptr<void>> holders_;
    std::vector<std::function<void(RunConfig&)>> setters_;
};

int cmd_run(const RunFlags& flags, std::ostream& out) {
    RunConfig c;
    if (!flags.config_path().empty()) apply_json(c, load_json(flags.config_path(), true));
    flags.apply(c);
    const Resolved r = resolve(c);
    const fs::path dir = output_dir(c.out);
    const auto runs = execute(c, r);

    write_config(dir / "config.json", c, r);
    write_file(dir / "results.csv", [&](std::ostream& o) {
        write_results_header(o);
        for (const auto& run : runs) write_results_row(o, run.id, run.result);
    });
    std::vector<std::pair<std::string, const RunResult*>> traced;
    for (const auto& run : runs)
        if (!run.result.trace.empty()) traced.emplace_back(run.id, &run.result);
    if (!traced.empty()) write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, traced); });
    for (const auto& run : runs) write_run_files(dir, run);

    out << std::setprecision(6);
    write_results_header(out);
    for (const auto& run : runs) write_results_row(out, run.id, run.result);
    if (runs.size() > 1) {
        const Summary s = summarize(runs);
        out << "mean," << c.method << ',' << r.spec.iterations;
        if (s.evaluated)
            out << ',' << s.total << ',' << s.localization << ',' << s.missed << ',' << s.false_ << ',' << s.switch_;
        else
            out << ",,,,,";
        out << ',' << s.runtime << '\n';
    }
    return kExitOk;
}

int cmd_simulate(const std::string& scenario_spec, std::uint64_t seed, int runs, const std::string& out_flag,
                 std::ostream& out) {
    if (runs < 1) throw ConfigError("runs must be at least 1");
    const Scenario scenario = load_scenario(scenario_spec);
    const fs::path dir = output_dir(out_flag);
    const auto truth = generate_truth(scenario);
    write_file(dir / "scenario.json", [&](std::ostream& o) { write_scenario_json(o, scenario); });
    for (int i = 0; i < runs; ++i) {
        Rng rng = measurement_rng(seed, static_cast<std::uint64_t>(i));
        const auto batch = generate_measurements(truth, scenario.sensor(), scenario.horizon, rng);
        const std::string suffix = "_" + std::to_string(i) + ".json";
        write_file(dir / ("batch" + suffix), [&](std::ostream& o) { write_batch_json(o, batch); });
        write_file(dir / ("truth" + suffix),
                   [&](std::ostream& o) { write_trajectories_json(o, label_truth(truth, batch), "truth"); });
        out << (dir / ("batch" + suffix)).string() << ": " << batch.batch.total() << " measurements over "
            << batch.batch.horizon() << " scans\n";
    }
    return kExitOk;
}

int cmd_evaluate(const std::string& truth_path, const std::string& est_path, const GospaConfig& cfg,
                 const std::string& out_flag, std::ostream& out) {
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto truth = read_file(truth_path, "truth", [](std::istream& in) { return read_trajectories_json(in); });
    const auto est = read_file(est_path, "estimates", [](std::istream& in) { return read_trajectories_json(in); });
    const GospaResult g = trajectory_gospa(truth, est, cfg);
    auto row = [&](std::ostream& o) {
        o << "# schema_version=1\ntotal,localization,missed,false,switch,lp_integral\n"
          << g.total << ',' << g.localization << ',' << g.missed << ',' << g.false_ << ',' << g.switch_ << ','
          << (g.integral ? 1 : 0) << '\n';
    };
    out << std::setprecision(10);
    row(out);
    if (!out_flag.empty() || std::getenv(kOutDirEnv)) {
        const fs::path dir = output_dir(out_flag);
        write_file(dir / "evaluation.csv", row);
        write_file(dir / "per_time.csv", [&](std::ostream& o) { write_per_time_csv(o, g); });
    }
    return kExitOk;
}

/// A sweep file is {"base": {...}, "configs": [{...}, ...]}; each entry overrides the base.
/// Without one, --presets lists MH move presets applied to the flag configuration.
int cmd_sweep(const RunFlags& flags, const std::string& sweep_path, const std::string& presets, std::ostream& out) {
    RunConfig base;
    if (!flags.config_path().empty()) apply_json(base, load_json(flags.config_path(), true));
    std::vector<RunConfig> configs;
    if (!sweep_path.empty()) {
        const json doc = load_json(sweep_path, true);
        if (!doc.is_object() || !doc.contains("configs") || !doc.at("configs").is_array())
            throw ConfigError("sweep file needs a 'configs' array");
        if (doc.contains("base")) apply_json(base, doc.at("base"));
        flags.apply(base);
        for (const auto& entry : doc.at("configs")) {
            RunConfig c = base;
            apply_json(c, entry);
            configs.push_back(std::move(c));
        }
    } else {
        flags.apply(base);
        std::istringstream in(presets);
        std::string name;
        while (std::getline(in, name, ',')) {
            RunConfig c = base;
            c.moves = name;
            c.name = name;
            configs.push_back(std::move(c));
        }
    }
    if (configs.empty()) throw ConfigError("sweep has no configurations");
    std::vector<Resolved> resolved;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (configs[i].name.empty()) configs[i].name = "config" + std::to_string(i);
        if (!configs[i].resume.empty()) throw ConfigError("sweep does not resume checkpoints");
        resolved.push_back(resolve(configs[i]));
    }
    const fs::path dir = output_dir(base.out);

    std::ostringstream table;
    table << std::setprecision(6) << "# schema_version=1\n"
          << "name,method,iterations,runs,p_update,p_merge,p_split,p_switch,total,localization,missed,false,switch,"
             "runtime_s\n";
    std::ostringstream rows;
    write_results_header(rows);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto runs = execute(configs[i], resolved[i]);
        const Summary s = summarize(runs);
        const auto& spec = resolved[i].spec;
        table << configs[i].name << ',' << method_name(spec.method) << ',' << spec.iterations << ','
              << runs.size();
        for (double p : spec.moves.probabilities) table << ',' << p;
        if (s.evaluated)
            table << ',' << s.total << ',' << s.localization << ',' << s.missed << ',' << s.false_ << ','
                  << s.switch_;
        else
            table << ",,,,,";
        table << ',' << s.runtime << '\n';
        rows << std::setprecision(10);
        for (const auto& run : runs) write_results_row(rows, configs[i].name + "/" + run.id, run.result);
    }
    write_file(dir / "sweep.csv", [&](std::ostream& o) { o << table.str(); });
    write_file(dir / "sweep_runs.csv", [&](std::ostream& o) { o << rows.str(); });
    out << table.str();
    return kExitOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Batch TPMBM trajectory estimation with MCMC data association", "btpmbm"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "generate a scenario, its truth and measurement batches");
    std::string sim_scenario = "benchmark", sim_out;
    std::uint64_t sim_seed = 1;
    int sim_runs = 1;
    sim->add_option("--scenario", sim_scenario, "'benchmark' or a scenario JSON file");
    sim->add_option("--seed", sim_seed, "root seed (batch r uses the run-r measurement stream)");
    sim->add_option("--runs", sim_runs, "number of batches");
    sim->add_option("--out,-o", sim_out, "output directory");

    auto* run = app.add_subcommand("run", "sample data associations and estimate trajectories");
    RunFlags run_flags;
    run_flags.add(run, true);

    auto* eval = app.add_subcommand("evaluate", "trajectory GOSPA between truth and estimates");
    std::string eval_truth, eval_est, eval_out;
    GospaConfig eval_cfg;
    eval->add_option("--truth", eval_truth, "truth JSON")->required();
    eval->add_option("--estimates", eval_est, "estimates JSON")->required();
    eval->add_option("--gospa-p", eval_cfg.p, "GOSPA p");
    eval->add_option("--gospa-c", eval_cfg.c, "GOSPA c");
    eval->add_option("--gospa-gamma", eval_cfg.gamma, "GOSPA switching penalty");
    eval->add_option("--out,-o", eval_out, "output directory for evaluation.csv and per_time.csv");

    auto* sweep = app.add_subcommand("sweep", "run several configurations and tabulate them");
    RunFlags sweep_flags;
    sweep_flags.add(sweep, false);
    std::string sweep_file, sweep_presets = "high,medium,low";
    sweep->add_option("--sweep", sweep_file, "sweep JSON {\"base\": {...}, \"configs\": [...]}");
    sweep->add_option("--presets", sweep_presets, "comma-separated move presets when no sweep file is given");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*sim) return cmd_simulate(sim_scenario, sim_seed, sim_runs, sim_out, out);
        if (*run) return cmd_run(run_flags, out);
        if (*eval) return cmd_evaluate(eval_truth, eval_est, eval_cfg, eval_out, out);
        if (*sweep) return cmd_sweep(sweep_flags, sweep_file, sweep_presets, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace btpmbm::cli
