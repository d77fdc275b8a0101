#pragma once

#include "btpmbm/estimator.hpp"
#include "btpmbm/gibbs.hpp"
#include "btpmbm/metrics.hpp"
#include "btpmbm/mh.hpp"
#include "btpmbm/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace btpmbm {

enum class InitMode { singletons, greedy };

/// "theta-hat" (every measurement starts its own Bernoulli) or "greedy".
[[nodiscard]] InitMode parse_init_mode(const std::string& name);
[[nodiscard]] const char* init_mode_name(InitMode mode);

/// Global nearest neighbour, scan by scan: gated (track, measurement) pairs
/// are taken in decreasing order of the ln π change of the extension, one
/// measurement per track; measurements left over start their own Bernoulli.
/// Tracks are the Bernoullis with r > 0.
[[nodiscard]] Association greedy_association(const TpmbmEngine& engine);
[[nodiscard]] Association initial_association(const TpmbmEngine& engine, InitMode mode);

enum class Method { gibbs, mh };

[[nodiscard]] Method parse_method(const std::string& name);
[[nodiscard]] const char* method_name(Method m);

struct RunSpec {
    Method method = Method::mh;
    std::uint64_t iterations = 200000;  // MH iterations or Gibbs sweeps
    MoveConfig moves;
    InitMode init = InitMode::greedy;
    std::uint64_t trace_every = 200;  // 0 disables the correct-association trace
    GospaConfig gospa;

    void validate() const;
};

struct TracePoint {
    std::uint64_t iteration = 0;
    double log_pi = 0.0;
    int correct = 0;  // correct associations of the current sample's estimate
    int tracks = 0;   // estimated trajectories
};

struct RunResult {
    Method method = Method::mh;
    std::uint64_t iterations = 0;
    double runtime_s = 0.0;  // sampling, MAP selection and estimation; trace evaluation excluded
    double map_log_pi = 0.0;
    std::size_t distinct = 0;
    Association map;
    std::vector<TrajectoryEstimate> estimates;
    std::optional<GospaResult> gospa;  // when truth was given
    std::vector<TracePoint> trace;
    MoveStats moves;  // MH only
    Checkpoint checkpoint;  // final chain state, for resuming
};

/// Runs one chain on the engine's batch. `truth` (with origin labels, e.g.
/// from label_truth) enables the GOSPA evaluation and the trace; pass an
/// empty vector otherwise.
[[nodiscard]] RunResult run_batch(const TpmbmEngine& engine, const std::vector<Trajectory>& truth,
                                  const RunSpec& spec, Rng& rng);
/// Continues a chain from a checkpoint (θ, RNG state, iteration count) for
/// spec.iterations more steps. The MAP is taken over the continued part only.
[[nodiscard]] RunResult resume_batch(const TpmbmEngine& engine, const std::vector<Trajectory>& truth,
                                     const RunSpec& spec, const Checkpoint& checkpoint);

/// Monte Carlo run r of a root seed: measurements from stream 2r, the chain from stream 2r + 1.
[[nodiscard]] inline Rng measurement_rng(std::uint64_t root, std::uint64_t run) { return derive_rng(root, 2 * run); }
[[nodiscard]] inline Rng chain_rng(std::uint64_t root, std::uint64_t run) { return derive_rng(root, 2 * run + 1); }

struct MonteCarloRun {
    std::vector<Trajectory> truth;  // labelled with the batch's detections
    LabelledMeasurementBatch batch;
    RunResult result;
};

/// Truth from the scenario seed, batch and chain from the run's streams.
[[nodiscard]] MonteCarloRun monte_carlo_run(const Scenario& scenario, const TpmbmConfig& config,
                                            const RunSpec& spec, std::uint64_t root, std::uint64_t run);

inline constexpr int kResultsSchema = 1;

/// `# schema_version=1` then run_id,method,iterations,total,localization,missed,false,switch,runtime_s.
void write_results_header(std::ostream& out);
void write_results_row(std::ostream& out, const std::string& run_id, const RunResult& r);
/// run_id,iteration,log_pi,correct,tracks.
void write_trace_csv(std::ostream& out, const std::vector<std::pair<std::string, const RunResult*>>& runs);
/// time,localization,missed,false,switch,total per scan.
void write_per_time_csv(std::ostream& out, const GospaResult& g);

}  // namespace btpmbm
