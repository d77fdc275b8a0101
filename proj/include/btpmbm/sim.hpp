#pragma once

#include "btpmbm/random.hpp"
#include "btpmbm/tpmbm.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace btpmbm {

struct ObjectSpec {
    int birth = 1;
    int death = 1;  // last scan the object is alive
    Vec4 initial = Vec4::Zero();
};

struct Scenario {
    int horizon = 81;
    std::vector<ObjectSpec> objects;
    Region region{-200, 200, -200, 200};
    double sample_time = 1.0;
    double process_noise = 0.09;  // q
    double survival = 0.98;
    double detection = 0.7;
    double measurement_noise = 1.0;  // R = r I
    double clutter_rate = 30.0;
    double birth_weight = 0.01;
    double birth_variance = 4.0;  // birth covariance = birth_variance * I
    std::uint64_t seed = 0;       // truth seed

    void validate() const;
    [[nodiscard]] MotionModel motion() const;
    [[nodiscard]] MeasurementModel sensor() const;
    /// Birth intensity: one component per object at its rounded initial state.
    [[nodiscard]] BirthModel birth_model() const;
    [[nodiscard]] Models models() const { return {motion(), sensor(), birth_model()}; }
};

/// Six objects born at 1, 1, 11, 11, 21, 21 and dying at 61, 61, 71, 71, 81,
/// 81, heading for a common point so that they meet mid-scenario. The shipped
/// seed gives a truth that passes `proximity_check`.
[[nodiscard]] Scenario benchmark_scenario();

/// Each object follows x_{t+1} ~ N(F x_t, Q) from its initial state.
[[nodiscard]] std::vector<Trajectory> generate_truth(const Scenario& scenario, Rng& rng);
/// Truth from the scenario's own seed.
[[nodiscard]] std::vector<Trajectory> generate_truth(const Scenario& scenario);

/// All trajectories alive at some scan in [from, to] lie within a disc of
/// the given diameter around their centroid, and every state stays inside
/// `bound` (half-width of a centred square).
[[nodiscard]] bool proximity_check(const std::vector<Trajectory>& truth, int from, int to, double diameter,
                                   double bound);

/// Smallest seed >= start whose truth passes the benchmark-scenario proximity check.
[[nodiscard]] std::uint64_t find_proximity_seed(Scenario scenario, std::uint64_t start, std::uint64_t limit);

inline constexpr int kClutterOrigin = 0;

struct LabelledMeasurementBatch {
    MeasurementBatch batch;
    /// origins[k-1][j-1]: id of the generating object, or kClutterOrigin.
    std::vector<std::vector<int>> origins;
};

/// Per scan: each alive object detected with pd at N(Hx, R), Poisson clutter
/// uniform in the region, then the scan order shuffled.
[[nodiscard]] LabelledMeasurementBatch generate_measurements(const std::vector<Trajectory>& truth,
                                                             const MeasurementModel& sensor, int horizon, Rng& rng);

/// Copy of the truth with each trajectory's detections filled from the origin labels.
[[nodiscard]] std::vector<Trajectory> label_truth(std::vector<Trajectory> truth, const LabelledMeasurementBatch& m);

inline constexpr int kScenarioSchema = 1;

void write_scenario_json(std::ostream& out, const Scenario& s);
/// Throws std::invalid_argument on malformed or invalid input.
[[nodiscard]] Scenario read_scenario_json(std::istream& in);
void write_batch_json(std::ostream& out, const LabelledMeasurementBatch& m);
[[nodiscard]] LabelledMeasurementBatch read_batch_json(std::istream& in);

}  // namespace btpmbm
