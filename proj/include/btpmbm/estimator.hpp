#pragma once

#include "btpmbm/assoc.hpp"

#include <iosfwd>
#include <vector>

namespace btpmbm {

struct TrajectoryEstimate {
    int id = 0;
    int bernoulli = -1;
    int birth = 0;
    int end = 0;
    double log_pmf = 0.0;  // ln of the (birth, end) probability within the Bernoulli
    std::vector<Vec4> means;
    std::vector<Mat4> covariances;
    std::vector<int> measurements;  // global indices of the associated detections
    std::vector<MeasurementRef> detections;  // the same as (scan, index)

    [[nodiscard]] Trajectory to_trajectory() const;
};

/// One estimate per Bernoulli of `theta` with r = 1. (birth, end) maximizes
/// the joint pmf of the component mixture (ties: earliest birth, then latest
/// end); states are the RTS-smoothed sequence of the heaviest component with
/// that (birth, end). Estimates are ordered by Bernoulli index and numbered from 1.
[[nodiscard]] std::vector<TrajectoryEstimate> extract(const TpmbmEngine& engine, const Association& theta);

[[nodiscard]] std::vector<Trajectory> to_trajectories(const std::vector<TrajectoryEstimate>& estimates);

inline constexpr int kEstimateSchema = 1;

/// Header `id,birth,end,time,px,py,vx,vy`, one line per trajectory step.
void write_estimates_csv(std::ostream& out, const std::vector<TrajectoryEstimate>& estimates);
void write_estimates_json(std::ostream& out, const std::vector<TrajectoryEstimate>& estimates);

/// Reads trajectories from the JSON estimate (or truth) format. Throws
/// std::invalid_argument on malformed input.
[[nodiscard]] std::vector<Trajectory> read_trajectories_json(std::istream& in);
void write_trajectories_json(std::ostream& out, const std::vector<Trajectory>& trajectories, const char* kind);

}  // namespace btpmbm
