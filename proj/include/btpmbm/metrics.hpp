#pragma once

#include "btpmbm/core_types.hpp"

#include <vector>

namespace btpmbm {

struct GospaConfig {
    double p = 1.0;
    double c = 10.0;
    double gamma = 2.0;
    void validate() const;
};

struct GospaTerms {
    double localization = 0.0;
    double missed = 0.0;
    double false_ = 0.0;
    double switch_ = 0.0;
    [[nodiscard]] double total() const { return localization + missed + false_ + switch_; }
};

struct GospaResult {
    double total = 0.0;
    double localization = 0.0;
    double missed = 0.0;
    double false_ = 0.0;
    double switch_ = 0.0;
    int first_time = 1;
    std::vector<GospaTerms> per_time;  // scan first_time + index; switches count at the later scan
    /// assignment[t][i]: estimate assigned to truth i at scan first_time + t, or -1.
    std::vector<std::vector<int>> assignment;
    bool integral = true;       // false: the LP optimum was fractional and is reported as is
    double lp_objective = 0.0;  // relaxation value (a lower bound on the integral optimum)
};

/// Trajectory GOSPA between position sequences, solved as a linear program
/// over time-indexed assignments with switching costs. Missed and false
/// object-steps cost c^p/2, assigned pairs min(d, c)^p, and each change of a
/// truth's assignment γ^p (half of it for assigned <-> unassigned).
[[nodiscard]] GospaResult trajectory_gospa(const std::vector<Trajectory>& truth,
                                           const std::vector<Trajectory>& estimate, const GospaConfig& cfg = {});

/// Scans where a truth assigned (within the cut-off) to an estimate had its
/// own detection in that estimate's measurement list. Throws
/// std::invalid_argument when no truth carries origin labels.
[[nodiscard]] int correct_association_count(const std::vector<Trajectory>& truth,
                                            const std::vector<Trajectory>& estimate, const GospaResult& result,
                                            const GospaConfig& cfg = {});

}  // namespace btpmbm
