#include "btpmbm/core_types.hpp"

#include <algorithm>
#include <cmath>

namespace btpmbm {

namespace {

std::vector<const TraceNode*> walk(const TrajectoryComponent& c) {
    if (!c.trace) throw std::logic_error("component has no recorded trace");
    std::vector<const TraceNode*> nodes;
    for (const TraceNode* n = c.trace.get(); n != nullptr && n->step >= c.birth;
         n = n->previous.get())
        nodes.push_back(n);
    std::reverse(nodes.begin(), nodes.end());
    if (nodes.empty() || nodes.front()->step != c.birth || nodes.back()->step != c.end ||
        static_cast<int>(nodes.size()) != c.end - c.birth + 1)
        throw std::logic_error("trace does not cover the component span");
    return nodes;
}

}  // namespace

std::vector<GaussianMoments> TrajectoryComponent::marginals() const {
    std::vector<GaussianMoments> out;
    for (const TraceNode* n : walk(*this)) out.push_back(n->filtered);
    return out;
}

std::vector<GaussianMoments> TrajectoryComponent::predicted() const {
    const auto nodes = walk(*this);
    std::vector<GaussianMoments> out;
    for (std::size_t i = 1; i < nodes.size(); ++i) out.push_back(nodes[i]->predicted);
    return out;
}

bool LocalHypothesis::has_alive() const {
    return std::any_of(components.begin(), components.end(),
                       [this](const TrajectoryComponent& c) { return c.end == step; });
}

double LocalHypothesis::alive_mass() const {
    double mass = 0.0;
    for (const auto& c : components)
        if (c.end == step) mass += std::exp(c.log_weight);
    return mass;
}

int LocalHypothesis::max_end() const {
    int e = -1;
    for (const auto& c : components) e = std::max(e, c.end);
    return e;
}

MeasurementBatch::MeasurementBatch(std::vector<std::vector<Vec2>> scans) : scans_(std::move(scans)) {
    offsets_.reserve(scans_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t k = 0; k < scans_.size(); ++k) {
        offsets_.push_back(offsets_.back() + static_cast<int>(scans_[k].size()));
        scan_of_.insert(scan_of_.end(), scans_[k].size(), static_cast<int>(k) + 1);
    }
}

int MeasurementBatch::global_index(int k, int j) const {
    if (k < 1 || k > horizon() || j < 1 || j > count(k))
        throw std::out_of_range("measurement index out of range");
    return offset(k) + j - 1;
}

MeasurementRef MeasurementBatch::ref(int g) const {
    const int k = scan_of(g);
    return {k, g - offset(k) + 1};
}

const Vec2& MeasurementBatch::value(int g) const {
    const int k = scan_of(g);
    return scans_[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(g - offset(k))];
}

Measurement MeasurementBatch::measurement(int g) const {
    const auto r = ref(g);
    return {r.time, r.index, value(g)};
}

double log_sum_exp(std::span<const double> values) {
    double m = kNegInf;
    for (double v : values) m = std::max(m, v);
    if (m == kNegInf) return kNegInf;
    if (m == std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

NormalizedWeights normalize_log_weights(std::span<const double> log_weights) {
    if (log_weights.empty()) throw std::invalid_argument("normalize_log_weights: empty input");
    const double total = log_sum_exp(log_weights);
    if (total == kNegInf) throw std::domain_error("degenerate mixture");
    NormalizedWeights out;
    out.log_total = total;
    out.weights.reserve(log_weights.size());
    for (double w : log_weights) out.weights.push_back(std::exp(w - total));
    return out;
}

double normalize_components(std::vector<TrajectoryComponent>& components) {
    if (components.empty()) return kNegInf;
    double m = kNegInf;
    for (const auto& c : components) m = std::max(m, c.log_weight);
    if (m == kNegInf) throw std::domain_error("degenerate mixture");
    double s = 0.0;
    for (const auto& c : components) s += std::exp(c.log_weight - m);
    const double total = m + std::log(s);
    for (auto& c : components) c.log_weight -= total;
    return total;
}

PruneResult prune_components(std::vector<TrajectoryComponent> components, double threshold,
                             int current_step) {
    if (threshold >= 1.0) throw std::invalid_argument("prune threshold must be below 1");
    PruneResult out;
    if (components.empty()) return out;
    normalize_components(components);
    const double log_thr = threshold > 0.0 ? std::log(threshold) : kNegInf;
    for (auto& c : components) {
        if (c.log_weight < log_thr) {
            if (c.end == current_step) out.alive_removed = true;
        } else {
            out.components.push_back(std::move(c));
        }
    }
    if (!out.components.empty()) normalize_components(out.components);
    return out;
}

bool truncate_time_pmfs(std::vector<TrajectoryComponent>& components, double birth_threshold,
                        double end_threshold, int current_step) {
    if (components.empty() || (birth_threshold <= 0.0 && end_threshold <= 0.0)) return false;
    // Mixtures are small; flat (time, mass) tables beat a map here.
    std::vector<std::pair<int, double>> birth_pmf;
    std::vector<std::pair<int, double>> end_pmf;
    auto add = [](std::vector<std::pair<int, double>>& pmf, int t, double w) {
        for (auto& [key, mass] : pmf)
            if (key == t) {
                mass += w;
                return;
            }
        pmf.emplace_back(t, w);
    };
    auto mass_of = [](const std::vector<std::pair<int, double>>& pmf, int t) {
        for (const auto& [key, mass] : pmf)
            if (key == t) return mass;
        return 0.0;
    };
    for (const auto& c : components) {
        const double w = std::exp(c.log_weight);
        add(birth_pmf, c.birth, w);
        add(end_pmf, c.end, w);
    }
    std::vector<char> drop(components.size(), 0);
    std::size_t n_drop = 0;
    for (std::size_t l = 0; l < components.size(); ++l) {
        const auto& c = components[l];
        if (mass_of(birth_pmf, c.birth) < birth_threshold || mass_of(end_pmf, c.end) < end_threshold) {
            drop[l] = 1;
            ++n_drop;
        }
    }
    if (n_drop == 0 || n_drop == components.size()) return false;
    bool alive_removed = false;
    std::size_t out = 0;
    for (std::size_t l = 0; l < components.size(); ++l) {
        if (drop[l]) {
            if (components[l].end == current_step) alive_removed = true;
            continue;
        }
        if (out != l) components[out] = std::move(components[l]);
        ++out;
    }
    components.resize(out);
    normalize_components(components);
    return alive_removed;
}

}  // namespace btpmbm
