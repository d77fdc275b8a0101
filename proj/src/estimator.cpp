#include "btpmbm/estimator.hpp"

#include "json.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace btpmbm {

namespace {

using json = nlohmann::json;

json states_json(const Trajectory& t) {
    json states = json::array();
    for (std::size_t s = 0; s < t.states.size(); ++s) {
        const auto& x = t.states[s];
        states.push_back({t.birth + static_cast<int>(s), x(0), x(2), x(1), x(3)});
    }
    return states;
}

}  // namespace

Trajectory TrajectoryEstimate::to_trajectory() const {
    Trajectory t;
    t.id = id;
    t.birth = birth;
    t.states = means;
    t.covariances = covariances;
    t.measurements = detections;
    return t;
}

std::vector<TrajectoryEstimate> extract(const TpmbmEngine& engine, const Association& theta) {
    std::vector<TrajectoryEstimate> out;
    const auto& motion = engine.models().motion;
    WeightCache cache;
    for (int b = 0; b < theta.size(); ++b) {
        if (!theta.nonempty(b)) continue;
        const auto history = theta.history(b);
        if (engine.summary(history, cache).existence != 1.0) continue;
        const auto h = engine.evaluate(history, true);
        if (h.components.empty()) continue;

        // pmf over joint (birth, end) atoms
        std::map<std::pair<int, int>, std::vector<double>> atoms;
        std::vector<double> all;
        for (const auto& c : h.components) {
            atoms[{c.birth, c.end}].push_back(c.log_weight);
            all.push_back(c.log_weight);
        }
        const double total = log_sum_exp(all);
        std::pair<int, int> best{};
        double best_w = kNegInf;
        for (const auto& [key, ws] : atoms) {
            const double w = log_sum_exp(ws);
            // map order: birth ascending, end ascending; `>=` within a birth keeps the latest end
            if (w > best_w || (w == best_w && key.first == best.first)) {
                best = key;
                best_w = w;
            }
        }
        const TrajectoryComponent* pick = nullptr;
        for (const auto& c : h.components)
            if (c.birth == best.first && c.end == best.second && (!pick || c.log_weight > pick->log_weight))
                pick = &c;

        const auto filtered = pick->marginals();
        const auto predicted = pick->predicted();
        const auto smoothed = rts_smooth<kStateDim>(filtered, predicted, motion);

        TrajectoryEstimate e;
        e.id = static_cast<int>(out.size()) + 1;
        e.bernoulli = b;
        e.birth = pick->birth;
        e.end = pick->end;
        e.log_pmf = best_w - total;
        for (const auto& g : smoothed) {
            e.means.push_back(g.mean);
            e.covariances.push_back(g.cov);
        }
        e.measurements = history;
        for (int g : history) e.detections.push_back(engine.batch().ref(g));
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Trajectory> to_trajectories(const std::vector<TrajectoryEstimate>& estimates) {
    std::vector<Trajectory> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back(e.to_trajectory());
    return out;
}

void write_estimates_csv(std::ostream& out, const std::vector<TrajectoryEstimate>& estimates) {
    out << "# schema_version=" << kEstimateSchema << '\n';
    out << "id,birth,end,time,px,py,vx,vy\n";
    out.precision(17);
    for (const auto& e : estimates) {
        for (std::size_t s = 0; s < e.means.size(); ++s) {
            const auto& x = e.means[s];
            out << e.id << ',' << e.birth << ',' << e.end << ',' << e.birth + static_cast<int>(s) << ',' << x(0)
                << ',' << x(2) << ',' << x(1) << ',' << x(3) << '\n';
        }
    }
}

void write_estimates_json(std::ostream& out, const std::vector<TrajectoryEstimate>& estimates) {
    json doc;
    doc["schema_version"] = kEstimateSchema;
    doc["kind"] = "estimate";
    json list = json::array();
    for (const auto& e : estimates) {
        const auto t = e.to_trajectory();
        json item;
        item["id"] = e.id;
        item["birth"] = e.birth;
        item["end"] = e.end;
        item["bernoulli"] = e.bernoulli;
        item["log_pmf"] = e.log_pmf;
        item["measurements"] = e.measurements;
        item["states"] = states_json(t);
        list.push_back(std::move(item));
    }
    doc["trajectories"] = std::move(list);
    out << doc.dump(1) << '\n';
}

void write_trajectories_json(std::ostream& out, const std::vector<Trajectory>& trajectories, const char* kind) {
    json doc;
    doc["schema_version"] = kEstimateSchema;
    doc["kind"] = kind;
    json list = json::array();
    for (const auto& t : trajectories) {
        json item;
        item["id"] = t.id;
        item["birth"] = t.birth;
        item["end"] = t.end();
        item["states"] = states_json(t);
        if (!t.measurements.empty()) {
            json refs = json::array();
            for (const auto& m : t.measurements) refs.push_back({m.time, m.index});
            item["detections"] = std::move(refs);
        }
        list.push_back(std::move(item));
    }
    doc["trajectories"] = std::move(list);
    out << doc.dump(1) << '\n';
}

std::vector<Trajectory> read_trajectories_json(std::istream& in) {
    std::vector<Trajectory> out;
    try {
        const json doc = json::parse(in);
        if (doc.at("schema_version").get<int>() != kEstimateSchema)
            throw std::invalid_argument("trajectories: unsupported schema_version");
        for (const auto& item : doc.at("trajectories")) {
            Trajectory t;
            t.id = item.at("id").get<int>();
            t.birth = item.at("birth").get<int>();
            int expect = t.birth;
            for (const auto& row : item.at("states")) {
                if (row.size() != 5 || row[0].get<int>() != expect)
                    throw std::invalid_argument("trajectories: states must be consecutive [time, px, py, vx, vy]");
                Vec4 x(row[1].get<double>(), row[3].get<double>(), row[2].get<double>(), row[4].get<double>());
                if (!x.allFinite()) throw std::invalid_argument("trajectories: non-finite state");
                t.states.push_back(x);
                ++expect;
            }
            if (t.states.empty()) throw std::invalid_argument("trajectories: empty trajectory");
            if (item.contains("end") && item.at("end").get<int>() != t.end())
                throw std::invalid_argument("trajectories: end does not match states");
            if (item.contains("detections"))
                for (const auto& r : item.at("detections")) t.measurements.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
            out.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("trajectories: ") + e.what());
    }
    return out;
}

}  // namespace btpmbm
