#include "btpmbm/sim.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace btpmbm {

namespace {

using json = nlohmann::json;

// Shipped truth seed for the six-object scenario (first seed passing the proximity check).
constexpr std::uint64_t kScenarioSeed = 204;

Mat4 noise_factor(const Mat4& Q) {
    const Eigen::SelfAdjointEigenSolver<Mat4> es(Q);
    const Vec4 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

Vec4 sample_noise(const Mat4& L, Rng& rng) {
    std::normal_distribution<double> n01;
    Vec4 w;
    for (int i = 0; i < 4; ++i) w(i) = n01(rng);
    return L * w;
}

}  // namespace

void Scenario::validate() const {
    if (horizon < 1) throw std::invalid_argument("scenario: horizon must be >= 1");
    if (!(region.x_max > region.x_min && region.y_max > region.y_min))
        throw std::invalid_argument("scenario: empty region");
    if (!(sample_time > 0.0) || !(process_noise >= 0.0) || !(measurement_noise > 0.0))
        throw std::invalid_argument("scenario: noise parameters must be positive");
    if (!(survival > 0.0 && survival <= 1.0) || !(detection > 0.0 && detection <= 1.0))
        throw std::invalid_argument("scenario: probabilities must lie in (0, 1]");
    if (!(clutter_rate >= 0.0) || !(birth_weight > 0.0) || !(birth_variance > 0.0))
        throw std::invalid_argument("scenario: rates and birth parameters must be positive");
    for (const auto& o : objects) {
        if (o.birth < 1 || o.death < o.birth || o.death > horizon)
            throw std::invalid_argument("scenario: object alive interval outside 1..K");
        if (!o.initial.allFinite() || !region.contains(o.initial(0), o.initial(2)))
            throw std::invalid_argument("scenario: initial state outside the region");
    }
}

MotionModel Scenario::motion() const { return constant_velocity(sample_time, process_noise, survival); }

MeasurementModel Scenario::sensor() const {
    return position_sensor(measurement_noise, detection, clutter_rate, region);
}

BirthModel Scenario::birth_model() const {
    BirthModel b;
    for (const auto& o : objects) {
        BirthComponent c;
        c.log_weight = std::log(birth_weight);
        c.moments.mean = o.initial.array().round().matrix();
        c.moments.cov = birth_variance * Mat4::Identity();
        b.components.push_back(c);
    }
    return b;
}

Scenario benchmark_scenario() {
    Scenario s;
    const int births[6] = {1, 1, 11, 11, 21, 21};
    const int deaths[6] = {61, 61, 71, 71, 81, 81};
    // Headings 60 degrees apart; speed 3 m/s towards the origin, reached at scan 41.
    const double speed = 3.0;
    const int meet = 41;
    for (int l = 0; l < 6; ++l) {
        const double a = l * std::numbers::pi / 3.0;
        const double r = speed * (meet - births[l]);
        ObjectSpec o;
        o.birth = births[l];
        o.death = deaths[l];
        o.initial = Vec4(-r * std::cos(a), speed * std::cos(a), -r * std::sin(a), speed * std::sin(a));
        s.objects.push_back(o);
    }
    s.seed = kScenarioSeed;
    return s;
}

std::vector<Trajectory> generate_truth(const Scenario& scenario, Rng& rng) {
    scenario.validate();
    const auto motion = scenario.motion();
    const Mat4 L = noise_factor(motion.Q);
    std::vector<Trajectory> out;
    int id = 1;
    for (const auto& o : scenario.objects) {
        Trajectory t;
        t.id = id++;
        t.birth = o.birth;
        Vec4 x = o.initial;
        t.states.push_back(x);
        for (int k = o.birth + 1; k <= o.death; ++k) {
            x = motion.F * x + sample_noise(L, rng);
            t.states.push_back(x);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Trajectory> generate_truth(const Scenario& scenario) {
    Rng rng(scenario.seed);
    return generate_truth(scenario, rng);
}

bool proximity_check(const std::vector<Trajectory>& truth, int from, int to, double diameter, double bound) {
    for (const auto& t : truth)
        for (const auto& x : t.states)
            if (std::abs(x(0)) > bound || std::abs(x(2)) > bound) return false;
    for (int k = from; k <= to; ++k) {
        std::vector<Vec2> pts;
        bool all = true;
        for (const auto& t : truth) {
            if (!t.exists_at(k)) {
                all = false;
                break;
            }
            pts.push_back(t.position_at(k));
        }
        if (!all || pts.empty()) continue;
        Vec2 c = Vec2::Zero();
        for (const auto& p : pts) c += p;
        c /= static_cast<double>(pts.size());
        double r = 0.0;
        for (const auto& p : pts) r = std::max(r, (p - c).norm());
        if (r <= diameter / 2.0) return true;
    }
    return false;
}

std::uint64_t find_proximity_seed(Scenario scenario, std::uint64_t start, std::uint64_t limit) {
    for (std::uint64_t seed = start; seed < limit; ++seed) {
        scenario.seed = seed;
        if (proximity_check(generate_truth(scenario), 31, 51, 40.0, 190.0)) return seed;
    }
    throw std::runtime_error("find_proximity_seed: no seed in range");
}

LabelledMeasurementBatch generate_measurements(const std::vector<Trajectory>& truth, const MeasurementModel& sensor,
                                               int horizon, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("generate_measurements: horizon must be >= 1");
    const Eigen::LLT<Eigen::Matrix2d> chol(sensor.R);
    if (chol.info() != Eigen::Success) throw std::invalid_argument("generate_measurements: R not positive definite");
    const Eigen::Matrix2d L = chol.matrixL();
    std::normal_distribution<double> n01;
    std::poisson_distribution<int> clutter(sensor.clutter_rate > 0.0 ? sensor.clutter_rate : 1.0);
    std::uniform_real_distribution<double> ux(sensor.region.x_min, sensor.region.x_max);
    std::uniform_real_distribution<double> uy(sensor.region.y_min, sensor.region.y_max);

    std::vector<std::vector<Vec2>> scans(static_cast<std::size_t>(horizon));
    LabelledMeasurementBatch out;
    out.origins.resize(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k) {
        std::vector<std::pair<Vec2, int>> scan;
        for (const auto& t : truth) {
            if (!t.exists_at(k)) continue;
            if (uniform01(rng) >= sensor.detection) continue;
            const Vec2 v(n01(rng), n01(rng));
            scan.emplace_back(sensor.H * t.states[static_cast<std::size_t>(k - t.birth)] + L * v, t.id);
        }
        const int n = sensor.clutter_rate > 0.0 ? clutter(rng) : 0;
        for (int c = 0; c < n; ++c) {
            const double x = ux(rng);
            const double y = uy(rng);
            scan.emplace_back(Vec2(x, y), kClutterOrigin);
        }
        std::shuffle(scan.begin(), scan.end(), rng);
        for (const auto& [z, origin] : scan) {
            scans[static_cast<std::size_t>(k - 1)].push_back(z);
            out.origins[static_cast<std::size_t>(k - 1)].push_back(origin);
        }
    }
    out.batch = MeasurementBatch(std::move(scans));
    return out;
}

std::vector<Trajectory> label_truth(std::vector<Trajectory> truth, const LabelledMeasurementBatch& m) {
    for (auto& t : truth) t.measurements.clear();
    for (std::size_t k = 0; k < m.origins.size(); ++k) {
        for (std::size_t j = 0; j < m.origins[k].size(); ++j) {
            const int origin = m.origins[k][j];
            if (origin == kClutterOrigin) continue;
            for (auto& t : truth)
                if (t.id == origin) t.measurements.push_back({static_cast<int>(k) + 1, static_cast<int>(j) + 1});
        }
    }
    return truth;
}

void write_scenario_json(std::ostream& out, const Scenario& s) {
    json doc;
    doc["schema_version"] = kScenarioSchema;
    doc["horizon"] = s.horizon;
    doc["region"] = {s.region.x_min, s.region.x_max, s.region.y_min, s.region.y_max};
    doc["sample_time"] = s.sample_time;
    doc["process_noise"] = s.process_noise;
    doc["survival"] = s.survival;
    doc["detection"] = s.detection;
    doc["measurement_noise"] = s.measurement_noise;
    doc["clutter_rate"] = s.clutter_rate;
    doc["birth_weight"] = s.birth_weight;
    doc["birth_variance"] = s.birth_variance;
    doc["seed"] = s.seed;
    json objects = json::array();
    for (const auto& o : s.objects)
        objects.push_back({{"birth", o.birth},
                           {"death", o.death},
                           {"initial", {o.initial(0), o.initial(1), o.initial(2), o.initial(3)}}});
    doc["objects"] = std::move(objects);
    out << doc.dump(1) << '\n';
}

Scenario read_scenario_json(std::istream& in) {
    Scenario s;
    try {
        const json doc = json::parse(in);
        if (doc.at("schema_version").get<int>() != kScenarioSchema)
            throw std::invalid_argument("scenario: unsupported schema_version");
        s.horizon = doc.at("horizon").get<int>();
        const auto r = doc.at("region");
        s.region = Region{r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()};
        s.sample_time = doc.value("sample_time", s.sample_time);
        s.process_noise = doc.value("process_noise", s.process_noise);
        s.survival = doc.value("survival", s.survival);
        s.detection = doc.value("detection", s.detection);
        s.measurement_noise = doc.value("measurement_noise", s.measurement_noise);
        s.clutter_rate = doc.value("clutter_rate", s.clutter_rate);
        s.birth_weight = doc.value("birth_weight", s.birth_weight);
        s.birth_variance = doc.value("birth_variance", s.birth_variance);
        s.seed = doc.value("seed", s.seed);
        for (const auto& o : doc.at("objects")) {
            ObjectSpec spec;
            spec.birth = o.at("birth").get<int>();
            spec.death = o.at("death").get<int>();
            const auto& x = o.at("initial");
            if (x.size() != 4) throw std::invalid_argument("scenario: initial state needs 4 components");
            spec.initial = Vec4(x[0].get<double>(), x[1].get<double>(), x[2].get<double>(), x[3].get<double>());
            s.objects.push_back(spec);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

void write_batch_json(std::ostream& out, const LabelledMeasurementBatch& m) {
    json doc;
    doc["schema_version"] = kScenarioSchema;
    json scans = json::array();
    for (int k = 1; k <= m.batch.horizon(); ++k) {
        json zs = json::array();
        const auto& scan = m.batch.scans()[static_cast<std::size_t>(k - 1)];
        for (std::size_t j = 0; j < scan.size(); ++j) {
            json z = {scan[j](0), scan[j](1)};
            if (!m.origins.empty()) z.push_back(m.origins[static_cast<std::size_t>(k - 1)][j]);
            zs.push_back(std::move(z));
        }
        scans.push_back(std::move(zs));
    }
    doc["scans"] = std::move(scans);
    out << doc.dump() << '\n';
}

LabelledMeasurementBatch read_batch_json(std::istream& in) {
    LabelledMeasurementBatch m;
    std::vector<std::vector<Vec2>> scans;
    bool labelled = true;
    try {
        const json doc = json::parse(in);
        if (doc.at("schema_version").get<int>() != kScenarioSchema)
            throw std::invalid_argument("batch: unsupported schema_version");
        for (const auto& zs : doc.at("scans")) {
            scans.emplace_back();
            m.origins.emplace_back();
            for (const auto& z : zs) {
                if (z.size() < 2 || z.size() > 3) throw std::invalid_argument("batch: measurement must be [x, y(, origin)]");
                const Vec2 v(z[0].get<double>(), z[1].get<double>());
                if (!v.allFinite()) throw std::invalid_argument("batch: non-finite measurement");
                scans.back().push_back(v);
                if (z.size() == 3)
                    m.origins.back().push_back(z[2].get<int>());
                else
                    labelled = false;
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("batch: ") + e.what());
    }
    if (scans.empty()) throw std::invalid_argument("batch: no scans");
    if (!labelled) m.origins.clear();
    m.batch = MeasurementBatch(std::move(scans));
    return m;
}

}  // namespace btpmbm
