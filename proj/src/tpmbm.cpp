#include "btpmbm/tpmbm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace btpmbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gate_threshold(double gate_prob) {
    return gate_prob < 1.0 ? chi2_quantile(gate_prob, kMeasDim) : kInf;
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

void mark_impossible(LocalHypothesis& h) {
    h.log_weight = kNegInf;
    h.existence = 0.0;
    h.components.clear();
}

void predict_inplace(LocalHypothesis& h, const MotionModel& motion) {
    const int k = h.step;
    h.step = k + 1;
    if (h.existence == 0.0 || h.components.empty()) return;
    const double log_ps = safe_log(motion.survival);
    const double log_die = safe_log(1.0 - motion.survival);
    std::vector<TrajectoryComponent> out;
    out.reserve(h.components.size() + 2);
    for (auto& c : h.components) {
        if (c.end != k) {
            out.push_back(std::move(c));
            continue;
        }
        if (log_die != kNegInf) {
            TrajectoryComponent dead = c;
            dead.log_weight += log_die;
            out.push_back(std::move(dead));
        }
        if (log_ps != kNegInf) {
            TrajectoryComponent alive;
            alive.log_weight = c.log_weight + log_ps;
            alive.birth = c.birth;
            alive.end = k + 1;
            alive.state = kf_predict(c.state, motion);
            if (c.trace)
                alive.trace = std::make_shared<const TraceNode>(
                    TraceNode{k + 1, alive.state, alive.state, c.trace});
            out.push_back(std::move(alive));
        }
    }
    h.components = std::move(out);
}

void misdetect_inplace(LocalHypothesis& h, double pd) {
    if (h.log_weight == kNegInf || h.existence == 0.0) return;
    const double phi0 = pd * h.alive_mass();
    if (phi0 == 0.0) return;
    const double r = h.existence;
    if (r * phi0 >= 1.0) {
        mark_impossible(h);
        return;
    }
    h.log_weight += std::log1p(-r * phi0);
    if (phi0 >= 1.0) {
        // Certainly alive and certainly detected, yet missed: the trajectory does not exist.
        h.existence = 0.0;
        h.components.clear();
        return;
    }
    h.existence = r * (1.0 - phi0) / (1.0 - r * phi0);
    const double log_norm = std::log1p(-phi0);
    const double log_miss = safe_log(1.0 - pd);
    std::size_t out = 0;
    for (std::size_t l = 0; l < h.components.size(); ++l) {
        auto& c = h.components[l];
        c.log_weight += (c.end == h.step ? log_miss : 0.0) - log_norm;
        if (c.log_weight == kNegInf) continue;
        if (out != l) h.components[out] = std::move(c);
        ++out;
    }
    h.components.resize(out);
}

void detect_inplace(LocalHypothesis& h, const Measurement& z, const MeasurementModel& model,
                    double gate_prob) {
    if (h.log_weight == kNegInf || h.existence == 0.0 || model.detection <= 0.0) {
        mark_impossible(h);
        return;
    }
    const double thr = gate_threshold(gate_prob);
    std::vector<TrajectoryComponent> out;
    std::vector<double> log_w;
    for (const auto& c : h.components) {
        if (c.end != h.step) continue;
        const auto inn = innovation(c.state, z.value, model);
        if (inn.mahalanobis2 > thr) continue;
        TrajectoryComponent u;
        u.log_weight = c.log_weight + inn.log_likelihood();
        if (u.log_weight == kNegInf) continue;
        u.birth = c.birth;
        u.end = c.end;
        u.state = kf_posterior(c.state, inn, model);
        if (c.trace)
            u.trace = std::make_shared<const TraceNode>(
                TraceNode{c.end, c.trace->predicted, u.state, c.trace->previous});
        log_w.push_back(u.log_weight);
        out.push_back(std::move(u));
    }
    if (out.empty()) {
        mark_impossible(h);
        return;
    }
    const double lse = log_sum_exp(log_w);
    h.log_weight += std::log(h.existence) + std::log(model.detection) + lse;
    h.existence = 1.0;
    for (auto& c : out) c.log_weight -= lse;
    h.components = std::move(out);
    h.history.push_back(z.ref());
}

}  // namespace

TpmbmConfig TpmbmConfig::exact() {
    TpmbmConfig c;
    c.gate_prob = 1.0;
    c.ppp_prune = 0.0;
    c.birth_pmf_threshold = 0.0;
    c.end_pmf_threshold = 0.0;
    c.existence_clamp = 0.0;
    return c;
}

void TpmbmConfig::validate() const {
    if (!(gate_prob > 0.0)) throw std::invalid_argument("gate probability must be positive");
    for (double t : {ppp_prune, birth_pmf_threshold, end_pmf_threshold, existence_clamp})
        if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("thresholds must lie in [0,1)");
}

PoissonIntensity ppp_predict(const PoissonIntensity& intensity, const MotionModel& motion,
                             const BirthModel& birth, bool record) {
    PoissonIntensity out;
    out.step = intensity.step + 1;
    const double log_ps = safe_log(motion.survival);
    out.components.reserve(intensity.components.size() + birth.components.size());
    for (const auto& c : intensity.components) {
        PoissonComponent p;
        p.log_weight = c.log_weight + log_ps;
        if (p.log_weight == kNegInf) continue;
        p.birth = c.birth;
        p.end = out.step;
        p.moments = kf_predict(c.moments, motion);
        if (record || c.trace)
            p.trace = std::make_shared<const TraceNode>(TraceNode{out.step, p.moments, p.moments, c.trace});
        out.components.push_back(std::move(p));
    }
    for (const auto& b : birth.components) {
        PoissonComponent p;
        p.log_weight = b.log_weight;
        p.birth = out.step;
        p.end = out.step;
        p.moments = b.moments;
        if (record)
            p.trace = std::make_shared<const TraceNode>(TraceNode{out.step, p.moments, p.moments, nullptr});
        out.components.push_back(std::move(p));
    }
    return out;
}

PoissonIntensity ppp_update(const PoissonIntensity& intensity, double pd) {
    PoissonIntensity out = intensity;
    const double log_miss = safe_log(1.0 - pd);
    for (auto& c : out.components) c.log_weight += log_miss;
    return out;
}

void prune_poisson(PoissonIntensity& intensity, double threshold) {
    const double log_thr = threshold > 0.0 ? std::log(threshold) : kNegInf;
    std::erase_if(intensity.components, [&](const PoissonComponent& c) {
        return c.log_weight == kNegInf || c.log_weight < log_thr;
    });
}

LocalHypothesis bernoulli_predict(LocalHypothesis h, const MotionModel& motion) {
    predict_inplace(h, motion);
    return h;
}

LocalHypothesis bernoulli_misdetect(LocalHypothesis h, double pd) {
    misdetect_inplace(h, pd);
    return h;
}

LocalHypothesis bernoulli_detect(LocalHypothesis h, const Measurement& z,
                                 const MeasurementModel& model, double gate_prob) {
    if (z.time != h.step) throw std::invalid_argument("bernoulli_detect: time mismatch");
    detect_inplace(h, z, model, gate_prob);
    return h;
}

NewBernoulli new_bernoulli(const Measurement& z, const PoissonIntensity& predicted,
                           const MeasurementModel& model, double gate_prob, bool record) {
    if (z.time != predicted.step) throw std::invalid_argument("new_bernoulli: time mismatch");
    NewBernoulli out;
    out.null.step = z.time;

    const double thr = gate_threshold(gate_prob);
    const double log_pd = safe_log(model.detection);
    std::vector<TrajectoryComponent> comps;
    std::vector<double> log_w;
    if (log_pd != kNegInf) {
        for (const auto& c : predicted.components) {
            const auto inn = innovation(c.moments, z.value, model);
            if (inn.mahalanobis2 > thr) continue;
            TrajectoryComponent u;
            u.log_weight = c.log_weight + log_pd + inn.log_likelihood();
            if (u.log_weight == kNegInf) continue;
            u.birth = c.birth;
            u.end = z.time;
            u.state = kf_posterior(c.moments, inn, model);
            if (record) {
                if (!c.trace) throw std::logic_error("new_bernoulli: Poisson trace missing");
                u.trace = std::make_shared<const TraceNode>(
                    TraceNode{z.time, c.trace->predicted, u.state, c.trace->previous});
            }
            log_w.push_back(u.log_weight);
            comps.push_back(std::move(u));
        }
    }
    const double log_phi = comps.empty() ? kNegInf : log_sum_exp(log_w);
    const double log_clutter = safe_log(clutter_intensity(model, z.value));
    const double pair[2] = {log_clutter, log_phi};
    const double log_total = log_sum_exp(pair);

    LocalHypothesis& e = out.exists;
    e.step = z.time;
    e.history = {z.ref()};
    e.log_weight = log_total;
    if (log_total == kNegInf || log_phi == kNegInf) {
        e.existence = 0.0;
        return out;
    }
    e.existence = std::exp(log_phi - log_total);
    for (auto& c : comps) c.log_weight -= log_phi;
    e.components = std::move(comps);
    return out;
}

std::uint64_t sequence_hash_step(std::uint64_t h, int value) {
    std::uint64_t x = h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(value)) +
                           0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t sequence_hash(std::span<const int> values) {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (int v : values) h = sequence_hash_step(h, v);
    return h;
}

TpmbmEngine::TpmbmEngine(MeasurementBatch batch, Models models, TpmbmConfig config)
    : batch_(std::move(batch)), models_(std::move(models)), config_(config) {
    config_.validate();
    const int K = batch_.horizon();
    predicted_.reserve(static_cast<std::size_t>(K));
    PoissonIntensity updated;  // step 0, empty
    for (int k = 1; k <= K; ++k) {
        PoissonIntensity pred = ppp_predict(updated, models_.motion, models_.birth, true);
        predicted_.push_back(pred);
        updated = ppp_update(pred, models_.measurement.detection);
        prune_poisson(updated, config_.ppp_prune);
    }
    const int n = batch_.total();
    single_log_w_.resize(static_cast<std::size_t>(n));
    single_r_.resize(static_cast<std::size_t>(n));
    for (int g = 0; g < n; ++g) {
        const int h[1] = {g};
        const auto s = summarize(evaluate(h));
        single_log_w_[static_cast<std::size_t>(g)] = s.log_weight;
        single_r_[static_cast<std::size_t>(g)] = s.existence;
    }
}

const PoissonIntensity& TpmbmEngine::predicted_intensity(int k) const {
    return predicted_.at(static_cast<std::size_t>(k - 1));
}

void TpmbmEngine::truncate(LocalHypothesis& h) const {
    if (h.components.empty()) return;
    truncate_time_pmfs(h.components, config_.birth_pmf_threshold, config_.end_pmf_threshold,
                       h.step);
}

LocalHypothesis TpmbmEngine::create(int g, bool record) const {
    const auto z = batch_.measurement(g);
    auto nb = new_bernoulli(z, predicted_intensity(z.time), models_.measurement,
                            config_.gate_prob, record);
    LocalHypothesis h = std::move(nb.exists);
    if (h.existence > 0.0 && h.existence < config_.existence_clamp) {
        h.existence = 0.0;
        h.components.clear();
    }
    truncate(h);
    return h;
}

void TpmbmEngine::predict_step(LocalHypothesis& h) const {
    predict_inplace(h, models_.motion);
    truncate(h);
}

void TpmbmEngine::update_step(LocalHypothesis& h, int g) const {
    if (g < 0) {
        misdetect_inplace(h, models_.measurement.detection);
    } else {
        detect_inplace(h, batch_.measurement(g), models_.measurement, config_.gate_prob);
    }
    truncate(h);
}

void TpmbmEngine::advance(LocalHypothesis& h, int g) const {
    if (g >= 0 && batch_.scan_of(g) != h.step + 1)
        throw std::invalid_argument("advance: measurement is not at the next scan");
    if (h.log_weight == kNegInf) {
        h.step += 1;
        return;
    }
    predict_step(h);
    update_step(h, g);
}

void TpmbmEngine::advance_to(LocalHypothesis& h, int step) const {
    while (h.step < step) {
        // Non-existent or dead hypotheses are unchanged by further misdetections.
        if (h.log_weight == kNegInf || h.existence == 0.0 || !h.has_alive()) {
            h.step = step;
            return;
        }
        advance(h, -1);
    }
}

void TpmbmEngine::validate_history(std::span<const int> history) const {
    int prev_scan = 0;
    for (int g : history) {
        if (g < 0 || g >= batch_.total()) throw std::invalid_argument("history: bad measurement index");
        const int k = batch_.scan_of(g);
        if (k <= prev_scan) throw std::invalid_argument("history: scans must strictly increase");
        prev_scan = k;
    }
}

HypothesisSummary TpmbmEngine::summarize(const LocalHypothesis& h) {
    if (h.log_weight == kNegInf) return {kNegInf, 0.0, -1};
    return {h.log_weight, h.existence, h.max_end()};
}

LocalHypothesis TpmbmEngine::evaluate(std::span<const int> history, bool record) const {
    if (history.empty()) {
        LocalHypothesis null;
        null.step = horizon();
        return null;
    }
    validate_history(history);
    LocalHypothesis h = create(history.front(), record);
    for (std::size_t q = 1; q < history.size(); ++q) {
        const int g = history[q];
        advance_to(h, batch_.scan_of(g) - 1);
        advance(h, g);
    }
    advance_to(h, horizon());
    return h;
}

LocalHypothesis TpmbmEngine::state_after(std::span<const int> prefix, WeightCache& cache) const {
    const std::size_t n = prefix.size();
    std::vector<std::uint64_t> hashes(n + 1);
    hashes[0] = sequence_hash({});
    for (std::size_t q = 0; q < n; ++q) hashes[q + 1] = sequence_hash_step(hashes[q], prefix[q]);

    std::size_t p = n;
    LocalHypothesis h;
    for (; p >= 1; --p) {
        if (const auto* hit = cache.prefixes_.find(hashes[p], prefix.first(p))) {
            h = *hit;
            break;
        }
    }
    if (p == 0) {
        h = create(prefix.front());
        p = 1;
        cache.prefixes_.insert(hashes[1], prefix.first(1), h);
    }
    for (std::size_t q = p; q < n; ++q) {
        const int g = prefix[q];
        advance_to(h, batch_.scan_of(g) - 1);
        advance(h, g);
        cache.prefixes_.insert(hashes[q + 1], prefix.first(q + 1), h);
    }
    return h;
}

HypothesisSummary TpmbmEngine::summary(std::span<const int> history, WeightCache& cache) const {
    if (history.empty()) return {0.0, 0.0, -1};
    const std::uint64_t key = sequence_hash(history);
    if (const auto* hit = cache.summaries_.find(key, history)) {
        ++cache.stats_.hits;
        return *hit;
    }
    ++cache.stats_.misses;
    validate_history(history);
    LocalHypothesis h = state_after(history, cache);
    advance_to(h, horizon());
    const auto s = summarize(h);
    cache.summaries_.insert(key, history, s);
    return s;
}

LocalHypothesis TpmbmEngine::predicted_at(std::span<const int> prefix, int k,
                                          WeightCache& cache) const {
    if (prefix.empty()) throw std::invalid_argument("predicted_at: empty prefix");
    validate_history(prefix);
    if (batch_.scan_of(prefix.back()) >= k)
        throw std::invalid_argument("predicted_at: prefix must end before scan k");
    LocalHypothesis h = state_after(prefix, cache);
    advance_to(h, k - 1);
    if (h.log_weight == kNegInf) {
        h.step = k;
        return h;
    }
    predict_step(h);
    return h;
}

std::vector<int> TpmbmEngine::gated_measurements(const LocalHypothesis& predicted, int k) const {
    std::vector<int> out;
    if (predicted.log_weight == kNegInf || predicted.existence == 0.0 || !predicted.has_alive() ||
        batch_.count(k) == 0)
        return out;
    const int first = batch_.offset(k);
    const int m = batch_.count(k);
    if (config_.gate_prob >= 1.0) {
        for (int j = 0; j < m; ++j) out.push_back(first + j);
        return out;
    }
    const double thr = gate_threshold(config_.gate_prob);
    std::vector<char> hit(static_cast<std::size_t>(m), 0);
    for (const auto& c : predicted.components) {
        if (c.end != predicted.step) continue;
        for (int j = 0; j < m; ++j) {
            if (hit[static_cast<std::size_t>(j)]) continue;
            if (innovation(c.state, batch_.value(first + j), models_.measurement).mahalanobis2 <= thr)
                hit[static_cast<std::size_t>(j)] = 1;
        }
    }
    for (int j = 0; j < m; ++j)
        if (hit[static_cast<std::size_t>(j)]) out.push_back(first + j);
    return out;
}

}  // namespace btpmbm
