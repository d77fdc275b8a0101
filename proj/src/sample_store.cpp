#include "btpmbm/sample_store.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace btpmbm {

void SampleStore::record(const Association& theta, double log_pi, std::uint64_t iteration) {
    ++total_;
    auto [it, inserted] = entries_.try_emplace(theta.hash(), SampleEntry{log_pi, iteration, 0});
    ++it->second.visits;
    if (!inserted) return;
    // Worst kept candidate sits at the back: lowest ln π, then latest visit.
    if (best_.size() >= keep_best_ && !(log_pi > best_.back().log_pi)) return;
    Kept k{theta, log_pi, iteration};
    auto pos = std::find_if(best_.begin(), best_.end(), [&](const Kept& b) { return log_pi > b.log_pi; });
    best_.insert(pos, std::move(k));
    if (best_.size() > keep_best_) best_.pop_back();
}

std::uint64_t SampleStore::digest() const {
    std::uint64_t d = splitmix64(entries_.size());
    for (const auto& [hash, e] : entries_) d += splitmix64(hash ^ splitmix64(e.visits));
    return d;
}

MapHypothesis map_hypothesis(const SampleStore& store, const TpmbmEngine& engine, WeightCache& cache) {
    if (store.empty()) throw std::invalid_argument("map_hypothesis: empty sample store");
    std::size_t best = 0;
    double best_pi = kNegInf;
    std::uint64_t best_visit = 0;
    const auto& kept = store.best();
    for (std::size_t q = 0; q < kept.size(); ++q) {
        const double lp = log_pi(engine, kept[q].theta, cache);
        const bool better = lp > best_pi || (lp == best_pi && kept[q].first_visit < best_visit);
        if (q == 0 || better) {
            best = q;
            best_pi = lp;
            best_visit = kept[q].first_visit;
        }
    }
    return {kept[best].theta, best_pi, best_visit};
}

std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from_state(const std::string& state) {
    std::istringstream is(state);
    Rng rng;
    is >> rng;
    if (is.fail()) throw std::invalid_argument("checkpoint: malformed RNG state");
    return rng;
}

void write_checkpoint(std::ostream& out, const Checkpoint& cp) {
    out << "schema_version " << kCheckpointSchema << '\n';
    out << "method " << cp.method << '\n';
    out << "iteration " << cp.iteration << '\n';
    out << "store_digest " << std::hex << cp.store_digest << std::dec << '\n';
    out << "rng " << cp.rng_state << '\n';
    out << "theta\n";
    write_rows(out, cp.rows);
}

Checkpoint read_checkpoint(std::istream& in, int scans) {
    Checkpoint cp;
    auto field = [&](const char* name) {
        std::string line;
        if (!std::getline(in, line)) throw std::invalid_argument(std::string("checkpoint: missing ") + name);
        const std::string prefix = std::string(name) + " ";
        if (line.rfind(prefix, 0) != 0 && line != name)
            throw std::invalid_argument(std::string("checkpoint: expected ") + name);
        return line.size() > prefix.size() ? line.substr(prefix.size()) : std::string();
    };
    try {
        if (std::stoi(field("schema_version")) != kCheckpointSchema)
            throw std::invalid_argument("checkpoint: unsupported schema_version");
        cp.method = field("method");
        cp.iteration = std::stoull(field("iteration"));
        cp.store_digest = std::stoull(field("store_digest"), nullptr, 16);
        cp.rng_state = field("rng");
        (void)rng_from_state(cp.rng_state);
        field("theta");
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const std::invalid_argument*>(&e) &&
            std::string(e.what()).rfind("checkpoint", 0) == 0)
            throw;
        throw std::invalid_argument(std::string("checkpoint: malformed header (") + e.what() + ")");
    }
    cp.rows = read_rows(in, scans);
    return cp;
}

}  // namespace btpmbm
