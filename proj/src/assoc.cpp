#include "btpmbm/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace btpmbm {

namespace {

std::string describe(int k, int i, const char* what) {
    std::ostringstream os;
    os << "scan " << k << ", Bernoulli " << i + 1 << ": " << what;
    return os.str();
}

}  // namespace

ValidationResult validate_rows(const MeasurementBatch& batch, const AssociationRows& rows) {
    const int K = batch.horizon();
    if (static_cast<int>(rows.size()) != K)
        throw std::invalid_argument("association has " + std::to_string(rows.size()) +
                                    " rows, expected " + std::to_string(K));
    for (int k = 1; k <= K; ++k) {
        const auto& row = rows[static_cast<std::size_t>(k - 1)];
        if (static_cast<int>(row.size()) != batch.offset(k) + batch.count(k))
            throw std::invalid_argument("association row " + std::to_string(k) + " has wrong length");
    }
    for (int k = 1; k <= K; ++k) {
        const auto& row = rows[static_cast<std::size_t>(k - 1)];
        const int m = batch.count(k);
        const int n_prev = batch.offset(k);
        std::vector<int> used(static_cast<std::size_t>(m) + 1, 0);
        for (int i = 0; i < static_cast<int>(row.size()); ++i) {
            const int v = row[static_cast<std::size_t>(i)];
            if (i < n_prev) {
                if (v < 0 || v > m) return {1, describe(k, i, "value outside 0..m_k")};
            } else if (v != 0 && v != i - n_prev + 1) {
                return {2, describe(k, i, "new Bernoulli takes a foreign measurement")};
            }
            if (v > 0 && used[static_cast<std::size_t>(v)]++ > 0)
                return {3, describe(k, i, "measurement assigned twice")};
        }
        for (int j = 1; j <= m; ++j)
            if (used[static_cast<std::size_t>(j)] == 0) {
                std::ostringstream os;
                os << "scan " << k << ": measurement " << j << " unassigned";
                return {4, os.str()};
            }
    }
    for (int k = 1; k <= K; ++k) {
        const int n_prev = batch.offset(k);
        for (int j = 0; j < batch.count(k); ++j) {
            const int b = n_prev + j;
            if (rows[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(b)] != 0) continue;
            for (int t = k + 1; t <= K; ++t)
                if (rows[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(b)] != 0)
                    return {5, describe(t, b, "null Bernoulli detected later")};
        }
    }
    return {};
}

std::uint64_t Association::mix(int g, int owner) {
    std::uint64_t x = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(g)) << 32) ^
                      static_cast<std::uint32_t>(owner);
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void Association::init(const MeasurementBatch& batch) {
    const auto n = static_cast<std::size_t>(batch.total());
    owner_.assign(n, -1);
    next_.assign(n, -1);
    prev_.assign(n, -1);
    tail_.assign(n, -1);
    length_.assign(n, 0);
    scan_.resize(n);
    for (std::size_t g = 0; g < n; ++g) scan_[g] = batch.scan_of(static_cast<int>(g));
    offsets_.resize(static_cast<std::size_t>(batch.horizon()) + 1);
    for (int k = 1; k <= batch.horizon(); ++k) offsets_[static_cast<std::size_t>(k - 1)] = batch.offset(k);
    offsets_.back() = batch.total();
    hash_ = 0;
}

void Association::link(int b, std::span<const int> chain) {
    int prev = -1;
    for (int g : chain) {
        const auto u = static_cast<std::size_t>(g);
        owner_[u] = b;
        prev_[u] = prev;
        next_[u] = -1;
        if (prev >= 0) next_[static_cast<std::size_t>(prev)] = g;
        hash_ ^= mix(g, b);
        prev = g;
    }
    tail_[static_cast<std::size_t>(b)] = prev;
    length_[static_cast<std::size_t>(b)] = static_cast<int>(chain.size());
}

void Association::unlink(int b) {
    if (!nonempty(b)) return;
    for (int g = b; g >= 0;) {
        const auto u = static_cast<std::size_t>(g);
        const int nx = next_[u];
        hash_ ^= mix(g, b);
        owner_[u] = -1;
        next_[u] = prev_[u] = -1;
        g = nx;
    }
    tail_[static_cast<std::size_t>(b)] = -1;
    length_[static_cast<std::size_t>(b)] = 0;
}

Association Association::singletons(const MeasurementBatch& batch) {
    Association a;
    a.init(batch);
    for (int g = 0; g < a.size(); ++g) {
        const int chain[1] = {g};
        a.link(g, chain);
    }
    return a;
}

Association Association::from_histories(const MeasurementBatch& batch,
                                        std::span<const HistoryKey> chains) {
    Association a;
    a.init(batch);
    for (const auto& chain : chains) {
        if (chain.empty()) continue;
        const int b = chain.front();
        int prev_scan = 0;
        for (int g : chain) {
            if (g < 0 || g >= a.size()) throw std::invalid_argument("history: measurement out of range");
            if (a.owner(g) != -1) throw std::invalid_argument("history: measurement used twice");
            if (a.scan_of(g) <= prev_scan) throw std::invalid_argument("history: scans must increase");
            prev_scan = a.scan_of(g);
        }
        a.link(b, chain);
    }
    for (int g = 0; g < a.size(); ++g)
        if (a.owner(g) == -1) throw std::invalid_argument("history: measurement not assigned");
    return a;
}

Association Association::from_rows(const MeasurementBatch& batch, const AssociationRows& rows) {
    const auto v = validate_rows(batch, rows);
    if (!v.ok())
        throw std::invalid_argument("constraint " + std::to_string(v.constraint) + " violated (" +
                                    v.detail + ")");
    std::vector<HistoryKey> chains(static_cast<std::size_t>(batch.total()));
    for (int k = 1; k <= batch.horizon(); ++k) {
        const auto& row = rows[static_cast<std::size_t>(k - 1)];
        for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i] > 0) chains[i].push_back(batch.global_index(k, row[i]));
    }
    return from_histories(batch, chains);
}

int Association::detection_at(int b, int k) const {
    if (!nonempty(b)) return -1;
    for (int g = b; g >= 0; g = next(g)) {
        const int s = scan_of(g);
        if (s == k) return g;
        if (s > k) break;
    }
    return -1;
}

HistoryKey Association::history(int b) const {
    HistoryKey out;
    if (!nonempty(b)) return out;
    out.reserve(static_cast<std::size_t>(detections(b)));
    for (int g = b; g >= 0; g = next(g)) out.push_back(g);
    return out;
}

std::vector<HistoryKey> Association::histories() const {
    std::vector<HistoryKey> out(static_cast<std::size_t>(size()));
    for (int b = 0; b < size(); ++b) out[static_cast<std::size_t>(b)] = history(b);
    return out;
}

std::vector<int> Association::row(int k) const {
    const int first = offsets_.at(static_cast<std::size_t>(k - 1));
    const int last = offsets_.at(static_cast<std::size_t>(k));
    std::vector<int> out(static_cast<std::size_t>(last), 0);
    for (int g = first; g < last; ++g) out[static_cast<std::size_t>(owner(g))] = g - first + 1;
    return out;
}

AssociationRows Association::rows() const {
    AssociationRows out;
    out.reserve(static_cast<std::size_t>(horizon()));
    for (int k = 1; k <= horizon(); ++k) out.push_back(row(k));
    return out;
}

void Association::apply(std::span<const HistoryChange> changes) {
    std::vector<int> released;
    std::vector<int> claimed;
    std::vector<int> touched;
    for (const auto& c : changes) {
        if (c.bernoulli < 0 || c.bernoulli >= size()) throw std::invalid_argument("edit: bad Bernoulli index");
        touched.push_back(c.bernoulli);
        for (int g = nonempty(c.bernoulli) ? c.bernoulli : -1; g >= 0; g = next(g)) released.push_back(g);
        if (c.history.empty()) continue;
        if (c.history.front() != c.bernoulli)
            throw std::invalid_argument("edit: history must start with the creating measurement");
        int prev_scan = 0;
        for (int g : c.history) {
            if (g < 0 || g >= size()) throw std::invalid_argument("edit: measurement out of range");
            if (scan_of(g) <= prev_scan) throw std::invalid_argument("edit: scans must increase");
            prev_scan = scan_of(g);
            claimed.push_back(g);
        }
    }
    std::sort(touched.begin(), touched.end());
    if (std::adjacent_find(touched.begin(), touched.end()) != touched.end())
        throw std::invalid_argument("edit: Bernoulli changed twice");
    std::sort(released.begin(), released.end());
    std::sort(claimed.begin(), claimed.end());
    if (released != claimed) throw std::invalid_argument("edit: result is not a partition");
    for (const auto& c : changes) unlink(c.bernoulli);
    for (const auto& c : changes)
        if (!c.history.empty()) link(c.bernoulli, c.history);
}

void write_rows(std::ostream& out, const AssociationRows& rows) {
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ' ';
            out << row[i];
        }
        out << '\n';
    }
}

AssociationRows read_rows(std::istream& in, int scans) {
    AssociationRows rows;
    std::string line;
    for (int k = 0; k < scans; ++k) {
        if (!std::getline(in, line)) throw std::invalid_argument("association: missing rows");
        std::istringstream ls(line);
        std::vector<int> row;
        int v = 0;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw std::invalid_argument("association: non-integer entry in row " + std::to_string(k + 1));
        rows.push_back(std::move(row));
    }
    return rows;
}

double log_pi(const TpmbmEngine& engine, const Association& theta, WeightCache& cache) {
    CompensatedSum sum;
    for (int b = 0; b < theta.size(); ++b) {
        if (!theta.nonempty(b)) continue;
        const double w = engine.summary(theta.history(b), cache).log_weight;
        if (w == kNegInf) return kNegInf;
        sum.add(w);
    }
    return sum.value();
}

double log_pi(const TpmbmEngine& engine, const AssociationRows& rows, WeightCache& cache) {
    if (!validate_rows(engine.batch(), rows).ok()) return kNegInf;
    return log_pi(engine, Association::from_rows(engine.batch(), rows), cache);
}

std::vector<std::vector<double>> single_detection_weights(const TpmbmEngine& engine) {
    const auto& batch = engine.batch();
    std::vector<std::vector<double>> out(static_cast<std::size_t>(batch.horizon()));
    for (int k = 1; k <= batch.horizon(); ++k)
        for (int j = 1; j <= batch.count(k); ++j)
            out[static_cast<std::size_t>(k - 1)].push_back(
                engine.single_detection_log_weight(batch.global_index(k, j)));
    return out;
}

void ChainState::IndexSet::resize(int n) {
    member_.assign(static_cast<std::size_t>(n), 0);
    tree_.assign(static_cast<std::size_t>(n) + 1, 0);
    count_ = 0;
    top_bit_ = 1;
    while (top_bit_ * 2 <= n) top_bit_ *= 2;
}

void ChainState::IndexSet::set(int b, bool member) {
    auto& flag = member_[static_cast<std::size_t>(b)];
    if ((flag != 0) == member) return;
    flag = member ? 1 : 0;
    const int d = member ? 1 : -1;
    count_ += d;
    for (int x = b + 1; x < static_cast<int>(tree_.size()); x += x & -x) tree_[static_cast<std::size_t>(x)] += d;
}

int ChainState::IndexSet::select(int r) const {
    if (r < 0 || r >= count_) throw std::out_of_range("index set rank");
    int pos = 0;
    int remaining = r + 1;
    for (int step = top_bit_; step > 0; step >>= 1) {
        const int nx = pos + step;
        if (nx < static_cast<int>(tree_.size()) && tree_[static_cast<std::size_t>(nx)] < remaining) {
            pos = nx;
            remaining -= tree_[static_cast<std::size_t>(nx)];
        }
    }
    return pos;  // 1-based position pos + 1 holds the element, i.e. index pos
}

ChainState::ChainState(const TpmbmEngine& engine, Association theta)
    : engine_(&engine), theta_(std::move(theta)), cache_(engine.config()) {
    if (theta_.size() != engine.batch().total() || theta_.horizon() != engine.horizon())
        throw std::invalid_argument("association does not match the batch");
    const int n = theta_.size();
    summaries_.assign(static_cast<std::size_t>(n), HypothesisSummary{0.0, 0.0, -1});
    certain_.resize(n);
    possible_.resize(n);
    first_count_.assign(static_cast<std::size_t>(engine.horizon()) + 2, 0);
    last_count_.assign(static_cast<std::size_t>(engine.horizon()) + 2, 0);
    for (int b = 0; b < n; ++b) {
        if (!theta_.nonempty(b)) continue;
        summaries_[static_cast<std::size_t>(b)] = engine.summary(theta_.history(b), cache_);
        attach(b);
    }
    refresh_log_pi();
}

void ChainState::attach(int b) {
    const auto& s = summaries_[static_cast<std::size_t>(b)];
    certain_.set(b, s.existence == 1.0);
    possible_.set(b, s.existence > 0.0);
    if (theta_.nonempty(b)) {
        ++first_count_[static_cast<std::size_t>(theta_.first_scan(b))];
        ++last_count_[static_cast<std::size_t>(theta_.last_scan(b))];
    }
}

void ChainState::detach(int b) {
    certain_.set(b, false);
    possible_.set(b, false);
    if (theta_.nonempty(b)) {
        --first_count_[static_cast<std::size_t>(theta_.first_scan(b))];
        --last_count_[static_cast<std::size_t>(theta_.last_scan(b))];
    }
}

int ChainState::disjoint_count(int b) const {
    if (!theta_.nonempty(b)) return 0;
    const int K = engine_->horizon();
    int n = 0;
    for (int s = theta_.last_scan(b) + 1; s <= K; ++s) n += first_count_[static_cast<std::size_t>(s)];
    for (int s = 1; s < theta_.first_scan(b); ++s) n += last_count_[static_cast<std::size_t>(s)];
    return n;
}

int ChainState::disjoint_member(int b, int r) const {
    if (r < 0) throw std::out_of_range("disjoint_member rank");
    const auto& batch = engine_->batch();
    const int K = engine_->horizon();
    // Earlier chains (last detection before b's first) come first in scan order.
    for (int s = 1; s < theta_.first_scan(b); ++s) {
        const int c = last_count_[static_cast<std::size_t>(s)];
        if (r >= c) {
            r -= c;
            continue;
        }
        for (int g = batch.offset(s); g < batch.offset(s) + batch.count(s); ++g)
            if (theta_.next(g) == -1 && r-- == 0) return theta_.owner(g);
    }
    for (int s = theta_.last_scan(b) + 1; s <= K; ++s) {
        const int c = first_count_[static_cast<std::size_t>(s)];
        if (r >= c) {
            r -= c;
            continue;
        }
        for (int g = batch.offset(s); g < batch.offset(s) + batch.count(s); ++g)
            if (theta_.nonempty(g) && r-- == 0) return g;
    }
    throw std::out_of_range("disjoint_member rank");
}

ChainState::Preview ChainState::preview(std::span<const HistoryChange> changes) {
    Preview p;
    p.summaries.reserve(changes.size());
    bool new_impossible = false;
    bool old_impossible = false;
    CompensatedSum delta;
    for (const auto& c : changes) {
        const auto s = engine_->summary(c.history, cache_);
        const double old = summaries_[static_cast<std::size_t>(c.bernoulli)].log_weight;
        p.summaries.push_back(s);
        if (s.log_weight == kNegInf) new_impossible = true;
        if (old == kNegInf) old_impossible = true;
        if (!new_impossible && !old_impossible) {
            delta.add(s.log_weight);
            delta.add(-old);
        }
    }
    if (new_impossible)
        p.delta = kNegInf;
    else if (old_impossible)
        p.delta = std::numeric_limits<double>::infinity();
    else
        p.delta = delta.value();
    return p;
}

void ChainState::install(std::span<const HistoryChange> changes,
                         std::span<const HypothesisSummary> summaries) {
    for (const auto& c : changes) detach(c.bernoulli);
    try {
        theta_.apply(changes);
    } catch (...) {
        for (const auto& c : changes) attach(c.bernoulli);
        throw;
    }
    for (std::size_t q = 0; q < changes.size(); ++q) {
        const int b = changes[q].bernoulli;
        summaries_[static_cast<std::size_t>(b)] = summaries[q];
        attach(b);
    }
}

ChainState::Undo ChainState::commit(std::span<const HistoryChange> changes, const Preview& preview) {
    Undo token;
    token.log_pi = log_pi_;
    token.inverse.reserve(changes.size());
    token.summaries.reserve(changes.size());
    for (const auto& c : changes) {
        token.inverse.push_back({c.bernoulli, theta_.history(c.bernoulli)});
        token.summaries.push_back(summaries_[static_cast<std::size_t>(c.bernoulli)]);
    }
    install(changes, preview.summaries);
    if (std::isfinite(preview.delta) && std::isfinite(log_pi_))
        log_pi_ += preview.delta;
    else
        refresh_log_pi();
    return token;
}

ChainState::Undo ChainState::apply(std::span<const HistoryChange> changes) {
    return commit(changes, preview(changes));
}

void ChainState::undo(const Undo& token) {
    install(token.inverse, token.summaries);
    log_pi_ = token.log_pi;
}

double ChainState::refresh_log_pi() {
    CompensatedSum sum;
    for (int b = 0; b < theta_.size(); ++b)
        if (theta_.nonempty(b)) sum.add(summaries_[static_cast<std::size_t>(b)].log_weight);
    log_pi_ = sum.value();
    return log_pi_;
}

}  // namespace btpmbm
