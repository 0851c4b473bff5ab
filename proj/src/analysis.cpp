#include "sitsgraph/analysis.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/parallel.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace sitsgraph {

using nlohmann::json;

std::string_view event_name(EventKind e) {
    switch (e) {
        case EventKind::Appearance: return "appearance";
        case EventKind::Disappearance: return "disappearance";
        case EventKind::Split: return "split";
        case EventKind::Merge: return "merge";
        case EventKind::Continuation: return "continuation";
    }
    return "unknown";
}

std::vector<EventRecord> detect_events(const StGraph& g) {
    std::vector<EventRecord> out;
    for (const auto& n : g.nodes()) {
        const int in = g.st_in_degree(n.id);
        const int outd = g.st_out_degree(n.id);
        if (in == 0 && n.t > g.t_min()) out.push_back({n.id, EventKind::Appearance, n.t});
        if (outd == 0 && n.t < g.t_max()) out.push_back({n.id, EventKind::Disappearance, n.t});
        if (outd >= 2) out.push_back({n.id, EventKind::Split, n.t});
        if (in >= 2) out.push_back({n.id, EventKind::Merge, n.t});
        if (in == 1 && outd == 1) out.push_back({n.id, EventKind::Continuation, n.t});
    }
    return out;
}

std::vector<ProfileSample> temporal_profile(const StGraph& g, int seed, int feature_index, Direction direction) {
    if (direction == Direction::Both) throw Error(Errc::InvalidArgument, "profile direction must be In or Out");
    auto value_of = [&](int id) {
        const auto f = g.features_of(id);
        if (feature_index < 0 || std::size_t(feature_index) >= f.size()) {
            throw Error(Errc::DimMismatch, "feature index " + std::to_string(feature_index) + " out of range");
        }
        return f[std::size_t(feature_index)];
    };

    // Heaviest edge per node in the walking direction.
    std::map<int, std::pair<double, int>> best;
    for (const auto& e : g.st_edges()) {
        const int from = direction == Direction::Out ? e.src : e.dst;
        const int to = direction == Direction::Out ? e.dst : e.src;
        auto it = best.find(from);
        if (it == best.end() || e.weight > it->second.first ||
            (e.weight == it->second.first && to < it->second.second)) {
            best[from] = {e.weight, to};
        }
    }

    std::vector<ProfileSample> out;
    int cur = seed;
    out.push_back({g.node(cur).t, cur, value_of(cur)});
    for (auto it = best.find(cur); it != best.end(); it = best.find(cur)) {
        cur = it->second.second;
        out.push_back({g.node(cur).t, cur, value_of(cur)});
    }
    return out;
}

std::vector<double> coverage_indicator(const StGraph& g, std::span<const int> subset, long frame_pixels) {
    if (frame_pixels <= 0) throw Error(Errc::InvalidArgument, "frame_pixels must be > 0");
    std::vector<double> covered(std::size_t(std::max(g.T(), 0)), 0.0);
    std::vector<int> ids(subset.begin(), subset.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
        const auto& n = g.node(id);
        covered[std::size_t(n.t)] += n.pixel_count;
    }
    for (auto& c : covered) c /= double(frame_pixels);
    return covered;
}

Symbolization symbolize(const FeatureMatrix& fm, int feature_index, int n_bins) {
    if (n_bins < 2) throw Error(Errc::InvalidArgument, "n_bins must be >= 2");
    if (feature_index < 0 || feature_index >= fm.dim) {
        throw Error(Errc::DimMismatch, "feature index " + std::to_string(feature_index) + " out of range");
    }
    Symbolization s;
    s.symbols.assign(std::size_t(fm.rows), 0);
    if (fm.rows == 0) return s;
    std::vector<double> sorted(std::size_t(fm.rows));
    for (int r = 0; r < fm.rows; ++r) sorted[std::size_t(r)] = fm.at(r, feature_index);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
        s.degenerate = true;
        return s;
    }
    const std::size_t n = sorted.size();
    for (int k = 1; k < n_bins; ++k) s.bin_edges.push_back(sorted[std::size_t(k) * n / std::size_t(n_bins)]);
    for (int r = 0; r < fm.rows; ++r) {
        const double v = fm.at(r, feature_index);
        s.symbols[std::size_t(r)] =
            static_cast<int>(std::upper_bound(s.bin_edges.begin(), s.bin_edges.end(), v) - s.bin_edges.begin());
    }
    return s;
}

std::vector<int> node_symbols(const StGraph& g, const Symbolization& s) {
    std::vector<int> out;
    out.reserve(g.nodes().size());
    for (const auto& n : g.nodes()) {
        if (n.feature_row < 0 || std::size_t(n.feature_row) >= s.symbols.size()) {
            throw Error(Errc::DimMismatch, "node " + std::to_string(n.id) + " has no symbol");
        }
        out.push_back(s.symbols[std::size_t(n.feature_row)]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frequent path patterns

namespace {

// An occurrence is a (start node, end node) pair, by node index.
using Occurrence = std::pair<int, int>;

class PrefixMiner {
public:
    PrefixMiner(const StGraph& g, std::span<const int> symbols, int minsup, int maxlen)
        : g_(g), symbols_(symbols), minsup_(minsup), maxlen_(maxlen) {
        out_.resize(g.nodes().size());
        for (const auto& e : g.st_edges()) {
            out_[g.index_of(e.src)].push_back(static_cast<int>(g.index_of(e.dst)));
        }
        for (auto& v : out_) std::sort(v.begin(), v.end());
    }

    void grow(std::vector<int>& prefix, std::vector<Occurrence>& occ, std::vector<Pattern>& found) const {
        const int support = count_starts(occ);
        if (support < minsup_) return;
        found.push_back({prefix, support, example(prefix, occ.front())});
        if (static_cast<int>(prefix.size()) >= maxlen_) return;
        std::map<int, std::vector<Occurrence>> ext;
        for (auto [start, end] : occ) {
            for (int nxt : out_[std::size_t(end)]) ext[symbols_[std::size_t(nxt)]].push_back({start, nxt});
        }
        for (auto& [sym, next] : ext) {
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            prefix.push_back(sym);
            grow(prefix, next, found);
            prefix.pop_back();
        }
    }

private:
    static int count_starts(const std::vector<Occurrence>& occ) {
        int n = 0;
        for (std::size_t i = 0; i < occ.size(); ++i) {
            if (i == 0 || occ[i].first != occ[i - 1].first) ++n;
        }
        return n;
    }

    // One concrete path from occ.first to occ.second spelling `prefix`.
    std::vector<int> example(const std::vector<int>& prefix, Occurrence occ) const {
        std::vector<int> path{occ.first};
        if (find_path(path, prefix, occ.second)) {
            std::vector<int> ids;
            for (int idx : path) ids.push_back(g_.nodes()[std::size_t(idx)].id);
            return ids;
        }
        return {};
    }

    bool find_path(std::vector<int>& path, const std::vector<int>& prefix, int target) const {
        if (path.size() == prefix.size()) return path.back() == target;
        for (int nxt : out_[std::size_t(path.back())]) {
            if (symbols_[std::size_t(nxt)] != prefix[path.size()]) continue;
            path.push_back(nxt);
            if (find_path(path, prefix, target)) return true;
            path.pop_back();
        }
        return false;
    }

    const StGraph& g_;
    std::span<const int> symbols_;
    int minsup_;
    int maxlen_;
    std::vector<std::vector<int>> out_;
};

}  // namespace

std::vector<Pattern> mine_frequent(const StGraph& g, std::span<const int> symbols, int minsup, int maxlen) {
    if (minsup < 1) throw Error(Errc::InvalidArgument, "minsup must be >= 1");
    if (symbols.size() != g.nodes().size()) {
        throw Error(Errc::DimMismatch, "need one symbol per node");
    }
    if (maxlen <= 0) maxlen = std::max(1, g.T());

    std::map<int, std::vector<Occurrence>> roots;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        roots[symbols[i]].push_back({static_cast<int>(i), static_cast<int>(i)});
    }
    std::vector<std::pair<int, std::vector<Occurrence>>> branches(roots.begin(), roots.end());
    std::vector<std::vector<Pattern>> found(branches.size());
    const PrefixMiner miner(g, symbols, minsup, maxlen);
    parallel_for(branches.size(), [&](std::size_t b) {
        std::vector<int> prefix{branches[b].first};
        miner.grow(prefix, branches[b].second, found[b]);
    });

    std::vector<Pattern> out;
    for (auto& f : found) out.insert(out.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
    std::sort(out.begin(), out.end(), [](const Pattern& a, const Pattern& b) {
        if (a.symbols.size() != b.symbols.size()) return a.symbols.size() < b.symbols.size();
        return a.symbols < b.symbols;
    });
    return out;
}

std::string events_to_csv(const std::vector<EventRecord>& events) {
    std::ostringstream os;
    os << "node,event,t\n";
    for (const auto& e : events) os << e.node << ',' << event_name(e.event) << ',' << e.t << '\n';
    return os.str();
}

json events_to_json(const std::vector<EventRecord>& events) {
    json out = json::array();
    for (const auto& e : events) out.push_back({{"node", e.node}, {"event", event_name(e.event)}, {"t", e.t}});
    return out;
}

namespace {
std::string pattern_string(const std::vector<int>& symbols) {
    std::string s;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(symbols[i]);
    }
    return s;
}
}  // namespace

std::string patterns_to_csv(const std::vector<Pattern>& patterns) {
    std::ostringstream os;
    os << "pattern,support\n";
    for (const auto& p : patterns) os << pattern_string(p.symbols) << ',' << p.support << '\n';
    return os.str();
}

json patterns_to_json(const std::vector<Pattern>& patterns) {
    json out = json::array();
    for (const auto& p : patterns) {
        out.push_back({{"pattern", p.symbols}, {"support", p.support}, {"example_path", p.example_path}});
    }
    return out;
}

}  // namespace sitsgraph
