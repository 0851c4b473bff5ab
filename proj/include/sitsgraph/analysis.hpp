#pragma once

#include "sitsgraph/features.hpp"
#include "sitsgraph/stgraph.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sitsgraph {

enum class EventKind { Appearance, Disappearance, Split, Merge, Continuation };

std::string_view event_name(EventKind e);

struct EventRecord {
    int node = 0;
    EventKind event = EventKind::Continuation;
    int t = 0;

    bool operator==(const EventRecord&) const = default;
};

// Degree-based evolution events on the spatio-temporal edges. Records are
// ordered by node id, then event kind; a node may carry several events.
std::vector<EventRecord> detect_events(const StGraph& g);

struct ProfileSample {
    int t = 0;
    int node = 0;
    double value = 0.0;
};

// Follows the heaviest ST edge (ties to the lower id) from `seed` forward
// (Direction::Out) or backward (Direction::In) until no edge remains.
std::vector<ProfileSample> temporal_profile(const StGraph& g, int seed, int feature_index,
                                            Direction direction = Direction::Out);

// Fraction of frame pixels covered by `subset` on each date 0..T-1.
std::vector<double> coverage_indicator(const StGraph& g, std::span<const int> subset, long frame_pixels);

struct Symbolization {
    std::vector<int> symbols;       // one per feature row
    std::vector<double> bin_edges;  // n_bins - 1 ascending edges
    bool degenerate = false;        // all values equal: every symbol is 0
};

// Equal-frequency binning: edge k is the value at sorted position
// floor(k * n / n_bins); a value's symbol is the number of edges <= value.
Symbolization symbolize(const FeatureMatrix& fm, int feature_index, int n_bins);

// Maps per-feature-row symbols onto node index order.
std::vector<int> node_symbols(const StGraph& g, const Symbolization& s);

struct Pattern {
    std::vector<int> symbols;
    int support = 0;
    std::vector<int> example_path;  // node ids of one occurrence

    bool operator==(const Pattern& o) const { return symbols == o.symbols && support == o.support; }
};

// All symbol sequences realised along directed ST paths with support (number
// of distinct start nodes) >= minsup and length <= maxlen, found by
// depth-first prefix extension. `symbols` is indexed like g.nodes().
// maxlen <= 0 defaults to the number of dates. Sorted by (length, symbols).
std::vector<Pattern> mine_frequent(const StGraph& g, std::span<const int> symbols, int minsup, int maxlen = 0);

std::string events_to_csv(const std::vector<EventRecord>& events);
nlohmann::json events_to_json(const std::vector<EventRecord>& events);
std::string patterns_to_csv(const std::vector<Pattern>& patterns);
nlohmann::json patterns_to_json(const std::vector<Pattern>& patterns);

}  // namespace sitsgraph
