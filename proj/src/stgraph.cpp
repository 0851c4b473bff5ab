#include "sitsgraph/stgraph.hpp"

#include "sitsgraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace sitsgraph {

using nlohmann::json;

namespace {

std::string kind_tag(EdgeKind k) { return k == EdgeKind::Spatial ? "S" : "ST"; }

EdgeKind parse_kind(const std::string& s) {
    if (s == "S") return EdgeKind::Spatial;
    if (s == "ST") return EdgeKind::SpatioTemporal;
    throw Error(Errc::ParseError, "edge kind must be S or ST, got '" + s + "'");
}

bool edge_less(const Edge& a, const Edge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); }

}  // namespace

// ---------------------------------------------------------------------------
// StGraph

StGraph::StGraph(std::vector<Node> nodes, std::vector<Edge> edges, FeatureMatrix features, json meta)
    : nodes_(std::move(nodes)), features_(std::move(features)), meta_(std::move(meta)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    int max_id = -1;
    t_min_ = std::numeric_limits<int>::max();
    t_max_ = -1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.id < 0) throw Error(Errc::InvalidArgument, "node ids must be >= 0");
        if (i > 0 && nodes_[i - 1].id == n.id) {
            throw Error(Errc::InvalidArgument, "duplicate node id " + std::to_string(n.id));
        }
        if (n.pixel_count < 1) throw Error(Errc::InvalidArgument, "node pixel_count must be >= 1");
        if (n.t < 0) throw Error(Errc::InvalidArgument, "node date index must be >= 0");
        if (n.feature_row >= features_.rows) {
            throw Error(Errc::DimMismatch, "node " + std::to_string(n.id) + " references missing feature row");
        }
        max_id = std::max(max_id, n.id);
        t_min_ = std::min(t_min_, n.t);
        t_max_ = std::max(t_max_, n.t);
    }
    if (nodes_.empty()) t_min_ = 0;
    id_lookup_.assign(std::size_t(max_id + 1), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) id_lookup_[std::size_t(nodes_[i].id)] = static_cast<int>(i);

    std::set<std::tuple<int, int, int>> seen;
    for (auto e : edges) {
        if (e.src == e.dst) throw Error(Errc::InvalidArgument, "self-loop on node " + std::to_string(e.src));
        if (!(e.weight >= 0.0)) throw Error(Errc::InvalidArgument, "edge weights must be >= 0");
        const auto& a = node(e.src);
        const auto& b = node(e.dst);
        if (e.kind == EdgeKind::Spatial) {
            if (a.t != b.t) {
                throw Error(Errc::InvalidArgument, "spatial edge " + std::to_string(e.src) + "-" +
                                                       std::to_string(e.dst) + " spans two dates");
            }
            if (e.src > e.dst) std::swap(e.src, e.dst);
        } else if (!(a.t < b.t)) {
            throw Error(Errc::InvalidArgument, "spatio-temporal edge " + std::to_string(e.src) + "->" +
                                                   std::to_string(e.dst) + " is not oriented past to future");
        }
        if (!seen.insert({e.src, e.dst, static_cast<int>(e.kind)}).second) continue;
        (e.kind == EdgeKind::Spatial ? spatial_ : st_).push_back(e);
    }
    std::sort(spatial_.begin(), spatial_.end(), edge_less);
    std::sort(st_.begin(), st_.end(), edge_less);

    const std::size_t n = nodes_.size();
    spatial_adj_.assign(n, {});
    st_in_.assign(n, {});
    st_out_.assign(n, {});
    st_out_edge_.assign(n, {});
    for (const auto& e : spatial_) {
        spatial_adj_[index_of(e.src)].push_back(e.dst);
        spatial_adj_[index_of(e.dst)].push_back(e.src);
    }
    for (std::size_t k = 0; k < st_.size(); ++k) {
        const auto& e = st_[k];
        st_out_[index_of(e.src)].push_back(e.dst);
        st_out_edge_[index_of(e.src)].push_back(static_cast<int>(k));
        st_in_[index_of(e.dst)].push_back(e.src);
    }
    for (auto* adj : {&spatial_adj_, &st_in_, &st_out_}) {
        for (auto& v : *adj) std::sort(v.begin(), v.end());
    }
}

bool StGraph::contains(int id) const {
    return id >= 0 && std::size_t(id) < id_lookup_.size() && id_lookup_[std::size_t(id)] >= 0;
}

std::size_t StGraph::index_of(int id) const {
    if (!contains(id)) throw Error(Errc::UnknownNode, "no node with id " + std::to_string(id));
    return std::size_t(id_lookup_[std::size_t(id)]);
}

std::span<const double> StGraph::features_of(int id) const {
    const auto& n = node(id);
    if (n.feature_row < 0) return {};
    return features_.row(n.feature_row);
}

std::vector<int> StGraph::neighborhood(int id, EdgeKind kind, Direction direction) const {
    const std::size_t i = index_of(id);
    if (kind == EdgeKind::Spatial) return spatial_adj_[i];
    if (direction == Direction::In) return st_in_[i];
    if (direction == Direction::Out) return st_out_[i];
    std::vector<int> out = st_in_[i];
    out.insert(out.end(), st_out_[i].begin(), st_out_[i].end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

int StGraph::st_in_degree(int id) const { return static_cast<int>(st_in_[index_of(id)].size()); }
int StGraph::st_out_degree(int id) const { return static_cast<int>(st_out_[index_of(id)].size()); }
int StGraph::spatial_degree(int id) const { return static_cast<int>(spatial_adj_[index_of(id)].size()); }

std::span<const int> StGraph::st_out_edges(int id) const { return st_out_edge_[index_of(id)]; }

bool StGraph::operator==(const StGraph& o) const {
    if (nodes_.size() != o.nodes_.size() || spatial_ != o.spatial_ || st_ != o.st_) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node a = nodes_[i], b = o.nodes_[i];
        a.feature_row = b.feature_row = -1;
        if (!(a == b)) return false;
        const auto fa = features_of(a.id), fb = o.features_of(b.id);
        if (!std::equal(fa.begin(), fa.end(), fb.begin(), fb.end())) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Builders

std::vector<Node> nodes_from_seg(const SegStack& seg, const LabelStack* class_labels) {
    if (class_labels && (class_labels->T != seg.T() || class_labels->H != seg.H() || class_labels->W != seg.W())) {
        throw Error(Errc::ShapeMismatch, "class labels do not match segmentation shape");
    }
    const int n = seg.total();
    std::vector<Node> nodes(static_cast<std::size_t>(n));
    std::vector<double> sum_r(std::size_t(n), 0.0), sum_c(std::size_t(n), 0.0);
    std::vector<int> count(std::size_t(n), 0);
    std::vector<std::map<int, int>> votes(class_labels ? std::size_t(n) : 0);
    for (int t = 0; t < seg.T(); ++t) {
        for (int h = 0; h < seg.H(); ++h) {
            for (int w = 0; w < seg.W(); ++w) {
                const int id = seg.labels.at(t, h, w);
                sum_r[std::size_t(id)] += h;
                sum_c[std::size_t(id)] += w;
                ++count[std::size_t(id)];
                if (class_labels) {
                    const int lab = class_labels->at(t, h, w);
                    if (lab >= 0) ++votes[std::size_t(id)][lab];
                }
            }
        }
    }
    for (int t = 0; t < seg.T(); ++t) {
        for (int k = 0; k < seg.counts[std::size_t(t)]; ++k) {
            const int id = seg.offsets[std::size_t(t)] + k;
            auto& nd = nodes[std::size_t(id)];
            nd.id = id;
            nd.t = t;
            nd.pixel_count = count[std::size_t(id)];
            nd.centroid_row = sum_r[std::size_t(id)] / count[std::size_t(id)];
            nd.centroid_col = sum_c[std::size_t(id)] / count[std::size_t(id)];
            nd.feature_row = id;
            if (class_labels && !votes[std::size_t(id)].empty()) {
                int best = -1, best_n = -1;
                for (auto [lab, c] : votes[std::size_t(id)]) {
                    if (c > best_n) {
                        best = lab;
                        best_n = c;
                    }
                }
                nd.label = best;
            }
        }
    }
    return nodes;
}

std::vector<Edge> adjacency_edges(const SegStack& seg, int t) {
    if (t < 0 || t >= seg.T()) throw Error(Errc::InvalidArgument, "date index out of range");
    const int H = seg.H(), W = seg.W();
    std::map<std::pair<int, int>, int> shared;
    auto add = [&](int a, int b) {
        if (a == b) return;
        if (a > b) std::swap(a, b);
        ++shared[{a, b}];
    };
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const int a = seg.labels.at(t, h, w);
            if (w + 1 < W) add(a, seg.labels.at(t, h, w + 1));
            if (h + 1 < H) add(a, seg.labels.at(t, h + 1, w));
        }
    }
    std::vector<Edge> out;
    out.reserve(shared.size());
    for (auto [key, n] : shared) out.push_back({key.first, key.second, EdgeKind::Spatial, double(n)});
    return out;
}

namespace {

void require_single_date(std::span<const Node> nodes) {
    for (const auto& n : nodes) {
        if (n.t != nodes.front().t) throw Error(Errc::InvalidArgument, "proximity edges need nodes of one date");
    }
}

double centroid_distance(const Node& a, const Node& b) {
    return std::hypot(a.centroid_row - b.centroid_row, a.centroid_col - b.centroid_col);
}

// Indices of the k nearest candidates by (distance, id).
std::vector<std::size_t> k_nearest(std::size_t self, const std::vector<std::size_t>& candidates,
                                   std::span<const Node> nodes, int k,
                                   const std::function<double(std::size_t, std::size_t)>& dist) {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(candidates.size());
    for (std::size_t j : candidates) {
        if (j != self) scored.push_back({dist(self, j), j});
    }
    const std::size_t take = std::min<std::size_t>(std::size_t(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [&](const auto& x, const auto& y) {
                          return std::tie(x.first, nodes[x.second].id) < std::tie(y.first, nodes[y.second].id);
                      });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}

void sort_unique(std::vector<Edge>& edges) {
    std::sort(edges.begin(), edges.end(), edge_less);
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const Edge& a, const Edge& b) { return a.src == b.src && a.dst == b.dst; }),
                edges.end());
}

}  // namespace

std::vector<Edge> eps_ball_edges(std::span<const Node> nodes, double eps) {
    if (!(eps > 0)) throw Error(Errc::InvalidArgument, "eps must be > 0");
    require_single_date(nodes);
    std::vector<Edge> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const double d = centroid_distance(nodes[i], nodes[j]);
            if (d <= eps) {
                out.push_back({std::min(nodes[i].id, nodes[j].id), std::max(nodes[i].id, nodes[j].id),
                               EdgeKind::Spatial, d});
            }
        }
    }
    sort_unique(out);
    return out;
}

std::vector<Edge> knn_edges(std::span<const Node> nodes, int k) {
    require_single_date(nodes);
    if (k < 1 || std::size_t(k) >= nodes.size()) {
        throw Error(Errc::TooFewNodes, "kNN needs 1 <= k < " + std::to_string(nodes.size()));
    }
    std::vector<std::size_t> all(nodes.size());
    std::iota(all.begin(), all.end(), 0);
    auto dist = [&](std::size_t a, std::size_t b) { return centroid_distance(nodes[a], nodes[b]); };
    std::vector<Edge> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j : k_nearest(i, all, nodes, k, dist)) {
            out.push_back({std::min(nodes[i].id, nodes[j].id), std::max(nodes[i].id, nodes[j].id),
                           EdgeKind::Spatial, dist(i, j)});
        }
    }
    sort_unique(out);
    return out;
}

std::vector<Edge> similarity_edges(const FeatureMatrix& fm, std::span<const Node> nodes, SimilarityScope scope,
                                   int k) {
    if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
    for (const auto& n : nodes) {
        if (n.feature_row < 0 || n.feature_row >= fm.rows) {
            throw Error(Errc::DimMismatch, "node " + std::to_string(n.id) + " has no feature row");
        }
    }
    auto dist = [&](std::size_t a, std::size_t b) {
        const auto x = fm.row(nodes[a].feature_row);
        const auto y = fm.row(nodes[b].feature_row);
        double s = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
        return std::sqrt(s);
    };
    std::map<int, std::vector<std::size_t>> by_date;
    for (std::size_t i = 0; i < nodes.size(); ++i) by_date[nodes[i].t].push_back(i);

    std::vector<Edge> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        std::vector<std::size_t> candidates;
        if (scope == SimilarityScope::WithinDate) {
            candidates = by_date[nodes[i].t];
        } else {
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                if (nodes[j].t != nodes[i].t) candidates.push_back(j);
            }
        }
        for (std::size_t j : k_nearest(i, candidates, nodes, k, dist)) {
            const double d = dist(i, j);
            const double w = std::exp(-d * d);
            if (scope == SimilarityScope::WithinDate) {
                out.push_back({std::min(nodes[i].id, nodes[j].id), std::max(nodes[i].id, nodes[j].id),
                               EdgeKind::Spatial, w});
            } else {
                const bool forward = nodes[i].t < nodes[j].t;
                out.push_back({forward ? nodes[i].id : nodes[j].id, forward ? nodes[j].id : nodes[i].id,
                               EdgeKind::SpatioTemporal, w});
            }
        }
    }
    sort_unique(out);
    return out;
}

namespace {

std::vector<Edge> footprint_edges(const SegStack& seg, int lag, int min_pixels) {
    if (min_pixels < 1) throw Error(Errc::InvalidArgument, "min_pixels must be >= 1");
    std::vector<int> area(std::size_t(seg.total()), 0);
    for (auto id : seg.labels.data) ++area[std::size_t(id)];
    std::vector<Edge> out;
    for (int t = 0; t + lag < seg.T(); ++t) {
        const auto a = seg.labels.plane(t);
        const auto b = seg.labels.plane(t + lag);
        std::map<std::pair<int, int>, int> inter;
        for (std::size_t p = 0; p < a.size(); ++p) ++inter[{a[p], b[p]}];
        for (auto [key, n] : inter) {
            if (n < min_pixels) continue;
            const int denom = std::min(area[std::size_t(key.first)], area[std::size_t(key.second)]);
            out.push_back({key.first, key.second, EdgeKind::SpatioTemporal, double(n) / denom});
        }
    }
    return out;
}

}  // namespace

std::vector<Edge> overlap_edges(const SegStack& seg, int min_pixels) { return footprint_edges(seg, 1, min_pixels); }

std::vector<Edge> periodic_edges(const SegStack& seg, int lag, int min_pixels) {
    if (lag < 2) throw Error(Errc::InvalidLag, "periodic lag must be >= 2, got " + std::to_string(lag));
    return footprint_edges(seg, lag, min_pixels);
}

std::vector<std::vector<Node>> nodes_by_date(std::span<const Node> nodes) {
    std::map<int, std::vector<Node>> groups;
    for (const auto& n : nodes) groups[n.t].push_back(n);
    std::vector<std::vector<Node>> out;
    for (auto& [t, v] : groups) out.push_back(std::move(v));
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

json GraphStats::to_json() const {
    auto hist = [](const std::map<int, int>& h) {
        json j = json::object();
        for (auto [k, v] : h) j[std::to_string(k)] = v;
        return j;
    };
    return {{"n_nodes", n_nodes},
            {"n_spatial_edges", n_spatial},
            {"n_st_edges", n_st},
            {"nodes_per_date", nodes_per_date},
            {"spatial_degree_hist", hist(spatial_degree_hist)},
            {"st_in_degree_hist", hist(st_in_degree_hist)},
            {"st_out_degree_hist", hist(st_out_degree_hist)},
            {"raw_units", raw_units},
            {"graph_units", graph_units},
            {"map_stored", map_stored},
            {"compression_ratio", compression_ratio}};
}

GraphStats graph_stats(const StGraph& g, const CubeShape& cube, int f_V, int f_E, bool map_stored) {
    GraphStats s;
    s.n_nodes = g.nodes().size();
    s.n_spatial = g.spatial_edges().size();
    s.n_st = g.st_edges().size();
    s.map_stored = map_stored;
    s.nodes_per_date.assign(std::size_t(std::max(cube.T, g.T())), 0);
    for (const auto& n : g.nodes()) {
        ++s.nodes_per_date[std::size_t(n.t)];
        ++s.spatial_degree_hist[g.spatial_degree(n.id)];
        ++s.st_in_degree_hist[g.st_in_degree(n.id)];
        ++s.st_out_degree_hist[g.st_out_degree(n.id)];
    }
    const double E = double(s.n_spatial + s.n_st);
    s.raw_units = double(cube.C) * cube.T * cube.H * cube.W;
    s.graph_units = double(f_V) * double(s.n_nodes) + (map_stored ? double(cube.T) * cube.H * cube.W : 0.0) + E +
                    double(f_E) * E;
    s.compression_ratio =
        s.graph_units > 0 ? s.raw_units / s.graph_units : std::numeric_limits<double>::infinity();
    return s;
}

std::vector<std::uint8_t> serialize_compact(const StGraph& g, const SegStack* object_map, int f_E) {
    std::vector<std::uint8_t> out;
    auto put = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    };
    const std::uint32_t header[4] = {static_cast<std::uint32_t>(g.nodes().size()),
                                     static_cast<std::uint32_t>(g.features().dim),
                                     static_cast<std::uint32_t>(g.edge_count()), static_cast<std::uint32_t>(f_E)};
    put(header, sizeof header);
    for (const auto& n : g.nodes()) {
        for (double v : g.features_of(n.id)) {
            const float f = static_cast<float>(v);
            put(&f, 4);
        }
    }
    if (object_map) put(object_map->labels.data.data(), object_map->labels.data.size() * 4);
    // CSR over nodes in index order; spatial edges listed once from src.
    std::vector<std::vector<std::int32_t>> targets(g.nodes().size());
    for (const auto* set : {&g.spatial_edges(), &g.st_edges()}) {
        for (const auto& e : *set) targets[g.index_of(e.src)].push_back(static_cast<std::int32_t>(g.index_of(e.dst)));
    }
    std::int32_t offset = 0;
    put(&offset, 4);
    for (const auto& t : targets) {
        offset += static_cast<std::int32_t>(t.size());
        put(&offset, 4);
    }
    for (const auto& t : targets) put(t.data(), t.size() * 4);
    for (const auto* set : {&g.spatial_edges(), &g.st_edges()}) {
        for (const auto& e : *set) {
            for (int k = 0; k < f_E; ++k) {
                const float w = static_cast<float>(e.weight);
                put(&w, 4);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export / import

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

json graph_to_json(const StGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes()) {
        json jn;
        jn["id"] = n.id;
        jn["t"] = n.t;
        jn["pixel_count"] = n.pixel_count;
        jn["centroid"] = {n.centroid_row, n.centroid_col};
        const auto f = g.features_of(n.id);
        jn["features"] = std::vector<double>(f.begin(), f.end());
        jn["label"] = n.label ? json(*n.label) : json(nullptr);
        nodes.push_back(std::move(jn));
    }
    json edges = json::array();
    for (const auto* set : {&g.spatial_edges(), &g.st_edges()}) {
        for (const auto& e : *set) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", kind_tag(e.kind)}, {"w", e.weight}});
    }
    json meta = g.meta();
    meta["feature_names"] = g.features().names;
    if (g.features().standardization) {
        meta["standardization"] = {{"mean", g.features().standardization->mean},
                                   {"std", g.features().standardization->std}};
    }
    return {{"nodes", nodes}, {"edges", edges}, {"meta", meta}};
}

std::string to_graphml(const StGraph& g) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
          "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
          "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
          "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
       << "  <key id=\"t\" for=\"node\" attr.name=\"t\" attr.type=\"int\"/>\n"
       << "  <key id=\"pixel_count\" for=\"node\" attr.name=\"pixel_count\" attr.type=\"int\"/>\n"
       << "  <key id=\"centroid_row\" for=\"node\" attr.name=\"centroid_row\" attr.type=\"double\"/>\n"
       << "  <key id=\"centroid_col\" for=\"node\" attr.name=\"centroid_col\" attr.type=\"double\"/>\n"
       << "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"int\"/>\n"
       << "  <key id=\"kind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n"
       << "  <key id=\"w\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
       << "  <graph id=\"G\" edgedefault=\"directed\">\n";
    for (const auto& n : g.nodes()) {
        os << "    <node id=\"n" << n.id << "\">"
           << "<data key=\"t\">" << n.t << "</data>"
           << "<data key=\"pixel_count\">" << n.pixel_count << "</data>"
           << "<data key=\"centroid_row\">" << fmt_double(n.centroid_row) << "</data>"
           << "<data key=\"centroid_col\">" << fmt_double(n.centroid_col) << "</data>";
        if (n.label) os << "<data key=\"label\">" << *n.label << "</data>";
        os << "</node>\n";
    }
    for (const auto* set : {&g.spatial_edges(), &g.st_edges()}) {
        for (const auto& e : *set) {
            os << "    <edge source=\"n" << e.src << "\" target=\"n" << e.dst << "\""
               << (e.kind == EdgeKind::Spatial ? " directed=\"false\"" : "") << ">"
               << "<data key=\"kind\">" << xml_escape(kind_tag(e.kind)) << "</data>"
               << "<data key=\"w\">" << fmt_double(e.weight) << "</data></edge>\n";
        }
    }
    os << "  </graph>\n</graphml>\n";
    return os.str();
}

// Node area is proportional to pixel_count.
std::string to_dot(const StGraph& g) {
    int max_px = 1;
    for (const auto& n : g.nodes()) max_px = std::max(max_px, n.pixel_count);
    std::ostringstream os;
    os << "digraph stgraph {\n  node [shape=circle, fixedsize=true, label=\"\"];\n";
    for (const auto& n : g.nodes()) {
        const double width = 0.1 + 0.9 * std::sqrt(double(n.pixel_count) / max_px);
        os << "  n" << n.id << " [t=" << n.t << ", pixel_count=" << n.pixel_count << ", width=" << fmt_double(width);
        if (n.label) os << ", class=" << *n.label;
        os << "];\n";
    }
    for (const auto& e : g.spatial_edges()) {
        os << "  n" << e.src << " -> n" << e.dst << " [kind=S, weight=" << fmt_double(e.weight)
           << ", dir=none, style=solid];\n";
    }
    for (const auto& e : g.st_edges()) {
        os << "  n" << e.src << " -> n" << e.dst << " [kind=ST, weight=" << fmt_double(e.weight)
           << ", style=dashed];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace

std::string export_graph(const StGraph& g, GraphFormat format) {
    switch (format) {
        case GraphFormat::Json: return graph_to_json(g).dump(1) + "\n";
        case GraphFormat::GraphMl: return to_graphml(g);
        case GraphFormat::Dot: return to_dot(g);
    }
    return {};
}

StGraph import_graph_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        std::vector<Node> nodes;
        FeatureMatrix fm;
        const auto& jn = j.at("nodes");
        for (std::size_t i = 0; i < jn.size(); ++i) {
            const auto& x = jn[i];
            Node n;
            n.id = x.at("id").get<int>();
            n.t = x.at("t").get<int>();
            n.pixel_count = x.at("pixel_count").get<int>();
            n.centroid_row = x.at("centroid").at(0).get<double>();
            n.centroid_col = x.at("centroid").at(1).get<double>();
            if (!x.at("label").is_null()) n.label = x["label"].get<int>();
            const auto f = x.value("features", std::vector<double>{});
            if (i == 0) fm.dim = static_cast<int>(f.size());
            if (static_cast<int>(f.size()) != fm.dim) throw Error(Errc::DimMismatch, "ragged node features");
            if (fm.dim > 0) {
                n.feature_row = fm.rows++;
                fm.data.insert(fm.data.end(), f.begin(), f.end());
            }
            nodes.push_back(n);
        }
        json meta = j.value("meta", json::object());
        if (meta.contains("feature_names")) {
            fm.names = meta["feature_names"].get<std::vector<std::string>>();
            meta.erase("feature_names");
        }
        if (meta.contains("standardization")) {
            fm.standardization = Standardization{meta["standardization"].at("mean").get<std::vector<double>>(),
                                                 meta["standardization"].at("std").get<std::vector<double>>()};
            meta.erase("standardization");
        }
        std::vector<Edge> edges;
        for (const auto& x : j.at("edges")) {
            edges.push_back({x.at("src").get<int>(), x.at("dst").get<int>(), parse_kind(x.at("kind").get<std::string>()),
                             x.at("w").get<double>()});
        }
        return StGraph(std::move(nodes), std::move(edges), std::move(fm), std::move(meta));
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("graph JSON: ") + e.what());
    }
}

void save_graph(const StGraph& g, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
    out << export_graph(g, GraphFormat::Json);
}

StGraph load_graph(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::MissingFile, file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return import_graph_json(ss.str());
}

}  // namespace sitsgraph
