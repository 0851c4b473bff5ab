#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/features.hpp"
#include "sitsgraph/segmentation.hpp"

#include <json.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sitsgraph {

enum class EdgeKind { Spatial, SpatioTemporal };

// One object slice: a segment of a single date.
struct Node {
    int id = 0;
    int t = 0;
    int pixel_count = 1;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    int feature_row = -1;  // row in the graph's FeatureMatrix, -1 = none
    std::optional<int> label;

    bool operator==(const Node&) const = default;
};

// Spatial edges are undirected and stored with src < dst; spatio-temporal
// edges point from the earlier to the later date.
struct Edge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Spatial;
    double weight = 1.0;

    bool operator==(const Edge&) const = default;
};

enum class Direction { In, Out, Both };

class StGraph {
public:
    StGraph() = default;
    // Validates and canonicalises: nodes sorted by id, spatial edges
    // oriented src < dst, duplicate (src, dst, kind) entries dropped keeping
    // the first, both edge sets sorted.
    StGraph(std::vector<Node> nodes, std::vector<Edge> edges, FeatureMatrix features = {},
            nlohmann::json meta = nlohmann::json::object());

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& spatial_edges() const { return spatial_; }
    const std::vector<Edge>& st_edges() const { return st_; }
    std::size_t edge_count() const { return spatial_.size() + st_.size(); }
    const FeatureMatrix& features() const { return features_; }
    const nlohmann::json& meta() const { return meta_; }
    nlohmann::json& meta() { return meta_; }

    bool contains(int id) const;
    std::size_t index_of(int id) const;  // throws UnknownNode
    const Node& node(int id) const { return nodes_[index_of(id)]; }
    std::span<const double> features_of(int id) const;

    int T() const { return t_max_ + 1; }
    int t_min() const { return t_min_; }
    int t_max() const { return t_max_; }

    // Spatial neighbours ignore `direction`; spatio-temporal ones are split
    // into incoming (past) and outgoing (future). Sorted by id.
    std::vector<int> neighborhood(int id, EdgeKind kind, Direction direction = Direction::Both) const;
    int st_in_degree(int id) const;
    int st_out_degree(int id) const;
    int spatial_degree(int id) const;

    // Outgoing ST edges of a node as indices into st_edges().
    std::span<const int> st_out_edges(int id) const;

    bool operator==(const StGraph& other) const;

private:
    std::vector<Node> nodes_;
    std::vector<Edge> spatial_;
    std::vector<Edge> st_;
    FeatureMatrix features_;
    nlohmann::json meta_ = nlohmann::json::object();
    std::vector<int> id_lookup_;  // id -> index, -1 when absent
    std::vector<std::vector<int>> spatial_adj_;
    std::vector<std::vector<int>> st_in_;
    std::vector<std::vector<int>> st_out_;
    std::vector<std::vector<int>> st_out_edge_;
    int t_min_ = 0;
    int t_max_ = -1;
};

// Nodes of a segmentation stack; node id = object id. With class labels, the
// node label is the modal non-negative label of its pixels.
std::vector<Node> nodes_from_seg(const SegStack& seg, const LabelStack* class_labels = nullptr);

// Region adjacency of date t under 4-connectivity, weight = number of
// boundary pixel pairs.
std::vector<Edge> adjacency_edges(const SegStack& seg, int t);

// Proximity graphs over nodes of one date, on centroid distance.
std::vector<Edge> eps_ball_edges(std::span<const Node> nodes, double eps);
std::vector<Edge> knn_edges(std::span<const Node> nodes, int k);

enum class SimilarityScope { WithinDate, CrossDate };

// k most similar nodes per node in feature space, weight exp(-d^2).
std::vector<Edge> similarity_edges(const FeatureMatrix& fm, std::span<const Node> nodes,
                                   SimilarityScope scope, int k);

// Footprint overlap between dates t and t + lag, weight |A n B| / min(|A|, |B|).
std::vector<Edge> overlap_edges(const SegStack& seg, int min_pixels = 1);
std::vector<Edge> periodic_edges(const SegStack& seg, int lag, int min_pixels = 1);

// Groups nodes by date, in date order.
std::vector<std::vector<Node>> nodes_by_date(std::span<const Node> nodes);

struct GraphStats {
    std::size_t n_nodes = 0;
    std::size_t n_spatial = 0;
    std::size_t n_st = 0;
    std::vector<int> nodes_per_date;
    std::map<int, int> spatial_degree_hist;
    std::map<int, int> st_in_degree_hist;
    std::map<int, int> st_out_degree_hist;
    double raw_units = 0.0;    // C*T*H*W
    double graph_units = 0.0;  // f_V*|V| + [T*H*W] + |E| + f_E*|E|
    double compression_ratio = 0.0;
    bool map_stored = true;

    nlohmann::json to_json() const;
};

GraphStats graph_stats(const StGraph& g, const CubeShape& cube, int f_V, int f_E, bool map_stored);

// Compact binary layout: float32 node features, optional int32 object map,
// CSR offsets (|V|+1) and int32 targets per directed edge, then f_E float32
// attributes per edge. Used to measure the actual storage footprint.
std::vector<std::uint8_t> serialize_compact(const StGraph& g, const SegStack* object_map, int f_E);

enum class GraphFormat { Json, GraphMl, Dot };

std::string export_graph(const StGraph& g, GraphFormat format);
StGraph import_graph_json(const std::string& text);
void save_graph(const StGraph& g, const fs::path& file);
StGraph load_graph(const fs::path& file);

}  // namespace sitsgraph
