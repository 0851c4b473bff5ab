#pragma once

#include "sitsgraph/datacube.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sitsgraph {

// Single-date partition: one non-negative segment id per pixel, row-major.
struct LabelMap {
    int H = 0;
    int W = 0;
    std::vector<std::int32_t> data;

    std::int32_t at(int h, int w) const { return data[std::size_t(h) * W + w]; }
    int count() const;  // number of distinct ids (ids are 0-based and dense)
};

// Graph-based segmentation on the 8-connected grid. Edge weight is the
// Euclidean distance between pixel band vectors, the merge threshold is
// scale / |component|, and components below min_size are merged along the
// lightest remaining edges. Output ids are dense in raster order.
LabelMap felzenszwalb(const ImageView& image, double scale, int min_size);

// k-means superpixels in joint (band, row, col) space with
// d = sqrt(d_band^2 + (compactness * d_xy / S)^2), S = sqrt(H*W / n_segments).
// Every output segment is 4-connected; at most one segment per grid centre.
LabelMap slic(const ImageView& image, int n_segments, double compactness, int iters = 10);

enum class SegAlgorithm { Felzenszwalb, Slic };

struct SegParams {
    SegAlgorithm algorithm = SegAlgorithm::Felzenszwalb;
    double scale = 100.0;
    int min_size = 5;
    int n_segments = 256;
    double compactness = 0.1;
    int iters = 10;
    std::vector<int> bands;  // empty = all bands

    nlohmann::json to_json() const;
    static SegParams from_json(const nlohmann::json& j);
};

std::string algorithm_name(SegAlgorithm a);

// Per-date object maps with ids unique across dates: date t owns ids
// [offsets[t], offsets[t] + counts[t]).
struct SegStack {
    LabelStack labels;
    std::vector<int> counts;
    std::vector<int> offsets;
    SegParams params;

    int T() const { return labels.T; }
    int H() const { return labels.H; }
    int W() const { return labels.W; }
    int total() const { return offsets.empty() ? 0 : offsets.back() + counts.back(); }
    int date_of(int id) const;
};

// Assembles per-date maps into a stack, offsetting ids by date.
SegStack stack_segmentations(const std::vector<LabelMap>& per_date, SegParams params);

SegStack segment_cube(const SitsCube& cube, const SegParams& params);

void save_seg(const SegStack& seg, const fs::path& dir);
SegStack load_seg(const fs::path& dir);

}  // namespace sitsgraph
