#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/segmentation.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sitsgraph {

struct Standardization {
    std::vector<double> mean;
    std::vector<double> std;
};

// Row-major object attribute table; row i belongs to object id i.
struct FeatureMatrix {
    int rows = 0;
    int dim = 0;
    std::vector<double> data;
    std::vector<std::string> names;
    std::optional<Standardization> standardization;
    // Objects whose pixels were all nodata; their rows hold zeros.
    std::vector<int> all_nodata_rows;

    FeatureMatrix() = default;
    FeatureMatrix(int r, int d, std::vector<std::string> n = {})
        : rows(r), dim(d), data(std::size_t(r) * d, 0.0), names(std::move(n)) {}

    double& at(int r, int c) { return data[std::size_t(r) * dim + c]; }
    double at(int r, int c) const { return data[std::size_t(r) * dim + c]; }
    std::span<const double> row(int r) const { return {data.data() + std::size_t(r) * dim, std::size_t(dim)}; }
    bool warning() const { return !all_nodata_rows.empty(); }
};

// Per object and band: [mean, std, min, max] (population std), nodata excluded.
FeatureMatrix band_stats(const SitsCube& cube, const SegStack& seg);

// Per object: [area_pixels, centroid_row, centroid_col, date_index].
FeatureMatrix geom_features(const SegStack& seg);

// Column-wise concatenation; row counts must agree.
FeatureMatrix hconcat(const FeatureMatrix& a, const FeatureMatrix& b);

// [sin(lat), sin(lon), cos(lon), sin(2*pi*doy)] with angles in degrees on input.
std::array<double, 4> pos_encoding(const PixelGeo& p);

// Mean and population std per column over the given rows (all rows if empty).
Standardization fit_standardization(const FeatureMatrix& fm, std::span<const int> rows = {});

// (x - mean) / max(std, 1e-8) column-wise. Without `stats` they are fitted on
// all rows. The stats used are recorded on the result.
FeatureMatrix standardize(const FeatureMatrix& fm, const std::optional<Standardization>& stats = std::nullopt);

void write_features_csv(const FeatureMatrix& fm, const fs::path& file);
FeatureMatrix read_features_csv(const fs::path& file);

}  // namespace sitsgraph
