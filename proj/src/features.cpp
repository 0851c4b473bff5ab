#include "sitsgraph/features.hpp"

#include "sitsgraph/error.hpp"
#include "sitsgraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace sitsgraph {

namespace {
constexpr double kStdFloor = 1e-8;
}

FeatureMatrix band_stats(const SitsCube& cube, const SegStack& seg) {
    if (seg.T() != cube.T() || seg.H() != cube.H() || seg.W() != cube.W()) {
        throw Error(Errc::ShapeMismatch, "segmentation does not match cube shape");
    }
    const int C = cube.C();
    std::vector<std::string> names;
    for (const auto& b : cube.bands()) {
        for (const char* stat : {"mean", "std", "min", "max"}) names.push_back(b + "_" + stat);
    }
    FeatureMatrix fm(seg.total(), 4 * C, std::move(names));
    std::vector<char> empty(std::size_t(seg.total()), 0);

    parallel_for(std::size_t(cube.T()), [&](std::size_t tt) {
        const int t = static_cast<int>(tt);
        const int offset = seg.offsets[tt];
        const int n = seg.counts[tt];
        const auto labels = seg.labels.plane(t);
        for (int c = 0; c < C; ++c) {
            std::vector<double> sum(std::size_t(n), 0.0), sum2(std::size_t(n), 0.0);
            std::vector<double> lo(std::size_t(n), std::numeric_limits<double>::infinity());
            std::vector<double> hi(std::size_t(n), -std::numeric_limits<double>::infinity());
            std::vector<long> count(std::size_t(n), 0);
            const auto plane = cube.plane(t, c);
            for (std::size_t p = 0; p < plane.size(); ++p) {
                const float v = plane[p];
                if (cube.is_nodata(v)) continue;
                const std::size_t k = std::size_t(labels[p] - offset);
                sum[k] += v;
                sum2[k] += double(v) * v;
                lo[k] = std::min(lo[k], double(v));
                hi[k] = std::max(hi[k], double(v));
                ++count[k];
            }
            for (int k = 0; k < n; ++k) {
                const int row = offset + k;
                if (count[std::size_t(k)] == 0) {
                    empty[std::size_t(row)] = 1;
                    continue;
                }
                const double m = sum[std::size_t(k)] / count[std::size_t(k)];
                const double var = std::max(0.0, sum2[std::size_t(k)] / count[std::size_t(k)] - m * m);
                // Clamp against rounding so that min <= mean <= max holds exactly.
                fm.at(row, 4 * c + 0) = std::clamp(m, lo[std::size_t(k)], hi[std::size_t(k)]);
                fm.at(row, 4 * c + 1) = std::sqrt(var);
                fm.at(row, 4 * c + 2) = lo[std::size_t(k)];
                fm.at(row, 4 * c + 3) = hi[std::size_t(k)];
            }
        }
    });
    for (int r = 0; r < fm.rows; ++r) {
        if (empty[std::size_t(r)]) {
            fm.all_nodata_rows.push_back(r);
            for (int c = 0; c < fm.dim; ++c) fm.at(r, c) = 0.0;
        }
    }
    return fm;
}

FeatureMatrix geom_features(const SegStack& seg) {
    FeatureMatrix fm(seg.total(), 4, {"area_pixels", "centroid_row", "centroid_col", "date_index"});
    for (int t = 0; t < seg.T(); ++t) {
        const auto labels = seg.labels.plane(t);
        for (int h = 0; h < seg.H(); ++h) {
            for (int w = 0; w < seg.W(); ++w) {
                const int id = labels[std::size_t(h) * seg.W() + w];
                fm.at(id, 0) += 1.0;
                fm.at(id, 1) += h;
                fm.at(id, 2) += w;
            }
        }
        for (int k = 0; k < seg.counts[std::size_t(t)]; ++k) {
            const int id = seg.offsets[std::size_t(t)] + k;
            const double area = fm.at(id, 0);
            if (area > 0) {
                fm.at(id, 1) /= area;
                fm.at(id, 2) /= area;
            }
            fm.at(id, 3) = t;
        }
    }
    return fm;
}

FeatureMatrix hconcat(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.rows != b.rows) throw Error(Errc::DimMismatch, "row counts differ");
    std::vector<std::string> names = a.names;
    names.insert(names.end(), b.names.begin(), b.names.end());
    FeatureMatrix out(a.rows, a.dim + b.dim, std::move(names));
    for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < a.dim; ++c) out.at(r, c) = a.at(r, c);
        for (int c = 0; c < b.dim; ++c) out.at(r, a.dim + c) = b.at(r, c);
    }
    out.all_nodata_rows = a.all_nodata_rows;
    out.all_nodata_rows.insert(out.all_nodata_rows.end(), b.all_nodata_rows.begin(), b.all_nodata_rows.end());
    std::sort(out.all_nodata_rows.begin(), out.all_nodata_rows.end());
    out.all_nodata_rows.erase(std::unique(out.all_nodata_rows.begin(), out.all_nodata_rows.end()),
                              out.all_nodata_rows.end());
    return out;
}

std::array<double, 4> pos_encoding(const PixelGeo& p) {
    constexpr double deg = std::numbers::pi / 180.0;
    return {std::sin(p.lat * deg), std::sin(p.lon * deg), std::cos(p.lon * deg),
            std::sin(2.0 * std::numbers::pi * p.doy)};
}

Standardization fit_standardization(const FeatureMatrix& fm, std::span<const int> rows) {
    std::vector<int> all;
    if (rows.empty()) {
        all.resize(std::size_t(fm.rows));
        for (int r = 0; r < fm.rows; ++r) all[std::size_t(r)] = r;
        rows = all;
    }
    Standardization s{std::vector<double>(std::size_t(fm.dim), 0.0), std::vector<double>(std::size_t(fm.dim), 0.0)};
    if (rows.empty()) return s;
    for (int c = 0; c < fm.dim; ++c) {
        double sum = 0.0;
        for (int r : rows) sum += fm.at(r, c);
        const double m = sum / double(rows.size());
        double ss = 0.0;
        for (int r : rows) ss += (fm.at(r, c) - m) * (fm.at(r, c) - m);
        s.mean[std::size_t(c)] = m;
        s.std[std::size_t(c)] = std::sqrt(ss / double(rows.size()));
    }
    return s;
}

FeatureMatrix standardize(const FeatureMatrix& fm, const std::optional<Standardization>& stats) {
    const Standardization s = stats ? *stats : fit_standardization(fm);
    if (s.mean.size() != std::size_t(fm.dim) || s.std.size() != std::size_t(fm.dim)) {
        throw Error(Errc::DimMismatch, "standardization has " + std::to_string(s.mean.size()) +
                                           " columns, features have " + std::to_string(fm.dim));
    }
    FeatureMatrix out = fm;
    for (int r = 0; r < fm.rows; ++r) {
        for (int c = 0; c < fm.dim; ++c) {
            out.at(r, c) = (fm.at(r, c) - s.mean[std::size_t(c)]) / std::max(s.std[std::size_t(c)], kStdFloor);
        }
    }
    out.standardization = s;
    return out;
}

void write_features_csv(const FeatureMatrix& fm, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
    out << "id";
    for (const auto& n : fm.names) out << ',' << n;
    out << '\n';
    out.precision(17);
    for (int r = 0; r < fm.rows; ++r) {
        out << r;
        for (int c = 0; c < fm.dim; ++c) out << ',' << fm.at(r, c);
        out << '\n';
    }
}

FeatureMatrix read_features_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::MissingFile, file.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::ParseError, file.string() + " is empty");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // id
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    FeatureMatrix fm(0, static_cast<int>(names.size()), names);
    int expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        if (std::stoi(cell) != expected) throw Error(Errc::ParseError, "feature rows must be ordered by id");
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            fm.data.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != fm.dim) throw Error(Errc::DimMismatch, "row " + cell + " has wrong column count");
        ++expected;
    }
    fm.rows = expected;
    return fm;
}

}  // namespace sitsgraph
