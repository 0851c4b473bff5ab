#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sitsgraph {

namespace fs = std::filesystem;

// Proleptic Gregorian calendar date.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static Date parse(std::string_view iso);  // "YYYY-MM-DD"
    std::string to_string() const;
    std::int64_t days_since_epoch() const;
    static Date from_days(std::int64_t days);
    int day_of_year() const;  // 1-based
    Date plus_days(int n) const { return from_days(days_since_epoch() + n); }

    auto operator<=>(const Date&) const = default;
};

// Day-of-year phase in [0,1) on a fixed 365-day year.
double doy_fraction(const Date& d);

struct GeoBounds {
    double lat0 = 0.0;
    double lat1 = 0.0;
    double lon0 = 0.0;
    double lon1 = 0.0;
};

struct CubeShape {
    int T = 0;
    int C = 0;
    int H = 0;
    int W = 0;

    std::size_t size() const { return std::size_t(T) * C * H * W; }
};

// Read-only view of one date: C planes of H*W floats, band-major.
struct ImageView {
    std::span<const float> data;
    int C = 0;
    int H = 0;
    int W = 0;

    float at(int c, int h, int w) const { return data[(std::size_t(c) * H + h) * W + w]; }
};

// Owning C x H x W image, used when a segmentation input is assembled from
// several dates or a band subset.
struct Image {
    std::vector<float> data;
    int C = 0;
    int H = 0;
    int W = 0;

    ImageView view() const { return {data, C, H, W}; }
};

class SitsCube {
public:
    SitsCube() = default;
    SitsCube(CubeShape shape, std::vector<float> values, std::vector<Date> timestamps,
             std::vector<std::string> bands, GeoBounds geo = {},
             std::optional<float> nodata = std::nullopt);

    const CubeShape& shape() const { return shape_; }
    int T() const { return shape_.T; }
    int C() const { return shape_.C; }
    int H() const { return shape_.H; }
    int W() const { return shape_.W; }

    float at(int t, int c, int h, int w) const {
        return values_[((std::size_t(t) * shape_.C + c) * shape_.H + h) * shape_.W + w];
    }
    std::span<const float> values() const { return values_; }
    std::span<const float> plane(int t, int c) const;
    ImageView image(int t) const;
    // Selected bands of date t as an owning image; empty selection = all bands.
    Image image(int t, std::span<const int> bands) const;

    const std::vector<Date>& timestamps() const { return timestamps_; }
    const std::vector<std::string>& bands() const { return bands_; }
    const GeoBounds& geo() const { return geo_; }
    const std::optional<float>& nodata() const { return nodata_; }

    int band_index(std::string_view name) const;
    // NaN is always nodata; the declared sentinel is too.
    bool is_nodata(float v) const;

private:
    CubeShape shape_;
    std::vector<float> values_;
    std::vector<Date> timestamps_;
    std::vector<std::string> bands_;
    GeoBounds geo_;
    std::optional<float> nodata_;
};

// Per-date integer maps (class labels or object ids), row-major per date.
struct LabelStack {
    int T = 0;
    int H = 0;
    int W = 0;
    std::vector<std::int32_t> data;

    LabelStack() = default;
    LabelStack(int t, int h, int w, std::int32_t fill = 0)
        : T(t), H(h), W(w), data(std::size_t(t) * h * w, fill) {}

    std::int32_t& at(int t, int h, int w) { return data[(std::size_t(t) * H + h) * W + w]; }
    std::int32_t at(int t, int h, int w) const { return data[(std::size_t(t) * H + h) * W + w]; }
    std::span<std::int32_t> plane(int t) { return {data.data() + std::size_t(t) * H * W, std::size_t(H) * W}; }
    std::span<const std::int32_t> plane(int t) const {
        return {data.data() + std::size_t(t) * H * W, std::size_t(H) * W};
    }
};

SitsCube load_cube(const fs::path& dir);
void save_cube(const SitsCube& cube, const fs::path& dir);

bool has_labels(const fs::path& dir);
LabelStack load_labels(const fs::path& dir, int T, int H, int W);
void save_labels(const LabelStack& labels, const fs::path& dir);

// Raw little-endian blobs shared by the cube, label and segmentation files.
std::vector<float> read_f32(const fs::path& file);
void write_f32(const fs::path& file, std::span<const float> values);
std::vector<std::int32_t> read_i32(const fs::path& file);
void write_i32(const fs::path& file, std::span<const std::int32_t> values);

// (g - n) / (g + n), 0 where |g + n| < 1e-12, nodata propagated as NaN.
SitsCube ndwi(const SitsCube& cube, std::string_view green_band, std::string_view nir_band);

struct PixelGeo {
    int row = 0;
    int col = 0;
    double lat = 0.0;
    double lon = 0.0;
    double doy = 0.0;
};

// Pixel-centre georeference on the linear bounds, doy taken from date t.
PixelGeo pixel_geo(const SitsCube& cube, int row, int col, int t);
PixelGeo pixel_geo(const GeoBounds& geo, int H, int W, int row, int col, const Date& date);

// Seven land-cover style classes used by the synthetic generators.
inline constexpr int kSynthClasses = 7;
std::string_view synth_class_name(int cls);

struct SeasonalSpec {
    int T = 12;
    int H = 32;
    int W = 32;
    int n_blobs = 6;
    int period_dates = 6;
    double noise_sigma = 0.02;
    Date start{2020, 1, 15};
    int step_days = 30;
    GeoBounds geo{43.0, 43.5, 1.0, 1.5};
};

// Two-layer context fixture: a checkerboard of square cells where "context"
// cells carry a low or high value and "target" cells carry an uninformative
// value; a target's class is decided by the fraction of high neighbours.
struct ContextSpec {
    int T = 2;
    int cells = 8;     // cells per side
    int cell_px = 4;   // pixels per cell side
    Date start{2021, 1, 1};
    int step_days = 30;
    GeoBounds geo{45.0, 45.2, 5.0, 5.2};
};

struct SyntheticScene {
    SitsCube cube;
    LabelStack labels;
};

// Bands "B03" (green) and "B08" (nir).
SyntheticScene synth_seasonal(std::uint64_t seed, const SeasonalSpec& spec);
// Bands "VAL" (class signal) and "CELL" (4-colour cell code).
SyntheticScene synth_context(std::uint64_t seed, const ContextSpec& spec);

}  // namespace sitsgraph
