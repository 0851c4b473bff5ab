#include "sitsgraph/datacube.hpp"

#include "sitsgraph/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace sitsgraph {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dates

namespace {

// Howard Hinnant's civil-day algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

Date Date::parse(std::string_view iso) {
    int y = 0, m = 0, d = 0;
    char extra = 0;
    const std::string s(iso.substr(0, std::min<std::size_t>(iso.size(), 10)));
    if (iso.size() < 10 || std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &extra) != 3 ||
        s[4] != '-' || s[7] != '-' || m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) {
        throw Error(Errc::ParseError, "invalid ISO-8601 date '" + std::string(iso) + "'");
    }
    return {y, m, d};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::int64_t Date::days_since_epoch() const {
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
}

Date Date::from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

int Date::day_of_year() const {
    return static_cast<int>(days_since_epoch() - Date{year, 1, 1}.days_since_epoch()) + 1;
}

double doy_fraction(const Date& d) {
    const int doy = std::min(d.day_of_year(), 365);
    return std::clamp((doy - 1) / 365.0, 0.0, std::nextafter(1.0, 0.0));
}

// ---------------------------------------------------------------------------
// Cube

SitsCube::SitsCube(CubeShape shape, std::vector<float> values, std::vector<Date> timestamps,
                   std::vector<std::string> bands, GeoBounds geo, std::optional<float> nodata)
    : shape_(shape),
      values_(std::move(values)),
      timestamps_(std::move(timestamps)),
      bands_(std::move(bands)),
      geo_(geo),
      nodata_(nodata) {
    if (shape_.T < 1 || shape_.C < 1 || shape_.H < 1 || shape_.W < 1) {
        throw Error(Errc::ShapeMismatch, "cube dimensions must all be >= 1");
    }
    if (values_.size() != shape_.size()) {
        throw Error(Errc::ShapeMismatch, "expected " + std::to_string(shape_.size()) +
                                             " values, got " + std::to_string(values_.size()));
    }
    if (timestamps_.size() != std::size_t(shape_.T)) {
        throw Error(Errc::ShapeMismatch, "timestamp count differs from T");
    }
    if (bands_.size() != std::size_t(shape_.C)) {
        throw Error(Errc::ShapeMismatch, "band count differs from C");
    }
    for (std::size_t t = 1; t < timestamps_.size(); ++t) {
        if (!(timestamps_[t - 1] < timestamps_[t])) {
            throw Error(Errc::NonMonotonicTimestamps,
                        timestamps_[t - 1].to_string() + " is not before " + timestamps_[t].to_string());
        }
    }
    for (int c = 0; c < shape_.C; ++c) {
        if (bands_[c] != "NDWI" && bands_[c] != "NDVI") continue;
        for (int t = 0; t < shape_.T; ++t) {
            for (float v : plane(t, c)) {
                if (std::isfinite(v) && !is_nodata(v) && (v < -1.0f || v > 1.0f)) {
                    throw Error(Errc::InvalidSpec, "index band " + bands_[c] + " outside [-1,1]");
                }
            }
        }
    }
}

std::span<const float> SitsCube::plane(int t, int c) const {
    const std::size_t hw = std::size_t(shape_.H) * shape_.W;
    return {values_.data() + (std::size_t(t) * shape_.C + c) * hw, hw};
}

ImageView SitsCube::image(int t) const {
    const std::size_t chw = std::size_t(shape_.C) * shape_.H * shape_.W;
    return {{values_.data() + std::size_t(t) * chw, chw}, shape_.C, shape_.H, shape_.W};
}

Image SitsCube::image(int t, std::span<const int> bands) const {
    Image img;
    img.H = shape_.H;
    img.W = shape_.W;
    std::vector<int> sel(bands.begin(), bands.end());
    if (sel.empty()) {
        for (int c = 0; c < shape_.C; ++c) sel.push_back(c);
    }
    img.C = static_cast<int>(sel.size());
    img.data.reserve(std::size_t(img.C) * img.H * img.W);
    for (int c : sel) {
        if (c < 0 || c >= shape_.C) throw Error(Errc::UnknownBand, "band index " + std::to_string(c));
        auto p = plane(t, c);
        img.data.insert(img.data.end(), p.begin(), p.end());
    }
    return img;
}

int SitsCube::band_index(std::string_view name) const {
    auto it = std::find(bands_.begin(), bands_.end(), name);
    if (it == bands_.end()) throw Error(Errc::UnknownBand, "no band named '" + std::string(name) + "'");
    return static_cast<int>(it - bands_.begin());
}

bool SitsCube::is_nodata(float v) const {
    return std::isnan(v) || (nodata_ && v == *nodata_);
}

// ---------------------------------------------------------------------------
// I/O

namespace {

template <class T>
std::vector<T> read_blob(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::MissingFile, file.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(T) != 0) {
        throw Error(Errc::ShapeMismatch, file.string() + " size is not a multiple of " +
                                             std::to_string(sizeof(T)));
    }
    std::vector<T> out(bytes.size() / sizeof(T));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : out) {
            auto raw = std::bit_cast<std::array<char, sizeof(T)>>(v);
            std::reverse(raw.begin(), raw.end());
            v = std::bit_cast<T>(raw);
        }
    }
    return out;
}

template <class T>
void write_blob(const fs::path& file, std::span<const T> values) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
    if constexpr (std::endian::native == std::endian::big) {
        for (T v : values) {
            auto raw = std::bit_cast<std::array<char, sizeof(T)>>(v);
            std::reverse(raw.begin(), raw.end());
            out.write(raw.data(), raw.size());
        }
    } else {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
    }
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::MissingFile, file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, file.string() + ": " + e.what());
    }
}

}  // namespace

std::vector<float> read_f32(const fs::path& file) { return read_blob<float>(file); }
void write_f32(const fs::path& file, std::span<const float> values) { write_blob<float>(file, values); }
std::vector<std::int32_t> read_i32(const fs::path& file) { return read_blob<std::int32_t>(file); }
void write_i32(const fs::path& file, std::span<const std::int32_t> values) {
    write_blob<std::int32_t>(file, values);
}

SitsCube load_cube(const fs::path& dir) {
    const json meta = read_json(dir / "meta.json");
    CubeShape shape;
    std::vector<Date> dates;
    std::vector<std::string> bands;
    GeoBounds geo;
    std::optional<float> nodata;
    try {
        shape = {meta.at("T").get<int>(), meta.at("C").get<int>(), meta.at("H").get<int>(),
                 meta.at("W").get<int>()};
        if (meta.value("dtype", std::string("f32")) != "f32") {
            throw Error(Errc::ParseError, "only dtype f32 is supported");
        }
        for (const auto& s : meta.at("timestamps")) dates.push_back(Date::parse(s.get<std::string>()));
        bands = meta.at("bands").get<std::vector<std::string>>();
        if (meta.contains("geo")) {
            const auto& g = meta["geo"];
            geo = {g.at("lat0").get<double>(), g.at("lat1").get<double>(), g.at("lon0").get<double>(),
                   g.at("lon1").get<double>()};
        }
        if (meta.contains("nodata") && !meta["nodata"].is_null()) nodata = meta["nodata"].get<float>();
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, "meta.json: " + std::string(e.what()));
    }
    if (shape.T < 1 || shape.C < 1 || shape.H < 1 || shape.W < 1) {
        throw Error(Errc::ShapeMismatch, "meta.json dimensions must be >= 1");
    }
    const fs::path blob = dir / "cube.bin";
    if (!fs::exists(blob)) throw Error(Errc::MissingFile, blob.string());
    const auto bytes = fs::file_size(blob);
    if (bytes != 4 * shape.size()) {
        throw Error(Errc::ShapeMismatch, "cube.bin has " + std::to_string(bytes) + " bytes, expected " +
                                             std::to_string(4 * shape.size()));
    }
    return SitsCube(shape, read_f32(blob), std::move(dates), std::move(bands), geo, nodata);
}

void save_cube(const SitsCube& cube, const fs::path& dir) {
    fs::create_directories(dir);
    json meta;
    meta["T"] = cube.T();
    meta["C"] = cube.C();
    meta["H"] = cube.H();
    meta["W"] = cube.W();
    meta["dtype"] = "f32";
    meta["bands"] = cube.bands();
    json ts = json::array();
    for (const auto& d : cube.timestamps()) ts.push_back(d.to_string());
    meta["timestamps"] = ts;
    meta["geo"] = {{"lat0", cube.geo().lat0},
                   {"lat1", cube.geo().lat1},
                   {"lon0", cube.geo().lon0},
                   {"lon1", cube.geo().lon1}};
    meta["nodata"] = cube.nodata() ? json(*cube.nodata()) : json(nullptr);
    std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
    write_f32(dir / "cube.bin", cube.values());
}

bool has_labels(const fs::path& dir) { return fs::exists(dir / "labels_t0.bin"); }

LabelStack load_labels(const fs::path& dir, int T, int H, int W) {
    LabelStack out(T, H, W, -1);
    for (int t = 0; t < T; ++t) {
        const auto file = dir / ("labels_t" + std::to_string(t) + ".bin");
        auto plane = read_i32(file);
        if (plane.size() != std::size_t(H) * W) {
            throw Error(Errc::ShapeMismatch, file.string() + " does not hold H*W int32 values");
        }
        std::copy(plane.begin(), plane.end(), out.plane(t).begin());
    }
    return out;
}

void save_labels(const LabelStack& labels, const fs::path& dir) {
    fs::create_directories(dir);
    for (int t = 0; t < labels.T; ++t) {
        write_i32(dir / ("labels_t" + std::to_string(t) + ".bin"), labels.plane(t));
    }
}

// ---------------------------------------------------------------------------
// Spectral index

SitsCube ndwi(const SitsCube& cube, std::string_view green_band, std::string_view nir_band) {
    const int g = cube.band_index(green_band);
    const int n = cube.band_index(nir_band);
    const std::size_t hw = std::size_t(cube.H()) * cube.W();
    std::vector<float> out(std::size_t(cube.T()) * hw);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (int t = 0; t < cube.T(); ++t) {
        auto gp = cube.plane(t, g);
        auto np = cube.plane(t, n);
        for (std::size_t i = 0; i < hw; ++i) {
            const float gv = gp[i];
            const float nv = np[i];
            float v;
            if (cube.is_nodata(gv) || cube.is_nodata(nv)) {
                v = nan;
            } else {
                const double den = double(gv) + double(nv);
                v = std::abs(den) < 1e-12 ? 0.0f : static_cast<float>((double(gv) - double(nv)) / den);
            }
            out[std::size_t(t) * hw + i] = v;
        }
    }
    return SitsCube({cube.T(), 1, cube.H(), cube.W()}, std::move(out), cube.timestamps(), {"NDWI"},
                    cube.geo(), std::nullopt);
}

// ---------------------------------------------------------------------------
// Georeference

PixelGeo pixel_geo(const GeoBounds& geo, int H, int W, int row, int col, const Date& date) {
    PixelGeo p;
    p.row = row;
    p.col = col;
    p.lat = geo.lat0 + (geo.lat1 - geo.lat0) * (row + 0.5) / H;
    p.lon = geo.lon0 + (geo.lon1 - geo.lon0) * (col + 0.5) / W;
    p.doy = doy_fraction(date);
    return p;
}

PixelGeo pixel_geo(const SitsCube& cube, int row, int col, int t) {
    return pixel_geo(cube.geo(), cube.H(), cube.W(), row, col, cube.timestamps().at(t));
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

struct ClassSignature {
    std::string_view name;
    double green;
    double nir;
};

// Band means are spaced 0.1 apart in each band and the seasonal amplitude is
// 0.04, so two classes never share a value on any date.
constexpr std::array<ClassSignature, kSynthClasses> kClasses{{
    {"impervious", 0.30, 0.35},
    {"agriculture", 0.20, 0.55},
    {"forest", 0.10, 0.65},
    {"wetlands", 0.40, 0.25},
    {"soil", 0.50, 0.45},
    {"water", 0.60, 0.05},
    {"snow", 0.70, 0.15},
}};
constexpr double kSeasonAmplitude = 0.04;
constexpr float kMinReflectance = 0.005f;

std::vector<Date> date_series(const Date& start, int step, int T) {
    std::vector<Date> out;
    for (int t = 0; t < T; ++t) out.push_back(start.plus_days(step * t));
    return out;
}

}  // namespace

std::string_view synth_class_name(int cls) { return kClasses.at(static_cast<std::size_t>(cls)).name; }

SyntheticScene synth_seasonal(std::uint64_t seed, const SeasonalSpec& spec) {
    if (spec.T < 4 || spec.H < 4 || spec.W < 4) throw Error(Errc::InvalidSpec, "T, H and W must be >= 4");
    if (spec.n_blobs < 2 || spec.n_blobs > spec.H * spec.W) {
        throw Error(Errc::InvalidSpec, "n_blobs must lie in [2, H*W]");
    }
    if (spec.period_dates < 1) throw Error(Errc::InvalidSpec, "period_dates must be >= 1");
    if (spec.noise_sigma < 0) throw Error(Errc::InvalidSpec, "noise_sigma must be >= 0");
    if (spec.step_days < 1) throw Error(Errc::InvalidSpec, "step_days must be >= 1");

    std::mt19937_64 rng(seed);
    const int H = spec.H, W = spec.W, T = spec.T;
    const std::size_t hw = std::size_t(H) * W;

    // Distinct seed pixels via a partial Fisher-Yates shuffle.
    std::vector<int> pixels(hw);
    for (std::size_t i = 0; i < hw; ++i) pixels[i] = static_cast<int>(i);
    for (int i = 0; i < spec.n_blobs; ++i) {
        std::uniform_int_distribution<std::size_t> pick(std::size_t(i), hw - 1);
        std::swap(pixels[std::size_t(i)], pixels[pick(rng)]);
    }
    const int class_offset = std::uniform_int_distribution<int>(0, kSynthClasses - 1)(rng);
    std::vector<int> blob_class(std::size_t(spec.n_blobs));
    for (int b = 0; b < spec.n_blobs; ++b) blob_class[std::size_t(b)] = (b + class_offset) % kSynthClasses;

    // Voronoi blobs, ties to the lower blob id.
    std::vector<int> owner(hw);
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            int best = 0;
            long best_d = std::numeric_limits<long>::max();
            for (int b = 0; b < spec.n_blobs; ++b) {
                const int p = pixels[std::size_t(b)];
                const long dr = p / W - h, dc = p % W - w;
                const long d = dr * dr + dc * dc;
                if (d < best_d) {
                    best_d = d;
                    best = b;
                }
            }
            owner[std::size_t(h) * W + w] = best;
        }
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<float> values(std::size_t(T) * 2 * hw);
    LabelStack labels(T, H, W);
    for (int t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < hw; ++i) {
            const int cls = blob_class[std::size_t(owner[i])];
            const auto& sig = kClasses[std::size_t(cls)];
            const double phase = 2.0 * std::numbers::pi * (double(t) / spec.period_dates + cls / 7.0);
            const double s = kSeasonAmplitude * std::sin(phase);
            double g = sig.green + s;
            double n = sig.nir - s;
            if (spec.noise_sigma > 0) {
                g += spec.noise_sigma * noise(rng);
                n += spec.noise_sigma * noise(rng);
            }
            values[(std::size_t(t) * 2 + 0) * hw + i] = std::max(kMinReflectance, static_cast<float>(g));
            values[(std::size_t(t) * 2 + 1) * hw + i] = std::max(kMinReflectance, static_cast<float>(n));
            labels.plane(t)[i] = cls;
        }
    }
    SitsCube cube({T, 2, H, W}, std::move(values), date_series(spec.start, spec.step_days, T),
                  {"B03", "B08"}, spec.geo, std::nullopt);
    return {std::move(cube), std::move(labels)};
}

SyntheticScene synth_context(std::uint64_t seed, const ContextSpec& spec) {
    if (spec.T < 1 || spec.cells < 2 || spec.cell_px < 1) {
        throw Error(Errc::InvalidSpec, "context fixture needs T >= 1, cells >= 2, cell_px >= 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> low(0.05, 0.20), high(0.80, 0.95), mid(0.40, 0.60);
    std::bernoulli_distribution coin(0.5);
    const int n = spec.cells;

    std::vector<double> value(std::size_t(n) * n);
    std::vector<int> is_high(std::size_t(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t k = std::size_t(i) * n + j;
            if ((i + j) % 2 == 0) {
                is_high[k] = coin(rng);
                value[k] = is_high[k] ? high(rng) : low(rng);
            } else {
                value[k] = mid(rng);
            }
        }
    }
    std::vector<int> cls(std::size_t(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t k = std::size_t(i) * n + j;
            if ((i + j) % 2 == 0) {
                cls[k] = is_high[k] ? 3 : 2;
                continue;
            }
            int highs = 0, total = 0;
            constexpr std::array<std::array<int, 2>, 4> kNbrs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
            for (auto [di, dj] : kNbrs) {
                const int a = i + di, b = j + dj;
                if (a < 0 || a >= n || b < 0 || b >= n) continue;
                ++total;
                highs += is_high[std::size_t(a) * n + b];
            }
            cls[k] = 2 * highs >= total ? 1 : 0;
        }
    }

    const int H = n * spec.cell_px, W = H;
    const std::size_t hw = std::size_t(H) * W;
    std::vector<float> values(std::size_t(spec.T) * 2 * hw);
    LabelStack labels(spec.T, H, W);
    for (int t = 0; t < spec.T; ++t) {
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                const int i = h / spec.cell_px, j = w / spec.cell_px;
                const std::size_t k = std::size_t(i) * n + j;
                const std::size_t p = std::size_t(h) * W + w;
                values[(std::size_t(t) * 2 + 0) * hw + p] = static_cast<float>(value[k]);
                values[(std::size_t(t) * 2 + 1) * hw + p] = 0.25f * float((i % 2) * 2 + (j % 2));
                labels.plane(t)[p] = cls[k];
            }
        }
    }
    SitsCube cube({spec.T, 2, H, W}, std::move(values), date_series(spec.start, spec.step_days, spec.T),
                  {"VAL", "CELL"}, spec.geo, std::nullopt);
    return {std::move(cube), std::move(labels)};
}

}  // namespace sitsgraph
