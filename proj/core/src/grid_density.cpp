#include "geoscore/grid_density.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/parallel.hpp"
#include "geoscore/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace geoscore {

namespace {
constexpr Index kPointCap = Index(1) << 22;
constexpr double kTwoPi = 6.283185307179586476925286766559;
} // namespace

Index Grid::point_count() const {
    Index n = 1;
    for (int r : resolution) n *= r;
    return n;
}

double Grid::axis_coord(std::size_t axis, Index i) const {
    const auto [lo, hi] = bounds[axis];
    return lo + (hi - lo) * static_cast<double>(i) / (resolution[axis] - 1);
}

Vector Grid::point(Index flat) const {
    Vector x(dim());
    Index rem = flat;
    for (Index a = dim() - 1; a >= 0; --a) {
        const Index r = resolution[static_cast<std::size_t>(a)];
        x[a] = axis_coord(static_cast<std::size_t>(a), rem % r);
        rem /= r;
    }
    return x;
}

double Grid::log_weight(Index flat) const {
    double logw = 0.0;
    Index rem = flat;
    for (Index a = dim() - 1; a >= 0; --a) {
        const auto axis = static_cast<std::size_t>(a);
        const Index r = resolution[axis];
        const Index i = rem % r;
        rem /= r;
        const double h = (bounds[axis].second - bounds[axis].first) / (r - 1);
        logw += std::log(h) + ((i == 0 || i == r - 1) ? std::log(0.5) : 0.0);
    }
    return logw;
}

void Grid::validate() const {
    if (bounds.empty() || bounds.size() > 3)
        throw ConfigError("grid dimension must be between 1 and 3");
    if (resolution.size() != bounds.size())
        throw ConfigError("grid bounds and resolution sizes differ");
    for (std::size_t a = 0; a < bounds.size(); ++a) {
        if (!(bounds[a].first < bounds[a].second))
            throw ConfigError("grid bounds must satisfy lo < hi");
        if (resolution[a] < 2) throw ConfigError("grid resolution must be >= 2 per axis");
    }
    if (point_count() > kPointCap) throw ConfigError("grid exceeds the point cap (2^22)");
}

bool Grid::operator==(const Grid& other) const {
    return bounds == other.bounds && resolution == other.resolution;
}

void GridDensity::normalize() {
    const Index n = grid.point_count();
    double m = -std::numeric_limits<double>::infinity();
    Vector terms(n);
    for (Index c = 0; c < n; ++c) {
        terms[c] = log_values[c] + grid.log_weight(c);
        m = std::max(m, terms[c]);
    }
    double acc = 0.0;
    for (Index c = 0; c < n; ++c) acc += std::exp(terms[c] - m);
    log_norm = m + std::log(acc);
}

double GridDensity::total_mass() const {
    double acc = 0.0;
    for (Index c = 0; c < grid.point_count(); ++c)
        acc += std::exp(log_values[c] + grid.log_weight(c) - log_norm);
    return acc;
}

GridDensity eval_grid_smoothed(const SmoothedScoreModel& model, double epsilon, const Grid& grid,
                               RngStream& rng) {
    grid.validate();
    if (grid.dim() != model.dim()) throw ConfigError("grid dimension does not match model");
    GridDensity out;
    out.grid = grid;
    const Index n = grid.point_count();
    out.log_values.resize(n);
    RngStream base = rng.child("grid_eval");
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t c) {
        RngStream cell = base.child("point", c);
        out.log_values[static_cast<Index>(c)] =
            model.smoothed_log_density(epsilon, grid.point(static_cast<Index>(c)), cell);
    });
    out.normalize();
    return out;
}

GridDensity eval_grid_empirical(const EmpiricalScore& score, double epsilon, const Grid& grid) {
    grid.validate();
    if (grid.dim() != score.dim()) throw ConfigError("grid dimension does not match dataset");
    GridDensity out;
    out.grid = grid;
    const Index n = grid.point_count();
    out.log_values.resize(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t c) {
        out.log_values[static_cast<Index>(c)] =
            score.log_density(epsilon, grid.point(static_cast<Index>(c)));
    });
    out.normalize();
    return out;
}

GridDensity eval_grid_kde(const Dataset& dataset, double sigma, const Grid& grid) {
    grid.validate();
    if (grid.dim() != dataset.dim()) throw ConfigError("grid dimension does not match dataset");
    if (!(sigma > 0.0)) throw DomainError("kde bandwidth must be > 0");
    GridDensity out;
    out.grid = grid;
    const Index n = grid.point_count();
    const Index d = dataset.dim();
    const double s2 = sigma * sigma;
    const double c = -std::log(static_cast<double>(dataset.size())) -
                     0.5 * static_cast<double>(d) * std::log(kTwoPi * s2);
    out.log_values.resize(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t cidx) {
        const Vector x = grid.point(static_cast<Index>(cidx));
        const Vector sq = (dataset.points().rowwise() - x.transpose()).rowwise().squaredNorm();
        const Vector expo = -sq / (2.0 * s2);
        const double m = expo.maxCoeff();
        out.log_values[static_cast<Index>(cidx)] =
            m + std::log((expo.array() - m).exp().sum()) + c;
    });
    out.normalize();
    return out;
}

void save_grid_density(const GridDensity& density, const std::string& path) {
    nlohmann::json j;
    j["bounds"] = density.grid.bounds;
    j["resolution"] = density.grid.resolution;
    j["log_norm"] = density.log_norm;
    const std::string header = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write("GSG1", 4);
    const auto len = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(density.log_values.data()),
              static_cast<std::streamsize>(sizeof(double) * density.log_values.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

GridDensity load_grid_density(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "GSG1", 4) != 0)
        throw ParseError("'" + path + "': bad grid density magic");
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), 4))
        throw ParseError("'" + path + "': truncated header");
    std::string header(len, '\0');
    if (!in.read(header.data(), len)) throw ParseError("'" + path + "': truncated header");
    GridDensity out;
    try {
        const auto j = nlohmann::json::parse(header);
        out.grid.bounds = j.at("bounds").get<std::vector<std::pair<double, double>>>();
        out.grid.resolution = j.at("resolution").get<std::vector<int>>();
        out.log_norm = j.at("log_norm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': invalid header: " + e.what());
    }
    out.grid.validate();
    out.log_values.resize(out.grid.point_count());
    if (!in.read(reinterpret_cast<char*>(out.log_values.data()),
                 static_cast<std::streamsize>(sizeof(double) * out.log_values.size())))
        throw ParseError("'" + path + "': truncated payload");
    return out;
}

} // namespace geoscore
