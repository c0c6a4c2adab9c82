#include "geoscore/kernels.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <sstream>

namespace geoscore {

namespace {

std::string vector_bytes(const Vector& x) {
    return std::string(reinterpret_cast<const char*>(x.data()), sizeof(double) * x.size());
}

std::uint64_t bytes_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr int kLevelSetRetries = 16;
constexpr std::uint64_t kLevelRadiusSalt = 0x6c76656c72616478ULL;

} // namespace

void Kernel::draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const {
    out.resize(n, x.size());
    for (Index i = 0; i < n; ++i) out.row(i) = draw(x, rng).transpose();
}

std::vector<std::pair<Vector, double>> Kernel::nodes(const Vector&) const {
    throw CapabilityError("kernel has no deterministic quadrature nodes");
}

// ---------------------------------------------------------------------------
// IsotropicGaussian

IsotropicGaussian::IsotropicGaussian(double sigma) : sigma_(sigma) {
    if (sigma_ < 0.0) throw DomainError("isotropic kernel sigma must be >= 0");
}

Vector IsotropicGaussian::draw(const Vector& x, RngStream& rng) const {
    if (sigma_ == 0.0) return x;
    Vector y(x.size());
    rng.fill_normal(y.data(), static_cast<std::size_t>(y.size()));
    return x + sigma_ * y;
}

void IsotropicGaussian::draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const {
    out.resize(n, x.size());
    if (sigma_ == 0.0) {
        out.rowwise() = x.transpose();
        return;
    }
    rng.fill_normal(out.data(), static_cast<std::size_t>(out.size()));
    out *= sigma_;
    out.rowwise() += x.transpose();
}

std::string IsotropicGaussian::describe() const {
    std::ostringstream os;
    os << "{\"kind\":\"isotropic_gaussian\",\"sigma\":" << sigma_ << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// FixedStencil

FixedStencil::FixedStencil(double h) : h_(h) {
    if (!(h_ > 0.0)) throw DomainError("stencil step must be > 0");
}

Vector FixedStencil::draw(const Vector& x, RngStream& rng) const {
    const Index d = x.size();
    const auto pick = static_cast<Index>(rng.uniform01() * static_cast<double>(2 * d));
    const Index j = pick / 2;
    const double sign = (pick % 2 == 0) ? 1.0 : -1.0;
    Vector y = x;
    y[j] += sign * h_;
    return y;
}

std::vector<std::pair<Vector, double>> FixedStencil::nodes(const Vector& x) const {
    const Index d = x.size();
    std::vector<std::pair<Vector, double>> out;
    out.reserve(static_cast<std::size_t>(2 * d));
    const double w = 1.0 / static_cast<double>(2 * d);
    for (Index j = 0; j < d; ++j) {
        Vector plus = x;
        plus[j] += h_;
        out.emplace_back(std::move(plus), w);
        Vector minus = x;
        minus[j] -= h_;
        out.emplace_back(std::move(minus), w);
    }
    return out;
}

std::string FixedStencil::describe() const {
    std::ostringstream os;
    os << "{\"kind\":\"fixed_stencil\",\"h\":" << h_ << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// AnisotropicGaussian

AnisotropicGaussian::AnisotropicGaussian(double sigma_tangent, double sigma_normal,
                                         ManifoldPtr frame_source)
    : sigma_tangent_(sigma_tangent), sigma_normal_(sigma_normal), frame_(std::move(frame_source)) {
    if (!(sigma_tangent_ > 0.0) || sigma_normal_ < 0.0)
        throw DomainError("anisotropic kernel scales must be positive (normal may be 0)");
    if (!frame_) throw DomainError("anisotropic kernel needs a frame source manifold");
}

Vector AnisotropicGaussian::draw(const Vector& x, RngStream& rng) const {
    const Vector anchor = frame_->project(x).point;
    const Matrix tangent = frame_->tangent_basis(anchor); // d x dt, orthonormal
    const Index d = x.size();
    const Index dt = tangent.cols();

    Vector zt(dt);
    rng.fill_normal(zt.data(), static_cast<std::size_t>(dt));
    Vector y = x + sigma_tangent_ * (tangent * zt);
    if (sigma_normal_ > 0.0 && dt < d) {
        // Complete the frame; the leading dt columns of Q span col(tangent).
        Eigen::HouseholderQR<Matrix> qr(tangent);
        const Matrix q = qr.householderQ();
        const Matrix normal = q.rightCols(d - dt);
        Vector zn(d - dt);
        rng.fill_normal(zn.data(), static_cast<std::size_t>(d - dt));
        y += sigma_normal_ * (normal * zn);
    }
    return y;
}

std::string AnisotropicGaussian::describe() const {
    std::ostringstream os;
    os << "{\"kind\":\"anisotropic_gaussian\",\"sigma_tangent\":" << sigma_tangent_
       << ",\"sigma_normal\":" << sigma_normal_ << ",\"frame\":\"" << frame_->describe()
       << "\"}";
    return os.str();
}

// ---------------------------------------------------------------------------
// LevelSetAdapted

LevelSetAdapted::LevelSetAdapted(KernelPtr base, ManifoldPtr manifold, double epsilon_scale,
                                 int r_samples)
    : base_(std::move(base)),
      epsilon_scale_(epsilon_scale),
      r_samples_(r_samples) {
    if (!base_) throw DomainError("level-set kernel needs a base kernel");
    if (!base_->location_independent())
        throw DomainError("level-set kernel requires a location-independent base");
    if (!(epsilon_scale > 0.0)) throw DomainError("epsilon_scale must be positive");
    if (r_samples_ < 1) throw DomainError("r_samples must be >= 1");
    scaled_manifold_ = manifold->scaled(epsilon_scale);
}

double LevelSetAdapted::level_radius(const Vector& x) const {
    const std::string key = vector_bytes(x);
    {
        std::shared_lock lock(cache_mutex_);
        const auto it = r_cache_.find(key);
        if (it != r_cache_.end()) return it->second;
    }
    // Deterministic in x: the estimator stream is derived from the point
    // itself, so caching is transparent.
    RngStream est(bytes_hash(key) ^ kLevelRadiusSalt);
    Matrix draws;
    base_->draw_batch(x, r_samples_, est, draws);
    Vector dists(r_samples_);
    scaled_manifold_->project_batch(draws, nullptr, &dists, nullptr);
    const double r = std::sqrt(dists.squaredNorm() / static_cast<double>(r_samples_));
    {
        std::unique_lock lock(cache_mutex_);
        r_cache_.emplace(key, r);
    }
    return r;
}

Vector LevelSetAdapted::project_to_level(const Vector& y, double radius, RngStream& rng,
                                         const Vector& x, int attempts_left) const {
    const ProjectionResult p = scaled_manifold_->project(y);
    const Vector u = y - p.point;
    const double norm = u.norm();
    if (norm < 1e-14 * (1.0 + y.norm())) {
        if (radius < 1e-14) return p.point;
        if (attempts_left <= 0)
            throw NumericalError("level-set projection degenerate: draw lies on the manifold");
        return project_to_level(base_->draw(x, rng), radius, rng, x, attempts_left - 1);
    }
    return p.point + (radius / norm) * u;
}

Vector LevelSetAdapted::draw(const Vector& x, RngStream& rng) const {
    const double r = level_radius(x);
    return project_to_level(base_->draw(x, rng), r, rng, x, kLevelSetRetries);
}

void LevelSetAdapted::draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const {
    const double r = level_radius(x);
    Matrix draws;
    base_->draw_batch(x, n, rng, draws);
    Matrix proj(n, x.size());
    scaled_manifold_->project_batch(draws, &proj, nullptr, nullptr);
    out.resize(n, x.size());
    for (Index i = 0; i < n; ++i) {
        const Vector u = (draws.row(i) - proj.row(i)).transpose();
        const double norm = u.norm();
        if (norm < 1e-14 * (1.0 + draws.row(i).norm())) {
            out.row(i) =
                project_to_level(base_->draw(x, rng), r, rng, x, kLevelSetRetries).transpose();
        } else {
            out.row(i) = proj.row(i) + (r / norm) * u.transpose();
        }
    }
}

std::string LevelSetAdapted::describe() const {
    std::ostringstream os;
    os << "{\"kind\":\"level_set_adapted\",\"base\":" << base_->describe()
       << ",\"manifold\":\"" << scaled_manifold_->describe()
       << "\",\"epsilon_scale\":" << epsilon_scale_ << ",\"r_samples\":" << r_samples_ << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// ShiftedManifoldAdapted

ShiftedManifoldAdapted::ShiftedManifoldAdapted(double sigma, ManifoldPtr manifold,
                                               int n_proj_nodes)
    : sigma_(sigma), n_proj_nodes_(n_proj_nodes) {
    if (!(sigma > 0.0)) throw DomainError("shifted-manifold kernel sigma must be > 0");
    if (!manifold) throw DomainError("shifted-manifold kernel needs a manifold");
    manifold_ = n_proj_nodes > 0 ? manifold->with_resolution(n_proj_nodes) : manifold;
}

Vector ShiftedManifoldAdapted::draw(const Vector& x, RngStream& rng) const {
    const Vector shift = x - manifold_->project(x).point;
    Vector z(x.size());
    rng.fill_normal(z.data(), static_cast<std::size_t>(z.size()));
    const Vector y = x + sigma_ * z;
    return manifold_->project(y - shift).point + shift;
}

void ShiftedManifoldAdapted::draw_batch(const Vector& x, Index n, RngStream& rng,
                                        Matrix& out) const {
    const Vector shift = x - manifold_->project(x).point;
    const Vector anchor = x - shift; // projection of x onto M
    Matrix queries(n, x.size());
    rng.fill_normal(queries.data(), static_cast<std::size_t>(queries.size()));
    queries *= sigma_;
    queries.rowwise() += anchor.transpose();
    out.resize(n, x.size());
    manifold_->project_batch(queries, &out, nullptr, nullptr);
    out.rowwise() += shift.transpose();
}

std::string ShiftedManifoldAdapted::describe() const {
    std::ostringstream os;
    os << "{\"kind\":\"shifted_manifold_adapted\",\"sigma\":" << sigma_ << ",\"manifold\":\""
       << manifold_->describe() << "\",\"n_proj_nodes\":" << n_proj_nodes_ << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// estimate_K

KernelDiagnostics estimate_K(const Kernel& kernel, const Manifold& manifold,
                             const Matrix& probes, int samples_per_probe, RngStream& rng) {
    if (probes.rows() < 1) throw DomainError("estimate_K requires at least one probe");
    if (samples_per_probe < 1) throw DomainError("samples_per_probe must be >= 1");
    KernelDiagnostics diag;
    diag.probe_count = static_cast<int>(probes.rows());
    double worst_mean_sq = 0.0;
    double worst_abs = 0.0;
    for (Index p = 0; p < probes.rows(); ++p) {
        const Vector x = probes.row(p).transpose();
        const double base_dist = manifold.distance(x);
        RngStream probe_rng = rng.child("estimate_k", static_cast<std::uint64_t>(p));
        Matrix draws;
        kernel.draw_batch(x, samples_per_probe, probe_rng, draws);
        Vector dists(samples_per_probe);
        manifold.project_batch(draws, nullptr, &dists, nullptr);
        double acc = 0.0;
        for (Index i = 0; i < dists.size(); ++i) {
            const double dev = std::abs(dists[i] - base_dist);
            acc += dev * dev;
            worst_abs = std::max(worst_abs, dev);
        }
        worst_mean_sq = std::max(worst_mean_sq, acc / static_cast<double>(samples_per_probe));
    }
    diag.K = std::sqrt(worst_mean_sq);
    diag.K_max = worst_abs;
    return diag;
}

// ---------------------------------------------------------------------------
// JSON factory

KernelPtr kernel_from_json(const std::string& json_text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid kernel JSON: ") + e.what());
    }
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "isotropic_gaussian")
            return std::make_shared<IsotropicGaussian>(j.at("sigma").get<double>());
        if (kind == "fixed_stencil")
            return std::make_shared<FixedStencil>(j.at("h").get<double>());
        if (kind == "anisotropic_gaussian")
            return std::make_shared<AnisotropicGaussian>(
                j.at("sigma_tangent").get<double>(), j.at("sigma_normal").get<double>(),
                manifold_from_json(j.at("manifold").dump()));
        if (kind == "level_set_adapted")
            return std::make_shared<LevelSetAdapted>(
                kernel_from_json(j.at("base").dump()), manifold_from_json(j.at("manifold").dump()),
                j.value("epsilon_scale", 1.0), j.value("r_samples", 256));
        if (kind == "shifted_manifold_adapted")
            return std::make_shared<ShiftedManifoldAdapted>(
                j.at("sigma").get<double>(), manifold_from_json(j.at("manifold").dump()),
                j.value("n_proj_nodes", 0));
        throw ConfigError("unknown kernel kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid kernel JSON: ") + e.what());
    }
}

} // namespace geoscore
