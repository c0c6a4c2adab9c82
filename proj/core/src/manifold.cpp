#include "geoscore/manifold.hpp"

#include "geoscore/dataset.hpp"
#include "geoscore/errors.hpp"
#include "geoscore/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace geoscore {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

double wrap_angle(double theta) {
    double w = std::fmod(theta, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}
} // namespace

// ---------------------------------------------------------------------------
// Manifold base

double Manifold::distance(const Vector& x) const { return project(x).distance; }

void Manifold::project_batch(const Matrix& y, Matrix* points, Vector* distances,
                             Vector* parameters) const {
    for (Index r = 0; r < y.rows(); ++r) {
        const ProjectionResult p = project(y.row(r).transpose());
        if (points) points->row(r) = p.point.transpose();
        if (distances) (*distances)[r] = p.distance;
        if (parameters) (*parameters)[r] = p.parameter.value_or(0.0);
    }
}

namespace {

// Generic pointwise scaling via proj_{cM}(x) = c proj_M(x/c).
class ScaledManifold final : public Manifold {
public:
    ScaledManifold(ManifoldPtr base, double factor) : base_(std::move(base)), factor_(factor) {}

    Index ambient_dim() const override { return base_->ambient_dim(); }
    Index intrinsic_dim() const override { return base_->intrinsic_dim(); }

    ProjectionResult project(const Vector& x) const override {
        ProjectionResult p = base_->project(x / factor_);
        p.point *= factor_;
        p.distance = (x - p.point).norm();
        return p;
    }

    void project_batch(const Matrix& y, Matrix* points, Vector* distances,
                       Vector* parameters) const override {
        const Matrix scaled_query = y / factor_;
        Matrix base_points;
        if (points || distances) base_points.resize(y.rows(), y.cols());
        base_->project_batch(scaled_query, (points || distances) ? &base_points : nullptr,
                             nullptr, parameters);
        if (points || distances) {
            base_points *= factor_;
            if (distances) *distances = (y - base_points).rowwise().norm();
            if (points) *points = std::move(base_points);
        }
    }

    Matrix sample_uniform(int n, RngStream& rng, bool equispaced) const override {
        return factor_ * base_->sample_uniform(n, rng, equispaced);
    }

    double reach() const override { return factor_ * base_->reach(); }

    std::shared_ptr<const Manifold> scaled(double factor) const override {
        return base_->scaled(factor_ * factor);
    }

    Matrix tangent_basis(const Vector& point_on_m) const override {
        return base_->tangent_basis(point_on_m / factor_);
    }

    std::shared_ptr<const Manifold> with_resolution(int n_nodes) const override {
        return std::make_shared<ScaledManifold>(base_->with_resolution(n_nodes), factor_);
    }

    std::string describe() const override {
        std::ostringstream os;
        os << "scaled(" << base_->describe() << ", " << factor_ << ")";
        return os.str();
    }

private:
    ManifoldPtr base_;
    double factor_;
};

} // namespace

std::shared_ptr<const Manifold> Manifold::scaled(double factor) const {
    if (!(factor > 0.0)) throw DomainError("scaling factor must be positive");
    if (factor == 1.0) return shared_from_this();
    return std::make_shared<ScaledManifold>(shared_from_this(), factor);
}

std::shared_ptr<const Manifold> Manifold::with_resolution(int) const {
    return shared_from_this();
}

// ---------------------------------------------------------------------------
// AffineSubspace

AffineSubspace::AffineSubspace(Matrix constraints, Vector offset)
    : constraints_(std::move(constraints)), offset_(std::move(offset)) {
    const Index k = constraints_.rows();
    const Index d = constraints_.cols();
    if (d < 1) throw DomainError("affine subspace needs ambient dimension >= 1");
    if (offset_.size() != k) throw DomainError("offset size must match constraint rows");
    if (k > d) throw DomainError("more constraints than dimensions");
    if (k > 0) {
        const Matrix gram = constraints_ * constraints_.transpose();
        if ((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10)
            throw DomainError("constraint matrix must be row-orthonormal");
        base_point_ = constraints_.transpose() * offset_;
    } else {
        base_point_ = Vector::Zero(d);
    }
    if (k < d) {
        if (k > 0) {
            Eigen::HouseholderQR<Matrix> qr(constraints_.transpose());
            const Matrix q = qr.householderQ();
            tangent_ = q.rightCols(d - k);
        } else {
            tangent_ = Matrix::Identity(d, d);
        }
    } else {
        tangent_.resize(d, 0);
    }
}

void AffineSubspace::set_patch(Vector lo, Vector hi) {
    if (lo.size() != intrinsic_dim() || hi.size() != intrinsic_dim())
        throw ConfigError("patch bounds must have intrinsic dimension");
    if (((hi - lo).array() <= 0.0).any()) throw ConfigError("patch bounds must satisfy lo < hi");
    patch_ = std::make_pair(std::move(lo), std::move(hi));
}

Vector AffineSubspace::tangent_project(const Vector& z) const {
    if (constraints_.rows() == 0) return z;
    return z - constraints_.transpose() * (constraints_ * z);
}

ProjectionResult AffineSubspace::project(const Vector& x) const {
    ProjectionResult out;
    if (constraints_.rows() == 0) {
        out.point = x;
        out.distance = 0.0;
        return out;
    }
    const Vector residual = constraints_ * x - offset_;
    out.point = x - constraints_.transpose() * residual;
    out.distance = residual.norm();
    return out;
}

Matrix AffineSubspace::sample_uniform(int n, RngStream& rng, bool equispaced) const {
    if (n < 1) throw DomainError("sample_uniform requires n >= 1");
    if (!patch_) throw ConfigError("affine subspace has no sampling patch configured");
    const auto& [lo, hi] = *patch_;
    const Index k_free = intrinsic_dim();
    Matrix out(n, ambient_dim());
    for (int i = 0; i < n; ++i) {
        Vector u(k_free);
        for (Index j = 0; j < k_free; ++j) {
            const double frac = equispaced ? (k_free == 1 ? static_cast<double>(i) / n : rng.uniform01())
                                           : rng.uniform01();
            u[j] = lo[j] + (hi[j] - lo[j]) * frac;
        }
        out.row(i) = (base_point_ + tangent_ * u).transpose();
    }
    return out;
}

double AffineSubspace::reach() const { return std::numeric_limits<double>::infinity(); }

std::shared_ptr<const Manifold> AffineSubspace::scaled(double factor) const {
    if (!(factor > 0.0)) throw DomainError("scaling factor must be positive");
    if (factor == 1.0) return shared_from_this();
    auto out = std::make_shared<AffineSubspace>(constraints_, factor * offset_);
    if (patch_) out->set_patch(factor * patch_->first, factor * patch_->second);
    return out;
}

Matrix AffineSubspace::tangent_basis(const Vector&) const { return tangent_; }

std::string AffineSubspace::describe() const {
    std::ostringstream os;
    os << "affine(k=" << constraints_.rows() << ", d=" << constraints_.cols() << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// Circle

Circle::Circle(double radius, Vector center) : radius_(radius), center_(std::move(center)) {
    if (!(radius_ > 0.0)) throw DomainError("circle radius must be positive");
    if (center_.size() != 2) throw DomainError("circle lives in dimension 2");
}

ProjectionResult Circle::project(const Vector& x) const {
    if (x.size() != 2) throw DomainError("query dimension does not match manifold");
    ProjectionResult out;
    const Vector rel = x - center_;
    const double norm = rel.norm();
    if (norm == 0.0) {
        // Centre tie: resolved to theta = 0.
        out.parameter = 0.0;
        out.point = center_ + Vector{{radius_, 0.0}};
        out.distance = radius_;
        return out;
    }
    out.point = center_ + rel * (radius_ / norm);
    out.distance = std::abs(norm - radius_);
    out.parameter = wrap_angle(std::atan2(rel[1], rel[0]));
    return out;
}

Matrix Circle::sample_uniform(int n, RngStream& rng, bool equispaced) const {
    if (n < 1) throw DomainError("sample_uniform requires n >= 1");
    Matrix out(n, 2);
    for (int i = 0; i < n; ++i) {
        const double theta = equispaced ? kTwoPi * i / n : kTwoPi * rng.uniform01();
        out(i, 0) = center_[0] + radius_ * std::cos(theta);
        out(i, 1) = center_[1] + radius_ * std::sin(theta);
    }
    return out;
}

std::shared_ptr<const Manifold> Circle::scaled(double factor) const {
    if (!(factor > 0.0)) throw DomainError("scaling factor must be positive");
    if (factor == 1.0) return shared_from_this();
    return std::make_shared<Circle>(factor * radius_, factor * center_);
}

Matrix Circle::tangent_basis(const Vector& point_on_m) const {
    const Vector rel = point_on_m - center_;
    const double norm = rel.norm();
    Matrix basis(2, 1);
    if (norm == 0.0) {
        basis << 0.0, 1.0;
        return basis;
    }
    basis << -rel[1] / norm, rel[0] / norm;
    return basis;
}

std::string Circle::describe() const {
    std::ostringstream os;
    os << "circle(r=" << radius_ << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// ParametricCurve

void ParametricCurve::build_nodes(const Matrix& nodes) {
    if (nodes.rows() < 3) throw DomainError("curve requires at least 3 nodes");
    nodes_ = nodes;
    node_sqnorm_ = nodes_.rowwise().squaredNorm();
}

Vector ParametricCurve::parameter_point(double theta) const {
    const Index n = nodes_.rows();
    const auto j = static_cast<Index>(std::llround(wrap_angle(theta) / kTwoPi * n)) % n;
    return nodes_.row(j).transpose();
}

ProjectionResult ParametricCurve::project(const Vector& x) const {
    if (x.size() != nodes_.cols()) throw DomainError("query dimension does not match manifold");
    const Index n = nodes_.rows();
    Index best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
        const double sq = node_sqnorm_[j] - 2.0 * nodes_.row(j).dot(x.transpose());
        if (sq < best_sq) {
            best_sq = sq;
            best = j;
        }
    }
    ProjectionResult out;
    out.point = nodes_.row(best).transpose();
    out.distance = (x - out.point).norm();
    out.parameter = kTwoPi * static_cast<double>(best) / static_cast<double>(n);
    return out;
}

void ParametricCurve::project_batch(const Matrix& y, Matrix* points, Vector* distances,
                                    Vector* parameters) const {
    const Index rows = y.rows();
    const Index n = nodes_.rows();
    // |y - node|^2 = |y|^2 - 2 <y, node> + |node|^2; |y|^2 drops out of argmin.
    Matrix gram = y * nodes_.transpose(); // rows x n
    gram *= -2.0;
    gram.rowwise() += node_sqnorm_.transpose();
    for (Index r = 0; r < rows; ++r) {
        Index best = 0;
        double best_sq = gram(r, 0);
        for (Index j = 1; j < n; ++j) {
            if (gram(r, j) < best_sq) {
                best_sq = gram(r, j);
                best = j;
            }
        }
        if (points) points->row(r) = nodes_.row(best);
        if (distances) (*distances)[r] = (y.row(r) - nodes_.row(best)).norm();
        if (parameters) (*parameters)[r] = kTwoPi * static_cast<double>(best) / static_cast<double>(n);
    }
}

Matrix ParametricCurve::sample_uniform(int n, RngStream& rng, bool equispaced) const {
    if (n < 1) throw DomainError("sample_uniform requires n >= 1");
    Matrix out(n, nodes_.cols());
    for (int i = 0; i < n; ++i) {
        const double theta = equispaced ? kTwoPi * i / n : kTwoPi * rng.uniform01();
        out.row(i) = parameter_point(theta).transpose();
    }
    return out;
}

double ParametricCurve::reach() const {
    std::call_once(reach_once_, [this] {
        const Index n = nodes_.rows();
        const double dtheta = kTwoPi / static_cast<double>(n);

        // Minimum curvature radius from central differences on the node table.
        double min_radius = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
            const Index prev = (j + n - 1) % n;
            const Index next = (j + 1) % n;
            const Vector d1 = (nodes_.row(next) - nodes_.row(prev)).transpose() / (2.0 * dtheta);
            const Vector d2 =
                (nodes_.row(next) - 2.0 * nodes_.row(j) + nodes_.row(prev)).transpose() /
                (dtheta * dtheta);
            const double speed_sq = d1.squaredNorm();
            if (speed_sq < 1e-24)
                throw NumericalError("degenerate curve: repeated nodes");
            const Vector d2_perp = d2 - (d2.dot(d1) / speed_sq) * d1;
            const double kappa = d2_perp.norm() / speed_sq;
            if (kappa > 0.0) min_radius = std::min(min_radius, 1.0 / kappa);
        }

        // Bottleneck term: half the closest approach between parts of the
        // curve that are far apart along the curve.
        Vector arc(n + 1);
        arc[0] = 0.0;
        for (Index j = 0; j < n; ++j)
            arc[j + 1] = arc[j] + (nodes_.row((j + 1) % n) - nodes_.row(j)).norm();
        const double total_arc = arc[n];
        const double window = std::min(kPi * min_radius, total_arc / 4.0);

        const Matrix gram = nodes_ * nodes_.transpose();
        double min_chord_sq = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const double along = arc[j] - arc[i];
                const double separation = std::min(along, total_arc - along);
                if (separation < window) continue;
                const double chord_sq = node_sqnorm_[i] + node_sqnorm_[j] - 2.0 * gram(i, j);
                min_chord_sq = std::min(min_chord_sq, chord_sq);
            }
        }
        double estimate = min_radius;
        if (std::isfinite(min_chord_sq))
            estimate = std::min(estimate, 0.5 * std::sqrt(std::max(0.0, min_chord_sq)));
        reach_cache_ = estimate;
    });
    return reach_cache_;
}

Matrix ParametricCurve::tangent_basis(const Vector& point_on_m) const {
    const ProjectionResult p = project(point_on_m);
    const Index n = nodes_.rows();
    const auto j = static_cast<Index>(std::llround(p.parameter.value() / kTwoPi * n)) % n;
    const Vector t =
        (nodes_.row((j + 1) % n) - nodes_.row((j + n - 1) % n)).transpose();
    const double norm = t.norm();
    if (norm == 0.0) throw NumericalError("degenerate curve tangent");
    Matrix basis(nodes_.cols(), 1);
    basis.col(0) = t / norm;
    return basis;
}

// ---------------------------------------------------------------------------
// WavyCircle

WavyCircle::WavyCircle(double base_radius, double amplitude, int frequency, int resolution)
    : base_radius_(base_radius), amplitude_(amplitude), frequency_(frequency) {
    if (!(base_radius_ > 0.0)) throw DomainError("wavy circle base radius must be positive");
    if (amplitude_ < 0.0 || amplitude_ >= base_radius_)
        throw DomainError("wavy circle amplitude must lie in [0, R)");
    if (frequency_ < 1) throw DomainError("wavy circle frequency must be >= 1");
    if (resolution < 3) throw DomainError("resolution must be >= 3");
    Matrix nodes(resolution, 2);
    for (int j = 0; j < resolution; ++j) {
        const double theta = kTwoPi * j / resolution;
        const double r = base_radius_ + amplitude_ * std::sin(frequency_ * theta);
        nodes(j, 0) = r * std::cos(theta);
        nodes(j, 1) = r * std::sin(theta);
    }
    build_nodes(nodes);
}

Vector WavyCircle::parameter_point(double theta) const {
    const double w = wrap_angle(theta);
    const double r = base_radius_ + amplitude_ * std::sin(frequency_ * w);
    return Vector{{r * std::cos(w), r * std::sin(w)}};
}

std::shared_ptr<const Manifold> WavyCircle::with_resolution(int n_nodes) const {
    return std::make_shared<WavyCircle>(base_radius_, amplitude_, frequency_, n_nodes);
}

std::string WavyCircle::describe() const {
    std::ostringstream os;
    os << "wavy_circle(R=" << base_radius_ << ", a=" << amplitude_ << ", m=" << frequency_ << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// BumpCurve

Vector bump_image(double eta, int side, double circle_radius, double theta) {
    if (!(eta > 0.0)) throw DomainError("bump eta must be positive");
    if (side < 2) throw DomainError("bump image side must be >= 2");
    const double cx = circle_radius * std::cos(theta);
    const double cy = circle_radius * std::sin(theta);
    const double inv = 1.0 / (2.0 * eta * eta);
    Eigen::ArrayXd du_sq(side);
    for (int ix = 0; ix < side; ++ix) {
        const double u = -1.0 + 2.0 * (ix + 0.5) / side;
        du_sq[ix] = (u - cx) * (u - cx);
    }
    Vector image(static_cast<Index>(side) * side);
    for (int iy = 0; iy < side; ++iy) {
        const double v = -1.0 + 2.0 * (iy + 0.5) / side;
        const double dv_sq = (v - cy) * (v - cy);
        image.segment(static_cast<Index>(iy) * side, side) =
            (-(du_sq + dv_sq) * inv).exp().matrix();
    }
    image /= image.maxCoeff();
    return image;
}

BumpCurve::BumpCurve(double eta, int side, double circle_radius, int resolution)
    : eta_(eta), side_(side), circle_radius_(circle_radius) {
    if (resolution < 3) throw DomainError("resolution must be >= 3");
    Matrix nodes(resolution, static_cast<Index>(side) * side);
    for (int j = 0; j < resolution; ++j)
        nodes.row(j) = bump_image(eta_, side_, circle_radius_, kTwoPi * j / resolution).transpose();
    build_nodes(nodes);
}

Vector BumpCurve::parameter_point(double theta) const {
    return bump_image(eta_, side_, circle_radius_, wrap_angle(theta));
}

std::shared_ptr<const Manifold> BumpCurve::with_resolution(int n_nodes) const {
    return std::make_shared<BumpCurve>(eta_, side_, circle_radius_, n_nodes);
}

std::string BumpCurve::describe() const {
    std::ostringstream os;
    os << "bump_curve(eta=" << eta_ << ", side=" << side_ << ", r=" << circle_radius_ << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// CurveCloud

CurveCloud::CurveCloud(Matrix nodes) { build_nodes(nodes); }

std::string CurveCloud::describe() const {
    std::ostringstream os;
    os << "curve_cloud(n=" << nodes_.rows() << ", d=" << nodes_.cols() << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// Factories

ManifoldPtr make_affine(Matrix constraints, Vector offset) {
    return std::make_shared<AffineSubspace>(std::move(constraints), std::move(offset));
}

ManifoldPtr make_circle(double radius, Vector center) {
    return std::make_shared<Circle>(radius, std::move(center));
}

ManifoldPtr make_wavy_circle(double base_radius, double amplitude, int frequency,
                             int resolution) {
    return std::make_shared<WavyCircle>(base_radius, amplitude, frequency, resolution);
}

ManifoldPtr make_bump_curve(double eta, int side, double circle_radius, int resolution) {
    return std::make_shared<BumpCurve>(eta, side, circle_radius, resolution);
}

ManifoldPtr make_curve_cloud(Matrix nodes) {
    return std::make_shared<CurveCloud>(std::move(nodes));
}

ManifoldPtr manifold_from_json(const std::string& json_text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid manifold JSON: ") + e.what());
    }
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "circle") {
            Vector center = Vector::Zero(2);
            if (j.contains("center")) {
                const auto c = j["center"].get<std::vector<double>>();
                if (c.size() != 2) throw ConfigError("circle center must have 2 entries");
                center = Eigen::Map<const Vector>(c.data(), 2);
            }
            return make_circle(j.at("radius").get<double>(), center);
        }
        if (kind == "wavy_circle") {
            return make_wavy_circle(j.value("base_radius", 1.0), j.value("amplitude", 0.15),
                                    j.value("frequency", 8), j.value("resolution", 1024));
        }
        if (kind == "bump_curve") {
            return make_bump_curve(j.at("eta").get<double>(), j.value("side", 64),
                                   j.value("circle_radius", 0.5), j.value("resolution", 1024));
        }
        if (kind == "affine") {
            const auto rows = j.at("A").get<std::vector<std::vector<double>>>();
            const auto b = j.at("b").get<std::vector<double>>();
            if (rows.empty()) throw ConfigError("affine manifold needs at least one row in A");
            Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.front().size())
                    throw ConfigError("ragged affine constraint matrix");
                for (std::size_t c = 0; c < rows[r].size(); ++c)
                    a(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
            }
            auto affine = std::make_shared<AffineSubspace>(
                a, Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size())));
            if (j.contains("patch_lo") && j.contains("patch_hi")) {
                const auto lo = j["patch_lo"].get<std::vector<double>>();
                const auto hi = j["patch_hi"].get<std::vector<double>>();
                affine->set_patch(Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size())),
                                  Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size())));
            }
            return affine;
        }
        if (kind == "curve_cloud") {
            const Dataset nodes = load_dataset(j.at("path").get<std::string>(), FileFormat::CsvRows);
            return make_curve_cloud(nodes.points());
        }
        throw ConfigError("unknown manifold kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid manifold JSON: ") + e.what());
    }
}

} // namespace geoscore
