#pragma once

#include "geoscore/types.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace geoscore {

class RngStream;

struct ProjectionResult {
    Vector point;
    double distance = 0.0;
    std::optional<double> parameter; // intrinsic coordinate for curve kinds
};

// Embedded geometry: nearest-point projection, uniform sampling, tangent
// frames, reach and pointwise scaling. Instances are immutable; create them
// through the factory helpers below (they must be owned by a shared_ptr).
class Manifold : public std::enable_shared_from_this<Manifold> {
public:
    virtual ~Manifold() = default;

    virtual Index ambient_dim() const = 0;
    virtual Index intrinsic_dim() const = 0;

    // Nearest point under Euclidean distance; ties broken towards the lowest
    // parameter / node index.
    virtual ProjectionResult project(const Vector& x) const = 0;
    double distance(const Vector& x) const;

    // Row-wise projection of a query batch. Output pointers may be null;
    // points, if given, must be preallocated to the shape of y.
    virtual void project_batch(const Matrix& y, Matrix* points, Vector* distances,
                               Vector* parameters) const;

    // n sample rows; equispaced walks the parameter uniformly from 0.
    virtual Matrix sample_uniform(int n, RngStream& rng, bool equispaced = false) const = 0;

    // Reach (infinity for affine subspaces, numerical estimate for curves).
    virtual double reach() const = 0;

    // Pointwise scaling: projection satisfies proj_{cM}(x) = c proj_M(x/c).
    virtual std::shared_ptr<const Manifold> scaled(double factor) const;

    // Orthonormal columns spanning the tangent space at a point of M.
    virtual Matrix tangent_basis(const Vector& point_on_m) const = 0;

    // Curve kinds rebuild their projection node table; others return self.
    virtual std::shared_ptr<const Manifold> with_resolution(int n_nodes) const;

    virtual std::string describe() const = 0;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

// {x : Ax = b} for a row-orthonormal constraint matrix A (k x d, k may be
// zero). Uniform sampling requires a bounded patch in intrinsic coordinates.
class AffineSubspace final : public Manifold {
public:
    AffineSubspace(Matrix constraints, Vector offset);

    void set_patch(Vector lo, Vector hi); // intrinsic box, sizes = d - k
    const Matrix& constraints() const { return constraints_; }
    const Vector& offset() const { return offset_; }
    // Projector onto the tangent space: P z = z - A^T A z.
    Vector tangent_project(const Vector& z) const;

    Index ambient_dim() const override { return constraints_.cols(); }
    Index intrinsic_dim() const override { return constraints_.cols() - constraints_.rows(); }
    ProjectionResult project(const Vector& x) const override;
    Matrix sample_uniform(int n, RngStream& rng, bool equispaced) const override;
    double reach() const override;
    std::shared_ptr<const Manifold> scaled(double factor) const override;
    Matrix tangent_basis(const Vector& point_on_m) const override;
    std::string describe() const override;

private:
    Matrix constraints_; // A, k x d
    Vector offset_;      // b, k
    Vector base_point_;  // A^T b
    Matrix tangent_;     // d x (d - k), orthonormal
    std::optional<std::pair<Vector, Vector>> patch_;
};

class Circle final : public Manifold {
public:
    Circle(double radius, Vector center);

    double radius() const { return radius_; }
    const Vector& center() const { return center_; }

    Index ambient_dim() const override { return 2; }
    Index intrinsic_dim() const override { return 1; }
    ProjectionResult project(const Vector& x) const override;
    Matrix sample_uniform(int n, RngStream& rng, bool equispaced) const override;
    double reach() const override { return radius_; }
    std::shared_ptr<const Manifold> scaled(double factor) const override;
    Matrix tangent_basis(const Vector& point_on_m) const override;
    std::string describe() const override;

private:
    double radius_;
    Vector center_;
};

// Closed curve backed by a node table; projection is the argmin over nodes.
class ParametricCurve : public Manifold {
public:
    Index ambient_dim() const override { return nodes_.cols(); }
    Index intrinsic_dim() const override { return 1; }
    ProjectionResult project(const Vector& x) const override;
    void project_batch(const Matrix& y, Matrix* points, Vector* distances,
                       Vector* parameters) const override;
    Matrix sample_uniform(int n, RngStream& rng, bool equispaced) const override;
    double reach() const override;
    Matrix tangent_basis(const Vector& point_on_m) const override;

    const Matrix& nodes() const { return nodes_; }
    int resolution() const { return static_cast<int>(nodes_.rows()); }

protected:
    // Point at parameter theta in [0, 2 pi). Node kinds interpolate to the
    // nearest node.
    virtual Vector parameter_point(double theta) const;

    void build_nodes(const Matrix& nodes);

    Matrix nodes_;       // n x d
    Vector node_sqnorm_; // n

private:
    mutable std::once_flag reach_once_;
    mutable double reach_cache_ = 0.0;
};

// Polar curve r(theta) = R + a sin(m theta).
class WavyCircle final : public ParametricCurve {
public:
    WavyCircle(double base_radius, double amplitude, int frequency, int resolution = 1024);

    double base_radius() const { return base_radius_; }
    double amplitude() const { return amplitude_; }
    int frequency() const { return frequency_; }

    std::shared_ptr<const Manifold> with_resolution(int n_nodes) const override;
    std::string describe() const override;

protected:
    Vector parameter_point(double theta) const override;

private:
    double base_radius_;
    double amplitude_;
    int frequency_;
};

// Closed curve of Gaussian-bump images: pixel grid spans [-1, 1]^2, the bump
// centre moves around the circle of the given radius, and every image is
// rescaled to peak value 1.
class BumpCurve final : public ParametricCurve {
public:
    BumpCurve(double eta, int side, double circle_radius = 0.5, int resolution = 1024);

    double eta() const { return eta_; }
    int side() const { return side_; }
    double circle_radius() const { return circle_radius_; }

    std::shared_ptr<const Manifold> with_resolution(int n_nodes) const override;
    std::string describe() const override;

protected:
    Vector parameter_point(double theta) const override;

private:
    double eta_;
    int side_;
    double circle_radius_;
};

// Ordered point list approximating a closed curve (>= 3 nodes).
class CurveCloud final : public ParametricCurve {
public:
    explicit CurveCloud(Matrix nodes);
    std::string describe() const override;
};

Vector bump_image(double eta, int side, double circle_radius, double theta);

ManifoldPtr make_affine(Matrix constraints, Vector offset);
ManifoldPtr make_circle(double radius, Vector center = Vector::Zero(2));
ManifoldPtr make_wavy_circle(double base_radius = 1.0, double amplitude = 0.15,
                             int frequency = 8, int resolution = 1024);
ManifoldPtr make_bump_curve(double eta, int side, double circle_radius = 0.5,
                            int resolution = 1024);
ManifoldPtr make_curve_cloud(Matrix nodes);

// JSON: {"kind":"circle","radius":..,"center":[..]} | {"kind":"wavy_circle",..}
// | {"kind":"bump_curve",..} | {"kind":"affine","A":[[..]],"b":[..]}
// | {"kind":"curve_cloud","path":"nodes.csv"}.
ManifoldPtr manifold_from_json(const std::string& json_text);

} // namespace geoscore
