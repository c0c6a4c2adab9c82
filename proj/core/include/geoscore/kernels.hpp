#pragma once

#include "geoscore/manifold.hpp"
#include "geoscore/types.hpp"

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace geoscore {

class RngStream;

// Smoothing kernel k_x: a distribution around each query point x.
class Kernel {
public:
    virtual ~Kernel() = default;

    virtual Index dim_hint() const { return -1; } // -1: any dimension

    virtual Vector draw(const Vector& x, RngStream& rng) const = 0;

    // n draws at the same centre; out is resized to n x dim(x).
    virtual void draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const;

    // True when k_x = law(x + xi) with xi independent of x, so smoothing
    // commutes with differentiation.
    virtual bool location_independent() const = 0;

    // Deterministic quadrature nodes (point, weight), when the kernel has
    // them; otherwise throws CapabilityError.
    virtual std::vector<std::pair<Vector, double>> nodes(const Vector& x) const;
    virtual bool has_nodes() const { return false; }

    // Compact JSON descriptor with the exact parameters in effect.
    virtual std::string describe() const = 0;
};

using KernelPtr = std::shared_ptr<const Kernel>;

// x + sigma z. sigma = 0 is the delta kernel (no smoothing).
class IsotropicGaussian final : public Kernel {
public:
    explicit IsotropicGaussian(double sigma);
    double sigma() const { return sigma_; }

    Vector draw(const Vector& x, RngStream& rng) const override;
    void draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const override;
    bool location_independent() const override { return true; }
    std::string describe() const override;

private:
    double sigma_;
};

// Uniform draw from the 2d stencil {x +- h e_j}; exposes exact quadrature
// nodes with equal weights.
class FixedStencil final : public Kernel {
public:
    explicit FixedStencil(double h);
    double h() const { return h_; }

    Vector draw(const Vector& x, RngStream& rng) const override;
    bool location_independent() const override { return true; }
    std::vector<std::pair<Vector, double>> nodes(const Vector& x) const override;
    bool has_nodes() const override { return true; }
    std::string describe() const override;

private:
    double h_;
};

// Gaussian in the tangent/normal frame of the manifold at the projection of
// the query point.
class AnisotropicGaussian final : public Kernel {
public:
    AnisotropicGaussian(double sigma_tangent, double sigma_normal, ManifoldPtr frame_source);

    Vector draw(const Vector& x, RngStream& rng) const override;
    bool location_independent() const override { return false; }
    std::string describe() const override;

private:
    double sigma_tangent_;
    double sigma_normal_;
    ManifoldPtr frame_;
};

// Push-forward of a location-independent base kernel onto the level set
// {dist(., scale * M) = r(x)}, where r(x)^2 is the mean squared distance of
// base draws to the scaled manifold. Draws move radially through the
// projection point; the Monte Carlo estimate of r(x) is deterministic per x
// and cached.
class LevelSetAdapted final : public Kernel {
public:
    LevelSetAdapted(KernelPtr base, ManifoldPtr manifold, double epsilon_scale,
                    int r_samples = 256);

    Vector draw(const Vector& x, RngStream& rng) const override;
    void draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const override;
    bool location_independent() const override { return false; }
    std::string describe() const override;

    double level_radius(const Vector& x) const; // r(x)

private:
    Vector project_to_level(const Vector& y, double radius, RngStream& rng, const Vector& x,
                            int attempts_left) const;

    KernelPtr base_;
    ManifoldPtr scaled_manifold_;
    double epsilon_scale_;
    int r_samples_;
    mutable std::shared_mutex cache_mutex_;
    mutable std::unordered_map<std::string, double> r_cache_;
};

// Adds sigma z, then projects onto the translated manifold M + (x - proj(x)),
// the copy of M passing through x.
class ShiftedManifoldAdapted final : public Kernel {
public:
    ShiftedManifoldAdapted(double sigma, ManifoldPtr manifold, int n_proj_nodes = 0);

    Vector draw(const Vector& x, RngStream& rng) const override;
    void draw_batch(const Vector& x, Index n, RngStream& rng, Matrix& out) const override;
    bool location_independent() const override { return false; }
    std::string describe() const override;

    double sigma() const { return sigma_; }
    const ManifoldPtr& manifold() const { return manifold_; }

private:
    double sigma_;
    ManifoldPtr manifold_;
    int n_proj_nodes_;
};

struct KernelDiagnostics {
    double K = 0.0;     // sqrt(max over probes of mean squared deviation)
    double K_max = 0.0; // largest absolute deviation observed
    int probe_count = 0;
};

// Measures how much kernel draws move the distance-to-manifold: per probe x,
// the deviation |dist(Y, M) - dist(x, M)| over draws Y ~ k_x.
KernelDiagnostics estimate_K(const Kernel& kernel, const Manifold& manifold,
                             const Matrix& probes, int samples_per_probe, RngStream& rng);

KernelPtr kernel_from_json(const std::string& json_text);

} // namespace geoscore
