#include "geoscore/metrics.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/parallel.hpp"
#include "geoscore/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace geoscore {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Deterministic unit normal direction at a point of the manifold.
Vector fallback_normal(const Manifold& manifold, const Vector& point_on_m) {
    const Matrix tangent = manifold.tangent_basis(point_on_m);
    const Index d = point_on_m.size();
    Eigen::HouseholderQR<Matrix> qr(tangent);
    const Matrix q = qr.householderQ();
    if (tangent.cols() >= d) throw NumericalError("manifold has no normal directions");
    return q.col(tangent.cols());
}
} // namespace

double tail_probability(const Matrix& samples, const Manifold& manifold, double r) {
    if (samples.rows() == 0) throw DomainError("tail_probability of an empty sample set");
    Vector dists(samples.rows());
    manifold.project_batch(samples, nullptr, &dists, nullptr);
    const auto hits = static_cast<double>((dists.array() >= r).count());
    return hits / static_cast<double>(samples.rows());
}

double dist_to_set(const Vector& x, const Matrix& points) {
    if (points.rows() == 0) throw DomainError("dist_to_set of an empty point set");
    return (points.rowwise() - x.transpose()).rowwise().norm().minCoeff();
}

LateralDistance lateral_distance(const Vector& x, const Dataset& dataset,
                                 const Manifold& manifold) {
    const double d_data = dist_to_set(x, dataset.points());
    const double d_mani = manifold.distance(x);
    LateralDistance out;
    const double gap = d_data * d_data - d_mani * d_mani;
    if (gap < 0.0) {
        out.value = 0.0;
        out.clamped = true;
    } else {
        out.value = std::sqrt(gap);
    }
    return out;
}

double nll(const SmoothedScoreModel& model, const DiffusionConfig& config,
           const Matrix& eval_points, RngStream& rng) {
    if (eval_points.rows() == 0) throw DomainError("nll of an empty eval set");
    RngStream offsets_rng = rng.child("pf_ode_offsets");
    const FrozenSmoothing frozen = model.freeze(offsets_rng);
    const NoiseSchedule& sched = model.empirical().schedule();
    Vector lls(eval_points.rows());
    parallel_for(static_cast<std::size_t>(eval_points.rows()), [&](std::size_t i) {
        const Vector x = eval_points.row(static_cast<Index>(i)).transpose();
        const Trajectory traj =
            pf_ode_solve(model, config, x, OdeDirection::Forward, frozen);
        lls[static_cast<Index>(i)] =
            sched.prior_log_density(traj.states.front()) + traj.log_det_accum;
    });
    return -lls.mean();
}

double anisotropy(const Vector& image, int side) {
    if (static_cast<Index>(side) * side != image.size())
        throw DomainError("image size does not match side^2");
    double total = 0.0;
    double mu = 0.0, mv = 0.0;
    for (int iy = 0; iy < side; ++iy) {
        const double v = (iy + 0.5) / side;
        for (int ix = 0; ix < side; ++ix) {
            const double u = (ix + 0.5) / side;
            double val = image[static_cast<Index>(iy) * side + ix];
            if (val < 0.1) val = 0.0;
            total += val;
            mu += val * u;
            mv += val * v;
        }
    }
    if (total <= 0.0) throw DomainError("image is all zero after thresholding");
    mu /= total;
    mv /= total;
    double cuu = 0.0, cvv = 0.0, cuv = 0.0;
    for (int iy = 0; iy < side; ++iy) {
        const double v = (iy + 0.5) / side;
        for (int ix = 0; ix < side; ++ix) {
            const double u = (ix + 0.5) / side;
            double val = image[static_cast<Index>(iy) * side + ix];
            if (val < 0.1) val = 0.0;
            cuu += val * (u - mu) * (u - mu);
            cvv += val * (v - mv) * (v - mv);
            cuv += val * (u - mu) * (v - mv);
        }
    }
    cuu /= total;
    cvv /= total;
    cuv /= total;
    const double tr = cuu + cvv;
    const double det = cuu * cvv - cuv * cuv;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double lmax = tr / 2.0 + disc;
    const double lmin = tr / 2.0 - disc;
    if (lmin <= 0.0) throw NumericalError("degenerate image covariance");
    return lmax / lmin;
}

ThetaHistogram theta_histogram(const Matrix& samples, const Manifold& manifold, int bins) {
    if (bins < 1) throw DomainError("theta_histogram requires bins >= 1");
    if (samples.rows() == 0) throw DomainError("theta_histogram of an empty sample set");
    if (!manifold.project(samples.row(0).transpose()).parameter.has_value())
        throw DomainError("theta_histogram needs a curve manifold with an intrinsic parameter");
    Vector params(samples.rows());
    manifold.project_batch(samples, nullptr, nullptr, &params);
    ThetaHistogram out;
    out.edges.resize(static_cast<std::size_t>(bins) + 1);
    out.counts.assign(static_cast<std::size_t>(bins), 0);
    for (int b = 0; b <= bins; ++b) out.edges[static_cast<std::size_t>(b)] = kTwoPi * b / bins;
    for (Index i = 0; i < params.size(); ++i) {
        auto b = static_cast<int>(params[i] / kTwoPi * bins);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        ++out.counts[static_cast<std::size_t>(b)];
    }
    return out;
}

double adapted_residual(const EmpiricalScore& score, const Manifold& manifold, double h,
                        double epsilon, const Grid& grid,
                        const std::vector<Index>* stencil_axes) {
    grid.validate();
    const Index d = score.dim();
    if (grid.dim() != d) throw ConfigError("grid dimension does not match dataset");
    if (!(h > 0.0)) throw DomainError("stencil step must be > 0");

    const double mu_eps = score.schedule().mu_sigma(epsilon).mu;
    const ManifoldPtr scaled = manifold.scaled(mu_eps);

    // Data must lie on the manifold.
    for (Index i = 0; i < score.dataset().size(); ++i) {
        if (manifold.distance(score.dataset().point(i)) > 1e-9)
            throw DomainError("training data does not lie on the manifold");
    }

    std::vector<Index> axes;
    if (stencil_axes) {
        axes = *stencil_axes;
    } else {
        axes.resize(static_cast<std::size_t>(d));
        for (Index j = 0; j < d; ++j) axes[static_cast<std::size_t>(j)] = j;
    }
    const auto n_nodes = static_cast<Index>(2 * axes.size());
    const double w = 1.0 / static_cast<double>(n_nodes);

    const Index n_points = grid.point_count();
    Vector diff(n_points);
    parallel_for(static_cast<std::size_t>(n_points), [&](std::size_t c) {
        const Vector x = grid.point(static_cast<Index>(c));
        Matrix nodes(n_nodes, d);
        Index row = 0;
        for (Index j : axes) {
            Vector plus = x;
            plus[j] += h;
            nodes.row(row++) = plus.transpose();
            Vector minus = x;
            minus[j] -= h;
            nodes.row(row++) = minus.transpose();
        }

        // Level radius of the stencil against the scaled manifold.
        Matrix proj(n_nodes, d);
        Vector dists(n_nodes);
        scaled->project_batch(nodes, &proj, &dists, nullptr);
        const double r = std::sqrt(w * dists.squaredNorm());

        Matrix adapted(n_nodes, d);
        for (Index j = 0; j < n_nodes; ++j) {
            const Vector u = (nodes.row(j) - proj.row(j)).transpose();
            const double norm = u.norm();
            if (norm < 1e-13 * (1.0 + nodes.row(j).norm())) {
                if (r < 1e-13) {
                    adapted.row(j) = proj.row(j);
                } else {
                    // Node sits on the manifold: push along a fixed normal.
                    const Vector nrm = fallback_normal(*scaled, proj.row(j).transpose());
                    adapted.row(j) = proj.row(j) + r * nrm.transpose();
                }
            } else {
                adapted.row(j) = proj.row(j) + (r / norm) * u.transpose();
            }
        }

        Vector ld_plain(n_nodes), ld_adapted(n_nodes);
        score.evaluate_batch(epsilon, nodes, &ld_plain, nullptr, nullptr);
        score.evaluate_batch(epsilon, adapted, &ld_adapted, nullptr, nullptr);
        diff[static_cast<Index>(c)] = w * (ld_plain.sum() - ld_adapted.sum());
    });

    const double mean = diff.mean();
    return (diff.array() - mean).abs().maxCoeff();
}

SampleMetrics summarize_samples(const Matrix& samples, const Dataset& dataset,
                                const Manifold& manifold) {
    if (samples.rows() == 0) throw DomainError("summarize_samples of an empty sample set");
    SampleMetrics out;
    Vector dists(samples.rows());
    manifold.project_batch(samples, nullptr, &dists, nullptr);
    for (Index i = 0; i < samples.rows(); ++i) {
        const Vector x = samples.row(i).transpose();
        const double dd = dist_to_set(x, dataset.points());
        out.mean_dist_data += dd;
        out.mean_dist_manifold += dists[i];
        const double gap = dd * dd - dists[i] * dists[i];
        if (gap < 0.0) {
            ++out.lateral_clamped;
        } else {
            out.mean_lateral += std::sqrt(gap);
        }
    }
    const auto n = static_cast<double>(samples.rows());
    out.mean_dist_data /= n;
    out.mean_dist_manifold /= n;
    out.mean_lateral /= n;
    return out;
}

} // namespace geoscore
