#pragma once

// Seeded Gaussian-process draws by dense Cholesky factorization.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/rng.hpp"

namespace vmionet {

enum class Kernel { RBF, PeriodicRBF };

struct GPConfig {
    Kernel kernel = Kernel::RBF;
    double lengthscale = 0.2;
    double variance = 1.0;
    double jitter = 1e-8;  // relative to variance
    std::uint64_t seed = 0;

    [[nodiscard]] GPConfig with_seed(std::uint64_t s) const {
        GPConfig c = *this;
        c.seed = s;
        return c;
    }
};

/// Defaults for source terms on [0,1]^2.
inline GPConfig default_source_gp() { return {Kernel::RBF, 0.2, 1.0, 1e-8, 0}; }
/// Defaults for boundary radial perturbations.
inline GPConfig default_boundary_gp() { return {Kernel::PeriodicRBF, 1.0, 0.04, 1e-8, 0}; }

inline constexpr std::size_t kMaxGPPoints = 20000;

inline void validate(const GPConfig& cfg) {
    if (!(cfg.lengthscale > 0.0)) throw InvalidArgument("GP lengthscale must be positive");
    if (!(cfg.variance > 0.0)) throw InvalidArgument("GP variance must be positive");
    if (!(cfg.jitter > 0.0)) throw InvalidArgument("GP jitter must be positive");
}

inline double rbf_kernel(Point2 a, Point2 b, const GPConfig& cfg) {
    const Point2 d = a - b;
    return cfg.variance * std::exp(-dot(d, d) / (2.0 * cfg.lengthscale * cfg.lengthscale));
}

inline double periodic_kernel(double a, double b, const GPConfig& cfg) {
    const double s = std::sin(0.5 * (a - b));
    return cfg.variance * std::exp(-2.0 * s * s / (cfg.lengthscale * cfg.lengthscale));
}

/// Exact kernel matrix (no jitter) for planar points; requires an RBF config.
inline Eigen::MatrixXd gp_covariance(std::span<const Point2> points, const GPConfig& cfg) {
    validate(cfg);
    if (cfg.kernel != Kernel::RBF) throw InvalidArgument("planar points need the RBF kernel");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = cfg.variance;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = rbf_kernel(points[static_cast<std::size_t>(i)],
                                        points[static_cast<std::size_t>(j)], cfg);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

/// Exact kernel matrix for angles; requires a PeriodicRBF config.
inline Eigen::MatrixXd gp_covariance(std::span<const double> angles, const GPConfig& cfg) {
    validate(cfg);
    if (cfg.kernel != Kernel::PeriodicRBF) throw InvalidArgument("angles need the periodic kernel");
    const auto n = static_cast<Eigen::Index>(angles.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = cfg.variance;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = periodic_kernel(angles[static_cast<std::size_t>(i)],
                                             angles[static_cast<std::size_t>(j)], cfg);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

namespace detail {

inline std::vector<double> sample_from_covariance(Eigen::MatrixXd k, const GPConfig& cfg) {
    const Eigen::Index n = k.rows();
    if (static_cast<std::size_t>(n) > kMaxGPPoints)
        throw InvalidArgument("too many GP sample points");
    if (n == 0) return {};
    double jitter = cfg.jitter * cfg.variance;
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
    // Initial jitter, then up to five tenfold escalations.
    for (int attempt = 0; attempt <= 5; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        llt.compute(kj);
        if (llt.info() == Eigen::Success) {
            ok = true;
            break;
        }
        jitter *= 10.0;
    }
    if (!ok) throw NumericalFailure("covariance not PSD");

    RandomStream rng(cfg.seed, 0, "gp");
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    const Eigen::VectorXd s = llt.matrixL() * z;
    return {s.data(), s.data() + n};
}

}  // namespace detail

/// One zero-mean GP draw at planar points (RBF kernel).
inline std::vector<double> gp_sample(std::span<const Point2> points, const GPConfig& cfg) {
    return detail::sample_from_covariance(gp_covariance(points, cfg), cfg);
}

/// One zero-mean GP draw at angles (periodic kernel).
inline std::vector<double> gp_sample(std::span<const double> angles, const GPConfig& cfg) {
    return detail::sample_from_covariance(gp_covariance(angles, cfg), cfg);
}

inline std::string to_string(Kernel k) { return k == Kernel::RBF ? "rbf" : "periodic_rbf"; }

inline Kernel kernel_from_string(const std::string& s) {
    if (s == "rbf") return Kernel::RBF;
    if (s == "periodic_rbf") return Kernel::PeriodicRBF;
    throw InvalidArgument("unknown kernel '" + s + "'");
}

}  // namespace vmionet
