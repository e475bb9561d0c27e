#pragma once

#include "boltzgen/common.hpp"
#include "boltzgen/energy.hpp"
#include "boltzgen/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace boltzgen {

struct EstimatorConfig {
    long K = 500;
    std::optional<double> score_clip;
    std::uint64_t seed = 0;
};

struct NoisedPoint {
    Vec x;
    double t = 0.0;
    double sigma = 0.0;  // cached sigma(t)
};

// Batched time-indexed energy, e.g. a trained network or an analytic noised
// oracle; evaluates columns of xs at a single time s.
using TimeEnergy = std::function<Vec(const Mat& xs, double s)>;

namespace detail {

// -(logsumexp(-e) - log K) over the given energies, fixed summation order.
inline double neg_logmeanexp_neg(const Vec& energies) {
    const Eigen::Index K = energies.size();
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < K; ++i) m = std::max(m, -energies[i]);
    if (!std::isfinite(m)) return -m;  // all-infinite energies
    double s = 0.0;
    for (Eigen::Index i = 0; i < K; ++i) s += std::exp(-energies[i] - m);
    return -(m + std::log(s) - std::log(static_cast<double>(K)));
}

// Softmax of -energies, in place over a copy.
inline Vec self_normalized_weights(const Vec& energies) {
    const Eigen::Index K = energies.size();
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < K; ++i) m = std::max(m, -energies[i]);
    Vec w(K);
    double s = 0.0;
    for (Eigen::Index i = 0; i < K; ++i) {
        w[i] = std::exp(-energies[i] - m);
        s += w[i];
    }
    w /= s;
    return w;
}

inline Mat perturbation_samples(const Vec& x, double sd, const Mat& offsets) {
    Mat s = sd * offsets;
    s.colwise() += x;
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Offset-explicit cores. `offsets` is a d x K matrix of standard normals;
// the sample cloud is x + sd * offsets. Keeping the draw explicit lets tests
// feed transformed noise streams (e.g. rotated) through the same arithmetic.
// ---------------------------------------------------------------------------

inline double mc_energy_with_offsets(const Energy& E, const Vec& x, double sigma, const Mat& offsets) {
    const Eigen::Index K = offsets.cols();
    Vec e(K);
    if (sigma == 0.0) {
        double v = E.energy(x);
        e.setConstant(v);
    } else {
        Mat samples = detail::perturbation_samples(x, sigma, offsets);
        for (Eigen::Index i = 0; i < K; ++i) e[i] = E.energy(samples.col(i));
    }
    return detail::neg_logmeanexp_neg(e);
}

inline Vec mc_score_with_offsets(const Energy& E, const Vec& x, double sigma, const Mat& offsets,
                                 std::optional<double> clip = std::nullopt) {
    const Eigen::Index K = offsets.cols();
    if (sigma == 0.0) {
        Vec s = -E.gradient(x);
        if (clip) clip_to_norm(s, *clip);
        return s;
    }
    Mat samples = detail::perturbation_samples(x, sigma, offsets);
    Vec e(K);
    Mat neggrad(x.size(), K);
    for (Eigen::Index i = 0; i < K; ++i) {
        e[i] = E.energy(samples.col(i));
        neggrad.col(i) = -E.gradient(samples.col(i));
    }
    Vec w = detail::self_normalized_weights(e);
    Vec s = Vec::Zero(x.size());
    for (Eigen::Index i = 0; i < K; ++i) s += w[i] * neggrad.col(i);
    if (clip) clip_to_norm(s, *clip);
    return s;
}

inline Vec tweedie_denoiser_with_offsets(const Energy& E, const Vec& x, double sigma, const Mat& offsets) {
    if (!(sigma > 0.0)) throw std::invalid_argument("tweedie denoiser: needs sigma > 0");
    const Eigen::Index K = offsets.cols();
    Mat samples = detail::perturbation_samples(x, sigma, offsets);
    Vec e(K);
    for (Eigen::Index i = 0; i < K; ++i) e[i] = E.energy(samples.col(i));
    Vec w = detail::self_normalized_weights(e);
    Vec d = Vec::Zero(x.size());
    for (Eigen::Index i = 0; i < K; ++i) d += w[i] * samples.col(i);
    return d;
}

// ---------------------------------------------------------------------------
// Seeded estimators. All of them draw the d x K offset matrix from
// Rng(cfg.seed) in the same fixed order, so estimators sharing a seed share
// the sample cloud, and identical (seed, K, point) give identical output.
// ---------------------------------------------------------------------------

inline Mat draw_offsets(int dim, long K, std::uint64_t seed) {
    Rng rng(seed, {0x0FF5ull});
    return rng.normal_mat(dim, K);
}

struct McEnergyResult {
    double value = 0.0;
    double stderr_est = 0.0;  // delta-method standard error from the same draw
};

inline McEnergyResult mc_energy_detailed(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    if (cfg.K < 1) throw std::invalid_argument("estimator: K must be >= 1");
    Mat offsets = draw_offsets(static_cast<int>(p.x.size()), cfg.K, cfg.seed);
    const Eigen::Index K = offsets.cols();
    Vec e(K);
    if (p.sigma == 0.0) {
        e.setConstant(E.energy(p.x));
    } else {
        Mat samples = detail::perturbation_samples(p.x, p.sigma, offsets);
        for (Eigen::Index i = 0; i < K; ++i) e[i] = E.energy(samples.col(i));
    }
    McEnergyResult r;
    r.value = detail::neg_logmeanexp_neg(e);
    if (K > 1) {
        // Var[-log(mean Y)] ~ Var[Y] / (K mean(Y)^2), computed on shifted Y.
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < K; ++i) m = std::max(m, -e[i]);
        Vec u(K);
        for (Eigen::Index i = 0; i < K; ++i) u[i] = std::exp(-e[i] - m);
        double mu = u.mean();
        double var = (u.array() - mu).square().sum() / static_cast<double>(K - 1);
        r.stderr_est = std::sqrt(var / static_cast<double>(K)) / mu;
    }
    return r;
}

inline double mc_energy(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    return mc_energy_detailed(E, p, cfg).value;
}

struct McVectorResult {
    Vec value;
    Vec stderr_est;  // componentwise self-normalized-IS standard errors
};

inline McVectorResult mc_score_detailed(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    if (cfg.K < 1) throw std::invalid_argument("estimator: K must be >= 1");
    const int d = static_cast<int>(p.x.size());
    Mat offsets = draw_offsets(d, cfg.K, cfg.seed);
    McVectorResult r;
    if (p.sigma == 0.0) {
        r.value = -E.gradient(p.x);
        r.stderr_est = Vec::Zero(d);
        if (cfg.score_clip) clip_to_norm(r.value, *cfg.score_clip);
        return r;
    }
    Mat samples = detail::perturbation_samples(p.x, p.sigma, offsets);
    Vec e(cfg.K);
    Mat f(d, cfg.K);
    for (long i = 0; i < cfg.K; ++i) {
        e[i] = E.energy(samples.col(i));
        f.col(i) = -E.gradient(samples.col(i));
    }
    Vec w = detail::self_normalized_weights(e);
    Vec s = Vec::Zero(d);
    for (long i = 0; i < cfg.K; ++i) s += w[i] * f.col(i);
    Vec se = Vec::Zero(d);
    for (long i = 0; i < cfg.K; ++i) se += (w[i] * w[i]) * (f.col(i) - s).array().square().matrix();
    r.value = s;
    r.stderr_est = se.array().sqrt();
    if (cfg.score_clip) clip_to_norm(r.value, *cfg.score_clip);
    return r;
}

inline Vec mc_score(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    return mc_score_detailed(E, p, cfg).value;
}

inline McVectorResult tweedie_denoiser_detailed(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    if (cfg.K < 1) throw std::invalid_argument("estimator: K must be >= 1");
    if (!(p.sigma > 0.0)) throw std::invalid_argument("tweedie denoiser: needs sigma > 0");
    const int d = static_cast<int>(p.x.size());
    Mat offsets = draw_offsets(d, cfg.K, cfg.seed);
    Mat samples = detail::perturbation_samples(p.x, p.sigma, offsets);
    Vec e(cfg.K);
    for (long i = 0; i < cfg.K; ++i) e[i] = E.energy(samples.col(i));
    Vec w = detail::self_normalized_weights(e);
    Vec dmean = Vec::Zero(d);
    for (long i = 0; i < cfg.K; ++i) dmean += w[i] * samples.col(i);
    Vec se = Vec::Zero(d);
    for (long i = 0; i < cfg.K; ++i) se += (w[i] * w[i]) * (samples.col(i) - dmean).array().square().matrix();
    return {dmean, se.array().sqrt()};
}

inline Vec tweedie_denoiser(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    return tweedie_denoiser_detailed(E, p, cfg).value;
}

// Score via Tweedie's identity: (denoiser - x_t) / sigma_t^2.
inline Vec tweedie_score(const Energy& E, const NoisedPoint& p, const EstimatorConfig& cfg) {
    Vec d = tweedie_denoiser(E, p, cfg);
    Vec s = (d - p.x) / (p.sigma * p.sigma);
    if (cfg.score_clip) clip_to_norm(s, *cfg.score_clip);
    return s;
}

// ---------------------------------------------------------------------------
// Bootstrap estimator: noised energy at level t assembled from a (learned or
// exact) noised energy at a lower level s, sampling in the thinner kernel
// N(x_t, (sigma_t^2 - sigma_s^2) I). E_phi is evaluated value-only, so no
// gradient flows through it.
// ---------------------------------------------------------------------------

inline double bootstrap_energy(const TimeEnergy& E_phi, const NoisedPoint& p, double s, double sigma_s,
                               const EstimatorConfig& cfg) {
    if (!(s < p.t)) throw std::invalid_argument("bootstrap estimator: needs s < t");
    if (cfg.K < 1) throw std::invalid_argument("estimator: K must be >= 1");
    double var = p.sigma * p.sigma - sigma_s * sigma_s;
    if (var < 0.0) throw std::invalid_argument("bootstrap estimator: needs sigma_s <= sigma_t");
    const int d = static_cast<int>(p.x.size());
    Mat offsets = draw_offsets(d, cfg.K, cfg.seed);
    Mat samples = detail::perturbation_samples(p.x, std::sqrt(var), offsets);
    Vec e = E_phi(samples, s);
    return detail::neg_logmeanexp_neg(e);
}

// Two-stage K*K estimator: outer draws in N(x_t, (sigma_t^2 - sigma_s^2) I),
// inner draws in N(., sigma_s^2 I), pooled through one logsumexp. Outer
// offsets are drawn first, in the same order mc_energy uses, so at
// sigma_s = 0 it reproduces mc_energy's draw under a shared seed.
inline double sequential_energy(const Energy& E, const NoisedPoint& p, double s, double sigma_s,
                                const EstimatorConfig& cfg) {
    if (!(s < p.t) || s < 0.0) throw std::invalid_argument("sequential estimator: needs 0 <= s < t");
    if (cfg.K < 1) throw std::invalid_argument("estimator: K must be >= 1");
    double var = p.sigma * p.sigma - sigma_s * sigma_s;
    if (var < 0.0) throw std::invalid_argument("sequential estimator: needs sigma_s <= sigma_t");
    const int d = static_cast<int>(p.x.size());
    Rng rng(cfg.seed, {0x0FF5ull});
    Mat outer = rng.normal_mat(d, cfg.K);
    Mat xs = detail::perturbation_samples(p.x, std::sqrt(var), outer);
    Vec e(cfg.K * cfg.K);
    for (long i = 0; i < cfg.K; ++i) {
        if (sigma_s == 0.0) {
            double v = E.energy(xs.col(i));
            e.segment(i * cfg.K, cfg.K).setConstant(v);
        } else {
            for (long j = 0; j < cfg.K; ++j)
                e[i * cfg.K + j] = E.energy(xs.col(i) + sigma_s * rng.normal_vec(d));
        }
    }
    return detail::neg_logmeanexp_neg(e);
}

// ---------------------------------------------------------------------------
// Bootstrap trajectory: time splits with bounded sigma^2 increments.
// ---------------------------------------------------------------------------

struct BootstrapTrajectory {
    std::vector<double> times;  // s_0 = 0 < s_1 < ... < s_n <= 1
    double kappa = 0.0;

    int windows() const { return static_cast<int>(times.size()) - 1; }

    void validate(const std::function<double(double)>& sigma2_of_t) const {
        if (times.size() < 2 || times.front() != 0.0)
            throw std::invalid_argument("bootstrap trajectory: needs s_0 = 0 and at least one window");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1]) || times[i] > 1.0)
                throw std::invalid_argument("bootstrap trajectory: times must be strictly increasing in (0, 1]");
            double gap = sigma2_of_t(times[i]) - sigma2_of_t(times[i - 1]);
            if (gap > kappa * (1.0 + 1e-12))
                throw std::invalid_argument("bootstrap trajectory: sigma^2 increment exceeds kappa");
        }
    }

    // Index i of the window [times[i], times[i+1]) containing t.
    int window_of(double t) const {
        const int n = windows();
        for (int i = 0; i < n; ++i)
            if (t < times[i + 1]) return i;
        return n - 1;
    }
};

// Splits [0, 1] into n windows with equal sigma^2 increments (bisection on
// the monotone sigma^2).
template <typename Schedule>
inline BootstrapTrajectory make_uniform_sigma2_trajectory(const Schedule& sched, int n) {
    if (n < 1) throw std::invalid_argument("bootstrap trajectory: need n >= 1");
    double lo2 = sched.sigma2(0.0), hi2 = sched.sigma2(1.0);
    BootstrapTrajectory traj;
    traj.kappa = (hi2 - lo2) / n;
    traj.times.resize(n + 1);
    traj.times[0] = 0.0;
    traj.times[n] = 1.0;
    for (int i = 1; i < n; ++i) {
        double target = lo2 + traj.kappa * i;
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (a + b);
            (sched.sigma2(mid) < target ? a : b) = mid;
        }
        traj.times[i] = 0.5 * (a + b);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Replicate statistics over independent seeds.
// ---------------------------------------------------------------------------

enum class EstimatorKind { McEnergy, McScore, TweedieDenoiser, TweedieScore };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::McEnergy: return "mc_energy";
        case EstimatorKind::McScore: return "mc_score";
        case EstimatorKind::TweedieDenoiser: return "tweedie_denoiser";
        case EstimatorKind::TweedieScore: return "tweedie_score";
    }
    return "?";
}

struct EstimatorStatRow {
    Vec x;
    double t = 0.0;
    std::string estimator;
    double mean = 0.0;      // scalar mean; for vector estimators, norm of the mean vector
    double variance = 0.0;  // unbiased; for vector estimators, trace of sample covariance
    int replicates = 0;
};

// Per-point sample mean and unbiased variance over R replicate seeds derived
// from (cfg.seed, point index, replicate index); independent of scheduling.
inline std::vector<EstimatorStatRow> estimator_statistics(EstimatorKind kind, const Energy& E,
                                                          const std::vector<NoisedPoint>& grid, int R,
                                                          const EstimatorConfig& cfg) {
    if (R < 2) throw std::invalid_argument("estimator statistics: need at least 2 replicates");
    std::vector<EstimatorStatRow> rows(grid.size());
    parallel_for(static_cast<std::int64_t>(grid.size()), [&](std::int64_t gi) {
        const NoisedPoint& p = grid[gi];
        EstimatorStatRow row;
        row.x = p.x;
        row.t = p.t;
        row.estimator = to_string(kind);
        row.replicates = R;
        Rng base(cfg.seed, {0x57A7ull, static_cast<std::uint64_t>(gi)});
        if (kind == EstimatorKind::McEnergy) {
            Vec vals(R);
            for (int r = 0; r < R; ++r) {
                EstimatorConfig c = cfg;
                c.seed = base.derive({static_cast<std::uint64_t>(r)}).next_u64();
                vals[r] = mc_energy(E, p, c);
            }
            row.mean = vals.mean();
            row.variance = (vals.array() - row.mean).square().sum() / (R - 1);
        } else {
            Mat vals(p.x.size(), R);
            for (int r = 0; r < R; ++r) {
                EstimatorConfig c = cfg;
                c.seed = base.derive({static_cast<std::uint64_t>(r)}).next_u64();
                switch (kind) {
                    case EstimatorKind::McScore: vals.col(r) = mc_score(E, p, c); break;
                    case EstimatorKind::TweedieDenoiser: vals.col(r) = tweedie_denoiser(E, p, c); break;
                    case EstimatorKind::TweedieScore: vals.col(r) = tweedie_score(E, p, c); break;
                    default: break;
                }
            }
            Vec mean = vals.rowwise().mean();
            row.mean = mean.norm();
            row.variance = (vals.colwise() - mean).array().square().sum() / (R - 1);
        }
        rows[gi] = std::move(row);
    });
    return rows;
}

}  // namespace boltzgen
