#pragma once

#include "boltzgen/common.hpp"
#include "boltzgen/rng.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace boltzgen {

// Target potential: evaluates the energy and its gradient on flattened
// coordinates. Boltzmann density is proportional to exp(-energy(x)).
class Energy {
public:
    virtual ~Energy() = default;
    virtual double energy(const Vec& x) const = 0;
    virtual Vec gradient(const Vec& x) const = 0;
    virtual int dim() const = 0;
    virtual std::optional<ParticleShape> particles() const { return std::nullopt; }
};

using EnergyPtr = std::shared_ptr<const Energy>;

// ---------------------------------------------------------------------------
// Gaussian mixture with shared isotropic component variance, uniform weights.
// Energy convention: exact negative log-density including normalization.
// ---------------------------------------------------------------------------

struct GmmParams {
    Mat means;               // d x M
    double variance = 40.0;  // per-component isotropic variance

    int dim() const { return static_cast<int>(means.rows()); }
    int modes() const { return static_cast<int>(means.cols()); }
};

// M means drawn uniformly from [-box, box]^d.
inline GmmParams make_gmm_box(int modes, double box, double variance, std::uint64_t seed, int d = 2) {
    GmmParams p;
    p.means.resize(d, modes);
    p.variance = variance;
    Rng rng(seed, {0x6D6Dull});
    for (int m = 0; m < modes; ++m)
        for (int i = 0; i < d; ++i) p.means(i, m) = rng.uniform(-box, box);
    return p;
}

// The 40-mode benchmark mixture: means in [-40, 40]^2, variance 40.
inline GmmParams make_gmm40(std::uint64_t seed) { return make_gmm_box(40, 40.0, 40.0, seed); }

// The 10-mode unit-scale mixture: means in [-1, 1]^2, variance 1/40.
inline GmmParams make_gmm10_unit(std::uint64_t seed) { return make_gmm_box(10, 1.0, 1.0 / 40.0, seed); }

class Gmm final : public Energy {
public:
    explicit Gmm(GmmParams params) : p_(std::move(params)) {
        if (p_.modes() < 1 || p_.variance <= 0.0) throw std::invalid_argument("gmm: empty mixture or nonpositive variance");
    }

    const GmmParams& params() const { return p_; }
    int dim() const override { return p_.dim(); }

    double energy(const Vec& x) const override { return noised_energy(x, 0.0); }

    Vec gradient(const Vec& x) const override { return noised_gradient(x, 0.0); }

    // Exact energy of the Gaussian-smoothed density: convolving the mixture
    // with N(0, sigma^2 I) widens every component variance by sigma^2.
    double noised_energy(const Vec& x, double sigma) const {
        if (sigma < 0.0) throw std::invalid_argument("gmm: negative noise level");
        const double v = p_.variance + sigma * sigma;
        const int d = dim();
        const int M = p_.modes();
        const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * v);
        const double inv2v = 0.5 / v;
        double max_l = -std::numeric_limits<double>::infinity();
        Vec l(M);
        for (int m = 0; m < M; ++m) {
            double q = 0.0;
            for (int i = 0; i < d; ++i) {
                double dx = x[i] - p_.means(i, m);
                q += dx * dx;
            }
            l[m] = log_norm - q * inv2v;
            if (l[m] > max_l) max_l = l[m];
        }
        double s = 0.0;
        for (int m = 0; m < M; ++m) s += std::exp(l[m] - max_l);
        return -(max_l + std::log(s) - std::log(static_cast<double>(M)));
    }

    Vec noised_gradient(const Vec& x, double sigma) const {
        const double v = p_.variance + sigma * sigma;
        const int d = dim();
        const int M = p_.modes();
        const double inv2v = 0.5 / v;
        Vec l(M);
        double max_l = -std::numeric_limits<double>::infinity();
        for (int m = 0; m < M; ++m) {
            double q = 0.0;
            for (int i = 0; i < d; ++i) {
                double dx = x[i] - p_.means(i, m);
                q += dx * dx;
            }
            l[m] = -q * inv2v;
            if (l[m] > max_l) max_l = l[m];
        }
        double s = 0.0;
        for (int m = 0; m < M; ++m) {
            l[m] = std::exp(l[m] - max_l);
            s += l[m];
        }
        Vec g = Vec::Zero(d);
        for (int m = 0; m < M; ++m) {
            double w = l[m] / s;
            for (int i = 0; i < d; ++i) g[i] += w * (x[i] - p_.means(i, m)) / v;
        }
        return g;
    }

    // Exact draw: uniform component, then Gaussian.
    Vec sample(Rng& rng) const {
        int m = static_cast<int>(rng.index(p_.modes()));
        return p_.means.col(m) + std::sqrt(p_.variance) * rng.normal_vec(dim());
    }

    Mat sample_n(Eigen::Index n, Rng& rng) const {
        Mat out(dim(), n);
        for (Eigen::Index j = 0; j < n; ++j) out.col(j) = sample(rng);
        return out;
    }

private:
    GmmParams p_;
};

// ---------------------------------------------------------------------------
// Pairwise double-well potential on n particles.
// ---------------------------------------------------------------------------

struct Dw4Params {
    double a = 0.0;
    double b = -4.0;
    double c = 0.9;
    double d0 = 4.0;
    double tau = 1.0;
    int n_particles = 4;
    int space_dim = 2;
};

class DoubleWell final : public Energy {
public:
    explicit DoubleWell(Dw4Params params = {}) : p_(params) {
        if (p_.tau <= 0.0) throw std::invalid_argument("double-well: tau must be positive");
    }

    const Dw4Params& params() const { return p_; }
    int dim() const override { return p_.n_particles * p_.space_dim; }
    std::optional<ParticleShape> particles() const override {
        return ParticleShape{p_.n_particles, p_.space_dim};
    }

    double energy(const Vec& x) const override {
        const int n = p_.n_particles, sd = p_.space_dim;
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double delta = (x.segment(i * sd, sd) - x.segment(j * sd, sd)).norm() - p_.d0;
                double d2 = delta * delta;
                e += p_.a * delta + p_.b * d2 + p_.c * d2 * d2;
            }
        return e / (2.0 * p_.tau);
    }

    Vec gradient(const Vec& x) const override {
        const int n = p_.n_particles, sd = p_.space_dim;
        Vec g = Vec::Zero(dim());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Vec r = x.segment(i * sd, sd) - x.segment(j * sd, sd);
                double dist = r.norm();
                if (dist == 0.0) continue;  // direction undefined; zero-measure configuration
                double delta = dist - p_.d0;
                double dpair = p_.a + 2.0 * p_.b * delta + 4.0 * p_.c * delta * delta * delta;
                Vec contrib = (dpair / (2.0 * p_.tau)) * (r / dist);
                g.segment(i * sd, sd) += contrib;
                g.segment(j * sd, sd) -= contrib;
            }
        return g;
    }

private:
    Dw4Params p_;
};

// ---------------------------------------------------------------------------
// Lennard-Jones cluster with harmonic confinement and short-range smoothing.
// Below `smoothing_cutoff` the pair term is the cubic with zero slope and
// curvature at d = 0 that matches value and slope at the cutoff, so energy
// and forces stay bounded and continuous as particles approach.
// ---------------------------------------------------------------------------

struct LjParams {
    int n_particles = 13;
    double r_m = 1.0;
    double tau = 1.0;
    double epsilon = 1.0;
    double osc_scale = 0.5;           // weight of the center-of-mass harmonic term
    double smoothing_cutoff = 0.85;   // 0 disables smoothing
    int space_dim = 3;
};

class LennardJones final : public Energy {
public:
    explicit LennardJones(LjParams params = {}) : p_(params) {
        if (p_.r_m <= 0.0 || p_.tau <= 0.0) throw std::invalid_argument("lennard-jones: r_m and tau must be positive");
        if (p_.smoothing_cutoff > 0.0) {
            cut_ = p_.smoothing_cutoff;
            double v = raw_pair(cut_);
            double s = raw_pair_deriv(cut_);
            spline_a_ = v - s * cut_ / 3.0;
            spline_b_ = s / (3.0 * cut_ * cut_);
        }
    }

    const LjParams& params() const { return p_; }
    int dim() const override { return p_.n_particles * p_.space_dim; }
    std::optional<ParticleShape> particles() const override {
        return ParticleShape{p_.n_particles, p_.space_dim};
    }

    double pair_energy(double d) const {
        if (d <= 0.0) throw std::domain_error("degenerate configuration");
        if (cut_ > 0.0 && d < cut_) return spline_a_ + spline_b_ * d * d * d;
        return raw_pair(d);
    }

    double pair_energy_deriv(double d) const {
        if (d <= 0.0) throw std::domain_error("degenerate configuration");
        if (cut_ > 0.0 && d < cut_) return 3.0 * spline_b_ * d * d;
        return raw_pair_deriv(d);
    }

    double energy(const Vec& x) const override {
        const int n = p_.n_particles, sd = p_.space_dim;
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double d = (x.segment(i * sd, sd) - x.segment(j * sd, sd)).norm();
                if (d == 0.0) throw std::domain_error("degenerate configuration");
                e += pair_energy(d);
            }
        Vec com = center_of_mass(x);
        double osc = 0.0;
        for (int i = 0; i < n; ++i) osc += (x.segment(i * sd, sd) - com).squaredNorm();
        return e + p_.osc_scale * 0.5 * osc;
    }

    Vec gradient(const Vec& x) const override {
        const int n = p_.n_particles, sd = p_.space_dim;
        Vec g = Vec::Zero(dim());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Vec r = x.segment(i * sd, sd) - x.segment(j * sd, sd);
                double d = r.norm();
                if (d == 0.0) throw std::domain_error("degenerate configuration");
                Vec contrib = pair_energy_deriv(d) * (r / d);
                g.segment(i * sd, sd) += contrib;
                g.segment(j * sd, sd) -= contrib;
            }
        Vec com = center_of_mass(x);
        for (int i = 0; i < n; ++i)
            g.segment(i * sd, sd) += p_.osc_scale * (x.segment(i * sd, sd) - com);
        return g;
    }

private:
    double raw_pair(double d) const {
        double u6 = std::pow(p_.r_m / d, 6);
        return p_.epsilon / (2.0 * p_.tau) * (u6 - u6 * u6);
    }

    double raw_pair_deriv(double d) const {
        double u6 = std::pow(p_.r_m / d, 6);
        return p_.epsilon / (2.0 * p_.tau) * (6.0 / d) * (2.0 * u6 * u6 - u6);
    }

    Vec center_of_mass(const Vec& x) const {
        const int n = p_.n_particles, sd = p_.space_dim;
        Vec com = Vec::Zero(sd);
        for (int i = 0; i < n; ++i) com += x.segment(i * sd, sd);
        return com / n;
    }

    LjParams p_;
    double cut_ = 0.0;
    double spline_a_ = 0.0;
    double spline_b_ = 0.0;
};

// ---------------------------------------------------------------------------
// Coordinate-rescaled potential: the sampler works on y = x / scale, so the
// wrapped energy is base(scale * y) with gradient scale * grad(scale * y).
// ---------------------------------------------------------------------------

class ScaledEnergy final : public Energy {
public:
    ScaledEnergy(EnergyPtr base, double scale) : base_(std::move(base)), scale_(scale) {
        if (!(scale_ > 0.0)) throw std::invalid_argument("scaled energy: scale must be positive");
    }

    double scale() const { return scale_; }
    const EnergyPtr& base() const { return base_; }
    int dim() const override { return base_->dim(); }
    std::optional<ParticleShape> particles() const override { return base_->particles(); }

    double energy(const Vec& y) const override { return base_->energy(scale_ * y); }
    Vec gradient(const Vec& y) const override { return scale_ * base_->gradient(scale_ * y); }

private:
    EnergyPtr base_;
    double scale_;
};

// Removes the per-configuration center of mass from every column.
inline void remove_com(Mat& x, const ParticleShape& shape) {
    const int n = shape.n_particles, sd = shape.space_dim;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Vec com = Vec::Zero(sd);
        for (int i = 0; i < n; ++i) com += x.col(j).segment(i * sd, sd);
        com /= n;
        for (int i = 0; i < n; ++i) x.col(j).segment(i * sd, sd) -= com;
    }
}

inline void remove_com(Vec& x, const ParticleShape& shape) {
    const int n = shape.n_particles, sd = shape.space_dim;
    Vec com = Vec::Zero(sd);
    for (int i = 0; i < n; ++i) com += x.segment(i * sd, sd);
    com /= n;
    for (int i = 0; i < n; ++i) x.segment(i * sd, sd) -= com;
}

}  // namespace boltzgen
