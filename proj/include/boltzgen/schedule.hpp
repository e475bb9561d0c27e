#pragma once

#include "boltzgen/common.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace boltzgen {

enum class ScheduleKind { Geometric, Cosine, Quadratic, Linear };

inline std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Geometric: return "geometric";
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::Quadratic: return "quadratic";
        case ScheduleKind::Linear: return "linear";
    }
    return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "geometric") return ScheduleKind::Geometric;
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "quadratic") return ScheduleKind::Quadratic;
    if (s == "linear") return ScheduleKind::Linear;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

// Noise level sigma(t) of the variance-exploding process on t in [0, 1].
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Geometric;
    double sigma_min = 1e-5;
    double sigma_max = 1.0;
    double cosine_delta = 0.008;

    NoiseSchedule() = default;
    NoiseSchedule(ScheduleKind k, double smin, double smax, double delta = 0.008)
        : kind(k), sigma_min(smin), sigma_max(smax), cosine_delta(delta) {
        if (sigma_min < 0.0 || sigma_max <= 0.0 || sigma_min > sigma_max)
            throw std::invalid_argument("schedule: need 0 <= sigma_min <= sigma_max, sigma_max > 0");
        if (kind == ScheduleKind::Geometric && sigma_min <= 0.0)
            throw std::invalid_argument("schedule: geometric needs sigma_min > 0");
    }

    double sigma(double t) const {
        if (t < 0.0 || t > 1.0) throw std::out_of_range("schedule: t outside [0, 1]");
        switch (kind) {
            case ScheduleKind::Geometric:
                return std::pow(sigma_min, 1.0 - t) * std::pow(sigma_max, t);
            case ScheduleKind::Cosine: {
                double c = std::cos(0.5 * std::numbers::pi * (1.0 + cosine_delta - t) / (1.0 + cosine_delta));
                return sigma_max * c * c;
            }
            case ScheduleKind::Quadratic:
                return sigma_max * t * t;
            case ScheduleKind::Linear:
                return sigma_max * t;
        }
        return 0.0;
    }

    double sigma2(double t) const {
        double s = sigma(t);
        return s * s;
    }

    // d(sigma^2)/dt, closed form per kind; this is g^2(t) of the VE process.
    double g2(double t) const {
        if (t < 0.0 || t > 1.0) throw std::out_of_range("schedule: t outside [0, 1]");
        switch (kind) {
            case ScheduleKind::Geometric:
                return sigma2(t) * 2.0 * std::log(sigma_max / sigma_min);
            case ScheduleKind::Cosine: {
                double u = 0.5 * std::numbers::pi * (1.0 + cosine_delta - t) / (1.0 + cosine_delta);
                double c = std::cos(u), s = std::sin(u);
                return sigma_max * sigma_max * 2.0 * std::numbers::pi / (1.0 + cosine_delta) * c * c * c * s;
            }
            case ScheduleKind::Quadratic:
                return 4.0 * sigma_max * sigma_max * t * t * t;
            case ScheduleKind::Linear:
                return 2.0 * sigma_max * sigma_max * t;
        }
        return 0.0;
    }
};

// Composite Simpson quadrature on [0, t]; panels is rounded up to even.
inline double simpson(const std::function<double(double)>& f, double t, int panels = 256) {
    if (t == 0.0) return 0.0;
    if (panels % 2 != 0) ++panels;
    double h = t / panels;
    double s = f(0.0) + f(t);
    for (int i = 1; i < panels; ++i) s += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Linear SDE dx = -alpha(t) x dt + g(t) dw. The substitution y = x / beta(t)
// turns it into a VE process with variance ve_variance(t), so every
// noised-energy estimator applies unchanged in y-coordinates.
struct GeneralSde {
    std::function<double(double)> alpha;
    std::function<double(double)> g;
    int panels = 256;

    double beta(double t) const {
        return std::exp(-simpson(alpha, t, panels));
    }

    double ve_variance(double t) const {
        auto integrand = [this](double s) {
            double gb = g(s) * beta(s);
            return gb * gb;
        };
        return simpson(integrand, t, panels);
    }

    double ve_sigma(double t) const { return std::sqrt(std::max(0.0, ve_variance(t))); }

    // g^2 of the equivalent VE process in y-coordinates: d(ve_variance)/dt.
    double ve_g2(double t) const {
        double gb = g(t) * beta(t);
        return gb * gb;
    }
};

}  // namespace boltzgen
