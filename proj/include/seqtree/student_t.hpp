#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>

namespace seqtree {

// Scaled, shifted Student-t: location a, squared scale b, degrees of freedom c.
// Standardized variable z = (y - a) / sqrt(b) follows a standard t with c df.
struct StudentT {
    double location = 0.0;
    double scale2 = 1.0;
    double df = 1.0;

    bool valid() const { return scale2 > 0.0 && df > 0.0; }

    // Variance b*c/(c-2); undefined for c <= 2.
    std::optional<double> variance() const {
        if (df <= 2.0) return std::nullopt;
        return scale2 * df / (df - 2.0);
    }

    double log_pdf(double y) const {
        const double z = (y - location) / std::sqrt(scale2);
        return std_t_log_pdf(z, df) - 0.5 * std::log(scale2);
    }

    double pdf(double y) const { return std::exp(log_pdf(y)); }

    double cdf(double y) const {
        const double z = (y - location) / std::sqrt(scale2);
        return std_t_cdf(z, df);
    }

    double quantile(double p) const {
        boost::math::students_t_distribution<double> d(df);
        return location + std::sqrt(scale2) * boost::math::quantile(d, p);
    }

    static double std_t_log_pdf(double z, double c) {
        return std::lgamma(0.5 * (c + 1.0)) - std::lgamma(0.5 * c)
             - 0.5 * std::log(c * 3.141592653589793238463)
             - 0.5 * (c + 1.0) * std::log1p(z * z / c);
    }

    static double std_t_pdf(double z, double c) { return std::exp(std_t_log_pdf(z, c)); }

    static double std_t_cdf(double z, double c) {
        boost::math::students_t_distribution<double> d(c);
        return boost::math::cdf(d, z);
    }
};

}  // namespace seqtree
