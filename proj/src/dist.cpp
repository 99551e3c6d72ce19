#include "kpst/dist.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <sstream>

#include "kpst/error.hpp"

namespace kpst {

namespace {

void require_df(int df) {
    if (df < 1) {
        throw Error(ErrorCode::InvalidArgument, "chi-square degrees of freedom must be >= 1");
    }
}

void require_x(double x) {
    if (!std::isfinite(x) || x < 0.0) {
        std::ostringstream os;
        os << "chi-square argument must be finite and >= 0, got " << x;
        throw Error(ErrorCode::InvalidArgument, os.str());
    }
}

double chi2_pdf(double x, int df) {
    if (x <= 0.0) return df == 2 ? 0.5 : 0.0;
    return 0.5 * boost::math::gamma_p_derivative(0.5 * df, 0.5 * x);
}

}  // namespace

double chi2_cdf(double x, int df) {
    require_df(df);
    require_x(x);
    if (x == 0.0) return 0.0;
    return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

double chi2_sf(double x, int df) {
    require_df(df);
    require_x(x);
    if (x == 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double chi2_quantile(double prob, int df) {
    require_df(df);
    if (!(prob > 0.0 && prob < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "chi2_quantile: probability must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(df));
    while (chi2_cdf(hi, df) < prob) {
        lo = hi;
        hi *= 2.0;
    }
    // Bisection until the bracket is tight, then Newton with bracket safeguard.
    for (int it = 0; it < 200 && (hi - lo) > 1e-6 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (chi2_cdf(mid, df) < prob ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
        const double f = chi2_cdf(x, df) - prob;
        if (f == 0.0) break;
        (f < 0.0 ? lo : hi) = x;
        const double d = chi2_pdf(x, df);
        double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * x) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double noncentral_chi2_cdf(double x, const Chi2Spec& spec) {
    require_df(spec.df);
    require_x(x);
    const double delta = spec.noncentrality;
    if (!std::isfinite(delta) || delta < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "noncentrality must be finite and >= 0");
    }
    if (delta == 0.0) return chi2_cdf(x, spec.df);
    if (x == 0.0) return 0.0;

    constexpr double tail = 1e-13;
    const double lambda = 0.5 * delta;
    const auto weight = [lambda](long j) {
        return std::exp(-lambda + j * std::log(lambda) - std::lgamma(j + 1.0));
    };
    const auto term = [&](long j) { return chi2_cdf(x, spec.df + 2 * static_cast<int>(j)); };

    const long mode = static_cast<long>(std::floor(lambda));
    double sum = weight(mode) * term(mode);
    // Upward: stop once P(Poisson > j) < tail.
    for (long j = mode + 1;; ++j) {
        sum += weight(j) * term(j);
        if (boost::math::gamma_p(static_cast<double>(j + 1), lambda) < tail) break;
    }
    // Downward: stop once P(Poisson < j) < tail.
    for (long j = mode - 1; j >= 0; --j) {
        sum += weight(j) * term(j);
        if (j == 0 || boost::math::gamma_q(static_cast<double>(j), lambda) < tail) break;
    }
    return std::min(1.0, std::max(0.0, sum));
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed),
      stream_(stream),
      engine_(splitmix64(seed) ^ splitmix64(stream + 0x9E3779B97F4A7C15ULL)) {}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

void RngStream::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

std::vector<double> standard_normal(std::uint64_t seed, std::uint64_t stream, std::size_t n) {
    std::vector<double> out(n);
    RngStream rng(seed, stream);
    rng.fill_normal(out);
    return out;
}

}  // namespace kpst
