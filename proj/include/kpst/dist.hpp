#pragma once

// Chi-square distribution functions and the seedable normal sampler used
// by the Monte Carlo harness.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace kpst {

struct Chi2Spec {
    int df = 1;
    double noncentrality = 0.0;
};

/// P(X <= x) for X ~ chi2(df). Regularized lower incomplete gamma P(df/2, x/2).
double chi2_cdf(double x, int df);
/// P(X > x), computed directly (no 1 - cdf cancellation).
double chi2_sf(double x, int df);

/// Smallest x with chi2_cdf(x, df) = prob, by bracketed bisection followed
/// by Newton polishing on the CDF.
double chi2_quantile(double prob, int df);

/// Noncentral chi-square CDF as a Poisson(delta/2) mixture of central CDFs
/// with df + 2j degrees of freedom. Terms are summed outward from the
/// Poisson mode until both Poisson tails drop below 1e-13.
double noncentral_chi2_cdf(double x, const Chi2Spec& spec);

/// One replication's random stream. The engine is std::mt19937_64 seeded
/// with splitmix64(seed) ^ splitmix64(stream + golden-ratio constant), so a
/// (seed, stream) pair always yields the same sequence. Normals use the
/// Marsaglia polar method on 53-bit uniforms.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double normal();
    void fill_normal(std::span<double> out);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// n standard normal draws from a fresh stream (seed, stream).
std::vector<double> standard_normal(std::uint64_t seed, std::uint64_t stream, std::size_t n);

}  // namespace kpst
