#include "kpst/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace kpst::mc {

namespace {

unsigned worker_count(unsigned requested, Index jobs) {
    unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<Index>(n, std::max<Index>(jobs, 1)));
}

// Runs body(r) for r in [0, count) on a fixed number of workers with a
// static interleaved assignment. The first exception is rethrown.
template <typename Body>
void parallel_for(Index count, unsigned threads, Body&& body) {
    const unsigned workers = worker_count(threads, count);
    if (workers <= 1) {
        for (Index r = 0; r < count; ++r) body(r);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (Index r = w; r < count; r += workers) body(r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void require_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "at least one nominal level is required");
    for (double a : levels) {
        if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "nominal levels must lie in (0, 1)");
    }
}

double rejection_rate(const std::vector<double>& stats, double critical) {
    const auto hits = std::count_if(stats.begin(), stats.end(), [critical](double s) { return s > critical; });
    return static_cast<double>(hits) / static_cast<double>(stats.size());
}

}  // namespace

std::string_view to_string(Dgp dgp) noexcept {
    return dgp == Dgp::Homoskedastic ? "homoskedastic" : "scalar-hetero";
}

Dgp parse_dgp(std::string_view text) {
    if (text == "homoskedastic" || text == "homo") return Dgp::Homoskedastic;
    if (text == "scalar-hetero" || text == "hetero" || text == "scalar_hetero") return Dgp::ScalarHetero;
    throw Error(ErrorCode::InvalidArgument, "unknown DGP '" + std::string(text) + "'");
}

Index sample_size(SizeRule rule, Index p, Index k) {
    const double pk = static_cast<double>(p * k);
    switch (rule) {
        case SizeRule::Pow16Over3: return static_cast<Index>(std::ceil(std::pow(pk, 16.0 / 3.0) - 1e-9));
        case SizeRule::Pow4: return static_cast<Index>(std::llround(std::pow(pk, 4.0)));
        case SizeRule::Explicit: break;
    }
    throw Error(ErrorCode::InvalidArgument, "sample_size: explicit rule has no formula");
}

Index parameter_count(Index p, Index k) { return tri(p) * tri(k); }

KpsSample dgp_null(Index p, Index k, Index n, Dgp dgp, RngStream& rng) {
    if (p < 2 || k < 2) {
        throw Error(ErrorCode::DimensionError, "simulation needs p >= 2 and k >= 2; with p = 1 or k = 1 the null is always true");
    }
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "simulation needs n >= 2");
    Matrix v(n, p);
    Matrix z(n, k);
    for (Index i = 0; i < n; ++i) {
        double ss = 0.0;
        for (Index c = 0; c < k; ++c) {
            z(i, c) = rng.normal();
            ss += z(i, c) * z(i, c);
        }
        const double scale = dgp == Dgp::Homoskedastic ? 1.0 : std::sqrt(ss / static_cast<double>(k));
        for (Index a = 0; a < p; ++a) v(i, a) = scale * rng.normal();
    }
    return KpsSample(std::move(v), std::move(z));
}

LocalDesign local_design(Index n, double sigma) {
    const double root_n = std::sqrt(static_cast<double>(n));
    if (!(std::isfinite(sigma) && sigma >= 0.0 && sigma < root_n)) {
        throw Error(ErrorCode::SigmaOutOfRange, "sigma must lie in [0, sqrt(n))");
    }
    const double s = sigma / root_n;
    const double root = std::sqrt(s * (s + 8.0));
    return {0.5 * s - 0.5 * root + 1.0, 0.5 * s + 0.5 * root + 1.0};
}

KpsSample dgp_local(Index n, double sigma, RngStream& rng) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "simulation needs n >= 2");
    const LocalDesign d = local_design(n, sigma);
    const double sb = std::sqrt(d.b);
    const double sc = std::sqrt(d.c);
    const Index half = n / 2;
    Matrix v(n, 2);
    Matrix z(n, 2);
    for (Index i = 0; i < n; ++i) {
        const bool first = i < half;
        z(i, 0) = (first ? 1.0 : sc) * rng.normal();
        z(i, 1) = (first ? sc : 1.0) * rng.normal();
        v(i, 0) = (first ? sb : 1.0) * rng.normal();
        v(i, 1) = (first ? 1.0 : sb) * rng.normal();
    }
    return KpsSample(std::move(v), std::move(z));
}

Matrix local_population_r(Index n, double sigma) {
    const LocalDesign d = local_design(n, sigma);
    Vector diag(4);
    diag << 0.5 * (d.b + d.c), 0.5 * (1.0 + d.b * d.c), 0.5 * (1.0 + d.b * d.c), 0.5 * (d.b + d.c);
    return diag.asDiagonal();
}

Index SizeExperiment::resolved_n() const {
    return rule == SizeRule::Explicit ? n : sample_size(rule, p, k);
}

std::vector<double> null_statistics(const SizeExperiment& exp) {
    if (exp.reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    if (exp.p < 2 || exp.k < 2) {
        throw Error(ErrorCode::DimensionError, "simulation needs p >= 2 and k >= 2; with p = 1 or k = 1 the null is always true");
    }
    const Index n = exp.resolved_n();
    KpsOptions options;
    options.normalize = exp.normalize;
    std::vector<double> stats(static_cast<std::size_t>(exp.reps));
    parallel_for(exp.reps, exp.threads, [&](Index r) {
        RngStream rng(exp.seed, static_cast<std::uint64_t>(r));
        const KpsSample sample = dgp_null(exp.p, exp.k, n, exp.dgp, rng);
        const KpsEstimates est = estimate(build_moments(sample, options.normalize));
        stats[static_cast<std::size_t>(r)] = statistic_from_estimates(est, Method::Kpst, options).statistic;
    });
    return stats;
}

std::vector<SizeRow> run_size(const SizeExperiment& exp) {
    require_levels(exp.levels);
    const std::vector<double> stats = null_statistics(exp);
    const int df = degrees_of_freedom(exp.p, exp.k);
    std::vector<SizeRow> rows;
    for (double level : exp.levels) {
        SizeRow row;
        row.p = exp.p;
        row.k = exp.k;
        row.n = exp.resolved_n();
        row.df = df;
        row.m = parameter_count(exp.p, exp.k);
        row.level = level;
        row.dgp = exp.dgp;
        row.nrp_pct = 100.0 * rejection_rate(stats, chi2_quantile(1.0 - level, df));
        row.mc_se_pct = 100.0 * std::sqrt(level * (1.0 - level) / static_cast<double>(exp.reps));
        rows.push_back(row);
    }
    return rows;
}

double local_noncentrality(double sigma) { return 0.25 * sigma * sigma; }

std::vector<PowerRow> run_power(const PowerExperiment& exp) {
    require_levels(exp.levels);
    if (exp.reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    if (exp.sigmas.empty()) throw Error(ErrorCode::InvalidArgument, "sigma grid is empty");
    for (double s : exp.sigmas) local_design(exp.n, s);

    constexpr int df = 4;
    KpsOptions options;
    options.normalize = exp.normalize;
    const auto reps = static_cast<std::size_t>(exp.reps);

    std::vector<PowerRow> rows;
    for (double sigma : exp.sigmas) {
        std::vector<double> kpst_stats(reps);
        std::vector<double> star_stats(exp.include_star ? reps : 0);
        parallel_for(exp.reps, exp.threads, [&](Index r) {
            RngStream rng(exp.seed, static_cast<std::uint64_t>(r));
            const KpsSample sample = dgp_local(exp.n, sigma, rng);
            const KpsEstimates est = estimate(build_moments(sample, options.normalize));
            kpst_stats[static_cast<std::size_t>(r)] = statistic_from_estimates(est, Method::Kpst, options).statistic;
            if (exp.include_star) {
                star_stats[static_cast<std::size_t>(r)] =
                    statistic_from_estimates(est, Method::KpstStar, options).statistic;
            }
        });
        for (double level : exp.levels) {
            const double critical = chi2_quantile(1.0 - level, df);
            PowerRow row;
            row.sigma = sigma;
            row.level = level;
            row.power_kpst = rejection_rate(kpst_stats, critical);
            row.power_kpst_star =
                exp.include_star ? rejection_rate(star_stats, critical) : std::numeric_limits<double>::quiet_NaN();
            row.power_asymptotic = 1.0 - noncentral_chi2_cdf(critical, {df, local_noncentrality(sigma)});
            row.mc_se = std::sqrt(row.power_kpst * (1.0 - row.power_kpst) / static_cast<double>(exp.reps));
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<GridPoint> paper_table_grid(int table) {
    std::vector<std::pair<Index, Index>> dims;
    SizeRule rule = SizeRule::Pow4;
    if (table == 1) {
        dims = {{2, 2}, {2, 3}, {2, 4}, {2, 5}, {3, 2}, {3, 3}};
        rule = SizeRule::Pow16Over3;
    } else if (table == 2) {
        for (Index k = 2; k <= 7; ++k) dims.emplace_back(2, k);
        for (Index k = 2; k <= 7; ++k) dims.emplace_back(3, k);
    } else {
        throw Error(ErrorCode::InvalidArgument, "table preset must be 1 or 2");
    }
    std::vector<GridPoint> grid;
    for (auto [p, k] : dims) grid.push_back({p, k, sample_size(rule, p, k)});
    return grid;
}

void write_size_csv(std::ostream& os, const std::vector<SizeRow>& rows) {
    os << "p,k,n,df,m,level,nrp_pct,mc_se_pct,dgp\n";
    for (const auto& r : rows) {
        os << r.p << ',' << r.k << ',' << r.n << ',' << r.df << ',' << r.m << ',' << std::setprecision(6)
           << r.level << ',' << std::fixed << std::setprecision(4) << r.nrp_pct << ',' << r.mc_se_pct
           << std::defaultfloat << ',' << to_string(r.dgp) << '\n';
    }
}

void write_size_table(std::ostream& os, const std::vector<SizeRow>& rows) {
    std::vector<double> levels;
    std::vector<Dgp> dgps;
    std::vector<std::tuple<Index, Index, Index>> configs;
    for (const auto& r : rows) {
        if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) levels.push_back(r.level);
        if (std::find(dgps.begin(), dgps.end(), r.dgp) == dgps.end()) dgps.push_back(r.dgp);
        const auto key = std::make_tuple(r.p, r.k, r.n);
        if (std::find(configs.begin(), configs.end(), key) == configs.end()) configs.push_back(key);
    }
    os << "p,k,n,a,m";
    for (Dgp d : dgps) {
        for (double a : levels) os << ',' << to_string(d) << '_' << std::setprecision(6) << 100.0 * a;
    }
    os << '\n';
    for (const auto& [p, k, n] : configs) {
        os << p << ',' << k << ',' << n << ',' << degrees_of_freedom(p, k) << ',' << parameter_count(p, k);
        for (Dgp d : dgps) {
            for (double a : levels) {
                const auto it = std::find_if(rows.begin(), rows.end(), [&](const SizeRow& r) {
                    return r.p == p && r.k == k && r.n == n && r.dgp == d && r.level == a;
                });
                os << ',';
                if (it != rows.end()) os << std::fixed << std::setprecision(1) << it->nrp_pct << std::defaultfloat;
            }
        }
        os << '\n';
    }
}

void write_power_csv(std::ostream& os, const std::vector<PowerRow>& rows) {
    os << "sigma,level,power_kpst,power_kpst_star,power_asymptotic,mc_se\n";
    for (const auto& r : rows) {
        os << std::setprecision(6) << r.sigma << ',' << r.level << ',' << std::fixed << std::setprecision(6)
           << r.power_kpst << ',';
        if (!std::isnan(r.power_kpst_star)) os << r.power_kpst_star;
        os << ',' << r.power_asymptotic << ',' << r.mc_se << std::defaultfloat << '\n';
    }
}

}  // namespace kpst::mc
