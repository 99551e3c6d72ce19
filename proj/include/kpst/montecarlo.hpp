#pragma once

// Monte Carlo experiments for the size and local power of the KPST test.
//
// Every replication r draws from its own RngStream(seed, r), so results do
// not depend on how replications are spread over worker threads.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpst/dist.hpp"
#include "kpst/kps.hpp"

namespace kpst::mc {

enum class Dgp { Homoskedastic, ScalarHetero };
enum class SizeRule { Explicit, Pow16Over3, Pow4 };

std::string_view to_string(Dgp dgp) noexcept;
Dgp parse_dgp(std::string_view text);

/// round((pk)^(16/3)) or (pk)^4.
Index sample_size(SizeRule rule, Index p, Index k);

/// Number of unique elements of R*: [p(p+1)/2] [k(k+1)/2].
Index parameter_count(Index p, Index k);

/// Z_i ~ N(0, I_k), V_i | Z_i ~ N(0, h(Z_i) I_p) with h = 1 or ||Z_i||^2 / k.
/// Each row draws Z_i first, then V_i.
KpsSample dgp_null(Index p, Index k, Index n, Dgp dgp, RngStream& rng);

struct LocalDesign {
    double b = 1.0;
    double c = 1.0;
};
/// b and c of the two-regime local alternative; requires 0 <= sigma < sqrt(n).
LocalDesign local_design(Index n, double sigma);

/// p = k = 2. The first floor(n/2) rows use V ~ N(0, diag(b,1)),
/// Z ~ N(0, diag(1,c)); the rest V ~ N(0, diag(1,b)), Z ~ N(0, diag(c,1)).
KpsSample dgp_local(Index n, double sigma, RngStream& rng);

/// Population covariance of the moments under dgp_local:
/// diag((b+c)/2, (1+bc)/2, (1+bc)/2, (b+c)/2).
Matrix local_population_r(Index n, double sigma);

struct SizeExperiment {
    Index p = 2;
    Index k = 2;
    Index n = 0;  ///< used when rule == Explicit
    SizeRule rule = SizeRule::Explicit;
    Dgp dgp = Dgp::Homoskedastic;
    Index reps = 10000;
    std::vector<double> levels{0.10, 0.05, 0.01};
    std::uint64_t seed = 0;
    bool normalize = true;
    unsigned threads = 0;  ///< 0 = hardware concurrency

    [[nodiscard]] Index resolved_n() const;
};

struct SizeRow {
    Index p = 0;
    Index k = 0;
    Index n = 0;
    int df = 0;
    Index m = 0;
    double level = 0.0;
    double nrp_pct = 0.0;
    double mc_se_pct = 0.0;
    Dgp dgp = Dgp::Homoskedastic;
};

/// One row per nominal level.
std::vector<SizeRow> run_size(const SizeExperiment& exp);

/// The KPST statistic for each replication of a null experiment.
std::vector<double> null_statistics(const SizeExperiment& exp);

struct PowerExperiment {
    Index n = 200;
    std::vector<double> sigmas{0.0, 1.0, 2.0, 3.0, 4.0};
    Index reps = 2000;
    std::vector<double> levels{0.10, 0.05, 0.01};
    std::uint64_t seed = 0;
    bool include_star = false;
    bool normalize = true;
    unsigned threads = 0;
};

struct PowerRow {
    double sigma = 0.0;
    double level = 0.0;
    double power_kpst = 0.0;
    double power_kpst_star = 0.0;  ///< NaN unless include_star
    double power_asymptotic = 0.0;
    double mc_se = 0.0;
};

/// Noncentrality of the local design: delta = sigma^2 / 4.
double local_noncentrality(double sigma);

/// Rejection rates per (sigma, level) with the noncentral chi-square(4, delta)
/// overlay. Replication r uses stream r at every sigma (common random numbers).
std::vector<PowerRow> run_power(const PowerExperiment& exp);

/// Preset (p, k, n) grids of the published size tables (1: n = (pk)^(16/3), 2: n = (pk)^4).
struct GridPoint {
    Index p;
    Index k;
    Index n;
};
std::vector<GridPoint> paper_table_grid(int table);

void write_size_csv(std::ostream& os, const std::vector<SizeRow>& rows);
/// One row per (p, k, n) with columns per dgp and level, like the published tables.
void write_size_table(std::ostream& os, const std::vector<SizeRow>& rows);
void write_power_csv(std::ostream& os, const std::vector<PowerRow>& rows);

}  // namespace kpst::mc
