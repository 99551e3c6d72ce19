// kpst: command-line front end for the Kronecker product structure test.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpst/dataset.hpp"
#include "kpst/error.hpp"
#include "kpst/kps.hpp"
#include "kpst/montecarlo.hpp"
#include "kpst/report.hpp"

namespace {

using kpst::Error;
using kpst::ErrorCode;
using kpst::Index;
using kpst::Matrix;

constexpr int kExitUsage = 2;
constexpr int kExitInternal = 1;

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

std::uint64_t default_seed() {
    if (const char* env = std::getenv("KPS_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used, 0);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw Error(ErrorCode::InvalidArgument, std::string("KPS_SEED is not an unsigned integer: '") + env + "'");
    }
    return 1;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used == 0 || used != item.size()) throw Error(ErrorCode::InvalidArgument, flag + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, flag + " must list at least one value");
    return out;
}

void check_levels(const std::vector<double>& levels) {
    for (double a : levels) {
        if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "levels must lie in (0, 1)");
    }
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

void print_matrix(std::ostream& os, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        os << "   ";
        for (Index j = 0; j < m.cols(); ++j) os << ' ' << std::setw(12) << std::setprecision(6) << m(i, j);
        os << '\n';
    }
}

struct TestArgs {
    std::string input;
    std::string y, z, w, cluster;
    double level = 0.05;
    std::string method = "kpst";
    bool no_normalize = false;
    bool no_constant = false;
    std::string format = "text";
    std::string rank_policy = "fixed";
    double rtol = 1e-10;
};

int cmd_test(const TestArgs& a) {
    if (!(a.level > 0.0 && a.level < 1.0)) throw Error(ErrorCode::InvalidArgument, "--level must lie in (0, 1)");
    const kpst::Dataset data = kpst::ingest(std::filesystem::path(a.input), {a.y, a.z, a.w, a.cluster});
    const kpst::KpsSample sample = kpst::residualize(data, !a.no_constant);

    kpst::KpsOptions options;
    options.normalize = !a.no_normalize;
    if (a.rank_policy == "tolerance") options.rank_policy = kpst::Tolerance{a.rtol};
    const kpst::KpsResult result = a.method == "kpst-star" ? kpst::kpst_star(sample, options) : kpst::kpst(sample, options);

    kpst::TestReport report;
    report.result = result;
    report.level = a.level;
    report.input_sha256 = kpst::sha256_file(a.input);
    report.timestamp = kpst::utc_timestamp();
    report.dropped_rows = data.dropped_rows;
    report.options = {{"input", a.input},           {"y", data.y_names},
                      {"z", data.z_names},          {"w", data.w_names},
                      {"cluster", a.cluster},       {"method", a.method},
                      {"normalize", !a.no_normalize}, {"constant", !a.no_constant},
                      {"rank_policy", a.rank_policy}};
    if (a.rank_policy == "tolerance") report.options["rtol"] = a.rtol;

    if (a.format == "json") {
        std::cout << kpst::to_json(report).dump(2) << '\n';
    } else if (a.format == "csv") {
        std::cout << kpst::to_csv(report);
    } else {
        std::cout << kpst::to_text(report);
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

struct SizeArgs {
    Index p = 2;
    Index k = 2;
    Index n = 0;
    std::string rule = "explicit";
    std::string dgp = "homoskedastic";
    Index reps = 10000;
    std::string levels = "0.10,0.05,0.01";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int paper_table = 0;
    unsigned threads = 0;
    std::string output;
    std::string layout;
    bool no_normalize = false;
};

int cmd_simulate_size(const SizeArgs& a) {
    const auto levels = parse_doubles(a.levels, "--levels");
    check_levels(levels);
    if (a.reps < 1) throw Error(ErrorCode::InvalidArgument, "--reps must be positive");

    std::vector<kpst::mc::GridPoint> grid;
    kpst::mc::SizeRule rule = kpst::mc::SizeRule::Explicit;
    if (a.paper_table != 0) {
        grid = kpst::mc::paper_table_grid(a.paper_table);
    } else {
        if (a.p < 2 || a.k < 2) {
            throw Error(ErrorCode::DimensionError, "p and k must both be at least 2; with min(p, k) = 1 KPS always holds");
        }
        if (a.rule == "pow16/3") {
            rule = kpst::mc::SizeRule::Pow16Over3;
        } else if (a.rule == "pow4") {
            rule = kpst::mc::SizeRule::Pow4;
        } else if (a.n < 2) {
            throw Error(ErrorCode::InvalidArgument, "--n is required unless --rule or --paper-table is given");
        }
        grid.push_back({a.p, a.k, a.n});
    }
    std::vector<kpst::mc::Dgp> dgps;
    if (a.dgp == "both" || (a.paper_table != 0 && a.dgp.empty())) {
        dgps = {kpst::mc::Dgp::Homoskedastic, kpst::mc::Dgp::ScalarHetero};
    } else {
        dgps = {kpst::mc::parse_dgp(a.dgp.empty() ? "homoskedastic" : a.dgp)};
    }

    std::vector<kpst::mc::SizeRow> rows;
    for (const auto& g : grid) {
        for (kpst::mc::Dgp d : dgps) {
            kpst::mc::SizeExperiment exp;
            exp.p = g.p;
            exp.k = g.k;
            exp.n = g.n;
            exp.rule = rule;
            exp.dgp = d;
            exp.reps = a.reps;
            exp.levels = levels;
            exp.seed = a.seed_given ? a.seed : default_seed();
            exp.normalize = !a.no_normalize;
            exp.threads = a.threads;
            const auto part = kpst::mc::run_size(exp);
            rows.insert(rows.end(), part.begin(), part.end());
        }
    }
    const std::string layout = a.layout.empty() ? (a.paper_table != 0 ? "table" : "long") : a.layout;
    Output out(a.output);
    if (layout == "table") {
        kpst::mc::write_size_table(out.stream(), rows);
    } else {
        kpst::mc::write_size_csv(out.stream(), rows);
    }
    return 0;
}

struct PowerArgs {
    Index n = 200;
    std::string sigmas = "0,1,2,3,4";
    Index reps = 2000;
    std::string levels = "0.10,0.05,0.01";
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool star = false;
    bool no_normalize = false;
    unsigned threads = 0;
    std::string output;
};

int cmd_simulate_power(const PowerArgs& a) {
    kpst::mc::PowerExperiment exp;
    exp.n = a.n;
    exp.sigmas = parse_doubles(a.sigmas, "--sigmas");
    exp.reps = a.reps;
    exp.levels = parse_doubles(a.levels, "--levels");
    check_levels(exp.levels);
    if (a.reps < 1) throw Error(ErrorCode::InvalidArgument, "--reps must be positive");
    exp.seed = a.seed_given ? a.seed : default_seed();
    exp.include_star = a.star;
    exp.normalize = !a.no_normalize;
    exp.threads = a.threads;
    const auto rows = kpst::mc::run_power(exp);
    Output out(a.output);
    kpst::mc::write_power_csv(out.stream(), rows);
    return 0;
}

struct NkpArgs {
    std::string input;
    Index p = 0;
    Index k = 0;
    std::string format = "text";
};

int cmd_nkp(const NkpArgs& a) {
    const Matrix r = kpst::read_matrix_csv(a.input);
    if (r.rows() != r.cols() || r.rows() != a.p * a.k) {
        throw Error(ErrorCode::ShapeMismatch, "matrix is " + std::to_string(r.rows()) + " x " + std::to_string(r.cols()) +
                                                  ", expected " + std::to_string(a.p * a.k) + " square");
    }
    const kpst::NkpFit fit = kpst::nearest_kps(r, a.p, a.k);
    const double total = kpst::rearrange(r, a.p, a.k).norm();
    const double relative = total > 0.0 ? fit.ds / total : 0.0;
    const kpst::Vector& s = fit.svd.sigma();

    if (a.format == "json") {
        nlohmann::ordered_json j;
        j["ds"] = fit.ds;
        j["relative_ds"] = relative;
        std::vector<double> g1(fit.g1.size()), g2(fit.g2.size()), sv(s.data(), s.data() + s.size());
        for (Index i = 0; i < fit.g1.rows(); ++i)
            for (Index c = 0; c < fit.g1.cols(); ++c) g1[i * fit.g1.cols() + c] = fit.g1(i, c);
        for (Index i = 0; i < fit.g2.rows(); ++i)
            for (Index c = 0; c < fit.g2.cols(); ++c) g2[i * fit.g2.cols() + c] = fit.g2(i, c);
        j["g1"] = g1;
        j["g2"] = g2;
        j["singular_values"] = sv;
        j["gap_ok"] = fit.gap_ok;
        j["warnings"] = fit.warnings;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "Nearest Kronecker product (p = " << a.p << ", k = " << a.k << ")\n";
        std::cout << "  DS          = " << std::setprecision(8) << fit.ds << '\n';
        std::cout << "  relative DS = " << std::setprecision(8) << relative << '\n';
        std::cout << "  G1 =\n";
        print_matrix(std::cout, fit.g1);
        std::cout << "  G2 =\n";
        print_matrix(std::cout, fit.g2);
        std::cout << "  singular values:";
        for (Index i = 0; i < std::min<Index>(s.size(), 5); ++i) std::cout << ' ' << std::setprecision(8) << s(i);
        std::cout << '\n';
        for (const auto& w : fit.warnings) std::cout << "  warning: " << w << '\n';
    }
    return 0;
}

struct GenerateArgs {
    std::string dgp = "homoskedastic";
    Index p = 2;
    Index k = 2;
    Index n = 500;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string output;
};

int cmd_generate(const GenerateArgs& a) {
    kpst::RngStream rng(a.seed_given ? a.seed : default_seed(), 0);
    const kpst::KpsSample s = a.dgp == "local" ? kpst::mc::dgp_local(a.n, a.sigma, rng)
                                               : kpst::mc::dgp_null(a.p, a.k, a.n, kpst::mc::parse_dgp(a.dgp), rng);
    Output out(a.output);
    std::ostream& os = out.stream();
    for (Index j = 0; j < s.p(); ++j) os << (j ? "," : "") << 'y' << j + 1;
    for (Index j = 0; j < s.k(); ++j) os << ",z" << j + 1;
    os << '\n' << std::setprecision(17);
    for (Index i = 0; i < s.n(); ++i) {
        for (Index j = 0; j < s.p(); ++j) os << (j ? "," : "") << s.vhat()(i, j);
        for (Index j = 0; j < s.k(); ++j) os << ',' << s.z()(i, j);
        os << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kronecker product structure test for moment covariance matrices"};
    app.set_version_flag("--version", std::string(kpst::version()));
    app.require_subcommand(1);

    TestArgs ta;
    auto* test = app.add_subcommand("test", "Run the KPS test on a CSV dataset");
    test->add_option("--input", ta.input, "CSV file with a header row")->required();
    test->add_option("--y", ta.y, "Endogenous columns (names or first:last ranges)");
    test->add_option("--z", ta.z, "Instrument columns");
    test->add_option("--w", ta.w, "Control columns");
    test->add_option("--cluster", ta.cluster, "Cluster label column");
    test->add_option("--level", ta.level, "Nominal level")->capture_default_str();
    test->add_option("--method", ta.method, "Statistic")->check(CLI::IsMember({"kpst", "kpst-star"}))->capture_default_str();
    test->add_flag("--no-normalize", ta.no_normalize, "Skip whitening of V and Z");
    test->add_flag("--no-constant", ta.no_constant, "Do not add a constant to the controls");
    test->add_option("--format", ta.format, "Output format")->check(CLI::IsMember({"json", "csv", "text"}))->capture_default_str();
    test->add_option("--rank-policy", ta.rank_policy, "Pseudo-inverse rank rule")
        ->check(CLI::IsMember({"fixed", "tolerance"}))
        ->capture_default_str();
    test->add_option("--rtol", ta.rtol, "Relative eigenvalue cutoff for --rank-policy tolerance")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo size and power experiments");
    simulate->require_subcommand(1);

    SizeArgs sa;
    sa.dgp.clear();
    auto* size = simulate->add_subcommand("size", "Null rejection frequencies");
    size->add_option("--p", sa.p, "Columns of V")->capture_default_str();
    size->add_option("--k", sa.k, "Columns of Z")->capture_default_str();
    size->add_option("--n", sa.n, "Sample size (with --rule explicit)");
    size->add_option("--rule", sa.rule, "Sample size rule")
        ->check(CLI::IsMember({"explicit", "pow16/3", "pow4"}))
        ->capture_default_str();
    size->add_option("--dgp", sa.dgp, "homoskedastic, scalar-hetero or both")
        ->check(CLI::IsMember({"homoskedastic", "scalar-hetero", "both"}));
    size->add_option("--reps", sa.reps, "Replications")->capture_default_str();
    size->add_option("--levels", sa.levels, "Comma-separated nominal levels")->capture_default_str();
    auto* size_seed = size->add_option("--seed", sa.seed, "Base seed (default: KPS_SEED or 1)");
    size->add_option("--paper-table", sa.paper_table, "Preset grid of size table 1 or 2")->check(CLI::IsMember({1, 2}));
    size->add_option("--threads", sa.threads, "Worker threads (0 = all cores)");
    size->add_option("--output", sa.output, "Output file (default stdout)");
    size->add_option("--layout", sa.layout, "long (one row per level) or table (one row per design)")
        ->check(CLI::IsMember({"long", "table"}));
    size->add_flag("--no-normalize", sa.no_normalize, "Skip whitening");

    PowerArgs pa;
    auto* power = simulate->add_subcommand("power", "Local power of the p = k = 2 two-regime design");
    power->add_option("--n", pa.n, "Sample size")->capture_default_str();
    power->add_option("--sigmas", pa.sigmas, "Comma-separated local deviation scales")->capture_default_str();
    power->add_option("--reps", pa.reps, "Replications")->capture_default_str();
    power->add_option("--levels", pa.levels, "Comma-separated nominal levels")->capture_default_str();
    auto* power_seed = power->add_option("--seed", pa.seed, "Base seed (default: KPS_SEED or 1)");
    power->add_flag("--star", pa.star, "Also compute KPST*");
    power->add_flag("--no-normalize", pa.no_normalize, "Skip whitening");
    power->add_option("--threads", pa.threads, "Worker threads (0 = all cores)");
    power->add_option("--output", pa.output, "Output file (default stdout)");

    NkpArgs na;
    auto* nkp = app.add_subcommand("nkp", "Nearest Kronecker product of a square matrix");
    nkp->add_option("--input", na.input, "CSV with a kp x kp matrix")->required();
    nkp->add_option("--p", na.p, "Outer block count")->required();
    nkp->add_option("--k", na.k, "Inner block size")->required();
    nkp->add_option("--format", na.format, "Output format")->check(CLI::IsMember({"json", "text"}))->capture_default_str();

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "Write a simulated (V, Z) dataset as CSV");
    generate->add_option("--dgp", ga.dgp, "homoskedastic, scalar-hetero or local")
        ->check(CLI::IsMember({"homoskedastic", "scalar-hetero", "local"}))
        ->capture_default_str();
    generate->add_option("--p", ga.p)->capture_default_str();
    generate->add_option("--k", ga.k)->capture_default_str();
    generate->add_option("--n", ga.n)->capture_default_str();
    generate->add_option("--sigma", ga.sigma, "Local deviation scale (local dgp)")->capture_default_str();
    auto* gen_seed = generate->add_option("--seed", ga.seed, "Seed (default: KPS_SEED or 1)");
    generate->add_option("--output", ga.output, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (test->parsed()) return cmd_test(ta);
        if (size->parsed()) {
            sa.seed_given = size_seed->count() > 0;
            return cmd_simulate_size(sa);
        }
        if (power->parsed()) {
            pa.seed_given = power_seed->count() > 0;
            return cmd_simulate_power(pa);
        }
        if (nkp->parsed()) return cmd_nkp(na);
        if (generate->parsed()) {
            ga.seed_given = gen_seed->count() > 0;
            return cmd_generate(ga);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << kpst::to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}
