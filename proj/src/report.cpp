#include "kpst/report.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "kpst/error.hpp"

#ifndef KPST_VERSION
#define KPST_VERSION "0.0.0"
#endif

namespace kpst {

namespace {

nlohmann::ordered_json row_major(const Matrix& m) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    }
    return out;
}

Matrix square_from(const nlohmann::ordered_json& a) {
    const auto size = a.size();
    auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(size))));
    if (static_cast<std::size_t>(d * d) != size) throw Error(ErrorCode::SchemaError, "matrix field is not square");
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) m(i, j) = a.at(static_cast<std::size_t>(i * d + j)).get<double>();
    }
    return m;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

class DigestContext {
public:
    DigestContext() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorCode::InvalidArgument, "SHA-256 initialisation failed");
        }
    }
    void update(const char* data, std::size_t size) {
        if (EVP_DigestUpdate(ctx_.get(), data, size) != 1) throw Error(ErrorCode::InvalidArgument, "SHA-256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error(ErrorCode::InvalidArgument, "SHA-256 finalisation failed");
        std::string out;
        char buf[3];
        for (unsigned int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof buf, "%02x", md[i]);
            out += buf;
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string_view version() noexcept { return KPST_VERSION; }

nlohmann::ordered_json to_json(const TestReport& report) {
    const KpsResult& r = report.result;
    nlohmann::ordered_json j;
    j["schema"] = "kps-report/1";
    j["method"] = std::string(to_string(r.method));
    j["n"] = r.n;
    j["n_effective"] = r.n_effective;
    j["p"] = r.p;
    j["k"] = r.k;
    j["df"] = r.df;
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["ds"] = r.nkp.ds;
    j["reject"] = r.reject(report.level);
    j["level"] = report.level;
    j["clustered"] = r.clustered;
    j["normalized"] = r.normalized;
    j["g1"] = row_major(r.nkp.g1);
    j["g2"] = row_major(r.nkp.g2);
    nlohmann::ordered_json sv = nlohmann::ordered_json::array();
    for (Index i = 0; i < r.nkp.svd.sigma().size(); ++i) sv.push_back(r.nkp.svd.sigma()(i));
    j["singular_values"] = sv;
    j["warnings"] = r.warnings;
    j["input_sha256"] = report.input_sha256;
    j["version"] = std::string(version());
    j["timestamp"] = report.timestamp;
    j["options"] = report.options;
    j["dropped_rows"] = report.dropped_rows;
    return j;
}

TestReport report_from_json(const nlohmann::ordered_json& j) {
    try {
        if (j.at("schema").get<std::string>() != "kps-report/1") {
            throw Error(ErrorCode::SchemaError, "unsupported report schema '" + j.at("schema").get<std::string>() + "'");
        }
        TestReport rep;
        KpsResult& r = rep.result;
        const auto method = j.at("method").get<std::string>();
        if (method == "kpst") {
            r.method = Method::Kpst;
        } else if (method == "kpst-star") {
            r.method = Method::KpstStar;
        } else {
            throw Error(ErrorCode::SchemaError, "unknown method '" + method + "'");
        }
        r.n = j.at("n").get<Index>();
        r.n_effective = j.at("n_effective").get<Index>();
        r.p = j.at("p").get<Index>();
        r.k = j.at("k").get<Index>();
        r.df = j.at("df").get<int>();
        r.statistic = j.at("statistic").get<double>();
        r.p_value = j.at("p_value").get<double>();
        r.nkp.ds = j.at("ds").get<double>();
        r.clustered = j.at("clustered").get<bool>();
        r.normalized = j.at("normalized").get<bool>();
        r.nkp.g1 = square_from(j.at("g1"));
        r.nkp.g2 = square_from(j.at("g2"));
        const auto& sv = j.at("singular_values");
        Vector sigma(static_cast<Index>(sv.size()));
        for (std::size_t i = 0; i < sv.size(); ++i) sigma(static_cast<Index>(i)) = sv[i].get<double>();
        r.nkp.svd = SvdPartition(Matrix::Identity(r.p * r.p, r.p * r.p), sigma, Matrix::Identity(r.k * r.k, r.k * r.k));
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        rep.level = j.at("level").get<double>();
        rep.input_sha256 = j.at("input_sha256").get<std::string>();
        rep.timestamp = j.value("timestamp", std::string());
        rep.options = j.value("options", nlohmann::ordered_json::object());
        rep.dropped_rows = j.value("dropped_rows", Index{0});
        return rep;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed report: ") + e.what());
    }
}

std::string to_csv(const TestReport& report) {
    const KpsResult& r = report.result;
    std::ostringstream os;
    os << "schema,method,n,n_effective,p,k,df,statistic,p_value,ds,reject,level,clustered,normalized,input_sha256,version\n";
    os << "kps-report/1," << to_string(r.method) << ',' << r.n << ',' << r.n_effective << ',' << r.p << ',' << r.k << ','
       << r.df << ',' << fmt(r.statistic) << ',' << fmt(r.p_value) << ',' << fmt(r.nkp.ds) << ','
       << (r.reject(report.level) ? "true" : "false") << ',' << fmt(report.level) << ',' << (r.clustered ? "true" : "false")
       << ',' << (r.normalized ? "true" : "false") << ',' << csv_quote(report.input_sha256) << ',' << version() << '\n';
    return os.str();
}

std::string to_text(const TestReport& report) {
    const KpsResult& r = report.result;
    std::ostringstream os;
    os << "Kronecker product structure test (" << to_string(r.method) << ")\n";
    os << "  p = " << r.p << ", k = " << r.k << ", n = " << r.n;
    if (r.clustered) os << ", clusters = " << r.n_effective;
    os << '\n';
    if (report.dropped_rows > 0) os << "  rows dropped for missing values: " << report.dropped_rows << '\n';
    os << "  statistic = " << std::setprecision(6) << r.statistic << '\n';
    os << "  df        = " << r.df << '\n';
    os << "  p-value   = " << std::setprecision(6) << r.p_value << '\n';
    os << "  DS        = " << std::setprecision(6) << r.nkp.ds << '\n';
    os << "  normalized: " << (r.normalized ? "yes" : "no") << '\n';
    os << "  decision at level " << report.level << ": " << (r.reject(report.level) ? "reject" : "fail to reject")
       << " KPS\n";
    for (const auto& w : r.warnings) os << "  warning: " << w << '\n';
    return os.str();
}

std::string sha256_hex(std::string_view bytes) {
    DigestContext ctx;
    ctx.update(bytes.data(), bytes.size());
    return ctx.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path.string() + "'");
    DigestContext ctx;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) ctx.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return ctx.hex();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace kpst
