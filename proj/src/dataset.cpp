#include "kpst/dataset.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "kpst/error.hpp"

namespace kpst {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Splits one logical record; quoted fields may span physical lines.
bool next_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0;; ++i) {
        if (i == line.size()) {
            if (!quoted) break;
            std::string more;
            if (!std::getline(in, more)) {
                throw Error(ErrorCode::ParseError, "unterminated quoted field starting on line " + std::to_string(line_no));
            }
            ++line_no;
            field += '\n';
            line = std::move(more);
            i = static_cast<std::size_t>(-1);
            continue;
        }
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(was_quoted ? field : trim(field));
    return true;
}

bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

double parse_number(const std::string& s, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw Error(ErrorCode::ParseError,
                    "non-numeric value '" + s + "' in column '" + column + "' (data row " + std::to_string(row + 1) + ")");
    }
    return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::SchemaError, "unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    if (!next_record(in, table.header, line_no)) throw Error(ErrorCode::ParseError, "empty input: missing header row");
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (table.header[i].empty()) throw Error(ErrorCode::ParseError, "empty column name at position " + std::to_string(i + 1));
        for (std::size_t j = 0; j < i; ++j) {
            if (table.header[i] == table.header[j]) throw Error(ErrorCode::SchemaError, "duplicate column '" + table.header[i] + "'");
        }
    }
    while (next_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != table.header.size()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                                   " fields, expected " + std::to_string(table.header.size()));
        }
        table.rows.push_back(fields);
    }
    return table;
}

std::vector<std::string> resolve_columns(const std::string& spec, const std::vector<std::string>& header) {
    std::vector<std::string> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            column_index(header, item);
            out.push_back(item);
            continue;
        }
        const std::size_t a = column_index(header, trim(item.substr(0, colon)));
        const std::size_t b = column_index(header, trim(item.substr(colon + 1)));
        if (b < a) throw Error(ErrorCode::SchemaError, "column range '" + item + "' runs backwards");
        for (std::size_t j = a; j <= b; ++j) out.push_back(header[j]);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (out[i] == out[j]) throw Error(ErrorCode::SchemaError, "column '" + out[i] + "' listed twice");
        }
    }
    return out;
}

Dataset ingest(const CsvTable& table, const IngestOptions& options) {
    Dataset data;
    data.y_names = resolve_columns(options.y, table.header);
    data.z_names = resolve_columns(options.z, table.header);
    data.w_names = resolve_columns(options.w, table.header);
    if (data.y_names.empty()) throw Error(ErrorCode::SchemaError, "no endogenous (y) columns given");
    if (data.z_names.empty()) throw Error(ErrorCode::SchemaError, "no instrument (z) columns given");
    const std::string cluster = trim(options.cluster);

    std::vector<std::pair<std::string, char>> roles;
    for (const auto& c : data.y_names) roles.emplace_back(c, 'y');
    for (const auto& c : data.z_names) roles.emplace_back(c, 'z');
    for (const auto& c : data.w_names) roles.emplace_back(c, 'w');
    if (!cluster.empty()) roles.emplace_back(cluster, 'c');
    for (std::size_t i = 0; i < roles.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (roles[i].first == roles[j].first) {
                throw Error(ErrorCode::SchemaError, "column '" + roles[i].first + "' assigned to more than one role");
            }
        }
    }

    std::vector<std::size_t> iy, iz, iw;
    for (const auto& c : data.y_names) iy.push_back(column_index(table.header, c));
    for (const auto& c : data.z_names) iz.push_back(column_index(table.header, c));
    for (const auto& c : data.w_names) iw.push_back(column_index(table.header, c));
    const std::optional<std::size_t> ic = cluster.empty() ? std::nullopt : std::optional(column_index(table.header, cluster));

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool missing = false;
        for (const auto* set : {&iy, &iz, &iw}) {
            for (std::size_t j : *set) missing = missing || is_missing(row[j]);
        }
        if (ic) missing = missing || row[*ic].empty() || row[*ic] == "NA";
        if (missing) {
            ++data.dropped_rows;
        } else {
            keep.push_back(r);
        }
    }
    if (keep.empty()) throw Error(ErrorCode::EmptyAfterFiltering, "no complete rows remain after dropping missing values");

    const auto n = static_cast<Index>(keep.size());
    const auto fill = [&](Matrix& m, const std::vector<std::size_t>& idx, const std::vector<std::string>& names) {
        m.resize(n, static_cast<Index>(idx.size()));
        for (Index i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const double v = parse_number(table.rows[keep[i]][idx[j]], keep[i], names[j]);
                if (!std::isfinite(v)) {
                    throw Error(ErrorCode::ParseError, "non-finite value in column '" + names[j] + "'");
                }
                m(i, static_cast<Index>(j)) = v;
            }
        }
    };
    fill(data.y, iy, data.y_names);
    fill(data.z, iz, data.z_names);
    fill(data.w, iw, data.w_names);
    if (ic) {
        std::vector<std::string> labels;
        labels.reserve(keep.size());
        for (std::size_t r : keep) labels.push_back(table.rows[r][*ic]);
        data.clusters = std::move(labels);
    }
    return data;
}

Dataset ingest(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path.string() + "'");
    return ingest(read_csv(in), options);
}

Matrix ols_residuals(const Matrix& x, const Matrix& y, const std::string& block) {
    if (x.cols() == 0) return y;
    if (x.rows() != y.rows()) throw Error(ErrorCode::ShapeMismatch, "regressor and outcome row counts differ");
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < x.cols()) {
        throw Error(ErrorCode::RankDeficientDesign,
                    block + " matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " + std::to_string(x.cols()) + ")");
    }
    return y - x * qr.solve(y);
}

KpsSample residualize(const Dataset& data, bool add_constant) {
    const Index n = data.n();
    const Index k = data.z.cols();
    const Index q = data.w.cols() + (add_constant ? 1 : 0);
    if (n <= k + q + 1) {
        throw Error(ErrorCode::InvalidArgument, "need more than k + q + 1 = " + std::to_string(k + q + 1) +
                                                    " complete observations, have " + std::to_string(n));
    }
    Matrix w(n, q);
    w.leftCols(data.w.cols()) = data.w;
    if (add_constant) w.col(q - 1).setOnes();

    const Matrix y_t = ols_residuals(w, data.y, "control");
    const Matrix z_t = ols_residuals(w, data.z, "control");
    Matrix vhat = ols_residuals(z_t, y_t, "instrument");

    const double scale = y_t.norm();
    if (vhat.norm() <= 1e-10 * scale || scale == 0.0) {
        throw Error(ErrorCode::DegenerateSample, "reduced-form residuals are identically zero (Y is an exact function of Z)");
    }
    if (data.clusters) return KpsSample::with_labels(std::move(vhat), z_t, *data.clusters);
    return KpsSample(std::move(vhat), z_t);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    while (next_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        std::vector<double> values;
        bool numeric = true;
        for (const auto& f : fields) {
            double v = 0.0;
            const char* first = f.data();
            const char* last = f.data() + f.size();
            if (!f.empty() && *first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (f.empty() || ec != std::errc() || ptr != last) {
                numeric = false;
                break;
            }
            values.push_back(v);
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1) continue;
            throw Error(ErrorCode::ParseError, "non-numeric entry on line " + std::to_string(line_no));
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has a different number of columns");
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyAfterFiltering, "matrix file has no numeric rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

}  // namespace kpst
