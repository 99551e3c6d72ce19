#pragma once

// CSV ingestion and reduced-form residualisation for the command-line front end.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kpst/kps.hpp"

namespace kpst {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, header row first, double-quoted fields may contain
/// commas and "" escapes. Throws ParseError on ragged rows.
CsvTable read_csv(std::istream& in);

/// Resolves a column designation against a header: a comma-separated list
/// of names where each item is either a name or an inclusive range
/// "first:last" in header order.
std::vector<std::string> resolve_columns(const std::string& spec, const std::vector<std::string>& header);

struct IngestOptions {
    std::string y;  ///< endogenous columns (required)
    std::string z;  ///< instruments (required)
    std::string w;  ///< controls (optional)
    std::string cluster;  ///< cluster label column (optional)
};

struct Dataset {
    Matrix y;
    Matrix z;
    Matrix w;  ///< n x q, q may be 0
    std::optional<std::vector<std::string>> clusters;
    std::vector<std::string> y_names;
    std::vector<std::string> z_names;
    std::vector<std::string> w_names;
    Index dropped_rows = 0;

    [[nodiscard]] Index n() const noexcept { return y.rows(); }
};

/// Rows where any designated field is empty or NA are dropped (listwise
/// deletion) and counted in dropped_rows.
Dataset ingest(const CsvTable& table, const IngestOptions& options);
Dataset ingest(const std::filesystem::path& path, const IngestOptions& options);

/// Partials the controls (plus a constant unless add_constant is false) out
/// of Y and Z, then regresses the partialled Y on the partialled Z and keeps
/// the residuals.
KpsSample residualize(const Dataset& data, bool add_constant = true);

/// Y - X (X'X)^{-1} X' Y computed with a rank-revealing QR. Throws
/// RankDeficientDesign naming `block` when X lacks full column rank.
Matrix ols_residuals(const Matrix& x, const Matrix& y, const std::string& block);

/// Numeric square matrix from CSV (an optional non-numeric header row is skipped).
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace kpst
