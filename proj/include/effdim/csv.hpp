#ifndef EFFDIM_CSV_HPP
#define EFFDIM_CSV_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

namespace effdim {

/// Writes a matrix as CSV with 17 significant digits (round-trip exact for
/// doubles). `header` may be empty for headerless numeric files.
void write_csv(const std::string& path, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header = {});

struct CsvTable {
    std::vector<std::string> header; // empty when the file has no header row
    Eigen::MatrixXd values;
};

CsvTable read_csv(const std::string& path);

/// Convenience: numeric part only (header row, if any, is skipped).
Eigen::MatrixXd read_csv_matrix(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Little-endian float64 row-major blob, dimensions tracked by the caller.
void write_matrix_blob(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_blob(std::istream& is, Eigen::Index rows, Eigen::Index cols);

} // namespace effdim

#endif
