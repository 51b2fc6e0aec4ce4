#include "effdim/csv.hpp"

#include "effdim/errors.hpp"

#include <charconv>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace effdim {

void write_csv(const std::string& path, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path);
    require(os.good(), ErrorCode::io_error, "cannot open for writing: " + path);
    if (!header.empty()) {
        require(static_cast<Eigen::Index>(header.size()) == m.cols(), ErrorCode::invalid_argument,
                "csv header width does not match matrix");
        for (size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
        os << '\n';
    }
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            int n = std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) os << ',';
            os.write(buf, n);
        }
        os << '\n';
    }
    require(os.good(), ErrorCode::io_error, "write failed: " + path);
}

static bool parse_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
        const char* comma = p;
        while (comma < end && *comma != ',') ++comma;
        double v;
        auto [ptr, ec] = std::from_chars(p, comma, v);
        if (ec != std::errc() || ptr != comma) return false;
        out.push_back(v);
        p = comma < end ? comma + 1 : comma;
    }
    return !out.empty();
}

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), ErrorCode::io_error, "cannot open: " + path);
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    std::vector<double> row;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (parse_row(line, row)) {
            rows.push_back(row);
        } else if (first) {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) t.header.push_back(cell);
        } else {
            fail(ErrorCode::io_error, "malformed csv row in " + path + ": " + line);
        }
        first = false;
    }
    if (!rows.empty()) {
        t.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows[0].size()));
        for (size_t i = 0; i < rows.size(); ++i) {
            require(rows[i].size() == rows[0].size(), ErrorCode::io_error,
                    "ragged csv rows in " + path);
            for (size_t j = 0; j < rows[i].size(); ++j)
                t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return t;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) { return read_csv(path).values; }

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    require(os.good(), ErrorCode::io_error, "cannot open for writing: " + path);
    os << content;
    require(os.good(), ErrorCode::io_error, "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), ErrorCode::io_error, "cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_matrix_blob(std::ostream& os, const Eigen::MatrixXd& m) {
    // row-major on disk
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            os.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    require(os.good(), ErrorCode::io_error, "binary write failed");
}

Eigen::MatrixXd read_matrix_blob(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v;
            is.read(reinterpret_cast<char*>(&v), sizeof v);
            m(i, j) = v;
        }
    require(is.good(), ErrorCode::io_error, "binary read failed (truncated blob?)");
    return m;
}

} // namespace effdim
