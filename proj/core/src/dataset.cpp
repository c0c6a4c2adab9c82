#include "geoscore/dataset.hpp"

#include "geoscore/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace geoscore {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'C', '1'};

double parse_cell(const std::string& cell, std::size_t row) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw ParseError("row " + std::to_string(row) + ": non-numeric cell '" + cell + "'");
    if (!std::isfinite(v))
        throw ParseError("row " + std::to_string(row) + ": non-finite value '" + cell + "'");
    return v;
}

Dataset load_csv(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(parse_cell(cell, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, got " +
                             std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("'" + path + "' contains no data rows");
    Matrix points(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            points(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return Dataset(std::move(points));
}

Dataset load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char header[16];
    if (!in.read(header, sizeof(header))) throw ParseError("'" + path + "': truncated header");
    if (std::memcmp(header, kMagic, 4) != 0) throw ParseError("'" + path + "': bad magic");
    std::uint32_t n = 0, d = 0;
    std::memcpy(&n, header + 4, 4);
    std::memcpy(&d, header + 8, 4);
    if (n == 0 || d == 0) throw ParseError("'" + path + "': empty dataset");
    Matrix points(static_cast<Index>(n), static_cast<Index>(d));
    std::vector<double> row(d);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(sizeof(double) * d)))
            throw ParseError("'" + path + "': truncated at row " + std::to_string(i));
        for (std::uint32_t j = 0; j < d; ++j) {
            if (!std::isfinite(row[j]))
                throw ParseError("'" + path + "': non-finite value at row " + std::to_string(i));
            points(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
        }
    }
    return Dataset(std::move(points));
}

} // namespace

Dataset::Dataset(Matrix points) : points_(std::move(points)) {
    if (points_.rows() < 1 || points_.cols() < 1)
        throw DomainError("dataset requires N >= 1 points of dimension >= 1");
    if (!points_.allFinite()) throw DomainError("dataset contains non-finite coordinates");
}

double Dataset::diameter() const {
    double best = 0.0;
    for (Index i = 0; i < points_.rows(); ++i)
        for (Index j = i + 1; j < points_.rows(); ++j)
            best = std::max(best, (points_.row(i) - points_.row(j)).norm());
    return best;
}

Dataset load_dataset(const std::string& path, FileFormat format, bool skip_header) {
    return format == FileFormat::CsvRows ? load_csv(path, skip_header) : load_binary(path);
}

void save_dataset(const Dataset& dataset, const std::string& path, FileFormat format) {
    if (format == FileFormat::CsvRows) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path + "'");
        char buf[32];
        for (Index i = 0; i < dataset.size(); ++i) {
            for (Index j = 0; j < dataset.dim(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", dataset.points()(i, j));
                out << (j ? "," : "") << buf;
            }
            out << "\n";
        }
        if (!out) throw IoError("write failed for '" + path + "'");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    char header[16] = {};
    std::memcpy(header, kMagic, 4);
    const auto n = static_cast<std::uint32_t>(dataset.size());
    const auto d = static_cast<std::uint32_t>(dataset.dim());
    std::memcpy(header + 4, &n, 4);
    std::memcpy(header + 8, &d, 4);
    out.write(header, sizeof(header));
    std::vector<double> row(d);
    for (Index i = 0; i < dataset.size(); ++i) {
        for (Index j = 0; j < dataset.dim(); ++j) row[static_cast<std::size_t>(j)] = dataset.points()(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(sizeof(double) * d));
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset circle_dataset(int n, double radius) {
    if (n < 1) throw DomainError("circle_dataset requires n >= 1");
    if (radius <= 0.0) throw DomainError("circle_dataset requires radius > 0");
    Matrix points(n, 2);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int j = 0; j < n; ++j) {
        const double theta = kTwoPi * j / n;
        points(j, 0) = radius * std::cos(theta);
        points(j, 1) = radius * std::sin(theta);
    }
    return Dataset(std::move(points));
}

} // namespace geoscore
