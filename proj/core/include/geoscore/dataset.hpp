#pragma once

#include "geoscore/types.hpp"

#include <string>

namespace geoscore {

enum class FileFormat { CsvRows, F64Binary };

// Training set: N points of identical dimension d, all coordinates finite.
class Dataset {
public:
    explicit Dataset(Matrix points);

    Index size() const { return points_.rows(); }
    Index dim() const { return points_.cols(); }
    const Matrix& points() const { return points_; }
    Vector point(Index i) const { return points_.row(i).transpose(); }

    // Largest pairwise distance.
    double diameter() const;

private:
    Matrix points_;
};

// CSV: one point per row, decimal floats; optional single header line.
// Binary: 16-byte header (magic "GSC1", u32 N, u32 d, 4 reserved bytes),
// then row-major little-endian f64.
Dataset load_dataset(const std::string& path, FileFormat format, bool skip_header = false);
void save_dataset(const Dataset& dataset, const std::string& path, FileFormat format);

// n points at angles 2*pi*j/n on the circle of the given radius, centred at
// the origin.
Dataset circle_dataset(int n, double radius);

} // namespace geoscore
