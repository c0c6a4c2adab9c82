#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace geoscore {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

} // namespace geoscore
