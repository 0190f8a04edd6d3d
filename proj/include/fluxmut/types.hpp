#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace fluxmut {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

}  // namespace fluxmut
