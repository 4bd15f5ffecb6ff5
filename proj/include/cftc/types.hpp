#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace cftc {

using Scalar = double;
using Index = Eigen::Index;

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IntVec = Eigen::VectorXi;
using IntMat = Eigen::MatrixXi;

}  // namespace cftc
