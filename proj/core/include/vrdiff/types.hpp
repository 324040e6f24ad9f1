#pragma once

#include <Eigen/Dense>

namespace vrdiff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace vrdiff
