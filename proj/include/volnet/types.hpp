#pragma once

#include <Eigen/Dense>

namespace volnet {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

}  // namespace volnet
