#pragma once

#include <Eigen/Dense>

namespace npf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

}  // namespace npf
