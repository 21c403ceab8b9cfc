#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace oedheat {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Point = Eigen::Vector2d;

}  // namespace oedheat
