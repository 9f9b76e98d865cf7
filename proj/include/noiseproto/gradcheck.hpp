#pragma once

#include <functional>

#include "noiseproto/matrix.hpp"

namespace noiseproto {

// Central-difference gradient of a scalar function. This is the oracle
// every analytic gradient in the project is checked against.
Matrix finite_diff_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                            double h = 1e-5);

// ||a - b|| / max(||a||, ||b||); 0 when both are (near) zero.
double gradient_rel_error(const Matrix& a, const Matrix& b);

}  // namespace noiseproto
