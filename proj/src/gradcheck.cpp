#include "noiseproto/gradcheck.hpp"

#include <cmath>

#include "noiseproto/error.hpp"

namespace noiseproto {

Matrix finite_diff_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                            double h) {
    Matrix grad(x.rows(), x.cols());
    Matrix probe = x;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + h;
        const double f_plus = f(probe);
        probe.data()[i] = orig - h;
        const double f_minus = f(probe);
        probe.data()[i] = orig;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw numeric_error("finite_diff_gradient: non-finite evaluation at flat index " +
                                std::to_string(i));
        }
        grad.data()[i] = (f_plus - f_minus) / (2.0 * h);
    }
    return grad;
}

double gradient_rel_error(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw shape_error("gradient_rel_error: shape mismatch");
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        diff += d * d;
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    if (denom < 1e-300) return 0.0;
    return std::sqrt(diff) / denom;
}

}  // namespace noiseproto
