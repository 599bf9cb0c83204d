#include "ordered_schur.hpp"

#include <cmath>

#include "coordlqr/numkit.hpp"

namespace coordlqr::numkit::detail {

ComplexSchurForm complex_schur(const Eigen::MatrixXd& M) {
    Eigen::ComplexSchur<CMat> schur(M.cast<Complex>());
    if (schur.info() != Eigen::Success) {
        throw Error(ErrorCode::InternalInconsistency, "complex Schur iteration did not converge");
    }
    return {schur.matrixT(), schur.matrixU()};
}

namespace {

// Swaps the adjacent diagonal entries k and k+1 of the triangular factor.
void swap_adjacent(ComplexSchurForm& form, Eigen::Index k) {
    CMat& T = form.T;
    const Complex t11 = T(k, k);
    const Complex t22 = T(k + 1, k + 1);
    const Complex x0 = T(k, k + 1);
    const Complex x1 = t22 - t11;
    const double r = std::hypot(std::abs(x0), std::abs(x1));
    if (r == 0.0) {
        return;
    }
    // Unitary G = [[a, -conj(b)], [b, conj(a)]]; its first column is the
    // eigenvector of the 2x2 block for t22.
    const Complex a = x0 / r;
    const Complex b = x1 / r;
    const Eigen::Index N = T.rows();

    for (Eigen::Index j = k; j < N; ++j) {
        const Complex rk = T(k, j);
        const Complex rk1 = T(k + 1, j);
        T(k, j) = std::conj(a) * rk + std::conj(b) * rk1;
        T(k + 1, j) = -b * rk + a * rk1;
    }
    for (Eigen::Index i = 0; i <= k + 1; ++i) {
        const Complex ck = T(i, k);
        const Complex ck1 = T(i, k + 1);
        T(i, k) = a * ck + b * ck1;
        T(i, k + 1) = -std::conj(b) * ck + std::conj(a) * ck1;
    }
    for (Eigen::Index i = 0; i < N; ++i) {
        const Complex ck = form.Z(i, k);
        const Complex ck1 = form.Z(i, k + 1);
        form.Z(i, k) = a * ck + b * ck1;
        form.Z(i, k + 1) = -std::conj(b) * ck + std::conj(a) * ck1;
    }
    T(k, k) = t22;
    T(k + 1, k + 1) = t11;
    T(k + 1, k) = Complex(0.0, 0.0);
}

}  // namespace

Eigen::Index reorder_schur(ComplexSchurForm& form, const std::function<bool(Complex)>& select) {
    const Eigen::Index N = form.T.rows();
    Eigen::Index next = 0;
    for (Eigen::Index k = 0; k < N; ++k) {
        if (!select(form.T(k, k))) {
            continue;
        }
        for (Eigen::Index j = k; j > next; --j) {
            swap_adjacent(form, j - 1);
        }
        ++next;
    }
    return next;
}

}  // namespace coordlqr::numkit::detail
