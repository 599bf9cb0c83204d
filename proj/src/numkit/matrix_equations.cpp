#include <cmath>
#include <limits>
#include <sstream>

#include "coordlqr/numkit.hpp"
#include "ordered_schur.hpp"

namespace coordlqr::numkit {

namespace {

using detail::CMat;
using detail::Complex;

struct CareData {
    Mat A;
    Mat B;
    Mat Q;
    Mat R;
    Mat S;  // n x m, zero when absent
};

CareData validate_care(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S) {
    require_square(A, "A");
    const Eigen::Index n = A.rows();
    if (B.rows() != n) {
        throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
    }
    const Eigen::Index m = B.cols();
    require_shape(Q, n, n, "Q");
    require_shape(R, m, m, "R");
    CareData data{A, B, Q, R, S.size() == 0 ? Mat::Zero(n, m) : S};
    require_shape(data.S, n, m, "S");
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(Q, "Q");
    require_finite(R, "R");
    require_finite(data.S, "S");
    return data;
}

Mat lyapunov_unchecked(const Mat& Acl, const Mat& Q) {
    const Eigen::Index n = Acl.rows();
    auto form = detail::complex_schur(Acl);
    const CMat& T = form.T;
    const CMat& Z = form.Z;
    const CMat C = Z.adjoint() * Q.cast<Complex>() * Z;

    // T^H Y + Y T = -C, column by column; T^H + t_jj I is lower triangular.
    CMat Y = CMat::Zero(n, n);
    const CMat TH = T.adjoint();
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXcd rhs = -C.col(j);
        for (Eigen::Index k = 0; k < j; ++k) {
            rhs -= Y.col(k) * T(k, j);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            Complex acc = rhs(i);
            for (Eigen::Index k = 0; k < i; ++k) {
                acc -= TH(i, k) * Y(k, j);
            }
            Y(i, j) = acc / (TH(i, i) + T(j, j));
        }
    }
    const Mat X = (Z * Y * Z.adjoint()).real();
    return symmetrize(X);
}

double relative_residual(double residual, const Mat& X) {
    return residual / (1.0 + X.norm());
}

}  // namespace

double care_residual(const Mat& X, const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                     const Mat& S) {
    const Mat cross = S.size() == 0 ? Mat(X * B) : Mat(X * B + S);
    const Mat res =
        A.transpose() * X + X * A + Q - cross * R.ldlt().solve(cross.transpose());
    return res.norm();
}

Mat care_gain(const Mat& X, const Mat& B, const Mat& R, const Mat& S) {
    const Mat rhs = S.size() == 0 ? Mat(B.transpose() * X) : Mat(B.transpose() * X + S.transpose());
    return -R.ldlt().solve(rhs);
}

double lyapunov_residual(const Mat& X, const Mat& Acl, const Mat& Q) {
    return (Acl.transpose() * X + X * Acl + Q).norm();
}

Mat solve_lyapunov(const Mat& Acl, const Mat& Q, const Tolerances& tol) {
    require_square(Acl, "Acl");
    require_shape(Q, Acl.rows(), Acl.cols(), "Q");
    require_finite(Acl, "Acl");
    require_finite(Q, "Q");
    if (Acl.size() == 0) {
        return Mat(0, 0);
    }
    if (!is_hurwitz(Acl, tol)) {
        std::ostringstream os;
        os << "closed-loop matrix is not Hurwitz (spectral abscissa " << spectral_abscissa(Acl) << ")";
        throw Error(ErrorCode::NotHurwitz, os.str());
    }
    Mat X = lyapunov_unchecked(Acl, symmetrize(Q));
    if (!all_finite(X)) {
        throw Error(ErrorCode::InternalInconsistency, "Lyapunov solution is not finite");
    }
    return X;
}

Mat solve_care(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S,
               const Tolerances& tol) {
    const CareData d = validate_care(A, B, Q, R, S);
    const Eigen::Index n = d.A.rows();
    if (n == 0) {
        return Mat(0, 0);
    }

    Eigen::LLT<Mat> R_chol(symmetrize(d.R));
    if (R_chol.info() != Eigen::Success) {
        throw Error(ErrorCode::AssumptionViolated, "R must be symmetric positive definite");
    }
    const Mat Rinv_St = R_chol.solve(d.S.transpose());
    const Mat A1 = d.A - d.B * Rinv_St;
    const Mat Q1 = symmetrize(d.Q - d.S * Rinv_St);
    const Mat G = symmetrize(d.B * R_chol.solve(d.B.transpose()));

    Mat H(2 * n, 2 * n);
    H << A1, -G, -Q1, -A1.transpose();

    auto form = detail::complex_schur(H);
    const double axis_guard = 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, H.norm());
    for (Eigen::Index k = 0; k < 2 * n; ++k) {
        if (std::abs(form.T(k, k).real()) <= axis_guard) {
            std::ostringstream os;
            os << "Hamiltonian has an eigenvalue on the imaginary axis (" << form.T(k, k).real() << " + "
               << form.T(k, k).imag() << "i)";
            throw Error(ErrorCode::NoStabilizingSolution, os.str());
        }
    }
    const Eigen::Index stable =
        detail::reorder_schur(form, [](Complex lambda) { return lambda.real() < 0.0; });
    if (stable != n) {
        throw Error(ErrorCode::NoStabilizingSolution, "Hamiltonian stable subspace has wrong dimension");
    }

    const CMat U11 = form.Z.topLeftCorner(n, n);
    const CMat U21 = form.Z.bottomLeftCorner(n, n);
    Eigen::FullPivLU<CMat> lu(U11.transpose());
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::NoStabilizingSolution, "stable invariant subspace is not a graph");
    }
    const CMat Xc = lu.solve(U21.transpose()).transpose();
    Mat X = symmetrize(Xc.real());
    if (!all_finite(X)) {
        throw Error(ErrorCode::NoStabilizingSolution, "Riccati solution is not finite");
    }

    double residual = care_residual(X, d.A, d.B, d.Q, d.R, d.S);
    {
        // One Newton (Kleinman) correction around the current iterate.
        const Mat K = care_gain(X, d.B, d.R, d.S);
        const Mat Acl = d.A + d.B * K;
        if (is_hurwitz(Acl, tol)) {
            const Mat W = d.Q + K.transpose() * d.R * K + d.S * K + K.transpose() * d.S.transpose();
            const Mat Xn = lyapunov_unchecked(Acl, symmetrize(W));
            const double rn = care_residual(Xn, d.A, d.B, d.Q, d.R, d.S);
            if (rn < residual) {
                X = Xn;
                residual = rn;
            }
        }
    }
    if (relative_residual(residual, X) > tol.residual_rel) {
        std::ostringstream os;
        os << "Riccati residual " << residual << " exceeds tolerance";
        throw Error(ErrorCode::NoStabilizingSolution, os.str());
    }

    const Mat Acl = d.A + d.B * care_gain(X, d.B, d.R, d.S);
    if (!is_hurwitz(Acl, tol)) {
        std::ostringstream os;
        os << "Riccati closed loop not Hurwitz (spectral abscissa " << spectral_abscissa(Acl) << ")";
        throw Error(ErrorCode::NoStabilizingSolution, os.str());
    }
    return X;
}

}  // namespace coordlqr::numkit
