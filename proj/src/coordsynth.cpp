#include "coordlqr/coordsynth.hpp"

#include <cmath>
#include <sstream>

namespace coordlqr {

using namespace numkit;

void Plant::validate(const Tolerances& tol) const {
    require_square(A, "A");
    if (B.rows() != A.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
    }
    require_finite(A, "A");
    require_finite(B, "B");
    if (!pbh_stabilizable(A, B, tol)) {
        throw Error(ErrorCode::AssumptionViolated, "(A, B) is not stabilizable");
    }
}

void CostSpec::validate(const Plant& plant, const Tolerances& tol) const {
    require_shape(Q, plant.n(), plant.n(), "Q");
    require_finite(Q, "Q");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > tol.psd_slack * (1.0 + Q.norm())) {
        throw Error(ErrorCode::InvalidArgument, "Q must be symmetric");
    }
    if (min_eig_sym(Q) < -tol.psd_slack * (1.0 + Q.norm())) {
        throw Error(ErrorCode::InvalidArgument, "Q must be positive semidefinite");
    }
    if (!pbh_no_imaginary_unobservable(Q, plant.A, tol)) {
        throw Error(ErrorCode::AssumptionViolated,
                    "(Q, A) has an unobservable mode on the imaginary axis");
    }
}

Weights::Weights(Vec mu) : mu_(std::move(mu)) {
    require_finite(mu_, "mu");
    if (mu_.size() == 0) {
        throw Error(ErrorCode::InvalidArgument, "mu must not be empty");
    }
    if (std::abs(mu_.squaredNorm() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "sum of mu_i^2 is " << mu_.squaredNorm() << ", expected 1 (use normalize)";
        throw Error(ErrorCode::NotUnitNorm, os.str());
    }
    for (Eigen::Index i = 0; i < mu_.size(); ++i) {
        if (std::abs(mu_(i)) <= 1e-12) {
            std::ostringstream os;
            os << "mass mu_" << i << " is zero";
            throw Error(ErrorCode::InvalidArgument, os.str());
        }
    }
}

Weights Weights::uniform(std::size_t nu) {
    if (nu == 0) {
        throw Error(ErrorCode::InvalidArgument, "nu must be positive");
    }
    const auto count = static_cast<Eigen::Index>(nu);
    return Weights(Vec::Constant(count, 1.0 / std::sqrt(static_cast<double>(nu))));
}

bool Weights::is_uniform(double tol) const {
    const double target = 1.0 / std::sqrt(static_cast<double>(mu_.size()));
    return (mu_.array() - target).abs().maxCoeff() <= tol;
}

Vec normalize(const Vec& mu) {
    const double norm = mu.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero or non-finite vector");
    }
    return mu / norm;
}

Mat GainDecomposition::materialize() const {
    const auto nu = static_cast<Eigen::Index>(this->nu());
    return kron(Mat::Identity(nu, nu), F_alpha) + coordination_block();
}

Mat GainDecomposition::coordination_block() const {
    const Vec& mu = weights.mu();
    return kron(mu * mu.transpose(), F_center - F_alpha);
}

Vec center_of_mass(InitialStates states, const Weights& weights) {
    if (states.size() != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one initial state per agent is required");
    }
    if (states.empty()) {
        return Vec();
    }
    const Eigen::Index n = states.front().size();
    Vec xbar = Vec::Zero(n);
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].size() != n) {
            throw Error(ErrorCode::DimensionMismatch, "initial states differ in dimension");
        }
        xbar += weights[i] * states[i];
    }
    return xbar;
}

LocalSolution local_gain(const Plant& plant, const CostSpec& cost, const Tolerances& tol) {
    const Eigen::Index m = plant.m();
    Mat X = solve_care(plant.A, plant.B, cost.Q, Mat::Identity(m, m), Mat(), tol);
    Mat F = -plant.B.transpose() * X;
    return {std::move(X), std::move(F)};
}

Mat center_value(const Plant& plant, const CostSpec& cost, const HardSpec& hard,
                 const Tolerances& tol) {
    require_shape(hard.Fbar, plant.m(), plant.n(), "Fbar");
    require_finite(hard.Fbar, "Fbar");
    const Mat Acl = plant.A + plant.B * hard.Fbar;
    if (!is_hurwitz(Acl, tol)) {
        std::ostringstream os;
        os << "A + B*Fbar is not Hurwitz (spectral abscissa " << spectral_abscissa(Acl) << ")";
        throw Error(ErrorCode::NotHurwitz, os.str());
    }
    return solve_lyapunov(Acl, cost.Q + hard.Fbar.transpose() * hard.Fbar, tol);
}

HardSolution synthesize_hard(const Plant& plant, const CostSpec& cost, const Weights& weights,
                             const HardSpec& hard, const Tolerances& tol) {
    plant.validate(tol);
    cost.validate(plant, tol);
    LocalSolution local = local_gain(plant, cost, tol);
    Mat Xbar = center_value(plant, cost, hard, tol);
    const double gap = min_eig_sym(Xbar - local.X_alpha);
    if (gap < -tol.psd_slack * (1.0 + Xbar.norm())) {
        std::ostringstream os;
        os << "Xbar - X_alpha has eigenvalue " << gap;
        throw Error(ErrorCode::InternalInconsistency, os.str());
    }
    GainDecomposition gains{local.F_alpha, hard.Fbar, weights};
    return {std::move(gains), std::move(local.X_alpha), std::move(Xbar)};
}

Vec apply_control(const GainDecomposition& gains, std::size_t agent, const Vec& x_i, const Vec& xbar,
                  const std::optional<Vec>& r) {
    const Eigen::Index n = gains.F_alpha.cols();
    const Eigen::Index m = gains.F_alpha.rows();
    if (agent >= gains.nu()) {
        throw Error(ErrorCode::DimensionMismatch, "agent index out of range");
    }
    if (x_i.size() != n || xbar.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "state dimension does not match the gain");
    }
    if (r && r->size() != m) {
        throw Error(ErrorCode::DimensionMismatch, "reference dimension does not match the input");
    }
    const double mu_i = gains.weights[agent];
    Vec u = gains.F_alpha * x_i + mu_i * ((gains.F_center - gains.F_alpha) * xbar);
    if (r) {
        u += mu_i * *r;
    }
    return u;
}

CostReport cost_report(const Mat& X_alpha, const Mat& X_excess, InitialStates x0s,
                       const Weights& weights, const Tolerances& tol) {
    const Vec xbar0 = center_of_mass(x0s, weights);
    const Eigen::Index n = X_alpha.rows();
    require_shape(X_alpha, n, n, "X_alpha");
    require_shape(X_excess, n, n, "X_excess");
    if (xbar0.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "initial states do not match X_alpha");
    }

    const auto nu = static_cast<Eigen::Index>(weights.size());
    CostReport report;
    report.J_local.resize(nu);
    report.J_excess.resize(nu);
    const double center_excess = xbar0.dot(X_excess * xbar0);
    const double slack = tol.psd_slack * (1.0 + X_excess.norm()) * (1.0 + xbar0.squaredNorm());
    if (center_excess < -slack) {
        std::ostringstream os;
        os << "negative coordination cost " << center_excess;
        throw Error(ErrorCode::InternalInconsistency, os.str());
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
        const Vec& x = x0s[static_cast<std::size_t>(i)];
        report.J_local(i) = x.dot(X_alpha * x);
        report.J_excess(i) = weights[static_cast<std::size_t>(i)] * weights[static_cast<std::size_t>(i)] *
                             center_excess;
    }
    report.J_total = report.J_local.sum() + center_excess;
    report.J_consensus = report.J_local.sum() - xbar0.dot(X_alpha * xbar0);
    return report;
}

CostReport optimal_cost(const Mat& X_alpha, const Mat& Xbar, InitialStates x0s,
                        const Weights& weights, const Tolerances& tol) {
    return cost_report(X_alpha, Xbar - X_alpha, x0s, weights, tol);
}

double consensus_cost_kron(const Mat& X_alpha, InitialStates x0s, const Weights& weights) {
    const auto nu = static_cast<Eigen::Index>(weights.size());
    if (x0s.size() != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one initial state per agent is required");
    }
    const Eigen::Index n = X_alpha.rows();
    Vec x0(nu * n);
    for (Eigen::Index i = 0; i < nu; ++i) {
        x0.segment(i * n, n) = x0s[static_cast<std::size_t>(i)];
    }
    const Vec& mu = weights.mu();
    const Mat P = Mat::Identity(nu, nu) - mu * mu.transpose();
    return x0.dot(kron(P, X_alpha) * x0);
}

ConsensusPair consensus_invariance_check(const Plant& plant, const CostSpec& cost,
                                         const Weights& weights, const Mat& Fbar_a,
                                         const Mat& Fbar_b, InitialStates x0s,
                                         const Tolerances& tol) {
    const auto nu = static_cast<Eigen::Index>(weights.size());
    if (x0s.size() != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one initial state per agent is required");
    }
    const Eigen::Index n = plant.n();
    Vec x0(nu * n);
    for (Eigen::Index i = 0; i < nu; ++i) {
        x0.segment(i * n, n) = x0s[static_cast<std::size_t>(i)];
    }
    const Vec xbar0 = center_of_mass(x0s, weights);
    const Mat I = Mat::Identity(nu, nu);
    const Mat A_agg = kron(I, plant.A);
    const Mat B_agg = kron(I, plant.B);
    const Mat Q_agg = kron(I, cost.Q);

    // Total cost on the materialized closed loop minus the center-of-mass cost.
    auto consensus = [&](const Mat& Fbar) {
        const HardSolution hs = synthesize_hard(plant, cost, weights, HardSpec{Fbar}, tol);
        const Mat F = hs.gains.materialize();
        const Mat P = solve_lyapunov(A_agg + B_agg * F, Q_agg + F.transpose() * F, tol);
        return x0.dot(P * x0) - xbar0.dot(hs.Xbar * xbar0);
    };
    return {consensus(Fbar_a), consensus(Fbar_b)};
}

PartialConstraint partial_constraint(const Plant& plant, const CostSpec& cost, const Mat& E,
                                     const Mat& Fbar1, const Tolerances& tol) {
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    if (E.rows() != m || E.cols() > m) {
        throw Error(ErrorCode::DimensionMismatch, "E must be m x k with k <= m");
    }
    const Eigen::Index k = E.cols();
    require_shape(Fbar1, k, n, "Fbar1");
    require_finite(E, "E");
    require_finite(Fbar1, "Fbar1");
    if (k > 0 && (E.transpose() * E - Mat::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
        throw Error(ErrorCode::NotOrthonormal, "E'E must equal the identity");
    }

    const Mat N = orthogonal_complement(E);  // m x (m - k), N N' = I - E E'
    const Mat A2 = plant.A + plant.B * E * Fbar1;
    const Mat Q2 = cost.Q + Fbar1.transpose() * Fbar1;
    Mat X2;
    try {
        if (N.cols() == 0) {
            X2 = solve_lyapunov(A2, Q2, tol);
        } else {
            const Mat BN = plant.B * N;
            X2 = solve_care(A2, BN, Q2, Mat::Identity(N.cols(), N.cols()), Mat(), tol);
        }
    } catch (const Error& e) {
        throw Error(ErrorCode::NotStabilizable,
                    std::string("partial constraint Riccati equation: ") + e.what());
    }
    Mat Fbar = E * Fbar1 - N * N.transpose() * plant.B.transpose() * X2;
    return {std::move(Fbar), std::move(X2)};
}

Mat dc_feedforward_gain(const Plant& plant, const HardSpec& hard, const Weights& weights,
                        const Tolerances& tol) {
    if (!weights.is_uniform(1e-9)) {
        throw Error(ErrorCode::InvalidArgument, "dc feedforward requires uniform masses");
    }
    require_shape(hard.Fbar, plant.m(), plant.n(), "Fbar");
    const Mat Acl = plant.A + plant.B * hard.Fbar;
    if (!is_hurwitz(Acl, tol)) {
        throw Error(ErrorCode::NotHurwitz, "A + B*Fbar is not Hurwitz");
    }
    const Mat T0 = -Acl.partialPivLu().solve(plant.B);  // n x m
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(T0);
    cod.setThreshold(tol.rank_drop);
    const auto full = std::min(T0.rows(), T0.cols());
    if (cod.rank() < full || full == 0) {
        throw Error(ErrorCode::SingularDCGain, "center-of-mass DC gain is rank deficient");
    }
    const double scale = std::sqrt(static_cast<double>(weights.size()));
    if (T0.rows() == T0.cols()) {
        return scale * T0.partialPivLu().inverse();
    }
    return scale * cod.pseudoInverse();
}

Vec dc_feedforward(const Plant& plant, const HardSpec& hard, const Weights& weights, const Vec& x_ref,
                   const Tolerances& tol) {
    if (x_ref.size() != plant.n()) {
        throw Error(ErrorCode::DimensionMismatch, "x_ref must have the state dimension");
    }
    return dc_feedforward_gain(plant, hard, weights, tol) * x_ref;
}

std::vector<Vec> WeightedRescale::scale_states(InitialStates states) const {
    if (states.size() != static_cast<std::size_t>(signal_scale.size())) {
        throw Error(ErrorCode::DimensionMismatch, "one state per agent is required");
    }
    std::vector<Vec> out;
    out.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.push_back(signal_scale(static_cast<Eigen::Index>(i)) * states[i]);
    }
    return out;
}

WeightedRescale rescale_weighted(const Vec& lambdas, const Weights& weights) {
    if (static_cast<std::size_t>(lambdas.size()) != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one lambda per agent is required");
    }
    require_finite(lambdas, "lambdas");
    if ((lambdas.array() <= 0.0).any()) {
        throw Error(ErrorCode::NonPositiveWeight, "agent cost weights must be positive");
    }
    const Vec scale = lambdas.cwiseSqrt();
    const Vec scaled_mu = weights.mu().cwiseQuotient(scale);
    return {Weights(normalize(scaled_mu)), scale};
}

}  // namespace coordlqr
