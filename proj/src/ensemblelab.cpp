#include "coordlqr/ensemblelab.hpp"

#include <cmath>
#include <sstream>

namespace coordlqr {

using namespace numkit;

namespace {

void check_size(Eigen::Index states, Eigen::Index cap, const char* what) {
    if (states > cap) {
        std::ostringstream os;
        os << what << ": aggregate dimension " << states << " exceeds " << cap;
        throw Error(ErrorCode::TooLarge, os.str());
    }
}

Vec stack(InitialStates x0s, Eigen::Index n) {
    Vec x(static_cast<Eigen::Index>(x0s.size()) * n);
    for (std::size_t i = 0; i < x0s.size(); ++i) {
        if (x0s[i].size() != n) {
            throw Error(ErrorCode::DimensionMismatch, "initial state has the wrong dimension");
        }
        x.segment(static_cast<Eigen::Index>(i) * n, n) = x0s[i];
    }
    return x;
}

}  // namespace

AggregateProblem build_aggregate(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                 const Mat& Fbar, std::size_t nu) {
    if (nu < 2) {
        throw Error(ErrorCode::InvalidArgument, "an aggregate needs at least two agents");
    }
    if (nu != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "nu does not match the number of masses");
    }
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    require_shape(Fbar, m, n, "Fbar");
    require_shape(cost.Q, n, n, "Q");
    const auto nu_i = static_cast<Eigen::Index>(nu);
    check_size(nu_i * n, 10000, "build_aggregate");

    AggregateProblem agg;
    agg.nu = nu;
    if (nu_i * n > 2000) {
        agg.warnings.push_back("aggregate dimension above 2000; dense storage grows as (nu n)^2");
    }
    const Mat I = Mat::Identity(nu_i, nu_i);
    const Mat mu_row = weights.mu().transpose();
    agg.A_agg = kron(I, plant.A);
    agg.B_agg = kron(I, plant.B);
    agg.Q_agg = kron(I, cost.Q);
    agg.C_u = kron(mu_row, Mat::Identity(m, m));
    agg.C_x = kron(mu_row, Fbar);
    return agg;
}

TransformReport transform_check(const AggregateProblem& agg, const Weights& weights, const Vec& probe) {
    const auto nu = static_cast<Eigen::Index>(agg.nu);
    const Eigen::Index n = agg.A_agg.rows() / nu;
    const Eigen::Index m = agg.B_agg.cols() / nu;
    const Mat U = decoupling_unitary(weights.mu());
    const Mat Tx = kron(U, Mat::Identity(n, n));
    const Mat Tu = kron(U, Mat::Identity(m, m));

    TransformReport report;
    // u = Tu' u~, x = Tx' x~
    const Mat Cu = agg.C_u * Tu.transpose();
    const Mat Cx = agg.C_x * Tx.transpose();
    const double cu_tail = Cu.rightCols(Cu.cols() - m).cwiseAbs().maxCoeff();
    const double cx_tail = Cx.rightCols(Cx.cols() - n).cwiseAbs().maxCoeff();
    const double cu_head = (Cu.leftCols(m) - Mat::Identity(m, m)).cwiseAbs().maxCoeff();
    const double cx_head = (Cx.leftCols(n) - agg.C_x.leftCols(n) / weights[0]).cwiseAbs().maxCoeff();
    report.constraint_residual = std::max({cu_tail, cx_tail, cu_head, cx_head});

    const double da = (Tx * agg.A_agg * Tx.transpose() - agg.A_agg).cwiseAbs().maxCoeff();
    const double db = (Tx * agg.B_agg * Tu.transpose() - agg.B_agg).cwiseAbs().maxCoeff();
    const double dq = (Tx * agg.Q_agg * Tx.transpose() - agg.Q_agg).cwiseAbs().maxCoeff();
    report.structure_residual = std::max({da, db, dq});

    Vec x = probe;
    if (x.size() == 0) {
        x = Vec::LinSpaced(nu * n, -1.0, 2.0);
    }
    if (x.size() != nu * n) {
        throw Error(ErrorCode::DimensionMismatch, "probe has the wrong dimension");
    }
    Vec xbar = Vec::Zero(n);
    for (Eigen::Index i = 0; i < nu; ++i) {
        xbar += weights[static_cast<std::size_t>(i)] * x.segment(i * n, n);
    }
    const Vec xt = Tx * x;
    report.center_identity_residual = (xt.head(n) - xbar).cwiseAbs().maxCoeff();
    return report;
}

OracleResult oracle_constrained_cost(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                     const Mat& Fbar, InitialStates x0s,
                                     const std::optional<Vec>& agent_cost_weights,
                                     const Tolerances& tol) {
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    const auto nu = static_cast<Eigen::Index>(weights.size());
    check_size(nu * n, kOracleMaxStates, "oracle");
    require_shape(Fbar, m, n, "Fbar");
    if (x0s.size() != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one initial state per agent is required");
    }

    Vec lambdas = Vec::Ones(nu);
    if (agent_cost_weights) {
        if (agent_cost_weights->size() != nu) {
            throw Error(ErrorCode::DimensionMismatch, "one cost weight per agent is required");
        }
        if ((agent_cost_weights->array() <= 0.0).any()) {
            throw Error(ErrorCode::NonPositiveWeight, "agent cost weights must be positive");
        }
        lambdas = *agent_cost_weights;
    }
    const Mat Lambda = lambdas.asDiagonal();
    const Mat& mu = weights.mu();
    const Mat I_nu = Mat::Identity(nu, nu);

    const Mat A_agg = kron(I_nu, plant.A);
    const Mat B_agg = kron(I_nu, plant.B);
    const Mat Q_agg = kron(Lambda, cost.Q);
    const Mat R_agg = kron(Lambda, Mat::Identity(m, m));

    // Particular solution of the constraint plus its null space.
    const Mat K0 = kron(mu * mu.transpose(), Fbar);
    const Mat N = orthogonal_complement(kron(mu, Mat::Identity(m, m)));

    const Mat Ar = A_agg + B_agg * K0;
    const Mat Qr = symmetrize(Q_agg + K0.transpose() * R_agg * K0);

    OracleResult out;
    if (N.cols() == 0) {
        out.X = solve_lyapunov(Ar, Qr, tol);
        out.gain = K0;
    } else {
        const Mat Br = B_agg * N;
        const Mat Rr = symmetrize(N.transpose() * R_agg * N);
        const Mat Sr = K0.transpose() * R_agg * N;
        out.X = solve_care(Ar, Br, Qr, Rr, Sr, tol);
        out.gain = K0 + N * care_gain(out.X, Br, Rr, Sr);
    }
    const Vec x0 = stack(x0s, n);
    out.J = x0.dot(out.X * x0);
    return out;
}

std::vector<Vec> propagate_linear(const Mat& Acl, const Vec& z0, double dt, std::size_t steps) {
    require_square(Acl, "Acl");
    if (z0.size() != Acl.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "initial state does not match the dynamics");
    }
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    }
    const Mat Phi = expm(Acl, dt);
    std::vector<Vec> out;
    out.reserve(steps + 1);
    out.push_back(z0);
    for (std::size_t k = 0; k < steps; ++k) {
        out.push_back(Phi * out.back());
    }
    return out;
}

}  // namespace coordlqr
