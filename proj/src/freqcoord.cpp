#include "coordlqr/freqcoord.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace coordlqr {

using namespace numkit;

Mat StateSpace::evaluate(double s) const {
    if (A.rows() == 0) {
        return D;
    }
    const Mat resolvent = (s * Mat::Identity(A.rows(), A.cols()) - A).partialPivLu().solve(B);
    return D + C * resolvent;
}

void WeightFilter::validate(Eigen::Index m_expected, const Tolerances& tol) const {
    const Eigen::Index p_ = Aphi.rows();
    require_square(Aphi, "Aphi");
    require_shape(Bphi, p_, m_expected, "Bphi");
    require_shape(Dphi, Dphi.rows(), m_expected, "Dphi");
    require_shape(Cphi, Dphi.rows(), p_, "Cphi");
    require_finite(Aphi, "Aphi");
    require_finite(Bphi, "Bphi");
    require_finite(Cphi, "Cphi");
    require_finite(Dphi, "Dphi");
    if (p_ == 0) {
        return;
    }
    if (!pbh_controllable(Aphi, Bphi, tol)) {
        throw Error(ErrorCode::NotMinimalWeight, "weight filter (Aphi, Bphi) is not controllable");
    }
    if (!pbh_observable(Cphi, Aphi, tol)) {
        throw Error(ErrorCode::NotMinimalWeight, "weight filter (Cphi, Aphi) is not observable");
    }
}

WeightFilter WeightFilter::static_gain(double c, Eigen::Index m) {
    return {Mat(0, 0), Mat(0, m), Mat(m, 0), c * Mat::Identity(m, m)};
}

WeightFilter WeightFilter::integrator(double c, Eigen::Index m) {
    return {Mat::Zero(m, m), Mat::Identity(m, m), c * Mat::Identity(m, m), Mat::Zero(m, m)};
}

WeightFilter WeightFilter::zero(Eigen::Index m) {
    return {Mat(0, 0), Mat(0, m), Mat(0, 0), Mat(0, m)};
}

AugmentedPlant augment(const Plant& plant, const CostSpec& cost, const Mat& Fbar,
                       const WeightFilter& w) {
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    require_shape(Fbar, m, n, "Fbar");
    require_shape(cost.Q, n, n, "Q");
    if (w.m() != m || w.Dphi.cols() != m) {
        throw Error(ErrorCode::DimensionMismatch, "weight filter input dimension must equal m");
    }
    const Eigen::Index p = w.p();
    const Eigen::Index q = w.Dphi.rows();
    require_shape(w.Cphi, q, p, "Cphi");

    AugmentedPlant aug;
    aug.A_sigma = Mat::Zero(p + n, p + n);
    aug.A_sigma.topLeftCorner(p, p) = w.Aphi;
    aug.A_sigma.topRightCorner(p, n) = -w.Bphi * Fbar;
    aug.A_sigma.bottomRightCorner(n, n) = plant.A;

    aug.B_sigma.resize(p + n, m);
    aug.B_sigma << w.Bphi, plant.B;

    aug.C_sigma = Mat::Zero(q + n + m, p + n);
    aug.C_sigma.topLeftCorner(q, p) = w.Cphi;
    aug.C_sigma.topRightCorner(q, n) = -w.Dphi * Fbar;
    aug.C_sigma.block(q, p, n, n) = psd_sqrt(cost.Q);

    aug.D_sigma = Mat::Zero(q + n + m, m);
    aug.D_sigma.topRows(q) = w.Dphi;
    aug.D_sigma.bottomRows(m) = Mat::Identity(m, m);
    return aug;
}

Mat AugmentedSynthesis::F_sigma() const {
    Mat F(F_sigma2.rows(), p() + n());
    F << F_sigma1, F_sigma2;
    return F;
}

std::vector<std::complex<double>> transmission_zeros(const StateSpace& sys) {
    require_square(sys.D, "D");
    if (sys.A.rows() == 0) {
        return {};
    }
    const Mat Dinv = checked_inverse(sys.D, "D");
    return eigenvalues(sys.A - sys.B * Dinv * sys.C);
}

namespace {

// Largest distance from an element of `a` to its greedily matched partner in `b`.
double spectrum_mismatch(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
    if (a.size() != b.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = 0.0;
    for (const auto& z : a) {
        auto best = b.begin();
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (std::abs(*it - z) < std::abs(*best - z)) {
                best = it;
            }
        }
        worst = std::max(worst, std::abs(*best - z));
        b.erase(best);
    }
    return worst;
}

void require_order(const Mat& lower, const Mat& upper, const Tolerances& tol, const char* what) {
    const double gap = min_eig_sym(upper - lower);
    if (gap < -tol.psd_slack * (1.0 + upper.norm() + lower.norm())) {
        std::ostringstream os;
        os << what << " violated by " << gap;
        throw Error(ErrorCode::InternalInconsistency, os.str());
    }
}

}  // namespace

AugmentedSynthesis synthesize_weighted(const Plant& plant, const CostSpec& cost,
                                       [[maybe_unused]] const Weights& weights, const Mat& Fbar,
                                       const WeightFilter& w, const Tolerances& tol) {
    plant.validate(tol);
    cost.validate(plant, tol);
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    require_shape(Fbar, m, n, "Fbar");
    require_finite(Fbar, "Fbar");
    if (!is_hurwitz(plant.A + plant.B * Fbar, tol)) {
        throw Error(ErrorCode::NotHurwitz, "A + B*Fbar is not Hurwitz");
    }
    w.validate(m, tol);

    const AugmentedPlant aug = augment(plant, cost, Fbar, w);
    const Mat Qs = aug.C_sigma.transpose() * aug.C_sigma;
    const Mat Rs = aug.D_sigma.transpose() * aug.D_sigma;
    const Mat Ss = aug.C_sigma.transpose() * aug.D_sigma;

    AugmentedSynthesis out;
    out.Fbar = Fbar;
    out.A_sigma = aug.A_sigma;
    out.B_sigma = aug.B_sigma;
    out.X_sigma = solve_care(aug.A_sigma, aug.B_sigma, Qs, Rs, Ss, tol);
    const Mat F = care_gain(out.X_sigma, aug.B_sigma, Rs, Ss);
    const Eigen::Index p = w.p();
    out.F_sigma1 = F.leftCols(p);
    out.F_sigma2 = F.rightCols(n);
    out.M_phi = StateSpace{w.Aphi + w.Bphi * out.F_sigma1, w.Bphi, out.F_sigma1, Mat::Identity(m, m)};
    if (p == 1 && m == 1) {
        out.omega_sigma = -out.F_sigma1(0, 0);
    }

    const LocalSolution local = local_gain(plant, cost, tol);
    const Mat Xbar = center_value(plant, cost, HardSpec{Fbar}, tol);
    const Mat X22 = out.X_sigma22();
    require_order(local.X_alpha, X22, tol, "X_alpha <= X_sigma22");
    require_order(X22, Xbar, tol, "X_sigma22 <= Xbar");

    if (p > 0) {
        const auto zeros = transmission_zeros(out.M_phi);
        const auto poles = eigenvalues(w.Aphi);
        double scale = 1.0;
        for (const auto& z : poles) {
            scale = std::max(scale, std::abs(z));
        }
        if (spectrum_mismatch(zeros, poles) > 1e-6 * scale) {
            throw Error(ErrorCode::InternalInconsistency, "zeros of M_phi differ from the weight poles");
        }
    }
    return out;
}

WeightedController weighted_controller(const AugmentedSynthesis& synth, const Mat& F_alpha,
                                       const Weights& weights) {
    if (F_alpha.rows() != synth.F_sigma2.rows() || F_alpha.cols() != synth.F_sigma2.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "F_alpha does not match the synthesis");
    }
    const Mat K = synth.F_sigma2 - synth.Fbar;
    StateSpace filter{synth.M_phi.A, synth.M_phi.B * K, synth.F_sigma1, K};
    return WeightedController{F_alpha, synth.Fbar, weights, std::move(filter)};
}

Mat weighted_center_loop(const WeightedController& ctrl, const Plant& plant) {
    const Eigen::Index n = plant.n();
    const Eigen::Index p = ctrl.p();
    const StateSpace& f = ctrl.filter;
    Mat Acl(p + n, p + n);
    Acl.topLeftCorner(p, p) = f.A;
    Acl.topRightCorner(p, n) = f.B;
    Acl.bottomLeftCorner(n, p) = plant.B * f.C;
    Acl.bottomRightCorner(n, n) = plant.A + plant.B * (ctrl.Fbar + f.D);
    return Acl;
}

WeightedEnergyMatrices weighted_energy_matrices(const AugmentedSynthesis& synth, const Mat& F_alpha,
                                                const Tolerances& tol) {
    const Eigen::Index n = synth.n();
    const Mat Acl = synth.closed_loop();

    Mat mismatch_map = synth.F_sigma();
    mismatch_map.rightCols(n) -= synth.Fbar;
    Mat excess_map = synth.F_sigma();
    excess_map.rightCols(n) -= F_alpha;

    const Mat X_phi = solve_lyapunov(Acl, mismatch_map.transpose() * mismatch_map, tol);
    const Mat X_v = solve_lyapunov(Acl, excess_map.transpose() * excess_map, tol);
    return {X_phi.bottomRightCorner(n, n), X_v.bottomRightCorner(n, n)};
}

WeightedEnergies weighted_energies(const AugmentedSynthesis& synth, const Plant& plant,
                                   const CostSpec& cost, const Mat& Fbar, const Weights& weights,
                                   InitialStates x0s, const Tolerances& tol) {
    if ((Fbar - synth.Fbar).cwiseAbs().maxCoeff() > 0.0) {
        throw Error(ErrorCode::InvalidArgument, "Fbar differs from the one used in synthesis");
    }
    const LocalSolution local = local_gain(plant, cost, tol);
    const Mat Xbar = center_value(plant, cost, HardSpec{Fbar}, tol);
    WeightedEnergyMatrices mats = weighted_energy_matrices(synth, local.F_alpha, tol);
    require_order(mats.X_v22, Xbar - local.X_alpha, tol, "X_v22 <= Xbar - X_alpha");

    const Vec xbar0 = center_of_mass(x0s, weights);
    if (xbar0.size() != plant.n()) {
        throw Error(ErrorCode::DimensionMismatch, "initial states do not match the plant");
    }
    WeightedEnergies out;
    out.mismatch = xbar0.dot(mats.X_phi22 * xbar0);
    out.per_agent_excess = weights.mu().cwiseAbs2() * xbar0.dot(mats.X_v22 * xbar0);
    out.X_phi22 = std::move(mats.X_phi22);
    out.X_v22 = std::move(mats.X_v22);
    return out;
}

WeightFamily static_family(Eigen::Index m) {
    return [m](double lambda) {
        if (!(lambda >= 0.0 && lambda < 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "static weight family needs lambda in [0, 1)");
        }
        return WeightFilter::static_gain(std::sqrt(lambda / (1.0 - lambda)), m);
    };
}

WeightFamily integrator_family(Eigen::Index m) {
    return [m](double lambda) {
        if (!(lambda >= 0.0 && lambda < 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "integrator weight family needs lambda in [0, 1)");
        }
        if (lambda == 0.0) {
            return WeightFilter::zero(m);
        }
        return WeightFilter::integrator(std::sqrt(lambda / (1.0 - lambda)), m);
    };
}

std::vector<WeightedTradeoffPoint> sweep_weighted(const Plant& plant, const CostSpec& cost,
                                                  const Weights& weights, const Mat& Fbar,
                                                  const WeightFamily& family,
                                                  const std::vector<double>& grid, InitialStates x0s,
                                                  const Tolerances& tol) {
    const LocalSolution local = local_gain(plant, cost, tol);
    const Vec xbar0 = center_of_mass(x0s, weights);
    std::vector<WeightedTradeoffPoint> points;
    points.reserve(grid.size());
    for (const double lambda : grid) {
        try {
            const WeightFilter w = family(lambda);
            const AugmentedSynthesis synth = synthesize_weighted(plant, cost, weights, Fbar, w, tol);
            const WeightedEnergyMatrices mats = weighted_energy_matrices(synth, local.F_alpha, tol);
            WeightedTradeoffPoint pt;
            pt.lambda = lambda;
            pt.mismatch = xbar0.dot(mats.X_phi22 * xbar0);
            pt.per_agent_excess = weights.mu().cwiseAbs2() * xbar0.dot(mats.X_v22 * xbar0);
            pt.omega_sigma = synth.omega_sigma;
            points.push_back(std::move(pt));
        } catch (const Error& e) {
            std::ostringstream os;
            os << "lambda = " << lambda << ": " << e.what();
            throw Error(e.code(), os.str());
        }
    }
    return points;
}

}  // namespace coordlqr
