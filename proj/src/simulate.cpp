#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "coordlqr/ensemblelab.hpp"

namespace coordlqr {

using namespace numkit;

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    constexpr double scale = 0x1.0p-53;
    const double u1 = static_cast<double>(engine_() >> 11) * scale;
    const double u2 = static_cast<double>(engine_() >> 11) * scale;
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

namespace {

struct LoopData {
    Mat K_x;       // nu*m x nu*n
    Mat K_phi;     // nu*m x p
    Mat A_f;       // p x p
    Mat B_f;       // p x n, driven by xbar
    Mat F_target;  // m x n
};

LoopData loop_data(const GainDecomposition& g, Eigen::Index n) {
    LoopData d;
    d.K_x = g.materialize();
    d.K_phi = Mat::Zero(d.K_x.rows(), 0);
    d.A_f = Mat::Zero(0, 0);
    d.B_f = Mat::Zero(0, n);
    d.F_target = g.F_center;
    return d;
}

LoopData loop_data(const WeightedController& c, Eigen::Index n) {
    const auto nu = static_cast<Eigen::Index>(c.nu());
    const Eigen::Index m = c.F_alpha.rows();
    const Vec& mu = c.weights.mu();
    LoopData d;
    d.K_x = kron(Mat::Identity(nu, nu), c.F_alpha) +
            kron(mu * mu.transpose(), c.Fbar - c.F_alpha + c.filter.D);
    d.K_phi = kron(mu, c.filter.C);
    d.A_f = c.filter.A;
    d.B_f = c.filter.B;
    d.F_target = c.Fbar;
    require_shape(d.B_f, d.A_f.rows(), n, "filter B");
    require_shape(d.K_phi, nu * m, d.A_f.rows(), "filter C");
    return d;
}

}  // namespace

Trajectory simulate(const Plant& plant, const EnsembleController& controller, InitialStates x0s,
                    const SimulationOptions& options, const Tolerances& tol) {
    plant.validate(tol);
    if (!(options.dt > 0.0) || !std::isfinite(options.dt)) {
        throw Error(ErrorCode::InvalidArgument, "dt must be positive and finite");
    }
    if (!(options.T >= options.dt) || !std::isfinite(options.T)) {
        throw Error(ErrorCode::InvalidArgument, "T must be finite and at least dt");
    }
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    const Weights& weights = std::visit([](const auto& c) -> const Weights& { return c.weights; }, controller);
    const auto nu = static_cast<Eigen::Index>(weights.size());
    if (x0s.size() != weights.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one initial state per agent is required");
    }
    const Eigen::Index filter_states = std::holds_alternative<WeightedController>(controller)
                                           ? std::get<WeightedController>(controller).p()
                                           : 0;
    if (nu * n + filter_states > 4000) {
        throw Error(ErrorCode::TooLarge, "simulation state dimension exceeds 4000");
    }
    const LoopData d = std::visit([n](const auto& c) { return loop_data(c, n); }, controller);
    require_shape(d.K_x, nu * m, nu * n, "aggregate gain");
    const Eigen::Index p = d.A_f.rows();
    const Eigen::Index N = nu * n + p;

    const Vec& mu = weights.mu();
    const Mat center = kron(mu.transpose(), Mat::Identity(n, n));  // xbar = center * x
    const Mat B_agg = kron(Mat::Identity(nu, nu), plant.B);

    Trajectory traj;
    traj.nu = weights.size();
    traj.n = n;
    traj.m = m;
    traj.p = p;
    traj.input_map.resize(nu * m, N);
    traj.input_map << d.K_x, d.K_phi;
    traj.closed_loop = Mat::Zero(N, N);
    traj.closed_loop.topLeftCorner(nu * n, nu * n) = kron(Mat::Identity(nu, nu), plant.A);
    traj.closed_loop.topRows(nu * n) += B_agg * traj.input_map;
    traj.closed_loop.bottomLeftCorner(p, nu * n) = d.B_f * center;
    traj.closed_loop.bottomRightCorner(p, p) = d.A_f;
    require_finite(traj.closed_loop, "closed loop");

    if (options.require_stable && !is_hurwitz(traj.closed_loop, tol)) {
        std::ostringstream os;
        os << "closed loop is not Hurwitz (spectral abscissa " << spectral_abscissa(traj.closed_loop) << ")";
        throw Error(ErrorCode::UnstableClosedLoop, os.str());
    }

    const bool has_ref = static_cast<bool>(options.reference);
    const Mat Br_in = kron(mu, Mat::Identity(m, m));
    Mat Phi;
    Mat Gamma = Mat::Zero(N, m);
    if (has_ref) {
        Mat M = Mat::Zero(N + m, N + m);
        M.topLeftCorner(N, N) = traj.closed_loop;
        M.topRightCorner(nu * n, m) = B_agg * Br_in;
        const Mat E = expm(M, options.dt);
        Phi = E.topLeftCorner(N, N);
        Gamma = E.topRightCorner(N, m);
    } else {
        Phi = expm(traj.closed_loop, options.dt);
    }

    std::optional<NormalStream> stream;
    Mat G;
    double noise_scale = 0.0;
    if (options.noise && options.noise->intensity != 0.0) {
        if (!(options.noise->intensity > 0.0) || !std::isfinite(options.noise->intensity)) {
            throw Error(ErrorCode::InvalidArgument, "noise intensity must be non-negative");
        }
        G = options.noise->input.size() == 0 ? Mat(Mat::Identity(n, n)) : options.noise->input;
        if (G.rows() != n) {
            throw Error(ErrorCode::DimensionMismatch, "noise input must have n rows");
        }
        stream.emplace(options.noise->seed);
        noise_scale = std::sqrt(options.noise->intensity * options.dt);
        traj.noisy = true;
    }

    const auto steps = static_cast<std::size_t>(std::ceil(options.T / options.dt - 1e-9));
    traj.times.reserve(steps + 1);

    Vec z = Vec::Zero(N);
    for (Eigen::Index i = 0; i < nu; ++i) {
        if (x0s[static_cast<std::size_t>(i)].size() != n) {
            throw Error(ErrorCode::DimensionMismatch, "initial state has the wrong dimension");
        }
        z.segment(i * n, n) = x0s[static_cast<std::size_t>(i)];
    }

    auto record = [&](double t, const Vec& r) {
        const Vec x = z.head(nu * n);
        Vec u = traj.input_map * z;
        if (has_ref) {
            u += Br_in * r;
        }
        Vec xbar = Vec::Zero(n);
        Vec ubar = Vec::Zero(m);
        for (Eigen::Index i = 0; i < nu; ++i) {
            const double w = mu(i);
            xbar += w * x.segment(i * n, n);
            ubar += w * u.segment(i * m, m);
        }
        Vec mis = ubar - d.F_target * xbar;
        if (has_ref) {
            mis -= r;
            traj.reference.push_back(r);
        }
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.inputs.push_back(std::move(u));
        traj.center_state.push_back(std::move(xbar));
        traj.center_input.push_back(std::move(ubar));
        traj.mismatch.push_back(std::move(mis));
        if (p > 0) {
            traj.filter_state.push_back(z.tail(p));
        }
    };

    auto reference_at = [&](double t) -> Vec {
        if (!has_ref) {
            return Vec();
        }
        Vec r = options.reference(t);
        if (r.size() != m || !all_finite(r)) {
            throw Error(ErrorCode::InvalidArgument, "reference must return a finite vector of size m");
        }
        return r;
    };

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * options.dt;
        const Vec r = reference_at(t);
        record(t, r);
        z = Phi * z;
        if (has_ref) {
            z += Gamma * r;
        }
        if (stream) {
            for (Eigen::Index i = 0; i < nu; ++i) {
                Vec xi(G.cols());
                for (Eigen::Index j = 0; j < xi.size(); ++j) {
                    xi(j) = stream->next();
                }
                z.segment(i * n, n) += noise_scale * (G * xi);
            }
        }
        if (!all_finite(z)) {
            throw Error(ErrorCode::UnstableClosedLoop, "state overflowed during simulation");
        }
    }
    const double t_end = static_cast<double>(steps) * options.dt;
    record(t_end, reference_at(t_end));
    return traj;
}

double default_cost_horizon(const Mat& Acl) {
    const double a = spectral_abscissa(Acl);
    if (!(a < 0.0)) {
        throw Error(ErrorCode::NotHurwitz, "cost horizon needs a Hurwitz closed loop");
    }
    return std::min(std::log(1e8) / -a, 1e4);
}

EmpiricalCost empirical_cost(const Trajectory& traj, const CostSpec& cost, const Tolerances& tol) {
    const Eigen::Index n = traj.n;
    require_shape(cost.Q, n, n, "Q");
    const std::size_t K = traj.times.size();
    EmpiricalCost out;
    out.per_agent = Vec::Zero(static_cast<Eigen::Index>(traj.nu));
    if (K < 2) {
        out.tail_bound = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    auto stage = [&](std::size_t k, std::size_t i) {
        const Vec x = traj.agent_state(k, i);
        const Vec u = traj.agent_input(k, i);
        return x.dot(cost.Q * x) + u.squaredNorm();
    };
    for (std::size_t i = 0; i < traj.nu; ++i) {
        double acc = 0.0;
        double prev = stage(0, i);
        for (std::size_t k = 1; k < K; ++k) {
            const double cur = stage(k, i);
            acc += 0.5 * (traj.times[k] - traj.times[k - 1]) * (prev + cur);
            prev = cur;
        }
        out.per_agent(static_cast<Eigen::Index>(i)) = acc;
    }
    out.total = out.per_agent.sum();

    out.tail_bound = std::numeric_limits<double>::quiet_NaN();
    if (!traj.noisy && traj.reference.empty() && is_hurwitz(traj.closed_loop, tol)) {
        const auto nu = static_cast<Eigen::Index>(traj.nu);
        const Eigen::Index N = traj.closed_loop.rows();
        Mat W = traj.input_map.transpose() * traj.input_map;
        W.topLeftCorner(nu * n, nu * n) += kron(Mat::Identity(nu, nu), cost.Q);
        const Mat P = solve_lyapunov(traj.closed_loop, symmetrize(W), tol);
        Vec z(N);
        z.head(nu * n) = traj.states.back();
        if (traj.p > 0) {
            z.tail(traj.p) = traj.filter_state.back();
        }
        out.tail_bound = z.dot(P * z);
    }
    return out;
}

}  // namespace coordlqr
