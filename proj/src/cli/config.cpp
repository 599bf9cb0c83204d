#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

#include "coordlqr/coordcli.hpp"

namespace coordlqr::cli {

using namespace numkit;

namespace {

[[noreturn]] void fail(std::string_view msg) {
    throw ConfigError(ErrorCode::InvalidArgument, std::string(msg));
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) {
        fail(std::string(where) + " must be an object");
    }
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const auto key : allowed) {
            known = known || item.key() == key;
        }
        if (!known) {
            fail("unknown key '" + item.key() + "' in " + std::string(where));
        }
    }
}

double to_number(const json& j, const std::string& what) {
    if (!j.is_number()) {
        fail(what + " must be a number");
    }
    return j.get<double>();
}

Mat to_mat(const json& j, const std::string& what) {
    if (!j.is_array()) {
        fail(what + " must be a nested array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) {
        return Mat(0, 0);
    }
    if (!j[0].is_array()) {
        fail(what + " must be a nested array of rows");
    }
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError(ErrorCode::DimensionMismatch, what + " has rows of unequal length");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            M(r, c) = to_number(row[static_cast<std::size_t>(c)], what);
        }
    }
    return M;
}

Vec to_vec(const json& j, const std::string& what) {
    if (!j.is_array()) {
        fail(what + " must be an array");
    }
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = to_number(j[i], what);
    }
    return v;
}

const json& need(const json& obj, const char* key, std::string_view where) {
    if (!obj.contains(key)) {
        fail(std::string(where) + "." + key + " is required");
    }
    return obj.at(key);
}

void expect_shape(const Mat& M, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (M.rows() != rows || M.cols() != cols) {
        std::ostringstream os;
        os << what << " is " << M.rows() << "x" << M.cols() << ", expected " << rows << "x" << cols;
        throw ConfigError(ErrorCode::DimensionMismatch, os.str());
    }
}

json mat_json(const Mat& M) {
    json out = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

WeightFilter parse_weight(const json& j, Eigen::Index m) {
    check_keys(j, {"Aphi", "Bphi", "Cphi", "Dphi"}, "coordination.weight");
    WeightFilter w;
    w.Aphi = to_mat(need(j, "Aphi", "coordination.weight"), "Aphi");
    w.Bphi = to_mat(need(j, "Bphi", "coordination.weight"), "Bphi");
    w.Cphi = to_mat(need(j, "Cphi", "coordination.weight"), "Cphi");
    w.Dphi = to_mat(need(j, "Dphi", "coordination.weight"), "Dphi");
    const Eigen::Index p = w.Aphi.rows();
    if (p == 0) {
        // Empty arrays carry no column count.
        w.Aphi.resize(0, 0);
        w.Bphi.resize(0, m);
        w.Cphi.resize(w.Dphi.rows(), 0);
    }
    if (w.Dphi.rows() == 0) {
        w.Dphi.resize(w.Cphi.rows(), m);
    }
    try {
        w.validate(m);
    } catch (const Error& e) {
        throw ConfigError(e.code(), e.what());
    }
    return w;
}

}  // namespace

Vec ReferenceSpec::x_ref(double t) const {
    if (kind == ReferenceKind::Constant) {
        return value;
    }
    Vec x(2);
    x << value(0) * std::sin(4.0 * std::numbers::pi * t), value(1) * std::sin(8.0 * std::numbers::pi * t);
    return x;
}

Weights Scenario::weights() const {
    try {
        return mu ? Weights(*mu) : Weights::uniform(nu);
    } catch (const Error& e) {
        throw ConfigError(e.code(), e.what());
    }
}

Mat Scenario::effective_Fbar(const Tolerances& tol) const {
    if (mode == Mode::Partial) {
        return partial_constraint(plant, cost, E, Fbar1, tol).Fbar;
    }
    return Fbar;
}

Mat wind_farm_data(const std::string& variant) {
    Mat M(5, 7);
    M << 0, 120, -0.92, 0, 0, 0, 0,
         0.0084, -0.032, 0, 0, 0, 0.12, -0.021,
         0, 150, -1.6, 0, 0, 0, 0,
         0, 0, 0, 0, 1, 0, 0,
         0.021, 0.054, 0, -4, -0.32, 0.2, 0;
    if (variant == "printed") {
        return M;
    }
    if (variant == "pitch-sign-corrected") {
        M(1, 0) = -0.0084;
        return M;
    }
    fail("unknown wind-farm variant '" + variant + "' (printed, pitch-sign-corrected)");
}

Mat wind_farm_Q() {
    // C_z'C_z with C_z = [diag(sqrt(0.1), 100, 0, 100, 0); 0]
    Vec d(5);
    d << 0.1, 1e4, 0.0, 1e4, 0.0;
    return d.asDiagonal();
}

json builtin_scenario(const std::string& name, const std::string& variant) {
    if (name == "tadpole") {
        if (!variant.empty()) {
            fail("the tadpole scenario has no variants");
        }
        const Mat I = Mat::Identity(2, 2);
        return {
            {"plant", {{"A", mat_json(Mat::Zero(2, 2))}, {"B", mat_json(I)}}},
            {"cost", {{"Q", mat_json(I)}}},
            {"ensemble", {{"nu", 50}, {"mu", "uniform"}}},
            {"coordination", {{"mode", "hard"}, {"Fbar", mat_json(-25.0 * I)}}},
            {"initial", {{"x0", "random"}, {"scale", 1.0}}},
            {"sim", {{"T", 1.0}, {"dt", 1e-3}, {"seed", 1}, {"noise_intensity", 0.0}}},
            {"reference", {{"type", "figure-eight"}, {"value", {1.0, 0.25}}}},
        };
    }
    if (name == "wind-farm") {
        const Mat M = wind_farm_data(variant.empty() ? "printed" : variant);
        return {
            {"plant", {{"A", mat_json(M.leftCols(5))}, {"B", mat_json(M.col(6))}}},
            {"cost", {{"Q", mat_json(wind_farm_Q())}}},
            {"ensemble", {{"nu", 10}, {"mu", "uniform"}}},
            {"coordination", {{"mode", "hard"}, {"Fbar", mat_json(Mat::Zero(1, 5))}}},
            {"initial", {{"x0", "bw-impulse"}, {"Bw", mat_json(M.col(5))}}},
            {"sim", {{"T", 100.0}, {"dt", 0.05}, {"seed", 0}, {"noise_intensity", 0.0}}},
        };
    }
    fail("unknown scenario '" + name + "' (tadpole, wind-farm)");
}

namespace {

void validate_wind(Scenario& sc, const std::string& variant) {
    WindValidation v;
    v.variant = variant;
    const Mat Acl = sc.plant.A + sc.plant.B * sc.effective_Fbar();
    v.spectral_abscissa = spectral_abscissa(sc.plant.A);
    v.hurwitz = is_hurwitz(sc.plant.A);
    for (const auto& ev : eigenvalues(sc.plant.A)) {
        if (ev.real() >= 0.0) {
            v.unstable_eigenvalues.push_back(ev);
        }
    }
    v.pbh_q_ok = pbh_no_imaginary_unobservable(sc.cost.Q, sc.plant.A);
    sc.wind = v;
    if (!is_hurwitz(Acl)) {
        std::ostringstream os;
        os.precision(17);
        os << "wind-farm (" << variant << "): A + B*Fbar is not Hurwitz";
        for (const auto& ev : eigenvalues(Acl)) {
            if (ev.real() >= 0.0) {
                os << "; offending eigenvalue " << ev.real() << (ev.imag() < 0 ? "-" : "+")
                   << std::abs(ev.imag()) << "i";
            }
        }
        os << "; supply plant.A or use variant pitch-sign-corrected";
        throw ConfigError(ErrorCode::NotHurwitz, os.str());
    }
}

}  // namespace

Scenario parse_scenario(const json& config, std::optional<std::uint64_t> seed_override) {
    check_keys(config,
               {"scenario", "variant", "plant", "cost", "ensemble", "coordination", "controller", "initial",
                "sim", "reference"},
               "config");
    Scenario sc;
    sc.name = "custom";
    json doc = config;
    std::string variant;
    if (config.contains("scenario")) {
        if (!config["scenario"].is_string()) {
            fail("scenario must be a string");
        }
        sc.name = config["scenario"].get<std::string>();
        if (config.contains("variant")) {
            if (!config["variant"].is_string()) {
                fail("variant must be a string");
            }
            variant = config["variant"].get<std::string>();
        }
        doc = builtin_scenario(sc.name, variant);
        json patch = config;
        patch.erase("scenario");
        patch.erase("variant");
        doc.merge_patch(patch);
        if (sc.name == "wind-farm") {
            if (variant.empty()) {
                variant = "printed";
            }
            if (config.contains("plant") && config["plant"].contains("A")) {
                variant = "user-supplied A";
            }
        }
    } else if (config.contains("variant")) {
        fail("variant requires a scenario");
    }

    const json& plant = need(doc, "plant", "config");
    check_keys(plant, {"A", "B"}, "plant");
    sc.plant.A = to_mat(need(plant, "A", "plant"), "plant.A");
    sc.plant.B = to_mat(need(plant, "B", "plant"), "plant.B");
    const Eigen::Index n = sc.plant.A.rows();
    if (n == 0) {
        fail("plant.A must not be empty");
    }
    expect_shape(sc.plant.A, n, n, "plant.A");
    if (sc.plant.B.rows() != n || sc.plant.B.cols() == 0) {
        throw ConfigError(ErrorCode::DimensionMismatch, "plant.B must have n rows and at least one column");
    }
    const Eigen::Index m = sc.plant.B.cols();

    const json& cost = need(doc, "cost", "config");
    check_keys(cost, {"Q"}, "cost");
    sc.cost.Q = to_mat(need(cost, "Q", "cost"), "cost.Q");
    expect_shape(sc.cost.Q, n, n, "cost.Q");

    const json& ens = need(doc, "ensemble", "config");
    check_keys(ens, {"nu", "mu"}, "ensemble");
    if (ens.contains("mu") && ens["mu"].is_array()) {
        sc.mu = to_vec(ens["mu"], "ensemble.mu");
        sc.nu = static_cast<std::size_t>(sc.mu->size());
        if (ens.contains("nu") && (!ens["nu"].is_number_integer() || ens["nu"].get<long long>() != static_cast<long long>(sc.nu))) {
            throw ConfigError(ErrorCode::DimensionMismatch, "ensemble.nu differs from the length of ensemble.mu");
        }
    } else {
        if (ens.contains("mu") && ens["mu"] != "uniform") {
            fail("ensemble.mu must be an array or \"uniform\"");
        }
        const json& nu = need(ens, "nu", "ensemble");
        if (!nu.is_number_integer() || nu.get<long long>() <= 0) {
            fail("ensemble.nu must be a positive integer");
        }
        sc.nu = nu.get<std::size_t>();
    }
    const Weights weights = sc.weights();

    const json& coord = need(doc, "coordination", "config");
    check_keys(coord, {"mode", "Fbar", "lambda", "weight", "E", "Fbar1"}, "coordination");
    const std::string mode = need(coord, "mode", "coordination").get<std::string>();
    auto read_fbar = [&] {
        sc.Fbar = to_mat(need(coord, "Fbar", "coordination"), "coordination.Fbar");
        expect_shape(sc.Fbar, m, n, "coordination.Fbar");
    };
    if (mode == "hard") {
        sc.mode = Mode::Hard;
        read_fbar();
    } else if (mode == "soft") {
        sc.mode = Mode::Soft;
        read_fbar();
        sc.lambda = to_number(need(coord, "lambda", "coordination"), "coordination.lambda");
        if (!(sc.lambda >= 0.0 && sc.lambda <= 1.0)) {
            fail("coordination.lambda must lie in [0, 1]");
        }
    } else if (mode == "weighted") {
        sc.mode = Mode::Weighted;
        read_fbar();
        sc.weight = parse_weight(need(coord, "weight", "coordination"), m);
    } else if (mode == "partial") {
        sc.mode = Mode::Partial;
        sc.E = to_mat(need(coord, "E", "coordination"), "coordination.E");
        sc.Fbar1 = to_mat(need(coord, "Fbar1", "coordination"), "coordination.Fbar1");
        if (sc.E.rows() != m || sc.E.cols() == 0 || sc.E.cols() > m) {
            throw ConfigError(ErrorCode::DimensionMismatch, "coordination.E must be m x k with 1 <= k <= m");
        }
        expect_shape(sc.Fbar1, sc.E.cols(), n, "coordination.Fbar1");
    } else {
        fail("coordination.mode must be hard, soft, weighted or partial");
    }

    if (doc.contains("controller")) {
        const json& c = doc["controller"];
        check_keys(c, {"F_alpha", "F_center", "filter"}, "controller");
        ExplicitGains g;
        g.F_alpha = to_mat(need(c, "F_alpha", "controller"), "controller.F_alpha");
        g.F_center = to_mat(need(c, "F_center", "controller"), "controller.F_center");
        expect_shape(g.F_alpha, m, n, "controller.F_alpha");
        expect_shape(g.F_center, m, n, "controller.F_center");
        if (c.contains("filter")) {
            const json& f = c["filter"];
            check_keys(f, {"A", "B", "C", "D"}, "controller.filter");
            StateSpace ss;
            ss.A = to_mat(need(f, "A", "controller.filter"), "controller.filter.A");
            ss.B = to_mat(need(f, "B", "controller.filter"), "controller.filter.B");
            ss.C = to_mat(need(f, "C", "controller.filter"), "controller.filter.C");
            ss.D = to_mat(need(f, "D", "controller.filter"), "controller.filter.D");
            const Eigen::Index p = ss.A.rows();
            if (p == 0) {
                ss.A.resize(0, 0);
                ss.B.resize(0, n);
                ss.C.resize(m, 0);
            }
            expect_shape(ss.A, p, p, "controller.filter.A");
            expect_shape(ss.B, p, n, "controller.filter.B");
            expect_shape(ss.C, m, p, "controller.filter.C");
            expect_shape(ss.D, m, n, "controller.filter.D");
            g.filter = std::move(ss);
        }
        sc.controller = std::move(g);
    }

    if (doc.contains("sim")) {
        const json& s = doc["sim"];
        check_keys(s, {"T", "dt", "seed", "noise_intensity"}, "sim");
        if (s.contains("T")) sc.sim.T = to_number(s["T"], "sim.T");
        if (s.contains("dt")) sc.sim.dt = to_number(s["dt"], "sim.dt");
        if (s.contains("seed")) {
            if (!s["seed"].is_number_integer() || s["seed"].get<long long>() < 0) {
                fail("sim.seed must be a non-negative integer");
            }
            sc.sim.seed = s["seed"].get<std::uint64_t>();
        }
        if (s.contains("noise_intensity")) {
            sc.sim.noise_intensity = to_number(s["noise_intensity"], "sim.noise_intensity");
        }
        if (!(sc.sim.dt > 0.0) || !(sc.sim.T >= sc.sim.dt)) {
            fail("sim requires dt > 0 and T >= dt");
        }
        if (!(sc.sim.noise_intensity >= 0.0)) {
            fail("sim.noise_intensity must be non-negative");
        }
    }
    if (seed_override) {
        sc.sim.seed = *seed_override;
    }

    const json& init = need(doc, "initial", "config");
    check_keys(init, {"x0", "Bw", "scale"}, "initial");
    const json& x0 = need(init, "x0", "initial");
    if (x0 == "bw-impulse") {
        sc.initial.kind = InitialKind::BwImpulse;
        sc.initial.Bw = to_mat(need(init, "Bw", "initial"), "initial.Bw");
        if (sc.initial.Bw.rows() != n || sc.initial.Bw.cols() == 0) {
            throw ConfigError(ErrorCode::DimensionMismatch, "initial.Bw must have n rows");
        }
    } else if (x0 == "random") {
        sc.initial.kind = InitialKind::Random;
        if (init.contains("scale")) {
            sc.initial.scale = to_number(init["scale"], "initial.scale");
        }
        NormalStream stream(sc.sim.seed);
        for (std::size_t i = 0; i < sc.nu; ++i) {
            Vec x(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                x(j) = sc.initial.scale * stream.next();
            }
            sc.initial.x0.push_back(std::move(x));
        }
    } else if (x0.is_array()) {
        sc.initial.kind = InitialKind::Explicit;
        if (x0.size() != sc.nu) {
            throw ConfigError(ErrorCode::DimensionMismatch, "initial.x0 needs one state per agent");
        }
        for (const auto& row : x0) {
            Vec x = to_vec(row, "initial.x0");
            if (x.size() != n) {
                throw ConfigError(ErrorCode::DimensionMismatch, "initial.x0 entries must have n components");
            }
            sc.initial.x0.push_back(std::move(x));
        }
    } else {
        fail("initial.x0 must be an array of states, \"bw-impulse\" or \"random\"");
    }
    if (sc.initial.kind != InitialKind::BwImpulse && init.contains("Bw")) {
        fail("initial.Bw is only used with x0 = \"bw-impulse\"");
    }

    if (doc.contains("reference") && !doc["reference"].is_null()) {
        const json& r = doc["reference"];
        check_keys(r, {"type", "value"}, "reference");
        ReferenceSpec ref;
        const json& type = need(r, "type", "reference");
        if (type == "constant") {
            ref.kind = ReferenceKind::Constant;
            ref.value = to_vec(need(r, "value", "reference"), "reference.value");
            if (ref.value.size() != n) {
                throw ConfigError(ErrorCode::DimensionMismatch, "reference.value must have n components");
            }
        } else if (type == "figure-eight") {
            ref.kind = ReferenceKind::FigureEight;
            if (n != 2) {
                throw ConfigError(ErrorCode::DimensionMismatch, "figure-eight reference needs n = 2");
            }
            ref.value = r.contains("value") ? to_vec(r["value"], "reference.value") : Vec(Vec::Zero(0));
            if (ref.value.size() == 0) {
                ref.value = (Vec(2) << 1.0, 0.25).finished();
            }
            if (ref.value.size() != 2) {
                throw ConfigError(ErrorCode::DimensionMismatch, "figure-eight amplitudes need two entries");
            }
        } else {
            fail("reference.type must be constant or figure-eight");
        }
        if (!weights.is_uniform(1e-9)) {
            fail("a reference requires uniform masses");
        }
        sc.reference = std::move(ref);
    }

    if (sc.name == "wind-farm") {
        validate_wind(sc, variant);
    }
    return sc;
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("cannot read config file '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return parse_scenario(doc, seed_override);
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        fail(std::string("config has the wrong type: ") + e.what());
    }
}

std::pair<std::size_t, std::size_t> parse_nu_range(const std::string& text) {
    const auto colon = text.find(':');
    std::size_t lo = 0;
    std::size_t hi = 0;
    try {
        if (colon == std::string::npos) {
            throw std::invalid_argument("missing ':'");
        }
        std::size_t used = 0;
        lo = std::stoul(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("trailing characters");
        const std::string rest = text.substr(colon + 1);
        hi = std::stoul(rest, &used);
        if (used != rest.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        fail("--nu-range must look like a:b with positive integers");
    }
    if (lo == 0 || hi < lo) {
        fail("--nu-range needs 1 <= a <= b");
    }
    return {lo, hi};
}

std::vector<double> parse_lambda_grid(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        parts.push_back(item);
    }
    if (parts.size() != 3) {
        fail("--lambda-grid must look like a:b:count");
    }
    double a = 0.0;
    double b = 0.0;
    long count = 0;
    auto parse = [&](const std::string& part, auto& value) {
        const char* last = part.data() + part.size();
        const auto [ptr, ec] = std::from_chars(part.data(), last, value);
        if (part.empty() || ec != std::errc() || ptr != last) {
            fail("--lambda-grid must look like a:b:count");
        }
    };
    parse(parts[0], a);
    parse(parts[1], b);
    parse(parts[2], count);
    if (count < 1 || (count == 1 && a != b) || b < a) {
        fail("--lambda-grid needs a <= b and count >= 1 (count = 1 only when a = b)");
    }
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        grid[static_cast<std::size_t>(k)] =
            count == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    grid.back() = b;
    return grid;
}

}  // namespace coordlqr::cli
