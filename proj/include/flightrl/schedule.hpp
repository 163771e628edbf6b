// LQR gain-scheduling baseline for the three-loop autopilot.
//
// At each (alpha, Mach, height) node the short-period model is augmented with the
// integral of lateral acceleration, x = (int a_z, alpha, q), and an LQR state feedback
// delta = -(k_z x_1 + k_alpha x_2 + k_q x_3) is computed. Because a_z = V (q - alpha_dot),
// the integral of q equals alpha + (1/V) int a_z, so the feedback is realised exactly by
// the three-loop topology with
//   K_g = k_q,  K_I = k_alpha / k_q,  K_A = k_z / k_alpha - 1/V,  K_DC = 1 + 1/(V K_A).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "flightrl/autopilot.hpp"
#include "flightrl/envelope.hpp"
#include "flightrl/lqr.hpp"
#include "flightrl/textio.hpp"

namespace flightrl {

struct GridAxes {
    std::vector<double> alpha;   // rad
    std::vector<double> mach;
    std::vector<double> height;  // m

    std::size_t size() const { return alpha.size() * mach.size() * height.size(); }
};

struct GainSchedule {
    GridAxes axes;
    std::vector<GainSet> nodes;  // row-major: alpha outermost, height innermost

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * axes.mach.size() + j) * axes.height.size() + k;
    }
    const GainSet &at(std::size_t i, std::size_t j, std::size_t k) const {
        return nodes[index(i, j, k)];
    }
};

struct GridSpec {
    int n_alpha = 5;
    int n_mach = 5;
    int n_height = 5;
};

/// Weights on (int a_z, alpha, q) and on the fin. With authority_scaling the fin weight
/// at a node is r * (b / b_ref)^2, b = dq_dot/ddelta at the node and b_ref at the
/// envelope centre, which keeps the loop bandwidth roughly uniform as dynamic pressure
/// varies over the envelope.
struct LqrWeights {
    double q_integral = 1.0;
    double q_alpha = 0.0;
    double q_rate = 0.0;
    double r = 30.0;
    bool authority_scaling = true;
};

/// Fin pitch authority dq_dot/ddelta at zero alpha and fin, mid-envelope Mach and height.
inline double centre_authority(const Envelope &env, const AirframeModel &model) {
    SystemState s;
    s.mach = env.mach.mid();
    s.height = env.height.mid();
    return linearize(s, 0.0, model.physical, model.aero).B(1);
}

inline std::vector<double> linspace(const Range &r, int n) {
    if (n < 1) throw ConfigError("grid", "axis needs at least one node");
    if (n == 1) return {r.mid()};
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = r.min + r.span() * i / (n - 1);
    return v;
}

inline GridAxes make_axes(const GridSpec &spec, const Envelope &env) {
    return {linspace(env.alpha, spec.n_alpha), linspace(env.mach, spec.n_mach),
            linspace(env.height, spec.n_height)};
}

/// Maps a stabilising LQR feedback on (int a_z, alpha, q) onto the three-loop gains.
inline GainSet gains_from_lqr(const Eigen::RowVector3d &k, double velocity) {
    GainSet g;
    g.k_g = k(2);
    g.k_i = k(1) / k(2);
    g.k_a = k(0) / k(1) - 1.0 / velocity;
    g.k_dc = 1.0 + 1.0 / (velocity * g.k_a);
    return g;
}

/// Linear closed loop of airframe short period, second-order actuator and three-loop
/// law. States (alpha, q, delta, delta_dot, integrator), input a_zc, output a_z.
struct ClosedLoop {
    Eigen::Matrix<double, 5, 5> A;
    Eigen::Matrix<double, 5, 1> B;
    Eigen::Matrix<double, 1, 5> C;
};

inline ClosedLoop three_loop_closed_loop(const LinearModel &lin, const GainSet &g,
                                         const ActuatorParams &act) {
    const double w2 = act.natural_frequency * act.natural_frequency;
    ClosedLoop cl;
    cl.A.setZero();
    cl.B.setZero();
    cl.C << lin.C(0), lin.C(1), lin.D, 0.0, 0.0;

    cl.A.block<2, 2>(0, 0) = lin.A;
    cl.A.block<2, 1>(0, 2) = lin.B;
    cl.A(2, 3) = 1.0;
    // delta_ddot = -w^2 delta - 2 zeta w delta_dot + w^2 K_g (I - q)
    cl.A(3, 1) = -w2 * g.k_g;
    cl.A(3, 2) = -w2;
    cl.A(3, 3) = -2.0 * act.damping_ratio * act.natural_frequency;
    cl.A(3, 4) = w2 * g.k_g;
    // I_dot = K_I (K_A (K_DC r - a_z) - q)
    cl.A.row(4) = -g.k_i * g.k_a * cl.C;
    cl.A(4, 1) -= g.k_i;
    cl.B(4) = g.k_i * g.k_a * g.k_dc;
    return cl;
}

inline double dc_gain(const ClosedLoop &cl) {
    return -(cl.C * cl.A.fullPivLu().solve(cl.B))(0);
}

/// Transition matrix of the same loop as the controller actually runs it: plant and
/// actuator discretised with a zero-order hold over dt, integrator advanced by forward
/// Euler. States (alpha, q, delta, delta_dot, integrator).
inline Eigen::Matrix<double, 5, 5> sampled_closed_loop(const LinearModel &lin, const GainSet &g,
                                                        const ActuatorParams &act, double dt) {
    using Mat5 = Eigen::Matrix<double, 5, 5>;
    const double w2 = act.natural_frequency * act.natural_frequency;
    Eigen::Matrix4d Ac = Eigen::Matrix4d::Zero();
    Ac.block<2, 2>(0, 0) = lin.A;
    Ac.block<2, 1>(0, 2) = lin.B;
    Ac(2, 3) = 1.0;
    Ac(3, 2) = -w2;
    Ac(3, 3) = -2.0 * act.damping_ratio * act.natural_frequency;

    // exp([[Ac, Bc], [0, 0]] dt) gives the ZOH pair in one shot
    Mat5 aug = Mat5::Zero();
    aug.block<4, 4>(0, 0) = Ac * dt;
    aug(3, 4) = w2 * dt;
    const Mat5 e = aug.exp();
    const Eigen::Matrix4d Ad = e.block<4, 4>(0, 0);
    const Eigen::Vector4d Bd = e.block<4, 1>(0, 4);

    Eigen::Matrix<double, 1, 4> c;
    c << lin.C(0), lin.C(1), lin.D, 0.0;
    Eigen::Matrix<double, 1, 5> integ = Eigen::Matrix<double, 1, 5>::Zero();
    integ.head<4>() = -dt * g.k_i * g.k_a * c;
    integ(1) -= dt * g.k_i;
    integ(4) = 1.0;
    Eigen::Matrix<double, 1, 5> command = g.k_g * integ;
    command(1) -= g.k_g;

    Mat5 f = Mat5::Zero();
    f.block<4, 4>(0, 0) = Ad;
    f.block<4, 5>(0, 0) += Bd * command;
    f.row(4) = integ;
    return f;
}

struct NodeDesign {
    double alpha = 0.0;
    double mach = 0.0;
    double height = 0.0;
    double delta_trim = 0.0;
    LinearModel model;
    lqr::Solution lqr;
    GainSet gains;
    Eigen::VectorXcd loop_poles;  // with actuator, continuous integrator
    double loop_dc_gain = 0.0;
    double sampled_radius = 0.0;  // spectral radius of the sampled loop

    bool stable() const { return lqr::spectral_abscissa(loop_poles) < 0.0 && sampled_radius < 1.0; }
};

struct BaselineDesign {
    GainSchedule schedule;
    std::vector<NodeDesign> nodes;
};

inline std::string node_name(double alpha, double mach, double height) {
    std::ostringstream ss;
    ss << "(alpha=" << rad2deg(alpha) << " deg, mach=" << mach << ", height=" << height << " m)";
    return ss.str();
}

inline NodeDesign design_node(double alpha, double mach, double height, const LqrWeights &w,
                              double reference_authority, const AirframeModel &model,
                              double sample_time = 0.01) {
    NodeDesign nd;
    nd.alpha = alpha;
    nd.mach = mach;
    nd.height = height;
    try {
        nd.delta_trim = trim_fin(alpha, mach, model.aero);
        SystemState s;
        s.alpha = alpha;
        s.theta = alpha;
        s.mach = mach;
        s.height = height;
        nd.model = linearize(s, nd.delta_trim, model.physical, model.aero);

        Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
        A.block<1, 2>(0, 1) = nd.model.C;
        A.block<2, 2>(1, 1) = nd.model.A;
        Eigen::Vector3d B(nd.model.D, nd.model.B(0), nd.model.B(1));
        const Eigen::Matrix3d Q = Eigen::Vector3d(w.q_integral, w.q_alpha, w.q_rate).asDiagonal();
        const Eigen::MatrixXd R = Eigen::MatrixXd::Constant(1, 1, w.r);

        const double ratio = nd.model.B(1) / reference_authority;
        const double scale = w.authority_scaling ? ratio * ratio : 1.0;

        nd.lqr = lqr::solve_care(A, B, Q, R * scale);
        const Eigen::RowVector3d k = nd.lqr.K;
        nd.gains = gains_from_lqr(k, nd.model.velocity);
        if (!nd.gains.finite()) throw DesignError("non-finite three-loop gains");

        const ClosedLoop cl = three_loop_closed_loop(nd.model, nd.gains, model.actuator);
        nd.loop_poles = cl.A.eigenvalues();
        nd.loop_dc_gain = dc_gain(cl);
        nd.sampled_radius = sampled_closed_loop(nd.model, nd.gains, model.actuator, sample_time)
                                .eigenvalues()
                                .cwiseAbs()
                                .maxCoeff();
    } catch (const Error &e) {
        throw DesignError("baseline design failed at node " + node_name(alpha, mach, height) +
                          ": " + e.what());
    }
    return nd;
}

inline BaselineDesign design_baseline_gains(const GridSpec &spec, const Envelope &env,
                                            const LqrWeights &w, const AirframeModel &model,
                                            double sample_time = 0.01) {
    const double reference = centre_authority(env, model);
    BaselineDesign out;
    out.schedule.axes = make_axes(spec, env);
    const GridAxes &ax = out.schedule.axes;
    out.nodes.reserve(ax.size());
    for (double a : ax.alpha) {
        for (double m : ax.mach) {
            for (double h : ax.height) {
                out.nodes.push_back(design_node(a, m, h, w, reference, model, sample_time));
                out.schedule.nodes.push_back(out.nodes.back().gains);
            }
        }
    }
    return out;
}

namespace detail {

struct AxisWeight {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double t = 0.0;
};

inline AxisWeight locate(const std::vector<double> &axis, double x) {
    if (axis.size() == 1 || x <= axis.front()) return {0, 0, 0.0};
    if (x >= axis.back()) return {axis.size() - 1, axis.size() - 1, 0.0};
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    const std::size_t lo = hi - 1;
    return {lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo])};
}

inline GainSet lerp(const GainSet &a, const GainSet &b, double t) {
    return {a.k_dc + t * (b.k_dc - a.k_dc), a.k_a + t * (b.k_a - a.k_a),
            a.k_i + t * (b.k_i - a.k_i), a.k_g + t * (b.k_g - a.k_g)};
}

} // namespace detail

/// Trilinear interpolation; queries outside the grid are clamped to the boundary.
inline GainSet schedule_gains(const GainSchedule &s, double alpha, double mach, double height) {
    const auto wa = detail::locate(s.axes.alpha, alpha);
    const auto wm = detail::locate(s.axes.mach, mach);
    const auto wh = detail::locate(s.axes.height, height);
    auto along_h = [&](std::size_t i, std::size_t j) {
        return detail::lerp(s.at(i, j, wh.lo), s.at(i, j, wh.hi), wh.t);
    };
    auto along_m = [&](std::size_t i) {
        return detail::lerp(along_h(i, wm.lo), along_h(i, wm.hi), wm.t);
    };
    return detail::lerp(along_m(wa.lo), along_m(wa.hi), wa.t);
}

// ---------------------------------------------------------------------------
// Text format
//
//   schedv1
//   alpha <n> <values...>
//   mach <n> <values...>
//   height <n> <values...>
//   <k_dc> <k_a> <k_i> <k_g>      one line per node, row-major
// ---------------------------------------------------------------------------

inline constexpr const char *kScheduleMagic = "schedv1";

inline void write_schedule(std::ostream &out, const GainSchedule &s) {
    out << kScheduleMagic << '\n';
    auto axis = [&](const char *name, const std::vector<double> &v) {
        out << name << ' ' << v.size();
        for (double x : v) out << ' ' << textio::format_double(x);
        out << '\n';
    };
    axis("alpha", s.axes.alpha);
    axis("mach", s.axes.mach);
    axis("height", s.axes.height);
    for (const GainSet &g : s.nodes) {
        out << textio::format_double(g.k_dc) << ' ' << textio::format_double(g.k_a) << ' '
            << textio::format_double(g.k_i) << ' ' << textio::format_double(g.k_g) << '\n';
    }
}

inline GainSchedule read_schedule(std::istream &in, const std::string &source = "schedule") {
    textio::LineReader r(in, source);
    auto header = r.expect_tokens("header");
    if (header.size() != 1 || header[0] != kScheduleMagic) {
        r.fail("unsupported schedule format '" + (header.empty() ? "" : header[0]) + "'");
    }
    GainSchedule s;
    auto axis = [&](const char *name, std::vector<double> &v) {
        auto t = r.expect_tokens(name);
        if (t[0] != name) r.fail(std::string("expected axis '") + name + "'");
        if (t.size() < 2) r.fail("missing axis length");
        const long long n = r.to_int(t[1]);
        if (n < 1 || static_cast<std::size_t>(n) + 2 != t.size()) r.fail("axis length mismatch");
        for (std::size_t i = 2; i < t.size(); ++i) v.push_back(r.to_double(t[i]));
        if (!std::is_sorted(v.begin(), v.end()) ||
            std::adjacent_find(v.begin(), v.end()) != v.end()) {
            r.fail("axis values must be strictly increasing");
        }
    };
    axis("alpha", s.axes.alpha);
    axis("mach", s.axes.mach);
    axis("height", s.axes.height);
    for (std::size_t n = 0; n < s.axes.size(); ++n) {
        auto t = r.expect_tokens("node gains");
        if (t.size() != 4) r.fail("expected 4 gains per node");
        s.nodes.push_back({r.to_double(t[0]), r.to_double(t[1]), r.to_double(t[2]),
                           r.to_double(t[3])});
    }
    std::vector<std::string> extra;
    if (r.next_tokens(extra)) r.fail("trailing data after last node");
    return s;
}

} // namespace flightrl
