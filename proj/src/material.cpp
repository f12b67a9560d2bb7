#include "glc/material.hpp"

#include <Eigen/LU>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glc {

double tensor4_component(const Mat4& c, int i, int j, int k, int l)
{
    auto index = [](int a, int b, double& factor) {
        if (a == b) {
            factor = 1.0;
            return a;
        }
        if ((a == 0 && b == 1) || (a == 1 && b == 0)) {
            factor = 1.0 / kSqrt2;
            return 3;
        }
        factor = 0.0;
        return -1;
    };
    double fa = 0.0;
    double fb = 0.0;
    const int m = index(i, j, fa);
    const int n = index(k, l, fb);
    if (m < 0 || n < 0) {
        return 0.0;
    }
    return c(m, n) * fa * fb;
}

void MaterialParams::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(fmt::format("invalid material parameter: {}", what));
        }
    };
    require(E > 0.0, "E > 0");
    require(nu > -1.0 && nu < 0.5, "-1 < nu < 0.5");
    require(C >= 0.0, "C >= 0");
    require(D >= 0.0, "D >= 0");
    require(R >= 0.0, "R >= 0");
    require(n_f >= 1.0, "n_f >= 1");
    require(n_s >= 1.0, "n_s >= 1");
    require(K_f > 0.0, "K_f > 0");
    require(K_s > 0.0, "K_s > 0");
}

MaterialParams MaterialParams::from_key_values(const std::map<std::string, double>& kv)
{
    MaterialParams p;
    for (const auto& [key, value] : kv) {
        if (key == "E") p.E = value;
        else if (key == "nu") p.nu = value;
        else if (key == "C") p.C = value;
        else if (key == "D") p.D = value;
        else if (key == "R") p.R = value;
        else if (key == "n_f") p.n_f = value;
        else if (key == "K_f") p.K_f = value;
        else if (key == "n_s") p.n_s = value;
        else if (key == "K_s") p.K_s = value;
        else throw std::invalid_argument(fmt::format("unknown material key '{}'", key));
    }
    p.validate();
    return p;
}

std::map<std::string, double> MaterialParams::to_key_values() const
{
    return {{"E", E}, {"nu", nu}, {"C", C}, {"D", D}, {"R", R},
            {"n_f", n_f}, {"K_f", K_f}, {"n_s", n_s}, {"K_s", K_s}};
}

double yield_function(const StressPoint& sigma, const Vec4& X_f, const MaterialParams& params)
{
    return von_mises(sigma.sigma_D - X_f) - params.R;
}

FlowRates flow_rates(const StressPoint& sigma, const Vec4& X_f, const MaterialParams& params,
                     double base_cap)
{
    const double base_f = std::max(0.0, yield_function(sigma, X_f, params) / params.K_f);
    const double base_s = von_mises(sigma.sigma_D) / params.K_s;
    if (base_f > base_cap || base_s > base_cap) {
        throw OverflowGuard(fmt::format("Norton base above cap {} (fast {:.6g}, slow {:.6g})",
                                        base_cap, base_f, base_s));
    }
    FlowRates r;
    r.p_f_rate = base_f > 0.0 ? std::pow(base_f, params.n_f) : 0.0;
    r.p_s_rate = base_s > 0.0 ? std::pow(base_s, params.n_s) : 0.0;
    return r;
}

Mat4 elastic_tangent(const MaterialParams& params)
{
    const double mu = params.shear_modulus();
    const double lambda = params.E * params.nu / ((1.0 + params.nu) * (1.0 - 2.0 * params.nu));
    Mat4 c = 2.0 * mu * Mat4::Identity();
    c.topLeftCorner<3, 3>().array() += lambda;
    return c;
}

namespace {

// Normal N = 3/2 dev(a)/J2(a) and its derivative dN/da = (3/2 P - N N^T)/J2.
struct Normal {
    double j2 = 0.0;
    Vec4 n = Vec4::Zero();
    Mat4 dn = Mat4::Zero();
};

Normal normal_of(const Vec4& a)
{
    Normal out;
    const Vec4 d = deviator(a);
    out.j2 = std::sqrt(1.5 * d.dot(d));
    if (out.j2 <= 0.0) {
        return out;
    }
    out.n = 1.5 * d / out.j2;
    out.dn = (1.5 * deviatoric_projector() - out.n * out.n.transpose()) / out.j2;
    return out;
}

using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;

// Unknowns: elastic strain (0-3), backstress (4-7) and the two Norton bases
// y_f, y_s, so that dp_i = dt * y_i^n_i. Residuals are scaled to
// dimensionless overstress units.
struct Residual {
    Vec10 r;
    Mat10 j;
    Normal fast;
    Normal slow;
    double dp_f = 0.0;
    double dp_s = 0.0;
};

Residual evaluate(const Vec10& z, const Vec4& eps_e_trial, const Vec4& X_old, double dt,
                  const MaterialParams& p, const Mat4& cel)
{
    Residual out;
    const Vec4 eps_e = z.segment<4>(0);
    const Vec4 X = z.segment<4>(4);
    const double yf = z[8];
    const double ys = z[9];

    const Vec4 sigma = cel * eps_e;
    out.fast = normal_of(sigma - X);
    out.slow = normal_of(sigma);

    const double dp_f = yf > 0.0 ? dt * std::pow(yf, p.n_f) : 0.0;
    const double dp_s = ys > 0.0 ? dt * std::pow(ys, p.n_s) : 0.0;
    const double ddp_f = yf > 0.0 ? dt * p.n_f * std::pow(yf, p.n_f - 1.0) : 0.0;
    const double ddp_s = ys > 0.0 ? dt * p.n_s * std::pow(ys, p.n_s - 1.0) : 0.0;
    out.dp_f = dp_f;
    out.dp_s = dp_s;

    const double se = p.E / p.K_f;
    const double sx = 1.0 / p.K_f;
    const double overstress = (out.fast.j2 - p.R) / p.K_f;
    const bool active = overstress > 0.0;

    const Vec4& nf = out.fast.n;
    const Vec4& ns = out.slow.n;
    const Mat4& mf = out.fast.dn;
    const Mat4& ms = out.slow.dn;
    const Mat4 id = Mat4::Identity();

    out.r.segment<4>(0) = se * (eps_e - eps_e_trial + dp_f * nf + dp_s * ns);
    out.r.segment<4>(4) = sx * (X * (1.0 + p.D * dp_f) - X_old - (2.0 / 3.0) * p.C * dp_f * nf);
    out.r[8] = yf - (active ? overstress : 0.0);
    out.r[9] = ys - out.slow.j2 / p.K_s;

    out.j.setZero();
    out.j.block<4, 4>(0, 0) = se * (id + (dp_f * mf + dp_s * ms) * cel);
    out.j.block<4, 4>(0, 4) = se * (-dp_f * mf);
    out.j.block<4, 1>(0, 8) = se * ddp_f * nf;
    out.j.block<4, 1>(0, 9) = se * ddp_s * ns;

    out.j.block<4, 4>(4, 0) = sx * (-(2.0 / 3.0) * p.C * dp_f * mf * cel);
    out.j.block<4, 4>(4, 4) = sx * ((1.0 + p.D * dp_f) * id + (2.0 / 3.0) * p.C * dp_f * mf);
    out.j.block<4, 1>(4, 8) = sx * ddp_f * (p.D * X - (2.0 / 3.0) * p.C * nf);

    out.j(8, 8) = 1.0;
    if (active) {
        out.j.block<1, 4>(8, 0) = -(nf.transpose() * cel) / p.K_f;
        out.j.block<1, 4>(8, 4) = nf.transpose() / p.K_f;
    }
    out.j(9, 9) = 1.0;
    out.j.block<1, 4>(9, 0) = -(ns.transpose() * cel) / p.K_s;
    return out;
}

// Upper bound of the Norton base for a single radial potential relaxing an
// overstress x against stiffness 3*mu: the root of K y + 3 mu dt y^n = x.
double base_upper_bound(double x, double K, double n, double mu, double dt)
{
    if (x <= 0.0) {
        return 0.0;
    }
    const double elastic_bound = x / K;
    if (dt <= 0.0) {
        return elastic_bound;
    }
    return std::min(elastic_bound, std::pow(x / (3.0 * mu * dt), 1.0 / n));
}

}  // namespace

PointUpdate integrate_point(const MaterialState& state, const Vec4& strain_old, const Vec4& strain_new,
                            double dt, const MaterialParams& params, const IntegrationOptions& options)
{
    (void)strain_old;
    if (dt < 0.0) {
        throw std::invalid_argument("integrate_point: negative time increment");
    }
    const Mat4 cel = elastic_tangent(params);
    const double mu = params.shear_modulus();
    const Vec4 eps_e_trial = strain_new - state.plastic_strain();
    const Vec4 sigma_trial = cel * eps_e_trial;

    Vec10 z;
    z.segment<4>(0) = eps_e_trial;
    z.segment<4>(4) = state.X_f;
    z[8] = base_upper_bound(von_mises(sigma_trial - state.X_f) - params.R, params.K_f, params.n_f, mu, dt);
    z[9] = base_upper_bound(von_mises(sigma_trial), params.K_s, params.n_s, mu, dt);

    const double cap = 2.0 * options.base_cap;
    Residual res = evaluate(z, eps_e_trial, state.X_f, dt, params, cel);
    double norm = res.r.lpNorm<Eigen::Infinity>();
    int iter = 0;
    bool polished = false;
    while (true) {
        if (!std::isfinite(norm)) {
            throw NoConvergence("integrate_point: non-finite residual");
        }
        if (norm <= options.tolerance) {
            if (polished) {
                break;
            }
            polished = true;
        }
        if (iter >= options.max_iterations) {
            throw NoConvergence(fmt::format("integrate_point: {} iterations, residual {:.3e}", iter, norm));
        }
        ++iter;
        const Vec10 step = res.j.partialPivLu().solve(-res.r);
        double alpha = 1.0;
        Vec10 z_new;
        Residual trial;
        for (int ls = 0; ls < 12; ++ls) {
            z_new = z + alpha * step;
            z_new[8] = std::clamp(z_new[8], 0.0, cap);
            z_new[9] = std::clamp(z_new[9], 0.0, cap);
            trial = evaluate(z_new, eps_e_trial, state.X_f, dt, params, cel);
            const double trial_norm = trial.r.lpNorm<Eigen::Infinity>();
            if (polished || trial_norm < norm || !std::isfinite(norm) || norm <= options.tolerance) {
                break;
            }
            alpha *= 0.5;
        }
        z = z_new;
        res = std::move(trial);
        norm = res.r.lpNorm<Eigen::Infinity>();
        if (polished) {
            break;
        }
    }

    if (z[8] > options.base_cap || z[9] > options.base_cap) {
        throw OverflowGuard(fmt::format("integrate_point: Norton base above cap (fast {:.4g}, slow {:.4g})",
                                        z[8], z[9]));
    }

    PointUpdate out;
    out.iterations = iter;
    out.dp_f = res.dp_f;
    out.state.eps_p_f = state.eps_p_f + res.dp_f * res.fast.n;
    out.state.eps_p_s = state.eps_p_s + res.dp_s * res.slow.n;
    out.state.X_f = deviator(z.segment<4>(4));
    out.state.p_f = state.p_f + res.dp_f;
    out.state.p_s = state.p_s + res.dp_s;
    out.stress = StressPoint::from_sigma(cel * (strain_new - out.state.plastic_strain()));

    // dZ/deps = J^-1 dR/deps with dR/deps = [-se I; 0]; only the elastic-strain
    // rows are needed.
    Eigen::Matrix<double, 10, 4> rhs = Eigen::Matrix<double, 10, 4>::Zero();
    rhs.topRows<4>() = (params.E / params.K_f) * Mat4::Identity();
    const Eigen::Matrix<double, 10, 4> dz = res.j.partialPivLu().solve(rhs);
    out.tangent = cel * dz.topRows<4>();
    return out;
}

}  // namespace glc
