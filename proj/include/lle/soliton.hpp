#ifndef LLE_SOLITON_HPP
#define LLE_SOLITON_HPP

//
// Closed-form NLS soliton, bifurcation angles, the forced background state and
// the leading-order ansatz for the damped-driven problem
//
//     -u'' + zeta u - |u|^2 u + i eps (f - u) = 0 .
//

#include <cmath>
#include <numbers>
#include <sstream>

#include "errors.hpp"
#include "grid.hpp"

namespace lle {

struct Params {
    double zeta = 1.0;
    double f = 2.0;
    double epsilon = 0.0;
    static constexpr double dispersion = 1.0;

    /// pi^2 f^2 > 8 zeta: a simple bifurcation angle exists.
    bool existence_condition() const noexcept
    {
        return std::numbers::pi * std::numbers::pi * f * f > 8.0 * zeta;
    }

    void validate() const
    {
        if (!(zeta > 0.0)) throw std::invalid_argument("params: zeta must be positive");
        if (!(f > 0.0)) throw std::invalid_argument("params: f must be positive");
        if (!std::isfinite(epsilon)) throw std::invalid_argument("params: epsilon must be finite");
    }

    Params with_epsilon(double eps) const
    {
        Params p = *this;
        p.epsilon = eps;
        return p;
    }
};

struct BifurcationAngles {
    double theta_stable = 0.0;   ///< in (0, pi)
    double theta_unstable = 0.0; ///< 2 pi - theta_stable, in (pi, 2 pi)
    double sin_theta = 0.0;      ///< sin(theta_stable) > 0
    double cos_theta = 0.0;
};

inline double sech(double x) { return 1.0 / std::cosh(x); }

/// sqrt(2 zeta) sech(sqrt(zeta) x) e^{i theta}
inline ComplexField nls_soliton(const Params& p, const Grid& g, double theta)
{
    const double amp = std::sqrt(2.0 * p.zeta), rate = std::sqrt(p.zeta);
    const cplx phase = std::polar(1.0, theta);
    return ComplexField::sample(g, [&](double x) { return amp * sech(rate * x) * phase; });
}

/// Derivative of the rotated soliton with respect to zeta at fixed angle.
inline ComplexField soliton_zeta_derivative(const Params& p, const Grid& g, double theta)
{
    const double rate = std::sqrt(p.zeta);
    const cplx phase = std::polar(1.0, theta);
    return ComplexField::sample(g, [&](double x) {
        const double s = rate * x;
        return (sech(s) / std::sqrt(2.0 * p.zeta) - x / std::numbers::sqrt2 * sech(s) * std::tanh(s)) * phase;
    });
}

/// Both simple zeros of  theta -> pi f cos(theta) - 2 sqrt(2 zeta)  in [0, 2 pi).
inline BifurcationAngles solve_theta0(const Params& p)
{
    p.validate();
    const double c = 2.0 * std::sqrt(2.0 * p.zeta) / (std::numbers::pi * p.f);
    // Values within rounding of the boundary are reported as degenerate roots
    // rather than as lying outside the existence region.
    if (c > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "existence condition pi^2 f^2 > 8 zeta violated (pi^2 f^2 = "
           << std::numbers::pi * std::numbers::pi * p.f * p.f << ", 8 zeta = " << 8.0 * p.zeta << ")";
        throw ExistenceViolation(os.str());
    }
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    if (s < 1e-8) throw DegenerateRoot("bifurcation angle is not a simple zero: |sin(theta0)| < 1e-8");
    BifurcationAngles a;
    a.cos_theta = c;
    a.sin_theta = s;
    a.theta_stable = std::atan2(s, c);
    a.theta_unstable = 2.0 * std::numbers::pi - a.theta_stable;
    return a;
}

/// zeta u - |u|^2 u + i eps (f - u)
inline cplx background_residual(cplx u, const Params& p)
{
    return p.zeta * u - std::norm(u) * u + I_unit * p.epsilon * (p.f - u);
}

namespace detail {

inline cplx newton_background(cplx u, const Params& p)
{
    for (int it = 0; it < 60; ++it) {
        const cplx F = background_residual(u, p);
        if (std::abs(F) < 1e-15 * (1.0 + p.zeta + std::abs(p.epsilon * p.f))) break;
        // F is only R-differentiable: dF = alpha dv + beta conj(dv).
        const cplx alpha = p.zeta - 2.0 * std::norm(u) - I_unit * p.epsilon;
        const cplx beta = -u * u;
        const cplx da = alpha + beta, db = I_unit * (alpha - beta);
        Eigen::Matrix2d jac;
        jac << da.real(), db.real(), da.imag(), db.imag();
        const Eigen::Vector2d step = jac.partialPivLu().solve(Eigen::Vector2d(-F.real(), -F.imag()));
        u += cplx(step[0], step[1]);
    }
    return u;
}

} // namespace detail

///
/// Background root near zero, tracked from eps = 0 in increments of at most
/// 0.005 so that Newton cannot hop onto the two roots near +-sqrt(zeta).
///
inline cplx solve_background(const Params& p)
{
    p.validate();
    if (p.epsilon == 0.0) return 0.0;
    constexpr double max_step = 0.005;
    const int steps = std::max(1, int(std::ceil(std::abs(p.epsilon) / max_step)));
    cplx u = 0.0;
    for (int s = 1; s <= steps; ++s) {
        const Params ps = p.with_epsilon(p.epsilon * double(s) / steps);
        if (s == 1) u = -I_unit * p.f * ps.epsilon / p.zeta;
        u = detail::newton_background(u, ps);
    }
    if (std::abs(u) > 0.5 * std::sqrt(p.zeta)) {
        std::ostringstream os;
        os << "background root |u_inf| = " << std::abs(u) << " left the small branch";
        throw RootJump(os.str());
    }
    if (std::abs(background_residual(u, p)) > 1e-13)
        throw RootJump("background Newton iteration did not converge");
    return u;
}

/// Reduced bifurcation function at eps = 0:  4 sqrt(zeta) - sqrt(2) pi f cos(theta).
inline double reduced_bifurcation_function(double theta, const Params& p)
{
    return 4.0 * std::sqrt(p.zeta) - std::numbers::sqrt2 * std::numbers::pi * p.f * std::cos(theta);
}

/// Its theta-derivative  sqrt(2) pi f sin(theta).
inline double reduced_bifurcation_derivative(double theta, const Params& p)
{
    return std::numbers::sqrt2 * std::numbers::pi * p.f * std::sin(theta);
}

/// u_inf(eps) + phi_theta, the Newton seed.
inline ComplexField leading_ansatz(const Params& p, const Grid& g, double theta)
{
    ComplexField u = nls_soliton(p, g, theta);
    u.values.array() += solve_background(p);
    return u;
}

} // namespace lle

#endif // LLE_SOLITON_HPP
