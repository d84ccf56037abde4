#ifndef LLE_TESTS_FIXTURES_HPP
#define LLE_TESTS_FIXTURES_HPP

// Shared baseline objects; converged points are cached per test binary.

#include <map>
#include <tuple>

#include <lle/lle.hpp>

namespace lle::fixture {

inline const Params baseline{1.0, 2.0, 0.0};

/// Converged point on the baseline (zeta = 1, f = 2, half_length = 20).
inline const BranchPoint& converged_point(double eps, bool stable = true, int n = 256)
{
    static std::map<std::tuple<double, bool, int>, BranchPoint> cache;
    const auto key = std::make_tuple(eps, stable, n);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const Params p = baseline.with_epsilon(eps);
        const BifurcationAngles a = solve_theta0(p);
        const Grid g(n, 20.0);
        NewtonOptions opt;
        opt.tol = 1e-12;
        BranchPoint pt = newton_correct(leading_ansatz(p, g, stable ? a.theta_stable : a.theta_unstable), p, opt);
        it = cache.emplace(key, std::move(pt)).first;
    }
    return it->second;
}

inline double max_abs_diff(const VectorXcd& a, const VectorXcd& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace lle::fixture

#endif
