#ifndef LLE_DYNAMICS_HPP
#define LLE_DYNAMICS_HPP

//
// Time evolution of  u_t = i u_xx - i zeta u + i|u|^2 u + eps (f - u)  by
// exponential time differencing, orbital distance modulo translations, and
// perturbation experiments with exponential rate fits.
//

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "continuation.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "lapack.hpp"
#include "linops.hpp"
#include "soliton.hpp"

namespace lle {

enum class Scheme { etdrk4, etd2rk };

///
/// One-step map with the diagonal linear part  -i k^2 - i zeta - eps  treated
/// exactly. The phi-function coefficients are contour averages (64 points on the
/// unit circle) so small |h c| does not cancel.
///
class Stepper {
public:
    Stepper(const Grid& g, const Params& p, double dt, Scheme scheme = Scheme::etdrk4)
        : grid_(g), params_(p), dt_(dt), scheme_(scheme)
    {
        if (!(dt != 0.0) || !std::isfinite(dt)) throw std::invalid_argument("stepper: dt must be finite and nonzero");
        const double kmax = g.max_wavenumber();
        if (std::abs(dt) * kmax * kmax > 10.0) {
            std::ostringstream os;
            os << "stepper: |dt| * max k^2 = " << std::abs(dt) * kmax * kmax << " exceeds 10";
            throw std::invalid_argument(os.str());
        }
        const Index n = g.size();
        e_.resize(n); e2_.resize(n); q_.resize(n); f1_.resize(n); f2_.resize(n); f3_.resize(n);
        constexpr int M = 64;
        for (Index j = 0; j < n; ++j) {
            const cplx c = -I_unit * (g.k(j) * g.k(j) + p.zeta) - p.epsilon;
            const cplx hc = dt * c;
            e_[j] = std::exp(hc);
            e2_[j] = std::exp(0.5 * hc);
            cplx q = 0.0, a = 0.0, b = 0.0, d = 0.0;
            for (int m = 0; m < M; ++m) {
                const cplx z = hc + std::polar(1.0, 2.0 * std::numbers::pi * (m + 0.5) / M);
                const cplx ez = std::exp(z), z3 = z * z * z;
                if (scheme_ == Scheme::etdrk4) {
                    q += (std::exp(0.5 * z) - 1.0) / z;
                    a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                    b += (2.0 + z + ez * (-2.0 + z)) / z3;
                    d += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
                } else {
                    q += (ez - 1.0) / z;            // phi1
                    a += (ez - 1.0 - z) / (z * z);  // phi2
                }
            }
            q_[j] = dt * q / double(M);
            f1_[j] = dt * a / double(M);
            f2_[j] = dt * b / double(M);
            f3_[j] = dt * d / double(M);
        }
    }

    double dt() const { return dt_; }

    void step(VectorXcd& u) const
    {
        const VectorXcd v = fourier::forward(u);
        const VectorXcd nv = nonlinear_hat(u);
        if (scheme_ == Scheme::etdrk4) {
            const VectorXcd a = e2_.cwiseProduct(v) + q_.cwiseProduct(nv);
            const VectorXcd na = nonlinear_hat(fourier::inverse(a));
            const VectorXcd b = e2_.cwiseProduct(v) + q_.cwiseProduct(na);
            const VectorXcd nb = nonlinear_hat(fourier::inverse(b));
            const VectorXcd c = e2_.cwiseProduct(a) + q_.cwiseProduct(2.0 * nb - nv);
            const VectorXcd nc = nonlinear_hat(fourier::inverse(c));
            const VectorXcd next = e_.cwiseProduct(v) + f1_.cwiseProduct(nv) + 2.0 * f2_.cwiseProduct(na + nb)
                                   + f3_.cwiseProduct(nc);
            u = fourier::inverse(next);
        } else {
            const VectorXcd a = e_.cwiseProduct(v) + q_.cwiseProduct(nv);
            const VectorXcd na = nonlinear_hat(fourier::inverse(a));
            u = fourier::inverse(a + f1_.cwiseProduct(na - nv));
        }
    }

private:
    /// Transform of  i|u|^2 u + eps f.
    VectorXcd nonlinear_hat(const VectorXcd& u) const
    {
        VectorXcd n = I_unit * (u.array().abs2() * u.array()).matrix();
        n.array() += params_.epsilon * params_.f;
        return fourier::forward(n);
    }

    Grid grid_;
    Params params_;
    double dt_;
    Scheme scheme_;
    VectorXcd e_, e2_, q_, f1_, f2_, f3_;
};

struct Snapshot {
    double t = 0.0;
    ComplexField field;
};

struct EvolveOptions {
    Scheme scheme = Scheme::etdrk4;
    double snapshot_interval = 0.0; ///< 0: only the final state
    double blowup_factor = 10.0;
};

namespace detail {

inline int step_count(double t_end, double dt)
{
    const double ratio = t_end / dt;
    if (!(ratio >= 0.0)) throw std::invalid_argument("evolve: t_end and dt must have the same sign");
    const int steps = int(std::llround(ratio));
    if (std::abs(steps * dt - t_end) > 1e-9 * std::max(1.0, std::abs(t_end)))
        throw std::invalid_argument("evolve: t_end must be an integer multiple of dt");
    return steps;
}

} // namespace detail

///
/// Integrates to t_end (negative t_end with negative dt runs backwards). The
/// returned list holds the initial state, the snapshots, and the final state.
///
template <class Observer>
void evolve_observed(const ComplexField& initial, const Params& p, double t_end, double dt, const EvolveOptions& opt,
                     Observer&& observe)
{
    const Stepper stepper(initial.grid, p, dt, opt.scheme);
    const int steps = detail::step_count(t_end, dt);
    const int every = opt.snapshot_interval > 0.0 ? std::max(1, int(std::llround(opt.snapshot_interval / std::abs(dt))))
                                                  : std::max(1, steps);
    const double scale = std::max(norm(initial, NormKind::Linf), 1e-300);
    VectorXcd u = initial.values;
    observe(0.0, ComplexField(initial.grid, u));
    for (int s = 1; s <= steps; ++s) {
        stepper.step(u);
        if (s % every == 0 || s == steps) {
            const double linf = u.cwiseAbs().maxCoeff();
            if (!(linf <= opt.blowup_factor * scale)) {
                std::ostringstream os;
                os << "solution left the bounded regime at t = " << s * dt << " (|u|_inf = " << linf << ")";
                throw BlowUp(os.str());
            }
            observe(s * dt, ComplexField(initial.grid, u));
        }
    }
}

inline std::vector<Snapshot> evolve(const ComplexField& initial, const Params& p, double t_end, double dt,
                                    const EvolveOptions& opt = {})
{
    std::vector<Snapshot> out;
    evolve_observed(initial, p, t_end, dt, opt, [&](double t, const ComplexField& u) { out.push_back({t, u}); });
    return out;
}

// ---------------------------------------------------------------------------
// Orbital distance

struct OrbitalDistance {
    double distance = 0.0;
    double sigma = 0.0; ///< state is closest to reference(x - sigma)
};

///
/// min over sigma of || state - reference(. - sigma) ||_{H1}. The pairing is
/// maximized by an FFT cross-correlation on the grid shifts, a golden-section
/// search on the bracketing cell, and a Newton polish on its derivative.
///
inline OrbitalDistance orbital_distance(const ComplexField& state, const ComplexField& reference)
{
    const Grid& g = state.grid;
    if (!(g == reference.grid)) throw std::invalid_argument("orbital_distance: fields must share a grid");
    const Index n = g.size();
    const VectorXcd s = fourier::forward(state.values), r = fourier::forward(reference.values);
    VectorXcd cross(n);
    for (Index j = 0; j < n; ++j) cross[j] = (1.0 + g.k(j) * g.k(j)) * s[j] * std::conj(r[j]);

    // pairing(sigma) = Re sum w s conj(r) e^{i k sigma}
    auto pairing = [&](double sigma, int derivative) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double k = g.k(j);
            cplx term = cross[j] * std::exp(I_unit * k * sigma);
            if (derivative == 1) term *= I_unit * k;
            if (derivative == 2) term *= -k * k;
            acc += term.real();
        }
        return acc;
    };

    const VectorXcd corr = fourier::inverse(cross) * double(n);
    Index best = 0;
    for (Index j = 1; j < n; ++j)
        if (corr[j].real() > corr[best].real()) best = j;
    double center = double(best < n / 2 ? best : best - n) * g.dx();

    double a = center - g.dx(), b = center + g.dx();
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = pairing(c, 0), fd = pairing(d, 0);
    while (b - a > 1e-7) {
        if (fc > fd) { b = d; d = c; fd = fc; c = b - phi * (b - a); fc = pairing(c, 0); }
        else { a = c; c = d; fc = fd; d = a + phi * (b - a); fd = pairing(d, 0); }
    }
    double sigma = 0.5 * (a + b);
    for (int it = 0; it < 8; ++it) {
        const double d1 = pairing(sigma, 1), d2 = pairing(sigma, 2);
        if (!(d2 < 0.0)) break;
        const double step = -d1 / d2;
        sigma += step;
        if (std::abs(step) < 1e-14) break;
    }
    if (std::abs(sigma - center) > 2.0 * g.dx()) sigma = center;
    sigma = std::remainder(sigma, 2.0 * g.half_length());

    return {norm(state - shift(reference, sigma), NormKind::H1), sigma};
}

inline OrbitalDistance orbital_distance(const ComplexField& state, const BranchPoint& reference)
{
    return orbital_distance(state, reference.field);
}

// ---------------------------------------------------------------------------
// Perturbations and experiments

enum class PerturbationKind { none, gaussian, odd_gaussian, mixed, eigenvector, random };

inline PerturbationKind perturbation_from_string(const std::string& s)
{
    if (s == "none") return PerturbationKind::none;
    if (s == "gaussian") return PerturbationKind::gaussian;
    if (s == "odd_gaussian") return PerturbationKind::odd_gaussian;
    if (s == "mixed") return PerturbationKind::mixed;
    if (s == "eigenvector") return PerturbationKind::eigenvector;
    if (s == "random") return PerturbationKind::random;
    throw std::invalid_argument("unknown perturbation class '" + s + "'");
}

inline std::string to_string(PerturbationKind k)
{
    switch (k) {
    case PerturbationKind::none: return "none";
    case PerturbationKind::gaussian: return "gaussian";
    case PerturbationKind::odd_gaussian: return "odd_gaussian";
    case PerturbationKind::mixed: return "mixed";
    case PerturbationKind::eigenvector: return "eigenvector";
    case PerturbationKind::random: return "random";
    }
    return "unknown";
}

inline ComplexField normalized_h1(ComplexField v, double delta)
{
    const double nrm = norm(v, NormKind::H1);
    if (nrm > 0.0) v.values *= delta / nrm;
    return v;
}

/// First component of a doubled eigenvector, phased so that (v, conj v) matches it.
inline ComplexField eigenvector_field(const Grid& g, const VectorXcd& doubled_vector)
{
    const Index n = g.size();
    const cplx pairing = (doubled_vector.head(n).array() * doubled_vector.tail(n).array()).sum();
    const cplx phase = std::polar(1.0, -0.5 * std::arg(pairing));
    return ComplexField(g, 0.5 * (phase * doubled_vector.head(n) + std::conj(phase) * doubled_vector.tail(n).conjugate()));
}

///
/// H1-normalized perturbation of size delta. The eigenvector class uses the most
/// unstable eigenvector of the generator at the point (largest real part).
///
inline ComplexField make_perturbation(PerturbationKind kind, const BranchPoint& point, double delta,
                                      std::uint64_t seed = 0)
{
    const Grid& g = point.grid();
    switch (kind) {
    case PerturbationKind::none:
        return ComplexField(g);
    case PerturbationKind::gaussian:
        return normalized_h1(ComplexField::sample(g, [](double x) { return cplx(1.0, 1.0) * std::exp(-x * x); }), delta);
    case PerturbationKind::odd_gaussian:
        return normalized_h1(ComplexField::sample(g, [](double x) { return cplx(1.0, -0.5) * (-2.0 * x) * std::exp(-x * x); }),
                             delta);
    case PerturbationKind::mixed:
        return normalized_h1(ComplexField::sample(g, [](double x) {
                                 return cplx(1.0, 1.0) * std::exp(-x * x) + cplx(1.0, -0.5) * (-2.0 * x) * std::exp(-x * x);
                             }),
                             delta);
    case PerturbationKind::eigenvector: {
        const EigenDecomposition ed = general_eigen(assemble(point).generator());
        Index best = 0;
        for (Index i = 1; i < ed.values.size(); ++i)
            if (ed.values[i].real() > ed.values[best].real()) best = i;
        return normalized_h1(eigenvector_field(g, ed.vectors.col(best)), delta);
    }
    case PerturbationKind::random: {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        cplx coeff[4];
        for (cplx& c : coeff) c = cplx(normal(rng), normal(rng));
        return normalized_h1(ComplexField::sample(g, [&](double x) {
                                 return (coeff[0] + x * (coeff[1] + x * (coeff[2] + x * coeff[3]))) * std::exp(-0.5 * x * x);
                             }),
                             delta);
    }
    }
    throw std::logic_error("make_perturbation: unknown kind");
}

enum class RateKind { decay, growth };

struct ExperimentOptions {
    double dt = 0.005;
    double sample_interval = 0.5;
    Scheme scheme = Scheme::etdrk4;
    RateKind rate = RateKind::decay;
    double growth_cap = 1e-3;  ///< growth fits stop where the distance first reaches this
    double growth_start = 3.0; ///< and start once it exceeds this multiple of the initial distance
};

struct EvolutionTrace {
    std::vector<double> times;
    std::vector<double> orbital_distances;
    std::vector<double> sigma_track;
    std::vector<double> mass_track; ///< L2 norm of psi - u_inf
    double fitted_rate = 0.0;       ///< eta for decay fits, the growth rate for growth fits
    double log_slope = 0.0;
    std::pair<double, double> fit_window{0.0, 0.0};
    int fit_samples = 0;
    ComplexField final_state;

    double sigma_infinity() const { return sigma_track.empty() ? 0.0 : sigma_track.back(); }
};

/// Least-squares slope of log(y) against t over samples inside [t0, t1].
inline std::pair<double, int> log_slope(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1)
{
    double st = 0, sy = 0, stt = 0, sty = 0;
    int m = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 - 1e-12 || t[i] > t1 + 1e-12 || !(y[i] > 0.0)) continue;
        const double ly = std::log(y[i]);
        st += t[i]; sy += ly; stt += t[i] * t[i]; sty += t[i] * ly;
        ++m;
    }
    if (m < 2) return {std::numeric_limits<double>::quiet_NaN(), m};
    const double den = m * stt - st * st;
    return {(m * sty - st * sy) / den, m};
}

///
/// Evolves psi = u + perturbation and tracks its distance to the orbit of u.
/// Decay fits use [t_end/2, t_end]; growth fits use the stretch before the
/// distance reaches growth_cap.
///
inline EvolutionTrace stability_experiment(const BranchPoint& point, const ComplexField& perturbation, double t_end,
                                           const ExperimentOptions& opt = {})
{
    EvolutionTrace trace{.final_state = point.field};
    EvolveOptions eo;
    eo.scheme = opt.scheme;
    eo.snapshot_interval = opt.sample_interval;
    double prev_sigma = 0.0;
    bool first = true;
    evolve_observed(point.field + perturbation, point.params, t_end, opt.dt, eo, [&](double t, const ComplexField& u) {
        OrbitalDistance od = orbital_distance(u, point);
        if (!first) {
            // unwrap across the periodic cell
            const double period = 2.0 * u.grid.half_length();
            od.sigma = prev_sigma + std::remainder(od.sigma - prev_sigma, period);
        }
        first = false;
        prev_sigma = od.sigma;
        ComplexField centered = u;
        centered.values.array() -= point.u_inf;
        trace.times.push_back(t);
        trace.orbital_distances.push_back(od.distance);
        trace.sigma_track.push_back(od.sigma);
        trace.mass_track.push_back(norm(centered, NormKind::L2));
        trace.final_state = u;
    });

    if (opt.rate == RateKind::decay) {
        trace.fit_window = {0.5 * t_end, t_end};
    } else {
        const double d0 = trace.orbital_distances.front();
        double start = trace.times.front(), stop = trace.times.back();
        bool started = false;
        for (std::size_t i = 0; i < trace.times.size(); ++i) {
            if (!started && trace.orbital_distances[i] > opt.growth_start * d0) {
                start = trace.times[i];
                started = true;
            }
            if (trace.orbital_distances[i] >= opt.growth_cap) {
                stop = trace.times[i];
                break;
            }
        }
        trace.fit_window = {started ? start : trace.times.front(), stop};
    }
    const auto [slope, m] = log_slope(trace.times, trace.orbital_distances, trace.fit_window.first, trace.fit_window.second);
    trace.log_slope = slope;
    trace.fit_samples = m;
    trace.fitted_rate = opt.rate == RateKind::decay ? -slope : slope;
    return trace;
}

} // namespace lle

#endif // LLE_DYNAMICS_HPP
