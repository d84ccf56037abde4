#ifndef LLE_GRID_HPP
#define LLE_GRID_HPP

//
// Truncated periodic grid on [-L, L), Fourier-multiplier calculus, norms and
// translations of complex fields.
//

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace lle {

using cplx = std::complex<double>;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};

///
/// Uniform periodic grid with an even number of points. Point j sits at
/// x_j = -L + j*dx, so index n/2 is the origin and (n - j) mod n mirrors j.
///
class Grid {
public:
    Grid(int n_points, double half_length)
        : n_(n_points), half_length_(half_length)
    {
        if (n_points < 4 || n_points % 2 != 0)
            throw std::invalid_argument("grid: n_points must be an even integer >= 4, got " + std::to_string(n_points));
        if (!(half_length > 0.0) || !std::isfinite(half_length))
            throw std::invalid_argument("grid: half_length must be positive");
    }

    int size() const noexcept { return n_; }
    double half_length() const noexcept { return half_length_; }
    double dx() const noexcept { return 2.0 * half_length_ / n_; }

    double x(Index j) const noexcept { return -half_length_ + double(j) * dx(); }

    /// Wavenumber of FFT slot j (natural FFT ordering, Nyquist slot negative).
    double k(Index j) const noexcept
    {
        const Index m = j < n_ / 2 ? j : j - n_;
        return std::numbers::pi * double(m) / half_length_;
    }

    Index center() const noexcept { return n_ / 2; }
    Index mirror(Index j) const noexcept { return (n_ - j) % n_; }
    Index nyquist() const noexcept { return n_ / 2; }

    VectorXd points() const
    {
        VectorXd p(n_);
        for (Index j = 0; j < n_; ++j) p[j] = x(j);
        return p;
    }

    VectorXd wavenumbers() const
    {
        VectorXd w(n_);
        for (Index j = 0; j < n_; ++j) w[j] = k(j);
        return w;
    }

    double max_wavenumber() const noexcept { return std::numbers::pi * (n_ / 2) / half_length_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int n_;
    double half_length_;
};

/// Complex samples on a grid.
struct ComplexField {
    Grid grid;
    VectorXcd values;

    explicit ComplexField(const Grid& g) : grid(g), values(VectorXcd::Zero(g.size())) {}

    ComplexField(const Grid& g, VectorXcd v) : grid(g), values(std::move(v))
    {
        if (values.size() != g.size())
            throw std::invalid_argument("field: sample count does not match grid");
    }

    template <class F>
    static ComplexField sample(const Grid& g, F&& fn)
    {
        ComplexField out(g);
        for (Index j = 0; j < g.size(); ++j) out.values[j] = cplx(fn(g.x(j)));
        return out;
    }

    Index size() const noexcept { return values.size(); }

    ComplexField& operator+=(const ComplexField& o) { values += o.values; return *this; }
    ComplexField& operator-=(const ComplexField& o) { values -= o.values; return *this; }
    ComplexField& operator*=(cplx s) { values *= s; return *this; }

    friend ComplexField operator+(ComplexField a, const ComplexField& b) { a += b; return a; }
    friend ComplexField operator-(ComplexField a, const ComplexField& b) { a -= b; return a; }
    friend ComplexField operator*(cplx s, ComplexField a) { a *= s; return a; }
};

namespace fourier {

// Eigen's FFT caches plans internally; one instance per thread keeps the
// transforms reentrant.
inline Eigen::FFT<double>& engine()
{
    thread_local Eigen::FFT<double> fft;
    return fft;
}

/// Unnormalized forward DFT.
inline VectorXcd forward(const VectorXcd& v)
{
    VectorXcd out(v.size());
    engine().fwd(out, v);
    return out;
}

/// Inverse DFT including the 1/n factor.
inline VectorXcd inverse(const VectorXcd& v)
{
    VectorXcd out(v.size());
    engine().inv(out, v);
    return out;
}

template <class Symbol>
VectorXcd apply_multiplier(const Grid& g, const VectorXcd& v, Symbol&& symbol)
{
    VectorXcd hat = forward(v);
    for (Index j = 0; j < g.size(); ++j) hat[j] *= symbol(j);
    return inverse(hat);
}

} // namespace fourier

inline ComplexField second_derivative(const ComplexField& field)
{
    const Grid& g = field.grid;
    return {g, fourier::apply_multiplier(g, field.values, [&](Index j) { return cplx(-g.k(j) * g.k(j)); })};
}

/// Spectral first derivative; the Nyquist coefficient is dropped.
inline ComplexField first_derivative(const ComplexField& field)
{
    const Grid& g = field.grid;
    return {g, fourier::apply_multiplier(g, field.values, [&](Index j) {
                return j == g.nyquist() ? cplx(0.0) : I_unit * g.k(j);
            })};
}

/// Periodic translation: result(x) = field(x - sigma).
inline ComplexField shift(const ComplexField& field, double sigma)
{
    const Grid& g = field.grid;
    return {g, fourier::apply_multiplier(g, field.values, [&](Index j) { return std::exp(-I_unit * g.k(j) * sigma); })};
}

/// Band-limited resampling onto a grid with the same half length.
inline ComplexField resample(const ComplexField& field, const Grid& target)
{
    const Grid& g = field.grid;
    if (std::abs(g.half_length() - target.half_length()) > 1e-14 * g.half_length())
        throw std::invalid_argument("resample: grids must share half_length");
    const Index n = g.size(), m = target.size();
    VectorXcd hat = fourier::forward(field.values);
    VectorXcd out = VectorXcd::Zero(m);
    const Index keep = std::min(n, m) / 2;
    for (Index j = 0; j < keep; ++j) out[j] = hat[j];
    for (Index j = 1; j < keep; ++j) out[m - j] = hat[n - j];
    out *= double(m) / double(n);
    return {target, fourier::inverse(out)};
}

enum class NormKind { L2, L3, Linf, H1, H2 };

inline double norm(const ComplexField& field, NormKind kind)
{
    const Grid& g = field.grid;
    const double dx = g.dx();
    switch (kind) {
    case NormKind::L2:
        return std::sqrt(dx * field.values.squaredNorm());
    case NormKind::L3: {
        double s = 0.0;
        for (Index j = 0; j < field.size(); ++j) s += std::pow(std::abs(field.values[j]), 3);
        return std::cbrt(dx * s);
    }
    case NormKind::Linf:
        return field.size() ? field.values.cwiseAbs().maxCoeff() : 0.0;
    case NormKind::H1:
    case NormKind::H2: {
        const int s = kind == NormKind::H1 ? 1 : 2;
        const VectorXcd hat = fourier::forward(field.values);
        double acc = 0.0;
        for (Index j = 0; j < g.size(); ++j)
            acc += std::pow(1.0 + g.k(j) * g.k(j), s) * std::norm(hat[j]);
        return std::sqrt(acc * dx / g.size());
    }
    }
    throw std::logic_error("norm: unknown kind");
}

/// L2 norm evaluated from Fourier coefficients (Parseval).
inline double fourier_l2_norm(const ComplexField& field)
{
    const VectorXcd hat = fourier::forward(field.values);
    return std::sqrt(hat.squaredNorm() * field.grid.dx() / field.grid.size());
}

/// Complex L2 pairing  int f conj(g) dx  by the trapezoidal rule.
inline cplx inner(const ComplexField& f, const ComplexField& g)
{
    return f.grid.dx() * g.values.dot(f.values);
}

inline ComplexField mirrored(const ComplexField& field)
{
    ComplexField out(field.grid);
    for (Index j = 0; j < field.size(); ++j) out.values[j] = field.values[field.grid.mirror(j)];
    return out;
}

inline double parity_defect(const ComplexField& field)
{
    return (field.values - mirrored(field).values).cwiseAbs().maxCoeff();
}

/// Dense matrix of the spectral second derivative (real, symmetric, circulant).
inline MatrixXd second_derivative_matrix(const Grid& g)
{
    const Index n = g.size();
    VectorXcd symbol(n);
    for (Index j = 0; j < n; ++j) symbol[j] = -g.k(j) * g.k(j);
    const VectorXcd column = fourier::inverse(symbol);
    MatrixXd d2(n, n);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < n; ++r) d2(r, c) = column[(r - c + n) % n].real();
    return d2;
}

} // namespace lle

#endif // LLE_GRID_HPP
