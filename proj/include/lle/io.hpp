#ifndef LLE_IO_HPP
#define LLE_IO_HPP

//
// Plain-text artifacts. Every floating-point value is written with 17
// significant digits so that a reload reproduces the doubles bit for bit.
//

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "resolvent.hpp"
#include "spectrum.hpp"

namespace lle::io {

inline std::string format_double(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

namespace detail {

inline std::ofstream open(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

} // namespace detail

/// re,im,class  — one row per eigenvalue of the generator.
inline void write_spectrum_csv(const std::filesystem::path& path, const SpectrumReport& r)
{
    auto out = detail::open(path);
    out << "re,im,class\n";
    for (Index i = 0; i < r.eigenvalues.size(); ++i)
        out << format_double(r.eigenvalues[i].real()) << ',' << format_double(r.eigenvalues[i].imag()) << ','
            << to_string(r.classes[i]) << '\n';
}

/// re,im,norm  — one row per successful scan sample.
inline void write_scan_csv(const std::filesystem::path& path, const ResolventScan& s)
{
    auto out = detail::open(path);
    out << "re,im,norm\n";
    for (std::size_t i = 0; i < s.norms.size(); ++i)
        out << format_double(s.lambda_samples[i].real()) << ',' << format_double(s.lambda_samples[i].imag()) << ','
            << format_double(s.norms[i]) << '\n';
}

/// t,distance,sigma
inline void write_trace_csv(const std::filesystem::path& path, const EvolutionTrace& t)
{
    auto out = detail::open(path);
    out << "t,distance,sigma\n";
    for (std::size_t i = 0; i < t.times.size(); ++i)
        out << format_double(t.times[i]) << ',' << format_double(t.orbital_distances[i]) << ','
            << format_double(t.sigma_track[i]) << '\n';
}

/// x,re,im
inline void write_field_csv(const std::filesystem::path& path, const ComplexField& u)
{
    auto out = detail::open(path);
    out << "x,re,im\n";
    for (Index j = 0; j < u.size(); ++j)
        out << format_double(u.grid.x(j)) << ',' << format_double(u.values[j].real()) << ','
            << format_double(u.values[j].imag()) << '\n';
}

/// Dense complex matrix, row-major; row i holds re,im,re,im,... for columns 0, 1, ...
inline void write_matrix_csv(const std::filesystem::path& path, const MatrixXcd& m)
{
    auto out = detail::open(path);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j).real()) << ',' << format_double(m(i, j).imag());
        out << '\n';
    }
}

/// Reads a CSV written by one of the writers above: header names and numeric rows.
/// Non-numeric cells (such as the class column) are returned as NaN.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Table read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    Table t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t p = s.find(',', start);
            cells.push_back(s.substr(start, p - start));
            if (p == std::string::npos) break;
            start = p + 1;
        }
        return cells;
    };
    if (std::getline(in, line)) t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const std::string& c : split(line)) {
            try {
                row.push_back(parse_double(c));
            } catch (const std::invalid_argument&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace lle::io

#endif // LLE_IO_HPP
