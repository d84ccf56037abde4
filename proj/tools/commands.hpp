#ifndef LLE_TOOLS_COMMANDS_HPP
#define LLE_TOOLS_COMMANDS_HPP

//
// Subcommands of the lle command-line tool. Kept in a header so the test suite
// can drive them in-process.
//
// Precedence: built-in defaults < --config file < command-line flags.
// Exit codes: 0 success, 1 user or configuration error, 2 numerical failure.
//

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <lle/lle.hpp>

namespace lle::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* tool_version = "lle-workbench 1.0.0";

enum ExitCode : int { exit_ok = 0, exit_user_error = 1, exit_numerical_failure = 2 };

/// Bad configuration, flags or missing inputs: exit code 1.
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double zeta = 1.0;
    double f = 2.0;
    int n_points = 512;
    double half_length = 20.0;

    std::string theta_choice = "stable";
    double eps_start = 0.002;
    double eps_end = 0.05;
    double eps_step = 0.002;
    double newton_tol = 1e-10;
    int newton_max_iters = 25;

    std::vector<double> spectrum_epsilons; ///< empty: every branch point
    SpectrumOptions spectrum_thresholds;
    bool expansion_constants = true;

    int resolvent_n_points = 256;
    double resolvent_epsilon = 0.01;
    std::vector<double> re_values{0.0, 0.25, 0.5, 1.0, 2.0};
    double im_min = -50.0;
    double im_max = 50.0;
    double im_step = 0.5;
    std::vector<double> scaling_re{0.25, 0.5, 1.0, 2.0};
    double scaling_im = 40.0;
    double rho_re = 0.5;
    double rho_im_max = 100.0;
    bool exact_svd = false;

    double dynamics_epsilon = 0.01;
    double delta = 1e-3;
    std::string perturbation = "mixed";
    std::optional<double> t_end; ///< default 5 / eps
    double dt = 0.005;
    double sample_interval = 1.0;
    std::string scheme = "etdrk4";
    std::string fit = "auto"; ///< auto | decay | growth

    double report_tol = 1e-12;

    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool dump_fields = false;

    Params params(double eps = 0.0) const { return {zeta, f, eps}; }
    Grid grid() const { return Grid(n_points, half_length); }

    /// Canonical key/value tree; output_dir and dump_fields are excluded since they
    /// do not change any computed number.
    json to_json() const
    {
        json j;
        j["params"] = {{"zeta", zeta}, {"f", f}};
        j["grid"] = {{"n_points", n_points}, {"half_length", half_length}};
        j["branch"] = {{"theta_choice", theta_choice}, {"eps_start", eps_start}, {"eps_end", eps_end},
                       {"step", eps_step},          {"newton_tol", newton_tol}, {"newton_max_iters", newton_max_iters}};
        j["spectrum"] = {{"epsilons", spectrum_epsilons},
                         {"thresholds",
                          {{"localization", spectrum_thresholds.localization},
                           {"translational_overlap", spectrum_thresholds.translational_overlap},
                           {"unstable_re", spectrum_thresholds.unstable_re}}},
                         {"expansion_constants", expansion_constants}};
        j["resolvent"] = {{"n_points", resolvent_n_points}, {"epsilon", resolvent_epsilon}, {"re_values", re_values},
                          {"im_min", im_min},  {"im_max", im_max}, {"im_step", im_step},
                          {"scaling_re", scaling_re}, {"scaling_im", scaling_im}, {"rho_re", rho_re},
                          {"rho_im_max", rho_im_max}, {"exact_svd", exact_svd}};
        j["dynamics"] = {{"epsilon", dynamics_epsilon}, {"delta", delta}, {"perturbation", perturbation},
                         {"t_end", t_end ? json(*t_end) : json(nullptr)}, {"dt", dt},
                         {"sample_interval", sample_interval}, {"scheme", scheme}, {"fit", fit}};
        j["report"] = {{"tol", report_tol}};
        j["seed"] = seed;
        return j;
    }
};

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : cfg.to_json().dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

/// Walks one object of the config tree, remembering which keys were consumed.
class Section {
public:
    Section(const json* node, std::string path, const std::string& text) : node_(node), path_(std::move(path)), text_(text)
    {
        if (node_ && !node_->is_object()) fail_self("must be an object");
    }

    template <class T>
    void read(const char* key, T& dst)
    {
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        try {
            dst = node_->at(key).template get<T>();
        } catch (const json::exception&) {
            fail(key, "has the wrong type");
        }
    }

    void read_optional(const char* key, std::optional<double>& dst)
    {
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        const json& v = node_->at(key);
        if (v.is_null()) dst.reset();
        else if (v.is_number()) dst = v.get<double>();
        else fail(key, "must be a number or null");
    }

    Section child(const char* key)
    {
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return Section(nullptr, path_ + key + ".", text_);
        return Section(&node_->at(key), path_ + key + ".", text_);
    }

    void finish() const
    {
        if (!node_) return;
        for (const auto& item : node_->items())
            if (!known_.count(item.key())) fail(item.key(), "is not a recognized key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& why) const
    {
        throw UserError("config: " + where(key) + path_ + key + " " + why);
    }

private:
    [[noreturn]] void fail_self(const std::string& why) const
    {
        throw UserError("config: " + path_.substr(0, path_.empty() ? 0 : path_.size() - 1) + " " + why);
    }

    // First line of the source mentioning the key; good enough for a diagnostic.
    std::string where(const std::string& key) const
    {
        const std::size_t pos = text_.find('"' + key + '"');
        if (pos == std::string::npos) return "";
        return "line " + std::to_string(1 + std::count(text_.begin(), text_.begin() + pos, '\n')) + ": ";
    }

    const json* node_;
    std::string path_;
    const std::string& text_;
    std::set<std::string> known_;
};

inline void require(bool ok, const std::string& message)
{
    if (!ok) throw UserError("config: " + message);
}

inline bool is_multiple(double a, double b) { return std::abs(a / b - std::round(a / b)) < 1e-9; }

} // namespace detail

/// Checks every numeric field against the preconditions of the module that uses it.
inline void validate(const RunConfig& c)
{
    using detail::require;
    require(c.zeta > 0.0, "params.zeta must be positive");
    require(c.f > 0.0, "params.f must be positive");
    require(c.params().existence_condition(),
            "params violate the existence condition pi^2 f^2 > 8 zeta (no bifurcation angle exists)");
    require(c.n_points >= 16 && c.n_points % 2 == 0, "grid.n_points must be even and at least 16");
    require(c.half_length > 0.0, "grid.half_length must be positive");
    require(c.theta_choice == "stable" || c.theta_choice == "unstable", "branch.theta_choice must be stable or unstable");
    require(c.eps_start != 0.0, "branch.eps_start must be nonzero");
    require(c.eps_start * c.eps_end > 0.0, "branch eps range must not cross or touch zero");
    require(c.eps_step > 0.0, "branch.step must be positive");
    require(c.newton_tol > 0.0, "branch.newton_tol must be positive");
    require(c.newton_max_iters > 0, "branch.newton_max_iters must be positive");
    const SpectrumOptions& t = c.spectrum_thresholds;
    require(t.localization > 0.0 && t.localization < 1.0, "spectrum.thresholds.localization must lie in (0, 1)");
    require(t.translational_overlap > 0.0 && t.translational_overlap <= 1.0,
            "spectrum.thresholds.translational_overlap must lie in (0, 1]");
    require(t.unstable_re > 0.0, "spectrum.thresholds.unstable_re must be positive");
    require(c.resolvent_n_points >= 16 && c.resolvent_n_points % 2 == 0,
            "resolvent.n_points must be even and at least 16");
    require(c.resolvent_epsilon != 0.0, "resolvent.epsilon must be nonzero (the kernel projection needs eps != 0)");
    require(c.im_step > 0.0 && c.im_min <= c.im_max, "resolvent imaginary range must satisfy im_min <= im_max, im_step > 0");
    for (double r : c.scaling_re)
        require(r != 0.0, "resolvent.scaling_re contains Re lambda = 0; the high-frequency 1/Re lambda scaling "
                          "precondition requires Re lambda != 0");
    require(c.rho_re != 0.0, "resolvent.rho_re must be nonzero");
    require(c.rho_im_max > 0.0, "resolvent.rho_im_max must be positive");
    require(c.dynamics_epsilon != 0.0, "dynamics.epsilon must be nonzero");
    require(c.delta >= 0.0, "dynamics.delta must be nonnegative");
    require(c.dt > 0.0, "dynamics.dt must be positive");
    require(!c.t_end || (*c.t_end > 0.0 && detail::is_multiple(*c.t_end, c.dt)),
            "dynamics.t_end must be a positive multiple of dynamics.dt");
    require(c.sample_interval > 0.0 && detail::is_multiple(c.sample_interval, c.dt),
            "dynamics.sample_interval must be a positive multiple of dynamics.dt");
    try {
        perturbation_from_string(c.perturbation);
    } catch (const std::invalid_argument& e) {
        throw UserError(std::string("config: dynamics.perturbation: ") + e.what());
    }
    require(c.scheme == "etdrk4" || c.scheme == "etd2rk", "dynamics.scheme must be etdrk4 or etd2rk");
    require(c.fit == "auto" || c.fit == "decay" || c.fit == "growth", "dynamics.fit must be auto, decay or growth");
    require(c.report_tol > 0.0, "report.tol must be positive");
}

inline RunConfig parse_config(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UserError(std::string("config: ") + e.what());
    }
    RunConfig c;
    detail::Section top(&root, "", text);

    detail::Section params = top.child("params");
    params.read("zeta", c.zeta);
    params.read("f", c.f);
    params.finish();

    detail::Section grid = top.child("grid");
    grid.read("n_points", c.n_points);
    grid.read("half_length", c.half_length);
    grid.finish();

    detail::Section branch = top.child("branch");
    branch.read("theta_choice", c.theta_choice);
    branch.read("eps_start", c.eps_start);
    branch.read("eps_end", c.eps_end);
    branch.read("step", c.eps_step);
    branch.read("newton_tol", c.newton_tol);
    branch.read("newton_max_iters", c.newton_max_iters);
    branch.finish();

    detail::Section spectrum = top.child("spectrum");
    spectrum.read("epsilons", c.spectrum_epsilons);
    spectrum.read("expansion_constants", c.expansion_constants);
    detail::Section thresholds = spectrum.child("thresholds");
    thresholds.read("localization", c.spectrum_thresholds.localization);
    thresholds.read("translational_overlap", c.spectrum_thresholds.translational_overlap);
    thresholds.read("unstable_re", c.spectrum_thresholds.unstable_re);
    thresholds.finish();
    spectrum.finish();

    detail::Section resolvent = top.child("resolvent");
    resolvent.read("n_points", c.resolvent_n_points);
    resolvent.read("epsilon", c.resolvent_epsilon);
    resolvent.read("re_values", c.re_values);
    resolvent.read("im_min", c.im_min);
    resolvent.read("im_max", c.im_max);
    resolvent.read("im_step", c.im_step);
    resolvent.read("scaling_re", c.scaling_re);
    resolvent.read("scaling_im", c.scaling_im);
    resolvent.read("rho_re", c.rho_re);
    resolvent.read("rho_im_max", c.rho_im_max);
    resolvent.read("exact_svd", c.exact_svd);
    resolvent.finish();

    detail::Section dynamics = top.child("dynamics");
    dynamics.read("epsilon", c.dynamics_epsilon);
    dynamics.read("delta", c.delta);
    dynamics.read("perturbation", c.perturbation);
    dynamics.read_optional("t_end", c.t_end);
    dynamics.read("dt", c.dt);
    dynamics.read("sample_interval", c.sample_interval);
    dynamics.read("scheme", c.scheme);
    dynamics.read("fit", c.fit);
    dynamics.finish();

    detail::Section report = top.child("report");
    report.read("tol", c.report_tol);
    report.finish();

    top.read("output_dir", c.output_dir);
    top.read("seed", c.seed);
    top.finish();
    return c;
}

inline RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw UserError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol; ///< Newton tolerance for branch/resolvent, check tolerance for report
    bool dump_fields = false;
};

inline RunConfig apply_overrides(RunConfig c, const Overrides& o, const std::string& command)
{
    if (o.out) c.output_dir = *o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.tol) {
        if (command == "report") c.report_tol = *o.tol;
        else c.newton_tol = *o.tol;
    }
    c.dump_fields = c.dump_fields || o.dump_fields;
    return c;
}

// ---------------------------------------------------------------------------
// Artifact helpers

namespace detail {

inline json stamp(const RunConfig& c)
{
    return {{"tool_version", tool_version}, {"config_hash", config_hash(c)}};
}

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline cplx complex_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw UserError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path, const std::string& producer)
{
    std::ifstream in(path);
    if (!in) throw UserError("missing artifact " + path.string() + " (run '" + producer + "' first)");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UserError("corrupt artifact " + path.string() + ": " + e.what());
    }
}

inline std::string indexed(const std::string& stem, std::size_t i, const std::string& ext)
{
    std::ostringstream os;
    os << stem << std::setw(3) << std::setfill('0') << i << ext;
    return os.str();
}

} // namespace detail

/// {grid: {n, half_length}, values: [[re, im], ...]}
inline json field_to_json(const ComplexField& u)
{
    json values = json::array();
    for (Index j = 0; j < u.size(); ++j) values.push_back(detail::complex_json(u.values[j]));
    return {{"grid", {{"n", u.grid.size()}, {"half_length", u.grid.half_length()}}}, {"values", values}};
}

inline ComplexField field_from_json(const json& j)
{
    const Grid g(j.at("grid").at("n").get<int>(), j.at("grid").at("half_length").get<double>());
    const json& values = j.at("values");
    if (Index(values.size()) != g.size()) throw UserError("field record: value count does not match the grid");
    ComplexField u(g);
    for (Index k = 0; k < g.size(); ++k) u.values[k] = detail::complex_from(values[k]);
    return u;
}

namespace detail {

inline ComplexField read_field_csv(const fs::path& path, const Grid& g)
{
    const io::Table t = io::read_csv(path);
    if (Index(t.rows.size()) != g.size()) throw UserError("field file " + path.string() + " does not match the grid");
    ComplexField u(g);
    for (Index j = 0; j < g.size(); ++j) u.values[j] = cplx(t.rows[j].at(1), t.rows[j].at(2));
    return u;
}

struct LoadedBranch {
    json doc;
    Params params;
    Grid grid;
    std::vector<BranchPoint> points;
};

inline LoadedBranch load_branch(const RunConfig& c)
{
    const fs::path dir = c.output_dir;
    json doc = read_json(dir / "branch.json", "branch");
    const Grid g(doc.at("grid").at("n_points").get<int>(), doc.at("grid").at("half_length").get<double>());
    const Params base{doc.at("params").at("zeta").get<double>(), doc.at("params").at("f").get<double>(), 0.0};
    LoadedBranch b{doc, base, g, {}};
    for (const json& p : doc.at("points")) {
        BranchPoint pt{base.with_epsilon(p.at("epsilon").get<double>()),
                       read_field_csv(dir / p.at("field").get<std::string>(), g)};
        pt.u_inf = complex_from(p.at("u_inf"));
        pt.theta_fit = p.at("theta_fit").get<double>();
        pt.correction_norm = p.at("correction_norm").get<double>();
        pt.residual_norm = p.at("residual_norm").get<double>();
        pt.newton_iters = p.at("newton_iters").get<int>();
        b.points.push_back(std::move(pt));
    }
    if (b.points.empty()) throw UserError("branch.json holds no points");
    return b;
}

/// Index of the branch point at eps; eps must match a point to 1e-9 relative.
inline std::size_t point_at(const LoadedBranch& b, double eps, const std::string& what)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < b.points.size(); ++i)
        if (std::abs(b.points[i].epsilon() - eps) < std::abs(b.points[best].epsilon() - eps)) best = i;
    if (std::abs(b.points[best].epsilon() - eps) > 1e-9 * std::abs(eps)) {
        std::ostringstream os;
        os << what << " eps = " << eps << " is not a point of the branch in branch.json";
        throw UserError(os.str());
    }
    return best;
}

/// Essential-band eigenvalue of JL at wavenumber k.
inline double band_frequency(const Params& p, cplx u_inf, double k)
{
    const double a = k * k + p.zeta - 2.0 * std::norm(u_inf), b = std::norm(u_inf);
    return std::sqrt(a * a - b * b);
}

} // namespace detail

// ---------------------------------------------------------------------------
// branch

inline int cmd_branch(const RunConfig& c, std::ostream& log)
{
    const fs::path dir = c.output_dir;
    const Params base = c.params();
    const Grid g = c.grid();
    const BifurcationAngles angles = solve_theta0(base);
    const double theta0 = c.theta_choice == "stable" ? angles.theta_stable : angles.theta_unstable;
    NewtonOptions nopt;
    nopt.tol = c.newton_tol;
    nopt.max_iters = c.newton_max_iters;

    Branch branch{base, {}};
    std::optional<json> failure;
    try {
        branch = continue_branch(base, g, theta0, c.eps_start, c.eps_end, c.eps_step, nopt);
    } catch (const ContinuationFailure& e) {
        branch = e.partial();
        failure = json{{"epsilon", e.failed_epsilon()},
                       {"last_good_epsilon", branch.points.empty() ? json(nullptr) : json(branch.points.back().epsilon())},
                       {"message", e.what()}};
    }

    json doc = detail::stamp(c);
    doc["params"] = {{"zeta", c.zeta}, {"f", c.f}};
    doc["grid"] = {{"n_points", c.n_points}, {"half_length", c.half_length}};
    doc["theta_choice"] = c.theta_choice;
    doc["theta0"] = theta0;
    doc["status"] = failure ? "partial" : "complete";
    json points = json::array();
    for (std::size_t i = 0; i < branch.points.size(); ++i) {
        const BranchPoint& pt = branch.points[i];
        const std::string file = "fields/" + detail::indexed("point_", i, ".csv");
        io::write_field_csv(dir / file, pt.field);
        points.push_back({{"index", i},
                          {"epsilon", pt.epsilon()},
                          {"theta_fit", pt.theta_fit},
                          {"u_inf", detail::complex_json(pt.u_inf)},
                          {"u_inf_leading", detail::complex_json(-I_unit * c.f * pt.epsilon() / c.zeta)},
                          {"correction_norm", pt.correction_norm},
                          {"residual_norm", pt.residual_norm},
                          {"newton_iters", pt.newton_iters},
                          {"field", file}});
    }
    doc["points"] = points;
    if (failure) doc["failure"] = *failure;
    detail::write_json(dir / "branch.json", doc);

    log << "branch: " << branch.points.size() << " points written to " << (dir / "branch.json").string() << '\n';
    if (failure) {
        log << "branch: " << (*failure)["message"].get<std::string>() << '\n';
        return exit_numerical_failure;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// spectrum

inline int cmd_spectrum(const RunConfig& c, std::ostream& log)
{
    const fs::path dir = c.output_dir;
    const detail::LoadedBranch b = detail::load_branch(c);
    std::vector<std::size_t> selected;
    if (c.spectrum_epsilons.empty()) {
        for (std::size_t i = 0; i < b.points.size(); ++i) selected.push_back(i);
    } else {
        for (double e : c.spectrum_epsilons) selected.push_back(detail::point_at(b, e, "spectrum"));
    }

    json krein = detail::stamp(c), verdicts = detail::stamp(c);
    krein["points"] = json::array();
    verdicts["theta_choice"] = b.doc.at("theta_choice");
    verdicts["points"] = json::array();
    bool violation = false;

    if (c.expansion_constants) {
        const ExpansionConstants ec = verify_expansion_constants(b.params, b.doc.at("theta0").get<double>(), b.grid);
        verdicts["expansion_constants"] = {{"c1", ec.c1},
                                           {"c1_closed", ec.c1_closed},
                                           {"c2", ec.c2},
                                           {"c2_closed", ec.c2_closed},
                                           {"zeta_trick_residual", ec.zeta_trick_residual},
                                           {"kernel_solve_condition", ec.kernel_solve_condition}};
    }

    for (std::size_t i : selected) {
        const BranchPoint& pt = b.points[i];
        const double eps = pt.epsilon();
        const OperatorPair ops = assemble(pt);
        const SpectrumReport r = dense_spectrum(ops, c.spectrum_thresholds);
        const std::string file = detail::indexed("spectrum_", i, ".csv");
        io::write_spectrum_csv(dir / file, r);

        // eigenvalues of JL (unshifted) by class
        json translational = json::array(), rotational = json::array();
        double band_min = std::numeric_limits<double>::infinity();
        Index top = 0;
        for (Index k = 0; k < r.eigenvalues.size(); ++k) {
            const cplx mu = r.eigenvalues[k] + eps;
            if (r.eigenvalues[k].real() > r.eigenvalues[top].real()) top = k;
            switch (r.classes[k]) {
            case EigenClass::translational_zero:
            case EigenClass::translational_negative: translational.push_back(detail::complex_json(mu)); break;
            case EigenClass::rotational_pair: rotational.push_back(detail::complex_json(mu)); break;
            case EigenClass::essential_band: band_min = std::min(band_min, std::abs(mu.imag())); break;
            default: break;
            }
        }
        json v = {{"index", i},
                  {"epsilon", eps},
                  {"verdict", to_string(r.verdict)},
                  {"spectrum_file", file},
                  {"theta0", r.theta0},
                  {"zeta_eps", r.zeta_eps},
                  {"band_min_abs_im", band_min},
                  {"band_spacing", detail::band_frequency(pt.params, pt.u_inf, std::numbers::pi / b.grid.half_length()) -
                                       r.zeta_eps},
                  {"translational", translational},
                  {"rotational", rotational},
                  {"predicted_translational", json::array({r.small_eigs_predicted[0].real(), r.small_eigs_predicted[1].real()})},
                  {"predicted_rotational", detail::complex_json(r.small_eigs_predicted[2])},
                  {"max_re_generator", r.eigenvalues[top].real()}};
        if (r.verdict == Verdict::unstable_eigenvalue) v["lambda_plus"] = detail::complex_json(r.eigenvalues[top]);
        verdicts["points"].push_back(v);

        json k = {{"index", i}, {"epsilon", eps}};
        if (eps <= 0.0) {
            k["status"] = "not_applicable";
            k["message"] = "the counting formula needs eps > 0 (the essential band crosses the imaginary axis)";
        } else {
            try {
                const KreinReport kr = krein_audit(to_real_form(ops, r.theta0), r);
                k["status"] = "ok";
                k["n_L"] = kr.n_L;
                k["k_r"] = kr.k_r;
                k["k_i_minus"] = kr.k_i_minus;
                k["k_c"] = kr.k_c;
                k["balanced"] = kr.balanced();
                json signs = json::array();
                for (const auto& [mu, gram] : kr.per_eigenvalue_signs)
                    signs.push_back({{"re", mu.real()}, {"im", mu.imag()}, {"gram", gram}});
                k["signatures"] = signs;
            } catch (const CountingFormulaViolation& e) {
                violation = true;
                k["status"] = "violation";
                k["message"] = e.what();
            }
        }
        krein["points"].push_back(k);
        log << "spectrum: eps = " << eps << "  " << to_string(r.verdict) << '\n';
    }
    detail::write_json(dir / "verdicts.json", verdicts);
    detail::write_json(dir / "krein.json", krein);
    return violation ? exit_numerical_failure : exit_ok;
}

// ---------------------------------------------------------------------------
// resolvent

inline int cmd_resolvent(const RunConfig& c, std::ostream& log)
{
    const fs::path dir = c.output_dir;
    const detail::LoadedBranch b = detail::load_branch(c);
    const BranchPoint& fine = b.points[detail::point_at(b, c.resolvent_epsilon, "resolvent")];

    // Resample to the scan grid and re-converge there.
    const Grid g(c.resolvent_n_points, b.grid.half_length());
    NewtonOptions nopt;
    nopt.tol = c.newton_tol;
    nopt.max_iters = c.newton_max_iters;
    const BranchPoint pt = newton_correct(resample(fine.field, g), fine.params, nopt);
    if (c.dump_fields) io::write_field_csv(dir / "fields/resolvent_point.csv", pt.field);

    const OperatorPair ops = assemble(pt);
    const VectorXcd evals = general_eigen(ops.generator(), false).values;
    const SpectralProjection proj = spectral_projection(ops, evals);
    ResolventOptions ropt;
    ropt.exact_svd = c.exact_svd;

    const BlockSystem sys = BlockSystem::from_point(pt);
    json rows = json::array(), doubled = json::array();
    double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
    for (const ScalingRow& row : high_frequency_scaling_check(sys, c.scaling_re, c.scaling_im)) {
        rows.push_back({{"lambda_r", row.lambda_r}, {"lambda_i", c.scaling_im}, {"norm", row.norm}, {"product", row.product}});
        pmin = std::min(pmin, row.product);
        pmax = std::max(pmax, row.product);
    }
    for (const ScalingRow& row : high_frequency_scaling_check(sys, c.scaling_re, 2.0 * c.scaling_im))
        doubled.push_back(
            {{"lambda_r", row.lambda_r}, {"lambda_i", 2.0 * c.scaling_im}, {"norm", row.norm}, {"product", row.product}});
    const double rho = compute_rho(sys, c.rho_re, c.rho_im_max);

    std::vector<double> ims;
    const int count = int(std::floor((c.im_max - c.im_min) / c.im_step + 1e-9));
    for (int i = 0; i <= count; ++i) ims.push_back(c.im_min + i * c.im_step);
    const ResolventScan scan = scan_halfplane(ops, proj, c.re_values, ims, ropt, evals);
    io::write_scan_csv(dir / "scan.csv", scan);

    json excluded = json::array();
    for (const auto& [lambda, why] : scan.excluded)
        excluded.push_back({{"re", lambda.real()}, {"im", lambda.imag()}, {"reason", why}});
    int counts[3] = {0, 0, 0};
    for (ResolventRegion r : scan.regions) ++counts[int(r)];

    json doc = detail::stamp(c);
    doc["epsilon"] = pt.epsilon();
    doc["n_points"] = c.resolvent_n_points;
    doc["newton_residual"] = pt.residual_norm;
    doc["projection_norm"] = Eigen::BDCSVD<MatrixXcd>(proj.P0).singularValues()[0];
    doc["gamma"] = sys.bound_gamma;
    doc["rho"] = {{"lambda_r", c.rho_re}, {"value", std::isfinite(rho) ? json(rho) : json(nullptr)}};
    doc["rows"] = rows;
    doc["product_spread"] = pmax / pmin;
    doc["doubled_rows"] = doubled;
    doc["scan"] = {{"file", "scan.csv"},
                   {"samples", scan.norms.size()},
                   {"excluded", excluded},
                   {"sup_norm", scan.sup_norm},
                   {"sup_at", detail::complex_json(scan.sup_at)},
                   {"hille_yosida_re", scan.scan_spec.hille_yosida_re},
                   {"high_frequency_im", scan.scan_spec.high_frequency_im},
                   {"region_counts",
                    {{"hille_yosida", counts[0]}, {"high_frequency", counts[1]}, {"compact", counts[2]}}}};
    detail::write_json(dir / "scaling.json", doc);
    log << "resolvent: " << scan.norms.size() << " samples, " << scan.excluded.size() << " excluded, sup "
        << scan.sup_norm << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// evolve

inline int cmd_evolve(const RunConfig& c, std::ostream& log)
{
    const fs::path dir = c.output_dir;
    const detail::LoadedBranch b = detail::load_branch(c);
    const BranchPoint& pt = b.points[detail::point_at(b, c.dynamics_epsilon, "dynamics")];
    const double eps = pt.epsilon();
    const double t_end = c.t_end ? *c.t_end : c.dt * std::round(5.0 / (std::abs(eps) * c.dt));

    ExperimentOptions opt;
    opt.dt = c.dt;
    opt.sample_interval = c.sample_interval;
    opt.scheme = c.scheme == "etd2rk" ? Scheme::etd2rk : Scheme::etdrk4;
    const bool growth = c.fit == "growth" || (c.fit == "auto" && b.doc.at("theta_choice") == "unstable");
    opt.rate = growth ? RateKind::growth : RateKind::decay;

    const ComplexField dv = make_perturbation(perturbation_from_string(c.perturbation), pt, c.delta, c.seed);
    const EvolutionTrace trace = stability_experiment(pt, dv, t_end, opt);
    io::write_trace_csv(dir / "trace.csv", trace);
    if (c.dump_fields) io::write_field_csv(dir / "fields/final_state.csv", trace.final_state);

    auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json doc = detail::stamp(c);
    doc["epsilon"] = eps;
    doc["theta_choice"] = b.doc.at("theta_choice");
    doc["perturbation"] = c.perturbation;
    doc["delta"] = c.delta;
    doc["seed"] = c.seed;
    doc["t_end"] = t_end;
    doc["dt"] = c.dt;
    doc["scheme"] = c.scheme;
    doc["rate_kind"] = growth ? "growth" : "decay";
    doc["fitted_rate"] = finite(trace.fitted_rate);
    doc["log_slope"] = finite(trace.log_slope);
    doc["fit_window"] = json::array({trace.fit_window.first, trace.fit_window.second});
    doc["fit_samples"] = trace.fit_samples;
    doc["initial_distance"] = trace.orbital_distances.front();
    doc["final_distance"] = trace.orbital_distances.back();
    doc["max_distance"] = *std::max_element(trace.orbital_distances.begin(), trace.orbital_distances.end());
    doc["sigma_infinity"] = trace.sigma_infinity();
    doc["trace_file"] = "trace.csv";
    detail::write_json(dir / "fit.json", doc);
    log << "evolve: " << (growth ? "growth" : "decay") << " rate " << trace.fitted_rate << ", final distance "
        << trace.orbital_distances.back() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// report

namespace detail {

struct CheckList {
    json items = json::array();
    bool all = true;

    void add(const std::string& name, bool passed, const json& value, const json& bound)
    {
        items.push_back({{"name", name}, {"passed", passed}, {"value", value}, {"bound", bound}});
        all = all && passed;
    }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace detail

inline int cmd_report(const RunConfig& c, std::ostream& log)
{
    const fs::path dir = c.output_dir;
    const json branch = detail::read_json(dir / "branch.json", "branch");
    const json verdicts = detail::read_json(dir / "verdicts.json", "spectrum");
    const json krein = detail::read_json(dir / "krein.json", "spectrum");
    const json scaling = detail::read_json(dir / "scaling.json", "resolvent");
    const json fit = detail::read_json(dir / "fit.json", "evolve");

    detail::CheckList checks;
    const double zeta = branch.at("params").at("zeta"), f = branch.at("params").at("f");
    const double pi = std::numbers::pi;
    const double theta0 = branch.at("theta0");
    const bool stable = branch.at("theta_choice") == "stable";

    // closed forms, held to the --tol tolerance
    const double r1 = std::abs(pi * f * std::cos(theta0) - 2.0 * std::sqrt(2.0 * zeta));
    checks.add("theta0_residual", r1 <= c.report_tol, r1, c.report_tol);
    const double r2 = std::abs(4.0 * std::sqrt(zeta) - std::sqrt(2.0) * pi * f * std::cos(theta0));
    checks.add("reduced_function_residual", r2 <= c.report_tol, r2, c.report_tol);

    // background expansion
    double worst_bg = 0.0;
    bool bg_ok = true;
    for (const json& p : branch.at("points")) {
        const double eps = p.at("epsilon");
        const double e = std::abs(detail::complex_from(p.at("u_inf")) - detail::complex_from(p.at("u_inf_leading"))) /
                         std::abs(detail::complex_from(p.at("u_inf_leading")));
        worst_bg = std::max(worst_bg, e / std::abs(eps));
        bg_ok = bg_ok && e <= 5.0 * std::abs(eps);
    }
    checks.add("u_inf_expansion", bg_ok && branch.at("status") == "complete", worst_bg, "relative error <= 5 eps");

    // small eigenvalues and band edge
    bool trans_ok = true, rot_ok = true, edge_ok = true, verdict_ok = true;
    double worst_trans = 0.0, worst_rot = 0.0, worst_edge = 0.0;
    std::vector<std::pair<double, double>> gaps;
    for (const json& v : verdicts.at("points")) {
        const double eps = v.at("epsilon");
        const std::string expected = eps < 0.0 ? "unstable_essential" : stable ? "stable" : "unstable_eigenvalue";
        verdict_ok = verdict_ok && v.at("verdict") == expected;
        const double edge_dev = std::abs(v.at("band_min_abs_im").get<double>() - v.at("zeta_eps").get<double>()) /
                                v.at("band_spacing").get<double>();
        worst_edge = std::max(worst_edge, edge_dev);
        edge_ok = edge_ok && edge_dev <= 2.0;
        gaps.emplace_back(std::abs(eps), zeta - v.at("zeta_eps").get<double>());
        if (eps <= 0.0) continue;
        for (const json& t : v.at("translational")) {
            const double d = std::min(std::abs(detail::complex_from(t) - eps), std::abs(detail::complex_from(t) + eps));
            worst_trans = std::max(worst_trans, d);
            trans_ok = trans_ok && d <= 1e-3;
        }
        trans_ok = trans_ok && v.at("translational").size() == 2;
        const double predicted = std::abs(detail::complex_from(v.at("predicted_rotational")));
        double observed = 0.0;
        if (stable) {
            rot_ok = rot_ok && v.at("rotational").size() == 2;
            for (const json& r : v.at("rotational")) observed = std::max(observed, std::abs(detail::complex_from(r)));
        } else if (v.contains("lambda_plus")) {
            observed = detail::complex_from(v.at("lambda_plus")).real() + eps;
        }
        worst_rot = std::max(worst_rot, detail::rel(observed, predicted));
        rot_ok = rot_ok && detail::rel(observed, predicted) <= 0.10;
    }
    checks.add("spectrum_verdicts", verdict_ok, verdicts.at("points").size(),
               stable ? "stable for eps > 0" : "unstable_eigenvalue for eps > 0");
    checks.add("translational_pair", trans_ok, worst_trans, 1e-3);
    checks.add("rotational_asymptotics", rot_ok, worst_rot, 0.10);
    checks.add("band_edge", edge_ok, worst_edge, "<= 2 band spacings");

    // |zeta - zeta_eps| ~ eps^2 on any pair of audited points with eps ratio 2
    double worst_ratio = 4.0;
    bool ratio_ok = true, any_ratio = false;
    for (const auto& [e1, g1] : gaps)
        for (const auto& [e2, g2] : gaps)
            if (std::abs(e2 - 2.0 * e1) < 1e-12 * e2) {
                const double ratio = g2 / g1;
                any_ratio = true;
                if (std::abs(ratio - 4.0) > std::abs(worst_ratio - 4.0)) worst_ratio = ratio;
                ratio_ok = ratio_ok && ratio >= 3.2 && ratio <= 4.8;
            }
    checks.add("zeta_eps_gap_scaling", ratio_ok, any_ratio ? json(worst_ratio) : json(nullptr), "ratio in [3.2, 4.8]");

    // Krein counts
    bool krein_ok = true;
    int audited = 0;
    for (const json& k : krein.at("points")) {
        if (k.at("status") == "not_applicable") continue;
        ++audited;
        if (k.at("status") != "ok" || !k.at("balanced").get<bool>()) {
            krein_ok = false;
            continue;
        }
        if (stable)
            krein_ok = krein_ok && k.at("n_L") == 3 && k.at("k_r") == 1 && k.at("k_i_minus") == 2 && k.at("k_c") == 0;
    }
    checks.add("krein_counts", krein_ok, audited, stable ? "n_L = 3, (k_r, k_i-, k_c) = (1, 2, 0)" : "balanced");

    // resolvent
    const json& scan = scaling.at("scan");
    checks.add("resolvent_scan_finite", scan.at("excluded").empty() && scan.at("sup_norm").get<double>() > 0.0,
               scan.at("sup_norm"), "no excluded samples");
    checks.add("high_frequency_scaling", scaling.at("product_spread").get<double>() <= 3.0, scaling.at("product_spread"),
               3.0);

    // dynamics
    const double fe = fit.at("epsilon");
    if (fit.at("rate_kind") == "decay") {
        const double eta = fit.at("fitted_rate").is_null() ? 0.0 : fit.at("fitted_rate").get<double>();
        checks.add("decay_rate", eta >= 0.3 * fe && eta <= 3.0 * fe, fit.at("fitted_rate"), "[0.3 eps, 3 eps]");
        const double fin = fit.at("final_distance"), delta = fit.at("delta");
        checks.add("final_distance", fin < 0.1 * delta, fin, 0.1 * delta);
    } else {
        json bound = nullptr;
        bool ok = false;
        for (const json& v : verdicts.at("points"))
            if (std::abs(v.at("epsilon").get<double>() - fe) <= 1e-12 && v.contains("lambda_plus")) {
                const double lp = detail::complex_from(v.at("lambda_plus")).real();
                bound = lp;
                ok = !fit.at("fitted_rate").is_null() && detail::rel(fit.at("fitted_rate").get<double>(), lp) <= 0.15;
            }
        checks.add("growth_rate", ok, fit.at("fitted_rate"), bound);
    }

    json doc = detail::stamp(c);
    doc["tol"] = c.report_tol;
    doc["artifacts"] = {{"branch", branch.at("config_hash")},
                        {"verdicts", verdicts.at("config_hash")},
                        {"krein", krein.at("config_hash")},
                        {"scaling", scaling.at("config_hash")},
                        {"fit", fit.at("config_hash")}};
    doc["checks"] = checks.items;
    doc["all_passed"] = checks.all;
    detail::write_json(dir / "summary.json", doc);
    log << "report: " << (checks.all ? "all checks passed" : "some checks failed") << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------

inline int run_command(const std::string& command, const std::optional<std::string>& config_path,
                       const Overrides& overrides, std::ostream& log, std::ostream& err)
{
    try {
        RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
        cfg = apply_overrides(cfg, overrides, command);
        validate(cfg);
        if (command == "branch") return cmd_branch(cfg, log);
        if (command == "spectrum") return cmd_spectrum(cfg, log);
        if (command == "resolvent") return cmd_resolvent(cfg, log);
        if (command == "evolve") return cmd_evolve(cfg, log);
        if (command == "report") return cmd_report(cfg, log);
        throw UserError("unknown command '" + command + "'");
    } catch (const UserError& e) {
        err << "error: " << e.what() << '\n';
        return exit_user_error;
    } catch (const json::exception& e) {
        err << "error: malformed artifact: " << e.what() << '\n';
        return exit_user_error;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical_failure;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_user_error;
    }
}

} // namespace lle::cli

#endif // LLE_TOOLS_COMMANDS_HPP
