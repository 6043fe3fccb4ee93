// nratio: command-line front end for the normal-ratio library.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure or
// failed validation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "nratio/io.hpp"
#include "nratio/nratio.hpp"

using namespace nratio;
using io::format_error;
using io::format_number;
using io::InputError;

namespace {

constexpr int exit_input = 2;
constexpr int exit_numeric = 3;

struct Globals {
    std::string model_path;
    std::uint64_t seed = 1;
    std::string format = "csv";
    std::string out;
};

unsigned thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

NormalRatioModel require_model(const Globals& g) {
    if (g.model_path.empty())
        throw InputError("--model is required for this command");
    return io::load_model(g.model_path);
}

Vector parse_arity(const std::string& text, const std::string& what, std::size_t want) {
    Vector v = io::parse_list(text, what);
    if (v.size() != want)
        throw InputError(what + ": expected " + std::to_string(want) + " comma-separated values, got " +
                         std::to_string(v.size()));
    return v;
}

/// Standard output, or the --out file.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path.empty())
            return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_)
            throw InputError("cannot write to '" + path + "'");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void finish() {
        stream().flush();
        if (!stream())
            throw InputError("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

bool use_color() { return std::getenv("NO_COLOR") == nullptr && isatty(STDOUT_FILENO); }

std::string verdict(bool pass, bool color) {
    if (!color)
        return pass ? "pass" : "FAIL";
    return pass ? "\x1b[32mpass\x1b[0m" : "\x1b[31mFAIL\x1b[0m";
}

std::string json_array(const Vector& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format_number(v[i]);
    return s + "]";
}

// density ------------------------------------------------------------------

int cmd_density(const Globals& g, const std::string& point, bool log_scale) {
    const auto model = require_model(g);
    const RatioPoint y(parse_arity(point, "--point", model.ratio_dim()));
    std::cout << format_number(log_scale ? log_density(model, y) : density(model, y)) << '\n';
    return 0;
}

// density-grid -------------------------------------------------------------

int cmd_density_grid(const Globals& g, const std::string& lo_text, const std::string& hi_text, std::size_t steps) {
    const auto model = require_model(g);
    const std::size_t q = model.ratio_dim();
    if (q != 1 && q != 2)
        throw InputError("density-grid supports models with p = 2 or p = 3, this model has p = " +
                         std::to_string(model.p()));
    if (steps < 2)
        throw InputError("--steps must be at least 2");
    const Vector lo = parse_arity(lo_text, "--lo", q), hi = parse_arity(hi_text, "--hi", q);
    for (std::size_t d = 0; d < q; ++d)
        if (!(lo[d] < hi[d]))
            throw InputError("--lo must be below --hi in every coordinate");

    // Endpoint-weighted nodes so symmetric windows give exactly mirrored points.
    auto node = [&](std::size_t d, std::size_t i) {
        const double n = static_cast<double>(steps - 1);
        return (lo[d] * static_cast<double>(steps - 1 - i) + hi[d] * static_cast<double>(i)) / n;
    };
    std::vector<RatioPoint> points;
    if (q == 1) {
        for (std::size_t i = 0; i < steps; ++i)
            points.emplace_back(Vector{node(0, i)});
    } else {
        for (std::size_t i = 0; i < steps; ++i)
            for (std::size_t j = 0; j < steps; ++j)
                points.emplace_back(Vector{node(0, i), node(1, j)});
    }
    const auto logs = log_density_batch(model, points, thread_count());

    Sink sink(g.out);
    auto& os = sink.stream();
    if (g.format == "json") {
        os << "[";
        for (std::size_t k = 0; k < points.size(); ++k)
            os << (k ? ",\n " : "\n ") << "{\"y\":" << json_array(points[k].y)
               << ",\"density\":" << format_number(std::exp(logs[k])) << "}";
        os << "\n]\n";
    } else {
        os << (q == 1 ? "y1,density\n" : "y1,y2,density\n");
        for (std::size_t k = 0; k < points.size(); ++k) {
            for (double v : points[k].y)
                os << format_number(v) << ',';
            os << format_number(std::exp(logs[k])) << '\n';
        }
    }
    sink.finish();
    return 0;
}

// cdf ----------------------------------------------------------------------

int cmd_cdf(const Globals& g, const std::string& t_text, const std::string& method, std::size_t n) {
    const auto model = require_model(g);
    const Vector t = parse_arity(t_text, "--t", model.ratio_dim());
    const double diag = validity_diagnostic(model);
    QmcOptions opts;
    opts.seed = g.seed;

    double value = 0.0, error = 0.0;
    std::string label = method;
    if (method == "approx" || method == "exact") {
        const auto r = method == "approx" ? approx_cdf(model, t, opts) : exact_cdf(model, t, opts);
        value = r.value;
        error = r.error_estimate;
        label += std::string("/") + to_string(r.method);
        if (method == "approx" && diag > 1e-3)
            std::cerr << "warning: P(x1 <= 0) = " << format_error(diag)
                      << " exceeds 1e-3; the approximation may be off by up to that much\n";
    } else if (method == "mc") {
        if (n == 0)
            throw InputError("--n must be at least 1");
        const auto batch = sample_ratios(model, n, g.seed, thread_count());
        value = empirical_cdf(batch, t);
        error = empirical_cdf_stderr(value, batch.n);
    } else {
        throw InputError("--method must be approx, exact or mc");
    }

    if (g.format == "json") {
        std::cout << "{\"value\":" << format_number(value) << ",\"error_estimate\":" << format_error(error)
                  << ",\"method\":\"" << label << "\",\"validity_diagnostic\":" << format_error(diag) << "}\n";
    } else {
        std::cout << format_number(value) << " +/- " << format_error(error) << '\n';
    }
    return 0;
}

// sample -------------------------------------------------------------------

int cmd_sample(const Globals& g, long long n) {
    const auto model = require_model(g);
    if (n < 1)
        throw InputError("--n must be at least 1");
    const auto batch = sample_ratios(model, static_cast<std::size_t>(n), g.seed, thread_count());
    if (batch.redraws > 0)
        std::cerr << "dropped " << batch.redraws << " draws with x1 == 0\n";

    Sink sink(g.out);
    auto& os = sink.stream();
    const std::size_t q = batch.ratios.cols;
    if (g.format == "json") {
        os << "[";
        for (std::size_t r = 0; r < batch.ratios.rows; ++r) {
            const auto row = batch.ratios.row(r);
            os << (r ? ",\n " : "\n ") << json_array(Vector(row.begin(), row.end()));
        }
        os << "\n]\n";
    } else {
        for (std::size_t j = 0; j < q; ++j)
            os << (j ? ",y" : "y") << j + 1;
        os << '\n';
        for (std::size_t r = 0; r < batch.ratios.rows; ++r) {
            const auto row = batch.ratios.row(r);
            for (std::size_t j = 0; j < q; ++j)
                os << (j ? "," : "") << format_number(row[j]);
            os << '\n';
        }
    }
    sink.finish();
    return 0;
}

// validate -----------------------------------------------------------------

struct Check {
    std::size_t index;
    std::size_t p;
    std::string kind;
    Vector y;
    double value;
    double reference;
    double rel_error;
    bool pass;
};

/// Central models: Y is multivariate Cauchy, g = Gamma(p/2) / (pi^{p/2} |S|^{1/2} M^{p/2}).
double central_reference(const NormalRatioModel& m, const RatioPoint& y) {
    const double half_p = 0.5 * static_cast<double>(m.p());
    const double log_g = std::lgamma(half_p) - half_p * std::log(std::numbers::pi) - 0.5 * m.sigma().log_det() -
                         half_p * std::log(quad_form(m.sigma(), y.ray()));
    return std::exp(log_g);
}

bool is_central(const NormalRatioModel& m) {
    return std::all_of(m.mu().begin(), m.mu().end(), [](double v) { return v == 0.0; });
}

NormalRatioModel random_model(Xoshiro256& rng, std::size_t p) {
    Matrix a(p, p);
    for (auto& v : a.data)
        v = 2.0 * rng.uniform() - 1.0;
    Matrix s(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double t = 0.0;
            for (std::size_t k = 0; k < p; ++k)
                t += a(i, k) * a(j, k);
            s(i, j) = t + (i == j ? 0.3 : 0.0);
        }
    Vector mu(p);
    for (auto& v : mu)
        v = 4.0 * rng.uniform() - 2.0;
    return NormalRatioModel(mu, s);
}

int cmd_validate(const Globals& g, std::size_t cases, double tol, bool json) {
    std::optional<NormalRatioModel> fixed;
    if (!g.model_path.empty())
        fixed = io::load_model(g.model_path);
    if (tol < 0.0 || !std::isfinite(tol))
        throw InputError("--tol must be a finite nonnegative number");

    Xoshiro256 rng(g.seed);
    std::vector<Check> checks;
    for (std::size_t c = 0; c < cases; ++c) {
        const NormalRatioModel model = fixed ? *fixed : random_model(rng, 2 + c % 4);
        Vector yv(model.ratio_dim());
        for (std::size_t i = 0; i < yv.size(); ++i) {
            // Points spread around the ratio of means, scaled like the data.
            const double center = model.mu()[i + 1] / std::max(std::abs(model.mu()[0]), 1.0);
            yv[i] = center + 3.0 * (2.0 * rng.uniform() - 1.0);
        }
        const RatioPoint y(yv);
        const double value = density(model, y);
        auto add = [&](const std::string& kind, double reference) {
            const double err = std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
            checks.push_back({c, model.p(), kind, yv, value, reference, err, err <= tol});
        };
        add("quadrature", density_by_quadrature(model, y, 1e-10).value);
        if (is_central(model))
            add("cauchy", central_reference(model, y));
    }

    // One Monte Carlo cross-check of the CDF when a model file is given.
    struct McCheck {
        double exact, empirical, stderr_, z;
        bool pass;
    };
    std::optional<McCheck> mc;
    if (fixed) {
        Vector t(fixed->ratio_dim());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = fixed->mu()[i + 1] / std::max(std::abs(fixed->mu()[0]), 1.0);
        QmcOptions opts;
        opts.seed = g.seed;
        const auto e = exact_cdf(*fixed, t, opts);
        const auto batch = sample_ratios(*fixed, 200000, g.seed, thread_count());
        const double q = empirical_cdf(batch, t);
        const double se = empirical_cdf_stderr(q, batch.n) + e.error_estimate / 3.0;
        const double z = std::abs(e.value - q) / std::max(se, 1e-300);
        mc = McCheck{e.value, q, se, z, z <= 4.0};
    }

    double max_err = 0.0;
    bool all_pass = !mc || mc->pass;
    for (const auto& ch : checks) {
        max_err = std::max(max_err, ch.rel_error);
        all_pass = all_pass && ch.pass;
    }

    if (json) {
        std::cout << "{\"tol\":" << format_error(tol) << ",\"max_rel_error\":" << format_error(max_err)
                  << ",\"pass\":" << (all_pass ? "true" : "false") << ",\"checks\":[";
        for (std::size_t k = 0; k < checks.size(); ++k) {
            const auto& ch = checks[k];
            std::cout << (k ? ",\n " : "\n ") << "{\"case\":" << ch.index << ",\"p\":" << ch.p << ",\"check\":\""
                      << ch.kind << "\",\"y\":" << json_array(ch.y) << ",\"density\":" << format_number(ch.value)
                      << ",\"reference\":" << format_number(ch.reference)
                      << ",\"rel_error\":" << format_error(ch.rel_error)
                      << ",\"pass\":" << (ch.pass ? "true" : "false") << "}";
        }
        std::cout << "\n]";
        if (mc)
            std::cout << ",\"mc\":{\"exact\":" << format_number(mc->exact) << ",\"empirical\":"
                      << format_number(mc->empirical) << ",\"standard_errors\":" << format_error(mc->z)
                      << ",\"pass\":" << (mc->pass ? "true" : "false") << "}";
        std::cout << "}\n";
    } else {
        const bool color = use_color();
        std::cout << "case  p  check        rel_error  result\n";
        for (const auto& ch : checks) {
            char line[96];
            std::snprintf(line, sizeof line, "%4zu  %zu  %-10s  ", ch.index, ch.p, ch.kind.c_str());
            std::cout << line << format_error(ch.rel_error) << "  " << verdict(ch.pass, color) << '\n';
        }
        if (mc)
            std::cout << "mc cdf check: exact " << format_number(mc->exact) << ", empirical "
                      << format_number(mc->empirical) << ", " << format_error(mc->z) << " standard errors  "
                      << verdict(mc->pass, color) << '\n';
        std::cout << "max relative error " << format_error(max_err) << " (tol " << format_error(tol)
                  << "): " << verdict(all_pass, color) << '\n';
    }
    return all_pass ? 0 : exit_numeric;
}

// model-info ---------------------------------------------------------------

int cmd_model_info(const Globals& g) {
    const auto model = require_model(g);
    const double diag = validity_diagnostic(model);
    if (g.format == "json") {
        std::cout << "{\"p\":" << model.p() << ",\"model\":" << io::model_to_json(model)
                  << ",\"log_det_sigma\":" << format_number(model.sigma().log_det())
                  << ",\"validity_diagnostic\":" << format_number(diag) << "}\n";
        return 0;
    }
    std::cout << "p: " << model.p() << " (ratio dimension " << model.ratio_dim() << ")\n";
    std::cout << "mu: " << json_array(model.mu()) << '\n';
    std::cout << "sigma:\n";
    for (std::size_t i = 0; i < model.p(); ++i) {
        const auto r = model.sigma().entries().row(i);
        std::cout << "  " << json_array(Vector(r.begin(), r.end())) << '\n';
    }
    std::cout << "log det sigma: " << format_number(model.sigma().log_det()) << '\n';
    std::cout << "P(x1 <= 0): " << format_number(diag) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate normal-ratio distribution: densities, CDFs and sampling"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--model", g.model_path, "JSON model file with keys mu and sigma");
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--out", g.out, "output file (default: standard output)");

    std::string point;
    bool log_scale = false;
    auto* density_cmd = app.add_subcommand("density", "density at one point");
    density_cmd->add_option("--point", point, "comma-separated ratio coordinates")->required();
    density_cmd->add_flag("--log", log_scale, "print the natural log of the density");

    std::string lo, hi;
    std::size_t steps = 101;
    auto* grid_cmd = app.add_subcommand("density-grid", "density on a regular 1-D or 2-D grid");
    grid_cmd->add_option("--lo", lo, "lower corner")->required();
    grid_cmd->add_option("--hi", hi, "upper corner")->required();
    grid_cmd->add_option("--steps", steps, "grid points per dimension")->capture_default_str();

    std::string t, method = "exact";
    std::size_t mc_n = 1000000;
    auto* cdf_cmd = app.add_subcommand("cdf", "P(Y <= t)");
    cdf_cmd->add_option("--t", t, "comma-separated threshold")->required();
    cdf_cmd->add_option("--method", method, "approx, exact or mc")->capture_default_str();
    cdf_cmd->add_option("--n", mc_n, "sample size for --method mc")->capture_default_str();

    long long sample_n = 0;
    auto* sample_cmd = app.add_subcommand("sample", "draw ratio samples");
    sample_cmd->add_option("--n", sample_n, "number of draws")->required();

    std::size_t cases = 200;
    double tol = 1e-8;
    bool json = false;
    auto* validate_cmd = app.add_subcommand("validate", "closed form against quadrature and Monte Carlo");
    validate_cmd->add_option("--cases", cases, "number of test points")->capture_default_str();
    validate_cmd->add_option("--tol", tol, "relative error tolerance")->capture_default_str();
    validate_cmd->add_flag("--json", json, "machine-readable report");

    auto* info_cmd = app.add_subcommand("model-info", "summarize a model file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (*density_cmd)
            return cmd_density(g, point, log_scale);
        if (*grid_cmd)
            return cmd_density_grid(g, lo, hi, steps);
        if (*cdf_cmd)
            return cmd_cdf(g, t, method, mc_n);
        if (*sample_cmd)
            return cmd_sample(g, sample_n);
        if (*validate_cmd)
            return cmd_validate(g, cases, tol, json);
        if (*info_cmd)
            return cmd_model_info(g);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const NonFinite& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numeric;
    }
    return exit_input;
}
