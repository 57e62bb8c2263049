#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/rgbsde.hpp"
#include "sublin/scenarios.hpp"

namespace sublin::cli {

/// Raised for malformed or inconsistent configuration files.
class ConfigError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

struct BandConfig {
    double sigma_low = 0.5;
    double sigma_high = 1.0;
};

struct LatticeConfig {
    double horizon = 1.0;
    int n_steps = 100;
    double cfl_number = 0.5;
    double coverage = 6.0;
};

struct GeneratorConfig {
    std::string kind = "zero";  // zero | discount | constant | hlog_abs
    double rate = 0.05;
    double value = 0.0;
    double beta = 3.0;
    double z_coeff = 0.0;
    double g_value = 0.0;
};

struct PayoffConfig {
    std::string kind = "square";  // put | square | tent | exp | constant | linear | none
    double value = 0.0;
    double scale = 0.5;
    double slope = 1.0;
    double shift = 0.0;
};

struct SolveConfig {
    Method method = Method::picard;
    double stop_tol = 1e-6;
    int max_iter = 50;
    std::vector<double> schedule = default_penalty_schedule();
    double final_gap_factor = 1e-2;
    double alpha = 2.0;
};

struct StudyConfig {
    std::string kind = "penalization";  // penalization | picard | refinement
    std::vector<int> steps = {50, 100, 200, 400};
};

struct CheckConfig {
    std::vector<std::string> suite;
    std::string divergence_modulus = "hlog";  // hlog | lipschitz | power
    double divergence_power = 0.5;
    double divergence_beta = 3.0;
    std::string divergence_expect = "divergent";
};

struct RunConfig {
    BandConfig band;
    LatticeConfig lattice;
    GeneratorConfig generator;
    PayoffConfig terminal;
    PayoffConfig obstacle{"none"};
    scenarios::PutParams put;
    SolveConfig solve;
    StudyConfig study;
    CheckConfig check;
};

inline const std::vector<std::string>& check_groups() {
    static const std::vector<std::string> groups = {"jensen", "doob", "bdg", "envelope", "transform",
                                                    "bihari", "divergence", "controls"};
    return groups;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError("config: key '" + key + "' expects a finite number, got '" + raw + "'");
    return v;
}

inline int parse_int(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + raw + "'");
    return v;
}

inline std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline void require_one_of(const std::string& key, const std::string& v, const std::set<std::string>& allowed) {
    if (!allowed.count(v)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError("config: key '" + key + "' must be one of {" + list + "}, got '" + v + "'");
    }
}

using Section = std::map<std::string, std::string>;

inline PayoffConfig read_payoff(const Section& sec, const std::string& name, PayoffConfig p) {
    for (const auto& [k, v] : sec) {
        const std::string key = name + "." + k;
        if (k == "kind") p.kind = trim(v);
        else if (k == "value") p.value = parse_double(key, v);
        else if (k == "scale") p.scale = parse_double(key, v);
        else if (k == "slope") p.slope = parse_double(key, v);
        else if (k == "shift") p.shift = parse_double(key, v);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    require_one_of(name + ".kind", p.kind, {"put", "square", "tent", "exp", "constant", "linear", "none"});
    return p;
}

}  // namespace detail

/// Parses INI text. Every key is checked against the grammar before any
/// value is used; unknown sections and keys are rejected.
inline RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    std::map<std::string, detail::Section> sections;
    static const std::set<std::string> known = {"band", "lattice", "generator", "terminal", "obstacle",
                                                "put", "solve", "study", "check"};
    for (const auto& [name, node] : tree) {
        if (node.empty() && (!node.data().empty() || !known.count(name)))
            throw ConfigError("config: key '" + name + "' outside any section");
        sections[name];
        for (const auto& [k, v] : node) sections[name][k] = v.get_value<std::string>();
    }

    using detail::parse_double;
    using detail::parse_int;
    RunConfig c;
    bool suite_given = false;
    for (const auto& [name, sec] : sections) {
        if (name == "band") {
            for (const auto& [k, v] : sec) {
                if (k == "sigma_low") c.band.sigma_low = parse_double("band." + k, v);
                else if (k == "sigma_high") c.band.sigma_high = parse_double("band." + k, v);
                else throw ConfigError("config: unknown key 'band." + k + "'");
            }
        } else if (name == "lattice") {
            for (const auto& [k, v] : sec) {
                const std::string key = "lattice." + k;
                if (k == "horizon") c.lattice.horizon = parse_double(key, v);
                else if (k == "n_steps") c.lattice.n_steps = parse_int(key, v);
                else if (k == "cfl_number") c.lattice.cfl_number = parse_double(key, v);
                else if (k == "coverage") c.lattice.coverage = parse_double(key, v);
                else throw ConfigError("config: unknown key '" + key + "'");
            }
        } else if (name == "generator") {
            for (const auto& [k, v] : sec) {
                const std::string key = "generator." + k;
                if (k == "kind") c.generator.kind = detail::trim(v);
                else if (k == "rate") c.generator.rate = parse_double(key, v);
                else if (k == "value") c.generator.value = parse_double(key, v);
                else if (k == "beta") c.generator.beta = parse_double(key, v);
                else if (k == "z_coeff") c.generator.z_coeff = parse_double(key, v);
                else if (k == "g_value") c.generator.g_value = parse_double(key, v);
                else throw ConfigError("config: unknown key '" + key + "'");
            }
            detail::require_one_of("generator.kind", c.generator.kind, {"zero", "discount", "constant", "hlog_abs"});
        } else if (name == "terminal") {
            c.terminal = detail::read_payoff(sec, "terminal", c.terminal);
            if (c.terminal.kind == "none") throw ConfigError("config: terminal.kind cannot be 'none'");
        } else if (name == "obstacle") {
            c.obstacle = detail::read_payoff(sec, "obstacle", c.obstacle);
        } else if (name == "put") {
            for (const auto& [k, v] : sec) {
                const std::string key = "put." + k;
                if (k == "spot") c.put.spot = parse_double(key, v);
                else if (k == "strike") c.put.strike = parse_double(key, v);
                else if (k == "rate") c.put.rate = parse_double(key, v);
                else if (k == "sigma_ref") c.put.sigma_ref = parse_double(key, v);
                else throw ConfigError("config: unknown key '" + key + "'");
            }
        } else if (name == "solve") {
            for (const auto& [k, v] : sec) {
                const std::string key = "solve." + k;
                if (k == "method") {
                    try {
                        c.solve.method = parse_method(detail::trim(v));
                    } catch (const PreconditionError& e) {
                        throw ConfigError(std::string("config: ") + e.what());
                    }
                } else if (k == "stop_tol") c.solve.stop_tol = parse_double(key, v);
                else if (k == "max_iter") c.solve.max_iter = parse_int(key, v);
                else if (k == "final_gap_factor") c.solve.final_gap_factor = parse_double(key, v);
                else if (k == "alpha") c.solve.alpha = parse_double(key, v);
                else if (k == "schedule") {
                    c.solve.schedule.clear();
                    for (const auto& item : detail::split_list(v)) c.solve.schedule.push_back(parse_double(key, item));
                } else throw ConfigError("config: unknown key '" + key + "'");
            }
        } else if (name == "study") {
            for (const auto& [k, v] : sec) {
                const std::string key = "study." + k;
                if (k == "kind") c.study.kind = detail::trim(v);
                else if (k == "steps") {
                    c.study.steps.clear();
                    for (const auto& item : detail::split_list(v)) c.study.steps.push_back(parse_int(key, item));
                } else throw ConfigError("config: unknown key '" + key + "'");
            }
            detail::require_one_of("study.kind", c.study.kind, {"penalization", "picard", "refinement"});
        } else if (name == "check") {
            for (const auto& [k, v] : sec) {
                const std::string key = "check." + k;
                if (k == "suite") {
                    suite_given = true;
                    const auto items = detail::split_list(v);
                    c.check.suite.clear();
                    for (const auto& item : items) {
                        if (item == "all") {
                            for (const auto& g : check_groups()) c.check.suite.push_back(g);
                            continue;
                        }
                        detail::require_one_of(key, item, {check_groups().begin(), check_groups().end()});
                        c.check.suite.push_back(item);
                    }
                } else if (k == "divergence_modulus") {
                    c.check.divergence_modulus = detail::trim(v);
                    detail::require_one_of(key, c.check.divergence_modulus, {"hlog", "lipschitz", "power"});
                } else if (k == "divergence_power") c.check.divergence_power = parse_double(key, v);
                else if (k == "divergence_beta") c.check.divergence_beta = parse_double(key, v);
                else if (k == "divergence_expect") {
                    c.check.divergence_expect = detail::trim(v);
                    detail::require_one_of(key, c.check.divergence_expect, {"divergent", "convergent"});
                } else throw ConfigError("config: unknown key '" + key + "'");
            }
        } else {
            throw ConfigError("config: unknown section '[" + name + "]'");
        }
    }
    if (!suite_given) c.check.suite = check_groups();

    if (!(c.band.sigma_low > 0.0 && c.band.sigma_low <= c.band.sigma_high))
        throw ConfigError("config: need 0 < band.sigma_low <= band.sigma_high");
    if (!(c.lattice.horizon > 0.0) || c.lattice.n_steps < 1)
        throw ConfigError("config: need lattice.horizon > 0 and lattice.n_steps >= 1");
    if (!(c.lattice.cfl_number > 0.0 && c.lattice.cfl_number <= 1.0))
        throw ConfigError("config: lattice.cfl_number must lie in (0, 1]");
    if (!(c.lattice.coverage >= 0.0)) throw ConfigError("config: lattice.coverage must be >= 0");
    if (!(c.solve.stop_tol > 0.0) || c.solve.max_iter < 1)
        throw ConfigError("config: need solve.stop_tol > 0 and solve.max_iter >= 1");
    if (c.solve.schedule.empty()) throw ConfigError("config: solve.schedule is empty");
    for (std::size_t m = 0; m < c.solve.schedule.size(); ++m)
        if (!(c.solve.schedule[m] > 0.0) || (m > 0 && !(c.solve.schedule[m] > c.solve.schedule[m - 1])))
            throw ConfigError("config: solve.schedule must be positive and strictly increasing");
    if (!(c.solve.alpha >= 2.0)) throw ConfigError("config: solve.alpha must be >= 2");
    if (!(c.solve.final_gap_factor > 0.0)) throw ConfigError("config: solve.final_gap_factor must be > 0");
    if (c.study.steps.size() < 3) throw ConfigError("config: study.steps needs at least three entries");
    for (std::size_t m = 0; m < c.study.steps.size(); ++m)
        if (c.study.steps[m] < 1 || (m > 0 && c.study.steps[m] <= c.study.steps[m - 1]))
            throw ConfigError("config: study.steps must be positive and strictly increasing");
    if (!(c.put.spot > 0.0 && c.put.strike > 0.0 && c.put.rate >= 0.0 && c.put.sigma_ref >= 0.0))
        throw ConfigError("config: need put.spot > 0, put.strike > 0, put.rate >= 0, put.sigma_ref >= 0");
    if (c.generator.kind == "hlog_abs" && !(c.generator.beta > 2.0))
        throw ConfigError("config: generator.beta must exceed 2");
    if (c.generator.kind == "discount" && !(c.generator.rate > 0.0))
        throw ConfigError("config: generator.rate must be > 0 for kind 'discount'");
    if (!(c.generator.z_coeff >= 0.0)) throw ConfigError("config: generator.z_coeff must be >= 0");
    if (!(c.check.divergence_power > 0.0)) throw ConfigError("config: check.divergence_power must be > 0");
    if (!(c.check.divergence_beta > 2.0)) throw ConfigError("config: check.divergence_beta must exceed 2");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

inline std::function<double(double, double)> make_payoff(const PayoffConfig& p, const scenarios::PutParams& put,
                                                         const VolBand& band) {
    const double shift = p.shift;
    if (p.kind == "put") {
        const double sref = put.sigma_ref > 0.0 ? put.sigma_ref : band.sigma_high;
        const double drift = put.rate - 0.5 * sref * sref;
        return [=](double t, double x) { return std::max(put.strike - put.spot * std::exp(x + drift * t), 0.0) + shift; };
    }
    if (p.kind == "square") return [=](double, double x) { return x * x + shift; };
    if (p.kind == "tent") return [=](double, double x) { return std::max(1.0 - std::abs(x), 0.0) + shift; };
    if (p.kind == "exp") {
        const double a = p.scale;
        return [=](double, double x) { return std::exp(a * x) + shift; };
    }
    if (p.kind == "constant") {
        const double c = p.value + shift;
        return [=](double, double) { return c; };
    }
    if (p.kind == "linear") {
        const double b = p.slope;
        return [=](double, double x) { return b * x + shift; };
    }
    return [](double, double) { return -1e6; };
}

inline GeneratorSpec make_generator(const GeneratorConfig& g) {
    GeneratorSpec spec;
    const double zc = g.z_coeff;
    const double gv = g.g_value;
    if (g.kind == "discount") {
        const double r = g.rate;
        spec.f = [r, zc](double, double, double y, double z) { return -r * y + zc * std::abs(z); };
        spec.modulus = make_lipschitz_modulus(r);
    } else if (g.kind == "constant") {
        const double c = g.value;
        spec.f = [c, zc](double, double, double, double z) { return c + zc * std::abs(z); };
    } else if (g.kind == "hlog_abs") {
        spec.modulus = make_hlog_modulus(g.beta);
        auto rho = spec.modulus.evaluator;
        spec.f = [rho, zc](double, double, double y, double z) { return rho(std::abs(y)) + zc * std::abs(z); };
    } else {
        spec.f = [zc](double, double, double, double z) { return zc * std::abs(z); };
    }
    spec.g = [gv](double, double, double, double) { return gv; };
    spec.z_lipschitz = zc;
    return spec;
}

inline Problem make_problem(const RunConfig& c, std::optional<int> n_steps = std::nullopt) {
    Problem p;
    p.name = "config";
    p.band = VolBand::make(c.band.sigma_low, c.band.sigma_high);
    p.lattice = Lattice::fitted(c.lattice.horizon, n_steps.value_or(c.lattice.n_steps), p.band,
                                c.lattice.cfl_number, c.lattice.coverage);
    p.spec = make_generator(c.generator);
    auto term = make_payoff(c.terminal, c.put, p.band);
    const double T = c.lattice.horizon;
    p.terminal = {[term, T](double x) { return term(T, x); }};
    if (c.obstacle.kind == "none")
        p.obstacle = Obstacle::inactive();
    else
        p.obstacle = {make_payoff(c.obstacle, c.put, p.band), 1e-12};
    return p;
}

/// The collapsed-band American put that the binomial oracle prices.
inline bool is_classical_put(const RunConfig& c) {
    const double sref = c.put.sigma_ref > 0.0 ? c.put.sigma_ref : c.band.sigma_high;
    return c.band.sigma_low == c.band.sigma_high && sref == c.band.sigma_high && c.terminal.kind == "put" &&
           c.obstacle.kind == "put" && c.terminal.shift == 0.0 && c.obstacle.shift == 0.0 &&
           c.generator.kind == "discount" && c.generator.rate == c.put.rate && c.generator.z_coeff == 0.0 &&
           c.generator.g_value == 0.0 && c.put.rate > 0.0;
}

}  // namespace sublin::cli
