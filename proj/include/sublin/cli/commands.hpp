#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sublin/cli/config.hpp"
#include "sublin/cli/report.hpp"
#include "sublin/inequalities.hpp"
#include "sublin/oracle.hpp"
#include "sublin/parallel.hpp"
#include "sublin/rgbsde.hpp"

namespace sublin::cli {

enum ExitCode : int { ok = 0, config_error = 1, numerical_error = 2, convergence_error = 3 };

struct CommandResult {
    OutputSet outputs;
    int exit_code = ExitCode::ok;
    std::string failure;  // set when the command ran but its verdict is negative
};

namespace detail {

inline PicardOptions picard_options(const RunConfig& c) {
    PicardOptions p;
    p.stop_tol = c.solve.stop_tol;
    p.max_iter = c.solve.max_iter;
    p.keep_iterates = false;
    p.alpha = c.solve.alpha;
    return p;
}

inline PenaltyOptions penalty_options(const RunConfig& c) {
    PenaltyOptions p;
    p.schedule = c.solve.schedule;
    p.final_gap_factor = c.solve.final_gap_factor;
    p.alpha = c.solve.alpha;
    return p;
}

inline std::string surface_csv(const SolutionSurface& s) {
    CsvTable t({"time_index", "space_index", "x", "Y", "Z", "lift", "policy_variance"});
    const auto n = static_cast<std::size_t>(s.lattice.n_steps);
    for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t i = 0; i < s.lattice.size(); ++i)
            t.add({std::to_string(k), std::to_string(i), num(s.lattice.x(i)), num(s.Y[k][i]), num(s.Z[k][i]),
                   num(s.lift[k][i]), k < n ? num(s.policy.variance[k][i]) : ""});
    return t.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline CommandResult cmd_solve(const RunConfig& c) {
    const Problem p = make_problem(c);
    CsvTable summary({"key", "value"});
    auto add = [&](const std::string& k, const std::string& v) { summary.add({k, v}); };

    ReflectedSurface r;
    const char* method_name = "picard";
    std::vector<std::pair<std::string, std::string>> extra;
    switch (c.solve.method) {
        case Method::picard: {
            auto res = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice, detail::picard_options(c));
            extra.push_back({"picard_iterations", std::to_string(res.run.deltas.size())});
            extra.push_back({"picard_last_delta", num(res.run.deltas.back())});
            r = std::move(res.surface);
            break;
        }
        case Method::penalized: {
            method_name = "penalized";
            auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, detail::penalty_options(c));
            extra.push_back({"penalty_final_rate", num(res.run.schedule.back())});
            extra.push_back({"penalty_final_gap", num(res.run.gaps.back())});
            extra.push_back({"penalty_monotonicity_defect", num(penalty_monotonicity_defect(res.run))});
            r = std::move(res.surface);
            break;
        }
        case Method::lipschitz:
            method_name = "lipschitz";
            r = solve_reflected_lipschitz(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
            break;
    }

    const auto norms = apriori_norms(r.base, c.solve.alpha);
    const auto mc = martingale_condition_check(r);
    const auto ks = k_stats(r.base, KScenario::optimizer());
    add("method", method_name);
    add("n_steps", std::to_string(p.lattice.n_steps));
    add("dt", num(p.lattice.dt()));
    add("dx", num(p.lattice.dx));
    add("half_width", std::to_string(p.lattice.half_width));
    add("y0", num(r.y0()));
    add("alpha", num(c.solve.alpha));
    add("Y_sup_norm", num(norms.Y_sup_norm));
    add("Z_l2_norm", num(norms.Z_l2_norm));
    add("A_terminal_norm", num(norms.A_terminal_norm));
    add("obstacle_gap", num(obstacle_gap(r.base, r.obstacle)));
    add("complementarity_violation", num(mc.max_complementarity_violation));
    add("complementarity_pass", flag(mc.pass));
    add("K_terminal_mean", num(ks.K_terminal_mean));
    add("K_monotone_pass", flag(ks.K_monotone_pass));
    for (const auto& [k, v] : extra) add(k, v);
    if (is_classical_put(c)) {
        oracle::AmericanPutSpec ap;
        ap.spot = c.put.spot;
        ap.strike = c.put.strike;
        ap.rate = c.put.rate;
        ap.vol = c.band.sigma_high;
        ap.maturity = c.lattice.horizon;
        ap.n_steps = c.lattice.n_steps;
        const double price = oracle::crr_price(ap);
        add("oracle_price", num(price));
        add("oracle_rel_error", num(std::abs(r.y0() - price) / price));
    }

    CommandResult out;
    out.outputs.put("surface.csv", detail::surface_csv(r.base));
    out.outputs.put("summary.csv", summary.str());
    return out;
}

// ---------------------------------------------------------------------------
// study
// ---------------------------------------------------------------------------

inline CommandResult cmd_study(const RunConfig& c, const std::string& kind) {
    CsvTable t({"kind", "index", "gap", "delta", "Y_sup_norm", "Z_l2_norm", "A_terminal_norm", "y0", "order"});
    std::vector<Series> plot;
    std::string xlabel, ylabel;

    if (kind == "penalization") {
        const Problem p = make_problem(c);
        auto opts = detail::penalty_options(c);
        opts.track_norms = true;
        auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, opts);
        Series gap{"gap sup(Y-psi)^-", {}, {}, "#1f77b4"}, resid{"penalty residual", {}, {}, "#d62728"};
        for (std::size_t m = 0; m < res.run.schedule.size(); ++m) {
            const auto& s = res.run.surfaces[m];
            const auto& nr = res.run.norms[m];
            t.add({kind, num(res.run.schedule[m]), num(res.run.gaps[m]), "", num(nr.Y_sup_norm), num(nr.Z_l2_norm),
                   num(nr.A_terminal_norm), num(s.y0()), ""});
            gap.x.push_back(res.run.schedule[m]);
            gap.y.push_back(res.run.gaps[m]);
            resid.x.push_back(res.run.schedule[m]);
            resid.y.push_back(res.run.residuals[m]);
        }
        plot = {gap, resid};
        xlabel = "penalty rate n";
        ylabel = "gap";
    } else if (kind == "picard") {
        const Problem p = make_problem(c);
        auto opts = detail::picard_options(c);
        opts.track_norms = true;
        auto res = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice, opts);
        Series d{"sup |Y^(n+1) - Y^n|", {}, {}, "#1f77b4"};
        for (std::size_t m = 0; m < res.run.deltas.size(); ++m) {
            const auto& nr = res.run.norm_trace[m + 1];
            t.add({kind, std::to_string(m + 1), "", num(res.run.deltas[m]), num(nr.Y_sup_norm), num(nr.Z_l2_norm),
                   num(nr.A_terminal_norm), "", ""});
            d.x.push_back(static_cast<double>(m + 1));
            d.y.push_back(res.run.deltas[m]);
        }
        plot = {d};
        xlabel = "iteration n";
        ylabel = "delta";
    } else if (kind == "refinement") {
        std::vector<double> y0s;
        Series d{"|Y0(n) - Y0(previous n)|", {}, {}, "#1f77b4"};
        double prev_delta = NAN;
        for (std::size_t m = 0; m < c.study.steps.size(); ++m) {
            const int n = c.study.steps[m];
            const Problem p = make_problem(c, n);
            auto r = solve_reflected(c.solve.method, p.spec, p.obstacle, p.terminal, p.band, p.lattice,
                                     detail::picard_options(c), detail::penalty_options(c));
            const auto nr = apriori_norms(r.base, c.solve.alpha);
            y0s.push_back(r.y0());
            std::string delta, order;
            if (m > 0) {
                const double dlt = std::abs(y0s[m] - y0s[m - 1]);
                delta = num(dlt);
                d.x.push_back(static_cast<double>(n));
                d.y.push_back(dlt);
                if (m > 1 && dlt > 0.0) {
                    const double ratio = static_cast<double>(c.study.steps[m]) / c.study.steps[m - 1];
                    order = num(std::log(prev_delta / dlt) / std::log(ratio));
                }
                prev_delta = dlt;
            }
            t.add({kind, std::to_string(n), num(obstacle_gap(r.base, r.obstacle)), delta, num(nr.Y_sup_norm),
                   num(nr.Z_l2_norm), num(nr.A_terminal_norm), num(r.y0()), order});
        }
        plot = {d};
        xlabel = "n_steps";
        ylabel = "Y0 increment";
    } else {
        throw ConfigError("config: study kind must be one of {penalization, picard, refinement}, got '" + kind + "'");
    }

    CommandResult out;
    out.outputs.put("study.csv", t.str());
    out.outputs.put("study.svg", loglog_svg(kind + " study", xlabel, ylabel, plot));
    return out;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

namespace detail {

struct CheckRow {
    std::string group, name;
    double value = 0.0, reference = 0.0;
    bool pass = false;
    std::string detail;
};

inline MaoModulus divergence_modulus(const CheckConfig& cc) {
    if (cc.divergence_modulus == "lipschitz") return make_lipschitz_modulus(1.0, cc.divergence_beta);
    if (cc.divergence_modulus == "power") {
        const double q = cc.divergence_power;
        return make_custom_modulus("power(" + num(q) + ")", [q](double u) { return u <= 0.0 ? 0.0 : std::pow(u, q); },
                                   cc.divergence_beta);
    }
    return make_hlog_modulus(cc.divergence_beta);
}

inline std::vector<CheckRow> run_group(const std::string& g, const RunConfig& c) {
    const VolBand band = VolBand::make(c.band.sigma_low, c.band.sigma_high);
    const Lattice l = Lattice::fitted(c.lattice.horizon, c.lattice.n_steps, band, c.lattice.cfl_number,
                                      c.lattice.coverage);
    const double T = c.lattice.horizon;
    std::vector<CheckRow> rows;
    if (g == "jensen") {
        auto a = jensen_check([](double u) { return 2.0 * u + 1.0; }, [](double x) { return x * x; }, band, l);
        rows.push_back({g, "jensen_affine", a.lhs, a.rhs, a.pass && std::abs(a.lhs - a.rhs) <= 1e-9, "h(u)=2u+1, X=B_T^2"});
        auto b = jensen_check([](double u) { return -u * u; }, [](double x) { return x; }, band, l);
        rows.push_back({g, "jensen_neg_square", b.lhs, b.rhs, b.pass, "h(u)=-u^2, X=B_T"});
        auto m = jensen_check([](double u) { return std::min(u, 1.0); }, [](double x) { return x * x; }, band, l);
        rows.push_back({g, "jensen_capped", m.lhs, m.rhs, m.pass, "h(u)=min(u,1), X=B_T^2"});
    } else if (g == "doob") {
        auto a = doob_check([](double) { return 1.5; }, 2.0, 1.0, 1.25, band, l);
        rows.push_back({g, "doob_constant", a.lhs, a.rhs, a.pass, "xi=1.5 alpha=2 delta=1 gamma=1.25"});
        auto b = doob_check([](double x) { return x * x; }, 2.0, 1.0, 1.25, band, l);
        rows.push_back({g, "doob_square", b.lhs, b.rhs, b.pass, "xi=B_T^2 alpha=2 delta=1 gamma=1.25"});
        auto d = doob_check([](double x) { return std::abs(x); }, 2.0, 2.0, 1.5, band, l);
        rows.push_back({g, "doob_abs", d.lhs, d.rhs, d.pass, "xi=|B_T| alpha=2 delta=2 gamma=1.5"});
    } else if (g == "bdg") {
        auto a = bdg_check(StepIntegrand::constant(1.0, T), band, l);
        rows.push_back({g, "bdg_unit", a.value, a.upper, a.pass && std::abs(a.value - a.upper) <= 1e-9 * (1 + a.upper),
                        "eta=1, upper end attained"});
        auto z = bdg_check(StepIntegrand::constant(0.0, T), band, l);
        rows.push_back({g, "bdg_zero", z.value, 0.0, z.pass && z.value == 0.0, "eta=0"});
        auto h = bdg_check(StepIntegrand{{0.0, 0.5 * T, T}, {1.0, 0.0}}, band, l);
        rows.push_back({g, "bdg_half", h.value, h.upper, h.pass && std::abs(h.value - h.upper) <= 1e-9 * (1 + h.upper),
                        "eta=1 on [0,T/2], 0 after"});
    } else if (g == "envelope") {
        auto lip = make_lipschitz_modulus(5.0);
        auto e = affine_envelope(lip);
        rows.push_back({g, "envelope_lipschitz", e.a, 5.0, e.a == 5.0 && e.b == 5.0, "rho(u)=5u -> (5,5)"});
        auto hl = make_hlog_modulus(3.0);
        auto h = affine_envelope(hl);
        rows.push_back({g, "envelope_hlog", h.a, hl(1.0), h.a == hl(1.0) && h.b == hl(1.0), "hlog(3) -> (rho(1),rho(1))"});
    } else if (g == "transform") {
        auto t = transform_lemma4(make_hlog_modulus(3.0), 3.0);
        rows.push_back({g, "transform_hlog_cube", t(1.0), std::numbers::e, std::abs(t(1.0) - std::numbers::e) <= 1e-12,
                        "rho=hlog(3), r=3: concavity sampling passed"});
        auto id = transform_lemma4(make_lipschitz_modulus(1.0), 2.0);
        rows.push_back({g, "transform_identity", id(0.3), 0.3, std::abs(id(0.3) - 0.3) <= 1e-12, "rho(u)=u, r=2"});
    } else if (g == "bihari") {
        auto w = bihari_majorant([](double u) { return u; }, 1.0, 1.0, T, 1000);
        const double ref = std::exp(T);
        rows.push_back({g, "bihari_gronwall", w.front(), ref, std::abs(w.front() - ref) <= 1e-6, "h(u)=u u0=1 C=1"});
    } else if (g == "divergence") {
        const auto& cc = c.check;
        auto rho = divergence_modulus(cc);
        auto rep = divergence_check(rho, cc.divergence_beta);
        const bool pass = to_string(rep.classification) == cc.divergence_expect;
        rows.push_back({g, "divergence_" + cc.divergence_modulus, rep.integral.back(), 0.0, pass,
                        std::string("got ") + to_string(rep.classification) + ", expected " + cc.divergence_expect +
                            "; " + rep.evidence});
    } else if (g == "controls") {
        bool rejected = false;
        try {
            jensen_check([](double u) { return u * u; }, [](double x) { return x; }, band, l);
        } catch (const PreconditionError&) {
            rejected = true;
        }
        rows.push_back({g, "control_nonconcave_h_rejected", rejected ? 1.0 : 0.0, 1.0, rejected, "h(u)=u^2 must be refused"});
        MaoModulus sq{[](double u) { return std::sqrt(std::max(u, 0.0)); }, "sqrt", 2.0, {}, ModulusKind::custom};
        auto rep = divergence_check(sq, 2.0);
        const bool not_div = rep.classification != Divergence::divergent;
        rows.push_back({g, "control_convergent_modulus_not_divergent", rep.integral.back(), 2.0, not_div,
                        std::string("rho(u)=sqrt(u), beta=2 classified ") + to_string(rep.classification)});
    }
    return rows;
}

}  // namespace detail

inline CommandResult cmd_check(const RunConfig& c) {
    if (c.check.suite.empty()) throw ConfigError("config: check.suite selects no checks");
    CsvTable t({"group", "name", "value", "reference", "pass", "detail"});
    std::vector<std::string> failed;
    for (const auto& g : c.check.suite)
        for (const auto& row : detail::run_group(g, c)) {
            t.add({row.group, row.name, num(row.value), num(row.reference), flag(row.pass), row.detail});
            if (!row.pass) failed.push_back(row.name);
        }
    CommandResult out;
    out.outputs.put("checks.csv", t.str());
    if (!failed.empty()) {
        out.exit_code = ExitCode::numerical_error;
        out.failure = std::to_string(failed.size()) + " of " + std::to_string(t.rows()) + " checks failed:";
        for (const auto& f : failed) out.failure += " " + f;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dispatch with exit codes
// ---------------------------------------------------------------------------

inline std::string one_line(std::string s) {
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

inline void report_error(std::ostream& err, int code, const char* kind, const std::string& message) {
    err << "error: code=" << code << " kind=" << kind << " message=" << one_line(message) << '\n';
}

/// Runs one subcommand end to end. Output files are only written when the
/// command produced them completely; errors leave the directory untouched.
inline int run_command(const std::string& command, const std::string& config_path, const std::string& out_dir,
                       const std::optional<std::string>& study_kind, int threads, std::ostream& err) {
    try {
        if (threads > 0) set_num_threads(threads);
        const RunConfig c = load_config(config_path);
        CommandResult res;
        if (command == "solve") res = cmd_solve(c);
        else if (command == "study") res = cmd_study(c, study_kind.value_or(c.study.kind));
        else if (command == "check") res = cmd_check(c);
        else throw ConfigError("unknown command '" + command + "'");
        res.outputs.commit(out_dir);
        if (res.exit_code != ExitCode::ok) report_error(err, res.exit_code, "check", res.failure);
        return res.exit_code;
    } catch (const ConvergenceFailure& e) {
        report_error(err, ExitCode::convergence_error, "convergence", e.what());
        return ExitCode::convergence_error;
    } catch (const NumericalFailure& e) {
        report_error(err, ExitCode::numerical_error, "numerical", e.what());
        return ExitCode::numerical_error;
    } catch (const ConfigError& e) {
        report_error(err, ExitCode::config_error, "config", e.what());
        return ExitCode::config_error;
    } catch (const PreconditionError& e) {
        report_error(err, ExitCode::config_error, "precondition", e.what());
        return ExitCode::config_error;
    } catch (const std::exception& e) {
        report_error(err, ExitCode::numerical_error, "internal", e.what());
        return ExitCode::numerical_error;
    }
}

}  // namespace sublin::cli
