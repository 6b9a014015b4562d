#include "plateau/analysis.hpp"
#include "plateau/asymptotics.hpp"
#include "plateau/config.hpp"
#include "plateau/flow.hpp"
#include "plateau/hermite.hpp"
#include "plateau/kernels.hpp"
#include "plateau/runner.hpp"
#include "plateau/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <thread>

using namespace plateau;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char *kUnitUniform = "uniform(-1.7320508075688772,1.7320508075688772)";

std::string path_in(const std::string &dir, const std::string &name) { return (fs::path(dir) / name).string(); }

json segments_json(const std::vector<PlateauSegment> &segs) {
    json a = json::array();
    for (auto &s : segs) {
        json o = {{"level", s.level_value}, {"t_enter", s.t_enter}, {"t_exit", s.t_exit},
                  {"label", s.label},       {"ambiguous", s.ambiguous}};
        o["matched_degree"] = s.matched_degree ? json(*s.matched_degree) : json(nullptr);
        a.push_back(o);
    }
    return a;
}

PlotSpec risk_plot(const std::string &title, const SimResult &r, bool logy) {
    PlotSpec p;
    p.title = title;
    p.logy = logy;
    p.series.push_back({"risk", r.trace.t, r.trace.risk, "", false});
    return p;
}

PlotSpec component_plot(const std::string &title, const SimResult &r, int ncomp) {
    PlotSpec p;
    p.title = title;
    p.ylabel = "component";
    for (int j = 0; j < ncomp; ++j) {
        Series s;
        s.label = "degree " + std::to_string(j);
        s.x = r.trace.t;
        for (auto &c : r.trace.components)
            s.y.push_back(j < int(c.size()) ? c[j] : NAN);
        p.series.push_back(s);
    }
    return p;
}

std::vector<PlotSpec> neuron_panels(const SimResult &r, std::size_t m, const std::string &tag) {
    PlotSpec pa, ps;
    pa.title = "a_i(t) " + tag;
    pa.ylabel = "a_i";
    ps.title = "s_i(t) " + tag;
    ps.ylabel = "s_i";
    pa.legend = ps.legend = false;
    for (std::size_t i = 0; i < m; ++i) {
        pa.series.push_back({"a_" + std::to_string(i), r.trace.t, r.state[i].values, "", false});
        ps.series.push_back({"s_" + std::to_string(i), r.trace.t, r.state[m + i].values, "", false});
    }
    return {pa, ps};
}

AsymptoticParams params_of(const RunConfig &c) {
    auto phi = series_of(named_function(c.phi), c.K);
    auto sig = series_of(named_function(c.sigma), c.K);
    std::vector<double> a = c.a_init ? *c.a_init : WeightLaw::parse(c.pa).sample(c.m, c.seed);
    std::vector<double> w = c.weights ? *c.weights : uniform_weights(c.m);
    return AsymptoticParams::from(phi, sig, a, w, c.eps);
}

int cmd_hermite(const std::string &fn, int K, int quad, const std::string &out) {
    Activation act = named_function(fn);
    HermiteSeries s = series_of(act, K, quad);
    json j;
    j["function"] = act.name;
    j["K"] = K;
    j["coeffs"] = s.coeffs;
    j["norm2"] = std::isfinite(s.norm2) ? json(s.norm2) : json(nullptr);
    j["tail_mass"] = std::isfinite(s.tail_mass) ? json(s.tail_mass) : json(nullptr);
    j["tail_warning"] = s.tail_warning();
    j["isa"] = kernels::isa_name(kernels::active_isa());
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        fs::create_directories(out);
        write_text(path_in(out, "hermite.json"), j.dump(2) + "\n");
    }
    if (s.tail_warning())
        std::cerr << "warning: truncation tail mass " << s.tail_mass << " exceeds 1e-6\n";
    return 0;
}

int cmd_simulate(const std::string &config, std::optional<std::uint64_t> seed, std::optional<std::size_t> every,
                 const std::string &out) {
    RunConfig c = load_config(config);
    if (seed)
        c.seed = *seed;
    if (every)
        c.checkpoint_every = *every;
    validate(c);
    Manifest m = simulate_to_dir(c, out);
    std::cout << "wrote " << out << " (" << m.files.size() << " files, " << m.wall_time << " s)\n";
    return 0;
}

int cmd_sweep(const std::string &config, std::optional<std::uint64_t> seed, const std::string &out, unsigned jobs) {
    SweepSpec s = load_sweep(config);
    if (seed)
        s.base.seed = *seed;
    SweepResult r = run_sweep(s, out, jobs);
    std::size_t bad = 0;
    for (auto &c : r.cells)
        if (!c.ok) {
            ++bad;
            std::cerr << "cell " << s.param << "=" << c.value << " seed " << c.seed << " failed: " << c.error << '\n';
        }
    std::cout << r.fit_json << '\n';
    std::cout << r.cells.size() - bad << "/" << r.cells.size() << " cells ok\n";
    return 0;
}

int cmd_asymptotics(const std::string &config, const std::string &out, int L) {
    RunConfig c = load_config(config);
    auto p = params_of(c);
    auto phi = series_of(named_function(c.phi), c.K);
    json j;
    j["eps"] = c.eps;
    j["sigma0"] = p.sigma0;
    j["sigma1"] = p.sigma1;
    j["phi0"] = p.phi0;
    j["phi1"] = p.phi1;
    j["a_mean_init"] = p.a_mean_init;
    j["a_perp_norm2"] = p.a_perp_norm2;
    j["constant_mode"] = p.constant_mode();
    json tr = json::array();
    for (auto &t : predicted_transitions(p, L))
        tr.push_back({{"level", t.level},
                      {"center", std::isfinite(t.center) ? json(t.center) : json(nullptr)},
                      {"exponent", t.exponent},
                      {"width_exponent", std::isfinite(t.width_exponent) ? json(t.width_exponent) : json(nullptr)},
                      {"note", t.note}});
    j["transitions"] = tr;
    json ex = json::array();
    for (auto &e : exponent_table(L))
        ex.push_back({{"level", e.level}, {"beta", e.beta}, {"omega", e.omega}, {"mu", e.mu}, {"nu", e.nu},
                      {"tau_exponent", e.tau_exponent}});
    j["exponents"] = ex;
    json win = json::array();
    for (auto &w : piece_windows(p))
        win.push_back({{"piece", w.piece}, {"t_lo", w.t_lo}, {"t_hi", w.t_hi}});
    j["windows"] = win;
    fs::create_directories(out);
    write_text(path_in(out, "asymptotics.json"), j.dump(2) + "\n");
    SimResult r;
    for (double t : log_grid(c.grid_start(), c.t_end, c.grid_points)) {
        r.trace.t.push_back(t);
        r.trace.risk.push_back(predicted_risk(p, phi, t));
    }
    write_trace_csv(path_in(out, "predicted.csv"), r);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_analyze(const std::vector<std::string> &dirs, int L, double slope_tol, double min_span,
                const std::string &out) {
    fs::create_directories(out);
    json all = json::object();
    std::vector<EpsTrace> traces;
    HermiteSeries phi, sig;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        Manifest m = read_manifest(path_in(dirs[i], "manifest.json"));
        SimResult r = read_trace_csv(path_in(dirs[i], "trace.csv"));
        HermiteSeries p = series_of(named_function(m.config.phi), m.config.K);
        if (i == 0) {
            phi = p;
            sig = series_of(named_function(m.config.sigma), m.config.K);
        } else if (m.config.phi != read_manifest(path_in(dirs[0], "manifest.json")).config.phi) {
            throw std::runtime_error("analyze: traces use different targets");
        }
        auto segs = match_levels(detect_plateaus(r.trace, slope_tol, min_span), p, 0.05);
        all[dirs[i]] = {{"eps", m.config.eps}, {"plateaus", segments_json(segs)}};
        traces.push_back({m.config.eps, r.trace});
    }
    write_text(path_in(out, "plateaus.json"), all.dump(2) + "\n");
    std::cout << all.dump(2) << '\n';
    if (traces.size() > 1) {
        ScenarioVerdict v = verify_scenario(traces, phi, sig, L);
        write_text(path_in(out, "verdict.json"), v.to_json() + "\n");
        write_text(path_in(out, "centers.csv"), v.centers_csv());
        std::cout << v.to_json() << '\n';
    }
    return 0;
}

int cmd_plot(const std::vector<std::string> &traces, bool overlay, bool logy, const std::string &out) {
    PlotSpec p;
    p.logy = logy;
    std::vector<SimResult> rs;
    for (auto &f : traces) {
        rs.push_back(read_trace_csv(f));
        p.series.push_back({fs::path(f).parent_path().filename().string(), rs.back().trace.t, rs.back().trace.risk,
                            "", false});
    }
    json man;
    man["inputs"] = traces;
    if (overlay) {
        fs::path mpath = fs::path(traces[0]).parent_path() / "manifest.json";
        Manifest m = read_manifest(mpath.string());
        auto ap = params_of(m.config);
        auto phi = series_of(named_function(m.config.phi), m.config.K);
        Series s;
        s.label = "predicted";
        s.dashed = true;
        s.color = "#000000";
        double gap = 0;
        for (std::size_t k = 0; k < rs[0].trace.size(); ++k) {
            double t = rs[0].trace.t[k];
            double v = predicted_risk(ap, phi, t);
            s.x.push_back(t);
            s.y.push_back(v);
            gap = std::max(gap, std::abs(v - rs[0].trace.risk[k]));
        }
        p.series.push_back(s);
        man["overlay_max_gap"] = gap;
        std::cout << "overlay max vertical gap " << gap << '\n';
    }
    fs::create_directories(out);
    write_text(path_in(out, "plot.svg"), render_svg(p));
    man["files"] = {"plot.svg", "manifest.json"};
    man["version"] = kVersion;
    write_text(path_in(out, "manifest.json"), man.dump(2) + "\n");
    return 0;
}

RunConfig figure_config(double eps, double T, bool dump) {
    RunConfig c;
    c.system = SystemKind::meanfield;
    c.phi = "poly:1,-1,2/3";
    c.sigma = "relu";
    c.m = 10;
    c.eps = eps;
    c.t_end = T;
    c.pa = kUnitUniform;
    c.dump_state = dump;
    return c;
}

int cmd_figure(int which, const std::string &out, unsigned jobs) {
    fs::create_directories(out);
    if (which == 1) {
        // staircase of the standard scenario with constants set to one
        auto phi = make_series({1.0, -1.0, 2.0 / 3.0, 0.5});
        auto lv = plateau_levels(phi);
        const double eps = 1e-6;
        PlotSpec p;
        p.title = "standard learning scenario, eps = 1e-6";
        Series s;
        s.label = "plateaus";
        double t = eps * 1e-2;
        for (int l = 0; l <= 3; ++l) {
            double next = l == 0 ? eps : std::pow(eps, 1.0 / (2.0 * l));
            s.x.push_back(t);
            s.y.push_back(lv[l]);
            s.x.push_back(next);
            s.y.push_back(lv[l]);
            t = next;
        }
        s.x.push_back(10.0);
        s.y.push_back(lv[4]);
        p.series.push_back(s);
        write_text(path_in(out, "figure1.svg"), render_svg(p));
        std::cout << "wrote " << path_in(out, "figure1.svg") << '\n';
        return 0;
    }
    if (which == 2) {
        std::vector<RunConfig> cfgs = {figure_config(1e-3, 10.0, false), figure_config(1e-6, 10.0, false)};
        std::vector<std::string> dirs = {path_in(out, "eps1e-3"), path_in(out, "eps1e-6")};
        std::vector<std::thread> th;
        std::vector<std::string> errs(2);
        unsigned nj = std::max(1u, std::min(jobs, 2u));
        for (unsigned w = 0; w < nj; ++w)
            th.emplace_back([&, w] {
                for (std::size_t i = w; i < cfgs.size(); i += nj)
                    try {
                        simulate_to_dir(cfgs[i], dirs[i]);
                    } catch (const std::exception &e) {
                        errs[i] = e.what();
                    }
            });
        for (auto &t : th)
            t.join();
        for (auto &e : errs)
            if (!e.empty())
                throw std::runtime_error(e);
        std::vector<PlotSpec> panels;
        std::vector<SimResult> rs;
        for (auto &d : dirs)
            rs.push_back(read_trace_csv(path_in(d, "trace.csv")));
        panels.push_back(risk_plot("eps = 1e-3", rs[0], false));
        panels.push_back(risk_plot("eps = 1e-6", rs[1], false));
        panels.push_back(risk_plot("eps = 1e-3", rs[0], true));
        panels.push_back(risk_plot("eps = 1e-6", rs[1], true));
        panels.push_back(component_plot("eps = 1e-3", rs[0], 3));
        panels.push_back(component_plot("eps = 1e-6", rs[1], 3));
        write_text(path_in(out, "figure2.svg"), render_panels(panels, 2));
        auto phi = series_of(named_function("poly:1,-1,2/3"), 16);
        json j;
        for (std::size_t i = 0; i < 2; ++i)
            j[i == 0 ? "eps1e-3" : "eps1e-6"] = segments_json(match_levels(detect_plateaus(rs[i].trace), phi, 0.05));
        write_text(path_in(out, "plateaus.json"), j.dump(2) + "\n");
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    if (which == 3) {
        RunConfig c = figure_config(1e-6, 10.0, true);
        std::string d = path_in(out, "eps1e-6");
        simulate_to_dir(c, d);
        SimResult r = run_simulation(c);
        write_text(path_in(out, "figure3.svg"), render_panels(neuron_panels(r, c.m, "eps = 1e-6"), 2));
        std::cout << "wrote " << path_in(out, "figure3.svg") << '\n';
        return 0;
    }
    throw std::invalid_argument("reproduce-figure: figure must be 1, 2 or 3");
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"plateau: gradient-flow and SGD dynamics of two-layer networks on single-index targets"};
    app.require_subcommand(1);

    std::string config, out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> every;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

    auto *h = app.add_subcommand("hermite", "Hermite coefficients of a named function");
    std::string fn = "relu";
    int K = 16, quad = 200;
    h->add_option("--fn", fn, "relu, erf, tanh, he_k:<k>, poly:<c0,c1,...>");
    h->add_option("--K", K, "truncation degree");
    h->add_option("--quad", quad, "Gauss-Hermite nodes for smooth functions");
    h->add_option("--out", out, "output directory (stdout when empty)");

    auto *sim = app.add_subcommand("simulate", "integrate or iterate one configured system");
    sim->add_option("--config", config, "run config (JSON)")->required();
    sim->add_option("--seed", seed, "override the config seed");
    sim->add_option("--checkpoint-every", every, "SGD/GD checkpoint cadence in steps");
    sim->add_option("--out", out, "output directory");

    auto *sw = app.add_subcommand("sweep", "parameter sweep with aggregate fit");
    sw->add_option("--config", config, "sweep config (JSON)")->required();
    sw->add_option("--seed", seed, "override the base seed");
    sw->add_option("--out", out, "output directory");
    sw->add_option("--jobs", jobs, "worker threads");

    auto *as = app.add_subcommand("asymptotics", "matched-expansion predictions for a mean-field config");
    int L = 3;
    as->add_option("--config", config, "run config (JSON)")->required();
    as->add_option("--out", out, "output directory");
    as->add_option("--levels", L, "highest level in the exponent table");

    auto *an = app.add_subcommand("analyze", "plateaus, transitions and scenario verdict for run directories");
    std::vector<std::string> dirs;
    double slope_tol = 0.01, min_span = 0.5;
    int LA = 2;
    an->add_option("runs", dirs, "run directories holding trace.csv and manifest.json")->required();
    an->add_option("--levels", LA, "verify the scenario up to this level");
    an->add_option("--slope-tol", slope_tol, "plateau slope threshold relative to the initial risk");
    an->add_option("--min-span", min_span, "minimum plateau length in decades");
    an->add_option("--out", out, "output directory");

    auto *pl = app.add_subcommand("plot", "SVG line chart of traces");
    std::vector<std::string> traces;
    bool overlay = false, logy = false;
    pl->add_option("traces", traces, "trace.csv files")->required();
    pl->add_flag("--overlay", overlay, "overlay the predicted risk of the first run");
    pl->add_flag("--logy", logy, "logarithmic risk axis");
    pl->add_option("--out", out, "output directory");

    auto *fig = app.add_subcommand("reproduce-figure", "regenerate a figure analogue");
    int which = 2;
    fig->add_option("figure", which, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
    fig->add_option("--out", out, "output directory");
    fig->add_option("--jobs", jobs, "worker threads");

    CLI11_PARSE(app, argc, argv);
    try {
        if (h->parsed())
            return cmd_hermite(fn, K, quad, out == "out" ? "" : out);
        if (sim->parsed())
            return cmd_simulate(config, seed, every, out);
        if (sw->parsed())
            return cmd_sweep(config, seed, out, jobs);
        if (as->parsed())
            return cmd_asymptotics(config, out, L);
        if (an->parsed())
            return cmd_analyze(dirs, LA, slope_tol, min_span, out);
        if (pl->parsed())
            return cmd_plot(traces, overlay, logy, out);
        if (fig->parsed())
            return cmd_figure(which, out, jobs);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
