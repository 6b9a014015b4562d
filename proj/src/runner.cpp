#include "plateau/runner.hpp"

#include "plateau/flow.hpp"
#include "plateau/hermite.hpp"
#include "plateau/integrate.hpp"
#include "plateau/sgd.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace plateau {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Model {
    Activation phi, sigma;
    HermiteSeries ps, ss;
    KernelPair kp;
    double phi_norm2;
};

Model model_of(const RunConfig &c) {
    Model md;
    md.phi = named_function(c.phi);
    md.sigma = named_function(c.sigma);
    md.ps = series_of(md.phi, c.K);
    md.ss = series_of(md.sigma, c.K);
    md.kp = make_kernels(md.ps, md.ss);
    md.phi_norm2 = md.phi.norm2 ? *md.phi.norm2 : md.ps.sum_sq(0);
    return md;
}

FlowConfig flow_config(const RunConfig &c) {
    FlowConfig fc;
    fc.eps = c.eps;
    fc.t_end = c.t_end;
    fc.rtol = c.rtol;
    fc.atol = c.atol;
    fc.max_step = c.max_step;
    fc.seed = c.seed;
    return fc;
}

std::vector<double> components(const std::vector<double> &a, const std::vector<double> &s,
                               const std::vector<double> &w, const Model &md) {
    MeanFieldState st;
    st.a = a;
    st.s = s;
    st.weights = w;
    return risk_hermite(st, md.ps, md.ss).components;
}

std::vector<Column> state_columns(std::size_t m) {
    std::vector<Column> cols;
    for (std::size_t i = 0; i < m; ++i)
        cols.push_back({"a_" + std::to_string(i), {}});
    for (std::size_t i = 0; i < m; ++i)
        cols.push_back({"s_" + std::to_string(i), {}});
    return cols;
}

void push_state(std::vector<Column> &cols, const std::vector<double> &a, const std::vector<double> &s) {
    const std::size_t m = a.size();
    for (std::size_t i = 0; i < m; ++i) {
        cols[i].values.push_back(a[i]);
        cols[m + i].values.push_back(s[i]);
    }
}

std::vector<double> initial_a(const RunConfig &c) {
    return c.a_init ? *c.a_init : WeightLaw::parse(c.pa).sample(c.m, c.seed);
}

void take_stats(SimResult &r, const Trajectory &tr) {
    r.accepted = tr.accepted;
    r.rejected = tr.rejected;
    r.nfev = tr.nfev;
}

SimResult run_meanfield(const RunConfig &c, const Model &md) {
    MeanFieldState st;
    st.a = initial_a(c);
    st.s = c.s_init ? *c.s_init : std::vector<double>(c.m, 0.0);
    st.weights = c.weights ? *c.weights : uniform_weights(c.m);
    MeanFieldSystem sys(md.kp, st.weights, c.eps, md.phi_norm2);
    auto grid = log_grid(c.grid_start(), c.t_end, c.grid_points);
    auto tr = integrate(sys, sys.pack(st), 0.0, grid, flow_config(c));
    SimResult r;
    take_stats(r, tr);
    if (c.dump_state)
        r.state = state_columns(c.m);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        MeanFieldState s = sys.unpack(tr.y[k].data());
        r.trace.t.push_back(tr.t[k]);
        r.trace.risk.push_back(sys.risk(tr.y[k].data()));
        r.trace.components.push_back(components(s.a, s.s, s.weights, md));
        if (c.dump_state)
            push_state(r.state, s.a, s.s);
    }
    return r;
}

SimResult run_reduced(const RunConfig &c, const Model &md) {
    ReducedState st = reduced_at_origin(initial_a(c));
    ReducedSystem sys(md.kp, c.m, c.eps, md.phi_norm2);
    auto grid = log_grid(c.grid_start(), c.t_end, c.grid_points);
    auto tr = integrate(sys, sys.pack(st), 0.0, grid, flow_config(c));
    SimResult r;
    take_stats(r, tr);
    if (c.dump_state)
        r.state = state_columns(c.m);
    Column rp{"rperp", {}};
    auto w = uniform_weights(c.m);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        ReducedState s = sys.unpack(tr.y[k].data());
        r.trace.t.push_back(tr.t[k]);
        r.trace.risk.push_back(sys.risk(tr.y[k].data()));
        r.trace.components.push_back(components(s.a, s.s, w, md));
        rp.values.push_back(rperp_offdiag(s));
        if (c.dump_state)
            push_state(r.state, s.a, s.s);
    }
    r.extra.push_back(std::move(rp));
    return r;
}

SimResult run_full(const RunConfig &c, const Model &md) {
    FullState st = init_full(c.m, *c.d, WeightLaw::parse(c.pa), c.seed);
    if (c.a_init)
        st.a = *c.a_init;
    FullSystem sys(md.kp, c.m, *c.d, st.u_star, c.eps, md.phi_norm2);
    auto grid = log_grid(c.grid_start(), c.t_end, c.grid_points);
    auto tr = integrate(sys, sys.pack(st), 0.0, grid, flow_config(c));
    SimResult r;
    take_stats(r, tr);
    if (c.dump_state)
        r.state = state_columns(c.m);
    Column dev{"sphere_dev", {}};
    auto w = uniform_weights(c.m);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        FullState s = sys.unpack(tr.y[k].data());
        ReducedState g = gram_of(s);
        double worst = 0.0;
        for (std::size_t i = 0; i < c.m; ++i) {
            const double *u = s.row(i);
            double n2 = 0;
            for (std::size_t j = 0; j < s.d; ++j)
                n2 += u[j] * u[j];
            worst = std::max(worst, std::abs(std::sqrt(n2) - 1.0));
        }
        r.trace.t.push_back(tr.t[k]);
        r.trace.risk.push_back(sys.risk(tr.y[k].data()));
        r.trace.components.push_back(components(g.a, g.s, w, md));
        dev.values.push_back(worst);
        if (c.dump_state)
            push_state(r.state, g.a, g.s);
    }
    r.extra.push_back(std::move(dev));
    return r;
}

SimResult run_simplified(const RunConfig &c, const Model &md) {
    const int l = c.level;
    const double scale = std::pow(c.eps, 1.0 / (2.0 * l * (l + 1)));
    SimplifiedState st;
    st.level = l;
    st.eps = c.eps;
    std::vector<double> a0 = initial_a(c);
    std::vector<double> s0 = c.s_init ? *c.s_init : a0;
    for (std::size_t i = 0; i < c.m; ++i) {
        st.a.push_back(scale * a0[i]);
        st.s.push_back(scale * s0[i]);
    }
    st.weights = c.weights ? *c.weights : uniform_weights(c.m);
    SimplifiedSystem sys(l, c.eps, md.ss.coeff(l), md.ps.coeff(l), st.weights);
    auto y0 = sys.pack(st);
    auto q0 = sys.conserved(y0.data());
    auto grid = log_grid(c.grid_start(), c.t_end, c.grid_points);
    FlowConfig fc = flow_config(c);
    fc.eps = 1.0; // tau is already the natural clock of this system
    auto tr = integrate(sys, y0, 0.0, grid, fc);
    SimResult r;
    take_stats(r, tr);
    if (c.dump_state)
        r.state = state_columns(c.m);
    Column torig{"t_orig", {}}, drift{"conserved_drift", {}}, rate{"risk_rate", {}};
    const double nu = 1.0 / (l + 1.0);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        const double *y = tr.y[k].data();
        auto q = sys.conserved(y);
        double dmax = 0;
        for (std::size_t i = 0; i < q.size(); ++i)
            dmax = std::max(dmax, std::abs(q[i] - q0[i]));
        r.trace.t.push_back(tr.t[k]);
        r.trace.risk.push_back(sys.risk(y));
        torig.values.push_back(std::pow(c.eps, nu) * tr.t[k]);
        drift.values.push_back(dmax);
        rate.values.push_back(sys.risk_rate(y));
        if (c.dump_state) {
            SimplifiedState s = sys.unpack(y);
            push_state(r.state, s.a, s.s);
        }
    }
    r.extra = {torig, drift, rate};
    return r;
}

std::vector<std::size_t> checkpoints(const RunConfig &c, std::size_t &n_steps) {
    n_steps = std::max<std::size_t>(1, std::size_t(std::llround(c.t_end / c.eta)));
    std::size_t every = c.checkpoint_every ? c.checkpoint_every : std::max<std::size_t>(1, n_steps / c.grid_points);
    std::vector<std::size_t> ks;
    for (std::size_t k = every; k <= n_steps; k += every)
        ks.push_back(k);
    if (ks.empty() || ks.back() != n_steps)
        ks.push_back(n_steps);
    return ks;
}

void record_particles(SimResult &r, const RunConfig &c, const Model &md, const FullState &st, double t,
                      double risk) {
    ReducedState g = gram_of(st);
    r.trace.t.push_back(t);
    r.trace.risk.push_back(risk);
    r.trace.components.push_back(components(g.a, g.s, uniform_weights(c.m), md));
    if (c.dump_state)
        push_state(r.state, g.a, g.s);
}

SimResult run_gd(const RunConfig &c, const Model &md) {
    FullState st = init_full(c.m, *c.d, WeightLaw::parse(c.pa), c.seed);
    std::size_t n;
    auto ks = checkpoints(c, n);
    SimResult r;
    if (c.dump_state)
        r.state = state_columns(c.m);
    std::size_t k = 0;
    for (auto target : ks) {
        for (; k < target; ++k)
            gd_step(st, md.kp, c.eta, c.eps);
        record_particles(r, c, md, st, double(k) * c.eta, risk_full(st, md.kp, md.phi_norm2));
    }
    r.accepted = n;
    return r;
}

SimResult run_sgd(const RunConfig &c, const Model &md) {
    FullState st = init_full(c.m, *c.d, WeightLaw::parse(c.pa), c.seed);
    DataStream ds(*c.d, st.u_star, md.phi.f, data_seed(c.seed));
    std::size_t n;
    auto ks = checkpoints(c, n);
    SimResult r;
    if (c.dump_state)
        r.state = state_columns(c.m);
    Column dev{"sphere_dev", {}};
    std::vector<double> x(*c.d);
    StepScratch sc;
    std::size_t k = 0;
    for (auto target : ks) {
        for (; k < target; ++k) {
            double y = ds.next(x.data());
            sgd_step(st, x.data(), y, md.sigma, c.eta, c.eps, sc);
        }
        // plain SGD leaves the sphere at second order; risk is read on the normalized directions
        FullState nst = st;
        double worst = 0;
        for (std::size_t i = 0; i < c.m; ++i) {
            double *u = nst.row(i);
            double nn = 0;
            for (std::size_t j = 0; j < nst.d; ++j)
                nn += u[j] * u[j];
            nn = std::sqrt(nn);
            worst = std::max(worst, std::abs(nn - 1.0));
            for (std::size_t j = 0; j < nst.d; ++j)
                u[j] /= nn;
        }
        if (!std::isfinite(worst))
            throw DivergenceError("sgd: iterate left the finite range at step " + std::to_string(k));
        record_particles(r, c, md, nst, double(k) * c.eta, risk_full(nst, md.kp, md.phi_norm2));
        dev.values.push_back(worst);
    }
    r.extra.push_back(std::move(dev));
    r.accepted = n;
    return r;
}

SimResult run_psgd_cfg(const RunConfig &c, const Model &md) {
    std::size_t n;
    auto ks = checkpoints(c, n);
    SgdConfig sc;
    sc.d = *c.d;
    sc.m = c.m;
    sc.eta = c.eta;
    sc.eps = c.eps;
    sc.n_steps = n;
    sc.seed = c.seed;
    sc.checkpoint_every = ks.size() > 1 ? ks[0] : n;
    auto run = run_psgd(sc, md.phi, md.sigma, WeightLaw::parse(c.pa), c.K, c.reference);
    SimResult r;
    Column gf{"risk_gf", {}}, gap{"risk_gap", {}}, cp{"coupling", {}};
    // the first checkpoint is the initialization at t = 0, which log-time analysis cannot use
    for (std::size_t i = 1; i < run.times.size(); ++i) {
        r.trace.t.push_back(run.times[i]);
        r.trace.risk.push_back(run.risk[i]);
        r.trace.components.push_back({});
        if (c.reference) {
            gf.values.push_back(run.coupling.points[i].risk_gf);
            gap.values.push_back(run.coupling.points[i].risk_gap);
            cp.values.push_back(run.coupling.points[i].coupling);
        }
    }
    if (c.reference)
        r.extra = {gf, gap, cp};
    r.trace.components.clear();
    r.accepted = n;
    return r;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_columns(std::ostream &os, const std::vector<std::string> &names,
                   const std::vector<const std::vector<double> *> &cols, std::size_t n) {
    for (std::size_t i = 0; i < names.size(); ++i)
        os << (i ? "," : "") << names[i];
    os << '\n';
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            os << (i ? "," : "") << fmt((*cols[i])[k]);
        os << '\n';
    }
}

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        out.push_back(cur);
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

SimResult run_simulation(const RunConfig &c) {
    validate(c);
    Model md = model_of(c);
    switch (c.system) {
    case SystemKind::meanfield:
        return run_meanfield(c, md);
    case SystemKind::reduced:
        return run_reduced(c, md);
    case SystemKind::full:
        return run_full(c, md);
    case SystemKind::simplified:
        return run_simplified(c, md);
    case SystemKind::gd:
        return run_gd(c, md);
    case SystemKind::sgd:
        return run_sgd(c, md);
    case SystemKind::psgd:
        return run_psgd_cfg(c, md);
    }
    throw std::logic_error("unknown system");
}

void write_trace_csv(const std::string &path, const SimResult &r) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    const std::size_t n = r.trace.size();
    std::size_t nc = r.trace.components.empty() ? 0 : r.trace.components[0].size();
    std::vector<std::vector<double>> comp(nc, std::vector<double>(n));
    for (std::size_t k = 0; k < n && nc; ++k)
        for (std::size_t j = 0; j < nc; ++j)
            comp[j][k] = r.trace.components[k][j];
    std::vector<std::string> names = {"t", "risk"};
    std::vector<const std::vector<double> *> cols = {&r.trace.t, &r.trace.risk};
    for (std::size_t j = 0; j < nc; ++j) {
        names.push_back("comp_" + std::to_string(j));
        cols.push_back(&comp[j]);
    }
    for (auto &c : r.extra) {
        names.push_back(c.name);
        cols.push_back(&c.values);
    }
    write_columns(os, names, cols, n);
}

void write_state_csv(const std::string &path, const SimResult &r) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    std::vector<std::string> names = {"t"};
    std::vector<const std::vector<double> *> cols = {&r.trace.t};
    for (auto &c : r.state) {
        names.push_back(c.name);
        cols.push_back(&c.values);
    }
    write_columns(os, names, cols, r.trace.size());
}

SimResult read_trace_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty file");
    auto names = split(line, ',');
    if (names.size() < 2 || names[0] != "t" || names[1] != "risk")
        throw std::runtime_error(path + ": header must start with t,risk");
    std::vector<std::vector<double>> cols(names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        auto f = split(line, ',');
        if (f.size() != names.size())
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has the wrong number of fields");
        for (std::size_t i = 0; i < f.size(); ++i)
            cols[i].push_back(std::stod(f[i]));
    }
    SimResult r;
    r.trace.t = cols[0];
    r.trace.risk = cols[1];
    std::vector<std::size_t> comp_idx;
    for (std::size_t i = 2; i < names.size(); ++i) {
        if (names[i].rfind("comp_", 0) == 0)
            comp_idx.push_back(i);
        else
            r.extra.push_back({names[i], cols[i]});
    }
    if (!comp_idx.empty())
        for (std::size_t k = 0; k < r.trace.t.size(); ++k) {
            std::vector<double> c;
            for (auto i : comp_idx)
                c.push_back(cols[i][k]);
            r.trace.components.push_back(std::move(c));
        }
    return r;
}

void write_manifest(const std::string &path, const Manifest &m) {
    json j;
    j["config"] = json::parse(to_json(m.config));
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["version"] = m.version;
    j["files"] = m.files;
    j["wall_time_s"] = m.wall_time;
    j["extra"] = json::parse(m.extra_json);
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << '\n';
}

Manifest read_manifest(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    Manifest m;
    m.config = parse_config(j.at("config").dump());
    m.config_hash = j.value("config_hash", "");
    m.seed = j.value("seed", std::uint64_t(0));
    m.version = j.value("version", "");
    m.files = j.value("files", std::vector<std::string>{});
    m.wall_time = j.value("wall_time_s", 0.0);
    m.extra_json = j.contains("extra") ? j["extra"].dump() : "{}";
    return m;
}

Manifest simulate_to_dir(const RunConfig &cfg, const std::string &dir) {
    fs::create_directories(dir);
    auto t0 = std::chrono::steady_clock::now();
    SimResult r = run_simulation(cfg);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Manifest m;
    m.config = cfg;
    m.config_hash = config_hash(cfg);
    m.seed = cfg.seed;
    m.version = kVersion;
    write_trace_csv((fs::path(dir) / "trace.csv").string(), r);
    m.files.push_back("trace.csv");
    if (cfg.dump_state && !r.state.empty()) {
        write_state_csv((fs::path(dir) / "state.csv").string(), r);
        m.files.push_back("state.csv");
    }
    m.wall_time = wall;
    json extra;
    extra["accepted_steps"] = r.accepted;
    extra["rejected_steps"] = r.rejected;
    extra["rhs_evaluations"] = r.nfev;
    extra["final_risk"] = r.trace.risk.empty() ? 0.0 : r.trace.risk.back();
    m.extra_json = extra.dump();
    m.files.push_back("manifest.json");
    write_manifest((fs::path(dir) / "manifest.json").string(), m);
    return m;
}

SweepSpec parse_sweep(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "base" && it.key() != "param" && it.key() != "values" && it.key() != "measure" &&
            it.key() != "replicates")
            throw ConfigError(it.key(), "unknown sweep field");
    if (!j.contains("base"))
        throw ConfigError("base", "required");
    SweepSpec s;
    s.base = parse_config(j["base"].dump());
    if (!j.contains("param") || !j["param"].is_string())
        throw ConfigError("param", "required string");
    s.param = j["param"];
    if (s.param != "eps" && s.param != "m" && s.param != "d" && s.param != "eta" && s.param != "seed")
        throw ConfigError("param", "must be one of eps, m, d, eta, seed");
    if (!j.contains("values") || !j["values"].is_array() || j["values"].empty())
        throw ConfigError("values", "required nonempty array");
    for (auto &v : j["values"]) {
        if (!v.is_number())
            throw ConfigError("values", "must be numbers");
        s.values.push_back(v.get<double>());
    }
    if (j.contains("measure")) {
        if (!j["measure"].is_string())
            throw ConfigError("measure", "must be a string");
        s.measure = j["measure"];
    }
    bool ok = s.measure == "final_risk" || s.measure == "paired_distance" || s.measure == "coupling_gap" ||
              s.measure.rfind("transition:", 0) == 0 || s.measure.rfind("first_passage:", 0) == 0;
    if (!ok)
        throw ConfigError("measure", "unknown measure '" + s.measure + "'");
    if (s.measure == "coupling_gap" && (s.base.system != SystemKind::psgd || !s.base.reference))
        throw ConfigError("measure", "coupling_gap needs a psgd base with reference = true");
    if (s.measure == "paired_distance" && s.base.system != SystemKind::meanfield)
        throw ConfigError("measure", "paired_distance needs a meanfield base");
    if (j.contains("replicates")) {
        if (!j["replicates"].is_number_integer() || j["replicates"].get<long long>() < 1)
            throw ConfigError("replicates", "must be a positive integer");
        s.replicates = j["replicates"];
    }
    return s;
}

SweepSpec load_sweep(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("<document>", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sweep(ss.str());
}

double reduced_vs_meanfield(const RunConfig &c) {
    Model md = model_of(c);
    std::vector<double> a = initial_a(c);
    MeanFieldState ms;
    ms.a = a;
    ms.s.assign(c.m, 0.0);
    ms.weights = uniform_weights(c.m);
    MeanFieldSystem mf(md.kp, ms.weights, c.eps, md.phi_norm2);
    ReducedSystem rd(md.kp, c.m, c.eps, md.phi_norm2);
    auto grid = log_grid(c.grid_start(), c.t_end, c.grid_points);
    FlowConfig fc = flow_config(c);
    auto t1 = integrate(mf, mf.pack(ms), 0.0, grid, fc);
    auto t2 = integrate(rd, rd.pack(reduced_at_origin(a)), 0.0, grid, fc);
    double sup = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        auto x = mf.unpack(t1.y[k].data());
        auto y = rd.unpack(t2.y[k].data());
        sup = std::max(sup, paired_distance(x.a, x.s, y.a, y.s));
    }
    return sup;
}

SweepResult run_sweep(const SweepSpec &spec, const std::string &dir, unsigned jobs) {
    fs::create_directories(dir);
    std::vector<SweepCell> cells;
    std::vector<RunConfig> cfgs;
    for (double v : spec.values)
        for (std::size_t r = 0; r < spec.replicates; ++r) {
            RunConfig c = spec.base;
            c.seed = spec.base.seed + r;
            if (spec.param == "eps")
                c.eps = v;
            else if (spec.param == "m")
                c.m = std::size_t(std::llround(v));
            else if (spec.param == "d")
                c.d = std::size_t(std::llround(v));
            else if (spec.param == "eta")
                c.eta = v;
            else
                c.seed = std::uint64_t(std::llround(v)) + r;
            SweepCell cell;
            cell.value = v;
            cell.seed = c.seed;
            cells.push_back(cell);
            cfgs.push_back(c);
        }

    std::vector<double> levels;
    {
        Model md = model_of(spec.base);
        levels = plateau_levels(md.ps);
    }
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= cells.size())
                return;
            SweepCell &cell = cells[k];
            const RunConfig &c = cfgs[k];
            try {
                validate(c);
                std::string sub = (fs::path(dir) / ("cell_" + std::to_string(k))).string();
                if (spec.measure == "paired_distance") {
                    cell.measured = reduced_vs_meanfield(c);
                } else {
                    simulate_to_dir(c, sub);
                    SimResult r = read_trace_csv((fs::path(sub) / "trace.csv").string());
                    if (spec.measure == "final_risk") {
                        cell.measured = r.trace.risk.back();
                    } else if (spec.measure == "coupling_gap") {
                        double g = 0;
                        for (auto &col : r.extra)
                            if (col.name == "risk_gap")
                                for (double x : col.values)
                                    g = std::max(g, x);
                        cell.measured = g;
                    } else if (spec.measure.rfind("transition:", 0) == 0) {
                        int l = std::stoi(spec.measure.substr(11));
                        if (l < 1 || std::size_t(l + 1) >= levels.size() + 1)
                            throw std::invalid_argument("transition level out of range");
                        double lo = std::size_t(l + 1) < levels.size() ? levels[l + 1] : 0.0;
                        auto tt = extract_transition(r.trace, levels[l], lo);
                        cell.center = tt.t_center;
                        cell.width = tt.t_width;
                        cell.measured = tt.t_center;
                    } else {
                        double lvl = std::stod(spec.measure.substr(14));
                        auto fp = first_passage(r.trace, lvl);
                        if (!fp)
                            throw std::runtime_error("risk never reaches " + std::to_string(lvl));
                        cell.measured = *fp;
                    }
                }
                cell.ok = true;
            } catch (const std::exception &e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
    };
    unsigned nj = std::max(1u, std::min<unsigned>(jobs, unsigned(cells.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nj; ++i)
        pool.emplace_back(work);
    for (auto &t : pool)
        t.join();

    SweepResult res;
    res.cells = cells;
    // medians per value across replicates
    std::vector<double> vals, med;
    for (double v : spec.values) {
        std::vector<double> xs;
        for (auto &c : cells)
            if (c.value == v && c.ok)
                xs.push_back(c.measured);
        if (!xs.empty()) {
            vals.push_back(v);
            med.push_back(median_of(xs));
        }
    }
    json fj;
    fj["param"] = spec.param;
    fj["measure"] = spec.measure;
    fj["values"] = vals;
    fj["medians"] = med;
    json ratios = json::array();
    for (std::size_t i = 0; i + 1 < med.size(); ++i)
        ratios.push_back(med[i] / med[i + 1]);
    fj["successive_ratios"] = ratios;
    if (spec.param == "eps") {
        std::vector<double> y = med;
        if (spec.measure == "transition:1")
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] /= std::log(1.0 / vals[i]);
        try {
            auto f = fit_scaling(vals, y);
            fj["fit"] = {{"exponent", f.exponent},
                         {"intercept", f.intercept},
                         {"r_squared", f.r_squared},
                         {"residuals", f.residuals},
                         {"log_factor_removed", spec.measure == "transition:1"}};
        } catch (const std::exception &e) {
            fj["fit"] = {{"error", e.what()}};
        }
    }
    res.fit_json = fj.dump(2);

    std::ofstream os((fs::path(dir) / "sweep.csv").string());
    os << "param,value,seed,status,measured,center,width,error\n";
    for (auto &c : cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << spec.param << ',' << fmt(c.value) << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
           << fmt(c.measured) << ',' << fmt(c.center) << ',' << fmt(c.width) << ',' << err << '\n';
    }
    std::ofstream fo((fs::path(dir) / "fit.json").string());
    fo << res.fit_json << '\n';
    return res;
}

} // namespace plateau
