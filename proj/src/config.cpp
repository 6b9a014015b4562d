#include "plateau/config.hpp"

#include "plateau/flow.hpp"
#include "plateau/hermite.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace plateau {

using nlohmann::json;

namespace {

const std::pair<SystemKind, const char *> kSystems[] = {
    {SystemKind::full, "full"},         {SystemKind::reduced, "reduced"}, {SystemKind::meanfield, "meanfield"},
    {SystemKind::simplified, "simplified"}, {SystemKind::gd, "gd"},       {SystemKind::sgd, "sgd"},
    {SystemKind::psgd, "psgd"}};

template <class T> T get(const json &j, const char *key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ConfigError(key, "wrong type");
    }
}

double positive(const json &j, const char *key) {
    double v = get<double>(j, key);
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(key, "must be positive and finite");
    return v;
}

std::size_t count(const json &j, const char *key, std::size_t lo) {
    const json &v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < (long long)lo)
        throw ConfigError(key, "must be an integer >= " + std::to_string(lo));
    return v.get<std::size_t>();
}

std::vector<double> reals(const json &j, const char *key) {
    const json &v = j.at(key);
    if (!v.is_array() || v.empty())
        throw ConfigError(key, "must be a nonempty array of numbers");
    std::vector<double> out;
    for (auto &x : v) {
        if (!x.is_number())
            throw ConfigError(key, "must be a nonempty array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

} // namespace

const char *system_name(SystemKind k) {
    for (auto &[kind, name] : kSystems)
        if (kind == k)
            return name;
    return "?";
}

bool needs_dimension(SystemKind k) {
    return k == SystemKind::full || k == SystemKind::gd || k == SystemKind::sgd || k == SystemKind::psgd;
}

double RunConfig::grid_start() const {
    if (t_min)
        return *t_min;
    switch (system) {
    case SystemKind::simplified:
        return t_end * 1e-4;
    case SystemKind::gd:
    case SystemKind::sgd:
    case SystemKind::psgd:
        return eta;
    default:
        return std::min(eps * 1e-2, t_end * 1e-3);
    }
}

RunConfig parse_config(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("<document>", "must be a JSON object");
    static const std::set<std::string> known = {
        "system", "phi",  "sigma",       "K",      "eps",     "m",       "d",       "level",
        "t_end",  "t_min", "rtol",       "atol",   "max_step", "pa",     "seed",    "grid_points",
        "a_init", "s_init", "weights",   "eta",    "checkpoint_every", "dump_state", "reference"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError(it.key(), "unknown field");

    RunConfig c;
    if (!j.contains("system"))
        throw ConfigError("system", "required");
    {
        std::string s = get<std::string>(j, "system");
        bool ok = false;
        for (auto &[kind, name] : kSystems)
            if (s == name) {
                c.system = kind;
                ok = true;
            }
        if (!ok)
            throw ConfigError("system", "'" + s + "' is not one of full, reduced, meanfield, simplified, gd, sgd, psgd");
    }
    if (j.contains("phi"))
        c.phi = get<std::string>(j, "phi");
    if (j.contains("sigma"))
        c.sigma = get<std::string>(j, "sigma");
    if (j.contains("K"))
        c.K = int(count(j, "K", 0));
    if (j.contains("eps"))
        c.eps = positive(j, "eps");
    if (j.contains("m"))
        c.m = count(j, "m", 1);
    if (j.contains("d"))
        c.d = count(j, "d", 1);
    if (j.contains("level"))
        c.level = int(count(j, "level", 1));
    if (j.contains("t_end"))
        c.t_end = positive(j, "t_end");
    if (j.contains("t_min"))
        c.t_min = positive(j, "t_min");
    if (j.contains("rtol"))
        c.rtol = positive(j, "rtol");
    if (j.contains("atol"))
        c.atol = positive(j, "atol");
    if (j.contains("max_step")) {
        c.max_step = get<double>(j, "max_step");
        if (c.max_step < 0)
            throw ConfigError("max_step", "must be nonnegative");
    }
    if (j.contains("pa"))
        c.pa = get<std::string>(j, "pa");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
            throw ConfigError("seed", "must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("grid_points"))
        c.grid_points = count(j, "grid_points", 2);
    if (j.contains("a_init"))
        c.a_init = reals(j, "a_init");
    if (j.contains("s_init"))
        c.s_init = reals(j, "s_init");
    if (j.contains("weights"))
        c.weights = reals(j, "weights");
    if (j.contains("eta"))
        c.eta = positive(j, "eta");
    if (j.contains("checkpoint_every"))
        c.checkpoint_every = count(j, "checkpoint_every", 0);
    if (j.contains("dump_state"))
        c.dump_state = get<bool>(j, "dump_state");
    if (j.contains("reference"))
        c.reference = get<bool>(j, "reference");
    validate(c);
    return c;
}

void validate(const RunConfig &c) {
    if (needs_dimension(c.system) && !c.d)
        throw ConfigError("d", std::string("required for system '") + system_name(c.system) + "'");
    if (!needs_dimension(c.system) && c.d)
        throw ConfigError("d", std::string("not allowed for system '") + system_name(c.system) + "'");
    if (c.system == SystemKind::simplified && c.level < 2)
        throw ConfigError("level", "simplified model needs level >= 2");
    if (!(c.eps > 0.0))
        throw ConfigError("eps", "must be positive");
    if (!(c.t_end > c.grid_start()))
        throw ConfigError("t_min", "must be below t_end");
    try {
        named_function(c.phi);
    } catch (const std::exception &e) {
        throw ConfigError("phi", e.what());
    }
    try {
        named_function(c.sigma);
    } catch (const std::exception &e) {
        throw ConfigError("sigma", e.what());
    }
    try {
        WeightLaw::parse(c.pa);
    } catch (const std::exception &e) {
        throw ConfigError("pa", e.what());
    }
    auto sized = [&](const std::optional<std::vector<double>> &v, const char *name) {
        if (v && v->size() != c.m)
            throw ConfigError(name, "needs exactly m = " + std::to_string(c.m) + " entries");
    };
    sized(c.a_init, "a_init");
    sized(c.s_init, "s_init");
    sized(c.weights, "weights");
    bool mf = c.system == SystemKind::meanfield || c.system == SystemKind::simplified;
    if (!mf && (c.s_init || c.weights))
        throw ConfigError(c.s_init ? "s_init" : "weights", "only valid for meanfield and simplified systems");
    if (c.a_init && (c.system == SystemKind::gd || c.system == SystemKind::sgd || c.system == SystemKind::psgd))
        throw ConfigError("a_init", "not supported for the stochastic systems, use pa");
    if (c.weights) {
        double s = 0;
        for (double w : *c.weights) {
            if (w < 0)
                throw ConfigError("weights", "must be nonnegative");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw ConfigError("weights", "must sum to 1");
    }
    if (c.s_init && c.system == SystemKind::meanfield)
        for (double s : *c.s_init)
            if (std::abs(s) > 1.0)
                throw ConfigError("s_init", "overlaps must lie in [-1, 1]");
}

RunConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("<document>", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json(const RunConfig &c, int indent) {
    json j;
    j["system"] = system_name(c.system);
    j["phi"] = c.phi;
    j["sigma"] = c.sigma;
    j["K"] = c.K;
    j["eps"] = c.eps;
    j["m"] = c.m;
    if (c.d)
        j["d"] = *c.d;
    j["level"] = c.level;
    j["t_end"] = c.t_end;
    if (c.t_min)
        j["t_min"] = *c.t_min;
    j["rtol"] = c.rtol;
    j["atol"] = c.atol;
    j["max_step"] = c.max_step;
    j["pa"] = c.pa;
    j["seed"] = c.seed;
    j["grid_points"] = c.grid_points;
    if (c.a_init)
        j["a_init"] = *c.a_init;
    if (c.s_init)
        j["s_init"] = *c.s_init;
    if (c.weights)
        j["weights"] = *c.weights;
    j["eta"] = c.eta;
    j["checkpoint_every"] = c.checkpoint_every;
    j["dump_state"] = c.dump_state;
    j["reference"] = c.reference;
    return j.dump(indent);
}

std::string config_hash(const RunConfig &c) {
    std::string s = to_json(c, -1);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

} // namespace plateau
