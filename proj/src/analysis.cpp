#include "plateau/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace plateau {

namespace {

void check_trace(const RiskTrace &tr, const char *who) {
    if (tr.t.size() != tr.risk.size())
        throw std::invalid_argument(std::string(who) + ": t and risk differ in length");
    if (tr.t.size() < 2)
        throw std::invalid_argument(std::string(who) + ": trace needs at least two samples");
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        if (!(tr.t[k] > 0.0) || !std::isfinite(tr.t[k]))
            throw std::invalid_argument(std::string(who) + ": times must be positive and finite");
        if (k > 0 && !(tr.t[k] > tr.t[k - 1]))
            throw std::invalid_argument(std::string(who) + ": times are not strictly increasing at index " +
                                        std::to_string(k));
        if (!std::isfinite(tr.risk[k]))
            throw std::invalid_argument(std::string(who) + ": non-finite risk at index " + std::to_string(k));
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// crossing of `level` from above, interpolated in (log t, log R)
std::optional<double> crossing(const RiskTrace &tr, double level) {
    bool above = false;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.risk[k] > level) {
            above = true;
            continue;
        }
        if (!above)
            continue;
        double r0 = tr.risk[k - 1], r1 = tr.risk[k];
        double x0 = std::log(tr.t[k - 1]), x1 = std::log(tr.t[k]);
        double f;
        if (r1 > 0.0 && level > 0.0)
            f = (std::log(r0) - std::log(level)) / (std::log(r0) - std::log(r1));
        else
            f = (r0 - level) / (r0 - r1);
        return std::exp(x0 + f * (x1 - x0));
    }
    return std::nullopt;
}

std::size_t effective_size(const HermiteSeries &phi) {
    std::size_t n = phi.coeffs.size();
    while (n > 0 && phi.coeffs[n - 1] == 0.0)
        --n;
    return n;
}

} // namespace

std::vector<PlateauSegment> detect_plateaus(const RiskTrace &tr, double slope_tol, double min_span_decades) {
    check_trace(tr, "detect_plateaus");
    const std::size_t n = tr.size();
    const double thr = slope_tol * std::abs(tr.risk[0]);
    std::vector<char> flat(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t lo = k == 0 ? 0 : k - 1, hi = k + 1 < n ? k + 1 : n - 1;
        double s = (tr.risk[hi] - tr.risk[lo]) / (std::log(tr.t[hi]) - std::log(tr.t[lo]));
        flat[k] = std::abs(s) < thr;
    }
    std::vector<PlateauSegment> out;
    std::size_t k = 0;
    while (k < n) {
        if (!flat[k]) {
            ++k;
            continue;
        }
        std::size_t j = k;
        while (j + 1 < n && flat[j + 1])
            ++j;
        if (j > k && std::log10(tr.t[j] / tr.t[k]) >= min_span_decades) {
            PlateauSegment seg;
            seg.level_value = median(std::vector<double>(tr.risk.begin() + k, tr.risk.begin() + j + 1));
            seg.t_enter = tr.t[k];
            seg.t_exit = tr.t[j];
            seg.label = "unmatched";
            out.push_back(seg);
        }
        k = j + 1;
    }
    return out;
}

std::vector<double> plateau_levels(const HermiteSeries &phi) {
    std::size_t n = phi.coeffs.size();
    std::vector<double> lv(n + 1, 0.0);
    for (std::size_t l = n; l-- > 0;)
        lv[l] = lv[l + 1] + 0.5 * phi.coeffs[l] * phi.coeffs[l];
    return lv;
}

std::vector<PlateauSegment> match_levels(std::vector<PlateauSegment> segs, const HermiteSeries &phi, double rel_tol) {
    if (!(rel_tol > 0.0))
        throw std::invalid_argument("match_levels: rel_tol must be positive");
    HermiteSeries trimmed = phi;
    trimmed.coeffs.resize(effective_size(phi));
    std::vector<double> lv = plateau_levels(trimmed);
    // distinct candidates, smallest degree kept for repeated values
    std::vector<std::pair<int, double>> cand;
    for (std::size_t l = 0; l < lv.size(); ++l)
        if (cand.empty() || lv[l] != cand.back().second)
            cand.push_back({int(l), lv[l]});
    double smallest_pos = 0.0;
    for (auto &c : cand)
        if (c.second > 0.0)
            smallest_pos = c.second;

    std::map<int, int> uses;
    for (auto &s : segs) {
        s.matched_degree.reset();
        s.ambiguous = false;
        s.label = "unmatched";
        double best = 1e300;
        int best_l = -1, hits = 0;
        for (auto &[l, v] : cand) {
            double scale = v > 0.0 ? v : smallest_pos;
            if (!(scale > 0.0))
                continue;
            double score = std::abs(s.level_value - v) / (rel_tol * scale);
            if (score <= 1.0)
                ++hits;
            if (score < best) {
                best = score;
                best_l = l;
            }
        }
        if (best <= 1.0) {
            s.matched_degree = best_l;
            s.label = "components >= " + std::to_string(best_l) + " unlearned";
            s.ambiguous = hits > 1;
            ++uses[best_l];
        }
    }
    for (auto &s : segs)
        if (s.matched_degree && (s.ambiguous || uses[*s.matched_degree] > 1)) {
            s.ambiguous = true;
            s.label = "ambiguous: " + s.label;
        }
    return segs;
}

TransitionTimes extract_transition(const RiskTrace &tr, double from_level, double to_level) {
    check_trace(tr, "extract_transition");
    if (!(from_level > 0.0) || !(to_level < from_level) || to_level < 0.0)
        throw std::invalid_argument("extract_transition: need from_level > to_level >= 0");
    double lo = to_level > 0.0 ? to_level : from_level * 1e-2;
    double Lf = std::log(from_level), Lt = std::log(lo);
    auto at = [&](double q) {
        double lvl = std::exp(Lf - q * (Lf - Lt));
        auto c = crossing(tr, lvl);
        if (!c)
            throw std::runtime_error("extract_transition: risk never crosses " + std::to_string(lvl) +
                                     " between levels " + std::to_string(from_level) + " and " +
                                     std::to_string(to_level));
        return *c;
    };
    TransitionTimes out;
    out.t_center = at(0.5);
    out.t10 = at(0.1);
    out.t90 = at(0.9);
    out.t_width = out.t90 - out.t10;
    return out;
}

std::optional<double> first_passage(const RiskTrace &tr, double level) {
    check_trace(tr, "first_passage");
    if (tr.risk[0] <= level)
        return tr.t[0];
    return crossing(tr, level);
}

ScalingFit fit_scaling(const std::vector<double> &eps, const std::vector<double> &times) {
    if (eps.size() != times.size())
        throw std::invalid_argument("fit_scaling: eps and times differ in length");
    if (eps.size() < 4)
        throw std::invalid_argument("fit_scaling: need at least 4 points");
    double emin = 1e300, emax = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0) || !(times[i] > 0.0) || !std::isfinite(eps[i]) || !std::isfinite(times[i]))
            throw std::invalid_argument("fit_scaling: inputs must be positive and finite (point " +
                                        std::to_string(i) + ")");
        emin = std::min(emin, eps[i]);
        emax = std::max(emax, eps[i]);
    }
    if (std::log10(emax / emin) < 3.0 - 1e-9)
        throw std::invalid_argument("fit_scaling: eps values must span at least 3 decades");
    const std::size_t n = eps.size();
    double mx = 0, my = 0;
    std::vector<double> X(n), Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X[i] = std::log(eps[i]);
        Y[i] = std::log(times[i]);
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    ScalingFit f;
    f.exponent = sxy / sxx;
    f.intercept = my - f.exponent * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = Y[i] - (f.intercept + f.exponent * X[i]);
        f.residuals.push_back(r);
        ssr += r * r;
    }
    f.r_squared = syy > 0 ? 1.0 - ssr / syy : 1.0;
    return f;
}

ScenarioVerdict verify_scenario(const std::vector<EpsTrace> &traces, const HermiteSeries &phi,
                                const HermiteSeries &, int L) {
    if (traces.empty())
        throw std::invalid_argument("verify_scenario: no traces");
    if (L < 1)
        throw std::invalid_argument("verify_scenario: L must be at least 1");
    std::vector<double> lv = plateau_levels(phi);
    lv.resize(std::max<std::size_t>(lv.size(), L + 2), 0.0);
    const EpsTrace *finest = &traces[0];
    for (auto &e : traces)
        if (e.eps < finest->eps)
            finest = &e;
    auto segs = match_levels(detect_plateaus(finest->trace), phi, 0.05);

    ScenarioVerdict v;
    bool chain = true;
    for (int l = 1; l <= L; ++l) {
        LevelEvidence ev;
        ev.level = l;
        ev.expected_level = lv[l];
        ev.predicted_exponent = l == 1 ? 0.5 : 1.0 / (2.0 * l);
        ev.predicted_width_exponent = l == 1 ? 0.5 : 1.0 / (l + 1.0);
        double best = 1e300;
        for (auto &s : segs)
            if (s.matched_degree && *s.matched_degree == l && !s.ambiguous && lv[l] > 0.0) {
                double e = std::abs(s.level_value - lv[l]) / lv[l];
                if (e < best)
                    best = e;
            }
        ev.plateau_found = best <= 0.05;
        ev.level_error = best < 1e300 ? best : std::nan("");
        if (!(lv[l] > lv[l + 1])) {
            ev.note = "no drop at this level: phi_l vanishes";
        } else {
            std::vector<double> e_ok, c_ok, w_ok;
            for (auto &e : traces) {
                try {
                    auto tt = extract_transition(e.trace, lv[l], lv[l + 1]);
                    double c = l == 1 ? tt.t_center / std::log(1.0 / e.eps) : tt.t_center;
                    ev.eps.push_back(e.eps);
                    ev.centers.push_back(tt.t_center);
                    ev.widths.push_back(tt.t_width);
                    e_ok.push_back(e.eps);
                    c_ok.push_back(c);
                    w_ok.push_back(tt.t_width);
                } catch (const std::exception &ex) {
                    if (ev.note.empty())
                        ev.note = ex.what();
                }
            }
            try {
                auto f = fit_scaling(e_ok, c_ok);
                ev.exponent = f.exponent;
                ev.exponent_error = std::abs(f.exponent - ev.predicted_exponent);
                try {
                    auto fw = fit_scaling(e_ok, w_ok);
                    ev.width_exponent = fw.exponent;
                    ev.width_exponent_error = std::abs(fw.exponent - ev.predicted_width_exponent);
                } catch (const std::exception &) {
                    ev.width_exponent = ev.width_exponent_error = std::nan("");
                }
                ev.passed = ev.plateau_found && ev.exponent_error <= 0.05;
            } catch (const std::exception &ex) {
                ev.exponent = ev.exponent_error = std::nan("");
                ev.width_exponent = ev.width_exponent_error = std::nan("");
                if (ev.note.empty())
                    ev.note = ex.what();
            }
        }
        if (!ev.plateau_found && ev.note.empty())
            ev.note = "no plateau at the expected level on the smallest-eps trace";
        chain = chain && ev.passed;
        if (chain)
            v.holds_up_to = l;
        v.levels.push_back(std::move(ev));
    }
    return v;
}

std::string ScenarioVerdict::to_json() const {
    using nlohmann::json;
    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    json j;
    j["holds_up_to_level"] = holds_up_to;
    j["levels"] = json::array();
    for (auto &e : levels) {
        json r;
        r["level"] = e.level;
        r["expected_plateau"] = num(e.expected_level);
        r["plateau_found"] = e.plateau_found;
        r["level_error"] = num(e.level_error);
        r["exponent"] = num(e.exponent);
        r["predicted_exponent"] = e.predicted_exponent;
        r["exponent_error"] = num(e.exponent_error);
        r["width_exponent"] = num(e.width_exponent);
        r["predicted_width_exponent"] = e.predicted_width_exponent;
        r["width_exponent_error"] = num(e.width_exponent_error);
        r["passed"] = e.passed;
        r["note"] = e.note;
        json tab = json::array();
        for (std::size_t i = 0; i < e.eps.size(); ++i)
            tab.push_back({{"eps", e.eps[i]}, {"center", e.centers[i]}, {"width", e.widths[i]}});
        r["evidence"] = tab;
        j["levels"].push_back(r);
    }
    return j.dump(2);
}

std::string ScenarioVerdict::centers_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "level,eps,center,width,predicted_exponent\n";
    for (auto &e : levels)
        for (std::size_t i = 0; i < e.eps.size(); ++i)
            os << e.level << ',' << e.eps[i] << ',' << e.centers[i] << ',' << e.widths[i] << ','
               << e.predicted_exponent << '\n';
    return os.str();
}

} // namespace plateau
