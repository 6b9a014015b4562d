#pragma once

#include "plateau/hermite.hpp"

#include <optional>
#include <string>
#include <vector>

namespace plateau {

struct RiskTrace {
    std::vector<double> t, risk;
    // per-sample degree-wise risk components, may be empty
    std::vector<std::vector<double>> components;
    std::size_t size() const { return t.size(); }
};

struct PlateauSegment {
    double level_value = 0.0;
    double t_enter = 0.0, t_exit = 0.0;
    std::optional<int> matched_degree;
    bool ambiguous = false;
    std::string label; // "components >= l unlearned", "unmatched" or "ambiguous"
};

// Maximal runs with |dR/dlog t| < slope_tol * R(t_0), at least min_span_decades long.
std::vector<PlateauSegment> detect_plateaus(const RiskTrace &trace, double slope_tol = 0.01,
                                            double min_span_decades = 0.5);

// 1/2 sum_{k >= l} phi_k^2 for l = 0..K, with l = K+1 giving zero
std::vector<double> plateau_levels(const HermiteSeries &phi);

std::vector<PlateauSegment> match_levels(std::vector<PlateauSegment> segments, const HermiteSeries &phi,
                                         double rel_tol = 0.05);

struct TransitionTimes {
    double t_center = 0.0, t_width = 0.0;
    double t10 = 0.0, t90 = 0.0;
};

// Half-drop in log-risk between the two levels; a zero lower level is
// replaced by from_level * 1e-2.
TransitionTimes extract_transition(const RiskTrace &trace, double from_level, double to_level);

// First time the risk is at or below `level`, interpolated in log t; nullopt if never.
std::optional<double> first_passage(const RiskTrace &trace, double level);

struct ScalingFit {
    double exponent = 0.0, intercept = 0.0, r_squared = 0.0;
    std::vector<double> residuals;
};

// Least squares of log(time) on log(eps).
ScalingFit fit_scaling(const std::vector<double> &eps, const std::vector<double> &times);

struct LevelEvidence {
    int level = 0;
    double expected_level = 0.0;
    bool plateau_found = false;
    double level_error = 0.0; // relative
    double exponent = 0.0, predicted_exponent = 0.0, exponent_error = 0.0;
    double width_exponent = 0.0, predicted_width_exponent = 0.0, width_exponent_error = 0.0;
    std::vector<double> eps, centers, widths;
    bool passed = false;
    std::string note;
};

struct ScenarioVerdict {
    std::vector<LevelEvidence> levels;
    int holds_up_to = 0;
    std::string to_json() const;
    std::string centers_csv() const;
};

struct EpsTrace {
    double eps;
    RiskTrace trace;
};

// Level l passes when a plateau at 1/2 sum_{k>=l} phi_k^2 is found on the
// smallest-eps trace within 5% and the transition exponent is within 0.05.
// The level-1 center is divided by log(1/eps) before fitting.
ScenarioVerdict verify_scenario(const std::vector<EpsTrace> &traces, const HermiteSeries &phi,
                                const HermiteSeries &sigma, int L);

} // namespace plateau
