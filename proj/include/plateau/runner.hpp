#pragma once

#include "plateau/analysis.hpp"
#include "plateau/config.hpp"

#include <string>
#include <vector>

namespace plateau {

struct Column {
    std::string name;
    std::vector<double> values;
};

struct SimResult {
    RiskTrace trace;
    std::vector<Column> extra;  // appended to trace.csv after the components
    std::vector<Column> state;  // a_i and s_i per sample, written to state.csv
    std::size_t accepted = 0, rejected = 0, nfev = 0;
};

SimResult run_simulation(const RunConfig &cfg);

// t, risk, comp_0..comp_K, extra columns.
void write_trace_csv(const std::string &path, const SimResult &r);
void write_state_csv(const std::string &path, const SimResult &r);
// Reads back a trace.csv; unknown columns land in `extra`.
SimResult read_trace_csv(const std::string &path);

struct Manifest {
    RunConfig config;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    std::vector<std::string> files;
    double wall_time = 0.0;
    std::string extra_json = "{}";
};

void write_manifest(const std::string &path, const Manifest &m);
Manifest read_manifest(const std::string &path);

// Writes trace.csv, optional state.csv and manifest.json into dir.
Manifest simulate_to_dir(const RunConfig &cfg, const std::string &dir);

struct SweepSpec {
    RunConfig base;
    std::string param;          // eps, m, d, eta, seed
    std::vector<double> values;
    std::string measure = "final_risk"; // final_risk, transition:<l>, first_passage:<level>, paired_distance, coupling_gap
    std::size_t replicates = 1;         // seeds base.seed .. base.seed + replicates - 1 per cell
};

SweepSpec parse_sweep(const std::string &json_text);
SweepSpec load_sweep(const std::string &path);

struct SweepCell {
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    double measured = 0.0;
    double center = 0.0, width = 0.0;
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::string fit_json = "{}";
};

// Runs cells on `jobs` workers; each cell writes into dir/cell_<k>.
SweepResult run_sweep(const SweepSpec &spec, const std::string &dir, unsigned jobs);

// Reduced and mean-field flows from the same a, s = 0, R = I; returns the final paired distance.
double reduced_vs_meanfield(const RunConfig &cfg);

} // namespace plateau
