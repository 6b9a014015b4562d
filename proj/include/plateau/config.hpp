#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace plateau {

inline constexpr const char *kVersion = "0.3.0";

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string &field, const std::string &msg)
        : std::runtime_error("config." + field + ": " + msg), field_(field) {}
    const std::string &field() const { return field_; }

private:
    std::string field_;
};

enum class SystemKind { full, reduced, meanfield, simplified, gd, sgd, psgd };

const char *system_name(SystemKind k);
bool needs_dimension(SystemKind k);

struct RunConfig {
    SystemKind system = SystemKind::meanfield;
    std::string phi = "poly:1,-1,2/3";
    std::string sigma = "relu";
    int K = 16;
    double eps = 1e-3;
    std::size_t m = 10;
    std::optional<std::size_t> d;
    int level = 2;
    double t_end = 1.0;
    std::optional<double> t_min;
    double rtol = 1e-8, atol = 1e-10;
    double max_step = 0.0;
    std::string pa = "rademacher";
    std::uint64_t seed = 0;
    std::size_t grid_points = 400;
    std::optional<std::vector<double>> a_init, s_init, weights;
    double eta = 1e-3;
    std::size_t checkpoint_every = 0;
    bool dump_state = false;
    bool reference = false; // psgd: also integrate the matched gradient flow

    double grid_start() const;
};

// Throws ConfigError naming the offending field.
RunConfig parse_config(const std::string &json_text);
RunConfig load_config(const std::string &path);
void validate(const RunConfig &c);
std::string to_json(const RunConfig &c, int indent = 2);
// FNV-1a over the canonical JSON form.
std::string config_hash(const RunConfig &c);

} // namespace plateau
