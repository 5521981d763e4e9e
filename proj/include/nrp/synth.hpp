#pragma once

#include "nrp/panel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nrp {

/// Parameters of the synthetic panel generator.
///
/// The chance of taking part in wave t is sigmoid(intercept + demographic
/// effects + trait + shock_t - state_dependence * nonresponses in waves t-3..t-1),
/// where trait is a stable normal effect and shock_t an AR(1) process.
struct SimConfig {
    std::size_t n_panelists = 1000;
    int n_waves = 22;
    std::uint64_t seed = 1;
    double intercept = 2.0;
    /// Logit shift per category, keyed by recruitment variable; missing values shift nothing.
    std::map<std::string, std::vector<double>> demographic_effects;
    double trait_sd = 1.0;
    double shock_sd = 0.6;
    double shock_persistence = 0.7;
    double state_dependence = 0.8;
    /// How strongly the evaluation items track the current participation logit.
    double evaluation_link = 1.0;
    /// Per-wave chance that an active panelist unsubscribes, from wave 1 on.
    double attrition_hazard = 0.005;
    /// Share of interviews that are partial.
    double partial_share = 0.05;
    double item_missing_rate = 0.03;
    double partial_item_missing_rate = 0.3;
    double recruitment_missing_rate = 0.02;

    static SimConfig defaults();
    static SimConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Throws INVALID_CONFIG.
    void validate() const;
};

/// Schema of generated panels: six recruitment variables and five wave items.
Schema synthetic_schema(int n_waves);

struct TruthRow {
    std::size_t panelist = 0;
    int wave = 0;
    /// Probability of taking part in the wave.
    double propensity = 0.0;
};

struct Simulation {
    PanelDataset dataset;
    /// One row per active (panelist, wave).
    std::vector<TruthRow> truth;
};

Simulation simulate(const SimConfig& config);

/// Writes recruitment.csv, waves.csv, schema.json and truth.csv into `dir`.
void write_simulation(const Simulation& sim, const std::filesystem::path& dir);

} // namespace nrp
