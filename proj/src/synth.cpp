#include "nrp/synth.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"
#include "nrp/models/logistic.hpp"
#include "nrp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nrp {

using nlohmann::json;

namespace {

struct RecruitmentDistribution {
    const char* name;
    Concept kind;
    std::vector<std::string> categories;
    std::vector<double> probabilities;
};

const std::vector<RecruitmentDistribution>& recruitment_distributions() {
    static const std::vector<RecruitmentDistribution> vars{
        {"sex", Concept::Sociodemographic, {"female", "male"}, {0.51, 0.49}},
        {"age_group", Concept::Sociodemographic, {"18-29", "30-44", "45-59", "60+"}, {0.2, 0.27, 0.3, 0.23}},
        {"education", Concept::Sociodemographic, {"low", "medium", "high"}, {0.3, 0.4, 0.3}},
        {"employment", Concept::Sociodemographic, {"employed", "unemployed", "inactive"}, {0.6, 0.06, 0.34}},
        {"willingness", Concept::SurveyCooperation, {"low", "medium", "high"}, {0.2, 0.45, 0.35}},
        {"email_provided", Concept::SurveyCooperation, {"yes", "no"}, {0.7, 0.3}},
    };
    return vars;
}

const std::vector<std::string> kFivePoint{"1", "2", "3", "4", "5"};

Code draw_category(Rng& rng, const std::vector<double>& probabilities) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < probabilities.size(); ++c) {
        acc += probabilities[c];
        if (u < acc) return static_cast<Code>(c);
    }
    return static_cast<Code>(probabilities.size() - 1);
}

Code five_point(double latent) {
    static constexpr double cuts[] = {-1.5, -0.5, 0.5, 1.5};
    Code c = 0;
    for (double cut : cuts) {
        if (latent > cut) ++c;
    }
    return c;
}

double get_number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) {
        fail(ErrorCode::InvalidConfig, std::string("'") + key + "' must be a number");
    }
    return v.get<double>();
}

} // namespace

SimConfig SimConfig::defaults() {
    SimConfig c;
    c.demographic_effects = {
        {"age_group", {-0.5, -0.2, 0.1, 0.3}},
        {"education", {-0.3, 0.0, 0.3}},
        {"employment", {0.0, -0.2, 0.1}},
        {"willingness", {-0.6, 0.0, 0.5}},
        {"email_provided", {0.3, -0.3}},
    };
    return c;
}

SimConfig SimConfig::from_json(const json& j) {
    if (!j.is_object()) {
        fail(ErrorCode::InvalidConfig, "simulation config must be a JSON object");
    }
    static const std::vector<std::string> known{
        "n_panelists", "n_waves", "seed", "intercept", "demographic_effects", "trait_sd", "shock_sd",
        "shock_persistence", "state_dependence", "evaluation_link", "attrition_hazard", "partial_share",
        "item_missing_rate", "partial_item_missing_rate", "recruitment_missing_rate"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            fail(ErrorCode::InvalidConfig, "unknown simulation setting '" + key + "'");
        }
    }
    SimConfig c = defaults();
    try {
        if (j.contains("n_panelists")) c.n_panelists = j.at("n_panelists").get<std::size_t>();
        if (j.contains("n_waves")) c.n_waves = j.at("n_waves").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("demographic_effects")) {
            c.demographic_effects = j.at("demographic_effects").get<std::map<std::string, std::vector<double>>>();
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("bad simulation setting: ") + e.what());
    }
    c.intercept = get_number(j, "intercept", c.intercept);
    c.trait_sd = get_number(j, "trait_sd", c.trait_sd);
    c.shock_sd = get_number(j, "shock_sd", c.shock_sd);
    c.shock_persistence = get_number(j, "shock_persistence", c.shock_persistence);
    c.state_dependence = get_number(j, "state_dependence", c.state_dependence);
    c.evaluation_link = get_number(j, "evaluation_link", c.evaluation_link);
    c.attrition_hazard = get_number(j, "attrition_hazard", c.attrition_hazard);
    c.partial_share = get_number(j, "partial_share", c.partial_share);
    c.item_missing_rate = get_number(j, "item_missing_rate", c.item_missing_rate);
    c.partial_item_missing_rate = get_number(j, "partial_item_missing_rate", c.partial_item_missing_rate);
    c.recruitment_missing_rate = get_number(j, "recruitment_missing_rate", c.recruitment_missing_rate);
    c.validate();
    return c;
}

json SimConfig::to_json() const {
    return {{"n_panelists", n_panelists},
            {"n_waves", n_waves},
            {"seed", seed},
            {"intercept", intercept},
            {"demographic_effects", demographic_effects},
            {"trait_sd", trait_sd},
            {"shock_sd", shock_sd},
            {"shock_persistence", shock_persistence},
            {"state_dependence", state_dependence},
            {"evaluation_link", evaluation_link},
            {"attrition_hazard", attrition_hazard},
            {"partial_share", partial_share},
            {"item_missing_rate", item_missing_rate},
            {"partial_item_missing_rate", partial_item_missing_rate},
            {"recruitment_missing_rate", recruitment_missing_rate}};
}

void SimConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorCode::InvalidConfig, what);
    };
    require(n_panelists > 0, "n_panelists must be positive");
    require(n_waves >= 4, "n_waves must be at least 4");
    require(std::isfinite(intercept), "intercept must be finite");
    require(std::isfinite(state_dependence), "state_dependence must be finite");
    require(std::isfinite(evaluation_link), "evaluation_link must be finite");
    require(trait_sd >= 0.0 && std::isfinite(trait_sd), "trait_sd must be finite and non-negative");
    require(shock_sd >= 0.0 && std::isfinite(shock_sd), "shock_sd must be finite and non-negative");
    require(shock_persistence >= 0.0 && shock_persistence < 1.0, "shock_persistence must lie in [0, 1)");
    require(attrition_hazard >= 0.0 && attrition_hazard < 1.0, "attrition_hazard must lie in [0, 1)");
    for (double p : {partial_share, item_missing_rate, partial_item_missing_rate, recruitment_missing_rate}) {
        require(p >= 0.0 && p <= 1.0, "rates must lie in [0, 1]");
    }
    for (const auto& [name, effects] : demographic_effects) {
        const auto& vars = recruitment_distributions();
        const auto it = std::find_if(vars.begin(), vars.end(), [&](const auto& v) { return name == v.name; });
        require(it != vars.end(), "no recruitment variable named '" + name + "'");
        require(effects.size() == it->categories.size(),
                "effects for '" + name + "' need one value per category");
        for (double e : effects) require(std::isfinite(e), "effects must be finite");
    }
}

Schema synthetic_schema(int n_waves) {
    std::vector<Variable> vars;
    for (const auto& d : recruitment_distributions()) {
        vars.push_back({d.name, d.kind, d.categories});
    }
    vars.push_back({"eval_interesting", Concept::SurveyEvaluation, kFivePoint});
    vars.push_back({"eval_difficult", Concept::SurveyEvaluation, kFivePoint});
    vars.push_back({"eval_too_long", Concept::SurveyEvaluation, kFivePoint});
    vars.push_back({"mode", Concept::SurveyParticipation, {"online", "mail"}});
    vars.push_back({"interrupted", Concept::SurveyParticipation, {"no", "yes"}});
    std::vector<std::string> labels;
    for (int w = 0; w < n_waves; ++w) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "w%02d", w);
        labels.emplace_back(buf);
    }
    return Schema(std::move(vars), std::move(labels));
}

Simulation simulate(const SimConfig& config) {
    config.validate();
    const Schema schema = synthetic_schema(config.n_waves);
    const auto& dists = recruitment_distributions();
    PanelBuilder builder(schema);
    Simulation sim{};
    Rng rng(config.seed);

    const int width = std::max(5, static_cast<int>(std::to_string(config.n_panelists).size()));
    for (std::size_t i = 0; i < config.n_panelists; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "p%0*zu", width, i + 1);

        Panelist p;
        p.id = id;
        double base = config.intercept;
        for (const auto& d : dists) {
            Code code = draw_category(rng, d.probabilities);
            if (rng.bernoulli(config.recruitment_missing_rate)) {
                code = kMissing;
            }
            p.attributes.push_back(code);
            const auto eff = config.demographic_effects.find(d.name);
            if (code != kMissing && eff != config.demographic_effects.end()) {
                base += eff->second[static_cast<std::size_t>(code)];
            }
        }
        const double trait = config.trait_sd * rng.normal();
        const double stationary_sd =
            config.shock_sd / std::sqrt(1.0 - config.shock_persistence * config.shock_persistence);
        double shock = stationary_sd * rng.normal();
        Code mode = rng.bernoulli(0.65) ? 0 : 1;

        std::vector<int> nonresponse;
        for (int t = 0; t < config.n_waves; ++t) {
            if (t >= 1 && rng.bernoulli(config.attrition_hazard)) {
                p.dropout_wave = t;
                break;
            }
            if (t >= 1) {
                shock = config.shock_persistence * shock + config.shock_sd * rng.normal();
            }
            int recent_nr = 0;
            for (int s = std::max(0, t - 3); s < t; ++s) recent_nr += nonresponse[static_cast<std::size_t>(s)];
            const double eta = base + trait + shock - config.state_dependence * recent_nr;
            const double propensity = models::sigmoid(eta);
            sim.truth.push_back({i, t, propensity});

            WaveRecord rec;
            rec.panelist_id = p.id;
            rec.wave = t;
            rec.items.assign(schema.wave_items().size(), kMissing);
            const bool responds = rng.bernoulli(propensity);
            nonresponse.push_back(responds ? 0 : 1);
            if (responds) {
                rec.status = rng.bernoulli(config.partial_share) ? ResponseStatus::Partial : ResponseStatus::Complete;
                const double missing_rate = rec.status == ResponseStatus::Partial
                                                ? config.partial_item_missing_rate
                                                : config.item_missing_rate;
                const double signal = config.evaluation_link * (eta - config.intercept);
                if (rng.bernoulli(0.02)) mode = static_cast<Code>(1 - mode);
                const Code values[] = {
                    five_point(0.6 * signal + rng.normal()),
                    five_point(-0.6 * signal + rng.normal()),
                    five_point(-0.4 * signal + rng.normal()),
                    mode,
                    rng.bernoulli(models::sigmoid(-2.0 - 0.5 * signal)) ? Code{1} : Code{0},
                };
                for (std::size_t k = 0; k < rec.items.size(); ++k) {
                    rec.items[k] = rng.bernoulli(missing_rate) ? kMissing : values[k];
                }
            } else {
                rec.status = ResponseStatus::Nonresponse;
            }
            builder.add_record(std::move(rec));

            if (t >= 2 && nonresponse[static_cast<std::size_t>(t)] && nonresponse[static_cast<std::size_t>(t - 1)] &&
                nonresponse[static_cast<std::size_t>(t - 2)]) {
                p.dropout_wave = t + 1;
                break;
            }
        }
        builder.add_panelist(std::move(p));
    }
    sim.dataset = builder.build();
    return sim;
}

void write_simulation(const Simulation& sim, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    csv::write_file(dir / "recruitment.csv", export_recruitment_csv(sim.dataset));
    csv::write_file(dir / "waves.csv", export_waves_csv(sim.dataset));
    csv::write_file(dir / "schema.json", sim.dataset.schema().to_json().dump(2) + "\n");
    std::string truth;
    csv::append_row(truth, {"panelist_id", "wave", "propensity"});
    for (const auto& row : sim.truth) {
        csv::append_row(truth, {sim.dataset.panelist_id(row.panelist), std::to_string(row.wave),
                                csv::format_number(row.propensity)});
    }
    csv::write_file(dir / "truth.csv", truth);
}

} // namespace nrp
