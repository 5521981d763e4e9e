#include "nrp/temporal_cv.hpp"

#include "nrp/error.hpp"

namespace nrp {

nlohmann::json SplitPlan::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : splits) {
        list.push_back({{"train_as_of", s.train_as_of},
                        {"train_label", s.train_label},
                        {"test_as_of", s.test_as_of},
                        {"test_label", s.test_label}});
    }
    return {{"horizon", horizon}, {"gap", gap}, {"splits", list}};
}

SplitPlan SplitPlan::from_json(const nlohmann::json& j) {
    SplitPlan plan;
    plan.horizon = j.at("horizon").get<int>();
    plan.gap = j.at("gap").get<int>();
    for (const auto& s : j.at("splits")) {
        plan.splits.push_back({s.at("train_as_of").get<int>(), s.at("train_label").get<int>(),
                               s.at("test_as_of").get<int>(), s.at("test_label").get<int>()});
    }
    return plan;
}

SplitPlan rolling_splits(int n_waves, int horizon, int gap) {
    if (horizon < 1 || gap < 0) {
        fail(ErrorCode::InvalidConfig, "horizon must be positive and gap non-negative");
    }
    const int lead = horizon + gap;
    if (n_waves < horizon + gap + 2 || n_waves < 2 * lead + 1) {
        fail(ErrorCode::TooFewWaves, std::to_string(n_waves) + " waves cannot hold a split with horizon " +
                                         std::to_string(horizon) + " and gap " + std::to_string(gap));
    }
    SplitPlan plan;
    plan.horizon = horizon;
    plan.gap = gap;
    for (int origin = 0; origin + 2 * lead <= n_waves - 1; ++origin) {
        const int train_label = origin + lead;
        plan.splits.push_back({origin, train_label, train_label, train_label + lead});
    }
    return plan;
}

namespace {

LabeledMatrix labeled(const PanelDataset& ds, int as_of, int label_wave, BlockSet groups) {
    if (as_of >= label_wave) {
        fail(ErrorCode::InvalidConfig, "label wave must follow the as-of wave");
    }
    auto outcomes = outcome_vector(ds, label_wave);
    LabeledMatrix out{build_feature_matrix(ds, as_of, groups, outcomes.panelists),
                      std::move(outcomes.outcome)};
    return out;
}

} // namespace

SplitData materialize(const PanelDataset& ds, const Split& split, BlockSet groups) {
    return {labeled(ds, split.train_as_of, split.train_label, groups),
            labeled(ds, split.test_as_of, split.test_label, groups)};
}

} // namespace nrp
