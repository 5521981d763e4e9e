#pragma once

#include "nrp/features.hpp"
#include "nrp/panel.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace nrp {

/// One rolling-origin step: features as of a wave, labels `gap + horizon` waves later.
struct Split {
    int train_as_of = 0;
    int train_label = 0;
    int test_as_of = 0;
    int test_label = 0;

    friend bool operator==(const Split&, const Split&) = default;
};

struct SplitPlan {
    std::vector<Split> splits;
    int horizon = 1;
    int gap = 0;

    nlohmann::json to_json() const;
    static SplitPlan from_json(const nlohmann::json& j);
};

/// Maximal rolling-origin plan over `n_waves` waves, starting with features as of wave 0.
///
/// Each split trains on labels that are already observed when the test
/// features are taken: test_as_of = train_label. With the default one-wave
/// horizon and no gap this is test_as_of = train_as_of + 1.
SplitPlan rolling_splits(int n_waves, int horizon = 1, int gap = 0);

struct LabeledMatrix {
    FeatureMatrix features;
    std::vector<int> labels;
};

struct SplitData {
    LabeledMatrix train;
    LabeledMatrix test;
};

/// Rows are the panelists active at each label wave, one row per panelist.
SplitData materialize(const PanelDataset& ds, const Split& split, BlockSet groups);

} // namespace nrp
