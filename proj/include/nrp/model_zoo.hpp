#pragma once

#include "nrp/features.hpp"
#include "nrp/matrix.hpp"
#include "nrp/models/boosting.hpp"
#include "nrp/models/logistic.hpp"
#include "nrp/models/tree.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nrp {

enum class Family : std::uint8_t { Logistic, Tree, Forest, ExtraTrees, Boosting };

inline constexpr Family kAllFamilies[] = {Family::Logistic, Family::Tree, Family::Forest,
                                          Family::ExtraTrees, Family::Boosting};

/// Grid/config key: "logistic", "tree", "forest", "extra_trees", "boosting".
std::string_view to_string(Family f) noexcept;
Family family_from_string(std::string_view name);

using models::MaxFeatures;
using models::Penalty;

struct LogisticParams {
    Penalty penalty = Penalty::L2;
    double C = 1.0;
};

struct TreeParams {
    /// nullopt grows until leaves are pure.
    std::optional<int> max_depth;
    MaxFeatures max_features = MaxFeatures::All;
};

/// Shared by random forests and extra-trees.
struct ForestParams {
    MaxFeatures max_features = MaxFeatures::Sqrt;
    int min_samples_leaf = 1;
    int n_estimators = 100;
};

struct BoostingParams {
    int max_depth = 3;
    int n_estimators = 100;
    double learning_rate = 0.1;
    double subsample = 1.0;
};

using Hyperparameters = std::variant<LogisticParams, TreeParams, ForestParams, BoostingParams>;

/// Every hyperparameter name a grid may use, in record-column order.
inline constexpr std::string_view kHyperparameterNames[] = {
    "penalty", "C", "max_depth", "max_features", "min_samples_leaf", "n_estimators",
    "learning_rate", "subsample"};

struct ModelSpec {
    Family family = Family::Logistic;
    Hyperparameters params;
    BlockSet groups;
    /// 16 hex digits hashed from the canonical text.
    std::string spec_id;

    /// Stable text such as `forest|max_features=sqrt;min_samples_leaf=1;n_estimators=500|all`.
    std::string canonical() const;
    /// (name, value) text pairs for the hyperparameters this family uses.
    std::vector<std::pair<std::string, std::string>> hyperparameters() const;
};

/// Builds a spec and assigns its id; throws when params do not belong to the family.
ModelSpec make_spec(Family family, Hyperparameters params, BlockSet groups);

/// Cartesian product of each family's value lists times the feature groups.
///
/// Grid shape: `{family: {param: [values...]}}`; parameters left out take the
/// struct defaults above. Order: families in kAllFamilies order, then
/// settings (parameters in the fixed order of the params struct, first
/// varying slowest), then groups.
std::vector<ModelSpec> enumerate_grid(const nlohmann::json& grid,
                                      std::span<const BlockSet> groups = standard_feature_groups());

/// Number of hyperparameter settings in a grid, before crossing with feature groups.
std::size_t count_settings(const nlohmann::json& grid);

/// The published tuning grid (40 settings).
nlohmann::json reference_grid();

struct TrainOptions {
    /// Test hook: grow forest trees on the full sample instead of bootstrap resamples.
    bool bootstrap = true;
    models::LogisticSolverOptions logistic;
};

class TrainedModel {
public:
    using State = std::variant<models::LogisticModel, models::TreeEnsemble, models::BoostedTrees>;

    TrainedModel(ModelSpec spec, std::uint64_t seed, std::uint64_t fingerprint, std::size_t n_features,
                 State state)
        : spec_(std::move(spec)), seed_(seed), fingerprint_(fingerprint), n_features_(n_features),
          state_(std::move(state)) {}

    const ModelSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const State& state() const noexcept { return state_; }

    /// Scores without a schema check; X must have the training column layout.
    std::vector<double> predict_unchecked(const Matrix& X) const;

private:
    ModelSpec spec_;
    std::uint64_t seed_;
    std::uint64_t fingerprint_;
    std::size_t n_features_;
    State state_;
};

TrainedModel train(const ModelSpec& spec, const Matrix& X, std::span<const int> y, std::uint64_t seed,
                   std::uint64_t fingerprint, const TrainOptions& options = {});
TrainedModel train(const ModelSpec& spec, const FeatureMatrix& X, std::span<const int> y,
                   std::uint64_t seed, const TrainOptions& options = {});

/// Nonresponse probabilities; throws SCHEMA_MISMATCH when the columns differ from training.
std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& X);

struct Importances {
    /// One score per training column, scaled so the maximum is 100.
    std::vector<double> scores;
    /// No split or non-zero coefficient: every score is 0.
    bool all_zero = false;
};

/// |coefficient| for logistic models, impurity decrease for tree families, loss reduction for boosting.
std::vector<double> raw_importances(const TrainedModel& model);
Importances feature_importances(const TrainedModel& model);
/// Multiplies by 100 / max.
Importances scale_importances(std::vector<double> raw);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

/// Stable per-task seed derived from the master seed, split index and spec id.
std::uint64_t derive_seed(std::uint64_t master, int split_index, std::string_view spec_id);

} // namespace nrp
