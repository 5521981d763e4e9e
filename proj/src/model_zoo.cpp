#include "nrp/model_zoo.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"
#include "nrp/rng.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <unordered_set>

namespace nrp {

using nlohmann::json;

std::string_view to_string(Family f) noexcept {
    switch (f) {
    case Family::Logistic: return "logistic";
    case Family::Tree: return "tree";
    case Family::Forest: return "forest";
    case Family::ExtraTrees: return "extra_trees";
    case Family::Boosting: return "boosting";
    }
    return "?";
}

Family family_from_string(std::string_view name) {
    for (Family f : kAllFamilies) {
        if (to_string(f) == name) {
            return f;
        }
    }
    fail(ErrorCode::ConfigInvalid, "unknown model family '" + std::string(name) + "'");
}

namespace {

std::string_view to_string(MaxFeatures m) {
    switch (m) {
    case MaxFeatures::All: return "all";
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::Log2: return "log2";
    }
    return "?";
}

std::string_view to_string(Penalty p) { return p == Penalty::L1 ? "l1" : "l2"; }

[[noreturn]] void bad_value(std::string_view param, const json& value) {
    fail(ErrorCode::ConfigInvalid,
         "invalid value " + value.dump() + " for hyperparameter '" + std::string(param) + "'");
}

int as_int(std::string_view param, const json& v, int min) {
    if (v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
        const auto i = v.get<std::int64_t>();
        if (i >= min && i <= 1'000'000'000) {
            return static_cast<int>(i);
        }
    }
    bad_value(param, v);
}

double as_positive(std::string_view param, const json& v) {
    if (v.is_number() && std::isfinite(v.get<double>()) && v.get<double>() > 0.0) {
        return v.get<double>();
    }
    bad_value(param, v);
}

MaxFeatures as_max_features(std::string_view param, const json& v, bool allow_all) {
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "all")) {
        if (allow_all) return MaxFeatures::All;
    } else if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "sqrt") return MaxFeatures::Sqrt;
        if (s == "log2") return MaxFeatures::Log2;
    }
    bad_value(param, v);
}

/// Fixed parameter order per family; it defines both enumeration order and canonical text.
const std::vector<std::string_view>& parameter_names(Family f) {
    static const std::vector<std::string_view> logistic{"penalty", "C"};
    static const std::vector<std::string_view> tree{"max_depth", "max_features"};
    static const std::vector<std::string_view> forest{"max_features", "min_samples_leaf", "n_estimators"};
    static const std::vector<std::string_view> boosting{"max_depth", "n_estimators", "learning_rate",
                                                        "subsample"};
    switch (f) {
    case Family::Logistic: return logistic;
    case Family::Tree: return tree;
    case Family::Forest:
    case Family::ExtraTrees: return forest;
    case Family::Boosting: return boosting;
    }
    return logistic;
}

void set_param(Family f, Hyperparameters& params, std::string_view name, const json& v) {
    switch (f) {
    case Family::Logistic: {
        auto& p = std::get<LogisticParams>(params);
        if (name == "penalty") {
            if (v == "l1") p.penalty = Penalty::L1;
            else if (v == "l2") p.penalty = Penalty::L2;
            else bad_value(name, v);
        } else if (name == "C") {
            p.C = as_positive(name, v);
        }
        return;
    }
    case Family::Tree: {
        auto& p = std::get<TreeParams>(params);
        if (name == "max_depth") {
            p.max_depth = v.is_null() ? std::nullopt : std::optional<int>(as_int(name, v, 1));
        } else if (name == "max_features") {
            p.max_features = as_max_features(name, v, true);
        }
        return;
    }
    case Family::Forest:
    case Family::ExtraTrees: {
        auto& p = std::get<ForestParams>(params);
        if (name == "max_features") p.max_features = as_max_features(name, v, true);
        else if (name == "min_samples_leaf") p.min_samples_leaf = as_int(name, v, 1);
        else if (name == "n_estimators") p.n_estimators = as_int(name, v, 1);
        return;
    }
    case Family::Boosting: {
        auto& p = std::get<BoostingParams>(params);
        if (name == "max_depth") p.max_depth = as_int(name, v, 1);
        else if (name == "n_estimators") p.n_estimators = as_int(name, v, 0);
        else if (name == "learning_rate") p.learning_rate = as_positive(name, v);
        else if (name == "subsample") {
            p.subsample = as_positive(name, v);
            if (p.subsample > 1.0) bad_value(name, v);
        }
        return;
    }
    }
}

Hyperparameters default_params(Family f) {
    switch (f) {
    case Family::Logistic: return LogisticParams{};
    case Family::Tree: return TreeParams{};
    case Family::Forest:
    case Family::ExtraTrees: return ForestParams{};
    case Family::Boosting: return BoostingParams{};
    }
    return LogisticParams{};
}

bool params_match(Family f, const Hyperparameters& params) {
    switch (f) {
    case Family::Logistic: return std::holds_alternative<LogisticParams>(params);
    case Family::Tree: return std::holds_alternative<TreeParams>(params);
    case Family::Forest:
    case Family::ExtraTrees: return std::holds_alternative<ForestParams>(params);
    case Family::Boosting: return std::holds_alternative<BoostingParams>(params);
    }
    return false;
}

void check_known_params(Family f, const json& obj) {
    const auto& names = parameter_names(f);
    for (const auto& [key, value] : obj.items()) {
        if (std::find(names.begin(), names.end(), key) == names.end()) {
            fail(ErrorCode::ConfigInvalid, "hyperparameter '" + key + "' is not tunable for family '" +
                                               std::string(to_string(f)) + "'");
        }
    }
}

std::vector<json> value_list(const json& v) {
    if (v.is_array()) {
        return std::vector<json>(v.begin(), v.end());
    }
    return {v};
}

} // namespace

std::vector<std::pair<std::string, std::string>> ModelSpec::hyperparameters() const {
    using csv::format_number;
    std::vector<std::pair<std::string, std::string>> out;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LogisticParams>) {
                out.emplace_back("penalty", std::string(to_string(p.penalty)));
                out.emplace_back("C", format_number(p.C));
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                out.emplace_back("max_depth", p.max_depth ? std::to_string(*p.max_depth) : "none");
                out.emplace_back("max_features", std::string(to_string(p.max_features)));
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                out.emplace_back("max_features", std::string(to_string(p.max_features)));
                out.emplace_back("min_samples_leaf", std::to_string(p.min_samples_leaf));
                out.emplace_back("n_estimators", std::to_string(p.n_estimators));
            } else {
                out.emplace_back("max_depth", std::to_string(p.max_depth));
                out.emplace_back("n_estimators", std::to_string(p.n_estimators));
                out.emplace_back("learning_rate", format_number(p.learning_rate));
                out.emplace_back("subsample", format_number(p.subsample));
            }
        },
        params);
    return out;
}

std::string ModelSpec::canonical() const {
    std::string text(to_string(family));
    text += '|';
    bool first = true;
    for (const auto& [k, v] : hyperparameters()) {
        if (!first) text += ';';
        text += k + "=" + v;
        first = false;
    }
    text += '|';
    text += groups.name();
    return text;
}

ModelSpec make_spec(Family family, Hyperparameters params, BlockSet groups) {
    if (!params_match(family, params)) {
        fail(ErrorCode::ConfigInvalid,
             "hyperparameters do not belong to family '" + std::string(to_string(family)) + "'");
    }
    if (groups.empty()) {
        fail(ErrorCode::EmptyGroups, "model spec without feature groups");
    }
    ModelSpec spec{family, std::move(params), groups, {}};
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(spec.canonical()));
    spec.spec_id = buf;
    return spec;
}

std::size_t count_settings(const json& grid) {
    if (!grid.is_object() || grid.empty()) {
        fail(ErrorCode::EmptyGrid, "grid declares no model families");
    }
    std::size_t total = 0;
    for (Family f : kAllFamilies) {
        if (!grid.contains(to_string(f))) continue;
        const auto& obj = grid.at(std::string(to_string(f)));
        check_known_params(f, obj);
        std::size_t n = 1;
        for (const auto& [key, values] : obj.items()) {
            n *= value_list(values).size();
        }
        total += n;
    }
    return total;
}

std::vector<ModelSpec> enumerate_grid(const json& grid, std::span<const BlockSet> groups) {
    if (!grid.is_object() || grid.empty()) {
        fail(ErrorCode::EmptyGrid, "grid declares no model families");
    }
    if (groups.empty()) {
        fail(ErrorCode::EmptyGroups, "no feature groups to cross the grid with");
    }
    for (const auto& [key, value] : grid.items()) {
        family_from_string(key);
        if (!value.is_object()) {
            fail(ErrorCode::ConfigInvalid, "grid entry '" + key + "' must be an object");
        }
    }

    std::vector<ModelSpec> specs;
    std::unordered_set<std::string> ids;
    for (Family f : kAllFamilies) {
        const std::string key(to_string(f));
        if (!grid.contains(key)) continue;
        const json& obj = grid.at(key);
        check_known_params(f, obj);

        std::vector<std::pair<std::string_view, std::vector<json>>> axes;
        for (auto name : parameter_names(f)) {
            if (obj.contains(std::string(name))) {
                auto values = value_list(obj.at(std::string(name)));
                if (values.empty()) {
                    fail(ErrorCode::EmptyGrid, "empty value list for '" + key + "." + std::string(name) + "'");
                }
                axes.emplace_back(name, std::move(values));
            }
        }

        std::vector<std::size_t> idx(axes.size(), 0);
        while (true) {
            Hyperparameters params = default_params(f);
            for (std::size_t a = 0; a < axes.size(); ++a) {
                set_param(f, params, axes[a].first, axes[a].second[idx[a]]);
            }
            for (BlockSet g : groups) {
                ModelSpec spec = make_spec(f, params, g);
                if (!ids.insert(spec.spec_id).second) {
                    fail(ErrorCode::ConfigInvalid, "duplicate model spec " + spec.canonical());
                }
                specs.push_back(std::move(spec));
            }
            // Odometer over the axes, last axis fastest.
            std::size_t a = axes.size();
            while (a > 0) {
                --a;
                if (++idx[a] < axes[a].second.size()) break;
                idx[a] = 0;
                if (a == 0) { a = axes.size() + 1; break; }
            }
            if (axes.empty() || a == axes.size() + 1) break;
        }
    }
    if (specs.empty()) {
        fail(ErrorCode::EmptyGrid, "grid produced no model specs");
    }
    return specs;
}

json reference_grid() {
    return json{
        {"logistic", {{"penalty", {"l1", "l2"}}, {"C", {0.05, 0.1, 1, 1000}}}},
        {"tree", {{"max_depth", {3, 5, 10}}, {"max_features", {nullptr, "sqrt"}}}},
        {"forest", {{"max_features", {"sqrt", "log2"}}, {"min_samples_leaf", {1, 10}}, {"n_estimators", {500}}}},
        {"extra_trees",
         {{"max_features", {"sqrt", "log2"}}, {"min_samples_leaf", {1, 10}}, {"n_estimators", {500}}}},
        {"boosting",
         {{"max_depth", {3, 5, 10}},
          {"n_estimators", {250, 500, 1000}},
          {"learning_rate", {0.1, 0.05}},
          {"subsample", {0.8}}}},
    };
}

// ---------------------------------------------------------------------------
// Training and prediction
// ---------------------------------------------------------------------------

std::vector<double> TrainedModel::predict_unchecked(const Matrix& X) const {
    if (X.cols() != n_features_) {
        fail(ErrorCode::SchemaMismatch, "expected " + std::to_string(n_features_) + " columns, got " +
                                            std::to_string(X.cols()));
    }
    return std::visit([&](const auto& m) { return m.predict(X); }, state_);
}

TrainedModel train(const ModelSpec& spec, const Matrix& X, std::span<const int> y, std::uint64_t seed,
                   std::uint64_t fingerprint, const TrainOptions& options) {
    if (!params_match(spec.family, spec.params)) {
        fail(ErrorCode::ConfigInvalid, "spec parameters do not match its family");
    }
    TrainedModel::State state = [&]() -> TrainedModel::State {
        switch (spec.family) {
        case Family::Logistic: {
            const auto& p = std::get<LogisticParams>(spec.params);
            return models::fit_logistic(X, y, p.penalty, p.C, options.logistic);
        }
        case Family::Tree: {
            const auto& p = std::get<TreeParams>(spec.params);
            return models::fit_tree(X, y, p.max_depth, p.max_features, seed);
        }
        case Family::Forest:
        case Family::ExtraTrees: {
            const auto& p = std::get<ForestParams>(spec.params);
            models::ForestOptions fo;
            fo.max_features = p.max_features;
            fo.min_samples_leaf = p.min_samples_leaf;
            fo.n_estimators = p.n_estimators;
            fo.bootstrap = spec.family == Family::Forest && options.bootstrap;
            fo.random_thresholds = spec.family == Family::ExtraTrees;
            return models::fit_forest(X, y, fo, seed);
        }
        case Family::Boosting: {
            const auto& p = std::get<BoostingParams>(spec.params);
            models::BoostingOptions bo;
            bo.max_depth = p.max_depth;
            bo.n_estimators = p.n_estimators;
            bo.learning_rate = p.learning_rate;
            bo.subsample = p.subsample;
            return models::fit_boosting(X, y, bo, seed);
        }
        }
        fail(ErrorCode::ConfigInvalid, "unknown family");
    }();
    return TrainedModel(spec, seed, fingerprint, X.cols(), std::move(state));
}

TrainedModel train(const ModelSpec& spec, const FeatureMatrix& X, std::span<const int> y,
                   std::uint64_t seed, const TrainOptions& options) {
    return train(spec, X.values, y, seed, X.fingerprint(), options);
}

std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& X) {
    if (X.fingerprint() != model.fingerprint()) {
        fail(ErrorCode::SchemaMismatch, "feature columns differ from the training schema");
    }
    return model.predict_unchecked(X.values);
}

std::vector<double> raw_importances(const TrainedModel& model) {
    return std::visit(
        [](const auto& m) -> std::vector<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, models::LogisticModel>) {
                std::vector<double> out(m.weights.size());
                std::transform(m.weights.begin(), m.weights.end(), out.begin(),
                               [](double w) { return std::abs(w); });
                return out;
            } else {
                return m.importance;
            }
        },
        model.state());
}

Importances scale_importances(std::vector<double> raw) {
    Importances out;
    const double max = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
    if (!(max > 0.0)) {
        out.scores.assign(raw.size(), 0.0);
        out.all_zero = true;
        return out;
    }
    // Dividing first keeps the maximum at exactly 100.
    for (double& v : raw) v = v / max * 100.0;
    out.scores = std::move(raw);
    return out;
}

Importances feature_importances(const TrainedModel& model) {
    return scale_importances(raw_importances(model));
}

std::uint64_t derive_seed(std::uint64_t master, int split_index, std::string_view spec_id) {
    return mix_seed(mix_seed(master, static_cast<std::uint64_t>(split_index)), fnv1a(spec_id));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kModelFormatVersion = 1;

json tree_to_json(const models::DecisionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.depth, n.weight, n.value, n.impurity,
                         n.gain});
    }
    return nodes;
}

models::DecisionTree tree_from_json(const json& j) {
    models::DecisionTree tree;
    for (const auto& a : j) {
        models::TreeNode n;
        n.feature = a.at(0).get<int>();
        n.threshold = a.at(1).get<double>();
        n.left = a.at(2).get<int>();
        n.right = a.at(3).get<int>();
        n.depth = a.at(4).get<int>();
        n.weight = a.at(5).get<double>();
        n.value = a.at(6).get<double>();
        n.impurity = a.at(7).get<double>();
        n.gain = a.at(8).get<double>();
        tree.nodes.push_back(n);
    }
    return tree;
}

json params_to_json(const ModelSpec& spec) {
    json obj = json::object();
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LogisticParams>) {
                obj["penalty"] = std::string(to_string(p.penalty));
                obj["C"] = p.C;
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                obj["max_depth"] = p.max_depth ? json(*p.max_depth) : json(nullptr);
                obj["max_features"] = std::string(to_string(p.max_features));
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                obj["max_features"] = std::string(to_string(p.max_features));
                obj["min_samples_leaf"] = p.min_samples_leaf;
                obj["n_estimators"] = p.n_estimators;
            } else {
                obj["max_depth"] = p.max_depth;
                obj["n_estimators"] = p.n_estimators;
                obj["learning_rate"] = p.learning_rate;
                obj["subsample"] = p.subsample;
            }
        },
        spec.params);
    return obj;
}

} // namespace

json to_json(const TrainedModel& model) {
    char fp[17];
    std::snprintf(fp, sizeof(fp), "%016" PRIx64, model.fingerprint());
    json state = std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, models::LogisticModel>) {
                return {{"mean", m.standardizer.mean},
                        {"scale", m.standardizer.scale},
                        {"weights", m.weights},
                        {"intercept", m.intercept},
                        {"epochs", m.epochs},
                        {"converged", m.converged}};
            } else if constexpr (std::is_same_v<T, models::TreeEnsemble>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"trees", trees}, {"importance", m.importance}};
            } else {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"base_score", m.base_score},
                        {"learning_rate", m.learning_rate},
                        {"trees", trees},
                        {"importance", m.importance}};
            }
        },
        model.state());
    return {{"format", "nrp-model"},
            {"version", kModelFormatVersion},
            {"spec",
             {{"family", std::string(to_string(model.spec().family))},
              {"hyperparameters", params_to_json(model.spec())},
              {"groups", model.spec().groups.name()},
              {"spec_id", model.spec().spec_id}}},
            {"seed", model.seed()},
            {"fingerprint", fp},
            {"n_features", model.n_features()},
            {"state", state}};
}

TrainedModel model_from_json(const json& j) {
    try {
        if (j.at("format") != "nrp-model" || j.at("version").get<int>() != kModelFormatVersion) {
            fail(ErrorCode::ParseError, "unsupported model artifact format or version");
        }
        const auto& s = j.at("spec");
        const Family family = family_from_string(s.at("family").get<std::string>());
        Hyperparameters params = default_params(family);
        check_known_params(family, s.at("hyperparameters"));
        for (const auto& [k, v] : s.at("hyperparameters").items()) {
            set_param(family, params, k, v);
        }
        ModelSpec spec = make_spec(family, params, BlockSet::parse(s.at("groups").get<std::string>()));
        if (spec.spec_id != s.at("spec_id").get<std::string>()) {
            fail(ErrorCode::ParseError, "spec_id does not match the stored hyperparameters");
        }
        const auto fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
        const auto& st = j.at("state");
        TrainedModel::State state;
        if (family == Family::Logistic) {
            models::LogisticModel m;
            m.standardizer.mean = st.at("mean").get<std::vector<double>>();
            m.standardizer.scale = st.at("scale").get<std::vector<double>>();
            m.weights = st.at("weights").get<std::vector<double>>();
            m.intercept = st.at("intercept").get<double>();
            m.epochs = st.at("epochs").get<int>();
            m.converged = st.at("converged").get<bool>();
            state = std::move(m);
        } else if (family == Family::Boosting) {
            models::BoostedTrees m;
            m.base_score = st.at("base_score").get<double>();
            m.learning_rate = st.at("learning_rate").get<double>();
            for (const auto& t : st.at("trees")) m.trees.push_back(tree_from_json(t));
            m.importance = st.at("importance").get<std::vector<double>>();
            state = std::move(m);
        } else {
            models::TreeEnsemble m;
            for (const auto& t : st.at("trees")) m.trees.push_back(tree_from_json(t));
            m.importance = st.at("importance").get<std::vector<double>>();
            state = std::move(m);
        }
        return TrainedModel(std::move(spec), j.at("seed").get<std::uint64_t>(), fingerprint,
                            j.at("n_features").get<std::size_t>(), std::move(state));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed model artifact: ") + e.what());
    }
}

} // namespace nrp
