#include "support.hpp"

#include "nrp/model_zoo.hpp"
#include "nrp/synth.hpp"

#include <doctest.h>

#include <chrono>
#include <set>

using namespace nrp;
using nlohmann::json;

namespace {

struct Fixture {
    FeatureMatrix X;
    std::vector<int> y;
};

Fixture fixture(std::uint64_t seed = 1) {
    SimConfig c = SimConfig::defaults();
    c.n_panelists = 300;
    c.n_waves = 6;
    c.seed = seed;
    c.intercept = 0.5;
    const auto ds = simulate(c).dataset;
    const auto ov = outcome_vector(ds, 3);
    return {build_feature_matrix(ds, 2, BlockSet::all(), ov.panelists), ov.outcome};
}

json small_grid() {
    return json{{"logistic", {{"penalty", {"l1"}}, {"C", {1.0}}}},
                {"tree", {{"max_depth", {3}}, {"max_features", {"sqrt"}}}},
                {"forest", {{"max_features", {"sqrt"}}, {"min_samples_leaf", {5}}, {"n_estimators", {10}}}},
                {"extra_trees", {{"max_features", {"log2"}}, {"min_samples_leaf", {5}}, {"n_estimators", {10}}}},
                {"boosting", {{"max_depth", {2}}, {"n_estimators", {15}}, {"learning_rate", {0.1}}, {"subsample", {0.8}}}}};
}

} // namespace

TEST_CASE("published grid has 40 settings and 200 specs") {
    const auto start = std::chrono::steady_clock::now();
    const auto grid = reference_grid();
    CHECK(count_settings(grid) == 40);
    const auto specs = enumerate_grid(grid);
    CHECK(specs.size() == 200);
    std::map<Family, std::size_t> per_family;
    std::set<std::string> ids;
    for (const auto& s : specs) {
        ++per_family[s.family];
        ids.insert(s.spec_id);
        CHECK(s.spec_id.size() == 16);
    }
    CHECK(ids.size() == 200);
    CHECK(per_family[Family::Logistic] == 8 * 5);
    CHECK(per_family[Family::Tree] == 6 * 5);
    CHECK(per_family[Family::Forest] == 4 * 5);
    CHECK(per_family[Family::ExtraTrees] == 4 * 5);
    CHECK(per_family[Family::Boosting] == 18 * 5);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("enumeration order and ids are deterministic") {
    const auto a = enumerate_grid(reference_grid());
    const auto b = enumerate_grid(reference_grid());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].spec_id == b[i].spec_id);
    CHECK(a[0].canonical() == "logistic|penalty=l1;C=0.05|I");
    CHECK(a[4].groups == BlockSet::all());
    CHECK(a[5].canonical() == "logistic|penalty=l1;C=0.1|I");
    CHECK(a[40].family == Family::Tree);
    CHECK(a[40].canonical() == "tree|max_depth=3;max_features=all|I");
}

TEST_CASE("one value per parameter in a single family gives five specs") {
    const auto specs = enumerate_grid(json{{"tree", {{"max_depth", {5}}, {"max_features", {nullptr}}}}});
    CHECK(specs.size() == 5);
    for (const auto& s : specs) CHECK(std::get<TreeParams>(s.params).max_depth == 5);
    const auto scalar = enumerate_grid(json{{"forest", {{"n_estimators", 7}}}});
    CHECK(scalar.size() == 5);
    CHECK(std::get<ForestParams>(scalar[0].params).n_estimators == 7);
}

TEST_CASE("grid errors") {
    CHECK_NRP_ERROR(enumerate_grid(json::object()), ErrorCode::EmptyGrid);
    CHECK_NRP_ERROR(enumerate_grid(json{{"tree", {{"max_depth", json::array()}}}}), ErrorCode::EmptyGrid);
    CHECK_NRP_ERROR(enumerate_grid(json{{"svm", {{"C", {1}}}}}), ErrorCode::ConfigInvalid);
    CHECK_NRP_ERROR(enumerate_grid(json{{"tree", {{"C", {1}}}}}), ErrorCode::ConfigInvalid);
    CHECK_NRP_ERROR(enumerate_grid(json{{"logistic", {{"penalty", {"l3"}}}}}), ErrorCode::ConfigInvalid);
    CHECK_NRP_ERROR(enumerate_grid(json{{"tree", {{"max_depth", {3, 3}}}}}), ErrorCode::ConfigInvalid);
    CHECK_NRP_ERROR(make_spec(Family::Tree, LogisticParams{}, BlockSet::all()), ErrorCode::ConfigInvalid);
    CHECK_NRP_ERROR(make_spec(Family::Tree, TreeParams{}, BlockSet{}), ErrorCode::EmptyGroups);
}

TEST_CASE("every family trains, predicts in the unit interval and is seeded") {
    const auto fx = fixture();
    for (const auto& spec : enumerate_grid(small_grid(), std::vector<BlockSet>{BlockSet::all()})) {
        const auto m = train(spec, fx.X, fx.y, 77);
        const auto p = predict_proba(m, fx.X);
        REQUIRE(p.size() == fx.y.size());
        for (double v : p) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(predict_proba(train(spec, fx.X, fx.y, 77), fx.X) == p);
        const auto imp = feature_importances(m);
        CHECK(imp.scores.size() == fx.X.columns.size());
        if (!imp.all_zero) CHECK(*std::max_element(imp.scores.begin(), imp.scores.end()) == 100.0);
    }
}

TEST_CASE("prediction refuses a matrix with a different column schema") {
    const auto fx = fixture();
    const auto spec = make_spec(Family::Tree, TreeParams{3, MaxFeatures::All}, BlockSet::all());
    const auto m = train(spec, fx.X, fx.y, 1);
    CHECK_NRP_ERROR(predict_proba(m, fx.X.select({Block::I})), ErrorCode::SchemaMismatch);
    auto renamed = fx.X;
    renamed.columns[0].category = "other";
    CHECK_NRP_ERROR(predict_proba(m, renamed), ErrorCode::SchemaMismatch);
}

TEST_CASE("importance scaling") {
    const auto s = scale_importances({0.0, 2.0, 0.5});
    CHECK(s.scores == std::vector<double>{0.0, 100.0, 25.0});
    CHECK_FALSE(s.all_zero);
    const auto z = scale_importances({0.0, 0.0});
    CHECK(z.all_zero);
    CHECK(z.scores == std::vector<double>{0.0, 0.0});
}

TEST_CASE("a single split puts all importance on its feature") {
    Matrix X(6, 3);
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    for (std::size_t i = 0; i < 6; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = static_cast<double>(i);
        X(i, 2) = static_cast<double>(i % 2);
    }
    const auto spec = make_spec(Family::Tree, TreeParams{1, MaxFeatures::All}, BlockSet::all());
    const auto imp = feature_importances(train(spec, X, y, 1, 0));
    CHECK(imp.scores == std::vector<double>{0.0, 100.0, 0.0});
}

TEST_CASE("constant model scores are constant") {
    const auto fx = fixture();
    const std::vector<int> ones(fx.y.size(), 1);
    const auto spec = make_spec(Family::Tree, TreeParams{}, BlockSet::all());
    const auto m = train(spec, fx.X, ones, 1);
    for (double p : predict_proba(m, fx.X)) CHECK(p == 1.0);
    CHECK(feature_importances(m).all_zero);
}

TEST_CASE("model JSON round trip preserves predictions") {
    const auto fx = fixture(2);
    for (const auto& spec : enumerate_grid(small_grid(), std::vector<BlockSet>{{Block::I, Block::III}})) {
        const auto Xs = fx.X.select(spec.groups);
        const auto m = train(spec, Xs, fx.y, 5);
        const auto j = to_json(m);
        const auto back = model_from_json(json::parse(j.dump()));
        CHECK(back.spec().spec_id == spec.spec_id);
        CHECK(back.seed() == 5);
        CHECK(back.fingerprint() == m.fingerprint());
        CHECK(predict_proba(back, Xs) == predict_proba(m, Xs));
        CHECK(to_json(back) == j);
    }
}

TEST_CASE("derived seeds differ by split and spec") {
    CHECK(derive_seed(1, 0, "a") == derive_seed(1, 0, "a"));
    CHECK(derive_seed(1, 0, "a") != derive_seed(1, 1, "a"));
    CHECK(derive_seed(1, 0, "a") != derive_seed(1, 0, "b"));
    CHECK(derive_seed(1, 0, "a") != derive_seed(2, 0, "a"));
}
