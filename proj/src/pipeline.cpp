#include "nrp/pipeline.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace nrp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kStoreVersion = 1;

json read_json_file(const fs::path& path) {
    const std::string text = csv::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
    }
}

std::uint64_t parse_env_u64(const char* name, const char* text) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used, 10);
        if (used == std::string_view(text).size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::ConfigInvalid, std::string(name) + " must be a non-negative integer");
}

BlockSet union_of(std::span<const BlockSet> groups) {
    BlockSet all;
    for (BlockSet g : groups) all = all | g;
    return all;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

struct TaskResult {
    EvaluationRecord record;
    std::vector<RiskListRow> risk_lists;
    std::vector<CurveRow> curves;
    std::vector<ImportanceRow> importances;
    std::vector<GroupedImportanceRow> grouped;
    std::optional<TrainedModel> model;
};

MetricValues empty_metrics(const std::vector<std::string>& names) {
    MetricValues m;
    for (const auto& n : names) m.emplace_back(n, std::nullopt);
    return m;
}

MetricValues keep_metrics(const MetricValues& all, const std::vector<std::string>& names) {
    MetricValues m;
    for (const auto& n : names) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const auto& kv) { return kv.first == n; });
        m.emplace_back(n, it == all.end() ? std::nullopt : it->second);
    }
    return m;
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) {
        fail(ErrorCode::ConfigInvalid, "run config must be a JSON object");
    }
    static const std::set<std::string> known{"data", "output_dir", "grid", "feature_groups", "cv",
                                             "metrics", "pct_cutoffs", "jaccard_cutoff", "seed",
                                             "threads", "lenient", "save_models"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            fail(ErrorCode::ConfigInvalid, "unknown run setting '" + key + "'");
        }
    }
    RunConfig c;
    const json& data = j.contains("data") ? j.at("data") : json::object();
    for (const char* key : {"schema", "recruitment", "waves"}) {
        if (!data.contains(key)) {
            fail(ErrorCode::ConfigInvalid, std::string("data.") + key + " is required");
        }
    }
    c.schema = resolve(base_dir, get_as<std::string>(data, "schema"));
    c.recruitment = resolve(base_dir, get_as<std::string>(data, "recruitment"));
    c.waves = resolve(base_dir, get_as<std::string>(data, "waves"));
    if (!j.contains("output_dir")) {
        fail(ErrorCode::ConfigInvalid, "output_dir is required");
    }
    c.output_dir = resolve(base_dir, get_as<std::string>(j, "output_dir"));

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.is_string()) {
            c.grid = read_json_file(resolve(base_dir, g.get<std::string>()));
        } else if (g.is_object()) {
            c.grid = g;
        } else {
            fail(ErrorCode::ConfigInvalid, "grid must be an object or a path");
        }
    }
    if (j.contains("feature_groups")) {
        c.feature_groups.clear();
        for (const auto& name : get_as<std::vector<std::string>>(j, "feature_groups")) {
            c.feature_groups.push_back(BlockSet::parse(name));
        }
    }
    if (j.contains("cv")) {
        const auto& cv = j.at("cv");
        if (cv.contains("horizon")) c.horizon = get_as<int>(cv, "horizon");
        if (cv.contains("gap")) c.gap = get_as<int>(cv, "gap");
    }
    if (j.contains("metrics")) c.metrics = get_as<std::vector<std::string>>(j, "metrics");
    if (j.contains("pct_cutoffs")) c.pct_cutoffs = get_as<std::vector<double>>(j, "pct_cutoffs");
    if (j.contains("jaccard_cutoff")) c.jaccard_cutoff = get_as<double>(j, "jaccard_cutoff");
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("threads")) c.threads = get_as<unsigned>(j, "threads");
    if (j.contains("lenient")) c.lenient = get_as<bool>(j, "lenient");
    if (j.contains("save_models")) c.save_models = get_as<bool>(j, "save_models");
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    RunConfig c = from_json(read_json_file(path), path.parent_path());
    c.apply_environment();
    return c;
}

void RunConfig::apply_environment() {
    if (const char* s = std::getenv("NRP_SEED"); s && *s) {
        seed = parse_env_u64("NRP_SEED", s);
    }
    if (const char* t = std::getenv("NRP_THREADS"); t && *t) {
        threads = static_cast<unsigned>(parse_env_u64("NRP_THREADS", t));
    }
}

std::vector<std::string> RunConfig::recorded_metrics() const {
    return metrics.empty() ? metric_names(pct_cutoffs) : metrics;
}

void RunConfig::validate() const {
    if (pct_cutoffs.empty()) {
        fail(ErrorCode::ConfigInvalid, "pct_cutoffs must not be empty");
    }
    for (double p : pct_cutoffs) {
        if (!(p > 0.0 && p < 1.0)) {
            fail(ErrorCode::ConfigInvalid, "pct_cutoffs must lie in (0, 1)");
        }
    }
    if (std::find(pct_cutoffs.begin(), pct_cutoffs.end(), jaccard_cutoff) == pct_cutoffs.end()) {
        fail(ErrorCode::ConfigInvalid, "jaccard_cutoff must be one of pct_cutoffs");
    }
    const auto known = metric_names(pct_cutoffs);
    std::set<std::string> seen;
    for (const auto& m : metrics) {
        if (std::find(known.begin(), known.end(), m) == known.end()) {
            fail(ErrorCode::ConfigInvalid, "unknown metric '" + m + "'");
        }
        if (!seen.insert(m).second) {
            fail(ErrorCode::ConfigInvalid, "metric '" + m + "' listed twice");
        }
    }
    if (feature_groups.empty()) {
        fail(ErrorCode::EmptyGroups, "feature_groups must not be empty");
    }
    if (horizon < 1 || gap < 0) {
        fail(ErrorCode::ConfigInvalid, "cv.horizon must be positive and cv.gap non-negative");
    }
    (void)enumerate_grid(grid, feature_groups);
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

RunOutput run_experiment(const PanelDataset& ds, const RunConfig& config) {
    config.validate();
    RunOutput out;
    out.plan = rolling_splits(ds.n_waves(), config.horizon, config.gap);
    out.specs = enumerate_grid(config.grid, config.feature_groups);
    const auto metric_list = config.recorded_metrics();

    const BlockSet needed = union_of(config.feature_groups);
    std::vector<SplitData> data;
    data.reserve(out.plan.splits.size());
    for (const auto& split : out.plan.splits) {
        data.push_back(materialize(ds, split, needed));
    }

    const std::size_t n_specs = out.specs.size();
    const std::size_t n_tasks = out.plan.splits.size() * n_specs;
    const int final_split = static_cast<int>(out.plan.splits.size()) - 1;
    std::vector<TaskResult> results(n_tasks);

    auto run_task = [&](std::size_t t) {
        const int s = static_cast<int>(t / n_specs);
        const ModelSpec& spec = out.specs[t % n_specs];
        const SplitData& split_data = data[static_cast<std::size_t>(s)];
        TaskResult& res = results[t];
        EvaluationRecord& rec = res.record;
        rec.split = s;
        rec.spec_id = spec.spec_id;
        rec.family = spec.family;
        rec.groups = spec.groups.name();
        rec.hyperparameters = hyperparameter_columns(spec);
        rec.metrics = empty_metrics(metric_list);

        const FeatureMatrix train_x = split_data.train.features.select(spec.groups);
        const FeatureMatrix test_x = split_data.test.features.select(spec.groups);
        const auto& train_y = split_data.train.labels;
        const auto& test_y = split_data.test.labels;
        std::vector<std::string> flags;
        if (test_y.empty()) {
            rec.flags = "empty_test";
            return;
        }
        std::vector<std::string> ids;
        ids.reserve(test_x.rows.size());
        for (auto p : test_x.rows) ids.push_back(ds.panelist_id(p));

        std::optional<TrainedModel> model;
        try {
            model.emplace(train(spec, train_x, train_y, derive_seed(config.seed, s, spec.spec_id)));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoVariation && e.code() != ErrorCode::EmptyInput) throw;
            flags.emplace_back(e.code() == ErrorCode::NoVariation ? "no_variation_train" : "empty_train");
        }
        if (!model) {
            const std::size_t pos = static_cast<std::size_t>(std::count(test_y.begin(), test_y.end(), 1));
            rec.metrics = keep_metrics({{"base_rate", static_cast<double>(pos) / static_cast<double>(test_y.size())}},
                                       metric_list);
            rec.flags = join(flags, ';');
            return;
        }

        const auto scores = predict_proba(*model, test_x);
        const auto ev = evaluate_scores(scores, test_y, ids, config.pct_cutoffs);
        rec.metrics = keep_metrics(ev.metrics, metric_list);
        flags.insert(flags.end(), ev.flags.begin(), ev.flags.end());
        const auto importance = feature_importances(*model);
        if (importance.all_zero) flags.emplace_back("importance_all_zero");
        rec.flags = join(flags, ';');

        if (s != final_split) return;
        for (double pct : config.pct_cutoffs) {
            const auto list = top_list(scores, ids, pct);
            for (std::size_t r = 0; r < list.ids.size(); ++r) {
                res.risk_lists.push_back({s, spec.spec_id, pct, r + 1, list.ids[r], scores[list.positions[r]]});
            }
        }
        const std::size_t pos = static_cast<std::size_t>(std::count(test_y.begin(), test_y.end(), 1));
        if (pos > 0 && pos < test_y.size()) {
            const auto c = curves(scores, test_y);
            for (std::size_t i = 0; i < c.roc.size(); ++i) {
                res.curves.push_back({s, spec.spec_id, "roc", i, c.roc[i].first, c.roc[i].second});
            }
            for (std::size_t i = 0; i < c.pr.size(); ++i) {
                res.curves.push_back({s, spec.spec_id, "pr", i, c.pr[i].first, c.pr[i].second});
            }
        }
        for (std::size_t j = 0; j < train_x.columns.size(); ++j) {
            res.importances.push_back({s, spec.spec_id, train_x.columns[j].name(), importance.scores[j]});
        }
        for (auto& cell : grouped_importance(importance.scores, train_x.columns)) {
            res.grouped.push_back({s, spec.spec_id, std::move(cell)});
        }
        if (config.save_models) res.model = std::move(model);
    };

    unsigned n_threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(1, n_tasks)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= n_tasks) return;
            try {
                run_task(t);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n_tasks);
                return;
            }
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::size_t> order(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) order[t] = t;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = results[a].record;
        const auto& rb = results[b].record;
        return std::tie(ra.split, ra.spec_id) < std::tie(rb.split, rb.spec_id);
    });
    for (auto t : order) {
        auto& r = results[t];
        out.records.push_back(std::move(r.record));
        std::move(r.risk_lists.begin(), r.risk_lists.end(), std::back_inserter(out.risk_lists));
        std::move(r.curves.begin(), r.curves.end(), std::back_inserter(out.curves));
        std::move(r.importances.begin(), r.importances.end(), std::back_inserter(out.importances));
        std::move(r.grouped.begin(), r.grouped.end(), std::back_inserter(out.grouped_importances));
        if (r.model) out.models.push_back(std::move(*r.model));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Record store
// ---------------------------------------------------------------------------

void write_record_store(const fs::path& dir, const RunOutput& output, const RunConfig& config,
                        const PanelDataset& ds) {
    using csv::append_row;
    using csv::format_number;
    fs::create_directories(dir);
    csv::write_file(dir / "records.csv", records_to_csv(output.records));

    std::string lists;
    append_row(lists, {"split", "spec_id", "pct", "rank", "panelist_id", "score"});
    for (const auto& r : output.risk_lists) {
        append_row(lists, {std::to_string(r.split), r.spec_id, format_number(r.pct), std::to_string(r.rank),
                           r.panelist_id, format_number(r.score)});
    }
    csv::write_file(dir / "risk_lists.csv", lists);

    std::string curve_text;
    append_row(curve_text, {"split", "spec_id", "curve", "index", "x", "y"});
    for (const auto& c : output.curves) {
        append_row(curve_text, {std::to_string(c.split), c.spec_id, c.curve, std::to_string(c.index),
                                format_number(c.x), format_number(c.y)});
    }
    csv::write_file(dir / "curves.csv", curve_text);

    std::string imp;
    append_row(imp, {"split", "spec_id", "column", "importance"});
    for (const auto& r : output.importances) {
        append_row(imp, {std::to_string(r.split), r.spec_id, r.column, format_number(r.importance)});
    }
    csv::write_file(dir / "importances.csv", imp);

    std::string grouped;
    append_row(grouped, {"split", "spec_id", "concept", "block", "mean", "n_columns"});
    for (const auto& r : output.grouped_importances) {
        append_row(grouped, {std::to_string(r.split), r.spec_id, r.cell.concept_name,
                             std::string(to_string(r.cell.block)), format_number(r.cell.mean),
                             std::to_string(r.cell.n_columns)});
    }
    csv::write_file(dir / "grouped_importances.csv", grouped);

    std::vector<std::string> files{"records.csv", "risk_lists.csv", "curves.csv", "importances.csv",
                                   "grouped_importances.csv"};
    if (config.save_models) {
        for (const auto& m : output.models) {
            const std::string name = "models/" + m.spec().spec_id + ".json";
            csv::write_file(dir / name, to_json(m).dump() + "\n");
            files.push_back(name);
        }
    }

    std::vector<std::string> groups;
    for (auto g : config.feature_groups) groups.push_back(g.name());
    const json manifest{
        {"format", "nrp-record-store"},
        {"version", kStoreVersion},
        {"seed", config.seed},
        {"cv", output.plan.to_json()},
        {"final_split", static_cast<int>(output.plan.splits.size()) - 1},
        {"grid", config.grid},
        {"feature_groups", groups},
        {"metrics", config.recorded_metrics()},
        {"pct_cutoffs", config.pct_cutoffs},
        {"jaccard_cutoff", config.jaccard_cutoff},
        {"n_settings", count_settings(config.grid)},
        {"n_specs", output.specs.size()},
        {"n_splits", output.plan.splits.size()},
        {"n_records", output.records.size()},
        {"dataset",
         {{"n_panelists", ds.n_panelists()}, {"n_waves", ds.n_waves()}, {"n_records", ds.records().size()}}},
        {"files", files},
    };
    csv::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

RunOutput cmd_run(const RunConfig& config) {
    for (const auto& p : {config.schema, config.recruitment, config.waves}) {
        if (!fs::exists(p)) {
            fail(ErrorCode::ConfigInvalid, "referenced file does not exist: " + p.string());
        }
    }
    const Schema schema = Schema::load(config.schema);
    const auto ingested = ingest(config.recruitment, config.waves, schema, IngestOptions{config.lenient});
    RunOutput out = run_experiment(ingested.dataset, config);
    write_record_store(config.output_dir, out, config, ingested.dataset);
    return out;
}

RecordStore RecordStore::load(const fs::path& dir) {
    RecordStore store;
    store.manifest = read_json_file(dir / "manifest.json");
    if (store.manifest.value("format", "") != "nrp-record-store" ||
        store.manifest.value("version", 0) != kStoreVersion) {
        fail(ErrorCode::ParseError, "unsupported record store at " + dir.string());
    }
    store.records = records_from_csv(csv::read_file(dir / "records.csv"));
    const auto lists = csv::read(dir / "risk_lists.csv");
    for (const auto& row : lists.rows) {
        if (row.size() != 6) fail(ErrorCode::ParseError, "malformed risk list row");
        try {
            store.risk_lists.push_back({std::stoi(row[0]), row[1], std::stod(row[2]),
                                        static_cast<std::size_t>(std::stoul(row[3])), row[4], std::stod(row[5])});
        } catch (const std::exception&) {
            fail(ErrorCode::ParseError, "malformed risk list row");
        }
    }
    return store;
}

SelectionResult cmd_select(const fs::path& store_dir, const std::string& metric) {
    const auto store = RecordStore::load(store_dir);
    if (metric == "base_rate" || (!store.records.empty() && !std::any_of(
            store.records.front().metrics.begin(), store.records.front().metrics.end(),
            [&](const auto& kv) { return kv.first == metric; }))) {
        fail(ErrorCode::ConfigInvalid, "metric '" + metric + "' cannot drive selection");
    }
    return best_average(store.records, metric);
}

DeploymentReport cmd_report(const fs::path& store_dir, const fs::path& selection_path, const fs::path& out_dir) {
    const auto store = RecordStore::load(store_dir);
    const auto selection = SelectionResult::from_json(read_json_file(selection_path));
    const double cutoff = store.manifest.at("jaccard_cutoff").get<double>();

    std::vector<EvaluationRecord> final_records;
    for (const auto& r : store.records) {
        if (r.split == selection.final_split) final_records.push_back(r);
    }
    std::map<std::string, std::vector<std::string>> lists;
    for (const auto& row : store.risk_lists) {
        if (row.split == selection.final_split && row.pct == cutoff) lists[row.spec_id].push_back(row.panelist_id);
    }
    const auto report = deployment_report(selection, final_records, lists);
    fs::create_directories(out_dir);
    csv::write_file(out_dir / "deployment.csv", report.to_csv());
    csv::write_file(out_dir / "jaccard.csv", report.jaccard_csv());

    std::map<std::string, Family> winners;
    for (const auto& w : selection.winners) winners.emplace(w.spec_id, w.family);

    std::string traj;
    std::vector<std::string> header{"family", "spec_id", "split", "window"};
    if (!store.records.empty()) {
        for (const auto& [name, v] : store.records.front().metrics) header.push_back(name);
    }
    csv::append_row(traj, header);
    for (const auto& w : selection.winners) {
        for (const auto& r : store.records) {
            if (r.spec_id != w.spec_id) continue;
            std::vector<std::string> row{std::string(to_string(w.family)), r.spec_id, std::to_string(r.split),
                                         r.split == selection.final_split ? "final" : "selection"};
            for (const auto& [name, v] : r.metrics) row.push_back(csv::format_optional(v));
            csv::append_row(traj, row);
        }
    }
    csv::write_file(out_dir / "trajectories.csv", traj);

    for (const char* name : {"curves.csv", "grouped_importances.csv"}) {
        const auto table = csv::read(store_dir / name);
        const auto spec_col = table.column("spec_id");
        if (!spec_col) fail(ErrorCode::ParseError, std::string(name) + " lacks a spec_id column");
        std::string text;
        std::vector<std::string> h{"family"};
        h.insert(h.end(), table.header.begin(), table.header.end());
        csv::append_row(text, h);
        for (const auto& row : table.rows) {
            const auto it = winners.find(row[*spec_col]);
            if (it == winners.end()) continue;
            std::vector<std::string> out_row{std::string(to_string(it->second))};
            out_row.insert(out_row.end(), row.begin(), row.end());
            csv::append_row(text, out_row);
        }
        csv::write_file(out_dir / (std::string("winner_") + name), text);
    }
    return report;
}

json ingest_report(const IngestResult& result) {
    const auto& ds = result.dataset;
    json violations = json::array();
    for (const auto& v : check_involuntary_attrition(ds)) {
        violations.push_back({{"panelist_id", ds.panelist_id(v.panelist)},
                              {"third_nonresponse_wave", v.third_nonresponse_wave},
                              {"dropout_wave", v.dropout_wave ? json(*v.dropout_wave) : json(nullptr)}});
    }
    json waves = json::array();
    for (const auto& d : panel_descriptives(ds)) {
        waves.push_back({{"wave", d.wave},
                         {"active", d.active},
                         {"participating", d.participating},
                         {"participation_rate", std::isnan(d.participation_rate) ? json(nullptr)
                                                                                  : json(d.participation_rate)},
                         {"cumulative_attrition", d.cumulative_attrition}});
    }
    return {{"valid", true},
            {"n_panelists", ds.n_panelists()},
            {"n_waves", ds.n_waves()},
            {"n_records", ds.records().size()},
            {"warnings", result.warnings},
            {"attrition_violations", violations},
            {"descriptives", waves}};
}

} // namespace nrp
