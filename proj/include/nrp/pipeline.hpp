#pragma once

#include "nrp/features.hpp"
#include "nrp/metrics.hpp"
#include "nrp/model_zoo.hpp"
#include "nrp/panel.hpp"
#include "nrp/selection.hpp"
#include "nrp/temporal_cv.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace nrp {

struct RunConfig {
    std::filesystem::path schema;
    std::filesystem::path recruitment;
    std::filesystem::path waves;
    std::filesystem::path output_dir;
    nlohmann::json grid = reference_grid();
    std::vector<BlockSet> feature_groups = standard_feature_groups();
    int horizon = 1;
    int gap = 0;
    /// Metric columns kept in the record store; empty keeps all of metric_names(pct_cutoffs).
    std::vector<std::string> metrics;
    std::vector<double> pct_cutoffs{0.05, 0.10};
    /// Cutoff of the risk lists compared in the deployment report; must be one of pct_cutoffs.
    double jaccard_cutoff = 0.10;
    std::uint64_t seed = 20240101;
    /// Worker threads; 0 uses every hardware thread.
    unsigned threads = 0;
    bool lenient = false;
    /// Write every final-split model as JSON under `models/`.
    bool save_models = false;

    /// Relative paths resolve against `base_dir`. Throws CONFIG_INVALID.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    /// Reads the file, then applies NRP_SEED and NRP_THREADS from the environment.
    static RunConfig load(const std::filesystem::path& path);
    void apply_environment();
    std::vector<std::string> recorded_metrics() const;
    void validate() const;
};

struct RiskListRow {
    int split = 0;
    std::string spec_id;
    double pct = 0.0;
    std::size_t rank = 0;
    std::string panelist_id;
    double score = 0.0;
};

struct CurveRow {
    int split = 0;
    std::string spec_id;
    std::string curve;
    std::size_t index = 0;
    double x = 0.0;
    double y = 0.0;
};

struct ImportanceRow {
    int split = 0;
    std::string spec_id;
    std::string column;
    double importance = 0.0;
};

struct GroupedImportanceRow {
    int split = 0;
    std::string spec_id;
    ImportanceCell cell;
};

/// Everything a run produces, in canonical (split, spec_id) order.
struct RunOutput {
    SplitPlan plan;
    std::vector<ModelSpec> specs;
    std::vector<EvaluationRecord> records;
    /// Final split only.
    std::vector<RiskListRow> risk_lists;
    std::vector<CurveRow> curves;
    std::vector<ImportanceRow> importances;
    std::vector<GroupedImportanceRow> grouped_importances;
    std::vector<TrainedModel> models;
};

/// Trains and evaluates every (split, spec) pair on a worker pool.
RunOutput run_experiment(const PanelDataset& ds, const RunConfig& config);

/// Writes records.csv, risk_lists.csv, curves.csv, importances.csv,
/// grouped_importances.csv, manifest.json and optional models into `dir`.
void write_record_store(const std::filesystem::path& dir, const RunOutput& output, const RunConfig& config,
                        const PanelDataset& ds);

/// Ingests the configured data, runs, and writes the store to the output directory.
RunOutput cmd_run(const RunConfig& config);

struct RecordStore {
    nlohmann::json manifest;
    std::vector<EvaluationRecord> records;
    std::vector<RiskListRow> risk_lists;

    static RecordStore load(const std::filesystem::path& dir);
};

SelectionResult cmd_select(const std::filesystem::path& store_dir, const std::string& metric = "roc_auc");

/// Writes deployment.csv, jaccard.csv, trajectories.csv and winner_curves.csv.
/// Reads only the record store and the selection file.
DeploymentReport cmd_report(const std::filesystem::path& store_dir, const std::filesystem::path& selection,
                            const std::filesystem::path& out_dir);

/// Validation summary of an ingested panel.
nlohmann::json ingest_report(const IngestResult& result);

} // namespace nrp
