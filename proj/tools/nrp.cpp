// Command-line front end: simulate, ingest, features, run, select, report.

#include "nrp/csv.hpp"
#include "nrp/error.hpp"
#include "nrp/features.hpp"
#include "nrp/pipeline.hpp"
#include "nrp/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    const auto text = nrp::csv::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        nrp::fail(nrp::ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

int report_error(std::string_view code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonresponse risk prediction for longitudinal panels"};
    app.require_subcommand(1);

    std::string sim_config, sim_out;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel");
    simulate->add_option("--config", sim_config, "Simulation config JSON")->required();
    simulate->add_option("--out", sim_out, "Output directory")->required();

    std::string schema_path, recruitment_path, waves_path;
    bool lenient = false;
    auto* ingest = app.add_subcommand("ingest", "Validate a panel and print a JSON report");
    ingest->add_option("--schema", schema_path, "Schema JSON")->required();
    ingest->add_option("--recruitment", recruitment_path, "Recruitment CSV")->required();
    ingest->add_option("--waves", waves_path, "Waves CSV")->required();
    ingest->add_flag("--lenient", lenient, "Downgrade unknown categories to missing values");

    int as_of = 0;
    std::string groups_text = "all", features_out;
    auto* features = app.add_subcommand("features", "Write the feature matrix for one as-of wave");
    features->add_option("--schema", schema_path, "Schema JSON")->required();
    features->add_option("--recruitment", recruitment_path, "Recruitment CSV")->required();
    features->add_option("--waves", waves_path, "Waves CSV")->required();
    features->add_option("--as-of", as_of, "Last wave whose data may be used")->required();
    features->add_option("--groups", groups_text, "Feature blocks, e.g. all or I+III");
    features->add_option("--out", features_out, "Output CSV")->required();

    std::string run_config;
    auto* run = app.add_subcommand("run", "Train and evaluate every (split, spec) pair");
    run->add_option("--config", run_config, "Run config JSON")->required();

    std::string store, metric = "roc_auc", selection_out;
    auto* select = app.add_subcommand("select", "Pick the best-average spec per family");
    select->add_option("--store", store, "Record store directory")->required();
    select->add_option("--metric", metric, "Selection metric");
    select->add_option("--out", selection_out, "Output JSON (default: <store>/selection.json)");

    std::string selection_path, report_out;
    auto* report = app.add_subcommand("report", "Deployment report and plot data from a record store");
    report->add_option("--store", store, "Record store directory")->required();
    report->add_option("--selection", selection_path, "Selection JSON")->required();
    report->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error("CONFIG_INVALID", e.what());
    }

    try {
        if (simulate->parsed()) {
            auto config = nrp::SimConfig::from_json(read_json(sim_config));
            const auto sim = nrp::simulate(config);
            nrp::write_simulation(sim, sim_out);
            std::cout << json{{"out", sim_out},
                              {"n_panelists", sim.dataset.n_panelists()},
                              {"n_waves", sim.dataset.n_waves()},
                              {"n_records", sim.dataset.records().size()}}
                             .dump()
                      << "\n";
        } else if (ingest->parsed() || features->parsed()) {
            const auto schema = nrp::Schema::load(schema_path);
            const auto result = nrp::ingest(recruitment_path, waves_path, schema, nrp::IngestOptions{lenient});
            if (ingest->parsed()) {
                std::cout << nrp::ingest_report(result).dump(2) << "\n";
            } else {
                const auto fm =
                    nrp::build_feature_matrix(result.dataset, as_of, nrp::BlockSet::parse(groups_text));
                nrp::csv::write_file(features_out, fm.to_csv(result.dataset));
                std::cout << json{{"rows", fm.values.rows()}, {"columns", fm.values.cols()}}.dump() << "\n";
            }
        } else if (run->parsed()) {
            const auto config = nrp::RunConfig::load(run_config);
            const auto out = nrp::cmd_run(config);
            std::cout << json{{"store", config.output_dir.string()},
                              {"n_splits", out.plan.splits.size()},
                              {"n_specs", out.specs.size()},
                              {"n_records", out.records.size()}}
                             .dump()
                      << "\n";
        } else if (select->parsed()) {
            const auto result = nrp::cmd_select(store, metric);
            const fs::path out = selection_out.empty() ? fs::path(store) / "selection.json" : fs::path(selection_out);
            nrp::csv::write_file(out, result.to_json().dump(2) + "\n");
            std::cout << result.to_json().dump(2) << "\n";
        } else if (report->parsed()) {
            const auto rep = nrp::cmd_report(store, selection_path, report_out);
            std::cout << rep.to_csv();
        }
    } catch (const nrp::Error& e) {
        return report_error(nrp::error_name(e.code()), e.what());
    } catch (const std::exception& e) {
        return report_error("IO_ERROR", e.what());
    }
    return 0;
}
