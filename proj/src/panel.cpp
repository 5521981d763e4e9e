#include "nrp/panel.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <set>
#include <unordered_set>

namespace nrp {

namespace {

const Variable& response_status_variable() {
    static const Variable v{"response_status", Concept::ResponseStatus,
                            {"complete", "partial", "nonresponse"}};
    return v;
}

std::optional<int> parse_int(std::string_view text) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

} // namespace

std::string_view to_string(Concept c) noexcept {
    switch (c) {
    case Concept::Sociodemographic: return "sociodemographic";
    case Concept::SurveyCooperation: return "survey_cooperation";
    case Concept::ResponseStatus: return "response_status";
    case Concept::SurveyEvaluation: return "survey_evaluation";
    case Concept::SurveyParticipation: return "survey_participation";
    }
    return "unknown";
}

Concept concept_from_string(std::string_view name) {
    for (auto c : {Concept::Sociodemographic, Concept::SurveyCooperation, Concept::ResponseStatus,
                   Concept::SurveyEvaluation, Concept::SurveyParticipation}) {
        if (to_string(c) == name) {
            return c;
        }
    }
    fail(ErrorCode::SchemaInvalid, "unknown concept '" + std::string(name) + "'");
}

bool is_recruitment_concept(Concept c) noexcept {
    return c == Concept::Sociodemographic || c == Concept::SurveyCooperation;
}

std::string_view to_string(ResponseStatus s) noexcept {
    switch (s) {
    case ResponseStatus::Complete: return "complete";
    case ResponseStatus::Partial: return "partial";
    case ResponseStatus::Nonresponse: return "nonresponse";
    }
    return "nonresponse";
}

std::optional<ResponseStatus> status_from_string(std::string_view name) noexcept {
    if (name == "complete") return ResponseStatus::Complete;
    if (name == "partial") return ResponseStatus::Partial;
    if (name == "nonresponse") return ResponseStatus::Nonresponse;
    return std::nullopt;
}

std::optional<Code> Variable::code_of(std::string_view label) const {
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (categories[i] == label) {
            return static_cast<Code>(i);
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

Schema::Schema(std::vector<Variable> variables, std::vector<std::string> wave_labels)
    : wave_labels_(std::move(wave_labels)) {
    std::unordered_set<std::string> names{"panelist_id", "wave", "response_status",
                                          std::string(kDropoutColumn)};
    for (auto& v : variables) {
        if (v.name.empty()) {
            fail(ErrorCode::SchemaInvalid, "variable with empty name");
        }
        if (!names.insert(v.name).second) {
            fail(ErrorCode::SchemaInvalid, "duplicate or reserved variable name '" + v.name + "'");
        }
        if (v.kind == Concept::ResponseStatus) {
            fail(ErrorCode::SchemaInvalid,
                 "response status is built in; variable '" + v.name + "' cannot declare it");
        }
        if (v.categories.empty()) {
            fail(ErrorCode::SchemaInvalid, "variable '" + v.name + "' declares no categories");
        }
        if (v.categories.size() > static_cast<std::size_t>(std::numeric_limits<Code>::max())) {
            fail(ErrorCode::SchemaInvalid, "variable '" + v.name + "' has too many categories");
        }
        std::set<std::string> seen;
        for (const auto& c : v.categories) {
            if (c.empty() || !seen.insert(c).second) {
                fail(ErrorCode::SchemaInvalid,
                     "variable '" + v.name + "' has an empty or duplicate category");
            }
        }
        if (is_recruitment_concept(v.kind)) {
            recruitment_.push_back(std::move(v));
        } else {
            wave_items_.push_back(std::move(v));
        }
    }
    wave_variables_.push_back(response_status_variable());
    wave_variables_.insert(wave_variables_.end(), wave_items_.begin(), wave_items_.end());
}

Schema Schema::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("variables") || !j["variables"].is_array()) {
        fail(ErrorCode::SchemaInvalid, "schema must be an object with a 'variables' array");
    }
    std::vector<Variable> vars;
    try {
        for (const auto& item : j["variables"]) {
            Variable v;
            v.name = item.at("name").get<std::string>();
            v.kind = concept_from_string(item.at("concept").get<std::string>());
            v.categories = item.at("categories").get<std::vector<std::string>>();
            vars.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaInvalid, std::string("malformed schema: ") + e.what());
    }
    std::vector<std::string> labels;
    if (j.contains("waves")) {
        labels = j["waves"].get<std::vector<std::string>>();
    }
    return Schema(std::move(vars), std::move(labels));
}

Schema Schema::load(const std::filesystem::path& path) {
    const std::string text = csv::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::SchemaInvalid, path.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json Schema::to_json() const {
    nlohmann::json vars = nlohmann::json::array();
    auto emit = [&](const Variable& v) {
        vars.push_back({{"name", v.name},
                        {"concept", std::string(to_string(v.kind))},
                        {"categories", v.categories}});
    };
    for (const auto& v : recruitment_) emit(v);
    for (const auto& v : wave_items_) emit(v);
    nlohmann::json j{{"variables", vars}};
    if (!wave_labels_.empty()) {
        j["waves"] = wave_labels_;
    }
    return j;
}

// ---------------------------------------------------------------------------
// PanelDataset
// ---------------------------------------------------------------------------

std::optional<std::size_t> PanelDataset::find_panelist(std::string_view id) const {
    auto it = id_index_.find(std::string(id));
    if (it == id_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

ResponseStatus PanelDataset::status(std::size_t p, int wave) const {
    const int r = record_at(p, wave);
    return r < 0 ? ResponseStatus::Nonresponse : records_[static_cast<std::size_t>(r)].status;
}

Code PanelDataset::item(std::size_t p, int wave, std::size_t item_index) const {
    const int r = record_at(p, wave);
    return r < 0 ? kMissing : records_[static_cast<std::size_t>(r)].items[item_index];
}

Code PanelDataset::wave_value(std::size_t p, int wave, std::size_t var) const {
    if (var == 0) {
        return static_cast<Code>(status(p, wave));
    }
    return item(p, wave, var - 1);
}

// ---------------------------------------------------------------------------
// PanelBuilder
// ---------------------------------------------------------------------------

PanelBuilder::PanelBuilder(Schema schema) : schema_(std::move(schema)) {}

PanelBuilder PanelBuilder::from(const PanelDataset& ds) {
    PanelBuilder b(ds.schema());
    b.panelists_ = ds.panelists_;
    b.records_ = ds.records_;
    b.has_dropout_column_ = ds.has_dropout_column_;
    return b;
}

PanelBuilder& PanelBuilder::add_panelist(Panelist panelist) {
    panelists_.push_back(std::move(panelist));
    return *this;
}

PanelBuilder& PanelBuilder::add_record(WaveRecord record) {
    records_.push_back(std::move(record));
    return *this;
}

PanelDataset PanelBuilder::build() const {
    PanelDataset ds;
    ds.schema_ = schema_;
    ds.panelists_ = panelists_;
    ds.records_ = records_;
    ds.has_dropout_column_ = has_dropout_column_;

    const auto& rvars = schema_.recruitment();
    const auto& items = schema_.wave_items();

    for (std::size_t p = 0; p < panelists_.size(); ++p) {
        const auto& pl = panelists_[p];
        if (!ds.id_index_.emplace(pl.id, p).second) {
            fail(ErrorCode::DuplicateKey, "duplicate panelist_id '" + pl.id + "'");
        }
        if (pl.attributes.size() != rvars.size()) {
            fail(ErrorCode::SchemaMismatch, "panelist '" + pl.id + "' has " +
                                                std::to_string(pl.attributes.size()) +
                                                " attributes, schema declares " +
                                                std::to_string(rvars.size()));
        }
        for (std::size_t v = 0; v < rvars.size(); ++v) {
            const Code c = pl.attributes[v];
            if (c != kMissing && (c < 0 || static_cast<std::size_t>(c) >= rvars[v].categories.size())) {
                fail(ErrorCode::UnknownCategory,
                     "panelist '" + pl.id + "': invalid code for '" + rvars[v].name + "'");
            }
        }
    }

    // Wave range: declared labels fix the length, otherwise the observed maximum does.
    int max_wave = -1;
    for (const auto& r : records_) {
        if (r.wave < 0) {
            fail(ErrorCode::WaveOutOfRange, "negative wave index for '" + r.panelist_id + "'");
        }
        max_wave = std::max(max_wave, r.wave);
    }
    const auto& labels = schema_.wave_labels();
    if (!labels.empty()) {
        ds.n_waves_ = static_cast<int>(labels.size());
        if (max_wave >= ds.n_waves_) {
            fail(ErrorCode::WaveOutOfRange, "record at wave " + std::to_string(max_wave) +
                                                " but schema declares " +
                                                std::to_string(ds.n_waves_) + " waves");
        }
        ds.wave_labels_ = labels;
    } else {
        ds.n_waves_ = max_wave + 1;
        for (int w = 0; w < ds.n_waves_; ++w) {
            ds.wave_labels_.push_back(std::to_string(w));
        }
    }
    if (max_wave >= 0) {
        std::vector<bool> seen(static_cast<std::size_t>(max_wave) + 1, false);
        for (const auto& r : records_) {
            seen[static_cast<std::size_t>(r.wave)] = true;
        }
        for (std::size_t w = 0; w < seen.size(); ++w) {
            if (!seen[w]) {
                fail(ErrorCode::NonContiguousWaves,
                     "no records at wave " + std::to_string(w) + " below maximum wave " +
                         std::to_string(max_wave));
            }
        }
    }

    for (const auto& pl : panelists_) {
        if (pl.dropout_wave && (*pl.dropout_wave < 0 || *pl.dropout_wave > ds.n_waves_)) {
            fail(ErrorCode::WaveOutOfRange,
                 "dropout wave of '" + pl.id + "' outside [0, " + std::to_string(ds.n_waves_) + "]");
        }
    }

    const std::size_t n_waves = static_cast<std::size_t>(ds.n_waves_);
    ds.record_index_.assign(panelists_.size() * n_waves, -1);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        auto it = ds.id_index_.find(r.panelist_id);
        if (it == ds.id_index_.end()) {
            fail(ErrorCode::UnknownPanelist, "record for unknown panelist '" + r.panelist_id + "'");
        }
        const std::size_t p = it->second;
        auto& slot = ds.record_index_[p * n_waves + static_cast<std::size_t>(r.wave)];
        if (slot >= 0) {
            fail(ErrorCode::DuplicateKey, "duplicate record for '" + r.panelist_id + "' at wave " +
                                              std::to_string(r.wave));
        }
        const auto dropout = panelists_[p].dropout_wave;
        if (dropout && r.wave >= *dropout) {
            fail(ErrorCode::RecordAfterDropout, "record for '" + r.panelist_id + "' at wave " +
                                                    std::to_string(r.wave) + " after dropout wave " +
                                                    std::to_string(*dropout));
        }
        if (r.items.size() != items.size()) {
            fail(ErrorCode::SchemaMismatch, "record for '" + r.panelist_id + "' has " +
                                                std::to_string(r.items.size()) + " items, schema declares " +
                                                std::to_string(items.size()));
        }
        for (std::size_t v = 0; v < items.size(); ++v) {
            const Code c = r.items[v];
            if (c == kMissing) {
                continue;
            }
            if (c < 0 || static_cast<std::size_t>(c) >= items[v].categories.size()) {
                fail(ErrorCode::UnknownCategory,
                     "record for '" + r.panelist_id + "': invalid code for '" + items[v].name + "'");
            }
            if (r.status == ResponseStatus::Nonresponse) {
                fail(ErrorCode::InconsistentRecord, "nonresponse record for '" + r.panelist_id +
                                                        "' at wave " + std::to_string(r.wave) +
                                                        " carries item '" + items[v].name + "'");
            }
        }
        slot = static_cast<int>(i);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Ingestion and export
// ---------------------------------------------------------------------------

namespace {

class CodeResolver {
public:
    CodeResolver(const IngestOptions& options, std::vector<std::string>& warnings)
        : options_(options), warnings_(warnings) {}

    Code resolve(const Variable& var, const std::string& value, std::string_view context) {
        if (value.empty()) {
            return kMissing;
        }
        if (auto code = var.code_of(value)) {
            return *code;
        }
        std::string msg = std::string(context) + ": value '" + value + "' is not a category of '" +
                          var.name + "'";
        if (!options_.lenient) {
            fail(ErrorCode::UnknownCategory, msg);
        }
        warnings_.push_back(msg + " (treated as missing)");
        return kMissing;
    }

private:
    const IngestOptions& options_;
    std::vector<std::string>& warnings_;
};

std::vector<std::size_t> map_columns(const csv::Table& table, const std::vector<Variable>& vars,
                                     std::size_t reserved, std::string_view file) {
    std::vector<std::size_t> cols;
    cols.reserve(vars.size());
    for (const auto& v : vars) {
        auto c = table.column(v.name);
        if (!c) {
            fail(ErrorCode::SchemaMismatch,
                 std::string(file) + " lacks column '" + v.name + "' declared in the schema");
        }
        cols.push_back(*c);
    }
    if (table.header.size() != vars.size() + reserved) {
        fail(ErrorCode::SchemaMismatch,
             std::string(file) + " has columns not declared in the schema");
    }
    return cols;
}

} // namespace

IngestResult ingest_text(std::string_view recruitment_csv, std::string_view waves_csv,
                         const Schema& schema, const IngestOptions& options) {
    std::vector<std::string> warnings;
    CodeResolver resolver(options, warnings);
    PanelBuilder builder(schema);

    const csv::Table rec = csv::parse(recruitment_csv);
    if (rec.header.empty() || rec.header.front() != "panelist_id") {
        fail(ErrorCode::SchemaMismatch, "recruitment file must start with a panelist_id column");
    }
    const auto dropout_col = rec.column(kDropoutColumn);
    builder.set_dropout_column(dropout_col.has_value());
    const auto rcols = map_columns(rec, schema.recruitment(), dropout_col ? 2 : 1, "recruitment file");
    for (const auto& row : rec.rows) {
        Panelist pl;
        pl.id = row[0];
        if (pl.id.empty()) {
            fail(ErrorCode::SchemaMismatch, "empty panelist_id in recruitment file");
        }
        for (std::size_t v = 0; v < rcols.size(); ++v) {
            pl.attributes.push_back(
                resolver.resolve(schema.recruitment()[v], row[rcols[v]], "panelist '" + pl.id + "'"));
        }
        if (dropout_col && !row[*dropout_col].empty()) {
            auto d = parse_int(row[*dropout_col]);
            if (!d) {
                fail(ErrorCode::ParseError, "panelist '" + pl.id + "': bad dropout wave '" +
                                                row[*dropout_col] + "'");
            }
            pl.dropout_wave = *d;
        }
        builder.add_panelist(std::move(pl));
    }

    const csv::Table waves = csv::parse(waves_csv);
    if (waves.header.size() < 3 || waves.header[0] != "panelist_id" || waves.header[1] != "wave" ||
        waves.header[2] != "response_status") {
        fail(ErrorCode::SchemaMismatch,
             "waves file must start with panelist_id,wave,response_status");
    }
    const auto wcols = map_columns(waves, schema.wave_items(), 3, "waves file");
    for (const auto& row : waves.rows) {
        WaveRecord r;
        r.panelist_id = row[0];
        auto w = parse_int(row[1]);
        if (!w) {
            fail(ErrorCode::ParseError, "bad wave index '" + row[1] + "' for '" + r.panelist_id + "'");
        }
        r.wave = *w;
        auto status = status_from_string(row[2]);
        if (!status) {
            // Response status is the outcome; it is never downgraded to missing.
            fail(ErrorCode::UnknownCategory, "unknown response_status '" + row[2] + "' for '" +
                                                 r.panelist_id + "'");
        }
        r.status = *status;
        const std::string context = "record '" + r.panelist_id + "' wave " + row[1];
        for (std::size_t v = 0; v < wcols.size(); ++v) {
            r.items.push_back(resolver.resolve(schema.wave_items()[v], row[wcols[v]], context));
        }
        builder.add_record(std::move(r));
    }

    return IngestResult{builder.build(), std::move(warnings)};
}

IngestResult ingest(const std::filesystem::path& recruitment_csv,
                    const std::filesystem::path& waves_csv, const Schema& schema,
                    const IngestOptions& options) {
    return ingest_text(csv::read_file(recruitment_csv), csv::read_file(waves_csv), schema, options);
}

std::string export_recruitment_csv(const PanelDataset& ds) {
    std::string out;
    std::vector<std::string> header{"panelist_id"};
    for (const auto& v : ds.schema().recruitment()) {
        header.push_back(v.name);
    }
    if (ds.has_dropout_column()) {
        header.emplace_back(kDropoutColumn);
    }
    csv::append_row(out, header);
    const auto& vars = ds.schema().recruitment();
    for (std::size_t p = 0; p < ds.n_panelists(); ++p) {
        const auto& pl = ds.panelist(p);
        std::vector<std::string> row{pl.id};
        for (std::size_t v = 0; v < vars.size(); ++v) {
            const Code c = pl.attributes[v];
            row.push_back(c == kMissing ? std::string{} : vars[v].categories[static_cast<std::size_t>(c)]);
        }
        if (ds.has_dropout_column()) {
            row.push_back(pl.dropout_wave ? std::to_string(*pl.dropout_wave) : std::string{});
        }
        csv::append_row(out, row);
    }
    return out;
}

std::string export_waves_csv(const PanelDataset& ds) {
    std::string out;
    std::vector<std::string> header{"panelist_id", "wave", "response_status"};
    const auto& items = ds.schema().wave_items();
    for (const auto& v : items) {
        header.push_back(v.name);
    }
    csv::append_row(out, header);
    for (const auto& r : ds.records()) {
        std::vector<std::string> row{r.panelist_id, std::to_string(r.wave),
                                     std::string(to_string(r.status))};
        for (std::size_t v = 0; v < items.size(); ++v) {
            const Code c = r.items[v];
            row.push_back(c == kMissing ? std::string{} : items[v].categories[static_cast<std::size_t>(c)]);
        }
        csv::append_row(out, row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Panel queries
// ---------------------------------------------------------------------------

namespace {

void check_wave(const PanelDataset& ds, int wave) {
    if (wave < 0 || wave >= ds.n_waves()) {
        fail(ErrorCode::WaveOutOfRange, "wave " + std::to_string(wave) + " outside [0, " +
                                            std::to_string(ds.n_waves()) + ")");
    }
}

} // namespace

std::vector<std::size_t> active_panelists(const PanelDataset& ds, int wave) {
    check_wave(ds, wave);
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < ds.n_panelists(); ++p) {
        if (ds.is_active(p, wave)) {
            out.push_back(p);
        }
    }
    return out;
}

OutcomeVector outcome_vector(const PanelDataset& ds, int label_wave) {
    OutcomeVector out;
    out.panelists = active_panelists(ds, label_wave);
    out.outcome.reserve(out.panelists.size());
    for (std::size_t p : out.panelists) {
        out.outcome.push_back(ds.status(p, label_wave) == ResponseStatus::Nonresponse ? 1 : 0);
    }
    return out;
}

std::vector<AttritionViolation> check_involuntary_attrition(const PanelDataset& ds) {
    std::vector<AttritionViolation> out;
    for (std::size_t p = 0; p < ds.n_panelists(); ++p) {
        const auto dropout = ds.dropout_wave(p);
        const int last = dropout ? std::min(*dropout, ds.n_waves()) : ds.n_waves();
        int run = 0;
        for (int w = 0; w < last; ++w) {
            run = ds.status(p, w) == ResponseStatus::Nonresponse ? run + 1 : 0;
            if (run == 3) {
                if (!dropout || *dropout != w + 1) {
                    out.push_back({p, w, dropout});
                }
                break;
            }
        }
    }
    return out;
}

std::vector<WaveDescriptive> panel_descriptives(const PanelDataset& ds) {
    std::vector<WaveDescriptive> out;
    std::size_t initial = 0;
    for (int w = 0; w < ds.n_waves(); ++w) {
        const auto outcomes = outcome_vector(ds, w);
        WaveDescriptive d;
        d.wave = w;
        d.active = outcomes.panelists.size();
        d.participating = static_cast<std::size_t>(
            std::count(outcomes.outcome.begin(), outcomes.outcome.end(), 0));
        if (w == 0) {
            initial = d.active;
        }
        d.participation_rate = d.active == 0 ? std::numeric_limits<double>::quiet_NaN()
                                             : static_cast<double>(d.participating) /
                                                   static_cast<double>(d.active);
        d.cumulative_attrition = initial == 0 ? 0.0
                                              : static_cast<double>(initial - d.active) /
                                                    static_cast<double>(initial);
        out.push_back(d);
    }
    return out;
}

} // namespace nrp
