#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nrp {

/// Category code within a variable's declared category list; kMissing marks an absent value.
using Code = std::int16_t;
inline constexpr Code kMissing = -1;

enum class Concept : std::uint8_t {
    Sociodemographic,
    SurveyCooperation,
    ResponseStatus,
    SurveyEvaluation,
    SurveyParticipation,
};

std::string_view to_string(Concept c) noexcept;
Concept concept_from_string(std::string_view name);
bool is_recruitment_concept(Concept c) noexcept;

enum class ResponseStatus : std::uint8_t { Complete = 0, Partial = 1, Nonresponse = 2 };

std::string_view to_string(ResponseStatus s) noexcept;
std::optional<ResponseStatus> status_from_string(std::string_view name) noexcept;

struct Variable {
    std::string name;
    Concept kind = Concept::Sociodemographic;
    std::vector<std::string> categories;

    /// Code of a category label, or nullopt when undeclared.
    std::optional<Code> code_of(std::string_view label) const;
};

/// Declared variables and their category sets.
///
/// Recruitment variables (socio-demographics, survey cooperation) are
/// time-invariant. Wave items (survey evaluation, survey participation) are
/// recorded per wave. Response status is built in and always heads the list
/// returned by wave_variables().
class Schema {
public:
    Schema() = default;
    Schema(std::vector<Variable> variables, std::vector<std::string> wave_labels = {});

    static Schema from_json(const nlohmann::json& j);
    static Schema load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    const std::vector<Variable>& recruitment() const noexcept { return recruitment_; }
    const std::vector<Variable>& wave_items() const noexcept { return wave_items_; }
    /// Response status followed by the wave items.
    const std::vector<Variable>& wave_variables() const noexcept { return wave_variables_; }
    /// Declared wave labels; empty when the panel length is inferred from the data.
    const std::vector<std::string>& wave_labels() const noexcept { return wave_labels_; }

private:
    std::vector<Variable> recruitment_;
    std::vector<Variable> wave_items_;
    std::vector<Variable> wave_variables_;
    std::vector<std::string> wave_labels_;
};

struct WaveRecord {
    std::string panelist_id;
    int wave = 0;
    ResponseStatus status = ResponseStatus::Complete;
    /// One code per Schema::wave_items() entry.
    std::vector<Code> items;
};

struct Panelist {
    std::string id;
    /// One code per Schema::recruitment() entry.
    std::vector<Code> attributes;
    /// Wave of permanent exit; the panelist is active at waves strictly before it.
    std::optional<int> dropout_wave;
};

class PanelBuilder;

/// Validated, immutable panel. Panelist indices follow recruitment order.
class PanelDataset {
public:
    const Schema& schema() const noexcept { return schema_; }
    int n_waves() const noexcept { return n_waves_; }
    const std::vector<std::string>& wave_labels() const noexcept { return wave_labels_; }

    std::size_t n_panelists() const noexcept { return panelists_.size(); }
    const Panelist& panelist(std::size_t p) const { return panelists_[p]; }
    const std::string& panelist_id(std::size_t p) const { return panelists_[p].id; }
    std::optional<std::size_t> find_panelist(std::string_view id) const;

    Code attribute(std::size_t p, std::size_t var) const { return panelists_[p].attributes[var]; }
    std::optional<int> dropout_wave(std::size_t p) const { return panelists_[p].dropout_wave; }
    bool is_active(std::size_t p, int wave) const {
        const auto d = panelists_[p].dropout_wave;
        return !d || *d > wave;
    }

    bool has_record(std::size_t p, int wave) const { return record_at(p, wave) >= 0; }
    /// Response status; an absent record reads as nonresponse.
    ResponseStatus status(std::size_t p, int wave) const;
    /// Item code; an absent record reads as missing.
    Code item(std::size_t p, int wave, std::size_t item_index) const;
    /// Code of a wave variable in Schema::wave_variables() indexing (0 = response status).
    Code wave_value(std::size_t p, int wave, std::size_t var) const;

    /// Records in insertion order.
    const std::vector<WaveRecord>& records() const noexcept { return records_; }

    bool has_dropout_column() const noexcept { return has_dropout_column_; }

private:
    friend class PanelBuilder;

    int record_at(std::size_t p, int wave) const {
        return record_index_[p * static_cast<std::size_t>(n_waves_) + static_cast<std::size_t>(wave)];
    }

    Schema schema_;
    int n_waves_ = 0;
    std::vector<std::string> wave_labels_;
    std::vector<Panelist> panelists_;
    std::vector<WaveRecord> records_;
    std::vector<int> record_index_;
    std::unordered_map<std::string, std::size_t> id_index_;
    bool has_dropout_column_ = true;
};

/// Collects panelists and records, then validates them into a PanelDataset.
class PanelBuilder {
public:
    explicit PanelBuilder(Schema schema);
    static PanelBuilder from(const PanelDataset& ds);

    PanelBuilder& add_panelist(Panelist panelist);
    PanelBuilder& add_record(WaveRecord record);

    std::vector<Panelist>& panelists() noexcept { return panelists_; }
    std::vector<WaveRecord>& records() noexcept { return records_; }
    const Schema& schema() const noexcept { return schema_; }

    void set_dropout_column(bool present) noexcept { has_dropout_column_ = present; }

    /// Validates every invariant; throws nrp::Error on the first violation.
    PanelDataset build() const;

private:
    Schema schema_;
    std::vector<Panelist> panelists_;
    std::vector<WaveRecord> records_;
    bool has_dropout_column_ = true;
};

struct IngestOptions {
    /// Downgrade unknown categories to missing values with a warning.
    bool lenient = false;
};

struct IngestResult {
    PanelDataset dataset;
    std::vector<std::string> warnings;
};

/// Name of the optional recruitment column holding the dropout wave.
inline constexpr std::string_view kDropoutColumn = "dropout_wave";

IngestResult ingest_text(std::string_view recruitment_csv, std::string_view waves_csv,
                         const Schema& schema, const IngestOptions& options = {});
IngestResult ingest(const std::filesystem::path& recruitment_csv,
                    const std::filesystem::path& waves_csv, const Schema& schema,
                    const IngestOptions& options = {});

std::string export_recruitment_csv(const PanelDataset& ds);
std::string export_waves_csv(const PanelDataset& ds);

/// Indices of panelists active at `wave` (dropout none or later than `wave`), ascending.
std::vector<std::size_t> active_panelists(const PanelDataset& ds, int wave);

struct OutcomeVector {
    std::vector<std::size_t> panelists;
    /// 1 = nonresponse, 0 = complete or partial interview.
    std::vector<int> outcome;
};

OutcomeVector outcome_vector(const PanelDataset& ds, int label_wave);

struct AttritionViolation {
    std::size_t panelist = 0;
    /// Wave of the third consecutive nonresponse.
    int third_nonresponse_wave = 0;
    std::optional<int> dropout_wave;
};

/// Panelists with three consecutive nonresponses who were not dropped in the following wave.
std::vector<AttritionViolation> check_involuntary_attrition(const PanelDataset& ds);

struct WaveDescriptive {
    int wave = 0;
    std::size_t active = 0;
    std::size_t participating = 0;
    double participation_rate = 0.0;
    double cumulative_attrition = 0.0;
};

std::vector<WaveDescriptive> panel_descriptives(const PanelDataset& ds);

} // namespace nrp
