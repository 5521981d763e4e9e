#include "nrp/features.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"
#include "nrp/rng.hpp"

#include <algorithm>

namespace nrp {

std::string_view to_string(Block b) noexcept {
    switch (b) {
    case Block::I: return "I";
    case Block::II: return "II";
    case Block::III: return "III";
    case Block::IV: return "IV";
    }
    return "?";
}

std::string_view to_string(Window w) noexcept {
    switch (w) {
    case Window::None: return "none";
    case Window::Last1: return "last1";
    case Window::Last3: return "last3";
    case Window::AllPrevious: return "all";
    }
    return "?";
}

Window window_of(Block b) noexcept {
    switch (b) {
    case Block::I: return Window::None;
    case Block::II: return Window::Last1;
    case Block::III: return Window::Last3;
    case Block::IV: return Window::AllPrevious;
    }
    return Window::None;
}

WaveRange window_range(Window w, int as_of_wave) {
    switch (w) {
    case Window::Last1: return {as_of_wave, as_of_wave};
    case Window::Last3: return {std::max(0, as_of_wave - 2), as_of_wave};
    case Window::AllPrevious: return {0, as_of_wave};
    case Window::None: break;
    }
    fail(ErrorCode::InvalidConfig, "time-invariant block has no wave window");
}

std::string BlockSet::name() const {
    if (*this == all()) {
        return "all";
    }
    std::string out;
    for (Block b : {Block::I, Block::II, Block::III, Block::IV}) {
        if (contains(b)) {
            if (!out.empty()) out += '+';
            out += to_string(b);
        }
    }
    return out;
}

BlockSet BlockSet::parse(std::string_view text) {
    if (text == "all") {
        return all();
    }
    BlockSet set;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('+', start), text.size());
        const std::string_view token = text.substr(start, end - start);
        bool found = false;
        for (Block b : {Block::I, Block::II, Block::III, Block::IV}) {
            if (token == to_string(b)) {
                set.bits_ |= bit(b);
                found = true;
            }
        }
        if (!found) {
            fail(ErrorCode::ConfigInvalid, "unknown feature block '" + std::string(token) + "'");
        }
        start = end + 1;
    }
    if (set.empty()) {
        fail(ErrorCode::EmptyGroups, "empty feature group");
    }
    return set;
}

const std::vector<BlockSet>& standard_feature_groups() {
    static const std::vector<BlockSet> groups{{Block::I}, {Block::II}, {Block::III}, {Block::IV},
                                              BlockSet::all()};
    return groups;
}

FeatureBlockSpec block_spec(const Schema& schema, Block block) {
    return {block, window_of(block),
            block == Block::I ? schema.recruitment() : schema.wave_variables()};
}

std::string ColumnDescriptor::name() const {
    return "b" + std::string(to_string(block)) + "__" + variable + "__" + category + "__w" +
           std::string(to_string(window));
}

std::vector<ColumnDescriptor> feature_columns(const Schema& schema, BlockSet groups) {
    if (groups.empty()) {
        fail(ErrorCode::EmptyGroups, "no feature blocks requested");
    }
    std::vector<ColumnDescriptor> cols;
    for (Block b : {Block::I, Block::II, Block::III, Block::IV}) {
        if (!groups.contains(b)) {
            continue;
        }
        const auto spec = block_spec(schema, b);
        for (const auto& v : spec.variables) {
            for (const auto& c : v.categories) {
                cols.push_back({b, v.name, v.kind, c, false, spec.window});
            }
            // Response status is never missing: an absent record counts as nonresponse.
            if (v.kind != Concept::ResponseStatus) {
                cols.push_back({b, v.name, v.kind, "na", true, spec.window});
            }
        }
    }
    return cols;
}

std::uint64_t schema_fingerprint(std::span<const ColumnDescriptor> columns) {
    std::uint64_t h = fnv1a("nrp-features-v1");
    for (const auto& c : columns) {
        h = fnv1a(c.name(), h);
        h = fnv1a("\n", h);
    }
    return h;
}

FeatureMatrix FeatureMatrix::select(BlockSet groups) const {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (groups.contains(columns[c].block)) {
            keep.push_back(c);
        }
    }
    FeatureMatrix out;
    out.as_of_wave = as_of_wave;
    out.rows = rows;
    out.values = Matrix(rows.size(), keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.columns.push_back(columns[keep[j]]);
        const auto src = values.col(keep[j]);
        std::copy(src.begin(), src.end(), out.values.col(j).begin());
    }
    return out;
}

FeatureMatrix FeatureMatrix::take_rows(std::span<const std::size_t> positions) const {
    FeatureMatrix out;
    out.as_of_wave = as_of_wave;
    out.columns = columns;
    out.values = Matrix(positions.size(), columns.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        out.rows.push_back(rows[positions[i]]);
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto src = values.col(c);
        auto dst = out.values.col(c);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            dst[i] = src[positions[i]];
        }
    }
    return out;
}

std::string FeatureMatrix::to_csv(const PanelDataset& ds) const {
    std::string out;
    std::vector<std::string> header{"panelist_id"};
    for (const auto& c : columns) {
        header.push_back(c.name());
    }
    csv::append_row(out, header);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> row{ds.panelist_id(rows[r])};
        for (std::size_t c = 0; c < columns.size(); ++c) {
            row.push_back(csv::format_number(values(r, c)));
        }
        csv::append_row(out, row);
    }
    return out;
}

WindowCounts aggregate_window(const PanelDataset& ds, std::size_t panelist, std::size_t var,
                              int as_of_wave, Window window) {
    if (as_of_wave < 0 || as_of_wave >= ds.n_waves()) {
        fail(ErrorCode::WaveOutOfRange, "as-of wave " + std::to_string(as_of_wave) + " outside [0, " +
                                            std::to_string(ds.n_waves()) + ")");
    }
    const auto& vars = ds.schema().wave_variables();
    if (var >= vars.size()) {
        fail(ErrorCode::SchemaMismatch, "wave variable index out of range");
    }
    WindowCounts out;
    out.counts.assign(vars[var].categories.size(), 0);
    const WaveRange range = window_range(window, as_of_wave);
    for (int w = range.first; w <= range.last; ++w) {
        const Code c = ds.wave_value(panelist, w, var);
        if (c == kMissing) {
            ++out.missing;
        } else {
            ++out.counts[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

namespace {

void check_panelists(const PanelDataset& ds, std::span<const std::size_t> rows) {
    for (std::size_t p : rows) {
        if (p >= ds.n_panelists()) {
            fail(ErrorCode::UnknownPanelist, "panelist index " + std::to_string(p) + " out of range");
        }
    }
}

void fill_time_invariant(const PanelDataset& ds, std::span<const std::size_t> rows, Matrix& m,
                         std::size_t col0) {
    const auto& vars = ds.schema().recruitment();
    std::size_t col = col0;
    for (std::size_t v = 0; v < vars.size(); ++v) {
        const std::size_t n_cat = vars[v].categories.size();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Code code = ds.attribute(rows[r], v);
            if (code == kMissing) {
                m(r, col + n_cat) = 1.0;
            } else {
                m(r, col + static_cast<std::size_t>(code)) = 1.0;
            }
        }
        col += n_cat + 1;
    }
}

void fill_windowed(const PanelDataset& ds, std::span<const std::size_t> rows, int as_of_wave,
                   Window window, Matrix& m, std::size_t col0) {
    const auto& vars = ds.schema().wave_variables();
    const WaveRange range = window_range(window, as_of_wave);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t p = rows[r];
        std::size_t col = col0;
        for (std::size_t v = 0; v < vars.size(); ++v) {
            const std::size_t n_cat = vars[v].categories.size();
            for (int w = range.first; w <= range.last; ++w) {
                const Code code = ds.wave_value(p, w, v);
                if (code == kMissing) {
                    m(r, col + n_cat) += 1.0;
                } else {
                    m(r, col + static_cast<std::size_t>(code)) += 1.0;
                }
            }
            col += n_cat + (v == 0 ? 0 : 1);
        }
    }
}

} // namespace

FeatureMatrix encode_time_invariant(const PanelDataset& ds, std::span<const std::size_t> panelists) {
    check_panelists(ds, panelists);
    FeatureMatrix out;
    out.as_of_wave = 0;
    out.rows.assign(panelists.begin(), panelists.end());
    out.columns = feature_columns(ds.schema(), {Block::I});
    out.values = Matrix(panelists.size(), out.columns.size());
    fill_time_invariant(ds, panelists, out.values, 0);
    return out;
}

FeatureMatrix build_feature_matrix(const PanelDataset& ds, int as_of_wave, BlockSet groups) {
    if (as_of_wave < 0 || as_of_wave >= ds.n_waves()) {
        fail(ErrorCode::WaveOutOfRange, "as-of wave " + std::to_string(as_of_wave) + " outside [0, " +
                                            std::to_string(ds.n_waves()) + ")");
    }
    std::vector<std::size_t> rows;
    for (std::size_t p = 0; p < ds.n_panelists(); ++p) {
        if (ds.is_active(p, as_of_wave + 1)) {
            rows.push_back(p);
        }
    }
    return build_feature_matrix(ds, as_of_wave, groups, rows);
}

FeatureMatrix build_feature_matrix(const PanelDataset& ds, int as_of_wave, BlockSet groups,
                                   std::span<const std::size_t> rows) {
    if (groups.empty()) {
        fail(ErrorCode::EmptyGroups, "no feature blocks requested");
    }
    if (as_of_wave < 0 || as_of_wave >= ds.n_waves()) {
        fail(ErrorCode::WaveOutOfRange, "as-of wave " + std::to_string(as_of_wave) + " outside [0, " +
                                            std::to_string(ds.n_waves()) + ")");
    }
    check_panelists(ds, rows);

    FeatureMatrix out;
    out.as_of_wave = as_of_wave;
    out.rows.assign(rows.begin(), rows.end());
    out.columns = feature_columns(ds.schema(), groups);
    out.values = Matrix(rows.size(), out.columns.size());

    std::size_t col = 0;
    for (Block b : {Block::I, Block::II, Block::III, Block::IV}) {
        if (!groups.contains(b)) {
            continue;
        }
        const std::size_t width = feature_columns(ds.schema(), {b}).size();
        if (b == Block::I) {
            fill_time_invariant(ds, rows, out.values, col);
        } else {
            fill_windowed(ds, rows, as_of_wave, window_of(b), out.values, col);
        }
        col += width;
    }
    return out;
}

} // namespace nrp
