#pragma once

#include "nrp/matrix.hpp"
#include "nrp/panel.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nrp {

enum class Block : std::uint8_t { I = 1, II = 2, III = 3, IV = 4 };

enum class Window : std::uint8_t { None, Last1, Last3, AllPrevious };

std::string_view to_string(Block b) noexcept;
std::string_view to_string(Window w) noexcept;
Window window_of(Block b) noexcept;

/// Waves covered by a window ending at `as_of_wave`, clipped at wave 0.
struct WaveRange {
    int first = 0;
    int last = 0;
    int length() const noexcept { return last - first + 1; }
};
WaveRange window_range(Window w, int as_of_wave);

/// A non-empty subset of the four feature blocks.
class BlockSet {
public:
    constexpr BlockSet() = default;
    constexpr BlockSet(std::initializer_list<Block> blocks) {
        for (Block b : blocks) bits_ |= bit(b);
    }
    static constexpr BlockSet all() { return {Block::I, Block::II, Block::III, Block::IV}; }

    constexpr bool contains(Block b) const noexcept { return (bits_ & bit(b)) != 0; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr std::uint8_t bits() const noexcept { return bits_; }

    /// "I".."IV" for single blocks, "all" for the full set, otherwise "I+III" style.
    std::string name() const;
    static BlockSet parse(std::string_view text);

    friend constexpr bool operator==(BlockSet, BlockSet) = default;
    friend constexpr BlockSet operator|(BlockSet a, BlockSet b) {
        BlockSet out;
        out.bits_ = static_cast<std::uint8_t>(a.bits_ | b.bits_);
        return out;
    }

private:
    static constexpr std::uint8_t bit(Block b) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(b)); }
    std::uint8_t bits_ = 0;
};

/// The five feature groups compared in every training set: each block alone, then all blocks.
const std::vector<BlockSet>& standard_feature_groups();

struct FeatureBlockSpec {
    Block block;
    Window window;
    /// Source variables: recruitment variables for block I, wave variables otherwise.
    std::vector<Variable> variables;
};

FeatureBlockSpec block_spec(const Schema& schema, Block block);

struct ColumnDescriptor {
    Block block = Block::I;
    std::string variable;
    Concept kind = Concept::Sociodemographic;
    /// Category label; "na" for missing indicators.
    std::string category;
    bool missing_indicator = false;
    Window window = Window::None;

    /// `b<block>__<variable>__<category>__w<window>`.
    std::string name() const;

    friend bool operator==(const ColumnDescriptor&, const ColumnDescriptor&) = default;
};

/// Column schema for a block set; depends only on the schema, never on the wave.
std::vector<ColumnDescriptor> feature_columns(const Schema& schema, BlockSet groups);

std::uint64_t schema_fingerprint(std::span<const ColumnDescriptor> columns);

struct FeatureMatrix {
    int as_of_wave = 0;
    /// Panelist indices, one per row.
    std::vector<std::size_t> rows;
    std::vector<ColumnDescriptor> columns;
    Matrix values;

    std::uint64_t fingerprint() const { return schema_fingerprint(columns); }

    /// Keeps the columns of the given blocks, in order.
    FeatureMatrix select(BlockSet groups) const;
    /// Keeps the given rows (positions into `rows`), in order.
    FeatureMatrix take_rows(std::span<const std::size_t> positions) const;

    std::string to_csv(const PanelDataset& ds) const;
};

struct WindowCounts {
    /// One count per declared category.
    std::vector<int> counts;
    int missing = 0;
};

/// Category tallies of wave variable `var` (0 = response status) over a window ending at `as_of_wave`.
WindowCounts aggregate_window(const PanelDataset& ds, std::size_t panelist, std::size_t var,
                              int as_of_wave, Window window);

/// Block I one-hot encoding with one missing indicator per recruitment variable.
FeatureMatrix encode_time_invariant(const PanelDataset& ds, std::span<const std::size_t> panelists);

/// Feature matrix for the panelists eligible for a label at `as_of_wave + 1`.
FeatureMatrix build_feature_matrix(const PanelDataset& ds, int as_of_wave, BlockSet groups);

/// Feature matrix over explicit rows. Reads nothing recorded after `as_of_wave`.
FeatureMatrix build_feature_matrix(const PanelDataset& ds, int as_of_wave, BlockSet groups,
                                   std::span<const std::size_t> rows);

} // namespace nrp
