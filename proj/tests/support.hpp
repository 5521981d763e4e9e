#pragma once

#include "nrp/error.hpp"
#include "nrp/panel.hpp"
#include "nrp/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

namespace nrp::testing {

/// Two recruitment variables and two wave items, small enough to reason about by hand.
inline Schema small_schema(std::vector<std::string> wave_labels = {}) {
    return Schema(
        {
            {"sex", Concept::Sociodemographic, {"female", "male"}},
            {"willing", Concept::SurveyCooperation, {"low", "high"}},
            {"rating", Concept::SurveyEvaluation, {"bad", "ok", "good"}},
            {"mode", Concept::SurveyParticipation, {"web", "mail"}},
        },
        std::move(wave_labels));
}

/// Random valid panel over small_schema(): arbitrary statuses and items, random dropouts.
inline PanelDataset random_panel(Rng& rng, std::size_t n_panelists, int n_waves) {
    PanelBuilder b(small_schema());
    for (std::size_t i = 0; i < n_panelists; ++i) {
        Panelist p;
        p.id = "id" + std::to_string(1000 + i);
        p.attributes = {static_cast<Code>(static_cast<int>(rng.below(3)) - 1),
                        static_cast<Code>(static_cast<int>(rng.below(3)) - 1)};
        if (i != 0 && rng.bernoulli(0.3)) {
            p.dropout_wave = static_cast<int>(1 + rng.below(static_cast<std::uint64_t>(n_waves)));
        }
        const int last = p.dropout_wave ? *p.dropout_wave : n_waves;
        for (int w = 0; w < last; ++w) {
            // The first panelist reaches every wave so the panel length is fixed.
            if (i != 0 && rng.bernoulli(0.1)) continue;
            WaveRecord r;
            r.panelist_id = p.id;
            r.wave = w;
            r.status = static_cast<ResponseStatus>(rng.below(3));
            if (r.status == ResponseStatus::Nonresponse) {
                r.items = {kMissing, kMissing};
            } else {
                r.items = {static_cast<Code>(static_cast<int>(rng.below(4)) - 1),
                           static_cast<Code>(static_cast<int>(rng.below(3)) - 1)};
            }
            b.add_record(std::move(r));
        }
        b.add_panelist(std::move(p));
    }
    return b.build();
}

/// Rewrites every record after `as_of_wave` with fresh random statuses and items.
inline PanelDataset scramble_after(const PanelDataset& ds, int as_of_wave, Rng& rng) {
    auto b = PanelBuilder::from(ds);
    const auto& items = ds.schema().wave_items();
    for (auto& r : b.records()) {
        if (r.wave <= as_of_wave) continue;
        r.status = static_cast<ResponseStatus>(rng.below(3));
        for (std::size_t i = 0; i < items.size(); ++i) {
            r.items[i] = r.status == ResponseStatus::Nonresponse
                             ? kMissing
                             : static_cast<Code>(static_cast<int>(rng.below(items[i].categories.size() + 1)) - 1);
        }
    }
    return b.build();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("nrp_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Relative path → contents for every regular file under `dir`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[std::filesystem::relative(e.path(), dir).generic_string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

} // namespace nrp::testing

/// Checks that an expression throws nrp::Error with the given code.
#define CHECK_NRP_ERROR(expr, error_code)                                                          \
    do {                                                                                           \
        bool thrown_ = false;                                                                      \
        try {                                                                                      \
            (void)(expr);                                                                          \
        } catch (const ::nrp::Error& e_) {                                                         \
            thrown_ = true;                                                                        \
            CHECK_MESSAGE(e_.code() == (error_code), "got " << ::nrp::error_name(e_.code()));      \
        }                                                                                          \
        CHECK_MESSAGE(thrown_, "expected " << ::nrp::error_name(error_code));                      \
    } while (0)
