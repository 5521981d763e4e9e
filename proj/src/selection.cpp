#include "nrp/selection.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"

#include <algorithm>
#include <set>

namespace nrp {

using nlohmann::json;

const FamilyWinner* SelectionResult::winner(Family f) const {
    for (const auto& w : winners) {
        if (w.family == f) return &w;
    }
    return nullptr;
}

SelectionResult best_average(std::span<const EvaluationRecord> records, std::string_view metric) {
    std::set<int> splits;
    for (const auto& r : records) splits.insert(r.split);
    if (splits.size() < 2) {
        fail(ErrorCode::InsufficientSplits, "selection needs at least two evaluated splits");
    }
    SelectionResult result;
    result.metric = metric;
    result.final_split = *splits.rbegin();
    result.window.assign(splits.begin(), std::prev(splits.end()));

    struct Candidate {
        const EvaluationRecord* first = nullptr;
        std::map<int, std::optional<double>> values;
    };
    std::map<std::string, Candidate> candidates;
    std::set<std::pair<std::string_view, int>> seen;
    for (const auto& r : records) {
        if (!seen.emplace(r.spec_id, r.split).second) {
            fail(ErrorCode::DuplicateKey, "duplicate record for spec " + r.spec_id + " at split " +
                                              std::to_string(r.split));
        }
        if (r.split == result.final_split) continue;
        auto& c = candidates[r.spec_id];
        if (c.first == nullptr) {
            c.first = &r;
        } else if (c.first->family != r.family) {
            fail(ErrorCode::ParseError, "spec " + r.spec_id + " appears under two families");
        }
        c.values.emplace(r.split, r.metric(metric));
    }

    for (Family f : kAllFamilies) {
        std::optional<FamilyWinner> best;
        std::size_t n_candidates = 0;
        for (const auto& [spec_id, c] : candidates) {
            if (c.first->family != f) continue;
            ++n_candidates;
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& [split, v] : c.values) {
                if (v) {
                    sum += *v;
                    ++n;
                }
            }
            if (n == 0) continue;
            const double mean = sum / static_cast<double>(n);
            double ss = 0.0;
            for (const auto& [split, v] : c.values) {
                if (v) ss += (*v - mean) * (*v - mean);
            }
            const double variance = ss / static_cast<double>(n);
            // Candidates arrive in ascending spec_id order, so ties on (mean, variance) keep the earlier id.
            if (!best || mean > best->mean || (mean == best->mean && variance < best->variance)) {
                FamilyWinner w;
                w.family = f;
                w.spec_id = spec_id;
                w.groups = c.first->groups;
                w.hyperparameters = c.first->hyperparameters;
                w.mean = mean;
                w.variance = variance;
                w.trajectory.assign(c.values.begin(), c.values.end());
                best = std::move(w);
            }
        }
        if (best) {
            best->n_candidates = n_candidates;
            result.winners.push_back(std::move(*best));
        }
    }
    return result;
}

json SelectionResult::to_json() const {
    json winners_json = json::array();
    for (const auto& w : winners) {
        json hyper = json::object();
        for (std::size_t i = 0; i < w.hyperparameters.size() && i < std::size(kHyperparameterNames); ++i) {
            if (!w.hyperparameters[i].empty()) {
                hyper[std::string(kHyperparameterNames[i])] = w.hyperparameters[i];
            }
        }
        json traj = json::array();
        for (const auto& [split, v] : w.trajectory) {
            traj.push_back({{"split", split}, {"value", v ? json(*v) : json(nullptr)}});
        }
        winners_json.push_back({{"family", std::string(to_string(w.family))},
                                {"spec_id", w.spec_id},
                                {"groups", w.groups},
                                {"hyperparameters", hyper},
                                {"mean", w.mean},
                                {"variance", w.variance},
                                {"n_candidates", w.n_candidates},
                                {"trajectory", traj}});
    }
    return {{"metric", metric}, {"window", window}, {"final_split", final_split}, {"winners", winners_json}};
}

SelectionResult SelectionResult::from_json(const json& j) {
    try {
        SelectionResult r;
        r.metric = j.at("metric").get<std::string>();
        r.window = j.at("window").get<std::vector<int>>();
        r.final_split = j.at("final_split").get<int>();
        for (const auto& wj : j.at("winners")) {
            FamilyWinner w;
            w.family = family_from_string(wj.at("family").get<std::string>());
            w.spec_id = wj.at("spec_id").get<std::string>();
            w.groups = wj.at("groups").get<std::string>();
            w.hyperparameters.assign(std::size(kHyperparameterNames), "");
            const auto& hyper = wj.at("hyperparameters");
            for (std::size_t i = 0; i < std::size(kHyperparameterNames); ++i) {
                const std::string key(kHyperparameterNames[i]);
                if (hyper.contains(key)) w.hyperparameters[i] = hyper.at(key).get<std::string>();
            }
            w.mean = wj.at("mean").get<double>();
            w.variance = wj.at("variance").get<double>();
            w.n_candidates = wj.at("n_candidates").get<std::size_t>();
            for (const auto& t : wj.at("trajectory")) {
                const auto& v = t.at("value");
                w.trajectory.emplace_back(t.at("split").get<int>(),
                                          v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
            }
            r.winners.push_back(std::move(w));
        }
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed selection result: ") + e.what());
    }
}

DeploymentReport deployment_report(const SelectionResult& selection,
                                   std::span<const EvaluationRecord> final_records,
                                   const std::map<std::string, std::vector<std::string>>& risk_lists) {
    DeploymentReport report;
    report.split = selection.final_split;
    std::vector<const std::vector<std::string>*> lists;
    for (const auto& w : selection.winners) {
        const auto rec = std::find_if(final_records.begin(), final_records.end(), [&](const EvaluationRecord& r) {
            return r.spec_id == w.spec_id && r.split == selection.final_split;
        });
        if (rec == final_records.end()) {
            fail(ErrorCode::MissingEvaluation, "winner " + w.spec_id + " has no record on the final split");
        }
        const auto list = risk_lists.find(w.spec_id);
        if (list == risk_lists.end()) {
            fail(ErrorCode::MissingEvaluation, "winner " + w.spec_id + " has no risk list on the final split");
        }
        report.rows.push_back({w.family, w.spec_id, w.groups, w.hyperparameters, rec->metrics});
        lists.push_back(&list->second);
    }
    const std::size_t m = lists.size();
    report.jaccard.assign(m, std::vector<double>(m, 1.0));
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            report.jaccard[a][b] = report.jaccard[b][a] = jaccard(*lists[a], *lists[b]);
        }
    }
    return report;
}

std::string DeploymentReport::to_csv() const {
    std::string out;
    std::vector<std::string> header{"family", "spec_id", "groups"};
    for (auto h : kHyperparameterNames) header.emplace_back(h);
    if (!rows.empty()) {
        for (const auto& [name, v] : rows.front().metrics) header.push_back(name);
    }
    csv::append_row(out, header);
    for (const auto& r : rows) {
        std::vector<std::string> row{std::string(to_string(r.family)), r.spec_id, r.groups};
        row.insert(row.end(), r.hyperparameters.begin(), r.hyperparameters.end());
        for (const auto& [name, v] : r.metrics) row.push_back(csv::format_optional(v));
        csv::append_row(out, row);
    }
    return out;
}

std::string DeploymentReport::jaccard_csv() const {
    std::string out;
    std::vector<std::string> header{"family"};
    for (const auto& r : rows) header.emplace_back(to_string(r.family));
    csv::append_row(out, header);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        std::vector<std::string> row{std::string(to_string(rows[a].family))};
        for (double v : jaccard[a]) row.push_back(csv::format_number(v));
        csv::append_row(out, row);
    }
    return out;
}

} // namespace nrp
