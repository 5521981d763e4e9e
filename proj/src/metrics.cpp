#include "nrp/metrics.hpp"

#include "nrp/csv.hpp"
#include "nrp/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace nrp {

namespace {

void check_pair(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) {
        fail(ErrorCode::EmptyInput, "no scores to evaluate");
    }
    if (scores.size() != labels.size()) {
        fail(ErrorCode::EmptyInput, "scores and labels differ in length");
    }
}

std::size_t count_positives(std::span<const int> labels) {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

/// Row order by descending score; ties grouped together in ascending row order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::size_t true_positives(std::span<const double> scores, std::span<const int> labels, double pct,
                           std::span<const std::string> ids, std::size_t& k) {
    const auto top = top_positions(scores, pct, ids);
    k = top.size();
    std::size_t tp = 0;
    for (auto r : top) tp += labels[r] == 1 ? 1 : 0;
    return tp;
}

} // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_pair(scores, labels);
    const std::size_t n = scores.size();
    const std::size_t pos = count_positives(labels);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
        fail(ErrorCode::SingleClass, "ROC-AUC needs both classes");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] == 1) rank_sum += midrank;
        }
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    const double u = rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

std::size_t top_k(std::size_t n, double pct) {
    if (!(pct > 0.0 && pct <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "cutoff must lie in (0, 1]");
    }
    if (n == 0) {
        fail(ErrorCode::EmptyInput, "cannot take a top list of nothing");
    }
    // The small guard keeps products such as 0.1 * 20 from rounding up past an exact integer.
    const auto k = static_cast<std::size_t>(std::ceil(pct * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> top_positions(std::span<const double> scores, double pct,
                                       std::span<const std::string> ids) {
    if (scores.empty()) {
        fail(ErrorCode::EmptyInput, "no scores to rank");
    }
    if (!ids.empty() && ids.size() != scores.size()) {
        fail(ErrorCode::EmptyInput, "ids and scores differ in length");
    }
    const std::size_t k = top_k(scores.size(), pct);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (!ids.empty() && ids[a] != ids[b]) return ids[a] < ids[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
    order.resize(k);
    return order;
}

RiskList top_list(std::span<const double> scores, std::span<const std::string> ids, double pct) {
    if (ids.size() != scores.size()) {
        fail(ErrorCode::EmptyInput, "ids and scores differ in length");
    }
    RiskList list;
    list.pct = pct;
    list.positions = top_positions(scores, pct, ids);
    for (auto r : list.positions) list.ids.push_back(ids[r]);
    list.threshold = scores[list.positions.back()];
    return list;
}

double precision_at_pct(std::span<const double> scores, std::span<const int> labels, double pct,
                        std::span<const std::string> ids) {
    check_pair(scores, labels);
    std::size_t k = 0;
    const auto tp = true_positives(scores, labels, pct, ids, k);
    return static_cast<double>(tp) / static_cast<double>(k);
}

double recall_at_pct(std::span<const double> scores, std::span<const int> labels, double pct,
                     std::span<const std::string> ids) {
    check_pair(scores, labels);
    const std::size_t pos = count_positives(labels);
    if (pos == 0) {
        fail(ErrorCode::SingleClass, "recall is undefined without positives");
    }
    std::size_t k = 0;
    const auto tp = true_positives(scores, labels, pct, ids, k);
    return static_cast<double>(tp) / static_cast<double>(pos);
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& x : sa) common += sb.count(x);
    return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

Curves curves(std::span<const double> scores, std::span<const int> labels) {
    check_pair(scores, labels);
    const std::size_t pos = count_positives(labels);
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        fail(ErrorCode::SingleClass, "curves need both classes");
    }
    const auto order = descending_order(scores);
    Curves out;
    out.roc.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        out.roc.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos));
        out.pr.emplace_back(static_cast<double>(tp) / static_cast<double>(pos),
                            static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    return out;
}

double trapezoid_area(std::span<const std::pair<double, double>> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2.0;
    }
    return area;
}

std::vector<ImportanceCell> grouped_importance(std::span<const double> importance,
                                               std::span<const ColumnDescriptor> columns) {
    if (importance.size() != columns.size()) {
        fail(ErrorCode::SchemaMismatch, "importance and column counts differ");
    }
    constexpr std::size_t kConcepts = 6; // five concepts plus missing indicators
    std::vector<double> sums(kConcepts * 4, 0.0);
    std::vector<std::size_t> counts(kConcepts * 4, 0);
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& c = columns[j];
        const std::size_t concept_index = c.missing_indicator ? 5 : static_cast<std::size_t>(c.kind);
        const std::size_t cell = concept_index * 4 + (static_cast<std::size_t>(c.block) - 1);
        sums[cell] += importance[j];
        counts[cell] += 1;
    }
    std::vector<ImportanceCell> out;
    for (std::size_t ci = 0; ci < kConcepts; ++ci) {
        for (std::size_t b = 0; b < 4; ++b) {
            const std::size_t cell = ci * 4 + b;
            if (counts[cell] == 0) continue;
            ImportanceCell ic;
            ic.concept_name = ci == 5 ? "na" : std::string(to_string(static_cast<Concept>(ci)));
            ic.block = static_cast<Block>(b + 1);
            ic.mean = sums[cell] / static_cast<double>(counts[cell]);
            ic.n_columns = counts[cell];
            out.push_back(std::move(ic));
        }
    }
    return out;
}

std::string cutoff_metric_name(std::string_view prefix, double pct) {
    const double percent = std::round(pct * 100.0 * 1e6) / 1e6;
    return std::string(prefix) + csv::format_number(percent);
}

std::vector<std::string> metric_names(std::span<const double> cutoffs) {
    std::vector<std::string> names{"roc_auc"};
    for (double c : cutoffs) names.push_back(cutoff_metric_name("prec", c));
    for (double c : cutoffs) names.push_back(cutoff_metric_name("rec", c));
    names.emplace_back("base_rate");
    return names;
}

TestEvaluation evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                               std::span<const std::string> ids, std::span<const double> cutoffs) {
    check_pair(scores, labels);
    const std::size_t pos = count_positives(labels);
    const bool single_class = pos == 0 || pos == labels.size();
    TestEvaluation ev;
    ev.metrics.emplace_back("roc_auc",
                            single_class ? std::nullopt : std::optional<double>(roc_auc(scores, labels)));
    for (double c : cutoffs) {
        ev.metrics.emplace_back(cutoff_metric_name("prec", c), precision_at_pct(scores, labels, c, ids));
    }
    for (double c : cutoffs) {
        ev.metrics.emplace_back(cutoff_metric_name("rec", c),
                                pos == 0 ? std::nullopt
                                         : std::optional<double>(recall_at_pct(scores, labels, c, ids)));
    }
    ev.metrics.emplace_back("base_rate", static_cast<double>(pos) / static_cast<double>(labels.size()));
    if (single_class) {
        ev.flags.emplace_back("single_class_test");
    }
    return ev;
}

std::optional<double> EvaluationRecord::metric(std::string_view name) const {
    for (const auto& [k, v] : metrics) {
        if (k == name) return v;
    }
    return std::nullopt;
}

std::vector<std::string> hyperparameter_columns(const ModelSpec& spec) {
    std::vector<std::string> out(std::size(kHyperparameterNames));
    for (const auto& [name, value] : spec.hyperparameters()) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (kHyperparameterNames[i] == name) out[i] = value;
        }
    }
    return out;
}

std::string records_to_csv(std::span<const EvaluationRecord> records) {
    std::string out;
    std::vector<std::string> header{"split", "spec_id", "family", "groups"};
    for (auto h : kHyperparameterNames) header.emplace_back(h);
    if (!records.empty()) {
        for (const auto& [name, value] : records.front().metrics) header.push_back(name);
    }
    header.emplace_back("flags");
    csv::append_row(out, header);
    for (const auto& r : records) {
        std::vector<std::string> row{std::to_string(r.split), r.spec_id, std::string(to_string(r.family)),
                                     r.groups};
        row.insert(row.end(), r.hyperparameters.begin(), r.hyperparameters.end());
        for (const auto& [name, value] : r.metrics) row.push_back(csv::format_optional(value));
        row.push_back(r.flags);
        csv::append_row(out, row);
    }
    return out;
}

std::vector<EvaluationRecord> records_from_csv(std::string_view text) {
    const auto table = csv::parse(text);
    const std::size_t n_hyper = std::size(kHyperparameterNames);
    const std::size_t fixed = 4 + n_hyper;
    const auto& h = table.header;
    if (h.size() < fixed + 1 || h[0] != "split" || h[1] != "spec_id" || h[2] != "family" ||
        h[3] != "groups" || h.back() != "flags") {
        fail(ErrorCode::ParseError, "record table header is malformed");
    }
    for (std::size_t i = 0; i < n_hyper; ++i) {
        if (h[4 + i] != kHyperparameterNames[i]) {
            fail(ErrorCode::ParseError, "unexpected hyperparameter column '" + h[4 + i] + "'");
        }
    }
    std::vector<EvaluationRecord> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        EvaluationRecord r;
        const auto& s = row[0];
        if (std::from_chars(s.data(), s.data() + s.size(), r.split).ec != std::errc{}) {
            fail(ErrorCode::ParseError, "bad split index '" + s + "'");
        }
        r.spec_id = row[1];
        r.family = family_from_string(row[2]);
        r.groups = row[3];
        r.hyperparameters.assign(row.begin() + 4, row.begin() + static_cast<std::ptrdiff_t>(fixed));
        for (std::size_t c = fixed; c + 1 < h.size(); ++c) {
            std::optional<double> v;
            if (!row[c].empty()) {
                try {
                    v = std::stod(row[c]);
                } catch (const std::exception&) {
                    fail(ErrorCode::ParseError, "bad metric value '" + row[c] + "'");
                }
            }
            r.metrics.emplace_back(h[c], v);
        }
        r.flags = row.back();
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace nrp
