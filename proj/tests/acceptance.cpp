#include "oracles.hpp"
#include "support.hpp"

#include "nrp/features.hpp"
#include "nrp/metrics.hpp"
#include "nrp/model_zoo.hpp"
#include "nrp/models/boosting.hpp"
#include "nrp/models/logistic.hpp"
#include "nrp/pipeline.hpp"
#include "nrp/selection.hpp"
#include "nrp/synth.hpp"
#include "nrp/temporal_cv.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace nrp;
using namespace nrp::testing;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects failed checks; the first few are reported.
struct Verdict {
    std::size_t checks = 0;
    std::vector<std::string> failures;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        ++checks;
        if (!ok) failures.push_back(what);
    }
};

SimConfig sim_config(std::size_t n, int waves, std::uint64_t seed) {
    SimConfig c = SimConfig::defaults();
    c.n_panelists = n;
    c.n_waves = waves;
    c.seed = seed;
    return c;
}

/// One hyperparameter setting per family.
json one_setting_grid() {
    return json{{"logistic", {{"penalty", {"l1"}}, {"C", {0.1}}}},
                {"tree", {{"max_depth", {5}}, {"max_features", {nullptr}}}},
                {"forest", {{"max_features", {"sqrt"}}, {"min_samples_leaf", {10}}, {"n_estimators", {100}}}},
                {"extra_trees", {{"max_features", {"sqrt"}}, {"min_samples_leaf", {10}}, {"n_estimators", {100}}}},
                {"boosting", {{"max_depth", {3}}, {"n_estimators", {100}}, {"learning_rate", {0.1}}, {"subsample", {0.8}}}}};
}

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t p) {
    Matrix X(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) X(i, j) = rng.normal();
    }
    return X;
}

/// Noisy linear rule on the first columns; both classes present.
std::vector<int> linear_labels(Rng& rng, const Matrix& X) {
    std::vector<int> y(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        double m = rng.normal();
        for (std::size_t j = 0; j < std::min<std::size_t>(3, X.cols()); ++j) m += X(i, j);
        y[i] = m > 0.0 ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    return y;
}

// ---------------------------------------------------------------------------

void structural_fidelity(Verdict& v) {
    const auto start = Clock::now();
    const auto plan = rolling_splits(22);
    const auto grid = reference_grid();
    const auto settings = count_settings(grid);
    const auto specs = enumerate_grid(grid, standard_feature_groups());
    const double plan_seconds = seconds_since(start);
    v.check(settings == 40, "settings != 40");
    v.check(specs.size() == 200, "specs != 200");
    v.check(plan.splits.size() == 20, "splits != 20");
    v.check(plan_seconds < 1.0, "plan and enumeration took >= 1 s");

    const auto ds = simulate(sim_config(60, 22, 11)).dataset;
    RunConfig config;
    config.threads = 0;
    const auto run_start = Clock::now();
    const auto out = run_experiment(ds, config);
    const double run_seconds = seconds_since(run_start);
    v.check(out.records.size() == 4000, "records != 4000");
    std::set<std::pair<int, std::string>> pairs;
    std::map<int, std::size_t> per_split;
    for (const auto& r : out.records) {
        pairs.emplace(r.split, r.spec_id);
        ++per_split[r.split];
    }
    v.check(pairs.size() == 4000, "(split, spec) pairs are not unique");
    v.check(per_split.size() == 20, "records do not cover 20 splits");
    for (const auto& [split, n] : per_split) v.check(n == 200, "split " + std::to_string(split) + " lacks 200 specs");
    v.detail << settings << " settings, " << specs.size() << " specs, " << plan.splits.size() << " splits, "
             << out.records.size() << " records; plan+enumeration " << plan_seconds << " s, full run "
             << run_seconds << " s";
}

void metric_oracles(Verdict& v) {
    const auto start = Clock::now();
    Rng rng(2);
    double worst_auc = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        const auto s = random_scores(rng, n);
        std::vector<int> y(n);
        for (int& t : y) t = rng.bernoulli(0.3) ? 1 : 0;
        y[0] = 1;
        y[n - 1] = 0;
        const auto ids = shuffled_ids(rng, n);
        worst_auc = std::max(worst_auc, std::abs(roc_auc(s, y) - auc_pairs(s, y)));

        const auto other = random_scores(rng, n);
        for (int pct : {5, 10}) {
            const double p = pct / 100.0;
            const auto list = top_list(s, ids, p);
            v.check(list.positions == top_oracle(s, ids, pct), "top-k positions differ from the sort oracle");
            v.check(precision_at_pct(s, y, p, ids) == precision_oracle(s, y, ids, pct), "precision differs");
            v.check(recall_at_pct(s, y, p, ids) == recall_oracle(s, y, ids, pct), "recall differs");
            const auto list2 = top_list(other, ids, p);
            v.check(jaccard(list.ids, list2.ids) == jaccard_oracle(list.ids, list2.ids), "jaccard differs");
        }
    }
    const double elapsed = seconds_since(start);
    v.check(worst_auc <= 1e-12, "roc_auc deviates from pair counting by more than 1e-12");
    v.check(elapsed < 30.0, "runtime >= 30 s");
    v.detail << "500 instances, max |auc - pairs| = " << worst_auc << ", " << v.checks << " checks, " << elapsed
             << " s";
}

void optimizer_correctness(Verdict& v) {
    Rng rng(3);
    double worst_grad = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.below(50);
        const std::size_t p = 1 + rng.below(12);
        const auto X = random_matrix(rng, n, p);
        const auto y = linear_labels(rng, X);
        std::vector<double> w(p);
        for (double& t : w) t = rng.normal() * 0.5;
        const double b = rng.normal() * 0.5;
        const auto lg = models::logistic_loss_gradient(X, y, w, b);
        const double h = 1e-5;
        for (std::size_t j = 0; j <= p; ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < p) {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double fd = (models::logistic_loss_gradient(X, y, wp, bp).loss -
                               models::logistic_loss_gradient(X, y, wm, bm).loss) /
                              (2 * h);
            const double analytic = j < p ? lg.grad_w[j] : lg.grad_b;
            worst_grad = std::max(worst_grad, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6));
        }
    }
    v.check(worst_grad < 1e-4, "finite-difference relative error >= 1e-4");

    auto zeros = [](const std::vector<double>& w) { return std::count(w.begin(), w.end(), 0.0); };
    long strong_total = 0, weak_total = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto X = random_matrix(rng, 40 + rng.below(60), 5 + rng.below(15));
        const auto y = linear_labels(rng, X);
        const auto strong = zeros(models::fit_logistic(X, y, models::Penalty::L1, 0.05).weights);
        const auto weak = zeros(models::fit_logistic(X, y, models::Penalty::L1, 1000.0).weights);
        strong_total += strong;
        weak_total += weak;
        v.check(strong >= weak, "fewer zeros at C=0.05 than at C=1000");
    }

    double worst_rise = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto X = random_matrix(rng, 100 + rng.below(100), 4 + rng.below(6));
        const auto y = linear_labels(rng, X);
        models::BoostingOptions o;
        o.n_estimators = 100;
        o.max_depth = 3;
        o.subsample = 1.0;
        const auto m = models::fit_boosting(X, y, o, static_cast<std::uint64_t>(trial));
        v.check(m.training_loss.size() == 101, "training loss does not cover 100 rounds");
        for (std::size_t r = 1; r < m.training_loss.size(); ++r) {
            worst_rise = std::max(worst_rise, m.training_loss[r] - m.training_loss[r - 1]);
        }
    }
    v.check(worst_rise <= 0.0, "boosting training loss increased");
    v.detail << "max gradient rel. error " << worst_grad << "; l1 zeros " << strong_total << " (C=0.05) vs "
             << weak_total << " (C=1000); max boosting loss rise " << worst_rise;
}

void leakage(Verdict& v) {
    Rng rng(4);
    for (int probe = 0; probe < 100; ++probe) {
        const int waves = 4 + static_cast<int>(rng.below(6));
        const auto ds = probe % 2 == 0 ? random_panel(rng, 10 + rng.below(40), waves)
                                       : simulate(sim_config(30 + rng.below(50), waves, rng.next())).dataset;
        const int as_of = static_cast<int>(rng.below(static_cast<std::uint64_t>(waves - 1)));
        const auto mutated = scramble_after(ds, as_of, rng);
        const auto a = build_feature_matrix(ds, as_of, BlockSet::all());
        const auto b = build_feature_matrix(mutated, as_of, BlockSet::all());
        v.check(a.rows == b.rows, "row set changed under mutation");
        const auto& da = a.values.data();
        const auto& db = b.values.data();
        v.check(a.columns == b.columns && da.size() == db.size() &&
                    std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) == 0,
                "feature values changed under mutation");
    }
    v.detail << "100 probes, " << v.checks << " checks";
}

void window_nesting(Verdict& v) {
    std::size_t cells = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto ds = simulate(sim_config(300, 12, seed)).dataset;
        for (int w = 0; w < ds.n_waves() - 1; ++w) {
            const auto fm = build_feature_matrix(ds, w, {Block::II, Block::III, Block::IV});
            const std::size_t width = fm.columns.size() / 3;
            for (std::size_t c = 0; c < width; ++c) {
                const auto& a = fm.columns[c];
                const auto& b = fm.columns[width + c];
                const auto& d = fm.columns[2 * width + c];
                v.check(a.variable == b.variable && b.variable == d.variable && a.category == b.category &&
                            b.category == d.category,
                        "block columns are not aligned");
            }
            for (std::size_t r = 0; r < fm.rows.size(); ++r) {
                for (std::size_t c = 0; c < width; ++c) {
                    const double last1 = fm.values(r, c), last3 = fm.values(r, width + c),
                                 all = fm.values(r, 2 * width + c);
                    ++cells;
                    if (!(all >= last3 && last3 >= last1)) v.check(false, "window counts are not nested");
                    if (w <= 2 && all != last3) v.check(false, "block IV differs from block III at early wave");
                }
            }
        }
    }
    v.detail << cells << " panelist/wave/column cells over 3 synthetic panels";
}

void directional_reproduction(Verdict& v) {
    const auto start = Clock::now();
    const auto ds = simulate(sim_config(2000, 22, 2024)).dataset;
    RunConfig config;
    config.grid = one_setting_grid();
    config.feature_groups = {BlockSet{Block::I}, BlockSet::all()};
    config.threads = 0;
    const auto out = run_experiment(ds, config);
    const double elapsed = seconds_since(start);

    std::map<std::string, std::pair<double, int>> sums;
    std::map<std::string, const EvaluationRecord*> first;
    for (const auto& r : out.records) {
        const auto auc = r.metric("roc_auc");
        if (!auc) continue;
        sums[r.spec_id].first += *auc;
        sums[r.spec_id].second += 1;
        first.emplace(r.spec_id, &r);
    }
    double best_all = 0.0, best_i = 0.0, worst_family_all = 1.0;
    std::ostringstream families;
    for (const auto& [id, s] : sums) {
        const double mean = s.first / s.second;
        const auto* r = first[id];
        if (r->groups == "all") {
            best_all = std::max(best_all, mean);
            worst_family_all = std::min(worst_family_all, mean);
            families << ' ' << to_string(r->family) << '=' << mean;
            v.check(mean - 0.5 >= 0.1, std::string(to_string(r->family)) + " all-blocks mean AUC below 0.6");
        } else {
            best_i = std::max(best_i, mean);
        }
    }
    v.check(sums.size() == 10, "expected 10 specs with defined AUCs");
    v.check(best_all - best_i >= 0.05, "all-blocks advantage below 0.05");
    v.check(elapsed < 600.0, "reduced grid took >= 10 minutes");
    v.detail << "best all " << best_all << " vs best I " << best_i << " (diff " << best_all - best_i
             << "); all-blocks means:" << families.str() << "; " << elapsed << " s";
}

void selection_correctness(Verdict& v) {
    Rng rng(7);
    std::size_t mean_ties = 0, variance_ties = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n_splits = 2 + static_cast<int>(rng.below(8));
        const auto records = random_records(rng, n_splits, 1 + rng.below(8), trial % 2 == 0);
        const auto sel = best_average(records);
        const auto oracle = brute_force_winners(records, "roc_auc");
        v.check(sel.winners.size() == oracle.size(), "winner count differs");
        for (const auto& [family, want] : oracle) {
            const auto* got = sel.winner(family);
            v.check(got != nullptr && got->spec_id == want.spec_id && got->mean == want.mean,
                    "winner differs from brute force");
        }
        // Count ties the tie rules had to break.
        const int last = n_splits - 1;
        std::map<std::string, std::vector<double>> vals;
        std::map<std::string, Family> fam;
        for (const auto& r : records) {
            if (r.split == last) continue;
            fam[r.spec_id] = r.family;
            if (auto x = r.metric("roc_auc")) vals[r.spec_id].push_back(*x);
        }
        for (const auto& [family, want] : oracle) {
            bool mean_tie = false, variance_tie = false;
            for (const auto& [id, xs] : vals) {
                if (fam[id] != family || id == want.spec_id || xs.empty()) continue;
                double m = 0.0;
                for (double x : xs) m += x;
                m /= static_cast<double>(xs.size());
                if (m != want.mean) continue;
                mean_tie = true;
                double ss = 0.0;
                for (double x : xs) ss += (x - m) * (x - m);
                variance_tie |= ss / static_cast<double>(xs.size()) == want.variance;
            }
            mean_ties += mean_tie;
            variance_ties += variance_tie;
        }
    }
    v.check(mean_ties > 0, "no mean ties exercised");
    v.check(variance_ties > 0, "no variance ties exercised");

    std::size_t exclusion_checks = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto records = random_records(rng, 6, 5, false);
        const auto before = best_average(records);
        v.check(before.final_split == 5, "final split is not the last split");
        for (auto& r : records) {
            if (r.split == 5) r.metrics[0].second = rng.uniform();
        }
        const auto after = best_average(records);
        for (std::size_t i = 0; i < after.winners.size(); ++i) {
            ++exclusion_checks;
            v.check(before.winners[i].spec_id == after.winners[i].spec_id, "final split changed a winner");
            for (const auto& [split, x] : after.winners[i].trajectory) {
                v.check(split != 5, "final split inside the selection window");
            }
        }
    }
    v.detail << "1000 trials; " << mean_ties << " mean ties, " << variance_ties << " variance+mean ties; "
             << exclusion_checks << " final-split exclusion checks";
}

void determinism(Verdict& v) {
    const auto root = temp_dir("acceptance_det");
    write_simulation(simulate(sim_config(120, 8, 5)), root / "data");
    auto run = [&](const std::string& out, unsigned threads) {
        json j{{"data", {{"schema", "data/schema.json"}, {"recruitment", "data/recruitment.csv"}, {"waves", "data/waves.csv"}}},
               {"output_dir", out},
               {"seed", 4242},
               {"threads", threads},
               {"save_models", true}};
        cmd_run(RunConfig::from_json(j, root));
        return snapshot(root / out);
    };
    const auto a = run("t1", 1);
    const auto b = run("t4", 4);
    const auto c = run("t4_again", 4);
    v.check(a.size() >= 6, "record store is incomplete");
    v.check(a == b, "threads=1 and threads=4 stores differ");
    v.check(b == c, "repeated threads=4 stores differ");
    std::size_t bytes = 0;
    for (const auto& [name, content] : a) bytes += content.size();
    v.detail << a.size() << " files, " << bytes << " bytes, reference grid on 120 panelists x 8 waves";
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
        {"structural fidelity", structural_fidelity},
        {"metric oracle equivalence", metric_oracles},
        {"optimizer correctness", optimizer_correctness},
        {"leakage", leakage},
        {"window nesting", window_nesting},
        {"directional reproduction", directional_reproduction},
        {"selection correctness", selection_correctness},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            criteria[i].second(v);
        } catch (const std::exception& e) {
            v.failures.push_back(std::string("exception: ") + e.what());
        }
        const bool ok = v.failures.empty();
        failed += !ok;
        std::printf("%s %zu %s: %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.str().c_str());
        for (std::size_t f = 0; f < std::min<std::size_t>(v.failures.size(), 5); ++f) {
            std::printf("    %s\n", v.failures[f].c_str());
        }
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
