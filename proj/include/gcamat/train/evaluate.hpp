#pragma once

#include <algorithm>
#include <iomanip>

#include "gcamat/io/png.hpp"
#include "gcamat/train/metrics.hpp"
#include "gcamat/train/trainer.hpp"

namespace gcamat::train {

struct EvalItem {
    std::string name;
    Tensor<float> image;   // (1,3,H,W)
    Tensor<float> trimap;  // (1,3,H,W) one-hot
    Tensor<float> alpha;   // (1,1,H,W) ground truth
};

struct MetricReport {
    struct Row {
        std::string name;
        Metrics m;
        bool no_opaque_flag = false;
    };
    std::vector<Row> rows;
    Metrics mean;
    int flagged = 0;
};

// Discover <stem>_image.png / <stem>_trimap.png / <stem>_alpha.png triples.
inline std::vector<EvalItem> load_eval_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> stems;
    if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        const std::string suffix = "_image.png";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(stems.begin(), stems.end());
    std::vector<EvalItem> items;
    for (const auto& stem : stems) {
        fs::path base = fs::path(dir);
        fs::path tri_path = base / (stem + "_trimap.png");
        fs::path alpha_path = base / (stem + "_alpha.png");
        if (!fs::exists(tri_path) || !fs::exists(alpha_path)) {
            std::cerr << "eval: skipping " << stem << " (missing trimap or alpha)\n";
            continue;
        }
        EvalItem item;
        item.name = stem;
        item.image = io::read_png((base / (stem + "_image.png")).string());
        item.trimap = data::gray_to_trimap(io::read_png(tri_path.string()));
        item.alpha = io::read_png(alpha_path.string());
        items.push_back(std::move(item));
    }
    return items;
}

template <typename T>
Tensor<T> unknown_mask_of(const Tensor<T>& trimap) {
    const Shape s = trimap.shape();
    Tensor<T> mask(s.n, 1, s.h, s.w);
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                mask.at(n, 0, y, x) = trimap.at(n, gca::kTrimapUnknown, y, x);
    return mask;
}

// Compute the four metrics over the unknown region for a prediction
// provider (either injected alpha maps or a network's inference).
inline MetricReport evaluate_with(const std::vector<EvalItem>& items,
                                  const std::function<Tensor<float>(const EvalItem&)>& predict) {
    MetricReport report;
    double acc[4] = {0, 0, 0, 0};
    for (const auto& item : items) {
        Tensor<float> pred = predict(item);
        MetricReport::Row row;
        row.name = item.name;
        row.m = compute_metrics(pred, item.alpha, unknown_mask_of(item.trimap),
                                &row.no_opaque_flag);
        if (row.no_opaque_flag) ++report.flagged;
        acc[0] += row.m.mse;
        acc[1] += row.m.sad;
        acc[2] += row.m.grad;
        acc[3] += row.m.conn;
        report.rows.push_back(std::move(row));
    }
    if (!report.rows.empty()) {
        report.mean.mse = acc[0] / report.rows.size();
        report.mean.sad = acc[1] / report.rows.size();
        report.mean.grad = acc[2] / report.rows.size();
        report.mean.conn = acc[3] / report.rows.size();
    }
    return report;
}

// Whole-image inference per item through the network.
template <typename Net>
MetricReport evaluate(Net& net, const std::vector<EvalItem>& items) {
    return evaluate_with(items,
                         [&](const EvalItem& it) { return net.infer_full(it.image, it.trimap); });
}

// Per-image rows plus a mean row, in the benchmark's column order
// (MSE, SAD, Grad, Conn). SAD/Grad/Conn are sums over the unknown region
// divided by 1000, MSE is the mean.
inline void write_metrics_csv(const std::string& path, const MetricReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# SAD, Grad and Conn are unknown-region sums / 1000; MSE is the unknown-region mean\n";
    out << "name,MSE,SAD,Grad,Conn\n";
    out << std::setprecision(10);
    for (const auto& row : report.rows)
        out << row.name << "," << row.m.mse << "," << row.m.sad << "," << row.m.grad << ","
            << row.m.conn << (row.no_opaque_flag ? ",no-fully-opaque-gt" : "") << "\n";
    out << "mean," << report.mean.mse << "," << report.mean.sad << "," << report.mean.grad << ","
        << report.mean.conn << "\n";
}

// Frozen synthetic eval set: crops of eval_size, fully determined by seed.
inline std::vector<EvalItem> synthetic_eval_set(uint64_t seed, int count, int eval_size,
                                                int synth_size, data::AugmentConfig aug) {
    aug.crop = eval_size;
    std::vector<EvalItem> items;
    uint64_t index = 0;
    while (static_cast<int>(items.size()) < count) {
        auto s = data::make_sample(seed, index++, synth_size, aug);
        if (!s) continue;
        EvalItem item;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%04llu", static_cast<unsigned long long>(items.size()));
        item.name = buf;
        item.image = s->image;
        item.trimap = s->trimap;
        item.alpha = s->alpha;
        items.push_back(std::move(item));
        if (index > static_cast<uint64_t>(count) * 100)
            throw Error("synthetic eval set generation starved");
    }
    return items;
}

// --------------------------------------------------------------------------
// Baseline-vs-GCA comparison harness
// --------------------------------------------------------------------------

struct CompareOutcome {
    Metrics baseline_median, gca_median;
    std::vector<Metrics> baseline_runs, gca_runs;
    bool trend_ok = false;  // gca median MSE <= baseline median MSE
};

namespace detail {
inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : v[v.size() / 2];
}

inline Metrics median_metrics(const std::vector<Metrics>& runs) {
    std::vector<double> mse, sad, grad, conn;
    for (const auto& m : runs) {
        mse.push_back(m.mse);
        sad.push_back(m.sad);
        grad.push_back(m.grad);
        conn.push_back(m.conn);
    }
    return {median(sad), median(mse), median(grad), median(conn)};
}
}  // namespace detail

// Reference full-scale results on Composition-1k for this architecture
// family; documentation targets only, not reproducible from synthetic desk
// data.
inline constexpr double kReferenceBaseline[4] = {0.0106, 40.62, 21.53, 38.43};  // MSE,SAD,Grad,Conn
inline constexpr double kReferenceFull[4] = {0.0091, 35.28, 16.92, 32.53};

// Train baseline and GCA models with identical budgets over several seeds,
// evaluate on a frozen synthetic set, and emit the comparison table. The
// directional expectation (GCA median MSE <= baseline) is reported as a
// warning, never a failure.
template <typename NetFactory>
CompareOutcome compare_baseline_gca(NetFactory&& make_net, const TrainConfig& base_cfg,
                                    const std::function<SampleSource(uint64_t)>& source_for_seed,
                                    const std::vector<EvalItem>& eval_set, int n_seeds,
                                    const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    CompareOutcome outcome;
    for (int use_gca = 0; use_gca < 2; ++use_gca) {
        for (int s = 0; s < n_seeds; ++s) {
            uint64_t seed = base_cfg.seed + s;
            TrainConfig cfg = base_cfg;
            cfg.seed = seed;
            auto net = make_net(use_gca == 1, seed);
            std::string run_dir =
                (fs::path(out_dir) / ((use_gca ? "gca_seed" : "baseline_seed") + std::to_string(s)))
                    .string();
            train(*net, cfg, source_for_seed(seed), run_dir);
            auto report = evaluate(*net, eval_set);
            write_metrics_csv((fs::path(run_dir) / "metrics.csv").string(), report);
            (use_gca ? outcome.gca_runs : outcome.baseline_runs).push_back(report.mean);
        }
    }
    outcome.baseline_median = detail::median_metrics(outcome.baseline_runs);
    outcome.gca_median = detail::median_metrics(outcome.gca_runs);
    outcome.trend_ok = outcome.gca_median.mse <= outcome.baseline_median.mse;

    std::ofstream out(fs::path(out_dir) / "comparison.csv");
    out << "# median over " << n_seeds << " seeds on a frozen " << eval_set.size()
        << "-image synthetic eval set\n";
    out << "# reference full-scale results on Composition-1k (documentation targets, not"
           " reproducible at desk scale):\n";
    out << "#   baseline MSE " << kReferenceBaseline[0] << " SAD " << kReferenceBaseline[1]
        << " Grad " << kReferenceBaseline[2] << " Conn " << kReferenceBaseline[3] << "\n";
    out << "#   full     MSE " << kReferenceFull[0] << " SAD " << kReferenceFull[1] << " Grad "
        << kReferenceFull[2] << " Conn " << kReferenceFull[3] << "\n";
    out << "method,MSE,SAD,Grad,Conn\n";
    out << std::setprecision(10);
    out << "baseline," << outcome.baseline_median.mse << "," << outcome.baseline_median.sad << ","
        << outcome.baseline_median.grad << "," << outcome.baseline_median.conn << "\n";
    out << "gca," << outcome.gca_median.mse << "," << outcome.gca_median.sad << ","
        << outcome.gca_median.grad << "," << outcome.gca_median.conn << "\n";
    if (!outcome.trend_ok) {
        out << "# WARNING: gca median MSE above baseline at this desk scale (expected-trend "
               "check, not a failure)\n";
        std::cerr << "comparison: WARNING: gca median MSE above baseline (desk-scale trend "
                     "check)\n";
    }
    return outcome;
}

// --------------------------------------------------------------------------
// Loss-flag ablation harness
// --------------------------------------------------------------------------

struct AblationRow {
    bool rec, comp, gradl;
    Metrics eval;
};

// Train one model per loss-flag combination and evaluate each on the given
// set; rows follow the ablation table structure (flags, then MSE and Grad).
template <typename NetFactory>
std::vector<AblationRow> run_ablation(NetFactory&& make_net, const TrainConfig& base_cfg,
                                      const std::function<SampleSource(uint64_t)>& source_for_seed,
                                      const std::vector<EvalItem>& eval_set,
                                      const std::vector<std::array<bool, 3>>& combos,
                                      const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::vector<AblationRow> rows;
    int run = 0;
    for (const auto& combo : combos) {
        TrainConfig cfg = base_cfg;
        cfg.loss_rec = combo[0];
        cfg.loss_comp = combo[1];
        cfg.loss_gradl = combo[2];
        auto net = make_net(cfg.seed);
        std::string run_dir = (fs::path(out_dir) / ("ablation_" + std::to_string(run++))).string();
        train(*net, cfg, source_for_seed(cfg.seed), run_dir);
        auto report = evaluate(*net, eval_set);
        rows.push_back({combo[0], combo[1], combo[2], report.mean});
    }
    std::ofstream out(fs::path(out_dir) / "ablation.csv");
    out << "Rec,Comp,GradL,MSE,Grad\n" << std::setprecision(10);
    for (const auto& r : rows)
        out << (r.rec ? 1 : 0) << "," << (r.comp ? 1 : 0) << "," << (r.gradl ? 1 : 0) << ","
            << r.eval.mse << "," << r.eval.grad << "\n";
    return rows;
}

}  // namespace gcamat::train
