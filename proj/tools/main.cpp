#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hypergrid/config.hpp"
#include "hypergrid/evaluation.hpp"

namespace hg = hypergrid;

namespace {

// 0 success, 1 usage/config, 2 I/O, 3 infeasible split, 4 unpaired
// comparison, 5 verification failure.
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitSplit = 3;
constexpr int kExitCompare = 4;
constexpr int kExitVerify = 5;

std::size_t env_threads() {
    const char* v = std::getenv("HYPERGRID_THREADS");
    if (!v) return 1;
    const long n = std::strtol(v, nullptr, 10);
    return n > 1 ? static_cast<std::size_t>(n) : 1;
}

struct SynthArgs {
    std::string out;
    std::size_t width = 40, height = 40, bands = 32, classes = 4;
    double noise = 0.05;
    std::uint64_t seed = 7;
};

int cmd_synth(const SynthArgs& args) {
    if (args.bands == 0 || args.width == 0 || args.height == 0)
        throw hg::ConfigError("synth: width, height and bands must be positive");
    if (args.classes < 2) throw hg::ConfigError("synth: need at least 2 classes");
    hg::SeededRng rng(args.seed);
    const hg::SynthScene scene =
        hg::synth_scene(rng, args.width, args.height, args.bands, args.classes, args.noise);
    hg::save_cube(scene.cube, args.out + ".hgc");
    hg::save_labels(scene.labels, args.out + ".hgl");
    std::cout << "wrote " << args.out << ".hgc (+.raw), " << args.out << ".hgl: " << args.width
              << "x" << args.height << "x" << args.bands << ", " << args.classes << " classes\n";
    return 0;
}

struct SplitArgs {
    std::string cube, labels, out;
    std::size_t folds = 5, block = 8, radius = 3;
    std::uint64_t seed = 7;
};

int cmd_split(const SplitArgs& args) {
    const auto [cube, labels] = hg::load_scene(args.cube, args.labels);
    hg::SeededRng rng(args.seed);
    const hg::SplitSpec split =
        hg::generate_patch_splits(labels, args.folds, args.block, args.radius, rng);
    const hg::LeakageReport report = hg::verify_no_leakage(split, labels);
    std::size_t train_total = 0, test_total = 0;
    for (const auto& fold : split.folds) {
        train_total += fold.train.size();
        test_total += fold.test.size();
    }
    std::cout << "folds = " << split.folds.size() << ", train pixels = " << train_total
              << ", test pixels = " << test_total << "\n";
    std::cout << "leakage check: " << report.overlap_violations << " overlap violations, "
              << report.partition_violations << " partition violations\n";
    if (!report.ok()) {
        std::cerr << "split: refusing to write a leaking split\n";
        return kExitSplit;
    }
    hg::save_split(split, args.out);
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

struct AugmentArgs {
    std::string cube, labels, split;
    std::size_t fold = 0;
    bool stats = false;
};

int cmd_augment(const AugmentArgs& args) {
    if (!args.stats) throw hg::ConfigError("augment: only --stats mode is available");
    const auto [cube, labels] = hg::load_scene(args.cube, args.labels);
    const hg::SplitSpec split = hg::load_split(args.split);
    if (args.fold >= split.folds.size()) throw hg::ConfigError("augment: fold index out of range");

    const std::size_t classes = labels.num_classes();
    std::vector<std::size_t> counts(classes, 0);
    for (const hg::Coord& c : split.folds[args.fold].train)
        ++counts[static_cast<std::size_t>(labels.at(c.x, c.y) - 1)];
    const hg::AugmentationBudget budget = hg::compute_budget(counts);

    std::cout << "class,originals,synthetic,total\n";
    std::size_t n_sum = 0, s_sum = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::cout << (c + 1) << ',' << budget.originals[c] << ',' << budget.synthetic[c] << ','
                  << (budget.originals[c] + budget.synthetic[c]) << "\n";
        n_sum += budget.originals[c];
        s_sum += budget.synthetic[c];
    }
    std::cout << "all," << n_sum << ',' << s_sum << ',' << (n_sum + s_sum) << "\n";
    return 0;
}

hg::ExperimentSpec spec_from_config(hg::RunConfig& rc, const hg::HsiCube& cube,
                                    const hg::LabelMap& labels, std::size_t runs) {
    rc.net.bands = cube.bands;
    rc.net.num_classes = labels.num_classes();
    hg::validate(rc.net);
    hg::ExperimentSpec spec;
    spec.net = rc.net;
    spec.tc = rc.tc;
    spec.kind = rc.kind;
    spec.runs = runs;
    spec.base_seed = rc.base_seed;
    spec.thin_train_per_class = rc.thin_train_per_class;
    spec.threads = env_threads();
    return spec;
}

struct TrainArgs {
    std::string config, out_model, out_report;
    std::size_t fold = 0, run = 0;
};

int cmd_train(const TrainArgs& args) {
    hg::RunConfig rc = hg::load_run_config(args.config);
    if (rc.cube_path.empty() || rc.labels_path.empty() || rc.split_path.empty())
        throw hg::ConfigError("train: config must set cube, labels and split");
    const auto [cube, labels] = hg::load_scene(rc.cube_path, rc.labels_path);
    const hg::SplitSpec split = hg::load_split(rc.split_path);
    if (args.fold >= split.folds.size()) throw hg::ConfigError("train: fold index out of range");

    const hg::ExperimentSpec spec = spec_from_config(rc, cube, labels, 1);
    hg::ModelParams trained;
    const hg::MetricsReport report =
        hg::run_single(cube, labels, split, args.fold, args.run, spec, &trained);

    if (!args.out_model.empty()) hg::save_checkpoint(args.out_model, spec.net, trained);
    if (!args.out_report.empty()) {
        std::ofstream out(args.out_report);
        if (!out) throw hg::IoError("train: cannot write " + args.out_report);
        hg::write_reports_csv(out, rc.method_name + "-" + hg::to_string(rc.kind), rc.dataset_name,
                              spec.net.num_classes, {report});
    }
    std::cout.precision(6);
    std::cout << "fold " << args.fold << " run " << args.run << ": oa = " << report.m.oa
              << ", aa = " << report.m.aa << ", kappa = " << report.m.kappa << ", epochs = "
              << report.epochs << ", train_s = " << report.train_time_s << "\n";
    return 0;
}

struct ExperimentArgs {
    std::string config, out_csv, out_summary;
    std::size_t runs = 5;
};

int cmd_experiment(const ExperimentArgs& args) {
    hg::RunConfig rc = hg::load_run_config(args.config);
    if (rc.cube_path.empty() || rc.labels_path.empty() || rc.split_path.empty())
        throw hg::ConfigError("experiment: config must set cube, labels and split");
    if (args.runs == 0) throw hg::ConfigError("experiment: runs must be >= 1");
    const auto [cube, labels] = hg::load_scene(rc.cube_path, rc.labels_path);
    const hg::SplitSpec split = hg::load_split(rc.split_path);

    const hg::ExperimentSpec spec = spec_from_config(rc, cube, labels, args.runs);
    const hg::ExperimentResult result = hg::run_experiment(cube, labels, split, spec);

    const std::string method = rc.method_name + "-" + hg::to_string(rc.kind);
    if (!args.out_csv.empty()) {
        std::ofstream out(args.out_csv);
        if (!out) throw hg::IoError("experiment: cannot write " + args.out_csv);
        hg::write_reports_csv(out, method, rc.dataset_name, spec.net.num_classes, result.reports);
    }

    const hg::ExperimentSummary s = result.summary();
    std::ostringstream summary;
    summary.precision(6);
    summary << "method = " << method << "\n"
            << "dataset = " << rc.dataset_name << "\n"
            << "folds = " << split.folds.size() << "\n"
            << "runs = " << args.runs << "\n"
            << "reports = " << result.reports.size() << "\n"
            << "oa = " << s.oa_mean << " +/- " << s.oa_std << "\n"
            << "aa = " << s.aa_mean << " +/- " << s.aa_std << "\n"
            << "kappa = " << s.kappa_mean << " +/- " << s.kappa_std << "\n"
            << "train_time_s = " << s.train_time_mean << "\n"
            << "infer_ms_per_sample = " << s.infer_ms_mean << "\n";
    std::cout << summary.str();
    if (!args.out_summary.empty()) {
        std::ofstream out(args.out_summary);
        if (!out) throw hg::IoError("experiment: cannot write " + args.out_summary);
        out << summary.str();
    }
    return 0;
}

struct CompareArgs {
    std::vector<std::string> results;
    std::string by = "kappa";
    std::string out;
};

int cmd_compare(const CompareArgs& args) {
    if (args.by != "kappa") throw hg::ConfigError("compare: only --by kappa is supported");
    if (args.results.size() < 2) throw hg::ConfigError("compare: need at least 2 result files");

    std::vector<hg::ResultsTable> tables;
    for (const std::string& path : args.results) tables.push_back(hg::load_results_csv(path));

    // All files must agree on the (dataset, class) cells they report.
    const auto& ref = tables.front();
    for (std::size_t i = 1; i < tables.size(); ++i) {
        if (tables[i].datasets != ref.datasets) {
            std::ostringstream msg;
            msg << "compare: dataset sets differ between " << args.results[0] << " and "
                << args.results[i];
            throw hg::CompareError(msg.str());
        }
        if (tables[i].class_cells.size() != ref.class_cells.size() ||
            !std::equal(ref.class_cells.begin(), ref.class_cells.end(),
                        tables[i].class_cells.begin(),
                        [](const auto& a, const auto& b) { return a.first == b.first; })) {
            std::ostringstream msg;
            msg << "compare: unpaired (dataset, class) cells between " << args.results[0]
                << " and " << args.results[i] << ":";
            for (const auto& [key, v] : ref.class_cells)
                if (!tables[i].class_cells.count(key))
                    msg << " " << key.first << "/c" << key.second << " missing in file " << i;
            for (const auto& [key, v] : tables[i].class_cells)
                if (!ref.class_cells.count(key))
                    msg << " " << key.first << "/c" << key.second << " extra in file " << i;
            throw hg::CompareError(msg.str());
        }
    }

    std::ostringstream report;
    report.precision(6);

    std::vector<std::string> datasets(ref.datasets.begin(), ref.datasets.end());
    std::vector<std::vector<double>> kappa_table;
    for (const auto& t : tables) {
        std::vector<double> row;
        for (const std::string& d : datasets) row.push_back(t.mean_kappa.at(d));
        kappa_table.push_back(row);
    }
    const std::vector<double> ar = hg::average_rank(kappa_table);
    report << "average rank by kappa over " << datasets.size() << " dataset(s)\n";
    report << "method,ar\n";
    for (std::size_t i = 0; i < tables.size(); ++i)
        report << tables[i].method << ',' << ar[i] << "\n";

    report << "\npairwise two-tailed wilcoxon on paired per-class accuracies (* = p < 0.05)\n";
    report << "method_a,method_b,n,statistic,p_value,significant\n";
    for (std::size_t i = 0; i < tables.size(); ++i) {
        for (std::size_t j = i + 1; j < tables.size(); ++j) {
            std::vector<double> a, b;
            for (const auto& [key, value] : tables[i].class_cells) {
                a.push_back(value);
                b.push_back(tables[j].class_cells.at(key));
            }
            const hg::WilcoxonResult w = hg::wilcoxon_two_tailed(a, b);
            report << tables[i].method << ',' << tables[j].method << ',' << w.n_effective << ','
                   << w.statistic << ',' << w.p_value << ',' << (w.p_value < 0.05 ? "*" : "")
                   << "\n";
        }
    }

    std::cout << report.str();
    if (!args.out.empty()) {
        std::ofstream out(args.out);
        if (!out) throw hg::IoError("compare: cannot write " + args.out);
        out << report.str();
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const hg::NetworkConfig cfg = hg::tiny_verification_config();
    const hg::GradCheckResult result = hg::gradient_check(cfg, seed, 1e-5);
    std::cout.precision(6);
    std::cout << "max relative error = " << result.max_rel_error << " at " << result.block << "["
              << result.index << "] (analytic " << result.analytic << ", numeric "
              << result.numeric << ")\n";
    if (result.max_rel_error < 1e-4) {
        std::cout << "gradcheck: pass\n";
        return 0;
    }
    std::cout << "gradcheck: FAIL (threshold 1e-4)\n";
    return kExitVerify;
}

struct BenchmarkArgs {
    std::string model, cube, labels;
    std::size_t repeat = 1;
};

int cmd_benchmark(const BenchmarkArgs& args) {
    if (args.repeat == 0) throw hg::ConfigError("benchmark: repeat must be >= 1");
    const auto [cfg, params] = hg::load_checkpoint(args.model);
    const auto [cube, labels] = hg::load_scene(args.cube, args.labels);
    if (cfg.bands != cube.bands)
        throw hg::ConfigError("benchmark: model expects " + std::to_string(cfg.bands) +
                              " bands, cube has " + std::to_string(cube.bands));

    // Latency over a full pass of all labeled pixels, repeated.
    const std::vector<hg::Coord> coords = labels.labeled_coords();
    if (coords.empty()) throw hg::ConfigError("benchmark: scene has no labeled pixels");
    const hg::NormalizationStats stats = hg::fit_normalization(cube, coords);
    const hg::HsiCube normalized = hg::apply_normalization(cube, stats);
    const hg::PaddedCube padded = hg::mirror_pad(normalized, (cfg.patch_width - 1) / 2);

    std::vector<double> per_sample_ms;
    per_sample_ms.reserve(coords.size() * args.repeat);
    for (std::size_t pass = 0; pass < args.repeat; ++pass) {
        for (const hg::Coord& c : coords) {
            const hg::Tensor patch = hg::extract_patch(padded, c.x, c.y, cfg.patch_width);
            const auto t0 = std::chrono::steady_clock::now();
            volatile float sink = hg::forward(params, cfg, patch)[0];
            (void)sink;
            per_sample_ms.push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count());
        }
    }
    std::sort(per_sample_ms.begin(), per_sample_ms.end());
    double mean = 0;
    for (double v : per_sample_ms) mean += v;
    mean /= static_cast<double>(per_sample_ms.size());
    const double p95 = per_sample_ms[std::min(per_sample_ms.size() - 1,
                                              static_cast<std::size_t>(0.95 * static_cast<double>(
                                                                                  per_sample_ms.size())))];
    std::cout << "passes,samples_per_pass,mean_ms,p95_ms\n";
    std::cout.precision(6);
    std::cout << args.repeat << ',' << coords.size() << ',' << mean << ',' << p95 << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypergrid: spectral-spatial 3D CNN toolkit for hyperspectral image classification"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled scene");
    synth_cmd->add_option("--out", synth.out, "Output base path (writes .hgc, .hgc.raw, .hgl)")
        ->required();
    synth_cmd->add_option("--width", synth.width, "Scene width");
    synth_cmd->add_option("--height", synth.height, "Scene height");
    synth_cmd->add_option("--bands", synth.bands, "Spectral bands");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes");
    synth_cmd->add_option("--noise", synth.noise, "Gaussian noise sigma");
    synth_cmd->add_option("--seed", synth.seed, "Seed");

    SplitArgs split;
    auto* split_cmd = app.add_subcommand("split", "Generate leakage-free patch-based CV folds");
    split_cmd->add_option("--cube", split.cube, "HGCUBE1 header path")->required();
    split_cmd->add_option("--labels", split.labels, "HGLAB1 path")->required();
    split_cmd->add_option("--out", split.out, "Output split path")->required();
    split_cmd->add_option("--folds", split.folds, "Number of folds (>= 2)");
    split_cmd->add_option("--block", split.block, "Block tile size");
    split_cmd->add_option("--radius", split.radius, "Patch radius the guarantee covers");
    split_cmd->add_option("--seed", split.seed, "Seed");

    AugmentArgs augment;
    auto* augment_cmd = app.add_subcommand("augment", "Inspect the augmentation budget");
    augment_cmd->add_option("--cube", augment.cube, "HGCUBE1 header path")->required();
    augment_cmd->add_option("--labels", augment.labels, "HGLAB1 path")->required();
    augment_cmd->add_option("--split", augment.split, "Split path")->required();
    augment_cmd->add_option("--fold", augment.fold, "Fold index");
    augment_cmd->add_flag("--stats", augment.stats, "Emit the per-class budget table as CSV");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train one (fold, run) cell");
    train_cmd->add_option("--config", train.config, "Run configuration file")->required();
    train_cmd->add_option("--fold", train.fold, "Fold index");
    train_cmd->add_option("--run", train.run, "Run index");
    train_cmd->add_option("--out-model", train.out_model, "Checkpoint output path");
    train_cmd->add_option("--out-report", train.out_report, "Metrics CSV output path");

    ExperimentArgs experiment;
    auto* exp_cmd = app.add_subcommand("experiment", "Run all folds x runs and aggregate");
    exp_cmd->add_option("--config", experiment.config, "Run configuration file")->required();
    exp_cmd->add_option("--runs", experiment.runs, "Runs per fold");
    exp_cmd->add_option("--out-csv", experiment.out_csv, "Per-cell metrics CSV path");
    exp_cmd->add_option("--out-summary", experiment.out_summary, "Summary text path");

    CompareArgs compare;
    auto* compare_cmd = app.add_subcommand("compare", "Rank methods and run Wilcoxon tests");
    compare_cmd->add_option("--results", compare.results, "Two or more result CSV files")
        ->required()
        ->expected(-2);
    compare_cmd->add_option("--by", compare.by, "Ranking metric (kappa)");
    compare_cmd->add_option("--out", compare.out, "Report output path");

    std::uint64_t gradcheck_seed = 20240501;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Verify analytic gradients by finite differences");
    grad_cmd->add_option("--seed", gradcheck_seed, "Seed for the random model and patch");

    BenchmarkArgs benchmark;
    auto* bench_cmd = app.add_subcommand("benchmark", "Measure per-sample inference latency");
    bench_cmd->add_option("--model", benchmark.model, "Checkpoint path")->required();
    bench_cmd->add_option("--cube", benchmark.cube, "HGCUBE1 header path")->required();
    bench_cmd->add_option("--labels", benchmark.labels, "HGLAB1 path")->required();
    bench_cmd->add_option("--repeat", benchmark.repeat, "Full passes over the labeled pixels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (split_cmd->parsed()) return cmd_split(split);
        if (augment_cmd->parsed()) return cmd_augment(augment);
        if (train_cmd->parsed()) return cmd_train(train);
        if (exp_cmd->parsed()) return cmd_experiment(experiment);
        if (compare_cmd->parsed()) return cmd_compare(compare);
        if (grad_cmd->parsed()) return cmd_gradcheck(gradcheck_seed);
        if (bench_cmd->parsed()) return cmd_benchmark(benchmark);
    } catch (const hg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hg::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const hg::SplitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSplit;
    } catch (const hg::CompareError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCompare;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
