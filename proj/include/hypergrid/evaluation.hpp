#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hypergrid/augmentation.hpp"
#include "hypergrid/dataset.hpp"
#include "hypergrid/network.hpp"

namespace hypergrid {

struct TrainConfig {
    std::size_t max_epochs = 200;
    std::size_t patience = 15;  // consecutive epochs without improvement
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double min_delta = 1e-6;  // improvement below this does not reset patience
    std::uint64_t seed = 42;
};

void validate(const TrainConfig& tc);

// Tracks the best mean epoch loss; stop once `patience` consecutive epochs
// fail to improve it by more than min_delta.
class EarlyStopMonitor {
public:
    EarlyStopMonitor(std::size_t patience, double min_delta)
        : patience_(patience), min_delta_(min_delta) {}

    bool observe(double loss) {
        if (loss < best_ - min_delta_) {
            best_ = loss;
            stale_ = 0;
        } else {
            ++stale_;
        }
        return stale_ >= patience_;
    }

    double best() const { return best_; }

private:
    std::size_t patience_;
    double min_delta_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t stale_ = 0;
};

// Epoch index (1-based) after which the rule above stops on a given loss
// trace, or trace.size() if it never triggers.
std::size_t early_stop_epoch(std::span<const double> trace, std::size_t patience, double min_delta);

struct TrainResult {
    ModelParams params;
    std::size_t epochs = 0;
    std::vector<double> loss_trace;  // mean per-sample cross-entropy per epoch
    double train_time_s = 0.0;
};

// Shuffled mini-batch Adam training with early stopping; returns the
// final-epoch parameters. Deterministic given the seed (single-threaded).
TrainResult train(const NetworkConfig& cfg, ModelParams params, const std::vector<Sample>& samples,
                  const TrainConfig& tc);

struct PredictResult {
    std::vector<int> labels;  // class ids 1..num_classes
    double ms_per_sample = 0.0;
};

// Argmax of raw scores, ties to the lowest class id.
PredictResult predict(const ModelParams& params, const NetworkConfig& cfg,
                      const std::vector<Sample>& samples);

int argmax_label(std::span<const float> scores);

struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;  // row = true class - 1, col = predicted - 1

    std::uint64_t& at(std::size_t row, std::size_t col) { return counts[row * classes + col]; }
    std::uint64_t at(std::size_t row, std::size_t col) const { return counts[row * classes + col]; }
    std::uint64_t total() const;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t classes);

struct Metrics {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    double p_o = 0.0;
    double p_e = 0.0;
    std::vector<double> per_class;  // NaN for classes absent from the test set
};

// OA = trace/total, per-class = diagonal/rowsum, AA = mean over classes
// present in the test set, kappa = 1 - (1-p_o)/(1-p_e).
Metrics metrics(const ConfusionMatrix& cm);

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-)
    double p_value = 1.0;
    std::size_t n_effective = 0;
};

// Two-tailed signed-rank test on paired differences. Zero differences are
// dropped, tied |d| get average ranks. Exact p for n <= 25 (full sign-flip
// distribution with the observed tie structure); tie-corrected normal
// approximation with continuity correction above that.
WilcoxonResult wilcoxon_two_tailed(std::span<const double> a, std::span<const double> b,
                                   WilcoxonMethod method = WilcoxonMethod::Auto);

// Within each dataset (column), rank methods by value descending (1 = best,
// ties averaged), then average ranks across datasets.
std::vector<double> average_rank(const std::vector<std::vector<double>>& value_by_method_dataset);

struct MetricsReport {
    std::size_t fold = 0;
    std::size_t run = 0;
    std::size_t epochs = 0;
    double train_time_s = 0.0;
    double infer_ms_per_sample = 0.0;
    Metrics m;
};

struct ExperimentSpec {
    NetworkConfig net;
    TrainConfig tc;
    AugmentationKind kind = AugmentationKind::None;
    std::size_t runs = 5;
    std::uint64_t base_seed = 42;
    std::size_t thin_train_per_class = 0;  // 0 = keep all
    std::size_t threads = 1;               // parallelism across runs of a fold
};

struct ExperimentSummary {
    double oa_mean = 0.0, oa_std = 0.0;
    double aa_mean = 0.0, aa_std = 0.0;
    double kappa_mean = 0.0, kappa_std = 0.0;
    double train_time_mean = 0.0;
    double infer_ms_mean = 0.0;
};

struct ExperimentResult {
    std::vector<MetricsReport> reports;  // folds x runs
    ExperimentSummary summary() const;
};

// Per (fold, run): fit normalization on that fold's training pixels, build
// patches, budget + augment, train from a seed mixed from (base, fold, run),
// and score the fold's test pixels.
ExperimentResult run_experiment(const HsiCube& cube, const LabelMap& labels, const SplitSpec& split,
                                const ExperimentSpec& spec);

// One cell of the experiment grid; cmd-train and run_experiment share this so
// a (fold, run) cell reproduces identically either way.
MetricsReport run_single(const HsiCube& cube, const LabelMap& labels, const SplitSpec& split,
                         std::size_t fold, std::size_t run, const ExperimentSpec& spec,
                         ModelParams* trained_out = nullptr);

// Results CSV: one row per (fold, run) with every MetricsReport field and
// acc_c1..acc_cK per-class columns (empty cell for classes absent from the
// fold's test set).
void write_reports_csv(std::ostream& out, const std::string& method, const std::string& dataset,
                       std::size_t classes, const std::vector<MetricsReport>& reports);

// Parsed results file, reduced to what cmd-compare pairs on.
struct ResultsTable {
    std::string method;
    std::set<std::string> datasets;
    std::map<std::pair<std::string, int>, double> class_cells;  // (dataset, class) -> mean accuracy
    std::map<std::string, double> mean_kappa;                   // dataset -> mean kappa
};

ResultsTable load_results_csv(const std::string& path);

}  // namespace hypergrid
