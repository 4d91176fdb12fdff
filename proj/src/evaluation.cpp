#include "hypergrid/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace hypergrid {

void validate(const TrainConfig& tc) {
    if (tc.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (tc.patience > tc.max_epochs) throw ConfigError("train: patience must be <= max_epochs");
    if (tc.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (tc.min_delta < 0) throw ConfigError("train: min_delta must be >= 0");
    if (tc.learning_rate < 0) throw ConfigError("train: learning_rate must be >= 0");
}

std::size_t early_stop_epoch(std::span<const double> trace, std::size_t patience, double min_delta) {
    EarlyStopMonitor monitor(patience, min_delta);
    for (std::size_t e = 0; e < trace.size(); ++e)
        if (monitor.observe(trace[e])) return e + 1;
    return trace.size();
}

TrainResult train(const NetworkConfig& cfg, ModelParams params, const std::vector<Sample>& samples,
                  const TrainConfig& tc) {
    validate(cfg);
    validate(tc);
    if (samples.empty()) throw std::invalid_argument("train: empty training set");

    const auto t0 = std::chrono::steady_clock::now();

    AdamState adam = AdamState::moments_for(params);
    adam.learning_rate = tc.learning_rate;
    adam.beta1 = tc.beta1;
    adam.beta2 = tc.beta2;
    adam.epsilon = tc.epsilon;

    SeededRng order_rng = SeededRng(tc.seed).fork(0);
    EarlyStopMonitor monitor(tc.patience, tc.min_delta);

    TrainResult result;
    const std::size_t n = samples.size();
    for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
        const std::vector<std::size_t> perm = order_rng.shuffle(n);
        double epoch_loss = 0.0;
        std::size_t cursor = 0;
        while (cursor < n) {
            const std::size_t batch = std::min(tc.batch_size, n - cursor);
            ModelParams grads = zeros_like(params);
            for (std::size_t i = 0; i < batch; ++i) {
                const Sample& s = samples[perm[cursor + i]];
                auto lg = loss_and_grads(params, cfg, s.patch,
                                         static_cast<std::size_t>(s.label - 1));
                epoch_loss += static_cast<double>(lg.loss);
                accumulate(grads, lg.grads);
            }
            scale(grads, 1.0f / static_cast<float>(batch));
            adam_step(params, grads, adam);
            cursor += batch;
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(n));
        if (monitor.observe(result.loss_trace.back())) break;
    }

    result.epochs = result.loss_trace.size();
    result.params = std::move(params);
    result.train_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

int argmax_label(std::span<const float> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<int>(best) + 1;
}

PredictResult predict(const ModelParams& params, const NetworkConfig& cfg,
                      const std::vector<Sample>& samples) {
    PredictResult out;
    out.labels.reserve(samples.size());
    double total_s = 0.0;
    for (const Sample& s : samples) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<float> scores = forward(params, cfg, s.patch);
        total_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.labels.push_back(argmax_label(scores));
    }
    if (!samples.empty()) out.ms_per_sample = total_s * 1000.0 / static_cast<double>(samples.size());
    return out;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t classes) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("confusion: label vectors differ in length");
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts.assign(classes * classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 1 || static_cast<std::size_t>(t) > classes || p < 1 ||
            static_cast<std::size_t>(p) > classes)
            throw std::invalid_argument("confusion: label outside 1.." + std::to_string(classes));
        ++cm.at(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(p - 1));
    }
    return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
    const double total = static_cast<double>(cm.total());
    if (cm.classes == 0 || total == 0) throw std::invalid_argument("metrics: empty confusion matrix");

    Metrics m;
    m.per_class.assign(cm.classes, std::numeric_limits<double>::quiet_NaN());
    double diag = 0.0, pe = 0.0, aa_sum = 0.0;
    std::size_t aa_n = 0;
    for (std::size_t i = 0; i < cm.classes; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < cm.classes; ++j) {
            row += static_cast<double>(cm.at(i, j));
            col += static_cast<double>(cm.at(j, i));
        }
        diag += static_cast<double>(cm.at(i, i));
        pe += row * col;
        if (row > 0) {
            m.per_class[i] = static_cast<double>(cm.at(i, i)) / row;
            aa_sum += m.per_class[i];
            ++aa_n;
        }
    }
    m.oa = diag / total;
    m.p_o = m.oa;
    m.p_e = pe / (total * total);
    m.aa = aa_n > 0 ? aa_sum / static_cast<double>(aa_n) : 0.0;
    if (m.p_e >= 1.0) {
        m.kappa = m.p_o >= 1.0 ? 1.0 : 0.0;
    } else {
        m.kappa = 1.0 - (1.0 - m.p_o) / (1.0 - m.p_e);
    }
    return m;
}

namespace {

struct RankedDiffs {
    std::vector<double> ranks;  // average ranks of |d|, aligned with signs
    std::vector<int> signs;
    double w_plus = 0.0, w_minus = 0.0;
    std::vector<std::size_t> tie_sizes;
};

RankedDiffs rank_differences(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: unpaired samples");
    if (a.empty()) throw std::invalid_argument("wilcoxon: need at least one pair");

    std::vector<double> abs_d;
    std::vector<int> signs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;  // zero differences carry no evidence
        abs_d.push_back(std::abs(d));
        signs.push_back(d > 0 ? 1 : -1);
    }

    RankedDiffs out;
    out.signs = signs;
    const std::size_t n = abs_d.size();
    out.ranks.assign(n, 0.0);
    if (n == 0) return out;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&abs_d](std::size_t i, std::size_t j) { return abs_d[i] < abs_d[j]; });

    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = avg;
        out.tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        (out.signs[k] > 0 ? out.w_plus : out.w_minus) += out.ranks[k];
    return out;
}

// Exact two-tailed p: distribution of W+ over all 2^n sign assignments with
// the observed tie structure. Average ranks are half-integers, so doubling
// them makes every achievable sum an integer and the distribution a simple
// integer-indexed count table.
double exact_two_tailed_p(const RankedDiffs& rd) {
    const std::size_t n = rd.ranks.size();
    std::vector<std::size_t> ranks2(n);
    std::size_t total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ranks2[i] = static_cast<std::size_t>(std::llround(rd.ranks[i] * 2.0));
        total2 += ranks2[i];
    }
    std::vector<std::uint64_t> count(total2 + 1, 0);
    count[0] = 1;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
        reach += ranks2[i];
        for (std::size_t s = reach; s >= ranks2[i]; --s) count[s] += count[s - ranks2[i]];
    }
    // Symmetric null: two-tailed mass is everything at least as far from the
    // center (total/2) as the observed W+.
    const std::size_t w2 = static_cast<std::size_t>(std::llround(rd.w_plus * 2.0));
    const double center = static_cast<double>(total2) / 2.0;
    const double dev = std::abs(static_cast<double>(w2) - center);
    std::uint64_t hits = 0;
    for (std::size_t s = 0; s <= total2; ++s)
        if (std::abs(static_cast<double>(s) - center) >= dev - 1e-9) hits += count[s];
    return static_cast<double>(hits) / std::ldexp(1.0, static_cast<int>(n));
}

double normal_two_tailed_p(const RankedDiffs& rd) {
    const double n = static_cast<double>(rd.ranks.size());
    const double mu = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (std::size_t t : rd.tie_sizes) {
        const double td = static_cast<double>(t);
        var -= (td * td * td - td) / 48.0;
    }
    if (var <= 0) return 1.0;
    const double dev = std::max(0.0, std::abs(rd.w_plus - mu) - 0.5);  // continuity correction
    const double z = dev / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

WilcoxonResult wilcoxon_two_tailed(std::span<const double> a, std::span<const double> b,
                                   WilcoxonMethod method) {
    const RankedDiffs rd = rank_differences(a, b);
    WilcoxonResult out;
    out.n_effective = rd.ranks.size();
    out.statistic = std::min(rd.w_plus, rd.w_minus);
    if (out.n_effective == 0) {
        out.p_value = 1.0;  // all differences zero
        return out;
    }
    const bool exact = method == WilcoxonMethod::Exact ||
                       (method == WilcoxonMethod::Auto && out.n_effective <= 25);
    out.p_value = exact ? exact_two_tailed_p(rd) : normal_two_tailed_p(rd);
    return out;
}

std::vector<double> average_rank(const std::vector<std::vector<double>>& table) {
    if (table.empty()) throw std::invalid_argument("average_rank: empty table");
    const std::size_t methods = table.size();
    const std::size_t datasets = table.front().size();
    if (datasets == 0) throw std::invalid_argument("average_rank: no datasets");
    for (const auto& row : table)
        if (row.size() != datasets) throw std::invalid_argument("average_rank: ragged table");

    std::vector<double> ar(methods, 0.0);
    for (std::size_t d = 0; d < datasets; ++d) {
        for (std::size_t m = 0; m < methods; ++m) {
            // rank = 1 + number of strictly better methods, averaged over ties
            std::size_t better = 0, equal = 0;
            for (std::size_t o = 0; o < methods; ++o) {
                if (table[o][d] > table[m][d]) ++better;
                else if (o != m && table[o][d] == table[m][d]) ++equal;
            }
            ar[m] += static_cast<double>(better) + 1.0 + static_cast<double>(equal) / 2.0;
        }
    }
    for (double& v : ar) v /= static_cast<double>(datasets);
    return ar;
}

namespace {

std::size_t padding_radius_for(const NetworkConfig& net, AugmentationKind kind) {
    const std::size_t patch_half = (std::max(net.patch_width, net.patch_height) - 1) / 2;
    if (kind == AugmentationKind::Rotate || kind == AugmentationKind::Mixed) {
        const std::size_t src = rotation_source_extent(std::max(net.patch_width, net.patch_height));
        return (src - 1) / 2;
    }
    return patch_half;
}

std::vector<Sample> build_samples(const PaddedCube& padded, const LabelMap& labels,
                                  const std::vector<Coord>& coords, std::size_t patch_size) {
    std::vector<Sample> out;
    out.reserve(coords.size());
    for (const Coord& c : coords) {
        Sample s;
        s.patch = extract_patch(padded, c.x, c.y, patch_size);
        s.label = labels.at(c.x, c.y);
        s.origin = c;
        s.synthetic = false;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Coord> thin_per_class(const std::vector<Coord>& coords, const LabelMap& labels,
                                  std::size_t keep, SeededRng rng) {
    if (keep == 0) return coords;
    std::vector<Coord> shuffled = coords;
    rng.shuffle_in_place(shuffled);
    std::map<int, std::size_t> taken;
    std::vector<Coord> out;
    for (const Coord& c : shuffled) {
        const int label = labels.at(c.x, c.y);
        if (taken[label] < keep) {
            ++taken[label];
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

MetricsReport run_single(const HsiCube& cube, const LabelMap& labels, const SplitSpec& split,
                         std::size_t fold, std::size_t run, const ExperimentSpec& spec,
                         ModelParams* trained_out) {
    if (fold >= split.folds.size()) throw ConfigError("experiment: fold index out of range");
    if (labels.width != cube.width || labels.height != cube.height)
        throw std::invalid_argument("experiment: cube/label extent mismatch");

    const std::uint64_t cell_seed = mix_seed(mix_seed(spec.base_seed, fold), run);

    std::vector<Coord> train_coords = split.folds[fold].train;
    if (spec.thin_train_per_class > 0)
        train_coords = thin_per_class(train_coords, labels, spec.thin_train_per_class,
                                      SeededRng(cell_seed).fork(4));
    if (train_coords.empty()) throw std::invalid_argument("experiment: fold has no training pixels");

    const NormalizationStats stats = fit_normalization(cube, train_coords);
    const HsiCube normalized = apply_normalization(cube, stats);
    const PaddedCube padded = mirror_pad(normalized, padding_radius_for(spec.net, spec.kind));

    std::vector<Sample> train_samples =
        build_samples(padded, labels, train_coords, spec.net.patch_width);
    const std::vector<Sample> test_samples =
        build_samples(padded, labels, split.folds[fold].test, spec.net.patch_width);

    std::vector<std::size_t> class_counts(spec.net.num_classes, 0);
    for (const Sample& s : train_samples) ++class_counts[static_cast<std::size_t>(s.label - 1)];
    const AugmentationBudget budget = compute_budget(class_counts);
    SeededRng aug_rng = SeededRng(cell_seed).fork(2);
    train_samples = augment_training_set(padded, train_samples, spec.kind, budget, aug_rng);

    SeededRng init_rng = SeededRng(cell_seed).fork(1);
    ModelParams params = init_params<float>(spec.net, init_rng);

    TrainConfig tc = spec.tc;
    tc.seed = SeededRng(cell_seed).fork(3).seed();
    TrainResult trained = train(spec.net, std::move(params), train_samples, tc);

    const PredictResult pred = predict(trained.params, spec.net, test_samples);
    std::vector<int> truth;
    truth.reserve(test_samples.size());
    for (const Sample& s : test_samples) truth.push_back(s.label);

    MetricsReport report;
    report.fold = fold;
    report.run = run;
    report.epochs = trained.epochs;
    report.train_time_s = trained.train_time_s;
    report.infer_ms_per_sample = pred.ms_per_sample;
    report.m = metrics(confusion(truth, pred.labels, spec.net.num_classes));
    if (trained_out) *trained_out = std::move(trained.params);
    return report;
}

ExperimentResult run_experiment(const HsiCube& cube, const LabelMap& labels, const SplitSpec& split,
                                const ExperimentSpec& spec) {
    ExperimentResult result;
    result.reports.resize(split.folds.size() * spec.runs);
    for (std::size_t fold = 0; fold < split.folds.size(); ++fold) {
        if (spec.threads <= 1) {
            for (std::size_t run = 0; run < spec.runs; ++run)
                result.reports[fold * spec.runs + run] = run_single(cube, labels, split, fold, run, spec);
        } else {
            // Runs are independent cells with their own seed streams; reports
            // land in fixed slots so the merge is order-independent.
            std::vector<std::thread> workers;
            std::atomic<std::size_t> next{0};
            const std::size_t n_workers = std::min(spec.threads, spec.runs);
            for (std::size_t w = 0; w < n_workers; ++w) {
                workers.emplace_back([&, fold]() {
                    for (;;) {
                        const std::size_t run = next.fetch_add(1);
                        if (run >= spec.runs) return;
                        result.reports[fold * spec.runs + run] =
                            run_single(cube, labels, split, fold, run, spec);
                    }
                });
            }
            for (auto& w : workers) w.join();
        }
    }
    return result;
}

ExperimentSummary ExperimentResult::summary() const {
    ExperimentSummary s;
    const double n = static_cast<double>(reports.size());
    if (reports.empty()) return s;
    for (const MetricsReport& r : reports) {
        s.oa_mean += r.m.oa;
        s.aa_mean += r.m.aa;
        s.kappa_mean += r.m.kappa;
        s.train_time_mean += r.train_time_s;
        s.infer_ms_mean += r.infer_ms_per_sample;
    }
    s.oa_mean /= n;
    s.aa_mean /= n;
    s.kappa_mean /= n;
    s.train_time_mean /= n;
    s.infer_ms_mean /= n;
    if (reports.size() > 1) {
        double oa = 0, aa = 0, k = 0;
        for (const MetricsReport& r : reports) {
            oa += (r.m.oa - s.oa_mean) * (r.m.oa - s.oa_mean);
            aa += (r.m.aa - s.aa_mean) * (r.m.aa - s.aa_mean);
            k += (r.m.kappa - s.kappa_mean) * (r.m.kappa - s.kappa_mean);
        }
        s.oa_std = std::sqrt(oa / (n - 1.0));
        s.aa_std = std::sqrt(aa / (n - 1.0));
        s.kappa_std = std::sqrt(k / (n - 1.0));
    }
    return s;
}

void write_reports_csv(std::ostream& out, const std::string& method, const std::string& dataset,
                       std::size_t classes, const std::vector<MetricsReport>& reports) {
    out << "method,dataset,fold,run,epochs,train_time_s,infer_ms_per_sample,oa,aa,kappa,p_o,p_e";
    for (std::size_t c = 1; c <= classes; ++c) out << ",acc_c" << c;
    out << "\n";
    out.precision(12);
    for (const MetricsReport& r : reports) {
        out << method << ',' << dataset << ',' << r.fold << ',' << r.run << ',' << r.epochs << ','
            << r.train_time_s << ',' << r.infer_ms_per_sample << ',' << r.m.oa << ',' << r.m.aa
            << ',' << r.m.kappa << ',' << r.m.p_o << ',' << r.m.p_e;
        for (std::size_t c = 0; c < classes; ++c) {
            out << ',';
            if (!std::isnan(r.m.per_class[c])) out << r.m.per_class[c];
        }
        out << "\n";
    }
}

ResultsTable load_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("results: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("results: empty file " + path);

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) header.push_back(col);
    }
    const std::vector<std::string> fixed = {"method", "dataset", "fold",  "run", "epochs",
                                            "train_time_s", "infer_ms_per_sample", "oa", "aa",
                                            "kappa", "p_o", "p_e"};
    if (header.size() < fixed.size())
        throw IoError("results: malformed header in " + path);
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (header[i] != fixed[i])
            throw IoError("results: unexpected column '" + header[i] + "' in " + path);
    const std::size_t classes = header.size() - fixed.size();

    ResultsTable table;
    // accumulate sums, then divide
    std::map<std::pair<std::string, int>, std::pair<double, std::size_t>> acc_cells;
    std::map<std::string, std::pair<double, std::size_t>> acc_kappa;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        while (cols.size() < header.size()) cols.push_back("");  // trailing empty cells
        if (cols.size() != header.size()) throw IoError("results: ragged row in " + path);
        if (table.method.empty()) table.method = cols[0];
        else if (table.method != cols[0])
            throw IoError("results: multiple methods in one file " + path);
        const std::string& dataset = cols[1];
        table.datasets.insert(dataset);
        auto& k = acc_kappa[dataset];
        k.first += std::stod(cols[9]);
        ++k.second;
        for (std::size_t c = 0; c < classes; ++c) {
            const std::string& cell = cols[fixed.size() + c];
            if (cell.empty()) continue;
            auto& a = acc_cells[{dataset, static_cast<int>(c + 1)}];
            a.first += std::stod(cell);
            ++a.second;
        }
    }
    if (table.method.empty()) throw IoError("results: no data rows in " + path);
    for (const auto& [key, sum] : acc_cells)
        table.class_cells[key] = sum.first / static_cast<double>(sum.second);
    for (const auto& [key, sum] : acc_kappa)
        table.mean_kappa[key] = sum.first / static_cast<double>(sum.second);
    return table;
}

}  // namespace hypergrid
