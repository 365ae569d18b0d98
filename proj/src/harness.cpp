#include "ecf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ecf/error.hpp"
#include "ecf/ops.hpp"

namespace ecf {

ModelConfig RunConfig::model_config(std::size_t sensors) const {
    ModelConfig m;
    m.sensors = sensors;
    m.periodic = periodic;
    m.layer_dims = layer_dims;
    m.aggregate_dim = aggregate_dim;
    m.fc_dims = fc_dims;
    m.heads = heads;
    m.knn_k = knn_k;
    m.dropout = dropout;
    m.ablation = ablation;
    return m;
}

void RunConfig::validate() const {
    if (window_length < 2) throw config_error("window length must be at least 2");
    if (stride == 0) throw config_error("stride must be positive");
    if (batch_size == 0) throw config_error("batch size must be positive");
    if (!(lr > 0.0)) throw config_error("learning rate must be positive");
    if (!(sigma_k > 0.0)) throw config_error("sigma_k must be positive");
    static const char* methods[] = {"best_f1", "best_fpa1", "best_fc1", "top_k", "tail_p"};
    if (std::find(std::begin(methods), std::end(methods), threshold) == std::end(methods))
        throw config_error("unknown threshold method '" + threshold + "'");
    tail_p_threshold(1, tail_epsilon, allow_custom_epsilon);
}

RunConfig profile(const std::string& name) {
    RunConfig c;
    if (name == "smd" || name.empty()) return c;
    if (name == "msl") {
        c.knn_k = 4;
        c.stride = 1;
    } else if (name == "smap") {
        c.lr = 1e-4;
        c.knn_k = 4;
        c.stride = 1;
    } else if (name == "swat") {
        c.lr = 1e-2;
    } else if (name == "psm") {
        c.epochs = 20;
        c.knn_k = 6;
    } else if (name == "desk") {
        c.knn_k = 6;
        c.periodic = 64;
        c.layer_dims = {16, 32, 32, 32};
        c.aggregate_dim = 32;
        c.fc_dims = {32, 16};
        c.heads = 4;
        c.stride = 2;
        c.synthetic = true;
        c.normalization = Normalization::z_score;
        c.scoring = ScoringMethod::gauss_d_k;
    } else {
        throw config_error("unknown profile '" + name + "'");
    }
    return c;
}

std::vector<std::string> profile_names() { return {"smd", "msl", "smap", "swat", "psm", "desk"}; }

const char* to_string(ScoringMethod method) {
    return method == ScoringMethod::gauss_d ? "gauss_d" : "gauss_d_k";
}

ScoringMethod parse_scoring(const std::string& text) {
    if (text == "gauss_d") return ScoringMethod::gauss_d;
    if (text == "gauss_d_k") return ScoringMethod::gauss_d_k;
    throw config_error("unknown scoring method '" + text + "'");
}

SyntheticData make_synthetic(const RunConfig& config) {
    const auto& s = config.synth;
    auto plan = s.anomalies.empty() ? spread_anomalies(s.test_length, 6, s.segment_length)
                                    : parse_anomaly_plan(s.anomalies);
    return generate_synthetic(s.sensors, s.train_length, s.test_length, plan, config.seed);
}

TimeSeriesDataset load_run_dataset(const RunConfig& config) {
    if (config.synthetic) return make_synthetic(config).dataset;
    if (config.train_path.empty() || config.test_path.empty() || config.labels_path.empty())
        throw config_error("dataset needs train, test and labels paths (or synthetic = true)");
    return load_dataset(config.train_path, config.test_path, config.labels_path);
}

TimeSeriesDataset load_training_dataset(const RunConfig& config) {
    if (config.synthetic) return make_synthetic(config).dataset;
    if (config.train_path.empty()) throw config_error("training needs a train path (or synthetic = true)");
    auto train = read_csv(config.train_path);
    TimeSeriesDataset ds;
    ds.train = std::move(train.data);
    ds.sensor_names = std::move(train.header);
    ds.entity_id = std::filesystem::path(config.train_path).stem().string();
    return ds;
}

nlohmann::json to_json(const TrainingLog& log) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : log.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    return {{"initial_train_loss", log.initial_train_loss},
            {"final_train_loss", log.final_train_loss},
            {"epochs", epochs},
            {"best_epoch", log.best_epoch},
            {"best_val_loss", log.best_val_loss},
            {"steps", log.steps},
            {"train_windows", log.train_windows},
            {"val_windows", log.val_windows},
            {"seconds", log.seconds}};
}

namespace {

Tensor as_tensor(const Matrix& m) { return Tensor({m.rows, m.cols}, m.values); }

double mean_loss(const EdgeConvFormer& model, const std::vector<Matrix>& windows) {
    if (windows.empty()) return 0.0;
    NoGradGuard no_grad;
    std::mt19937_64 unused(0);
    double total = 0.0;
    for (const auto& w : windows) total += mse_loss(model.forward(w, false, unused), as_tensor(w)).item();
    return total / static_cast<double>(windows.size());
}

std::vector<std::vector<double>> snapshot(const EdgeConvFormer& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) out.emplace_back(p.data().begin(), p.data().end());
    return out;
}

void restore(EdgeConvFormer& model, const std::vector<std::vector<double>>& values) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].mutable_data();
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

}  // namespace

TrainResult train(const RunConfig& config, const TimeSeriesDataset& raw) {
    config.validate();
    const auto start_time = std::chrono::steady_clock::now();
    const auto data = normalize(raw, config.normalization);
    const std::size_t sensors = data.sensor_count();
    auto [train_part, val_part] = split_train_val(data.train, config.train_ratio);
    const auto train_windows = make_windows(train_part, config.window_length, config.stride).windows;
    // Loss monitoring uses the non-overlapping tiling of each split.
    const auto train_tiles = make_windows(train_part, config.window_length, config.window_length).windows;
    std::vector<Matrix> val_windows;
    if (val_part.rows >= config.window_length)
        val_windows = make_windows(val_part, config.window_length, config.window_length).windows;
    else
        warn("validation split shorter than one window; keeping the last epoch");

    EdgeConvFormer model(config.model_config(sensors), config.seed);
    auto params = model.parameters();
    auto adam = AdamState::for_params(params, config.lr);
    std::mt19937_64 shuffle_rng(config.seed ^ 0x5851f42d4c957f2dULL);
    std::mt19937_64 dropout_rng(config.seed ^ 0x14057b7ef767814fULL);

    TrainResult result;
    auto& log = result.log;
    log.train_windows = train_windows.size();
    log.val_windows = val_windows.size();
    log.initial_train_loss = mean_loss(model, train_tiles);
    log.best_val_loss = val_windows.empty() ? INFINITY : mean_loss(model, val_windows);
    auto best = snapshot(model);
    if (config.epochs == 0) warn("epochs = 0: checkpointing the initialized model");

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t e = std::min(order.size(), b + config.batch_size);
            const double inv = 1.0 / static_cast<double>(e - b);
            model.zero_grad();
            for (std::size_t i = b; i < e; ++i) {
                const auto& w = train_windows[order[i]];
                auto loss = mse_loss(model.forward(w, true, dropout_rng), as_tensor(w));
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    clear_tape();
                    throw numeric_error("training loss diverged (" + std::to_string(value) + ") at step " +
                                        std::to_string(log.steps + 1) + ", epoch " + std::to_string(epoch));
                }
                epoch_loss += value;
                backward(scale(loss, inv));
            }
            adam_step(params, adam);
            ++log.steps;
        }
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size());
        entry.val_loss = val_windows.empty() ? entry.train_loss : mean_loss(model, val_windows);
        log.epochs.push_back(entry);
        if (val_windows.empty() || entry.val_loss < log.best_val_loss) {
            log.best_val_loss = entry.val_loss;
            log.best_epoch = epoch;
            best = snapshot(model);
        }
    }
    restore(model, best);
    model.zero_grad();
    log.final_train_loss = mean_loss(model, train_tiles);

    auto& ck = result.checkpoint;
    ck = make_checkpoint(model);
    ck.window_length = config.window_length;
    ck.sensor_names = data.sensor_names;
    ck.stats = data.stats;
    if (data.train.rows < config.window_length)
        throw dimension_error("training series shorter than one window");
    const auto tail = data.train.slice_rows(data.train.rows - config.window_length, data.train.rows);
    ck.rolling_init = reconstruction_error(model.reconstruct_window(tail), tail);
    ck.optimizer = adam;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return result;
}

EdgeConvFormer restore_model(const Checkpoint& checkpoint) {
    EdgeConvFormer model(checkpoint.config, 0);
    load_parameters(model, checkpoint);
    return model;
}

Matrix reconstruction_errors(const EdgeConvFormer& model, const Matrix& series, std::size_t window_length) {
    if (series.rows < window_length)
        throw dimension_error("series of length " + std::to_string(series.rows) + " is shorter than window length " +
                              std::to_string(window_length));
    Matrix errors(series.rows, series.cols);
    std::size_t covered = 0;
    auto score_window = [&](std::size_t start) {
        const auto w = series.slice_rows(start, start + window_length);
        const auto er = reconstruction_error(model.reconstruct_window(w), w);
        for (std::size_t r = covered - start; r < window_length; ++r)
            for (std::size_t s = 0; s < series.cols; ++s) errors(start + r, s) = er(r, s);
        covered = start + window_length;
    };
    for (std::size_t start = 0; start + window_length <= series.rows; start += window_length) score_window(start);
    if (covered < series.rows) score_window(series.rows - window_length);
    return errors;
}

ScoreSeries score(const Checkpoint& checkpoint, const Matrix& raw_test, const RunConfig& config) {
    if (raw_test.cols != checkpoint.config.sensors)
        throw config_error("checkpoint was trained on " + std::to_string(checkpoint.config.sensors) +
                           " sensors, test data has " + std::to_string(raw_test.cols));
    const auto model = restore_model(checkpoint);
    const auto test = apply_normalization(raw_test, checkpoint.stats);
    const auto errors = reconstruction_errors(model, test, checkpoint.window_length);
    auto series =
        score_errors(errors, checkpoint.window_length, checkpoint.rolling_init, config.scoring, config.sigma_k);
    auto tail = threshold_tail_p(series.aggregate, checkpoint.config.sensors, config.tail_epsilon,
                                 config.allow_custom_epsilon);
    series.threshold = tail.threshold;
    series.predictions = std::move(tail.predictions);
    return series;
}

void write_scores(const std::filesystem::path& path, const ScoreSeries& scores,
                  const std::vector<std::string>& sensor_names, bool include_sensor_scores) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "timestamp,A,prediction";
    if (include_sensor_scores)
        for (std::size_t s = 0; s < scores.sensor_scores.cols; ++s)
            out << ",a_" << (s < sensor_names.size() ? sensor_names[s] : std::to_string(s));
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t t = 0; t < scores.aggregate.size(); ++t) {
        out << t << ',' << scores.aggregate[t] << ',' << (t < scores.predictions.size() ? scores.predictions[t] : 0);
        if (include_sensor_scores)
            for (std::size_t s = 0; s < scores.sensor_scores.cols; ++s) out << ',' << scores.sensor_scores(t, s);
        out << '\n';
    }
    if (!out) throw io_error("write failed for " + path.string());
}

std::vector<double> read_score_aggregate(const std::filesystem::path& path) {
    auto table = read_csv(path);
    const auto it = std::find(table.header.begin(), table.header.end(), "A");
    if (it == table.header.end()) throw parse_error(path.string() + ": no 'A' column");
    const auto col = static_cast<std::size_t>(it - table.header.begin());
    std::vector<double> a(table.data.rows);
    for (std::size_t r = 0; r < table.data.rows; ++r) a[r] = table.data(r, col);
    return a;
}

const ReportEntry& MetricsReport::find(const std::string& metric, const std::string& method) const {
    for (const auto& e : entries)
        if (e.metric == metric && e.threshold_method == method) return e;
    throw config_error("report has no entry for " + metric + " / " + method);
}

namespace {

std::string format_epsilon(double eps) {
    std::ostringstream out;
    out << "tail_p@" << std::setprecision(1) << std::scientific << eps;
    return out.str();
}

void add_threshold_metrics(MetricsReport& report, const std::string& method, double threshold,
                           std::span<const int> pred, std::span<const int> labels) {
    const auto counts = f1_point(pred, labels).counts;
    auto push = [&](std::string metric, double value) {
        report.entries.push_back({std::move(metric), method, threshold, value, counts, true});
    };
    push("F1", f1_point(pred, labels).f1);
    push("Fpa1", fpa1(pred, labels).f1);
    push("Fc1", fc1(pred, labels).fc1);
    for (auto level : {AdLevel::ad1, AdLevel::ad2, AdLevel::ad3, AdLevel::ad4})
        push(std::string("F1-PTRT-") + to_string(level), range_pr(pred, labels, level).f1);
}

}  // namespace

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, std::size_t sensors,
                       const RunConfig& config) {
    if (scores.size() != labels.size())
        throw dimension_error("evaluate: " + std::to_string(scores.size()) + " scores, " +
                              std::to_string(labels.size()) + " labels");
    MetricsReport report;
    report.sensors = sensors;
    report.true_anomalies = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));

    const std::pair<FScore, const char*> best_methods[] = {
        {FScore::f1, "best_f1"}, {FScore::fpa1, "best_fpa1"}, {FScore::fc1, "best_fc1"}};
    for (const auto& [metric, name] : best_methods) {
        const auto r = threshold_best_f(scores, labels, metric);
        add_threshold_metrics(report, name, r.threshold, r.predictions, labels);
        if (config.threshold == name) {
            report.primary_threshold = r.threshold;
            report.primary_predictions = r.predictions;
        }
    }

    {
        const auto pred = threshold_top_k(scores, report.true_anomalies);
        double cut = INFINITY;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i]) cut = std::min(cut, scores[i]);
        add_threshold_metrics(report, "top_k", cut, pred, labels);
        if (config.threshold == "top_k") {
            report.primary_threshold = cut;
            report.primary_predictions = pred;
        }
    }

    std::vector<std::string> tail_methods;
    for (double eps : kTailEpsilons) {
        const auto r = threshold_tail_p(scores, sensors, eps);
        tail_methods.push_back(format_epsilon(eps));
        add_threshold_metrics(report, tail_methods.back(), r.threshold, r.predictions, labels);
    }
    if (config.threshold == "tail_p") {
        const auto r = threshold_tail_p(scores, sensors, config.tail_epsilon, config.allow_custom_epsilon);
        report.primary_threshold = r.threshold;
        report.primary_predictions = r.predictions;
    }
    // Best epsilon per metric.
    std::vector<ReportEntry> tail_best;
    for (const auto& e : report.entries) {
        if (e.threshold_method.rfind("tail_p@", 0) != 0) continue;
        auto it = std::find_if(tail_best.begin(), tail_best.end(), [&](const ReportEntry& b) { return b.metric == e.metric; });
        if (it == tail_best.end())
            tail_best.push_back(e);
        else if (e.value > it->value)
            *it = e;
    }
    for (auto& e : tail_best) {
        e.threshold_method = "tail_p_best";
        report.entries.push_back(e);
    }

    const bool both_classes = report.true_anomalies > 0 && report.true_anomalies < labels.size();
    if (both_classes)
        report.entries.push_back({"AU-ROC", "none", 0.0, auc_roc(scores, labels), {}, false});
    else
        warn("AU-ROC undefined for single-class labels; omitted from the report");
    report.entries.push_back({"AU-PRC", "none", 0.0, auc_prc(scores, labels), {}, false});
    return report;
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        nlohmann::json j{{"metric", e.metric}, {"threshold_method", e.threshold_method}, {"value", e.value}};
        if (e.has_threshold) {
            j["threshold"] = e.threshold;
            j["counts"] = {{"tp", e.counts.tp}, {"fp", e.counts.fp}, {"fn", e.counts.fn}, {"tn", e.counts.tn}};
        } else {
            j["threshold"] = nullptr;
        }
        entries.push_back(std::move(j));
    }
    return {{"sensors", report.sensors}, {"true_anomalies", report.true_anomalies},
            {"primary_threshold", report.primary_threshold}, {"entries", entries}};
}

void write_plot_data(const std::filesystem::path& path, std::span<const double> scores, std::span<const int> labels,
                     const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "timestamp,A,label,threshold,prediction\n" << std::setprecision(17);
    for (std::size_t t = 0; t < scores.size(); ++t)
        out << t << ',' << scores[t] << ',' << labels[t] << ',' << report.primary_threshold << ','
            << (t < report.primary_predictions.size() ? report.primary_predictions[t] : 0) << '\n';
}

double AblationReport::value(std::size_t variant, std::size_t row) const {
    const auto& [metric, method] = rows[row];
    return variants[variant].report.find(metric, method).value;
}

std::size_t AblationReport::best(std::size_t row) const {
    std::size_t b = 0;
    for (std::size_t v = 1; v < variants.size(); ++v)
        if (value(v, row) > value(b, row)) b = v;
    return b;
}

std::string AblationReport::table() const {
    std::ostringstream out;
    out << std::left << std::setw(24) << "metric";
    for (const auto& v : variants) out << std::setw(17) << (v.ablation == Ablation::none ? "full" : to_string(v.ablation));
    out << '\n';
    out << std::fixed << std::setprecision(4);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << std::setw(24) << (rows[r].first + " (" + rows[r].second + ")");
        const auto b = best(r);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(4) << value(v, r) << (v == b ? " *" : "");
            out << std::setw(17) << cell.str();
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const AblationReport& report) {
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& v : report.variants)
        variants.push_back({{"variant", v.ablation == Ablation::none ? "full" : to_string(v.ablation)},
                            {"training", to_json(v.log)},
                            {"report", to_json(v.report)}});
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
        nlohmann::json values = nlohmann::json::object();
        for (std::size_t v = 0; v < report.variants.size(); ++v) {
            const auto ab = report.variants[v].ablation;
            values[ab == Ablation::none ? "full" : to_string(ab)] = report.value(v, r);
        }
        const auto b = report.variants[report.best(r)].ablation;
        rows.push_back({{"metric", report.rows[r].first},
                        {"threshold_method", report.rows[r].second},
                        {"values", values},
                        {"best", b == Ablation::none ? "full" : to_string(b)}});
    }
    return {{"variants", variants}, {"table", rows}};
}

PipelineResult run_pipeline(const RunConfig& config, const TimeSeriesDataset& raw) {
    PipelineResult out;
    TimeSeriesDataset unlabeled = raw;
    unlabeled.test_labels.clear();
    out.trained = train(config, unlabeled);
    out.scores = score(out.trained.checkpoint, unlabeled.test, config);
    out.report = evaluate(out.scores.aggregate, raw.test_labels, raw.sensor_count(), config);
    return out;
}

AblationReport ablate(const RunConfig& config, const TimeSeriesDataset& raw) {
    AblationReport report;
    for (auto ablation : {Ablation::none, Ablation::no_time2vec, Ablation::no_edgeconv, Ablation::no_transformer}) {
        RunConfig variant = config;
        variant.ablation = ablation;
        auto r = run_pipeline(variant, raw);
        report.variants.push_back({ablation, r.trained.log, std::move(r.report), std::move(r.scores.aggregate)});
    }
    report.rows = {{"F1", "best_f1"},     {"Fpa1", "best_fpa1"}, {"Fc1", "best_fc1"},
                   {"F1", "top_k"},       {"Fc1", "top_k"},      {"Fc1", "tail_p_best"},
                   {"F1-PTRT-AD2", "best_fc1"}, {"AU-ROC", "none"}, {"AU-PRC", "none"}};
    return report;
}

}  // namespace ecf
