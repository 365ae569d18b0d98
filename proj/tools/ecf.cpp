// ecf: train, score and evaluate EdgeConvFormer models from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ecf/error.hpp"
#include "ecf/harness.hpp"

namespace fs = std::filesystem;

namespace {

// Flags that override the selected profile when given.
struct Overrides {
    std::string config_file;
    std::string profile = "smd";
    std::optional<std::string> train, test, labels;
    std::optional<bool> synthetic;
    std::optional<std::size_t> sensors, train_length, test_length, segment_length;
    std::optional<std::string> anomalies;
    std::optional<std::size_t> window, stride, epochs, batch, knn_k, heads, periodic, aggregate_dim;
    std::optional<double> lr, train_ratio, sigma_k, tail_epsilon, dropout;
    std::optional<std::string> scoring, threshold, ablation, normalization;
    std::optional<std::vector<std::size_t>> layer_dims, fc_dims;
    std::optional<std::uint64_t> seed;
    bool allow_custom_epsilon = false;

    ecf::RunConfig resolve() const {
        auto c = ecf::profile(profile);
        auto set = [](auto& dst, const auto& src) {
            if (src) dst = *src;
        };
        set(c.train_path, train);
        set(c.test_path, test);
        set(c.labels_path, labels);
        set(c.synthetic, synthetic);
        set(c.synth.sensors, sensors);
        set(c.synth.train_length, train_length);
        set(c.synth.test_length, test_length);
        set(c.synth.segment_length, segment_length);
        set(c.synth.anomalies, anomalies);
        set(c.window_length, window);
        set(c.stride, stride);
        set(c.epochs, epochs);
        set(c.batch_size, batch);
        set(c.knn_k, knn_k);
        set(c.heads, heads);
        set(c.periodic, periodic);
        set(c.aggregate_dim, aggregate_dim);
        set(c.lr, lr);
        set(c.train_ratio, train_ratio);
        set(c.sigma_k, sigma_k);
        set(c.tail_epsilon, tail_epsilon);
        set(c.dropout, dropout);
        set(c.layer_dims, layer_dims);
        set(c.fc_dims, fc_dims);
        set(c.seed, seed);
        set(c.threshold, threshold);
        if (scoring) c.scoring = ecf::parse_scoring(*scoring);
        if (ablation) c.ablation = ecf::parse_ablation(*ablation);
        if (normalization) c.normalization = ecf::parse_normalization(*normalization);
        c.allow_custom_epsilon = allow_custom_epsilon;
        c.validate();
        return c;
    }
};

void add_run_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_file, "Key = value file; keys are flag names without dashes");
    app->allow_config_extras(CLI::config_extras_mode::error);
    app->add_option("--profile", o.profile, "Preset: smd, msl, smap, swat, psm, desk")->capture_default_str();
    app->add_option("--train", o.train, "Train CSV");
    app->add_option("--test", o.test, "Test CSV");
    app->add_option("--labels", o.labels, "Test labels CSV");
    app->add_option("--synthetic", o.synthetic, "Use the synthetic generator");
    app->add_option("--sensors", o.sensors, "Synthetic sensor count");
    app->add_option("--train-length", o.train_length, "Synthetic train length");
    app->add_option("--test-length", o.test_length, "Synthetic test length");
    app->add_option("--segment-length", o.segment_length, "Synthetic anomaly segment length");
    app->add_option("--anomalies", o.anomalies, "Anomaly plan, e.g. point@100:1,collective@500:40");
    app->add_option("--window", o.window, "Window length l_w");
    app->add_option("--stride", o.stride, "Training window stride l_s");
    app->add_option("--epochs", o.epochs);
    app->add_option("--lr", o.lr);
    app->add_option("--batch-size", o.batch);
    app->add_option("--knn-k", o.knn_k);
    app->add_option("--heads", o.heads);
    app->add_option("--periodic", o.periodic, "Time2Vec periodic components m");
    app->add_option("--layer-dims", o.layer_dims, "Encoder output widths")->delimiter(',');
    app->add_option("--aggregate-dim", o.aggregate_dim);
    app->add_option("--fc-dims", o.fc_dims, "Decoder hidden widths")->delimiter(',');
    app->add_option("--dropout", o.dropout);
    app->add_option("--train-ratio", o.train_ratio);
    app->add_option("--normalization", o.normalization, "min_max or z_score");
    app->add_option("--sigma-k", o.sigma_k, "Gaussian kernel sigma for gauss_d_k");
    app->add_option("--scoring", o.scoring, "gauss_d or gauss_d_k");
    app->add_option("--threshold", o.threshold, "best_f1, best_fpa1, best_fc1, top_k or tail_p");
    app->add_option("--tail-epsilon", o.tail_epsilon);
    app->add_flag("--allow-custom-epsilon", o.allow_custom_epsilon);
    app->add_option("--ablation", o.ablation, "none, no_time2vec, no_edgeconv, no_transformer");
    app->add_option("--seed", o.seed);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ecf::io_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ecf::io_error("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<int> labels_for(const ecf::RunConfig& config, const std::optional<std::string>& path) {
    if (path) return ecf::read_labels(*path);
    if (!config.labels_path.empty()) return ecf::read_labels(config.labels_path);
    if (config.synthetic) return ecf::make_synthetic(config).dataset.test_labels;
    throw ecf::config_error("evaluate needs --labels");
}

void print_summary(const ecf::MetricsReport& report, const std::string& method) {
    for (const char* metric : {"F1", "Fpa1", "Fc1"}) {
        const auto& e = report.find(metric, method);
        std::printf("  %-5s (%s): %.4f\n", metric, method.c_str(), e.value);
    }
    for (const auto& e : report.entries)
        if (e.threshold_method == "none") std::printf("  %-7s: %.4f\n", e.metric.c_str(), e.value);
}

int exit_code(ecf::ErrorKind kind) {
    switch (kind) {
        case ecf::ErrorKind::config: return 2;
        case ecf::ErrorKind::parse: return 3;
        case ecf::ErrorKind::dimension: return 4;
        case ecf::ErrorKind::numeric: return 5;
        case ecf::ErrorKind::io: return 6;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EdgeConvFormer multivariate time-series anomaly detection"};
    app.require_subcommand(1);
    Overrides o;

    std::string checkpoint_path = "model.ecf";
    std::string scores_path = "scores.csv";
    std::string out_dir = "out";
    std::string report_path = "report.json";
    std::string plot_path = "plot.csv";
    std::string log_path;
    std::optional<std::string> eval_labels;
    bool sensor_scores = false;

    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    add_run_flags(train_cmd, o);
    train_cmd->add_option("-o,--checkpoint", checkpoint_path)->capture_default_str();
    train_cmd->add_option("--log", log_path, "Training log JSON");

    auto* score_cmd = app.add_subcommand("score", "Score test data with a checkpoint");
    add_run_flags(score_cmd, o);
    score_cmd->add_option("-c,--checkpoint", checkpoint_path)->capture_default_str();
    score_cmd->add_option("-o,--scores", scores_path)->capture_default_str();
    score_cmd->add_flag("--sensor-scores", sensor_scores, "Also write per-sensor scores");

    auto* eval_cmd = app.add_subcommand("evaluate", "Threshold a score file and compute metrics");
    add_run_flags(eval_cmd, o);
    eval_cmd->add_option("-s,--scores", scores_path)->capture_default_str();
    eval_cmd->add_option("--label-file", eval_labels, "Labels CSV (defaults to --labels)");
    eval_cmd->add_option("-o,--report", report_path)->capture_default_str();
    eval_cmd->add_option("--plot", plot_path)->capture_default_str();

    auto* ablate_cmd = app.add_subcommand("ablate", "Compare full model and the three ablations");
    add_run_flags(ablate_cmd, o);
    ablate_cmd->add_option("-o,--report", report_path)->capture_default_str();

    auto* demo_cmd = app.add_subcommand("demo", "Synthetic end-to-end run: train, score, evaluate");
    add_run_flags(demo_cmd, o);
    demo_cmd->add_option("-o,--out-dir", out_dir)->capture_default_str();

    auto* synth_cmd = app.add_subcommand("gen-synth", "Write a synthetic dataset as CSV");
    add_run_flags(synth_cmd, o);
    synth_cmd->add_option("-o,--out-dir", out_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
        // Flags given on the command line win over the file.
        if (!o.config_file.empty()) {
            std::ifstream in(o.config_file);
            if (!in) throw CLI::FileError::Missing(o.config_file);
            app.get_subcommands().front()->parse_from_stream(in);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train_cmd) {
            const auto config = o.resolve();
            const auto data = ecf::load_training_dataset(config);
            const auto result = ecf::train(config, data);
            ecf::save_checkpoint(checkpoint_path, result.checkpoint);
            if (!log_path.empty()) write_json(log_path, ecf::to_json(result.log));
            std::printf("trained %zu steps in %.1f s; loss %.6g -> %.6g; best epoch %zu (val %.6g)\n", result.log.steps,
                        result.log.seconds, result.log.initial_train_loss, result.log.final_train_loss,
                        result.log.best_epoch, result.log.best_val_loss);
        } else if (*score_cmd) {
            const auto config = o.resolve();
            const auto checkpoint = ecf::load_checkpoint(checkpoint_path);
            ecf::Matrix test;
            if (config.synthetic)
                test = ecf::make_synthetic(config).dataset.test;
            else if (!config.test_path.empty())
                test = ecf::read_csv(config.test_path).data;
            else
                throw ecf::config_error("score needs --test (or --synthetic true)");
            const auto scores = ecf::score(checkpoint, test, config);
            ecf::write_scores(scores_path, scores, checkpoint.sensor_names, sensor_scores);
            std::printf("scored %zu timestamps -> %s\n", scores.aggregate.size(), scores_path.c_str());
        } else if (*eval_cmd) {
            const auto config = o.resolve();
            const auto scores = ecf::read_score_aggregate(scores_path);
            const auto labels = labels_for(config, eval_labels);
            const std::size_t sensors = config.synthetic ? config.synth.sensors
                                        : !config.test_path.empty() ? ecf::read_csv(config.test_path).data.cols
                                                                    : 0;
            if (sensors == 0) throw ecf::config_error("evaluate needs --test or --sensors to size tail-p thresholds");
            const auto report = ecf::evaluate(scores, labels, sensors, config);
            write_json(report_path, ecf::to_json(report));
            ecf::write_plot_data(plot_path, scores, labels, report);
            print_summary(report, config.threshold == "tail_p" ? "tail_p_best" : config.threshold);
        } else if (*ablate_cmd) {
            const auto config = o.resolve();
            const auto data = ecf::load_run_dataset(config);
            const auto report = ecf::ablate(config, data);
            write_json(report_path, ecf::to_json(report));
            std::cout << report.table();
        } else if (*demo_cmd) {
            auto config = o.resolve();
            config.synthetic = true;
            ensure_dir(out_dir);
            const auto data = ecf::load_run_dataset(config);
            const auto run = ecf::run_pipeline(config, data);
            const fs::path dir(out_dir);
            ecf::save_checkpoint(dir / "model.ecf", run.trained.checkpoint);
            write_json(dir / "training.json", ecf::to_json(run.trained.log));
            ecf::write_scores(dir / "scores.csv", run.scores, data.sensor_names, false);
            write_json(dir / "report.json", ecf::to_json(run.report));
            ecf::write_plot_data(dir / "plot.csv", run.scores.aggregate, data.test_labels, run.report);
            const auto& log = run.trained.log;
            std::printf("training: %.1f s, loss %.6g -> %.6g (%.1f%% drop)\n", log.seconds, log.initial_train_loss,
                        log.final_train_loss, 100.0 * (1.0 - log.final_train_loss / log.initial_train_loss));
            print_summary(run.report, config.threshold == "tail_p" ? "tail_p_best" : config.threshold);
            std::printf("outputs in %s\n", out_dir.c_str());
        } else if (*synth_cmd) {
            auto config = o.resolve();
            config.synthetic = true;
            ensure_dir(out_dir);
            const auto synth = ecf::make_synthetic(config);
            const fs::path dir(out_dir);
            const auto& ds = synth.dataset;
            ecf::write_csv(dir / "train.csv", ds.sensor_names, ds.train);
            ecf::write_csv(dir / "test.csv", ds.sensor_names, ds.test);
            ecf::write_labels(dir / "labels.csv", ds.test_labels);
            std::printf("wrote %zu sensors, %zu train / %zu test rows to %s\n", ds.sensor_count(), ds.train.rows,
                        ds.test.rows, out_dir.c_str());
        }
    } catch (const ecf::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", ecf::to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
