#include "ecf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ecf/error.hpp"

namespace ecf {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* first = text.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    return in;
}

}  // namespace

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows)
        throw dimension_error("row slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                              std::to_string(rows) + " rows");
    Matrix out(end - begin, cols);
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(begin * cols),
              values.begin() + static_cast<std::ptrdiff_t>(end * cols), out.values.begin());
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split_fields(line);
        if (first_content) {
            first_content = false;
            double probe = 0.0;
            const bool numeric = std::all_of(fields.begin(), fields.end(),
                                             [&](const std::string& f) { return parse_double(f, probe); });
            table.data.cols = fields.size();
            if (!numeric) {
                table.header = fields;
                continue;
            }
        }
        if (fields.size() != table.data.cols)
            throw parse_error(path.string() + ":" + std::to_string(line_no) + ": ragged row with " +
                              std::to_string(fields.size()) + " fields, expected " + std::to_string(table.data.cols));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v))
                throw parse_error(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + fields[c] +
                                  "' at (row " + std::to_string(table.data.rows) + ", col " + std::to_string(c) + ")");
            if (!std::isfinite(v))
                throw parse_error(path.string() + ":" + std::to_string(line_no) + ": non-finite value at (row " +
                                  std::to_string(table.data.rows) + ", col " + std::to_string(c) + ")");
            table.data.values.push_back(v);
        }
        ++table.data.rows;
    }
    if (table.header.empty())
        for (std::size_t c = 0; c < table.data.cols; ++c) table.header.push_back("s" + std::to_string(c));
    return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& data) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < data.rows; ++r) {
        for (std::size_t c = 0; c < data.cols; ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, data(r, c));
            out << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    auto table = read_csv(path);
    if (table.data.cols != 1)
        throw parse_error(path.string() + ": labels need exactly one column, got " + std::to_string(table.data.cols));
    std::vector<int> labels;
    labels.reserve(table.data.rows);
    for (std::size_t r = 0; r < table.data.rows; ++r) {
        const double v = table.data(r, 0);
        if (v != 0.0 && v != 1.0)
            throw parse_error(path.string() + ": label at row " + std::to_string(r) + " is not 0 or 1");
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "label\n";
    for (int l : labels) out << l << '\n';
}

TimeSeriesDataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& test_path,
                               const std::filesystem::path& labels_path) {
    auto train = read_csv(train_path);
    auto test = read_csv(test_path);
    auto labels = read_labels(labels_path);
    if (train.data.cols != test.data.cols)
        throw parse_error("train has " + std::to_string(train.data.cols) + " columns but test has " +
                          std::to_string(test.data.cols));
    if (labels.size() != test.data.rows)
        throw parse_error("labels length " + std::to_string(labels.size()) + " does not match test length " +
                          std::to_string(test.data.rows));
    TimeSeriesDataset ds;
    ds.train = std::move(train.data);
    ds.test = std::move(test.data);
    ds.test_labels = std::move(labels);
    ds.sensor_names = std::move(train.header);
    ds.entity_id = train_path.stem().string();
    return ds;
}

NormalizationStats fit_min_max(const Matrix& train) {
    NormalizationStats stats;
    stats.min.assign(train.cols, 0.0);
    stats.max.assign(train.cols, 0.0);
    for (std::size_t c = 0; c < train.cols; ++c) {
        double lo = train.rows ? train(0, c) : 0.0;
        double hi = lo;
        for (std::size_t r = 1; r < train.rows; ++r) {
            lo = std::min(lo, train(r, c));
            hi = std::max(hi, train(r, c));
        }
        stats.min[c] = lo;
        stats.max[c] = hi;
    }
    return stats;
}

Matrix apply_min_max(const Matrix& m, const NormalizationStats& stats, double clip_low, double clip_high) {
    if (stats.min.size() != m.cols || stats.max.size() != m.cols)
        throw dimension_error("normalization stats for " + std::to_string(stats.min.size()) + " sensors applied to " +
                              std::to_string(m.cols) + " columns");
    Matrix out(m.rows, m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        const double range = stats.max[c] - stats.min[c];
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double v = range > 0.0 ? (m(r, c) - stats.min[c]) / range : 0.5;
            out(r, c) = std::clamp(v, clip_low, clip_high);
        }
    }
    return out;
}

const char* to_string(Normalization kind) { return kind == Normalization::min_max ? "min_max" : "z_score"; }

Normalization parse_normalization(const std::string& text) {
    if (text == "min_max") return Normalization::min_max;
    if (text == "z_score") return Normalization::z_score;
    throw config_error("unknown normalization '" + text + "'");
}

NormalizationStats fit_z_score(const Matrix& train) {
    NormalizationStats stats;
    stats.kind = Normalization::z_score;
    stats.mean.assign(train.cols, 0.0);
    stats.stddev.assign(train.cols, 0.0);
    if (train.rows == 0) return stats;
    const auto n = static_cast<double>(train.rows);
    for (std::size_t c = 0; c < train.cols; ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < train.rows; ++r) mu += train(r, c);
        mu /= n;
        double var = 0.0;
        for (std::size_t r = 0; r < train.rows; ++r) var += (train(r, c) - mu) * (train(r, c) - mu);
        stats.mean[c] = mu;
        stats.stddev[c] = std::sqrt(var / n);
    }
    return stats;
}

Matrix apply_z_score(const Matrix& m, const NormalizationStats& stats) {
    if (stats.mean.size() != m.cols || stats.stddev.size() != m.cols)
        throw dimension_error("normalization stats for " + std::to_string(stats.mean.size()) + " sensors applied to " +
                              std::to_string(m.cols) + " columns");
    Matrix out(m.rows, m.cols);
    for (std::size_t c = 0; c < m.cols; ++c)
        for (std::size_t r = 0; r < m.rows; ++r)
            out(r, c) = stats.stddev[c] > 0.0 ? (m(r, c) - stats.mean[c]) / stats.stddev[c] : 0.0;
    return out;
}

Matrix apply_normalization(const Matrix& m, const NormalizationStats& stats) {
    return stats.kind == Normalization::min_max ? apply_min_max(m, stats) : apply_z_score(m, stats);
}

TimeSeriesDataset normalize(TimeSeriesDataset dataset, Normalization kind) {
    if (kind == Normalization::z_score) {
        dataset.stats = fit_z_score(dataset.train);
        dataset.train = apply_z_score(dataset.train, dataset.stats);
        dataset.test = apply_z_score(dataset.test, dataset.stats);
        return dataset;
    }
    dataset.stats = fit_min_max(dataset.train);
    dataset.train = apply_min_max(dataset.train, dataset.stats, 0.0, 1.0);
    dataset.test = apply_min_max(dataset.test, dataset.stats);
    return dataset;
}

WindowBatch make_windows(const Matrix& series, std::size_t window_length, std::size_t stride) {
    if (window_length == 0 || stride == 0) throw config_error("window length and stride must be positive");
    if (series.rows < window_length)
        throw dimension_error("series of length " + std::to_string(series.rows) + " is shorter than window length " +
                              std::to_string(window_length));
    WindowBatch batch;
    batch.window_length = window_length;
    batch.stride = stride;
    const std::size_t count = (series.rows - window_length) / stride + 1;
    for (std::size_t j = 0; j < count; ++j) {
        batch.start_indices.push_back(j * stride);
        batch.windows.push_back(series.slice_rows(j * stride, j * stride + window_length));
    }
    return batch;
}

std::pair<Matrix, Matrix> split_train_val(const Matrix& train, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw config_error("train/validation ratio must be in (0, 1)");
    const auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(train.rows) * ratio + 1e-9));
    return {train.slice_rows(0, cut), train.slice_rows(cut, train.rows)};
}

const char* to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::point: return "point";
        case AnomalyKind::contextual: return "contextual";
        case AnomalyKind::collective: return "collective";
    }
    return "?";
}

AnomalyKind parse_anomaly_kind(const std::string& text) {
    if (text == "point") return AnomalyKind::point;
    if (text == "contextual") return AnomalyKind::contextual;
    if (text == "collective") return AnomalyKind::collective;
    throw config_error("unknown anomaly kind '" + text + "'");
}

std::vector<InjectedAnomaly> parse_anomaly_plan(const std::string& text) {
    std::vector<InjectedAnomaly> plan;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.find_first_not_of(' ') == std::string::npos) continue;
        const auto at = item.find('@');
        const auto colon = item.find(':', at == std::string::npos ? 0 : at);
        if (at == std::string::npos || colon == std::string::npos)
            throw config_error("anomaly entry '" + item + "' is not kind@start:length");
        InjectedAnomaly a;
        auto kind = item.substr(0, at);
        kind.erase(0, kind.find_first_not_of(' '));
        a.kind = parse_anomaly_kind(kind);
        try {
            a.start = std::stoul(item.substr(at + 1, colon - at - 1));
            a.length = std::stoul(item.substr(colon + 1));
        } catch (const std::exception&) {
            throw config_error("anomaly entry '" + item + "' has a non-numeric start or length");
        }
        if (a.length == 0) throw config_error("anomaly entry '" + item + "' has zero length");
        plan.push_back(a);
    }
    return plan;
}

std::string format_anomaly_plan(const std::vector<InjectedAnomaly>& plan) {
    std::string out;
    for (const auto& a : plan) {
        if (!out.empty()) out += ',';
        out += std::string(to_string(a.kind)) + "@" + std::to_string(a.start) + ":" + std::to_string(a.length);
    }
    return out;
}

std::vector<InjectedAnomaly> spread_anomalies(std::size_t test_length, std::size_t count,
                                              std::size_t segment_length) {
    std::vector<InjectedAnomaly> plan;
    const AnomalyKind cycle[] = {AnomalyKind::point, AnomalyKind::contextual, AnomalyKind::collective};
    for (std::size_t i = 0; i < count; ++i) {
        InjectedAnomaly a;
        a.kind = cycle[i % 3];
        a.length = a.kind == AnomalyKind::point ? 1 : segment_length;
        a.start = (i + 1) * test_length / (count + 1);
        plan.push_back(a);
    }
    return plan;
}

SyntheticData generate_synthetic(std::size_t sensors, std::size_t train_length, std::size_t test_length,
                                 const std::vector<InjectedAnomaly>& anomalies, std::uint64_t seed) {
    if (sensors < 2) throw config_error("synthetic data needs at least 2 sensors");
    if (train_length == 0 || test_length == 0) throw config_error("synthetic train/test lengths must be positive");
    for (const auto& a : anomalies) {
        if (a.length == 0 || a.start + a.length > test_length)
            throw config_error("anomaly " + std::string(to_string(a.kind)) + "@" + std::to_string(a.start) + ":" +
                               std::to_string(a.length) + " exceeds test length " + std::to_string(test_length));
        for (auto s : a.sensors)
            if (s >= sensors) throw config_error("anomaly sensor index " + std::to_string(s) + " out of range");
    }

    constexpr std::size_t kDrivers = 3;
    constexpr double kNoise = 0.05;
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> driver_period(kDrivers), driver_phase(kDrivers);
    for (std::size_t k = 0; k < kDrivers; ++k) {
        driver_period[k] = 20.0 + 100.0 * unif(rng);
        driver_phase[k] = kTwoPi * unif(rng);
    }
    std::vector<std::vector<double>> weight(sensors, std::vector<double>(kDrivers));
    std::vector<double> own_period(sensors), own_phase(sensors), offset(sensors);
    for (std::size_t s = 0; s < sensors; ++s) {
        double norm = 0.0;
        for (auto& w : weight[s]) {
            w = gauss(rng);
            norm += w * w;
        }
        norm = std::sqrt(norm);
        for (auto& w : weight[s]) w /= norm;
        own_period[s] = 10.0 + 40.0 * unif(rng);
        own_phase[s] = kTwoPi * unif(rng);
        offset[s] = 2.0 * gauss(rng);
    }
    // Deterministic (noise-free) part of sensor s at absolute time t.
    auto signal = [&](std::size_t s, double t) {
        double v = 0.0;
        for (std::size_t k = 0; k < kDrivers; ++k)
            v += weight[s][k] * std::sin(kTwoPi * t / driver_period[k] + driver_phase[k]);
        return v + 0.3 * std::sin(kTwoPi * t / own_period[s] + own_phase[s]);
    };

    SyntheticData out;
    auto& ds = out.dataset;
    ds.entity_id = "synthetic-" + std::to_string(seed);
    for (std::size_t s = 0; s < sensors; ++s) ds.sensor_names.push_back("s" + std::to_string(s));
    ds.train = Matrix(train_length, sensors);
    for (std::size_t t = 0; t < train_length; ++t)
        for (std::size_t s = 0; s < sensors; ++s)
            ds.train(t, s) = offset[s] + signal(s, static_cast<double>(t)) + kNoise * gauss(rng);

    std::vector<double> train_std(sensors, 0.0);
    for (std::size_t s = 0; s < sensors; ++s) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t t = 0; t < train_length; ++t) mean += ds.train(t, s);
        mean /= static_cast<double>(train_length);
        for (std::size_t t = 0; t < train_length; ++t) sq += (ds.train(t, s) - mean) * (ds.train(t, s) - mean);
        train_std[s] = std::sqrt(sq / static_cast<double>(train_length));
    }

    ds.test = Matrix(test_length, sensors);
    std::vector<double> noise(test_length * sensors);
    for (auto& n : noise) n = kNoise * gauss(rng);
    for (std::size_t t = 0; t < test_length; ++t)
        for (std::size_t s = 0; s < sensors; ++s)
            ds.test(t, s) = offset[s] + signal(s, static_cast<double>(train_length + t)) + noise[t * sensors + s];

    ds.test_labels.assign(test_length, 0);
    out.label_kinds.assign(test_length, AnomalyKind::point);
    for (const auto& a : anomalies) {
        std::vector<std::size_t> affected = a.sensors;
        if (affected.empty()) {
            std::vector<std::size_t> order(sensors);
            for (std::size_t s = 0; s < sensors; ++s) order[s] = s;
            std::shuffle(order.begin(), order.end(), rng);
            affected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>((sensors + 1) / 2));
            std::sort(affected.begin(), affected.end());
        }
        // Shift of the drivers for collective anomalies: a fresh, large
        // offset so every driver lands at an unrelated phase.
        const double shift = 0.5 * driver_period[0] + 37.0 + 50.0 * unif(rng);
        for (std::size_t t = a.start; t < a.start + a.length; ++t) {
            const double time = static_cast<double>(train_length + t);
            for (auto s : affected) {
                const double n = noise[t * sensors + s];
                switch (a.kind) {
                    case AnomalyKind::point: ds.test(t, s) += 5.0 * train_std[s]; break;
                    case AnomalyKind::contextual: ds.test(t, s) = offset[s] - signal(s, time) + n; break;
                    case AnomalyKind::collective: ds.test(t, s) = offset[s] + signal(s, time + shift) + n; break;
                }
            }
            ds.test_labels[t] = 1;
            out.label_kinds[t] = a.kind;
        }
    }
    return out;
}

}  // namespace ecf
