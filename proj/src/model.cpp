#include "ecf/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ecf/error.hpp"

namespace ecf {

const char* to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::none: return "none";
        case Ablation::no_time2vec: return "no_time2vec";
        case Ablation::no_edgeconv: return "no_edgeconv";
        case Ablation::no_transformer: return "no_transformer";
    }
    return "?";
}

Ablation parse_ablation(const std::string& text) {
    if (text == "none" || text == "full") return Ablation::none;
    if (text == "no_time2vec") return Ablation::no_time2vec;
    if (text == "no_edgeconv") return Ablation::no_edgeconv;
    if (text == "no_transformer") return Ablation::no_transformer;
    throw config_error("unknown ablation '" + text + "'");
}

std::size_t ModelConfig::embedding_dim() const {
    return ablation == Ablation::no_time2vec ? positional_dim(periodic) : periodic + 1;
}

EncoderOptions ModelConfig::encoder_options() const {
    return {knn_k, ablation != Ablation::no_edgeconv, ablation != Ablation::no_transformer};
}

void ModelConfig::validate() const {
    if (sensors == 0) throw config_error("model needs at least one sensor");
    if (layer_dims.empty()) throw config_error("model needs at least one encoder layer");
    if (knn_k == 0) throw config_error("knn k must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("dropout must be in [0, 1)");
    if (ablation != Ablation::no_transformer)
        for (auto d : layer_dims)
            if (heads == 0 || d % heads != 0)
                throw config_error("layer width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                                   " heads");
}

EdgeConvFormer::EdgeConvFormer(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    if (config_.ablation == Ablation::no_time2vec)
        positional_ = PositionalProjection::init(config_.embedding_dim(), rng);
    else
        time2vec_ = Time2VecParams::init(config_.sensors, config_.periodic, rng);
    encoder_ = init_encoder(config_.embedding_dim(), config_.layer_dims, config_.heads, config_.encoder_options(), rng);
    decoder_ = DecoderParams::init(config_.layer_dims, config_.aggregate_dim, config_.fc_dims, config_.sensors,
                                   config_.dropout, config_.leaky_slope, rng);
}

Tensor EdgeConvFormer::forward(const Matrix& window, bool training, std::mt19937_64& rng, ForwardTrace* trace) const {
    if (window.cols != config_.sensors)
        throw dimension_error("model expects " + std::to_string(config_.sensors) + " sensors, window has " +
                              std::to_string(window.cols));
    Tensor embedded = config_.ablation == Ablation::no_time2vec ? embed_window_positional(window, positional_)
                                                                 : embed_window(window, time2vec_);
    auto encoded = encode(embedded, encoder_, config_.encoder_options());
    auto aggregated = aggregate_multiscale(encoded, decoder_.aggregate);
    auto pooled = global_pool(aggregated);
    auto out = reconstruct(pooled, decoder_, training, rng);
    if (trace) {
        trace->embedded = embedded;
        trace->encoded = encoded;
        trace->aggregated = aggregated;
        trace->pooled = pooled;
    }
    return out;
}

Matrix EdgeConvFormer::reconstruct_window(const Matrix& window) const {
    NoGradGuard no_grad;
    std::mt19937_64 unused(0);
    auto out = forward(window, false, unused);
    Matrix m(window.rows, window.cols);
    std::copy(out.data().begin(), out.data().end(), m.values.begin());
    return m;
}

NamedParams EdgeConvFormer::named_parameters() const {
    NamedParams out;
    if (config_.ablation == Ablation::no_time2vec) {
        out.emplace_back("embed.positional.weight", positional_.weight);
        out.emplace_back("embed.positional.bias", positional_.bias);
    } else {
        out.emplace_back("embed.time2vec.omega", time2vec_.omega);
        out.emplace_back("embed.time2vec.phi", time2vec_.phi);
    }
    const auto opts = config_.encoder_options();
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
        const auto& layer = encoder_[l];
        const std::string p = "encoder." + std::to_string(l);
        if (opts.use_edgeconv) {
            collect(out, p + ".edge.theta", layer.edge.theta);
            collect(out, p + ".edge.phi", layer.edge.phi);
        } else {
            collect(out, p + ".projection", layer.projection);
        }
        if (opts.use_transformer) {
            const auto& a = layer.attention;
            collect(out, p + ".attn.query", a.query);
            collect(out, p + ".attn.key", a.key);
            collect(out, p + ".attn.value", a.value);
            collect(out, p + ".attn.output", a.output);
            collect(out, p + ".attn.norm1", a.norm1);
            collect(out, p + ".attn.ffn1", a.ffn1);
            collect(out, p + ".attn.ffn2", a.ffn2);
            collect(out, p + ".attn.norm2", a.norm2);
        }
    }
    collect(out, "decoder.aggregate", decoder_.aggregate);
    for (std::size_t i = 0; i < decoder_.hidden.size(); ++i) {
        collect(out, "decoder.fc" + std::to_string(i + 1), decoder_.hidden[i]);
        collect(out, "decoder.norm" + std::to_string(i + 1), decoder_.norms[i]);
    }
    collect(out, "decoder.head", decoder_.head);
    return out;
}

std::vector<Tensor> EdgeConvFormer::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::size_t EdgeConvFormer::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

void EdgeConvFormer::zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
}

Checkpoint make_checkpoint(const EdgeConvFormer& model) {
    Checkpoint ck;
    ck.config = model.config();
    for (const auto& [name, t] : model.named_parameters()) {
        ck.names.push_back(name);
        ck.shapes.push_back(t.shape());
        ck.values.emplace_back(t.data().begin(), t.data().end());
    }
    return ck;
}

void load_parameters(EdgeConvFormer& model, const Checkpoint& checkpoint) {
    if (!(model.config() == checkpoint.config)) throw config_error("checkpoint was saved for a different architecture");
    auto params = model.named_parameters();
    if (params.size() != checkpoint.names.size())
        throw config_error("checkpoint has " + std::to_string(checkpoint.names.size()) + " tensors, model " +
                           std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, t] = params[i];
        if (name != checkpoint.names[i] || t.shape() != checkpoint.shapes[i])
            throw config_error("checkpoint tensor " + checkpoint.names[i] + " " + to_string(checkpoint.shapes[i]) +
                               " does not match " + name + " " + to_string(t.shape()));
        auto dst = t.mutable_data();
        std::copy(checkpoint.values[i].begin(), checkpoint.values[i].end(), dst.begin());
    }
}

namespace {

constexpr char kMagic[8] = {'E', 'C', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw io_error("cannot write " + path.string());
    }
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void sizes(const std::vector<std::size_t>& v) {
        u64(v.size());
        for (auto x : v) u64(x);
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void finish() {
        out_.flush();
        if (!out_) throw io_error("write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path.string()) {
        if (!in_) throw io_error("cannot open " + path_);
    }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw parse_error(path_ + ": truncated checkpoint");
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::size_t count() {
        const auto n = u64();
        if (n > (std::uint64_t{1} << 32)) throw parse_error(path_ + ": corrupt length field");
        return static_cast<std::size_t>(n);
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        std::string s(count(), '\0');
        raw(s.data(), s.size());
        return s;
    }
    std::vector<std::size_t> sizes() {
        std::vector<std::size_t> v(count());
        for (auto& x : v) x = static_cast<std::size_t>(u64());
        return v;
    }
    std::vector<double> doubles() {
        std::vector<double> v(count());
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    Writer w(path);
    w.raw(kMagic, sizeof kMagic);
    w.u64(kVersion);
    const auto& c = ck.config;
    w.u64(c.sensors);
    w.u64(c.periodic);
    w.sizes(c.layer_dims);
    w.u64(c.aggregate_dim);
    w.sizes(c.fc_dims);
    w.u64(c.heads);
    w.u64(c.knn_k);
    w.f64(c.dropout);
    w.f64(c.leaky_slope);
    w.str(to_string(c.ablation));
    w.u64(ck.window_length);
    w.u64(ck.sensor_names.size());
    for (const auto& s : ck.sensor_names) w.str(s);
    w.u64(static_cast<std::uint64_t>(ck.stats.kind));
    w.doubles(ck.stats.min);
    w.doubles(ck.stats.max);
    w.doubles(ck.stats.mean);
    w.doubles(ck.stats.stddev);
    w.u64(ck.rolling_init.rows);
    w.u64(ck.rolling_init.cols);
    w.doubles(ck.rolling_init.values);
    w.u64(ck.names.size());
    for (std::size_t i = 0; i < ck.names.size(); ++i) {
        w.str(ck.names[i]);
        w.sizes(ck.shapes[i]);
        w.doubles(ck.values[i]);
    }
    w.u64(ck.optimizer ? 1 : 0);
    if (ck.optimizer) {
        const auto& o = *ck.optimizer;
        w.f64(o.lr);
        w.f64(o.beta1);
        w.f64(o.beta2);
        w.f64(o.eps);
        w.u64(o.step_count);
        w.u64(o.first_moment.size());
        for (std::size_t i = 0; i < o.first_moment.size(); ++i) {
            w.doubles(o.first_moment[i]);
            w.doubles(o.second_moment[i]);
        }
    }
    w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw parse_error(path.string() + ": not a checkpoint file");
    const auto version = r.u64();
    if (version != kVersion)
        throw parse_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    auto& c = ck.config;
    c.sensors = r.u64();
    c.periodic = r.u64();
    c.layer_dims = r.sizes();
    c.aggregate_dim = r.u64();
    c.fc_dims = r.sizes();
    c.heads = r.u64();
    c.knn_k = r.u64();
    c.dropout = r.f64();
    c.leaky_slope = r.f64();
    c.ablation = parse_ablation(r.str());
    ck.window_length = r.u64();
    ck.sensor_names.resize(r.count());
    for (auto& s : ck.sensor_names) s = r.str();
    const auto kind = r.u64();
    if (kind > 1) throw parse_error("checkpoint has unknown normalization kind " + std::to_string(kind));
    ck.stats.kind = static_cast<Normalization>(kind);
    ck.stats.min = r.doubles();
    ck.stats.max = r.doubles();
    ck.stats.mean = r.doubles();
    ck.stats.stddev = r.doubles();
    ck.rolling_init.rows = r.u64();
    ck.rolling_init.cols = r.u64();
    ck.rolling_init.values = r.doubles();
    if (ck.rolling_init.values.size() != ck.rolling_init.rows * ck.rolling_init.cols)
        throw parse_error(path.string() + ": rolling-init block size mismatch");
    const auto n = r.count();
    for (std::size_t i = 0; i < n; ++i) {
        ck.names.push_back(r.str());
        ck.shapes.push_back(r.sizes());
        ck.values.push_back(r.doubles());
        if (numel(ck.shapes.back()) != ck.values.back().size())
            throw parse_error(path.string() + ": tensor " + ck.names.back() + " size mismatch");
    }
    if (r.u64() != 0) {
        AdamState o;
        o.lr = r.f64();
        o.beta1 = r.f64();
        o.beta2 = r.f64();
        o.eps = r.f64();
        o.step_count = r.u64();
        const auto m = r.count();
        for (std::size_t i = 0; i < m; ++i) {
            o.first_moment.push_back(r.doubles());
            o.second_moment.push_back(r.doubles());
        }
        ck.optimizer = std::move(o);
    }
    return ck;
}

}  // namespace ecf
