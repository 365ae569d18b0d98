#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ecf/adam.hpp"
#include "ecf/data.hpp"
#include "ecf/decoder.hpp"
#include "ecf/embedding.hpp"
#include "ecf/encoder.hpp"

namespace ecf {

enum class Ablation { none, no_time2vec, no_edgeconv, no_transformer };

const char* to_string(Ablation ablation);
Ablation parse_ablation(const std::string& text);

/// Architecture. Defaults are the published widths; smaller widths keep the
/// same topology.
struct ModelConfig {
    std::size_t sensors = 1;
    std::size_t periodic = 64;
    std::vector<std::size_t> layer_dims{256, 512, 1024, 1024};
    std::size_t aggregate_dim = 512;
    std::vector<std::size_t> fc_dims{512, 256};
    std::size_t heads = 8;
    std::size_t knn_k = 8;
    double dropout = 0.2;
    double leaky_slope = 0.01;
    Ablation ablation = Ablation::none;

    std::size_t embedding_dim() const;
    EncoderOptions encoder_options() const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Intermediate tensors of one forward pass.
struct ForwardTrace {
    Tensor embedded;              // [l_w, S, d0]
    std::vector<Tensor> encoded;  // [S, l_w, d_l]
    Tensor aggregated;            // [S, l_w, aggregate_dim]
    Tensor pooled;                // [l_w, 2*aggregate_dim]
};

class EdgeConvFormer {
public:
    EdgeConvFormer(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }

    /// [l_w x S] window -> reconstruction [l_w, S].
    Tensor forward(const Matrix& window, bool training, std::mt19937_64& rng, ForwardTrace* trace = nullptr) const;

    /// Inference-mode reconstruction without recording.
    Matrix reconstruct_window(const Matrix& window) const;

    NamedParams named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;

    void zero_grad();

private:
    ModelConfig config_;
    Time2VecParams time2vec_;
    PositionalProjection positional_;
    std::vector<EncoderLayerParams> encoder_;
    DecoderParams decoder_;
};

/// Everything needed to resume training or score new data.
struct Checkpoint {
    ModelConfig config;
    std::size_t window_length = 100;
    std::vector<std::string> sensor_names;
    NormalizationStats stats;
    /// Reconstruction errors of the last training window [l_w x S]; seeds the
    /// rolling statistics used for scoring.
    Matrix rolling_init;
    std::vector<std::string> names;
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> values;
    std::optional<AdamState> optimizer;
};

Checkpoint make_checkpoint(const EdgeConvFormer& model);

/// Copies parameter values into `model`; names and shapes must match.
void load_parameters(EdgeConvFormer& model, const Checkpoint& checkpoint);

/// Versioned little-endian binary container; doubles are stored bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecf
