#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/nn/autograd.hpp"
#include "compass/rng.hpp"

namespace compass::nn {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int heads = 4;
    int ffn = 128;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int max_positions = 192;
    double init_std = 0.02;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

struct NamedParameter {
    std::string name;
    Var var;
};

// Pre-LayerNorm encoder-decoder transformer with learned positions and
// GELU feed-forward blocks. Sequences are processed one at a time.
class Seq2SeqTransformer {
public:
    Seq2SeqTransformer(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::vector<NamedParameter>& parameters() { return params_; }
    const std::vector<NamedParameter>& parameters() const { return params_; }

    // Teacher-forced mean token NLL; decoder_in starts with BOS and labels
    // are decoder_in shifted left with EOS appended.
    Var loss(const std::vector<int>& source, const std::vector<int>& decoder_in, const std::vector<int>& labels);

    Var encode(const std::vector<int>& source);
    // Logits for every decoder position.
    Var decode(const Var& memory, const std::vector<int>& decoder_in);

    // Log-probabilities of the next token after prefix. No gradients.
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> next_log_probs(const Var& memory, const std::vector<int>& prefix);

    void save_weights(const std::filesystem::path& path) const;
    void load_weights(const std::filesystem::path& path);

    std::size_t parameter_count() const;

private:
    struct Attention {
        Var wq, bq, wk, bk, wv, bv, wo, bo;
    };
    struct FeedForward {
        Var w1, b1, w2, b2;
    };
    struct Norm {
        Var gamma, beta;
    };
    struct EncoderLayer {
        Norm ln_attn;
        Attention self_attn;
        Norm ln_ffn;
        FeedForward ffn;
    };
    struct DecoderLayer {
        Norm ln_self;
        Attention self_attn;
        Norm ln_cross;
        Attention cross_attn;
        Norm ln_ffn;
        FeedForward ffn;
    };

    Var weight(const std::string& name, int rows, int cols);
    Var zeros(const std::string& name, int rows, int cols);
    Var ones(const std::string& name, int rows, int cols);
    Attention make_attention(const std::string& prefix);
    FeedForward make_ffn(const std::string& prefix);
    Norm make_norm(const std::string& prefix);

    Var attend(const Attention& a, const Var& query_in, const Var& kv_in, const Mat* mask) const;
    Var feed_forward(const FeedForward& f, const Var& x) const;
    Var norm(const Norm& n, const Var& x) const;
    Var embed(const std::vector<int>& ids, const Var& positions) const;

    ModelConfig config_;
    std::vector<NamedParameter> params_;
    Rng init_rng_;
    Var token_embedding_;
    Var encoder_positions_;
    Var decoder_positions_;
    std::vector<EncoderLayer> encoder_;
    Norm encoder_final_;
    std::vector<DecoderLayer> decoder_;
    Norm decoder_final_;
    Var out_w_, out_b_;
};

}  // namespace compass::nn
