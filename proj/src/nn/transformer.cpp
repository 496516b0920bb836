#include "compass/nn/transformer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace compass::nn {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'P', 'S', 'N', 'N', '0', '1'};

Mat causal_mask(Eigen::Index n) {
    Mat mask = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) mask(i, j) = -1e9f;
    }
    return mask;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated weights file");
    return v;
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
    return {{"vocab_size", vocab_size},         {"d_model", d_model},
            {"heads", heads},                   {"ffn", ffn},
            {"encoder_layers", encoder_layers}, {"decoder_layers", decoder_layers},
            {"max_positions", max_positions},   {"init_std", init_std}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.ffn = j.value("ffn", c.ffn);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.init_std = j.value("init_std", c.init_std);
    return c;
}

Seq2SeqTransformer::Seq2SeqTransformer(const ModelConfig& config, std::uint64_t seed)
    : config_(config), init_rng_(Rng::derive(seed, {"transformer-init"})) {
    if (config_.vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
    if (config_.d_model % config_.heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
    const int d = config_.d_model;
    token_embedding_ = weight("embed.tokens", config_.vocab_size, d);
    encoder_positions_ = weight("embed.encoder_positions", config_.max_positions, d);
    decoder_positions_ = weight("embed.decoder_positions", config_.max_positions, d);
    for (int l = 0; l < config_.encoder_layers; ++l) {
        const std::string p = "encoder." + std::to_string(l) + ".";
        EncoderLayer layer;
        layer.ln_attn = make_norm(p + "ln_attn");
        layer.self_attn = make_attention(p + "self_attn");
        layer.ln_ffn = make_norm(p + "ln_ffn");
        layer.ffn = make_ffn(p + "ffn");
        encoder_.push_back(std::move(layer));
    }
    encoder_final_ = make_norm("encoder.ln_final");
    for (int l = 0; l < config_.decoder_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l) + ".";
        DecoderLayer layer;
        layer.ln_self = make_norm(p + "ln_self");
        layer.self_attn = make_attention(p + "self_attn");
        layer.ln_cross = make_norm(p + "ln_cross");
        layer.cross_attn = make_attention(p + "cross_attn");
        layer.ln_ffn = make_norm(p + "ln_ffn");
        layer.ffn = make_ffn(p + "ffn");
        decoder_.push_back(std::move(layer));
    }
    decoder_final_ = make_norm("decoder.ln_final");
    out_w_ = weight("lm_head.weight", d, config_.vocab_size);
    out_b_ = zeros("lm_head.bias", 1, config_.vocab_size);
}

Var Seq2SeqTransformer::weight(const std::string& name, int rows, int cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Scalar>(init_rng_.normal(0.0, config_.init_std));
    }
    Var v = parameter(std::move(m));
    params_.push_back({name, v});
    return v;
}

Var Seq2SeqTransformer::zeros(const std::string& name, int rows, int cols) {
    Var v = parameter(Mat::Zero(rows, cols));
    params_.push_back({name, v});
    return v;
}

Var Seq2SeqTransformer::ones(const std::string& name, int rows, int cols) {
    Var v = parameter(Mat::Ones(rows, cols));
    params_.push_back({name, v});
    return v;
}

Seq2SeqTransformer::Attention Seq2SeqTransformer::make_attention(const std::string& prefix) {
    const int d = config_.d_model;
    Attention a;
    a.wq = weight(prefix + ".q.weight", d, d);
    a.bq = zeros(prefix + ".q.bias", 1, d);
    a.wk = weight(prefix + ".k.weight", d, d);
    a.bk = zeros(prefix + ".k.bias", 1, d);
    a.wv = weight(prefix + ".v.weight", d, d);
    a.bv = zeros(prefix + ".v.bias", 1, d);
    a.wo = weight(prefix + ".out.weight", d, d);
    a.bo = zeros(prefix + ".out.bias", 1, d);
    return a;
}

Seq2SeqTransformer::FeedForward Seq2SeqTransformer::make_ffn(const std::string& prefix) {
    FeedForward f;
    f.w1 = weight(prefix + ".fc1.weight", config_.d_model, config_.ffn);
    f.b1 = zeros(prefix + ".fc1.bias", 1, config_.ffn);
    f.w2 = weight(prefix + ".fc2.weight", config_.ffn, config_.d_model);
    f.b2 = zeros(prefix + ".fc2.bias", 1, config_.d_model);
    return f;
}

Seq2SeqTransformer::Norm Seq2SeqTransformer::make_norm(const std::string& prefix) {
    return {ones(prefix + ".gamma", 1, config_.d_model), zeros(prefix + ".beta", 1, config_.d_model)};
}

Var Seq2SeqTransformer::attend(const Attention& a, const Var& query_in, const Var& kv_in, const Mat* mask) const {
    const int heads = config_.heads;
    const int dh = config_.d_model / heads;
    const auto inv_sqrt = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));
    Var q = add_row(matmul(query_in, a.wq), a.bq);
    Var k = add_row(matmul(kv_in, a.wk), a.bk);
    Var v = add_row(matmul(kv_in, a.wv), a.bv);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * dh, dh);
        Var kh = slice_cols(k, h * dh, dh);
        Var vh = slice_cols(v, h * dh, dh);
        Var probs = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
        outs.push_back(matmul(probs, vh));
    }
    Var merged = heads == 1 ? outs.front() : concat_cols(outs);
    return add_row(matmul(merged, a.wo), a.bo);
}

Var Seq2SeqTransformer::feed_forward(const FeedForward& f, const Var& x) const {
    return add_row(matmul(gelu(add_row(matmul(x, f.w1), f.b1)), f.w2), f.b2);
}

Var Seq2SeqTransformer::norm(const Norm& n, const Var& x) const { return layer_norm(x, n.gamma, n.beta); }

Var Seq2SeqTransformer::embed(const std::vector<int>& ids, const Var& positions) const {
    if (static_cast<int>(ids.size()) > config_.max_positions) {
        throw std::invalid_argument("sequence longer than max_positions");
    }
    std::vector<int> pos(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
    return add(embedding(token_embedding_, ids), embedding(positions, pos));
}

Var Seq2SeqTransformer::encode(const std::vector<int>& source) {
    Var x = embed(source, encoder_positions_);
    for (const auto& layer : encoder_) {
        Var h = norm(layer.ln_attn, x);
        x = add(x, attend(layer.self_attn, h, h, nullptr));
        x = add(x, feed_forward(layer.ffn, norm(layer.ln_ffn, x)));
    }
    return norm(encoder_final_, x);
}

Var Seq2SeqTransformer::decode(const Var& memory, const std::vector<int>& decoder_in) {
    Var x = embed(decoder_in, decoder_positions_);
    const Mat mask = causal_mask(static_cast<Eigen::Index>(decoder_in.size()));
    for (const auto& layer : decoder_) {
        Var h = norm(layer.ln_self, x);
        x = add(x, attend(layer.self_attn, h, h, &mask));
        x = add(x, attend(layer.cross_attn, norm(layer.ln_cross, x), memory, nullptr));
        x = add(x, feed_forward(layer.ffn, norm(layer.ln_ffn, x)));
    }
    return add_row(matmul(norm(decoder_final_, x), out_w_), out_b_);
}

Var Seq2SeqTransformer::loss(const std::vector<int>& source, const std::vector<int>& decoder_in,
                             const std::vector<int>& labels) {
    Var memory = encode(source);
    return cross_entropy(decode(memory, decoder_in), labels);
}

Eigen::Matrix<Scalar, 1, Eigen::Dynamic> Seq2SeqTransformer::next_log_probs(const Var& memory,
                                                                          const std::vector<int>& prefix) {
    NoGradGuard guard;
    Var logits = decode(memory, prefix);
    Mat last = logits.value().bottomRows(1);
    return log_softmax_rows(last).row(0);
}

std::size_t Seq2SeqTransformer::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
    return n;
}

void Seq2SeqTransformer::save_weights(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
    for (const auto& p : params_) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.var.rows()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.var.cols()));
        out.write(reinterpret_cast<const char*>(p.var.value().data()),
                  static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.var.value().size())));
    }
}

void Seq2SeqTransformer::load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("bad weights header");
    const auto count = read_pod<std::uint32_t>(in);
    if (count != params_.size()) throw std::runtime_error("parameter count mismatch");
    for (auto& p : params_) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_pod<std::uint32_t>(in);
        const auto cols = read_pod<std::uint32_t>(in);
        if (name != p.name || rows != p.var.rows() || cols != p.var.cols()) {
            throw std::runtime_error("weights layout mismatch at " + p.name);
        }
        Mat& m = p.var.mutable_value();
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
        if (!in) throw std::runtime_error("truncated weights file");
    }
}

}  // namespace compass::nn
