#include "compass/tiny_backend.hpp"

#include <fstream>

#include "compass/nn/beam_search.hpp"

namespace compass {

TinySeq2SeqBackend::TinySeq2SeqBackend(BackendManifest manifest, nn::Vocab vocab,
                                       std::unique_ptr<nn::Seq2SeqTransformer> model)
    : manifest_(std::move(manifest)), vocab_(std::move(vocab)), model_(std::move(model)) {
    if (!vocab_.specials_are_atomic()) {
        throw Error(ErrorCode::BackendUnavailable, "tokenizer splits a registered marker");
    }
}

GenerationResult TinySeq2SeqBackend::generate(std::string_view input, const GenerationParams& params) {
    params.validate();
    GenerationResult result;
    std::vector<int> source = vocab_.encode(input);
    source.push_back(nn::Vocab::kEos);
    const auto limit = static_cast<std::size_t>(std::min(params.max_input_length, model_->config().max_positions));
    if (source.size() > limit) {
        if (!params.truncate_input) {
            throw Error(ErrorCode::InputTooLong, std::to_string(source.size()) + " tokens > " + std::to_string(limit));
        }
        result.diagnostics.push_back({"InputTruncated", "input truncated from " + std::to_string(source.size()) +
                                                            " to " + std::to_string(limit) + " tokens"});
        source.resize(limit);
        source.back() = nn::Vocab::kEos;
    }
    nn::BeamConfig beam;
    beam.beam_size = params.beam_size;
    beam.num_return = params.beam_size;
    beam.max_length = params.max_length;
    beam.min_length = params.min_length;
    beam.length_penalty = params.length_penalty;
    beam.bos = nn::Vocab::kBos;
    beam.eos = nn::Vocab::kEos;
    for (const auto& hyp : nn::beam_search(*model_, source, beam)) {
        result.candidates.push_back({vocab_.decode(hyp.tokens), hyp.score});
    }
    result.candidates = finalize_candidates(std::move(result.candidates), params.num_candidates);
    return result;
}

std::unique_ptr<TinySeq2SeqBackend> load_tiny_backend(const std::filesystem::path& dir) {
    try {
        std::ifstream mf(dir / "manifest.json");
        if (!mf) throw Error(ErrorCode::BackendUnavailable, "missing manifest in " + dir.string());
        const auto j = nlohmann::json::parse(mf);
        BackendManifest manifest = BackendManifest::from_json(j);
        if (manifest.checkpoint.empty()) manifest.checkpoint = dir.string();
        std::ifstream vf(dir / "vocab.json");
        if (!vf) throw Error(ErrorCode::BackendUnavailable, "missing vocab.json in " + dir.string());
        nn::Vocab vocab = nn::Vocab::from_json(nlohmann::json::parse(vf));
        for (const auto& marker : {manifest.markers.missing, manifest.markers.completion}) {
            const auto& specials = vocab.specials();
            if (std::find(specials.begin(), specials.end(), marker) == specials.end()) {
                throw Error(ErrorCode::BackendUnavailable, "marker '" + marker + "' not registered in vocab");
            }
        }
        const auto config = nn::ModelConfig::from_json(j.at("model"));
        auto model = std::make_unique<nn::Seq2SeqTransformer>(config, 0);
        model->load_weights(dir / "weights.bin");
        return std::make_unique<TinySeq2SeqBackend>(std::move(manifest), std::move(vocab), std::move(model));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::BackendUnavailable, "cannot load " + dir.string() + ": " + e.what());
    }
}

void save_tiny_checkpoint(const std::filesystem::path& dir, const BackendManifest& manifest, const nn::Vocab& vocab,
                          const nn::Seq2SeqTransformer& model) {
    std::filesystem::create_directories(dir);
    nlohmann::json j = manifest.to_json();
    j["kind"] = "tiny_seq2seq";
    j["model"] = model.config().to_json();
    {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << j.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "vocab.json", std::ios::trunc);
        out << vocab.to_json().dump() << '\n';
    }
    model.save_weights(dir / "weights.bin");
}

}  // namespace compass
