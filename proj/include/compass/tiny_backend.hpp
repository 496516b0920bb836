#pragma once

#include <filesystem>
#include <memory>

#include "compass/backend.hpp"
#include "compass/nn/transformer.hpp"
#include "compass/nn/vocab.hpp"

namespace compass {

// Checkpoint directory layout: manifest.json, vocab.json, weights.bin.
class TinySeq2SeqBackend final : public Backend {
public:
    TinySeq2SeqBackend(BackendManifest manifest, nn::Vocab vocab, std::unique_ptr<nn::Seq2SeqTransformer> model);

    const BackendManifest& manifest() const override { return manifest_; }
    GenerationResult generate(std::string_view input, const GenerationParams& params) override;

    const nn::Vocab& vocab() const { return vocab_; }
    nn::Seq2SeqTransformer& model() { return *model_; }

private:
    BackendManifest manifest_;
    nn::Vocab vocab_;
    std::unique_ptr<nn::Seq2SeqTransformer> model_;
};

std::unique_ptr<TinySeq2SeqBackend> load_tiny_backend(const std::filesystem::path& dir);

// Writes manifest.json (with the model config under "model"), vocab.json
// and weights.bin.
void save_tiny_checkpoint(const std::filesystem::path& dir, const BackendManifest& manifest, const nn::Vocab& vocab,
                          const nn::Seq2SeqTransformer& model);

}  // namespace compass
