#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compass/backend.hpp"
#include "compass/story.hpp"

namespace compass {

// Five-slot templated stories: every sentence names the protagonist and the
// item, so any single surviving sentence identifies both.
inline constexpr int kTemplateSlots = 5;

struct TemplateSentence {
    int slot = 0;
    std::string name;
    std::string item;
};

std::string render_template(int slot, const std::string& name, const std::string& item);
std::optional<TemplateSentence> parse_template(const std::string& sentence);

// story_id = prefix + index; deterministic in seed.
Corpus make_templated_corpus(int count, std::uint64_t seed, Split split, const std::string& prefix = "t");

// Deterministic backends that solve each role analytically on templated
// stories and echo anything they do not recognize. One candidate, score 0.
std::unique_ptr<Backend> make_template_backend(TaskRole role, Markers markers = {});

}  // namespace compass
