#include "compass/synthetic.hpp"

#include <array>

#include "compass/errors.hpp"
#include "compass/rng.hpp"

namespace compass {

namespace {

struct Template {
    const char* between;
    const char* after_item;
};

// "<name><between><item><after_item>"
constexpr std::array<Template, kTemplateSlots> kTemplates = {{
    {" wanted a new ", "."},
    {" saved money for the ", " all month."},
    {" went to the store to look for the ", "."},
    {" finally bought the ", "."},
    {" was happy with the new ", "."},
}};

const std::vector<std::string>& names() {
    static const std::vector<std::string> v = {"Anna", "Ben",  "Carla", "David", "Emma",  "Frank", "Grace",
                                               "Henry", "Ivy", "Jack",  "Kate",  "Liam",  "Mia",   "Noah",
                                               "Olga", "Paul", "Rosa",  "Sam",   "Tina",  "Victor"};
    return v;
}

const std::vector<std::string>& items() {
    static const std::vector<std::string> v = {"bike",  "phone", "guitar", "laptop", "camera", "watch", "jacket",
                                               "lamp",  "piano", "tent",   "kite",   "drone",  "scarf", "radio",
                                               "chair", "boat",  "puppy",  "book",   "hat",    "sofa"};
    return v;
}

class TemplateBackend final : public Backend {
public:
    TemplateBackend(TaskRole role, Markers markers)
        : manifest_{"template", "builtin:template", role, std::move(markers), nlohmann::json::object()} {}

    const BackendManifest& manifest() const override { return manifest_; }

    GenerationResult generate(std::string_view input, const GenerationParams& params) override {
        params.validate();
        GenerationResult result;
        result.candidates.push_back({respond(input), 0.0});
        return result;
    }

private:
    struct Known {
        std::string name;
        std::string item;
    };

    // Name and item shared by the sentences; nullopt when there are none or
    // any sentence is not templated.
    static std::optional<Known> identify(const std::vector<std::string>& sentences) {
        std::optional<Known> known;
        for (const auto& s : sentences) {
            const auto t = parse_template(s);
            if (!t) return std::nullopt;
            if (!known) known = Known{t->name, t->item};
        }
        return known;
    }

    std::string respond(std::string_view input) const {
        const auto& mk = manifest_.markers;
        switch (manifest_.role) {
            case TaskRole::vnmpp: {
                const auto sentences = split_sentences(input);
                std::array<bool, kTemplateSlots> present{};
                for (const auto& s : sentences) {
                    const auto t = parse_template(s);
                    if (!t) return std::string(input);
                    present[static_cast<std::size_t>(t->slot)] = true;
                }
                MaskedStory m;
                std::size_t next = 0;
                for (int slot = 0; slot < kTemplateSlots; ++slot) {
                    if (present[static_cast<std::size_t>(slot)]) {
                        m.elements.push_back(MaskedElement::sentence(sentences[next++]));
                    } else {
                        m.elements.push_back(MaskedElement::make_gap());
                    }
                }
                return encode_masked(m, mk.missing);
            }
            case TaskRole::sc:
            case TaskRole::sc_v2: {
                const auto parsed = parse_masked(input, mk.missing).story;
                const auto known = identify(parsed.context());
                const Known k = known.value_or(Known{names().front(), items().front()});
                std::vector<std::string> fills;
                std::vector<std::string> full;
                for (std::size_t e = 0; e < parsed.elements.size(); ++e) {
                    if (!parsed.elements[e].gap) {
                        full.push_back(parsed.elements[e].text);
                        continue;
                    }
                    const int slot = static_cast<int>(e) % kTemplateSlots;
                    fills.push_back(render_template(slot, k.name, k.item));
                    full.push_back(fills.back());
                }
                if (manifest_.role == TaskRole::sc_v2) return encode_completion_target(fills, mk.completion);
                return render_story(Story{"", full, "en"});
            }
            case TaskRole::end_to_end: {
                const auto sentences = split_sentences(input);
                const auto known = identify(sentences);
                if (!known) return std::string(input);
                std::array<std::optional<std::string>, kTemplateSlots> slots;
                for (const auto& s : sentences) slots[static_cast<std::size_t>(parse_template(s)->slot)] = s;
                std::vector<std::string> full;
                for (int slot = 0; slot < kTemplateSlots; ++slot) {
                    const auto& have = slots[static_cast<std::size_t>(slot)];
                    full.push_back(have ? *have : render_template(slot, known->name, known->item));
                }
                return render_story(Story{"", full, "en"});
            }
        }
        return std::string(input);
    }

    BackendManifest manifest_;
};

}  // namespace

std::string render_template(int slot, const std::string& name, const std::string& item) {
    if (slot < 0 || slot >= kTemplateSlots) throw Error(ErrorCode::IndexOutOfRange, "template slot out of range");
    const auto& t = kTemplates[static_cast<std::size_t>(slot)];
    return name + t.between + item + t.after_item;
}

std::optional<TemplateSentence> parse_template(const std::string& sentence) {
    for (int slot = 0; slot < kTemplateSlots; ++slot) {
        const auto& t = kTemplates[static_cast<std::size_t>(slot)];
        const std::string between = t.between;
        const std::string after = t.after_item;
        const auto b = sentence.find(between);
        if (b == std::string::npos || b == 0) continue;
        if (sentence.size() < b + between.size() + after.size()) continue;
        if (sentence.compare(sentence.size() - after.size(), after.size(), after) != 0) continue;
        std::string name = sentence.substr(0, b);
        std::string item = sentence.substr(b + between.size(), sentence.size() - after.size() - b - between.size());
        if (name.empty() || item.empty() || name.find(' ') != std::string::npos ||
            item.find(' ') != std::string::npos) {
            continue;
        }
        return TemplateSentence{slot, std::move(name), std::move(item)};
    }
    return std::nullopt;
}

Corpus make_templated_corpus(int count, std::uint64_t seed, Split split, const std::string& prefix) {
    Corpus corpus{split, "templated", {}};
    Rng rng = Rng::derive(seed, {"templated-corpus"});
    for (int i = 0; i < count; ++i) {
        const auto& name = names()[rng.below(names().size())];
        const auto& item = items()[rng.below(items().size())];
        Story story{prefix + std::to_string(i), {}, "en"};
        for (int slot = 0; slot < kTemplateSlots; ++slot) story.sentences.push_back(render_template(slot, name, item));
        corpus.stories.push_back(std::move(story));
    }
    return corpus;
}

std::unique_ptr<Backend> make_template_backend(TaskRole role, Markers markers) {
    return std::make_unique<TemplateBackend>(role, std::move(markers));
}

}  // namespace compass
