#include "ueval/mock.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"
#include "ueval/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

namespace ueval {

namespace {

// Deterministic standard normals (Box-Muller over mt19937_64 uniforms);
// std::normal_distribution is implementation-defined, this is not.
std::vector<double> seeded_gaussian(std::uint64_t seed, std::size_t dim) {
    std::mt19937_64 rng(seed);
    auto uniform = [&]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        out[i] = r * std::cos(2.0 * std::numbers::pi * u2);
        if (i + 1 < dim) out[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    return out;
}

std::uint64_t text_seed(std::uint64_t base, const std::string& text) {
    return derive_seed(base, text, 0);
}

}  // namespace

// ---------------------------------------------------------------------------
// SyntheticWorld
// ---------------------------------------------------------------------------

void SyntheticWorld::validate() const {
    if (dim < nearby.size() + 2) {
        throw ConfigError("world.dim must be >= nearby count + 2 (one axis per concept "
                          "plus the drift axis)");
    }
    if (noise_scale < 0.0) throw ConfigError("world.noise_scale must be >= 0");
    if (trim(target.text).empty()) throw ConfigError("world.target.text must be non-empty");
    for (const auto& c : nearby) {
        if (c.drift < 0.0) throw ConfigError("world drift magnitudes must be >= 0");
    }
    for (const auto& a : adv) {
        if (a.kind != "adv_miss" && a.kind != "adv_evoke") {
            throw ConfigError("world adv kind must be adv_miss or adv_evoke");
        }
        if (a.target_hits < 0) throw ConfigError("world adv target_hits must be >= 0");
    }
}

std::vector<double> SyntheticWorld::center(const std::string& text) const {
    std::vector<double> v(dim, 0.0);
    if (text == target.text) {
        v[0] = center_scale;
        return v;
    }
    for (std::size_t i = 0; i < nearby.size(); ++i) {
        if (nearby[i].text == text) {
            v[i + 1] = center_scale;
            return v;
        }
    }
    // Unknown text: stable pseudo-center away from every concept axis.
    auto g = seeded_gaussian(text_seed(seed, text), dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = 2.0 * center_scale + g[i];
    return v;
}

double SyntheticWorld::drift_of(const std::string& concept_text) const {
    if (concept_text == target.text) return target.drift;
    for (const auto& c : nearby) {
        if (c.text == concept_text) return c.drift;
    }
    return 0.0;
}

SyntheticWorld SyntheticWorld::from_json(const nlohmann::json& j) {
    SyntheticWorld w;
    w.seed = j.value("seed", std::uint64_t{0});
    w.dim = j.value("dim", std::size_t{16});
    w.noise_scale = j.value("noise_scale", 0.0);
    w.center_scale = j.value("center_scale", 4.0);
    w.target.text = j.at("target").at("text").get<std::string>();
    w.target.drift = j.at("target").value("drift", 0.0);
    for (const auto& c : j.value("nearby", nlohmann::json::array())) {
        w.nearby.push_back({c.at("text").get<std::string>(), c.value("drift", 0.0)});
    }
    for (const auto& a : j.value("adv", nlohmann::json::array())) {
        w.adv.push_back({a.at("text").get<std::string>(), a.at("kind").get<std::string>(),
                         a.value("target_hits", 0)});
    }
    const nlohmann::json alias = j.value("unlearned_alias", nlohmann::json::object());
    for (const auto& item : alias.items()) {
        w.unlearned_alias[item.key()] = item.value().get<std::string>();
    }
    w.validate();
    return w;
}

SyntheticWorld SyntheticWorld::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read world file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("world file is not valid JSON: " + std::string(e.what()));
    }
    return from_json(j);
}

nlohmann::json SyntheticWorld::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["dim"] = dim;
    j["noise_scale"] = noise_scale;
    j["center_scale"] = center_scale;
    j["target"] = {{"text", target.text}, {"drift", target.drift}};
    j["nearby"] = nlohmann::json::array();
    for (const auto& c : nearby) j["nearby"].push_back({{"text", c.text}, {"drift", c.drift}});
    j["adv"] = nlohmann::json::array();
    for (const auto& a : adv) {
        j["adv"].push_back({{"text", a.text}, {"kind", a.kind}, {"target_hits", a.target_hits}});
    }
    j["unlearned_alias"] = unlearned_alias;
    return j;
}

// ---------------------------------------------------------------------------
// ReplayChatClient
// ---------------------------------------------------------------------------

ReplayChatClient::ReplayChatClient(std::vector<std::string> replies)
    : replies_(std::move(replies)) {}

std::string ReplayChatClient::complete(const ChatRequest& request) {
    std::scoped_lock lock(mu_);
    requests_.push_back(request);
    if (next_ >= replies_.size()) {
        throw ProtocolError("replay fixture exhausted after " + std::to_string(next_) +
                            " replies");
    }
    return replies_[next_++];
}

std::size_t ReplayChatClient::remaining() const {
    std::scoped_lock lock(mu_);
    return replies_.size() - next_;
}

// ---------------------------------------------------------------------------
// SyntheticChatClient
// ---------------------------------------------------------------------------

SyntheticChatClient::SyntheticChatClient(SyntheticWorld world) : world_(std::move(world)) {
    world_.validate();
}

std::size_t SyntheticChatClient::request_count() const {
    std::scoped_lock lock(mu_);
    return request_count_;
}

std::string SyntheticChatClient::complete(const ChatRequest& request) {
    {
        std::scoped_lock lock(mu_);
        ++request_count_;
    }
    std::string user;
    for (const auto& m : request.messages) {
        if (m.role == "user") user = m.content;  // last user message wins
    }

    static const std::regex brainstorm_re(R"(exactly (\d+) strings)");
    static const std::regex item_re(R"(^(\d+)\. (.*)$)");
    std::smatch match;

    if (user.find("item numbers") != std::string::npos) {
        // Re-rank: restore world order.
        std::vector<std::pair<std::size_t, std::string>> items;  // (number, text)
        std::istringstream lines(user);
        std::string line;
        while (std::getline(lines, line)) {
            if (std::regex_match(line, match, item_re)) {
                items.emplace_back(std::stoull(match[1].str()), match[2].str());
            }
        }
        auto priority = [&](const std::string& text) -> std::size_t {
            for (std::size_t i = 0; i < world_.nearby.size(); ++i) {
                if (world_.nearby[i].text == text) return i;
            }
            for (std::size_t i = 0; i < world_.adv.size(); ++i) {
                if (world_.adv[i].text == text) return i;
            }
            return items.size() + 1000;
        };
        std::stable_sort(items.begin(), items.end(),
                         [&](const auto& a, const auto& b) {
                             return priority(a.second) < priority(b.second);
                         });
        nlohmann::json reply = nlohmann::json::array();
        for (const auto& [num, text] : items) reply.push_back(num);
        return reply.dump();
    }

    if (!std::regex_search(user, match, brainstorm_re)) {
        throw ProtocolError("synthetic chat: unrecognized prompt shape");
    }
    const std::size_t n = std::stoull(match[1].str());

    std::vector<std::string> pool;
    if (user.find("misspellings") != std::string::npos) {
        for (const auto& a : world_.adv) {
            if (a.kind == "adv_miss") pool.push_back(a.text);
        }
    } else if (user.find("evoke") != std::string::npos) {
        for (const auto& a : world_.adv) {
            if (a.kind == "adv_evoke") pool.push_back(a.text);
        }
    } else {
        for (const auto& c : world_.nearby) pool.push_back(c.text);
    }
    if (pool.size() < n) {
        throw ProtocolError("synthetic world supplies only " + std::to_string(pool.size()) +
                            " items for a brainstorm of " + std::to_string(n));
    }
    nlohmann::json reply = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) reply.push_back(pool[i]);
    return reply.dump();
}

// ---------------------------------------------------------------------------
// SyntheticImageClient
// ---------------------------------------------------------------------------

SyntheticImageClient::SyntheticImageClient(SyntheticWorld world, ModelRole role,
                                           std::uint64_t master_seed,
                                           std::string caption_template)
    : world_(std::move(world)),
      role_(role),
      master_seed_(master_seed),
      caption_template_(std::move(caption_template)) {
    world_.validate();
}

std::vector<std::uint8_t> SyntheticImageClient::generate(const std::string& prompt,
                                                         std::uint64_t seed,
                                                         const nlohmann::json& params) {
    (void)params;
    auto rendered = [&](const std::string& concept_text) {
        return render_template(caption_template_, "concept", concept_text);
    };

    std::string center_key;
    double drift = 0.0;

    auto depict = [&](const std::string& concept_text) {
        center_key = concept_text;
        if (role_ == ModelRole::Unlearned) {
            drift = world_.drift_of(concept_text);
            if (auto it = world_.unlearned_alias.find(concept_text);
                it != world_.unlearned_alias.end()) {
                center_key = it->second;
            }
        }
    };

    bool matched = false;
    if (prompt == world_.target.text || prompt == rendered(world_.target.text)) {
        depict(world_.target.text);
        matched = true;
    }
    for (const auto& c : world_.nearby) {
        if (matched) break;
        if (prompt == c.text || prompt == rendered(c.text)) {
            depict(c.text);
            matched = true;
        }
    }
    for (const auto& a : world_.adv) {
        if (matched) break;
        if (prompt == a.text || prompt == rendered(a.text)) {
            // Planted outcome: the first target_hits samples circumvent the
            // unlearning and genuinely depict the target (no alias), the
            // rest depict the top nearby concept.
            const std::uint64_t sample_index = seed - master_seed_;
            if (sample_index < static_cast<std::uint64_t>(a.target_hits) ||
                world_.nearby.empty()) {
                center_key = world_.target.text;
                if (role_ == ModelRole::Unlearned) drift = world_.drift_of(center_key);
            } else {
                depict(world_.nearby.front().text);
            }
            matched = true;
        }
    }
    if (!matched) {
        center_key = prompt;
        drift = 0.0;
    }

    nlohmann::json image;
    image["center"] = center_key;
    image["drift"] = drift;
    image["noise_seed"] = derive_seed(world_.seed, prompt, seed);
    const std::string bytes = image.dump();
    return std::vector<std::uint8_t>(bytes.begin(), bytes.end());
}

// ---------------------------------------------------------------------------
// Synthetic perception
// ---------------------------------------------------------------------------

std::vector<double> synthetic_embedding(const SyntheticWorld& world,
                                        std::span<const std::uint8_t> image) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(image.begin(), image.end());
    } catch (const nlohmann::json::parse_error&) {
        throw ContractError("synthetic perception: image bytes are not a synthetic image");
    }
    const std::string center_key = j.at("center").get<std::string>();
    const double drift = j.at("drift").get<double>();
    const std::uint64_t noise_seed = j.at("noise_seed").get<std::uint64_t>();

    std::vector<double> v = world.center(center_key);
    v[world.dim - 1] += drift;  // shared drift axis, orthogonal to all centers
    if (world.noise_scale > 0.0) {
        const auto noise = seeded_gaussian(noise_seed, world.dim);
        for (std::size_t i = 0; i < world.dim; ++i) v[i] += world.noise_scale * noise[i];
    }
    return v;
}

SyntheticEmbeddingClient::SyntheticEmbeddingClient(SyntheticWorld world)
    : world_(std::move(world)) {
    world_.validate();
}

std::vector<double> SyntheticEmbeddingClient::embed(std::span<const std::uint8_t> image) {
    {
        std::scoped_lock lock(mu_);
        ++calls_;
    }
    return synthetic_embedding(world_, image);
}

std::size_t SyntheticEmbeddingClient::call_count() const {
    std::scoped_lock lock(mu_);
    return calls_;
}

SyntheticClassifierClient::SyntheticClassifierClient(SyntheticWorld world,
                                                     std::string caption_template)
    : world_(std::move(world)), caption_template_(std::move(caption_template)) {
    world_.validate();
}

std::vector<double> SyntheticClassifierClient::classify(
    std::span<const std::uint8_t> image, const std::vector<std::string>& rendered_labels) {
    {
        std::scoped_lock lock(mu_);
        ++calls_;
    }
    const auto embedding = synthetic_embedding(world_, image);

    // Map a rendered label back to a world concept center; labels that match
    // no concept land on their own pseudo-center.
    auto center_for = [&](const std::string& rendered) {
        auto matches = [&](const std::string& concept_text) {
            return rendered == concept_text ||
                   rendered == render_template(caption_template_, "label", concept_text);
        };
        if (matches(world_.target.text)) return world_.center(world_.target.text);
        for (const auto& c : world_.nearby) {
            if (matches(c.text)) return world_.center(c.text);
        }
        return world_.center(rendered);
    };

    std::vector<double> scores;
    scores.reserve(rendered_labels.size());
    for (const auto& label : rendered_labels) {
        const auto c = center_for(label);
        double dist2 = 0.0;
        for (std::size_t i = 0; i < world_.dim; ++i) {
            const double d = embedding[i] - c[i];
            dist2 += d * d;
        }
        scores.push_back(-std::sqrt(dist2));
    }
    return scores;
}

std::size_t SyntheticClassifierClient::call_count() const {
    std::scoped_lock lock(mu_);
    return calls_;
}

}  // namespace ueval
