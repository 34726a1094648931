// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "mmdg/hashing.hpp"
#include "mmdg/png.hpp"

namespace mmdg {

using json = nlohmann::json;

namespace {

constexpr std::string_view kMockKeyword = "mmdg-mock";
constexpr double kUnsafeWeight = 0.6;

double unit_interval(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::vector<double> hash_vector(std::uint64_t seed, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    for (std::size_t i = 1; i < dim; ++i) v[i] = 2.0 * unit_interval(splitmix64(seed + i)) - 1.0;
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void scale_to_unit(std::vector<double>& v) {
    const double n = std::sqrt(dot(v, v));
    if (n > 0) {
        for (double& x : v) x /= n;
    }
}

// v -= (v.u) u for each unit u in basis, then normalize.
void orthonormalize(std::vector<double>& v, const std::vector<const std::vector<double>*>& basis) {
    for (const auto* u : basis) {
        const double p = dot(v, *u);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * (*u)[i];
    }
    scale_to_unit(v);
}

void throw_scripted(int status, std::string_view what) {
    if (status >= 200 && status < 300) return;
    const std::string msg = std::string(what) + ": scripted status " + std::to_string(status);
    if (status == 408) throw Error(ErrorCode::Timeout, msg);
    if (status == 429 || status >= 500) throw Error(ErrorCode::TransportError, msg);
    throw Error(ErrorCode::BackendRefusal, msg);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

ScriptedReply lookup_chat(const MockFixture& fx, const ChatRequest& req) {
    const auto key = mock_chat_key(req.user_text);
    if (auto it = fx.chat.find(req.prompt_kind + ":" + key); it != fx.chat.end()) return it->second;
    if (auto it = fx.chat.find(key); it != fx.chat.end()) return it->second;
    return {heuristic_completion(req), 200};
}

struct ResolvedImage {
    double clip;
    double aesthetic;
    std::optional<std::string> unsafe_concept;
};

ResolvedImage resolve_image(const MockFixture& fx, const ImageRequest& req) {
    ImageProfile profile;
    if (auto it = fx.images.find(req.description); it != fx.images.end()) profile = it->second;
    throw_scripted(profile.status, "mock image backend");
    auto draw = [&](std::pair<double, double> range, std::string_view salt) {
        const auto h = derive_seed(req.seed, {req.description, req.backend_model_id, salt});
        return range.first + (range.second - range.first) * unit_interval(h);
    };
    return {profile.clip.value_or(draw(fx.default_clip, "clip")),
            profile.aesthetic.value_or(draw(fx.default_aesthetic, "aesthetic")), profile.unsafe_concept};
}

class MockChat final : public ChatBackend {
public:
    explicit MockChat(std::shared_ptr<const MockFixture> fx) : fx_(std::move(fx)) {}

    ChatResponse complete(const ChatRequest& req) override {
        auto reply = lookup_chat(*fx_, req);
        throw_scripted(reply.status, "mock chat backend");
        ChatResponse out;
        out.completion_text = std::move(reply.completion);
        out.usage["prompt_tokens"] = static_cast<long long>((req.system_text.size() + req.user_text.size()) / 4);
        out.usage["completion_tokens"] = static_cast<long long>(out.completion_text.size() / 4);
        return out;
    }

private:
    std::shared_ptr<const MockFixture> fx_;
};

class MockImage final : public ImageBackend {
public:
    explicit MockImage(std::shared_ptr<const MockFixture> fx) : fx_(std::move(fx)) {}

    ImagePayload generate(const ImageRequest& req) override {
        const auto resolved = resolve_image(*fx_, req);
        json meta{
            {"description", req.description},
            {"seed", req.seed},
            {"model", req.backend_model_id},
            {"width", req.width},
            {"height", req.height},
            {"clip", resolved.clip},
            {"aesthetic", resolved.aesthetic},
        };
        if (resolved.unsafe_concept) meta["unsafe"] = *resolved.unsafe_concept;

        constexpr int kSide = 16;
        std::array<std::uint8_t, kSide * kSide * 3> rgb{};
        const auto base = derive_seed(req.seed, {req.description, req.backend_model_id, "pixels"});
        for (std::size_t i = 0; i < rgb.size(); ++i) {
            rgb[i] = static_cast<std::uint8_t>(splitmix64(base + i / 12) >> (8 * (i % 3)));
        }
        ImagePayload out;
        out.bytes = png::encode_rgb(kSide, kSide, rgb, {{std::string(kMockKeyword), meta.dump()}});
        out.media_type = "image/png";
        return out;
    }

private:
    std::shared_ptr<const MockFixture> fx_;
};

class MockEmbed final : public EmbedBackend {
public:
    explicit MockEmbed(std::shared_ptr<const MockFixture> fx) : fx_(std::move(fx)) {}

    std::vector<double> embed_text(std::string_view text) override {
        return mock_text_vector(text, fx_->dim);
    }

    std::vector<double> embed_image(const ImagePayload& image) override {
        const std::size_t dim = fx_->dim;
        json meta;
        if (auto text = png::find_text(image.bytes, kMockKeyword)) {
            meta = json::parse(*text, nullptr, false);
        }
        if (!meta.is_object() || !meta.contains("description")) {
            auto v = hash_vector(fnv1a64(image.bytes), dim);
            scale_to_unit(v);
            return v;
        }

        const auto description = meta["description"].get<std::string>();
        const double clip = meta.value("clip", 0.0);
        const double aesthetic = std::max(0.0, meta.value("aesthetic", 0.0));

        auto t = mock_text_vector(description, dim);
        scale_to_unit(t);
        std::vector<double> axis(dim, 0.0);
        axis[0] = 1.0;
        std::vector<const std::vector<double>*> basis{&t, &axis};

        std::vector<double> concept_dir;
        double unsafe_weight = 0.0;
        if (meta.contains("unsafe")) {
            concept_dir = mock_text_vector(meta["unsafe"].get<std::string>(), dim);
            orthonormalize(concept_dir, basis);
            basis.push_back(&concept_dir);
            unsafe_weight = kUnsafeWeight;
        }
        auto noise = hash_vector(derive_seed(meta.value("seed", std::uint64_t{0}), {description, "noise"}), dim);
        orthonormalize(noise, basis);

        const double used = clip * clip + aesthetic * aesthetic + unsafe_weight * unsafe_weight;
        const double rest = used < 1.0 ? std::sqrt(1.0 - used) : 0.0;
        std::vector<double> v(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            v[i] = clip * t[i] + aesthetic * axis[i] + rest * noise[i];
            if (unsafe_weight > 0) v[i] += unsafe_weight * concept_dir[i];
        }
        return v;
    }

private:
    std::shared_ptr<const MockFixture> fx_;
};

bool has_visual_cue(std::string_view text) {
    static constexpr std::array<std::string_view, 16> kCues{
        "photo", "picture", " pic", "look at", "here's", "here is", "check out", "my new",
        "grew",  "made",    "bought", "cooked", "outfit", "selfie", "view", "painted"};
    const auto t = " " + lower(text);
    return std::any_of(kCues.begin(), kCues.end(), [&](auto cue) { return t.find(cue) != std::string::npos; });
}

std::string short_description(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string word, out;
    for (int n = 0; n < 10 && (in >> word); ++n) {
        if (!out.empty()) out += ' ';
        out += word;
    }
    while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out.empty() ? std::string("a photo") : out;
}

}  // namespace

std::string mock_chat_key(std::string_view user_text) { return hex64(fnv1a64(user_text)); }

std::vector<double> mock_text_vector(std::string_view text, std::size_t dim) {
    return hash_vector(fnv1a64(text, fnv1a64("mmdg-text")), dim);
}

std::string heuristic_completion(const ChatRequest& req) {
    if (req.prompt_kind == "feedback") {
        constexpr std::string_view kIndex = "image description for Utterance ";
        constexpr std::string_view kPrior = "Previous description: ";
        const auto at = req.user_text.find(kIndex);
        const auto prior_at = req.user_text.find(kPrior);
        if (at == std::string::npos || prior_at == std::string::npos) return "";
        std::size_t p = at + kIndex.size();
        std::string digits;
        while (p < req.user_text.size() && std::isdigit(static_cast<unsigned char>(req.user_text[p]))) {
            digits += req.user_text[p++];
        }
        const auto line_end = req.user_text.find('\n', prior_at);
        const auto prior = req.user_text.substr(prior_at + kPrior.size(), line_end - prior_at - kPrior.size());
        if (digits.empty()) return "";
        return "<result>Utterance: " + digits + ": " + prior + ", clear photograph</result>" +
               "<reason>rewritten after failed quality checks</reason>";
    }

    const bool reason_first = req.prompt_kind == "chain_of_thought";
    std::string out;
    std::istringstream lines(req.user_text);
    std::string line;
    while (std::getline(lines, line)) {
        constexpr std::string_view kPrefix = "Utterance ";
        if (line.rfind(kPrefix, 0) != 0) continue;
        const auto colon = line.find(':', kPrefix.size());
        if (colon == std::string::npos) continue;
        const auto index = line.substr(kPrefix.size(), colon - kPrefix.size());
        const auto text = std::string_view(line).substr(std::min(line.size(), colon + 2));
        if (!has_visual_cue(text)) continue;
        const std::string result = "<result>Utterance: " + index + ": " + short_description(text) + "</result>";
        const std::string reason = "<reason>Utterance " + index + " refers to something that can be shown.</reason>";
        out += reason_first ? reason + "\n" + result : result + " " + reason;
        out += '\n';
    }
    return out;
}

MockFixture MockFixture::parse(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("mock fixture: ") + e.what());
    }
    MockFixture fx;
    try {
        fx.dim = j.value("embedding_dim", fx.dim);
        if (auto it = j.find("chat"); it != j.end()) {
            for (const auto& [key, v] : it->items()) {
                ScriptedReply r;
                if (v.is_string()) {
                    r.completion = v.get<std::string>();
                } else {
                    r.completion = v.value("completion", std::string{});
                    r.status = v.value("status", 200);
                }
                fx.chat[key] = std::move(r);
            }
        }
        if (auto it = j.find("images"); it != j.end()) {
            for (const auto& [key, v] : it->items()) {
                ImageProfile p;
                if (v.contains("clip")) p.clip = v["clip"].get<double>();
                if (v.contains("aesthetic")) p.aesthetic = v["aesthetic"].get<double>();
                if (v.contains("unsafe")) p.unsafe_concept = v["unsafe"].get<std::string>();
                p.status = v.value("status", 200);
                fx.images[key] = std::move(p);
            }
        }
        if (j.contains("default_clip")) fx.default_clip = j["default_clip"].get<std::pair<double, double>>();
        if (j.contains("default_aesthetic")) {
            fx.default_aesthetic = j["default_aesthetic"].get<std::pair<double, double>>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("mock fixture: ") + e.what());
    }
    return fx;
}

MockFixture MockFixture::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IOError, "cannot open mock fixture " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string MockFixture::dump() const {
    json j;
    j["embedding_dim"] = dim;
    j["chat"] = json::object();
    for (const auto& [k, r] : chat) {
        j["chat"][k] = r.status == 200 ? json(r.completion) : json{{"completion", r.completion}, {"status", r.status}};
    }
    j["images"] = json::object();
    for (const auto& [k, p] : images) {
        json v = json::object();
        if (p.clip) v["clip"] = *p.clip;
        if (p.aesthetic) v["aesthetic"] = *p.aesthetic;
        if (p.unsafe_concept) v["unsafe"] = *p.unsafe_concept;
        if (p.status != 200) v["status"] = p.status;
        j["images"][k] = v;
    }
    j["default_clip"] = default_clip;
    j["default_aesthetic"] = default_aesthetic;
    return j.dump(2);
}

MockBackends::MockBackends(MockFixture fixture)
    : fixture_(std::make_shared<const MockFixture>(std::move(fixture))),
      chat_(std::make_shared<MockChat>(fixture_)),
      image_(std::make_shared<MockImage>(fixture_)),
      embed_(std::make_shared<MockEmbed>(fixture_)) {}

void mount_mock_routes(httplib::Server& server, std::shared_ptr<MockBackends> mocks) {
    auto fail = [](httplib::Response& res, const Error& e) {
        switch (e.code()) {
            case ErrorCode::BackendRefusal: res.status = 400; break;
            case ErrorCode::Timeout: res.status = 408; break;
            case ErrorCode::InvalidArgument: res.status = 422; break;
            default: res.status = 503; break;
        }
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    };
    auto bad_request = [](httplib::Response& res, const std::string& msg) {
        res.status = 400;
        res.set_content(json{{"error", msg}}.dump(), "application/json");
    };

    server.Post(std::string(routes::kChat), [mocks, fail, bad_request](const httplib::Request& req,
                                                                        httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("messages")) return bad_request(res, "expected chat JSON");
        ChatRequest chat;
        for (const auto& m : body["messages"]) {
            const auto role = m.value("role", std::string{});
            if (role == "system") chat.system_text = m.value("content", std::string{});
            if (role == "user") chat.user_text = m.value("content", std::string{});
        }
        chat.temperature = body.value("temperature", 0.0);
        chat.seed = body.value("seed", std::uint64_t{0});
        if (body.contains("metadata")) chat.prompt_kind = body["metadata"].value("prompt_kind", std::string{});
        const auto scripted = lookup_chat(mocks->fixture(), chat);
        if (scripted.status != 200) {
            res.status = scripted.status;
            res.set_content(json{{"error", "scripted"}}.dump(), "application/json");
            return;
        }
        try {
            const auto out = mocks->chat()->complete(chat);
            json reply{{"object", "chat.completion"},
                       {"model", body.value("model", std::string{"mock"})},
                       {"choices", json::array({{{"index", 0},
                                                 {"message", {{"role", "assistant"}, {"content", out.completion_text}}},
                                                 {"finish_reason", "stop"}}})},
                       {"usage", out.usage}};
            res.set_content(reply.dump(), "application/json");
        } catch (const Error& e) {
            fail(res, e);
        }
    });

    server.Post(std::string(routes::kImage), [mocks, fail, bad_request](const httplib::Request& req,
                                                                         httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("prompt")) return bad_request(res, "expected image JSON");
        ImageRequest image;
        image.description = body["prompt"].get<std::string>();
        image.width = body.value("width", 1024);
        image.height = body.value("height", 1024);
        image.seed = body.value("seed", std::uint64_t{0});
        image.backend_model_id = body.value("model", std::string{});
        if (auto it = mocks->fixture().images.find(image.description);
            it != mocks->fixture().images.end() && it->second.status != 200) {
            res.status = it->second.status;
            return;
        }
        try {
            const auto out = mocks->image()->generate(image);
            res.set_content(out.bytes, out.media_type);
        } catch (const Error& e) {
            fail(res, e);
        }
    });

    server.Post(std::string(routes::kEmbedText), [mocks, fail, bad_request](const httplib::Request& req,
                                                                             httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("input")) return bad_request(res, "expected {\"input\": text}");
        try {
            res.set_content(json{{"embedding", mocks->embed()->embed_text(body["input"].get<std::string>())}}.dump(),
                            "application/json");
        } catch (const Error& e) {
            fail(res, e);
        }
    });

    server.Post(std::string(routes::kEmbedImage), [mocks, fail](const httplib::Request& req,
                                                                  httplib::Response& res) {
        try {
            ImagePayload img{req.body, req.get_header_value("Content-Type")};
            res.set_content(json{{"embedding", mocks->embed()->embed_image(img)}}.dump(), "application/json");
        } catch (const Error& e) {
            fail(res, e);
        }
    });
}

}  // namespace mmdg
