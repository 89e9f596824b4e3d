#include "rfidauth/protocol.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace rfidauth::protocol {

std::size_t TagIdHash::operator()(const TagId& id) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : id) {
        h = (h ^ b) * 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(mix64(h));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * bytes.size());
    for (std::uint8_t b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0F]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw MalformedMessage("odd-length hex string");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') {
            return c - '0';
        }
        if (c >= 'a' && c <= 'f') {
            return c - 'a' + 10;
        }
        if (c >= 'A' && c <= 'F') {
            return c - 'A' + 10;
        }
        throw MalformedMessage("invalid hex digit");
    };
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return out;
}

TagId make_tag_id(std::uint64_t seed, std::uint64_t n) {
    SeededRng rng(mix64(seed) ^ mix64(n + 0x5151));
    TagId id{};
    rng.fill(id);
    return id;
}

std::string_view to_string(TagPhase phase) {
    switch (phase) {
        case TagPhase::Idle:
            return "Idle";
        case TagPhase::Arbitrating:
            return "Arbitrating";
        case TagPhase::Acknowledged:
            return "Acknowledged";
        case TagPhase::AwaitingFinal:
            return "AwaitingFinal";
        case TagPhase::Sleeping:
            return "Sleeping";
    }
    return "?";
}

std::string_view to_string(TagReject r) {
    switch (r) {
        case TagReject::WrongPhase:
            return "WrongPhase";
        case TagReject::IntegrityFailure:
            return "IntegrityFailure";
        case TagReject::ChallengeMismatch:
            return "ChallengeMismatch";
    }
    return "?";
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::KemFailure:
            return "KemFailure";
        case RejectReason::SymFailure:
            return "SymFailure";
        case RejectReason::UnknownId:
            return "UnknownId";
        case RejectReason::ChallengeMismatch:
            return "ChallengeMismatch";
    }
    return "?";
}

// ---------------------------------------------------------------------------

TagAgent::TagAgent(TagIdentity identity, ProtocolConfig cfg) : identity_(std::move(identity)), cfg_(cfg) {
    cfg_.validate();
}

std::optional<SlotReply> TagAgent::on_query(const Query& q, SeededRng& rng) {
    if (s_.phase == TagPhase::Sleeping) {
        return std::nullopt;
    }
    if (q.q > anticollision::kMaxQ) {
        throw std::invalid_argument("Q must lie in [0, 15]");
    }
    s_ = SessionState{};
    s_.phase = TagPhase::Arbitrating;
    s_.k = crypto::SymKey::generate(rng);
    s_.ct = rng.next_u64() & cfg_.ct_mask();
    s_.rn16 = static_cast<std::uint16_t>(rng.next_u64());
    s_.slot = static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << q.q));
    ++sessions_;
    return SlotReply{s_.slot, Rn16{s_.rn16}};
}

bool TagAgent::on_ack(const AckChallenge& ack) {
    if (s_.phase != TagPhase::Arbitrating) {
        return false;
    }
    s_.cr = ack.cr & cfg_.cr_mask();
    s_.phase = TagPhase::Acknowledged;
    return true;
}

std::optional<AuthRequest> TagAgent::build_auth(SeededRng& rng) {
    if (s_.phase != TagPhase::Acknowledged) {
        return std::nullopt;
    }
    Bytes id_cr(identity_.id.begin(), identity_.id.end());
    put_be(id_cr, s_.cr, cfg_.cr_bytes);
    Bytes k_ct(s_.k.bytes.begin(), s_.k.bytes.end());
    put_be(k_ct, s_.ct, cfg_.ct_bytes);
    AuthRequest req{crypto::sym_encrypt(s_.k, id_cr, rng), crypto::kem_encapsulate(identity_.server_pk, k_ct, rng)};
    s_.phase = TagPhase::AwaitingFinal;
    return req;
}

Result<Accept, TagReject> TagAgent::on_response(const ServerResponse& resp) {
    if (s_.phase != TagPhase::AwaitingFinal) {
        return Err{TagReject::WrongPhase};
    }
    auto pt = crypto::sym_decrypt(s_.k, resp.b);
    if (!pt || pt->size() != final_payload_bytes(cfg_)) {
        abandon();
        return Err{TagReject::IntegrityFailure};
    }
    const std::span<const std::uint8_t> p(*pt);
    const std::uint64_t cr = get_be(p, cfg_.cr_bytes);
    const std::uint64_t ct = get_be(p.subspan(cfg_.cr_bytes), cfg_.ct_bytes);
    if (cr != s_.cr || ct != s_.ct) {
        abandon();
        return Err{TagReject::ChallengeMismatch};
    }
    const std::uint64_t time_us = get_be(p.subspan(cfg_.cr_bytes + cfg_.ct_bytes), cfg_.time_bytes);
    s_.phase = TagPhase::Sleeping;
    return Accept{time_us};
}

void TagAgent::abandon() {
    if (s_.phase != TagPhase::Sleeping) {
        s_ = SessionState{};
    }
}

void TagAgent::wake() {
    if (s_.phase == TagPhase::Sleeping) {
        s_ = SessionState{};
    }
}

// ---------------------------------------------------------------------------

ReaderAgent::ReaderAgent(ProtocolConfig cfg, SleepStrategy sleep, double initial_q, double q_step)
    : cfg_(cfg), sleep_(sleep), arbiter_(initial_q, q_step) {
    cfg_.validate();
    if (sleep_.kind == SleepStrategy::Kind::Fixed && !(sleep_.fixed_s >= 0.0)) {
        throw std::invalid_argument("fixed sleep time must be non-negative");
    }
}

AckChallenge ReaderAgent::ack(SeededRng& rng) {
    cr_ = rng.next_u64() & cfg_.cr_mask();
    return AckChallenge{*cr_};
}

ServerRequest ReaderAgent::forward(const AuthRequest& auth, double sleep_time_s) const {
    if (!cr_) {
        throw std::logic_error("no outstanding challenge");
    }
    const double us = std::max(0.0, sleep_time_s) * 1e6;
    return ServerRequest{auth, *cr_, static_cast<std::uint64_t>(us + 0.5)};
}

double ReaderAgent::estimate_sleep_time(const TagObservation& obs) const {
    if (sleep_.kind == SleepStrategy::Kind::Fixed || !obs.range_exit) {
        return sleep_.kind == SleepStrategy::Kind::Fixed ? sleep_.fixed_s : 0.0;
    }
    return std::max(0.0, *obs.range_exit - obs.now);
}

// ---------------------------------------------------------------------------

AuthServer::AuthServer(crypto::CurveKeyPair keys, ProtocolConfig cfg) : keys_(std::move(keys)), cfg_(cfg) {
    cfg_.validate();
}

void AuthServer::enroll(const TagId& id) {
    db_.try_emplace(id, TagRecord{id, db_.size()});
}

Result<ServerResponse, RejectReason> AuthServer::authenticate(const ServerRequest& req, SeededRng& rng) const {
    return run(req, rng, true);
}

Result<ServerResponse, RejectReason> AuthServer::authenticate_without_challenge_check(const ServerRequest& req,
                                                                                      SeededRng& rng) const {
    return run(req, rng, false);
}

Result<ServerResponse, RejectReason> AuthServer::run(const ServerRequest& req, SeededRng& rng, bool check_cr) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    decaps_.fetch_add(1, std::memory_order_relaxed);
    auto k_ct = crypto::kem_decapsulate(keys_.private_scalar, req.auth.r2);
    if (!k_ct || k_ct->size() != key_ct_bytes(cfg_)) {
        // Burn the symmetric decryption anyway so every path costs the same.
        sym_decrypts_.fetch_add(1, std::memory_order_relaxed);
        (void)crypto::sym_decrypt(crypto::SymKey{}, req.auth.r1);
        return Err{RejectReason::KemFailure};
    }
    crypto::SymKey k;
    std::copy_n(k_ct->begin(), crypto::kSymKeyBytes, k.bytes.begin());
    const std::uint64_t ct = get_be(std::span(*k_ct).subspan(crypto::kSymKeyBytes), cfg_.ct_bytes);

    sym_decrypts_.fetch_add(1, std::memory_order_relaxed);
    auto id_cr = crypto::sym_decrypt(k, req.auth.r1);
    if (!id_cr || id_cr->size() != id_cr_bytes(cfg_)) {
        return Err{RejectReason::SymFailure};
    }
    TagId id{};
    std::copy_n(id_cr->begin(), kIdBytes, id.begin());
    if (!db_.contains(id)) {
        return Err{RejectReason::UnknownId};
    }
    const std::uint64_t cr = get_be(std::span(*id_cr).subspan(kIdBytes), cfg_.cr_bytes);
    if (check_cr && cr != (req.cr_reader & cfg_.cr_mask())) {
        return Err{RejectReason::ChallengeMismatch};
    }
    Bytes b;
    put_be(b, cr, cfg_.cr_bytes);
    put_be(b, ct, cfg_.ct_bytes);
    put_be(b, req.time_us, cfg_.time_bytes);
    return ServerResponse{crypto::sym_encrypt(k, b, rng)};
}

WorkCounters AuthServer::counters() const {
    return {calls_.load(), decaps_.load(), sym_decrypts_.load()};
}

void AuthServer::reset_counters() {
    calls_ = 0;
    decaps_ = 0;
    sym_decrypts_ = 0;
}

// ---------------------------------------------------------------------------

namespace {

template <class E, std::size_t N>
E enum_from(std::string_view s, const std::array<E, N>& all) {
    for (E e : all) {
        if (to_string(e) == s) {
            return e;
        }
    }
    throw MalformedMessage("unknown enum value: " + std::string(s));
}

}  // namespace

std::string to_jsonl(const Transcript& t) {
    nlohmann::ordered_json j;
    j["session"] = t.session;
    j["tag"] = t.tag_label;
    j["q"] = t.q;
    j["rn16"] = t.rn16;
    j["cr"] = t.cr;
    j["r1"] = to_hex(t.auth.r1.serialize());
    j["r2"] = to_hex(t.auth.r2.serialize());
    j["time_us"] = t.time_us;
    j["b"] = t.response ? nlohmann::ordered_json(to_hex(t.response->b.serialize())) : nlohmann::ordered_json(nullptr);
    j["server_reject"] = t.server_reject ? nlohmann::ordered_json(std::string(to_string(*t.server_reject)))
                                         : nlohmann::ordered_json(nullptr);
    j["tag_reject"] =
        t.tag_reject ? nlohmann::ordered_json(std::string(to_string(*t.tag_reject))) : nlohmann::ordered_json(nullptr);
    j["accepted"] = t.accepted;
    return j.dump();
}

Transcript transcript_from_jsonl(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        Transcript t;
        t.session = j.at("session").get<std::uint64_t>();
        t.tag_label = j.at("tag").get<std::string>();
        t.q = j.at("q").get<std::uint8_t>();
        t.rn16 = j.at("rn16").get<std::uint16_t>();
        t.cr = j.at("cr").get<std::uint64_t>();
        auto r1 = crypto::SymCiphertext::deserialize(from_hex(j.at("r1").get<std::string>()));
        auto r2 = crypto::KemCiphertext::deserialize(from_hex(j.at("r2").get<std::string>()));
        if (!r1 || !r2) {
            throw MalformedMessage("bad ciphertext encoding");
        }
        t.auth = AuthRequest{*r1, *r2};
        t.time_us = j.at("time_us").get<std::uint64_t>();
        if (!j.at("b").is_null()) {
            auto b = crypto::SymCiphertext::deserialize(from_hex(j.at("b").get<std::string>()));
            if (!b) {
                throw MalformedMessage("bad response encoding");
            }
            t.response = ServerResponse{*b};
        }
        if (!j.at("server_reject").is_null()) {
            t.server_reject = enum_from(j.at("server_reject").get<std::string>(),
                                        std::array{RejectReason::KemFailure, RejectReason::SymFailure,
                                                   RejectReason::UnknownId, RejectReason::ChallengeMismatch});
        }
        if (!j.at("tag_reject").is_null()) {
            t.tag_reject = enum_from(j.at("tag_reject").get<std::string>(),
                                     std::array{TagReject::WrongPhase, TagReject::IntegrityFailure,
                                                TagReject::ChallengeMismatch});
        }
        t.accepted = j.at("accepted").get<bool>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedMessage(std::string("transcript: ") + e.what());
    }
}

namespace {

template <class T>
T over_air(const T& msg, const ProtocolConfig& cfg) {
    return std::get<T>(decode_message(encode_message(msg, cfg), cfg));
}

}  // namespace

Transcript run_session(TagAgent& tag, ReaderAgent& reader, const AuthServer& server, SeededRng& rng,
                       double sleep_time_s, std::uint64_t session) {
    const ProtocolConfig& cfg = server.config();
    Transcript t;
    t.session = session;
    t.tag_label = to_hex(tag.identity().id);

    const Query query = over_air(Query{0}, cfg);
    const auto reply = tag.on_query(query, rng);
    if (!reply) {
        throw std::logic_error("tag is asleep");
    }
    t.rn16 = over_air(reply->rn16, cfg).value;

    const AckChallenge ack = over_air(reader.ack(rng), cfg);
    t.cr = ack.cr;
    tag.on_ack(ack);
    t.auth = over_air(*tag.build_auth(rng), cfg);

    const ServerRequest req = over_air(reader.forward(t.auth, sleep_time_s), cfg);
    t.time_us = req.time_us;
    auto resp = server.authenticate(req, rng);
    reader.end_session();
    if (!resp) {
        t.server_reject = resp.error();
        tag.abandon();
        return t;
    }
    t.response = over_air(*resp, cfg);
    auto verdict = tag.on_response(*t.response);
    if (!verdict) {
        t.tag_reject = verdict.error();
        return t;
    }
    t.accepted = true;
    return t;
}

}  // namespace rfidauth::protocol
