#include "rfidauth/adversary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <json.hpp>
#include <set>

namespace rfidauth::adversary {

using protocol::AuthServer;
using protocol::RejectReason;
using protocol::TagAgent;
using wire::AckChallenge;
using wire::AuthRequest;
using wire::Query;
using wire::ServerResponse;

std::string_view to_string(Attack a) {
    switch (a) {
        case Attack::Replay:
            return "replay";
        case Attack::Resend:
            return "resend";
        case Attack::ImpersonateTag:
            return "impersonate_tag";
        case Attack::ImpersonateReader:
            return "impersonate_reader";
        case Attack::Tracking:
            return "tracking";
    }
    return "?";
}

std::string AttackVerdict::to_json() const {
    nlohmann::ordered_json j;
    j["attack"] = to_string(attack);
    j["variant"] = variant;
    j["attempts"] = attempts;
    j["successes"] = successes;
    j["outcomes"] = outcomes;
    if (distinct_fraction) {
        j["distinct_fraction"] = *distinct_fraction;
    }
    if (accuracy) {
        j["accuracy"] = *accuracy;
        j["sigma"] = *sigma;
        j["linkable"] = *linkable;
    }
    return j.dump();
}

// ---------------------------------------------------------------------------

Testbed::Testbed(std::uint64_t seed, std::size_t tags, std::size_t database_size, protocol::ProtocolConfig cfg)
    : cfg_(cfg), rng_(SeededRng::derive(seed, "testbed")), reader_(cfg) {
    SeededRng keys = SeededRng::derive(seed, "testbed-keys");
    server_ = std::make_unique<AuthServer>(crypto::kem_keygen(keys), cfg_);
    for (std::size_t i = 0; i < tags; ++i) {
        const protocol::TagId id = protocol::make_tag_id(seed, i);
        server_->enroll(id);
        tags_.emplace_back(protocol::TagIdentity{id, server_->public_key()}, cfg_);
    }
    for (std::size_t i = tags; i < database_size; ++i) {
        server_->enroll(protocol::make_tag_id(seed, i));
    }
}

Transcript Testbed::honest_session(std::size_t index) {
    TagAgent& tag = tags_.at(index);
    tag.wake();
    return protocol::run_session(tag, reader_, *server_, rng_, 1.0, sessions_++);
}

std::vector<Transcript> Testbed::record(std::size_t n) {
    std::vector<Transcript> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(honest_session(i % tags_.size()));
    }
    return out;
}

TagAgent& Testbed::tag_by_label(const std::string& label) {
    for (auto& t : tags_) {
        if (protocol::to_hex(t.identity().id) == label) {
            return t;
        }
    }
    throw std::out_of_range("no tag with label " + label);
}

namespace {

template <class T>
T over_air(const T& msg, const protocol::ProtocolConfig& cfg) {
    return std::get<T>(wire::decode_message(wire::encode_message(msg, cfg), cfg));
}

void require_recorded(std::span<const Transcript> recorded) {
    if (recorded.empty()) {
        throw std::invalid_argument("attack needs at least one recorded transcript");
    }
}

std::string outcome_name(const protocol::Accept&) { return "Accepted"; }

/// The adversary plays the tag towards the honest reader: answers the Query,
/// ignores the fresh challenge and injects recorded R1/R2.
void inject_auth(Testbed& bed, const AuthRequest& auth, bool check_cr, AttackVerdict& v) {
    auto& reader = bed.reader();
    const AckChallenge fresh = reader.ack(bed.rng());
    (void)fresh;
    const auto req = over_air(reader.forward(over_air(auth, bed.config()), 1.0), bed.config());
    auto resp = check_cr ? bed.server().authenticate(req, bed.rng())
                         : bed.server().authenticate_without_challenge_check(req, bed.rng());
    reader.end_session();
    ++v.attempts;
    if (resp) {
        ++v.successes;
        ++v.outcomes["Accepted"];
    } else {
        ++v.outcomes[std::string(protocol::to_string(resp.error()))];
    }
}

/// Opens a fresh session of `tag` up to AwaitingFinal under challenge `cr`.
void open_session(TagAgent& tag, std::uint64_t cr, Testbed& bed) {
    tag.wake();
    if (!tag.on_query(Query{0}, bed.rng())) {
        throw std::logic_error("tag did not answer the Query");
    }
    tag.on_ack(over_air(AckChallenge{cr}, bed.config()));
    (void)tag.build_auth(bed.rng());
}

void deliver_b(TagAgent& tag, const ServerResponse& b, Testbed& bed, AttackVerdict& v) {
    auto verdict = tag.on_response(over_air(b, bed.config()));
    ++v.attempts;
    if (verdict) {
        ++v.successes;
        ++v.outcomes[outcome_name(*verdict)];
    } else {
        ++v.outcomes[std::string(protocol::to_string(verdict.error()))];
    }
    tag.abandon();
}

const Transcript& pick(std::span<const Transcript> recorded, std::size_t i) { return recorded[i % recorded.size()]; }

}  // namespace

AttackVerdict replay_attack(Testbed& bed, std::span<const Transcript> recorded, std::size_t attempts, ReplayMode mode,
                            bool server_checks_challenge) {
    require_recorded(recorded);
    AttackVerdict v;
    v.attack = Attack::Replay;
    switch (mode) {
        case ReplayMode::FullSession:
            v.variant = "full_session";
            break;
        case ReplayMode::ResponseToNewTag:
            v.variant = "response_to_new_session";
            break;
        case ReplayMode::DuplicateDelivery:
            v.variant = "duplicate_delivery";
            break;
    }
    if (!server_checks_challenge) {
        v.variant += "/no_cr_check";
    }
    for (std::size_t i = 0; i < attempts; ++i) {
        const Transcript& t = pick(recorded, i);
        switch (mode) {
            case ReplayMode::FullSession:
                inject_auth(bed, t.auth, server_checks_challenge, v);
                break;
            case ReplayMode::ResponseToNewTag: {
                if (!t.response) {
                    throw std::invalid_argument("transcript has no ServerResponse to replay");
                }
                TagAgent& tag = bed.tag_by_label(t.tag_label);
                open_session(tag, bed.reader().ack(bed.rng()).cr, bed);
                bed.reader().end_session();
                deliver_b(tag, *t.response, bed, v);
                break;
            }
            case ReplayMode::DuplicateDelivery: {
                TagAgent& tag = bed.tag_by_label(t.tag_label);
                tag.wake();
                const Transcript live = protocol::run_session(tag, bed.reader(), bed.server(), bed.rng());
                if (!live.accepted) {
                    throw std::logic_error("honest session failed");
                }
                deliver_b(tag, *live.response, bed, v);
                break;
            }
        }
    }
    return v;
}

AttackVerdict resend_attack(Testbed& bed, std::span<const Transcript> recorded, std::size_t attempts, ResendMode mode) {
    require_recorded(recorded);
    AttackVerdict v;
    v.attack = Attack::Resend;
    for (std::size_t i = 0; i < attempts; ++i) {
        const Transcript& t = pick(recorded, i);
        switch (mode) {
            case ResendMode::LaterFrame:
                v.variant = "later_frame";
                inject_auth(bed, t.auth, true, v);
                break;
            case ResendMode::RogueReaderOriginalCr: {
                // The rogue reader can replay the overheard challenge, but its
                // only server-signed material is the old B.
                v.variant = "rogue_reader_original_cr";
                if (!t.response) {
                    throw std::invalid_argument("transcript has no ServerResponse");
                }
                TagAgent& tag = bed.tag_by_label(t.tag_label);
                open_session(tag, t.cr, bed);
                deliver_b(tag, *t.response, bed, v);
                break;
            }
            case ResendMode::RevokedId: {
                v.variant = "revoked_id";
                const protocol::TagId id = bed.tag_by_label(t.tag_label).identity().id;
                bed.server().revoke(id);
                inject_auth(bed, t.auth, true, v);
                bed.server().enroll(id);
                break;
            }
        }
    }
    return v;
}

AttackVerdict impersonation_attack(Testbed& bed, std::size_t attempts, ImpersonationMode mode,
                                   std::span<const Transcript> recorded) {
    AttackVerdict v;
    switch (mode) {
        case ImpersonationMode::FakeTag: {
            v.attack = Attack::ImpersonateTag;
            v.variant = "random_id";
            for (std::size_t i = 0; i < attempts; ++i) {
                protocol::TagId id{};
                bed.rng().fill(id);
                TagAgent fake({id, bed.server().public_key()}, bed.config());
                const Transcript t = protocol::run_session(fake, bed.reader(), bed.server(), bed.rng());
                ++v.attempts;
                if (t.accepted) {
                    ++v.successes;
                    ++v.outcomes["Accepted"];
                } else if (t.server_reject) {
                    ++v.outcomes[std::string(protocol::to_string(*t.server_reject))];
                } else {
                    ++v.outcomes[std::string(protocol::to_string(*t.tag_reject))];
                }
            }
            break;
        }
        case ImpersonationMode::FakeReaderRandomB: {
            v.attack = Attack::ImpersonateReader;
            v.variant = "random_b";
            const std::size_t payload = wire::final_payload_bytes(bed.config());
            for (std::size_t i = 0; i < attempts; ++i) {
                TagAgent& tag = bed.tag(i % bed.tag_count());
                open_session(tag, bed.rng().next_u64() & bed.config().cr_mask(), bed);
                crypto::SymCiphertext b;
                bed.rng().fill(b.iv);
                b.blocks.resize(crypto::sym_ciphertext_bits(8 * payload) / 8 - crypto::kBlockBytes);
                bed.rng().fill(b.blocks);
                b.payload_len = payload;
                deliver_b(tag, ServerResponse{b}, bed, v);
            }
            break;
        }
        case ImpersonationMode::FakeReaderOldB: {
            v.attack = Attack::ImpersonateReader;
            v.variant = "old_b";
            require_recorded(recorded);
            for (std::size_t i = 0; i < attempts; ++i) {
                const Transcript& t = pick(recorded, i);
                TagAgent& tag = bed.tag_by_label(t.tag_label);
                open_session(tag, bed.rng().next_u64() & bed.config().cr_mask(), bed);
                deliver_b(tag, *t.response, bed, v);
            }
            break;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Tracking

namespace {

struct Sample {
    crypto::Bytes bytes;
    int label = 0;
};

std::size_t hamming(const crypto::Bytes& a, const crypto::Bytes& b) {
    std::size_t d = 0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        d += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    }
    return d + 8 * (std::max(a.size(), b.size()) - n);
}

crypto::Bytes on_air(const Transcript& t, const protocol::ProtocolConfig& cfg) {
    return wire::encode_message(t.auth, cfg).payload;
}

void shuffle(std::vector<Sample>& v, SeededRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

}  // namespace

AttackVerdict tracking_distinguisher(std::span<const Transcript> a, std::span<const Transcript> b, SeededRng& rng) {
    if (a.size() < kMinTrackingSessions || b.size() < kMinTrackingSessions) {
        throw InsufficientData("tracking needs at least " + std::to_string(kMinTrackingSessions) +
                               " sessions per tag");
    }
    const protocol::ProtocolConfig cfg;
    AttackVerdict v;
    v.attack = Attack::Tracking;
    v.variant = "nearest_neighbour_hamming";

    std::set<crypto::Bytes> r1, r2;
    std::size_t total = 0;
    std::vector<Sample> sa, sb;
    for (const auto& t : a) {
        sa.push_back({on_air(t, cfg), 0});
    }
    for (const auto& t : b) {
        sb.push_back({on_air(t, cfg), 1});
    }
    for (auto side : {a, b}) {
        for (const auto& t : side) {
            r1.insert(t.auth.r1.serialize());
            r2.insert(t.auth.r2.serialize());
            ++total;
        }
    }
    v.distinct_fraction = static_cast<double>(r1.size() + r2.size()) / static_cast<double>(2 * total);

    shuffle(sa, rng);
    shuffle(sb, rng);
    std::vector<Sample> train, test;
    for (auto* side : {&sa, &sb}) {
        const std::size_t half = side->size() / 2;
        train.insert(train.end(), side->begin(), side->begin() + static_cast<std::ptrdiff_t>(half));
        test.insert(test.end(), side->begin() + static_cast<std::ptrdiff_t>(half), side->end());
    }
    for (const auto& s : test) {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        std::vector<int> labels;
        for (const auto& t : train) {
            const std::size_t d = hamming(s.bytes, t.bytes);
            if (d < best) {
                best = d;
                labels.assign(1, t.label);
            } else if (d == best) {
                labels.push_back(t.label);
            }
        }
        const int guess = labels[rng.below(labels.size())];
        ++v.attempts;
        if (guess == s.label) {
            ++v.successes;
        }
    }
    const double n = static_cast<double>(v.attempts);
    v.accuracy = static_cast<double>(v.successes) / n;
    v.sigma = std::sqrt(0.25 / n);
    v.linkable = std::abs(*v.accuracy - 0.5) > 3.0 * *v.sigma || *v.distinct_fraction < 1.0;
    v.outcomes["correct"] = v.successes;
    v.outcomes["wrong"] = v.attempts - v.successes;
    return v;
}

std::vector<Transcript> weakened_sessions(const protocol::TagIdentity& tag, std::size_t n, SeededRng& rng,
                                          const protocol::ProtocolConfig& cfg) {
    // Static key and zero IV; the tag leaves the challenge field empty, so
    // the first CBC block carries only the ID.
    const crypto::SymKey k = crypto::SymKey::generate(rng);
    const std::array<std::uint8_t, crypto::kBlockBytes> iv{};
    std::vector<Transcript> out;
    for (std::size_t i = 0; i < n; ++i) {
        Transcript t;
        t.session = i;
        t.tag_label = protocol::to_hex(tag.id);
        t.cr = rng.next_u64() & cfg.cr_mask();
        crypto::Bytes id_cr(tag.id.begin(), tag.id.end());
        wire::put_be(id_cr, 0, cfg.cr_bytes);
        crypto::Bytes k_ct(k.bytes.begin(), k.bytes.end());
        wire::put_be(k_ct, rng.next_u64() & cfg.ct_mask(), cfg.ct_bytes);
        t.auth = AuthRequest{crypto::sym_encrypt_with_iv(k, id_cr, iv), crypto::kem_encapsulate(tag.server_pk, k_ct, rng)};
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Transcript> load_transcripts(std::istream& in) {
    std::vector<Transcript> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(protocol::transcript_from_jsonl(line));
        } catch (const wire::MalformedMessage& e) {
            throw wire::MalformedMessage("line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DosRow> dos_load_test(const sim::Scenario& base, std::span<const std::size_t> responders) {
    std::vector<DosRow> rows;
    for (std::size_t n : responders) {
        sim::Scenario s = base;
        s.adversarial_responders = n;
        const sim::MetricsReport r = sim::run(s);
        rows.push_back({n, r.read_ratio, r.server_rejects, r.adversary_accepts});
    }
    return rows;
}

}  // namespace rfidauth::adversary
