#include "rfidauth/wire.hpp"

#include <algorithm>

namespace rfidauth::wire {

namespace {

constexpr std::uint8_t kQueryCommand = 0b1000;
constexpr std::uint8_t kAckCommand = 0b01;
constexpr std::uint8_t kCrcPreset = 0b01001;
constexpr std::uint8_t kCrcPoly = 0b01001;  // x^5 + x^3 + 1 without the x^5 term

class BitWriter {
public:
    void put(std::uint64_t value, std::size_t bits) {
        for (std::size_t i = bits; i-- > 0;) {
            put_bit(static_cast<int>((value >> i) & 1U));
        }
    }
    void put_bytes(std::span<const std::uint8_t> bytes) {
        for (std::uint8_t b : bytes) {
            put(b, 8);
        }
    }
    [[nodiscard]] std::size_t size() const { return bits_; }
    Bytes take() { return std::move(out_); }

private:
    void put_bit(int bit) {
        if (bits_ % 8 == 0) {
            out_.push_back(0);
        }
        if (bit) {
            out_.back() |= static_cast<std::uint8_t>(0x80U >> (bits_ % 8));
        }
        ++bits_;
    }
    Bytes out_;
    std::size_t bits_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint64_t get(std::size_t bits) {
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < bits; ++i) {
            v = (v << 1) | static_cast<std::uint64_t>((in_[pos_ / 8] >> (7 - pos_ % 8)) & 1U);
            ++pos_;
        }
        return v;
    }
    Bytes get_bytes(std::size_t n) {
        Bytes out(n);
        for (auto& b : out) {
            b = static_cast<std::uint8_t>(get(8));
        }
        return out;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::size_t bytes_for(std::size_t bits) { return (bits + 7) / 8; }

std::uint64_t mask_for(std::size_t bytes) { return bytes >= 8 ? ~0ULL : (1ULL << (8 * bytes)) - 1; }

void put_sym(BitWriter& w, const crypto::SymCiphertext& ct) {
    w.put_bytes(ct.iv);
    w.put_bytes(ct.blocks);
}

crypto::SymCiphertext get_sym(BitReader& r, std::size_t payload_len) {
    crypto::SymCiphertext ct;
    const std::size_t total = crypto::sym_ciphertext_bits(8 * payload_len) / 8;
    const Bytes iv = r.get_bytes(crypto::kBlockBytes);
    std::copy(iv.begin(), iv.end(), ct.iv.begin());
    ct.blocks = r.get_bytes(total - crypto::kBlockBytes);
    ct.payload_len = payload_len;
    return ct;
}

void put_kem(BitWriter& w, const crypto::KemCiphertext& ct) {
    w.put_bytes(ct.ephemeral_point);
    w.put_bytes(ct.wrapped_payload);
    w.put(ct.auth_tag, 64);
}

crypto::KemCiphertext get_kem(BitReader& r, std::size_t payload_len) {
    crypto::KemCiphertext ct;
    ct.ephemeral_point = r.get_bytes(crypto::curve_info().compressed_point_bytes);
    if (!crypto::is_valid_point(ct.ephemeral_point)) {
        throw MalformedMessage("R2 ephemeral point is not on the curve");
    }
    ct.wrapped_payload = r.get_bytes(payload_len);
    ct.auth_tag = r.get(64);
    return ct;
}

void check_sizes(const AuthRequest& a, const ProtocolConfig& cfg) {
    if (a.r1.payload_len != id_cr_bytes(cfg) || a.r1.bit_length() != crypto::sym_ciphertext_bits(8 * id_cr_bytes(cfg)) ||
        a.r2.wrapped_payload.size() != key_ct_bytes(cfg) ||
        a.r2.ephemeral_point.size() != crypto::curve_info().compressed_point_bytes) {
        throw std::invalid_argument("AuthRequest fields do not match the protocol configuration");
    }
}

}  // namespace

void ProtocolConfig::validate() const {
    if (cr_bytes < 1 || cr_bytes > 8 || ct_bytes < 1 || ct_bytes > 8 || time_bytes < 1 || time_bytes > 8) {
        throw std::invalid_argument("nonce and time widths must be 1..8 bytes");
    }
}

std::uint64_t ProtocolConfig::cr_mask() const { return mask_for(cr_bytes); }
std::uint64_t ProtocolConfig::ct_mask() const { return mask_for(ct_bytes); }

std::string_view to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::Query:
            return "Query";
        case MessageKind::Rn16:
            return "Rn16";
        case MessageKind::AckChallenge:
            return "AckChallenge";
        case MessageKind::AuthRequest:
            return "AuthRequest";
        case MessageKind::ServerRequest:
            return "ServerRequest";
        case MessageKind::ServerResponse:
            return "ServerResponse";
    }
    return "?";
}

MessageKind kind_of(const Message& m) { return static_cast<MessageKind>(m.index()); }

std::size_t id_cr_bytes(const ProtocolConfig& cfg) { return kIdBytes + cfg.cr_bytes; }
std::size_t key_ct_bytes(const ProtocolConfig& cfg) { return crypto::kSymKeyBytes + cfg.ct_bytes; }
std::size_t final_payload_bytes(const ProtocolConfig& cfg) { return cfg.cr_bytes + cfg.ct_bytes + cfg.time_bytes; }

std::size_t message_bits(MessageKind kind, const ProtocolConfig& cfg) {
    switch (kind) {
        case MessageKind::Query:
            return kQueryBits;
        case MessageKind::Rn16:
            return kRn16Bits;
        case MessageKind::AckChallenge:
            return kAckBaseBits + 8 * cfg.cr_bytes;
        case MessageKind::AuthRequest:
            return crypto::sym_ciphertext_bits(8 * id_cr_bytes(cfg)) + crypto::kem_ciphertext_bits(8 * key_ct_bytes(cfg));
        case MessageKind::ServerRequest:
            return message_bits(MessageKind::AuthRequest, cfg) + 8 * (cfg.cr_bytes + cfg.time_bytes);
        case MessageKind::ServerResponse:
            return crypto::sym_ciphertext_bits(8 * final_payload_bytes(cfg));
    }
    return 0;
}

std::size_t handshake_bits(const ProtocolConfig& cfg) {
    return message_bits(MessageKind::Query, cfg) + message_bits(MessageKind::Rn16, cfg) +
           message_bits(MessageKind::AckChallenge, cfg) + message_bits(MessageKind::AuthRequest, cfg) +
           message_bits(MessageKind::ServerResponse, cfg);
}

std::uint8_t crc5(std::span<const std::uint8_t> data, std::size_t bits) {
    std::uint8_t reg = kCrcPreset;
    for (std::size_t i = 0; i < bits; ++i) {
        const int in = (data[i / 8] >> (7 - i % 8)) & 1;
        const int fb = ((reg >> 4) & 1) ^ in;
        reg = static_cast<std::uint8_t>((reg << 1) & 0x1F);
        if (fb) {
            reg ^= kCrcPoly;
        }
    }
    return reg;
}

void put_be(Bytes& out, std::uint64_t v, std::size_t width) {
    for (std::size_t i = width; i-- > 0;) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
        v = (v << 8) | in[i];
    }
    return v;
}

WireMessage encode_message(const Message& m, const ProtocolConfig& cfg) {
    cfg.validate();
    BitWriter w;
    const MessageKind kind = kind_of(m);
    std::visit(
        [&](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, Query>) {
                if (msg.q > 15) {
                    throw std::invalid_argument("Q must lie in [0, 15]");
                }
                w.put(kQueryCommand, 4);
                w.put(0, 9);  // DR, M, TRext, Sel, Session, Target
                w.put(msg.q, 4);
                Bytes head = w.take();
                const std::uint8_t crc = crc5(head, 17);
                w = BitWriter{};
                BitReader r(head);
                w.put(r.get(17), 17);
                w.put(crc, 5);
            } else if constexpr (std::is_same_v<T, Rn16>) {
                w.put(msg.value, 16);
            } else if constexpr (std::is_same_v<T, AckChallenge>) {
                w.put(kAckCommand, 2);
                w.put(0, 16);
                w.put(msg.cr & cfg.cr_mask(), 8 * cfg.cr_bytes);
            } else if constexpr (std::is_same_v<T, AuthRequest>) {
                check_sizes(msg, cfg);
                put_sym(w, msg.r1);
                put_kem(w, msg.r2);
            } else if constexpr (std::is_same_v<T, ServerRequest>) {
                check_sizes(msg.auth, cfg);
                put_sym(w, msg.auth.r1);
                put_kem(w, msg.auth.r2);
                w.put(msg.cr_reader & cfg.cr_mask(), 8 * cfg.cr_bytes);
                w.put(msg.time_us & mask_for(cfg.time_bytes), 8 * cfg.time_bytes);
            } else {
                if (msg.b.payload_len != final_payload_bytes(cfg) ||
                    msg.b.bit_length() != crypto::sym_ciphertext_bits(8 * final_payload_bytes(cfg))) {
                    throw std::invalid_argument("ServerResponse does not match the protocol configuration");
                }
                put_sym(w, msg.b);
            }
        },
        m);
    WireMessage out;
    out.kind = kind;
    out.bit_length = w.size();
    out.payload = w.take();
    return out;
}

Message decode_message(const WireMessage& w, const ProtocolConfig& cfg) {
    cfg.validate();
    const std::size_t expected = message_bits(w.kind, cfg);
    if (w.bit_length != expected || w.payload.size() != bytes_for(expected)) {
        throw MalformedMessage(std::string(to_string(w.kind)) + ": expected " + std::to_string(expected) + " bits, got " +
                               std::to_string(w.bit_length));
    }
    if (expected % 8 != 0) {
        const auto pad = static_cast<std::uint8_t>(0xFFU >> (expected % 8));
        if ((w.payload.back() & pad) != 0) {
            throw MalformedMessage(std::string(to_string(w.kind)) + ": nonzero padding");
        }
    }
    BitReader r(w.payload);
    switch (w.kind) {
        case MessageKind::Query: {
            if (r.get(4) != kQueryCommand) {
                throw MalformedMessage("Query: bad command code");
            }
            if (r.get(9) != 0) {
                throw MalformedMessage("Query: unsupported flags");
            }
            const auto q = static_cast<std::uint8_t>(r.get(4));
            if (r.get(5) != crc5(w.payload, 17)) {
                throw MalformedMessage("Query: CRC-5 mismatch");
            }
            return Query{q};
        }
        case MessageKind::Rn16:
            return Rn16{static_cast<std::uint16_t>(r.get(16))};
        case MessageKind::AckChallenge: {
            if (r.get(2) != kAckCommand || r.get(16) != 0) {
                throw MalformedMessage("ACK: bad framing");
            }
            return AckChallenge{r.get(8 * cfg.cr_bytes)};
        }
        case MessageKind::AuthRequest: {
            AuthRequest a;
            a.r1 = get_sym(r, id_cr_bytes(cfg));
            a.r2 = get_kem(r, key_ct_bytes(cfg));
            return a;
        }
        case MessageKind::ServerRequest: {
            ServerRequest s;
            s.auth.r1 = get_sym(r, id_cr_bytes(cfg));
            s.auth.r2 = get_kem(r, key_ct_bytes(cfg));
            s.cr_reader = r.get(8 * cfg.cr_bytes);
            s.time_us = r.get(8 * cfg.time_bytes);
            return s;
        }
        case MessageKind::ServerResponse:
            return ServerResponse{get_sym(r, final_payload_bytes(cfg))};
    }
    throw MalformedMessage("unknown message kind");
}

}  // namespace rfidauth::wire
