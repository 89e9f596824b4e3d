#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>

#include "rfidauth/crypto.hpp"

namespace rfidauth::wire {

using crypto::Bytes;

inline constexpr std::size_t kIdBytes = 12;
using TagId = std::array<std::uint8_t, kIdBytes>;

inline constexpr std::size_t kQueryBits = 22;
inline constexpr std::size_t kRn16Bits = 16;
inline constexpr std::size_t kAckBaseBits = 18;

/// Field widths of the handshake. Nonces are carried as big-endian integers
/// of the configured byte width (1..8).
struct ProtocolConfig {
    std::size_t cr_bytes = 4;
    std::size_t ct_bytes = 4;
    std::size_t time_bytes = 8;  ///< sleep time in microseconds

    void validate() const;
    [[nodiscard]] std::uint64_t cr_mask() const;
    [[nodiscard]] std::uint64_t ct_mask() const;
};

class MalformedMessage : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Query {
    std::uint8_t q = 4;
    friend bool operator==(const Query&, const Query&) = default;
};

struct Rn16 {
    std::uint16_t value = 0;
    friend bool operator==(const Rn16&, const Rn16&) = default;
};

struct AckChallenge {
    std::uint64_t cr = 0;
    friend bool operator==(const AckChallenge&, const AckChallenge&) = default;
};

/// R1 = E_k(ID || Cr), R2 = KEM_pk(k || Ct).
struct AuthRequest {
    crypto::SymCiphertext r1;
    crypto::KemCiphertext r2;
    friend bool operator==(const AuthRequest&, const AuthRequest&) = default;
};

/// What the reader forwards over the trusted backhaul.
struct ServerRequest {
    AuthRequest auth;
    std::uint64_t cr_reader = 0;
    std::uint64_t time_us = 0;
    friend bool operator==(const ServerRequest&, const ServerRequest&) = default;
};

/// B = E_k(Cr || Ct || Time).
struct ServerResponse {
    crypto::SymCiphertext b;
    friend bool operator==(const ServerResponse&, const ServerResponse&) = default;
};

using Message = std::variant<Query, Rn16, AckChallenge, AuthRequest, ServerRequest, ServerResponse>;

enum class MessageKind { Query, Rn16, AckChallenge, AuthRequest, ServerRequest, ServerResponse };

[[nodiscard]] std::string_view to_string(MessageKind kind);
[[nodiscard]] MessageKind kind_of(const Message& m);

/// Bit-exact encoding, MSB first; trailing pad bits in the last byte are zero.
struct WireMessage {
    MessageKind kind = MessageKind::Query;
    Bytes payload;
    std::size_t bit_length = 0;
};

/// Declared on-air size of each message kind under `cfg`.
[[nodiscard]] std::size_t message_bits(MessageKind kind, const ProtocolConfig& cfg);

/// Query + RN16 + ACK + R1 + R2 + B.
[[nodiscard]] std::size_t handshake_bits(const ProtocolConfig& cfg);

[[nodiscard]] std::size_t id_cr_bytes(const ProtocolConfig& cfg);
[[nodiscard]] std::size_t key_ct_bytes(const ProtocolConfig& cfg);
[[nodiscard]] std::size_t final_payload_bytes(const ProtocolConfig& cfg);

/// CRC-5 (x^5 + x^3 + 1, preset 01001) over `bits` MSB-first bits of `data`.
[[nodiscard]] std::uint8_t crc5(std::span<const std::uint8_t> data, std::size_t bits);

[[nodiscard]] WireMessage encode_message(const Message& m, const ProtocolConfig& cfg = {});

/// Throws MalformedMessage on wrong length, bad framing, bad CRC, nonzero
/// padding or an invalid curve point.
[[nodiscard]] Message decode_message(const WireMessage& w, const ProtocolConfig& cfg = {});

// Big-endian helpers shared by the agents.
void put_be(Bytes& out, std::uint64_t v, std::size_t width);
[[nodiscard]] std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t width);

}  // namespace rfidauth::wire
