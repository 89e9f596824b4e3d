#pragma once

// Hybrid cryptography primitives: a 128-bit block cipher for data blocks and
// an elliptic-curve integrated encryption (KEM + symmetric wrap) for the
// session key.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rfidauth/result.hpp"
#include "rfidauth/rng.hpp"

namespace rfidauth::crypto {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kBlockBytes = 16;
inline constexpr std::size_t kSymKeyBytes = 16;
/// Bytes of the truncated plaintext hash carried inside every symmetric record.
inline constexpr std::size_t kCheckBytes = 4;
inline constexpr std::size_t kKemTagBytes = 8;

/// Identifies the concrete constructions; echoed in run metadata.
inline constexpr std::string_view kSymModeName = "aes-128-cbc+sha256/32-check";
inline constexpr std::string_view kKemName = "ecies-sect233r1-x963kdf-sha256-hmac64";

enum class CryptoError {
    IntegrityFailure,
};

struct SymKey {
    std::array<std::uint8_t, kSymKeyBytes> bytes{};

    static SymKey generate(SeededRng& rng);
    friend bool operator==(const SymKey&, const SymKey&) = default;
};

struct SymCiphertext {
    std::array<std::uint8_t, kBlockBytes> iv{};
    Bytes blocks;
    /// Plaintext length in bytes. Implied by the message kind on the air
    /// interface and carried as a length prefix in serialized form.
    std::size_t payload_len = 0;

    [[nodiscard]] std::size_t bit_length() const { return 8 * (iv.size() + blocks.size()); }

    /// u16 payload length, IV, blocks.
    [[nodiscard]] Bytes serialize() const;
    static std::optional<SymCiphertext> deserialize(std::span<const std::uint8_t> bytes);

    friend bool operator==(const SymCiphertext&, const SymCiphertext&) = default;
};

/// On-air size of a symmetric ciphertext for a payload of `payload_bits`:
/// one IV block plus ceil((payload_bits + check bits) / 128) blocks.
[[nodiscard]] std::size_t sym_ciphertext_bits(std::size_t payload_bits);

/// CBC encryption with a fresh random IV drawn from `rng`.
[[nodiscard]] SymCiphertext sym_encrypt(const SymKey& key, std::span<const std::uint8_t> plaintext, SeededRng& rng);

/// Same record layout with a caller-chosen IV. Deterministic; exists for
/// known-answer tests and for deliberately weakened variants in the
/// adversary harness.
[[nodiscard]] SymCiphertext sym_encrypt_with_iv(const SymKey& key, std::span<const std::uint8_t> plaintext,
                                                const std::array<std::uint8_t, kBlockBytes>& iv);

[[nodiscard]] Result<Bytes, CryptoError> sym_decrypt(const SymKey& key, const SymCiphertext& ct);

// ---------------------------------------------------------------------------
// Elliptic-curve encapsulation

/// Parameters of the configured binary curve (sect233r1 / NIST B-233).
struct CurveInfo {
    std::string_view name;
    int field_bits;
    std::size_t scalar_bytes;
    std::size_t compressed_point_bytes;
};

[[nodiscard]] const CurveInfo& curve_info();

struct CurveKeyPair {
    Bytes private_scalar;  ///< big-endian, curve_info().scalar_bytes long
    Bytes public_point;    ///< compressed SEC1 encoding
};

struct KemCiphertext {
    Bytes ephemeral_point;  ///< compressed SEC1 encoding
    Bytes wrapped_payload;
    std::uint64_t auth_tag = 0;

    [[nodiscard]] std::size_t bit_length() const {
        return 8 * (ephemeral_point.size() + wrapped_payload.size() + kKemTagBytes);
    }

    /// u16 payload length, point, wrapped payload, tag (big-endian).
    [[nodiscard]] Bytes serialize() const;
    static std::optional<KemCiphertext> deserialize(std::span<const std::uint8_t> bytes);

    friend bool operator==(const KemCiphertext&, const KemCiphertext&) = default;
};

/// On-air size of a KEM ciphertext for a payload of `payload_bits`.
[[nodiscard]] std::size_t kem_ciphertext_bits(std::size_t payload_bits);

[[nodiscard]] CurveKeyPair kem_keygen(SeededRng& rng);

/// Keypair for an explicit scalar (must lie in [1, order-1]).
[[nodiscard]] CurveKeyPair kem_keypair_from_scalar(std::span<const std::uint8_t> scalar);

/// Compressed encoding of the curve generator.
[[nodiscard]] Bytes curve_generator();

/// True iff `point` decodes to a finite point satisfying the curve equation.
[[nodiscard]] bool is_valid_point(std::span<const std::uint8_t> point);

[[nodiscard]] KemCiphertext kem_encapsulate(std::span<const std::uint8_t> public_point,
                                            std::span<const std::uint8_t> payload, SeededRng& rng);

[[nodiscard]] Result<Bytes, CryptoError> kem_decapsulate(std::span<const std::uint8_t> private_scalar,
                                                         const KemCiphertext& ct);

// ---------------------------------------------------------------------------
// Reference key-size equivalence table (bits). ECC upper bound is open-ended
// in the last row.

struct KeySizeRow {
    int aes;
    int ecc_min;
    std::optional<int> ecc_max;
    int rabin;
    int rsa;
};

[[nodiscard]] std::span<const KeySizeRow> key_size_table();
[[nodiscard]] std::optional<KeySizeRow> key_sizes_for_aes(int aes_bits);

}  // namespace rfidauth::crypto
