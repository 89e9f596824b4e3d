#include "rfidauth/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace rfidauth::crypto {
namespace {

struct BnCtxFree {
    void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct BnFree {
    void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct PointFree {
    void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct CipherCtxFree {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxFree>;
using BnPtr = std::unique_ptr<BIGNUM, BnFree>;
using PointPtr = std::unique_ptr<EC_POINT, PointFree>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

void check(int ok, const char* what) {
    if (ok != 1) {
        throw std::runtime_error(std::string("openssl failure: ") + what);
    }
}

// The group is immutable after construction and only read afterwards.
struct Curve {
    EC_GROUP* group = nullptr;
    BIGNUM* order = nullptr;
    CurveInfo info{};

    Curve() {
        group = EC_GROUP_new_by_curve_name(NID_sect233r1);
        if (group == nullptr) {
            throw std::runtime_error("sect233r1 unavailable in this OpenSSL build");
        }
        order = BN_new();
        check(EC_GROUP_get_order(group, order, nullptr), "EC_GROUP_get_order");
        const int degree = EC_GROUP_get_degree(group);
        const auto field_bytes = static_cast<std::size_t>((degree + 7) / 8);
        info = CurveInfo{"sect233r1", degree, static_cast<std::size_t>(BN_num_bytes(order)), field_bytes + 1};
    }
    ~Curve() {
        BN_free(order);
        EC_GROUP_free(group);
    }
    Curve(const Curve&) = delete;
    Curve& operator=(const Curve&) = delete;
};

const Curve& curve() {
    static const Curve c;
    return c;
}

std::array<std::uint8_t, SHA256_DIGEST_LENGTH> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, SHA256_DIGEST_LENGTH> out{};
    unsigned int len = 0;
    check(EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr), "EVP_Digest");
    return out;
}

void put_u16(Bytes& out, std::size_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

Bytes cbc(const SymKey& key, const std::array<std::uint8_t, kBlockBytes>& iv, std::span<const std::uint8_t> in,
          bool encrypt) {
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    check(EVP_CipherInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.bytes.data(), iv.data(), encrypt ? 1 : 0),
          "EVP_CipherInit_ex");
    check(EVP_CIPHER_CTX_set_padding(ctx.get(), 0), "set_padding");
    Bytes out(in.size() + kBlockBytes);
    int n = 0;
    int tail = 0;
    check(EVP_CipherUpdate(ctx.get(), out.data(), &n, in.data(), static_cast<int>(in.size())), "EVP_CipherUpdate");
    check(EVP_CipherFinal_ex(ctx.get(), out.data() + n, &tail), "EVP_CipherFinal_ex");
    out.resize(static_cast<std::size_t>(n + tail));
    return out;
}

std::size_t record_bytes(std::size_t payload_len) {
    const std::size_t raw = payload_len + kCheckBytes;
    return (raw + kBlockBytes - 1) / kBlockBytes * kBlockBytes;
}

BnPtr random_scalar(SeededRng& rng) {
    const Curve& c = curve();
    const int bits = BN_num_bits(c.order);
    Bytes buf(c.info.scalar_bytes);
    const int excess = static_cast<int>(8 * buf.size()) - bits;
    for (;;) {
        rng.fill(buf);
        buf[0] &= static_cast<std::uint8_t>(0xffu >> excess);
        BnPtr k(BN_bin2bn(buf.data(), static_cast<int>(buf.size()), nullptr));
        if (!BN_is_zero(k.get()) && BN_cmp(k.get(), c.order) < 0) {
            return k;
        }
    }
}

Bytes scalar_bytes(const BIGNUM* k) {
    Bytes out(curve().info.scalar_bytes);
    check(BN_bn2binpad(k, out.data(), static_cast<int>(out.size())) > 0 ? 1 : 0, "BN_bn2binpad");
    return out;
}

Bytes encode_point(const EC_POINT* p, BN_CTX* ctx) {
    const Curve& c = curve();
    Bytes out(c.info.compressed_point_bytes);
    const std::size_t n =
        EC_POINT_point2oct(c.group, p, POINT_CONVERSION_COMPRESSED, out.data(), out.size(), ctx);
    if (n != out.size()) {
        throw std::runtime_error("EC_POINT_point2oct");
    }
    return out;
}

PointPtr decode_point(std::span<const std::uint8_t> bytes, BN_CTX* ctx) {
    const Curve& c = curve();
    if (bytes.size() != c.info.compressed_point_bytes || (bytes[0] != 0x02 && bytes[0] != 0x03)) {
        return nullptr;
    }
    PointPtr p(EC_POINT_new(c.group));
    if (EC_POINT_oct2point(c.group, p.get(), bytes.data(), bytes.size(), ctx) != 1) {
        return nullptr;
    }
    if (EC_POINT_is_at_infinity(c.group, p.get()) || EC_POINT_is_on_curve(c.group, p.get(), ctx) != 1) {
        return nullptr;
    }
    return p;
}

struct KemKeys {
    Bytes stream;
    Bytes mac_key;
};

// ANSI X9.63 KDF over SHA-256: Hash(Z || counter || SharedInfo), with the
// ephemeral point encoding as SharedInfo so that the ciphertext binds it.
KemKeys derive(const EC_POINT* shared, std::span<const std::uint8_t> ephemeral, std::size_t payload_len,
               BN_CTX* ctx) {
    const Curve& c = curve();
    BnPtr x(BN_new());
    check(EC_POINT_get_affine_coordinates(c.group, shared, x.get(), nullptr, ctx), "get_affine_coordinates");
    Bytes z(c.info.compressed_point_bytes - 1);
    check(BN_bn2binpad(x.get(), z.data(), static_cast<int>(z.size())) > 0 ? 1 : 0, "BN_bn2binpad");

    const std::size_t need = payload_len + 32;
    Bytes material;
    material.reserve(need + SHA256_DIGEST_LENGTH);
    Bytes input;
    for (std::uint32_t counter = 1; material.size() < need; ++counter) {
        input.assign(z.begin(), z.end());
        for (int s = 24; s >= 0; s -= 8) {
            input.push_back(static_cast<std::uint8_t>(counter >> s));
        }
        input.insert(input.end(), ephemeral.begin(), ephemeral.end());
        const auto d = sha256(input);
        material.insert(material.end(), d.begin(), d.end());
    }
    OPENSSL_cleanse(z.data(), z.size());
    KemKeys keys;
    keys.stream.assign(material.begin(), material.begin() + static_cast<std::ptrdiff_t>(payload_len));
    keys.mac_key.assign(material.begin() + static_cast<std::ptrdiff_t>(payload_len),
                        material.begin() + static_cast<std::ptrdiff_t>(need));
    OPENSSL_cleanse(material.data(), material.size());
    return keys;
}

std::uint64_t mac64(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len) ==
        nullptr) {
        throw std::runtime_error("HMAC");
    }
    std::uint64_t tag = 0;
    for (std::size_t i = 0; i < kKemTagBytes; ++i) {
        tag = (tag << 8) | out[i];
    }
    return tag;
}

}  // namespace

SymKey SymKey::generate(SeededRng& rng) {
    SymKey k;
    rng.fill(k.bytes);
    return k;
}

Bytes SymCiphertext::serialize() const {
    Bytes out;
    out.reserve(2 + iv.size() + blocks.size());
    put_u16(out, payload_len);
    out.insert(out.end(), iv.begin(), iv.end());
    out.insert(out.end(), blocks.begin(), blocks.end());
    return out;
}

std::optional<SymCiphertext> SymCiphertext::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 + kBlockBytes) {
        return std::nullopt;
    }
    SymCiphertext ct;
    ct.payload_len = (static_cast<std::size_t>(bytes[0]) << 8) | bytes[1];
    std::copy_n(bytes.begin() + 2, kBlockBytes, ct.iv.begin());
    ct.blocks.assign(bytes.begin() + 2 + kBlockBytes, bytes.end());
    return ct;
}

std::size_t sym_ciphertext_bits(std::size_t payload_bits) {
    const std::size_t record_bits = payload_bits + 8 * kCheckBytes;
    const std::size_t block_bits = 8 * kBlockBytes;
    return block_bits + (record_bits + block_bits - 1) / block_bits * block_bits;
}

SymCiphertext sym_encrypt(const SymKey& key, std::span<const std::uint8_t> plaintext, SeededRng& rng) {
    std::array<std::uint8_t, kBlockBytes> iv{};
    rng.fill(iv);
    return sym_encrypt_with_iv(key, plaintext, iv);
}

SymCiphertext sym_encrypt_with_iv(const SymKey& key, std::span<const std::uint8_t> plaintext,
                                  const std::array<std::uint8_t, kBlockBytes>& iv) {
    Bytes record(record_bytes(plaintext.size()), 0);
    std::copy(plaintext.begin(), plaintext.end(), record.begin());
    const auto digest = sha256(plaintext);
    std::copy_n(digest.begin(), kCheckBytes, record.begin() + static_cast<std::ptrdiff_t>(plaintext.size()));

    SymCiphertext ct;
    ct.iv = iv;
    ct.payload_len = plaintext.size();
    ct.blocks = cbc(key, iv, record, true);
    OPENSSL_cleanse(record.data(), record.size());
    return ct;
}

Result<Bytes, CryptoError> sym_decrypt(const SymKey& key, const SymCiphertext& ct) {
    if (ct.blocks.empty() || ct.blocks.size() % kBlockBytes != 0 || record_bytes(ct.payload_len) != ct.blocks.size()) {
        return Err{CryptoError::IntegrityFailure};
    }
    Bytes record = cbc(key, ct.iv, ct.blocks, false);
    const auto payload = std::span<const std::uint8_t>(record).first(ct.payload_len);
    const auto digest = sha256(payload);
    bool ok = CRYPTO_memcmp(digest.data(), record.data() + ct.payload_len, kCheckBytes) == 0;
    for (std::size_t i = ct.payload_len + kCheckBytes; i < record.size(); ++i) {
        ok = ok && record[i] == 0;
    }
    if (!ok) {
        OPENSSL_cleanse(record.data(), record.size());
        return Err{CryptoError::IntegrityFailure};
    }
    record.resize(ct.payload_len);
    return record;
}

// ---------------------------------------------------------------------------

const CurveInfo& curve_info() { return curve().info; }

Bytes KemCiphertext::serialize() const {
    Bytes out;
    put_u16(out, wrapped_payload.size());
    out.insert(out.end(), ephemeral_point.begin(), ephemeral_point.end());
    out.insert(out.end(), wrapped_payload.begin(), wrapped_payload.end());
    for (int s = 56; s >= 0; s -= 8) {
        out.push_back(static_cast<std::uint8_t>(auth_tag >> s));
    }
    return out;
}

std::optional<KemCiphertext> KemCiphertext::deserialize(std::span<const std::uint8_t> bytes) {
    const std::size_t point_len = curve_info().compressed_point_bytes;
    if (bytes.size() < 2) {
        return std::nullopt;
    }
    const std::size_t payload_len = (static_cast<std::size_t>(bytes[0]) << 8) | bytes[1];
    if (bytes.size() != 2 + point_len + payload_len + kKemTagBytes) {
        return std::nullopt;
    }
    KemCiphertext ct;
    auto it = bytes.begin() + 2;
    ct.ephemeral_point.assign(it, it + static_cast<std::ptrdiff_t>(point_len));
    it += static_cast<std::ptrdiff_t>(point_len);
    ct.wrapped_payload.assign(it, it + static_cast<std::ptrdiff_t>(payload_len));
    it += static_cast<std::ptrdiff_t>(payload_len);
    for (std::size_t i = 0; i < kKemTagBytes; ++i, ++it) {
        ct.auth_tag = (ct.auth_tag << 8) | *it;
    }
    return ct;
}

std::size_t kem_ciphertext_bits(std::size_t payload_bits) {
    return 8 * curve_info().compressed_point_bytes + payload_bits + 8 * kKemTagBytes;
}

CurveKeyPair kem_keygen(SeededRng& rng) {
    BnPtr k = random_scalar(rng);
    return kem_keypair_from_scalar(scalar_bytes(k.get()));
}

CurveKeyPair kem_keypair_from_scalar(std::span<const std::uint8_t> scalar) {
    const Curve& c = curve();
    BnCtxPtr ctx(BN_CTX_new());
    BnPtr k(BN_bin2bn(scalar.data(), static_cast<int>(scalar.size()), nullptr));
    if (BN_is_zero(k.get()) || BN_cmp(k.get(), c.order) >= 0) {
        throw std::invalid_argument("scalar outside [1, order-1]");
    }
    PointPtr pub(EC_POINT_new(c.group));
    check(EC_POINT_mul(c.group, pub.get(), k.get(), nullptr, nullptr, ctx.get()), "EC_POINT_mul");
    return CurveKeyPair{scalar_bytes(k.get()), encode_point(pub.get(), ctx.get())};
}

Bytes curve_generator() {
    BnCtxPtr ctx(BN_CTX_new());
    return encode_point(EC_GROUP_get0_generator(curve().group), ctx.get());
}

bool is_valid_point(std::span<const std::uint8_t> point) {
    BnCtxPtr ctx(BN_CTX_new());
    return decode_point(point, ctx.get()) != nullptr;
}

KemCiphertext kem_encapsulate(std::span<const std::uint8_t> public_point, std::span<const std::uint8_t> payload,
                              SeededRng& rng) {
    const Curve& c = curve();
    BnCtxPtr ctx(BN_CTX_new());
    PointPtr pk = decode_point(public_point, ctx.get());
    if (!pk) {
        throw std::invalid_argument("invalid recipient public point");
    }
    BnPtr e = random_scalar(rng);
    PointPtr eph(EC_POINT_new(c.group));
    check(EC_POINT_mul(c.group, eph.get(), e.get(), nullptr, nullptr, ctx.get()), "EC_POINT_mul");
    PointPtr shared(EC_POINT_new(c.group));
    check(EC_POINT_mul(c.group, shared.get(), nullptr, pk.get(), e.get(), ctx.get()), "EC_POINT_mul");

    KemCiphertext ct;
    ct.ephemeral_point = encode_point(eph.get(), ctx.get());
    KemKeys keys = derive(shared.get(), ct.ephemeral_point, payload.size(), ctx.get());
    ct.wrapped_payload.resize(payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        ct.wrapped_payload[i] = payload[i] ^ keys.stream[i];
    }
    ct.auth_tag = mac64(keys.mac_key, ct.wrapped_payload);
    OPENSSL_cleanse(keys.stream.data(), keys.stream.size());
    OPENSSL_cleanse(keys.mac_key.data(), keys.mac_key.size());
    return ct;
}

Result<Bytes, CryptoError> kem_decapsulate(std::span<const std::uint8_t> private_scalar, const KemCiphertext& ct) {
    const Curve& c = curve();
    BnCtxPtr ctx(BN_CTX_new());
    PointPtr eph = decode_point(ct.ephemeral_point, ctx.get());
    if (!eph) {
        return Err{CryptoError::IntegrityFailure};
    }
    BnPtr sk(BN_bin2bn(private_scalar.data(), static_cast<int>(private_scalar.size()), nullptr));
    PointPtr shared(EC_POINT_new(c.group));
    check(EC_POINT_mul(c.group, shared.get(), nullptr, eph.get(), sk.get(), ctx.get()), "EC_POINT_mul");
    if (EC_POINT_is_at_infinity(c.group, shared.get())) {
        return Err{CryptoError::IntegrityFailure};
    }
    KemKeys keys = derive(shared.get(), ct.ephemeral_point, ct.wrapped_payload.size(), ctx.get());
    const std::uint64_t expected = mac64(keys.mac_key, ct.wrapped_payload);
    std::array<std::uint8_t, 8> a{};
    std::array<std::uint8_t, 8> b{};
    for (int i = 0; i < 8; ++i) {
        a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(expected >> (56 - 8 * i));
        b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(ct.auth_tag >> (56 - 8 * i));
    }
    if (CRYPTO_memcmp(a.data(), b.data(), a.size()) != 0) {
        return Err{CryptoError::IntegrityFailure};
    }
    Bytes payload(ct.wrapped_payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        payload[i] = ct.wrapped_payload[i] ^ keys.stream[i];
    }
    OPENSSL_cleanse(keys.stream.data(), keys.stream.size());
    OPENSSL_cleanse(keys.mac_key.data(), keys.mac_key.size());
    return payload;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::array<KeySizeRow, 6> kKeySizes{{
    {56, 112, 159, 512, 512},
    {80, 160, 223, 1024, 1024},
    {112, 224, 255, 2048, 2048},
    {128, 256, 383, 3072, 3072},
    {192, 384, 511, 7680, 7680},
    {256, 512, std::nullopt, 15360, 15360},
}};
}  // namespace

std::span<const KeySizeRow> key_size_table() { return kKeySizes; }

std::optional<KeySizeRow> key_sizes_for_aes(int aes_bits) {
    const auto it = std::find_if(kKeySizes.begin(), kKeySizes.end(), [&](const KeySizeRow& r) { return r.aes == aes_bits; });
    if (it == kKeySizes.end()) {
        return std::nullopt;
    }
    return *it;
}

}  // namespace rfidauth::crypto
