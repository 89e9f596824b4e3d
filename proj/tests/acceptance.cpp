// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "rfidauth/anticollision.hpp"
#include "rfidauth/crypto.hpp"
#include "rfidauth/metrics.hpp"
#include "rfidauth/protocol.hpp"

using namespace rfidauth;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

sim::Scenario scenario(traffic::TrafficModelName model, double bandwidth, double duration) {
    sim::Scenario s;
    s.traffic = traffic::TrafficModel::preset(model);
    s.radio.bandwidth_bps = bandwidth;
    s.duration_s = duration;
    return s;
}

constexpr traffic::TrafficModelName kModels[] = {traffic::TrafficModelName::Light, traffic::TrafficModelName::Medium,
                                                 traffic::TrafficModelName::Heavy};

// 1. Mean read ratio over 10 seeds, medium traffic, 128 kbps, at no delay and at
// the 10 ms bound.
Verdict read_ratio_claim() {
    const auto start = std::chrono::steady_clock::now();
    metrics::SweepSpec spec{scenario(traffic::TrafficModelName::Medium, 128e3, 120.0), {}};
    spec.axes.push_back({metrics::Axis::ServerDelay, {"0", "10"}});
    spec.axes.push_back({metrics::Axis::Seed, {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10"}});
    const auto reports = metrics::completed(metrics::run_sweep(spec, 0));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Verdict v{reports.size() == 20, ""};
    for (const auto& g : metrics::aggregate_seeds(reports)) {
        v.pass = v.pass && g.read_ratio.n == 10 && g.read_ratio.mean >= 0.88;
        v.detail += "delay " + fmt("%g", g.first.server_delay_s * 1e3) + " ms: " + fmt("%.4f", g.read_ratio.mean) +
                    " ± " + fmt("%.4f", g.read_ratio.se) + "; ";
    }
    v.pass = v.pass && wall < 60.0;
    v.detail += "wall " + fmt("%.1f", wall) + " s (need mean ≥ 0.88, < 60 s)";
    return v;
}

// 2. Read ratio does not rise with server delay (1% band).
Verdict monotone_delay() {
    metrics::SweepSpec spec{scenario(traffic::TrafficModelName::Medium, 256e3, 120.0), {}};
    spec.axes.push_back({metrics::Axis::ServerDelay, {"0", "5", "10", "15", "20", "25"}});
    const auto reports = metrics::completed(metrics::run_sweep(spec, 0));
    Verdict v{reports.size() == 6, "read_ratio"};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const double r = reports[i].read_ratio.value_or(-1.0);
        v.detail += " " + fmt("%.4f", r);
        if (i > 0) {
            v.pass = v.pass && r <= reports[i - 1].read_ratio.value_or(-1.0) + 0.01;
        }
        v.pass = v.pass && r >= 0.0;
    }
    return v;
}

// 3. Mean dwell per model within 15% of the reported values.
Verdict dwell_times() {
    const double expected[] = {0.718, 1.612, 13.333};
    Verdict v{true, ""};
    for (std::size_t m = 0; m < 3; ++m) {
        const auto r = sim::run(scenario(kModels[m], 256e3, 120.0));
        const double rel = r.dwell_s.mean / expected[m] - 1.0;
        v.pass = v.pass && r.dwell_s.n > 0 && std::fabs(rel) <= 0.15;
        v.detail += std::string(traffic::to_string(kModels[m])) + " " + fmt("%.3f", r.dwell_s.mean) + " s (" +
                    fmt("%+.1f", rel * 100.0) + "%); ";
    }
    return v;
}

// 4. Awake fraction with sleep at 1 Mbps, per model and delay, in [0.15, 0.30].
Verdict awake_fraction() {
    Verdict v{true, ""};
    for (auto model : kModels) {
        for (double delay : {0.0, 0.025}) {
            sim::Scenario s = scenario(model, 1e6, 60.0);
            s.server_delay_s = delay;
            const auto r = sim::run(s);
            const double a = r.awake_fraction.mean;
            v.pass = v.pass && r.awake_fraction.n > 0 && a >= 0.15 && a <= 0.30;
            v.detail += std::string(traffic::to_string(model)) + "@" + fmt("%g", delay * 1e3) + "ms " +
                        fmt("%.4f", a) + "; ";
        }
    }
    v.detail += "band [0.15, 0.30]";
    return v;
}

// 5. Awake-time reduction from sleeping, heavy traffic, same seeds, in [70%, 85%].
Verdict energy_saving() {
    Verdict v{true, ""};
    double on_sum = 0.0, off_sum = 0.0;
    for (std::uint64_t seed : {1u, 2u}) {
        sim::Scenario s = scenario(traffic::TrafficModelName::Heavy, 1e6, 60.0);
        s.seed = seed;
        const auto on = sim::run(s);
        s.sleep_enabled = false;
        const auto off = sim::run(s);
        v.pass = v.pass && on.eligible > 0 && on.eligible == off.eligible;
        on_sum += on.awake_s_mean;
        off_sum += off.awake_s_mean;
        v.detail += "seed " + std::to_string(seed) + " awake " + fmt("%.3f", on.awake_s_mean) + " s vs " +
                    fmt("%.3f", off.awake_s_mean) + " s; ";
    }
    const double saving = off_sum > 0.0 ? 1.0 - on_sum / off_sum : 0.0;
    v.pass = v.pass && saving >= 0.70 && saving <= 0.85;
    v.detail += "saving " + fmt("%.1f", saving * 100.0) + "% (band 70-85%)";
    return v;
}

// 6. Air-interface read latency at 1 Mbps in [1.0, 1.6] ms for every tag.
Verdict handshake_latency() {
    Verdict v{true, ""};
    for (double delay : {0.0, 0.025}) {
        sim::Scenario s = scenario(traffic::TrafficModelName::Medium, 1e6, 60.0);
        s.server_delay_s = delay;
        const auto r = sim::run(s);
        const auto& a = r.air_latency_s;
        v.pass = v.pass && a.n > 0 && a.min >= 1.0e-3 && a.max <= 1.6e-3;
        v.detail += "delay " + fmt("%g", delay * 1e3) + " ms: n " + std::to_string(a.n) + " min " +
                    fmt("%.4f", a.min * 1e3) + " max " + fmt("%.4f", a.max * 1e3) + " ms; ";
    }
    v.detail += "band [1.0, 1.6] ms";
    return v;
}

// 7. Attack harnesses, tracking and the weakened-cipher mutation.
Verdict security() {
    Verdict v{true, ""};
    const auto verdicts = metrics::attack_suite(2024, 1000);
    std::uint64_t attempts = 0, successes = 0;
    for (const auto& a : verdicts) {
        if (a.attack == adversary::Attack::Tracking) {
            const bool ok = a.attempts >= 500 && !a.linkable.value_or(true) &&
                            std::fabs(*a.accuracy - 0.5) <= 3.0 * *a.sigma;
            v.pass = v.pass && ok;
            v.detail += "tracking accuracy " + fmt("%.3f", *a.accuracy) + " (3σ " + fmt("%.3f", 3.0 * *a.sigma) + "); ";
        } else {
            v.pass = v.pass && a.attempts >= 1000 && a.successes == 0;
            attempts += a.attempts;
            successes += a.successes;
        }
    }
    v.detail = "attacks " + std::to_string(successes) + "/" + std::to_string(attempts) + " successes; " + v.detail;

    adversary::Testbed bed(2025, 2);
    SeededRng rng(2026);
    const auto a = adversary::weakened_sessions(bed.tag(0).identity(), 500, rng);
    const auto b = adversary::weakened_sessions(bed.tag(1).identity(), 500, rng);
    const auto weak = adversary::tracking_distinguisher(a, b, rng);
    v.pass = v.pass && weak.linkable.value_or(false);
    v.detail += "constant-IV variant accuracy " + fmt("%.3f", *weak.accuracy) +
                (weak.linkable.value_or(false) ? " (linkable)" : " (not linkable)");
    return v;
}

crypto::Bytes random_bytes(SeededRng& rng, std::size_t n) {
    crypto::Bytes b(n);
    for (auto& x : b) {
        x = static_cast<std::uint8_t>(rng.below(256));
    }
    return b;
}

// 8. Crypto roundtrips and single-bit mutations.
Verdict crypto_correctness() {
    using namespace crypto;
    SeededRng rng(8);
    std::size_t sym_ok = 0, kem_ok = 0, mutations = 0, accepted = 0;
    const auto kp = kem_keygen(rng);
    for (int i = 0; i < 10000; ++i) {
        const SymKey k = SymKey::generate(rng);
        const Bytes m = random_bytes(rng, 1 + rng.below(64));
        const auto pt = sym_decrypt(k, sym_encrypt(k, m, rng));
        sym_ok += pt && *pt == m ? 1 : 0;
        const Bytes p = random_bytes(rng, 20);
        const auto out = kem_decapsulate(kp.private_scalar, kem_encapsulate(kp.public_point, p, rng));
        kem_ok += out && *out == p ? 1 : 0;
    }
    for (int trial = 0; trial < 10; ++trial) {
        const SymKey k = SymKey::generate(rng);
        const SymCiphertext ct = sym_encrypt(k, random_bytes(rng, 20), rng);
        for (std::size_t bit = 0; bit < ct.bit_length(); ++bit) {
            SymCiphertext bad = ct;
            const auto mask = static_cast<std::uint8_t>(1u << (bit % 8));
            if (bit / 8 < bad.iv.size()) {
                bad.iv[bit / 8] ^= mask;
            } else {
                bad.blocks[bit / 8 - bad.iv.size()] ^= mask;
            }
            ++mutations;
            accepted += sym_decrypt(k, bad).has_value() ? 1 : 0;
        }
        const KemCiphertext kc = kem_encapsulate(kp.public_point, random_bytes(rng, 20), rng);
        const std::size_t point_bits = 8 * kc.ephemeral_point.size();
        const std::size_t wrap_bits = 8 * kc.wrapped_payload.size();
        for (std::size_t bit = 0; bit < kc.bit_length(); ++bit) {
            KemCiphertext bad = kc;
            if (bit < point_bits) {
                bad.ephemeral_point[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            } else if (bit < point_bits + wrap_bits) {
                const std::size_t b = bit - point_bits;
                bad.wrapped_payload[b / 8] ^= static_cast<std::uint8_t>(1u << (b % 8));
            } else {
                bad.auth_tag ^= std::uint64_t{1} << (bit - point_bits - wrap_bits);
            }
            ++mutations;
            accepted += kem_decapsulate(kp.private_scalar, bad).has_value() ? 1 : 0;
        }
    }
    return {sym_ok == 10000 && kem_ok == 10000 && accepted == 0,
            "sym " + std::to_string(sym_ok) + "/10000, kem " + std::to_string(kem_ok) + "/10000, mutations accepted " +
                std::to_string(accepted) + "/" + std::to_string(mutations)};
}

// 9. Slot statistics against the analytic fraction, and Q convergence.
Verdict anticollision_oracle() {
    using namespace anticollision;
    const std::uint32_t sizes[] = {1, 2, 4, 8, 16, 32};
    std::size_t cells = 0, within = 0;
    double worst = 0.0;
    for (std::uint32_t n : sizes) {
        for (std::uint32_t l : sizes) {
            SeededRng rng = SeededRng::derive(9, "grid");
            const std::uint64_t frames = 40000 / l;
            std::uint64_t slots = 0, singles = 0;
            std::vector<std::uint32_t> counts(l);
            for (std::uint64_t f = 0; f < frames; ++f) {
                std::fill(counts.begin(), counts.end(), 0u);
                for (std::uint32_t t = 0; t < n; ++t) {
                    ++counts[rng.below(l)];
                }
                for (std::uint32_t c : counts) {
                    singles += classify_slot(c).kind == SlotKind::Success ? 1 : 0;
                }
                slots += l;
            }
            const double p = expected_success_fraction(n, l);
            const double freq = static_cast<double>(singles) / static_cast<double>(slots);
            const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(slots));
            const double z = sigma > 0.0 ? std::fabs(freq - p) / sigma : (freq == p ? 0.0 : 1e9);
            worst = std::max(worst, z);
            ++cells;
            within += z <= 3.0 ? 1 : 0;
        }
    }

    const std::size_t n = 64;
    SeededRng rng(99);
    FrameArbiter arb(4.0, 0.3);
    std::vector<std::uint32_t> tail;
    for (int f = 0; f < 100; ++f) {
        const std::uint32_t size = arb.begin_frame();
        std::vector<std::uint32_t> counts(size);
        for (std::size_t t = 0; t < n; ++t) {
            ++counts[rng.below(size)];
        }
        for (std::uint32_t s = 0; !arb.frame_over(); ++s) {
            (void)arb.record_slot(counts[s]);
        }
        if (f >= 90) {
            tail.push_back(size);
        }
    }
    std::nth_element(tail.begin(), tail.begin() + 5, tail.end());
    const std::uint32_t median = tail[5];
    const bool converged = median >= n / 2 && median <= 2 * n;
    return {within == cells && converged, std::to_string(within) + "/" + std::to_string(cells) +
                                              " grid cells within 3σ (worst " + fmt("%.2f", worst) +
                                              "σ); n=64 settles at frame size " + std::to_string(median)};
}

// 10. Exactly two decrypt operations per authentication, any database size.
Verdict constant_work() {
    using namespace protocol;
    Verdict v{true, ""};
    for (std::size_t size : {std::size_t{10}, std::size_t{100000}}) {
        SeededRng rng = SeededRng::derive(10, "keys");
        const auto keys = crypto::kem_keygen(rng);
        AuthServer server(keys);
        for (std::size_t i = 0; i < size; ++i) {
            server.enroll(make_tag_id(10, i));
        }
        ReaderAgent reader;
        std::uint64_t min_ops = ~0ull, max_ops = 0;
        std::size_t accepted = 0;
        for (std::size_t i : {std::size_t{0}, size / 2, size - 1, size + 5}) {
            TagAgent tag(TagIdentity{make_tag_id(10, i), keys.public_point});
            (void)tag.on_query(Query{0}, rng);
            tag.on_ack(reader.ack(rng));
            const auto req = reader.forward(*tag.build_auth(rng), 1.0);
            server.reset_counters();
            accepted += server.authenticate(req, rng).has_value() ? 1 : 0;
            const auto c = server.counters();
            min_ops = std::min(min_ops, c.decapsulations + c.sym_decryptions);
            max_ops = std::max(max_ops, c.decapsulations + c.sym_decryptions);
        }
        v.pass = v.pass && min_ops == 2 && max_ops == 2 && accepted == 3;
        v.detail += "db " + std::to_string(size) + ": " + std::to_string(min_ops) + "-" + std::to_string(max_ops) +
                    " ops; ";
    }
    return v;
}

// 11. Same scenario, same CSV bytes.
Verdict determinism() {
    metrics::SweepSpec spec{scenario(traffic::TrafficModelName::Medium, 256e3, 60.0), {}};
    spec.axes.push_back({metrics::Axis::ServerDelay, {"0", "10"}});
    const std::string a = metrics::emit_csv(metrics::completed(metrics::run_sweep(spec, 1)));
    const std::string b = metrics::emit_csv(metrics::completed(metrics::run_sweep(spec, 1)));
    return {a == b && std::count(a.begin(), a.end(), '\n') == 3,
            std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"read ratio, medium 128 kbps, delay ≤ 10 ms", read_ratio_claim},
        {"read ratio non-increasing in delay", monotone_delay},
        {"dwell times", dwell_times},
        {"awake fraction with sleep", awake_fraction},
        {"energy saving, heavy", energy_saving},
        {"air-interface read latency", handshake_latency},
        {"security harnesses", security},
        {"crypto correctness", crypto_correctness},
        {"anti-collision oracle", anticollision_oracle},
        {"constant server work", constant_work},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        const Verdict v = criteria[i].second();
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("CRITERION %zu %s: %s [%s] (%.1f s)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                    v.detail.c_str(), wall);
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
