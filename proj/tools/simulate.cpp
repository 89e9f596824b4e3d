// simulate <config> [--sweep axis=v1,v2]... [--csv out] [--json out] [--check]
//          [--seed N] [--attacks] [--trace out.jsonl] [--transcripts out.jsonl]
//          [--table5] [--threads N]
//
// Exit codes: 0 ok, 1 configuration or run error, 2 a --check line failed.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "rfidauth/config.hpp"
#include "rfidauth/metrics.hpp"

using namespace rfidauth;

namespace {

bool write_file(const std::string& path, const std::string& data) {
    if (path == "-") {
        std::cout << data;
        return true;
    }
    std::ofstream f(path, std::ios::binary);
    f << data;
    if (!f) {
        std::cerr << "simulate: cannot write " << path << "\n";
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vehicle tag authentication simulator"};
    std::string config_path;
    std::vector<std::string> sweeps;
    std::string csv_path, json_path, trace_path, transcripts_path;
    bool check = false, attacks = false, table5 = false;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    app.add_option("config", config_path, "scenario file (key = value)")->required();
    app.add_option("--sweep", sweeps, "axis=v1,v2,... over delay (ms), bandwidth, traffic, seed, sleep, protocol");
    app.add_option("--csv", csv_path, "write per-run CSV ('-' for stdout)");
    app.add_option("--json", json_path, "write JSON report ('-' for stdout)");
    app.add_flag("--check", check, "annotate thresholds and fail with exit code 2");
    app.add_option("--seed", seed, "override the scenario seed");
    app.add_flag("--attacks", attacks, "run the attack harnesses");
    app.add_option("--trace", trace_path, "event trace as JSON lines (single run only)");
    app.add_option("--transcripts", transcripts_path, "handshake transcripts as JSON lines (single run only)");
    app.add_flag("--table5", table5, "awake-time table layout; default grid when no --sweep is given");
    app.add_option("--threads", threads, "grid points run concurrently (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    try {
        metrics::SweepSpec spec{config::load_config(config_path), {}};
        if (seed) {
            spec.base.seed = *seed;
        }
        for (const auto& s : sweeps) {
            spec.axes.push_back(metrics::parse_axis(s));
        }
        if (table5 && spec.axes.empty()) {
            spec = metrics::table5_spec(spec.base);
        }
        const bool single = spec.axes.empty();
        if (!single && (!trace_path.empty() || !transcripts_path.empty())) {
            throw sim::ConfigError("trace", "--trace and --transcripts need a single run, not a sweep");
        }

        std::vector<metrics::SweepRow> rows;
        if (single) {
            std::ofstream trace;
            std::vector<protocol::Transcript> transcripts;
            sim::RunOptions opt;
            if (!trace_path.empty()) {
                trace.open(trace_path, std::ios::binary);
                opt.trace = &trace;
            }
            if (!transcripts_path.empty()) {
                opt.transcripts = &transcripts;
            }
            rows.push_back({spec.base, sim::run(spec.base, opt), {}});
            if (!transcripts_path.empty()) {
                std::string out;
                for (const auto& t : transcripts) {
                    out += protocol::to_jsonl(t) + "\n";
                }
                if (!write_file(transcripts_path, out)) {
                    return 1;
                }
            }
        } else {
            rows = metrics::run_sweep(spec, threads);
        }

        int status = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i].report) {
                std::cerr << "simulate: row " << i << ": " << rows[i].error << "\n";
                status = 1;
            }
        }

        std::vector<adversary::AttackVerdict> verdicts;
        if (attacks) {
            verdicts = metrics::attack_suite(spec.base.seed);
        }

        const auto reports = metrics::completed(rows);
        const auto summary = metrics::summarize(reports, verdicts, check);
        std::cout << summary.text;

        if (!csv_path.empty() &&
            !write_file(csv_path, table5 ? metrics::emit_table5_csv(reports) : metrics::emit_csv(reports))) {
            return 1;
        }
        if (!json_path.empty() && !write_file(json_path, metrics::to_json(rows, verdicts))) {
            return 1;
        }
        if (status != 0) {
            return status;
        }
        return check && !summary.passed ? 2 : 0;
    } catch (const sim::ConfigError& e) {
        std::cerr << "simulate: " << e.what() << "\n";
        return 1;
    }
}
