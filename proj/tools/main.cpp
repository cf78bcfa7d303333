#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "obsim/builtins.hpp"
#include "obsim/dsl.hpp"
#include "obsim/engine.hpp"
#include "obsim/format.hpp"
#include "obsim/inference.hpp"
#include "obsim/sampler.hpp"

namespace {

using obsim::Partition;
using obsim::PartitionPrior;
using obsim::Scenario;
using ordered_json = nlohmann::ordered_json;

// 0 success, 1 validation violations, 2 parse error, 3 runtime error.
constexpr int kOk = 0;
constexpr int kViolations = 1;
constexpr int kParse = 2;
constexpr int kRuntime = 3;

// Fill draws for `sample --uniformize` come from a stream far outside the
// per-round range so they can never collide with round streams.
constexpr std::uint64_t kFillStream = std::uint64_t{1} << 63;

struct CommandExit {
    int code;
    std::string message; // printed to stderr when non-empty
};

std::string read_input(const std::string &path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CommandExit{kRuntime, "cannot open '" + path + "'"};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Scenario load_scenario(const std::string &path) {
    const std::string text = read_input(path);
    auto parsed = obsim::parse_scenario(text);
    if (auto *err = std::get_if<obsim::ParseError>(&parsed)) {
        throw CommandExit{kParse, path + ":" + err->message()};
    }
    return std::get<Scenario>(std::move(parsed));
}

// Parse errors exit 2; structural violations exit 1.
Scenario load_valid_scenario(const std::string &path) {
    Scenario s = load_scenario(path);
    const std::vector<obsim::Violation> bad = obsim::validate(s);
    if (!bad.empty()) {
        std::string msg;
        for (const obsim::Violation &v : bad) {
            msg += path + ": " + v.where + ": " + v.message + "\n";
        }
        msg.pop_back();
        throw CommandExit{kViolations, msg};
    }
    return s;
}

PartitionPrior load_prior(const Scenario &s, const std::string &path) {
    const std::string text = read_input(path);
    auto parsed = obsim::parse_prior(text);
    if (auto *err = std::get_if<obsim::ParseError>(&parsed)) {
        throw CommandExit{kParse, path + ":" + err->message()};
    }
    PartitionPrior prior = std::get<PartitionPrior>(std::move(parsed));
    const std::vector<obsim::Violation> bad = obsim::validate_prior(s, prior);
    if (!bad.empty()) {
        std::string msg;
        for (const obsim::Violation &v : bad) {
            msg += path + ": " + v.where + ": " + v.message + "\n";
        }
        msg.pop_back();
        throw CommandExit{kViolations, msg};
    }
    return prior;
}

Partition parse_partition_arg(const std::string &arg) {
    if (arg == "none" || arg.empty()) {
        return Partition{};
    }
    std::vector<std::string> ids;
    std::string cur;
    for (char c : arg) {
        if (c == ',') {
            if (!cur.empty()) {
                ids.push_back(cur);
            }
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) {
        ids.push_back(cur);
    }
    return Partition{ids};
}

std::vector<Partition> parse_partition_list(const std::string &arg) {
    std::vector<Partition> out;
    std::string cur;
    for (char c : arg + ";") {
        if (c == ';') {
            out.push_back(parse_partition_arg(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

int cmd_builtin(const std::string &name) {
    Scenario s;
    if (name == "frw") {
        s = obsim::builtin_frw();
    } else if (name == "wigner") {
        s = obsim::builtin_wigner();
    } else {
        throw CommandExit{kRuntime, "unknown builtin '" + name + "' (expected frw or wigner)"};
    }
    std::cout << obsim::emit_scenario(s);
    return kOk;
}

int cmd_validate(const std::string &file) {
    Scenario s = load_scenario(file);
    const std::vector<obsim::Violation> bad = obsim::validate(s);
    for (const obsim::Violation &v : bad) {
        std::cout << v.where << ": " << v.message << "\n";
    }
    if (!bad.empty()) {
        return kViolations;
    }
    std::cerr << file << ": ok\n";
    return kOk;
}

int cmd_exact(const std::string &file, const std::string &partition_arg,
              const std::string &prior_file) {
    const Scenario s = load_valid_scenario(file);
    obsim::OutcomeDistribution dist;
    if (!prior_file.empty()) {
        dist = obsim::mixture_distribution(s, load_prior(s, prior_file));
    } else {
        dist = obsim::exact_distribution(s, parse_partition_arg(partition_arg));
    }
    std::cout << obsim::to_tsv(s, dist);
    return kOk;
}

int cmd_sample(const std::string &file, const std::string &prior_file, std::int64_t rounds,
               std::uint64_t seed, bool uniformize, bool record_partition, int threads) {
    const Scenario s = load_valid_scenario(file);
    const PartitionPrior prior = load_prior(s, prior_file).normalized();

    obsim::StreamRng fill_rng(seed, kFillStream);
    constexpr std::int64_t kWindow = 1 << 16;
    std::string buf;

    for (std::int64_t w0 = 0; w0 < rounds; w0 += kWindow) {
        const std::int64_t n = std::min(kWindow, rounds - w0);
        std::vector<obsim::RoundRecord> recs(static_cast<std::size_t>(n));
        const auto fill_chunk = [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                obsim::StreamRng rng(seed, static_cast<std::uint64_t>(w0 + r));
                recs[static_cast<std::size_t>(r)] = obsim::sample_round(s, prior, rng);
                recs[static_cast<std::size_t>(r)].round_index = w0 + r;
            }
        };
        if (threads <= 1) {
            fill_chunk(0, n);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
            const std::int64_t per = (n + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                const std::int64_t lo = t * per;
                const std::int64_t hi = std::min(n, lo + per);
                if (lo >= hi) {
                    break;
                }
                pool.emplace_back([&, lo, hi, t] {
                    try {
                        fill_chunk(lo, hi);
                    } catch (...) {
                        errors[static_cast<std::size_t>(t)] = std::current_exception();
                    }
                });
            }
            for (std::thread &th : pool) {
                th.join();
            }
            for (const std::exception_ptr &e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }
        buf.clear();
        for (obsim::RoundRecord &rec : recs) {
            if (!record_partition) {
                rec.true_partition.reset();
            }
            if (uniformize) {
                obsim::uniformize_record(s, rec, fill_rng);
            }
            buf += obsim::record_to_jsonl(s, rec, record_partition);
            buf += '\n';
        }
        std::cout << buf;
    }
    return kOk;
}

int cmd_halt(const std::string &file, const std::string &prior_file, std::uint64_t seed,
             std::int64_t max_rounds, std::int64_t trials) {
    const Scenario s = load_valid_scenario(file);
    const PartitionPrior prior = load_prior(s, prior_file).normalized();

    ordered_json per_trial = ordered_json::array();
    std::int64_t exhausted = 0;
    double total = 0.0;
    std::int64_t halted_trials = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const obsim::HaltRun run = obsim::run_until_halt(
            s, prior, seed, max_rounds, static_cast<std::uint64_t>(t * max_rounds));
        if (run.rounds) {
            per_trial.push_back(*run.rounds);
            total += static_cast<double>(*run.rounds);
            ++halted_trials;
        } else {
            per_trial.push_back(nullptr);
            ++exhausted;
        }
    }

    ordered_json out;
    out["trials"] = trials;
    out["maxRounds"] = max_rounds;
    out["rounds"] = std::move(per_trial);
    out["exhausted"] = exhausted;
    if (halted_trials > 0) {
        out["mean"] = total / static_cast<double>(halted_trials);
    } else {
        out["mean"] = nullptr;
    }
    std::cout << out.dump() << "\n";
    return kOk;
}

int cmd_infer(const std::string &file, const std::string &data_file,
              const std::string &partitions_arg, const std::string &method) {
    const Scenario s = load_valid_scenario(file);
    const std::vector<Partition> partitions = parse_partition_list(partitions_arg);

    const std::string data = read_input(data_file);
    std::vector<obsim::RoundRecord> records;
    std::istringstream lines(data);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            records.push_back(obsim::record_from_jsonl(s, line));
        } catch (const std::exception &e) {
            throw CommandExit{kRuntime, data_file + ":" + std::to_string(line_no) + ": " + e.what()};
        }
    }

    const obsim::ModelMatrix matrix = obsim::build_model_matrix(s, partitions);
    const obsim::CountsMap counts = obsim::counts_from_records(s, records);
    const obsim::EstimationResult res =
        method == "ls" ? obsim::estimate_ls(matrix, counts) : obsim::estimate_em(matrix, counts);

    ordered_json p_hat;
    for (const auto &[p, w] : res.p_hat.weights) {
        p_hat[p.display()] = w;
    }
    ordered_json out;
    out["pHat"] = std::move(p_hat);
    out["logLikelihood"] = res.log_likelihood;
    out["iterations"] = res.iterations;
    out["converged"] = res.converged;
    out["identifiable"] = res.identifiable;
    std::cout << out.dump() << "\n";
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    std::ios::sync_with_stdio(false);

    CLI::App app{"obsim: exact and sampled outcome statistics for sequential quantum "
                 "measurement experiments with merged-observer semantics"};
    app.require_subcommand(1);

    auto *builtin = app.add_subcommand("builtin", "print a built-in scenario (frw, wigner)");
    std::string builtin_name;
    builtin->add_option("name", builtin_name, "scenario name")->required();

    auto *validate = app.add_subcommand("validate", "check a scenario file ('-' for stdin)");
    std::string validate_file;
    validate->add_option("file", validate_file, "scenario file")->required();

    auto *exact = app.add_subcommand("exact", "exact outcome distribution as TSV");
    std::string exact_file, exact_partition, exact_prior;
    exact->add_option("file", exact_file, "scenario file")->required();
    auto *popt = exact->add_option("--partition", exact_partition,
                                   "merged step ids, comma separated ('none' for no merging)");
    auto *pri = exact->add_option("--prior", exact_prior, "prior file for the mixture");
    popt->excludes(pri);
    pri->excludes(popt);

    auto *sample = app.add_subcommand("sample", "simulate rounds, one JSON record per line");
    std::string sample_file, sample_prior;
    std::int64_t sample_rounds = 0;
    std::uint64_t sample_seed = 0;
    bool sample_uniformize = false, sample_record_partition = false;
    int sample_threads = 1;
    sample->add_option("file", sample_file, "scenario file")->required();
    sample->add_option("--prior", sample_prior, "prior file")->required();
    sample->add_option("--rounds", sample_rounds, "number of rounds")->required()
        ->check(CLI::PositiveNumber);
    sample->add_option("--seed", sample_seed, "64-bit seed")->required();
    sample->add_flag("--uniformize", sample_uniformize,
                     "fill merged-step blanks with uniform draws");
    sample->add_flag("--record-partition", sample_record_partition,
                     "include the drawn partition in each record");
    sample->add_option("--threads", sample_threads, "worker threads (output is identical)")
        ->check(CLI::Range(1, 64));

    auto *halt = app.add_subcommand("halt", "repeat runs until the halt condition fires");
    std::string halt_file, halt_prior;
    std::uint64_t halt_seed = 0;
    std::int64_t halt_max_rounds = 0, halt_trials = 0;
    halt->add_option("file", halt_file, "scenario file")->required();
    halt->add_option("--prior", halt_prior, "prior file")->required();
    halt->add_option("--seed", halt_seed, "64-bit seed")->required();
    halt->add_option("--max-rounds", halt_max_rounds, "round cap per trial")->required()
        ->check(CLI::PositiveNumber);
    halt->add_option("--trials", halt_trials, "independent trials")->required()
        ->check(CLI::PositiveNumber);

    auto *infer = app.add_subcommand("infer", "estimate partition weights from records");
    std::string infer_file, infer_data, infer_partitions, infer_method = "em";
    infer->add_option("file", infer_file, "scenario file")->required();
    infer->add_option("--data", infer_data, "JSONL records ('-' for stdin)")->required();
    infer->add_option("--partitions", infer_partitions,
                      "candidate partitions, ';' separated (e.g. 'none;I;II;I,II')")
        ->required();
    infer->add_option("--method", infer_method, "em (default) or ls")
        ->check(CLI::IsMember({"em", "ls"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kRuntime;
    }

    try {
        if (*builtin) {
            return cmd_builtin(builtin_name);
        }
        if (*validate) {
            return cmd_validate(validate_file);
        }
        if (*exact) {
            if (popt->count() == 0 && pri->count() == 0) {
                throw CommandExit{kRuntime, "exact needs --partition or --prior"};
            }
            if (pri->count() > 0) {
                return cmd_exact(exact_file, "", exact_prior);
            }
            return cmd_exact(exact_file, exact_partition, "");
        }
        if (*sample) {
            return cmd_sample(sample_file, sample_prior, sample_rounds, sample_seed,
                              sample_uniformize, sample_record_partition, sample_threads);
        }
        if (*halt) {
            return cmd_halt(halt_file, halt_prior, halt_seed, halt_max_rounds, halt_trials);
        }
        if (*infer) {
            return cmd_infer(infer_file, infer_data, infer_partitions, infer_method);
        }
    } catch (const CommandExit &e) {
        if (!e.message.empty()) {
            std::cerr << e.message << "\n";
        }
        return e.code;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kRuntime;
}
