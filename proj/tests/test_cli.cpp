#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "obsim/builtins.hpp"
#include "obsim/dsl.hpp"
#include "subprocess.hpp"
#include "test_support.hpp"

using subprocess::run;

namespace {

namespace fs = std::filesystem;

struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() / ("obsim_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        subprocess::write_file(path("frw.scn"), obsim::emit_scenario(obsim::builtin_frw()));
        subprocess::write_file(path("wigner.scn"), obsim::emit_scenario(obsim::builtin_wigner()));
        subprocess::write_file(path("uniform.prior"),
                               "p{} = 0.25\np{I} = 0.25\np{II} = 0.25\np{I,II} = 0.25\n");
        subprocess::write_file(path("pm12.prior"), "p{I,II} = 1\n");
        subprocess::write_file(path("bad_sum.prior"), "p{} = 0.6\np{I} = 0.6\n");
        subprocess::write_file(path("none.prior"), "p{} = 1\n");
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string &name) const { return (dir / name).string(); }
};

const Workspace &ws() {
    static Workspace w;
    return w;
}

std::string bin() {
    return subprocess::binary();
}

int line_count(const std::string &s) {
    int n = 0;
    for (char c : s) {
        n += c == '\n' ? 1 : 0;
    }
    return n;
}

// Parses a TSV body into (label-columns, prob) rows.
std::vector<std::pair<std::vector<std::string>, double>> parse_tsv(const std::string &tsv) {
    std::vector<std::pair<std::vector<std::string>, double>> rows;
    std::istringstream lines(tsv);
    std::string line;
    std::getline(lines, line); // header
    while (std::getline(lines, line)) {
        std::vector<std::string> cols;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, '\t')) {
            cols.push_back(cell);
        }
        const double p = std::strtod(cols.back().c_str(), nullptr);
        cols.pop_back();
        rows.push_back({cols, p});
    }
    return rows;
}

} // namespace

TEST_CASE("builtin: canonical, deterministic, pipe-validates") {
    const auto frw1 = run(bin() + " builtin frw");
    const auto frw2 = run(bin() + " builtin frw");
    CHECK(frw1.code == 0);
    CHECK(frw1.out == frw2.out);
    CHECK(frw1.out == obsim::emit_scenario(obsim::builtin_frw()));

    const auto wigner = run(bin() + " builtin wigner");
    CHECK(wigner.code == 0);
    CHECK(wigner.out.find("observer \"W\"") != std::string::npos);

    const auto piped = run(bin() + " builtin frw | " + bin() + " validate - 2>/dev/null");
    CHECK(piped.code == 0);
    CHECK(piped.out.empty());

    CHECK(run(bin() + " builtin nope 2>/dev/null").code == 3);
}

TEST_CASE("validate: violations to stdout with exit 1, parse errors exit 2") {
    const auto good = run(bin() + " validate " + ws().path("frw.scn") + " 2>/dev/null");
    CHECK(good.code == 0);
    CHECK(good.out.empty());

    // Breaking one projector coefficient breaks completeness.
    std::string broken = obsim::emit_scenario(obsim::builtin_frw());
    const std::string needle = "branch ok : 0.5*|down><down|";
    REQUIRE(broken.find(needle) != std::string::npos);
    broken.replace(broken.find(needle), needle.size(), "branch ok : 0.7*|down><down|");
    subprocess::write_file(ws().path("broken.scn"), broken);
    const auto bad = run(bin() + " validate " + ws().path("broken.scn"));
    CHECK(bad.code == 1);
    CHECK(bad.out.find("step IV") != std::string::npos);
    CHECK(bad.out.find("completeness") != std::string::npos);

    subprocess::write_file(ws().path("syntax.scn"), "scenario \"x\"\nfactor a { u v }\n");
    CHECK(run(bin() + " validate " + ws().path("syntax.scn") + " 2>/dev/null").code == 2);
}

TEST_CASE("exact: partitions, mixtures, and failure modes") {
    const auto both = run(bin() + " exact " + ws().path("frw.scn") + " --partition I,II");
    CHECK(both.code == 0);
    const auto both_rows = parse_tsv(both.out);
    REQUIRE(both_rows.size() == 4);
    bool saw_halt_row = false;
    for (const auto &[labels, p] : both_rows) {
        if (labels == std::vector<std::string>{"-", "-", "okbar", "ok"}) {
            saw_halt_row = true;
            CHECK(std::abs(p - 1.0 / 12.0) <= 1e-12);
        }
    }
    CHECK(saw_halt_row);

    const auto none = run(bin() + " exact " + ws().path("frw.scn") + " --partition none");
    const auto none_rows = parse_tsv(none.out);
    REQUIRE(none_rows.size() == 16);
    int twelfths = 0, zeros = 0;
    for (const auto &[labels, p] : none_rows) {
        if (p == 0.0) {
            ++zeros;
        } else if (std::abs(p - 1.0 / 12.0) <= 1e-12) {
            ++twelfths;
        }
    }
    CHECK(twelfths == 12);
    CHECK(zeros == 4);

    const auto mix = run(bin() + " exact " + ws().path("frw.scn") + " --prior " +
                         ws().path("uniform.prior"));
    CHECK(mix.code == 0);
    double total = 0.0;
    for (const auto &[labels, p] : parse_tsv(mix.out)) {
        total += p;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);

    CHECK(run(bin() + " exact " + ws().path("frw.scn") + " --partition X 2>/dev/null").code == 3);
    CHECK(run(bin() + " exact " + ws().path("frw.scn") + " --prior " + ws().path("bad_sum.prior") +
              " 2>/dev/null")
              .code == 1);
    CHECK(run(bin() + " exact " + ws().path("frw.scn") + " 2>/dev/null").code == 3);
    CHECK(run(bin() + " exact " + ws().path("frw.scn") +
              " --partition none --prior x 2>/dev/null")
              .code == 3);
}

TEST_CASE("sample: cardinality, determinism, threads, uniformize, partition flag") {
    const std::string base = bin() + " sample " + ws().path("frw.scn") + " --prior " +
                             ws().path("pm12.prior") + " --seed 42";
    const auto three = run(base + " --rounds 3");
    CHECK(three.code == 0);
    CHECK(line_count(three.out) == 3);

    const auto again = run(base + " --rounds 3");
    CHECK(three.out == again.out);

    const auto serial = run(base + " --rounds 2000 --uniformize --record-partition");
    const auto threaded = run(base + " --rounds 2000 --uniformize --record-partition --threads 4");
    CHECK(serial.code == 0);
    CHECK(serial.out == threaded.out);
    CHECK(serial.out.find("\"partition\":[\"I\",\"II\"]") != std::string::npos);
    CHECK(serial.out.find("\"-\"") == std::string::npos);

    const auto blanks = run(base + " --rounds 3");
    CHECK(blanks.out.find("\"-\"") != std::string::npos);
    CHECK(blanks.out.find("partition") == std::string::npos);
}

TEST_CASE("halt: summary statistics and exhaustion") {
    const auto res = run(bin() + " halt " + ws().path("frw.scn") + " --prior " +
                         ws().path("pm12.prior") + " --seed 7 --max-rounds 10000 --trials 200");
    CHECK(res.code == 0);
    const auto j = nlohmann::json::parse(res.out);
    CHECK(j["trials"] == 200);
    CHECK(j["rounds"].size() == 200);
    CHECK(j["exhausted"] == 0);
    CHECK(j["mean"].get<double>() > 6.0);
    CHECK(j["mean"].get<double>() < 20.0);

    const auto rerun = run(bin() + " halt " + ws().path("frw.scn") + " --prior " +
                           ws().path("pm12.prior") + " --seed 7 --max-rounds 10000 --trials 200");
    CHECK(rerun.out == res.out);

    // A halt target with probability zero exhausts every trial.
    subprocess::write_file(ws().path("impossible.scn"),
                           obsim::emit_scenario(test_support::impossible_halt_scenario()));
    const auto stuck = run(bin() + " halt " + ws().path("impossible.scn") + " --prior " +
                           ws().path("none.prior") + " --seed 1 --max-rounds 50 --trials 10");
    CHECK(stuck.code == 0);
    const auto sj = nlohmann::json::parse(stuck.out);
    CHECK(sj["exhausted"] == 10);
    CHECK(sj["mean"].is_null());

    // No halt rule is a runtime error.
    CHECK(run(bin() + " halt " + ws().path("wigner.scn") + " --prior " + ws().path("none.prior") +
              " --seed 1 --max-rounds 10 --trials 2 2>/dev/null")
              .code == 3);
}

TEST_CASE("infer: end-to-end pipeline, methods, and failure modes") {
    const std::string sample_cmd = bin() + " sample " + ws().path("frw.scn") + " --prior " +
                                   ws().path("pm12.prior") +
                                   " --seed 5 --rounds 20000 --uniformize";
    const std::string data = ws().path("records.jsonl");
    REQUIRE(run(sample_cmd + " > " + data).code == 0);

    const std::string infer_cmd = bin() + " infer " + ws().path("frw.scn") + " --data " + data +
                                  " --partitions 'none;I;II;I,II'";
    const auto em = run(infer_cmd);
    CHECK(em.code == 0);
    const auto ej = nlohmann::json::parse(em.out);
    CHECK(ej["identifiable"] == true);
    CHECK(ej["converged"] == true);
    CHECK(ej["pHat"]["{I,II}"].get<double>() >= 0.9);

    const auto ls = run(infer_cmd + " --method ls");
    CHECK(ls.code == 0);
    const auto lj = nlohmann::json::parse(ls.out);
    double l1 = 0.0;
    for (const std::string key : {"{}", "{I}", "{II}", "{I,II}"}) {
        l1 += std::abs(ej["pHat"][key].get<double>() - lj["pHat"][key].get<double>());
    }
    CHECK(l1 <= 0.02);

    // Same invocation twice is byte-identical.
    CHECK(run(infer_cmd).out == em.out);

    // Records with blanks are rejected.
    const std::string blanks = ws().path("blanks.jsonl");
    REQUIRE(run(bin() + " sample " + ws().path("frw.scn") + " --prior " + ws().path("pm12.prior") +
                " --seed 5 --rounds 100 > " + blanks)
                .code == 0);
    CHECK(run(bin() + " infer " + ws().path("frw.scn") + " --data " + blanks +
              " --partitions 'none;I;II;I,II' 2>/dev/null")
              .code == 3);

    // Unknown step in the partition list.
    CHECK(run(bin() + " infer " + ws().path("frw.scn") + " --data " + data +
              " --partitions 'none;IX' 2>/dev/null")
              .code == 3);

    // Duplicate partitions: answered, flagged unidentifiable, exit 0.
    const auto dup = run(bin() + " infer " + ws().path("frw.scn") + " --data " + data +
                         " --partitions 'I,II;I,II'");
    CHECK(dup.code == 0);
    CHECK(nlohmann::json::parse(dup.out)["identifiable"] == false);

    // stdin works for data.
    const auto piped = run(sample_cmd + " | " + bin() + " infer " + ws().path("frw.scn") +
                           " --data - --partitions 'none;I;II;I,II'");
    CHECK(piped.out == em.out);
}

TEST_CASE("usage errors exit 3") {
    CHECK(run(bin() + " 2>/dev/null").code == 3);
    CHECK(run(bin() + " frobnicate 2>/dev/null").code == 3);
    CHECK(run(bin() + " sample " + ws().path("frw.scn") + " 2>/dev/null").code == 3);
    CHECK(run(bin() + " exact missing_file.scn --partition none 2>/dev/null").code == 3);
}
