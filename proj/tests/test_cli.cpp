#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

/// Run the CLI with arguments, capturing stdout and stderr.
Run run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "mgconv_test_cli.log";
    const std::string cmd = std::string(MGCONV_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

fs::path write_config(const std::string& name, const nlohmann::json& doc) {
    const fs::path p = fs::temp_directory_path() / ("mgconv_test_cli_" + name + ".json");
    std::ofstream(p) << doc.dump(2);
    return p;
}

nlohmann::json small_config() {
    return nlohmann::json::parse(R"({
      "seed": 3,
      "field": {"kind": "uniform", "p": 10},
      "grid": {"coarse_cells": 5, "levels": 3},
      "dataset": {"n1": 4},
      "contraction": {"levels": [3], "k": [1, 2], "cycles": 4, "samples": 2},
      "weights": {"levels": [3, 4, 5], "m": [1, 2]},
      "metrics": {"samples": 2, "reference_offset": 1}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run("").code != 0);
    CHECK(run("verify").code == 2);
    CHECK(run("generate --config /nonexistent.json").code == 2);
    CHECK(run("frobnicate").code == 2);
    const fs::path bad = write_config("bad", nlohmann::json{{"grid", {{"levels", 3}}}});
    const Run r = run("verify --config " + bad.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("field") != std::string::npos);
}

TEST_CASE("verify passes on the default configuration") {
    const Run r = run("verify --config " + std::string(MGCONV_SOURCE_DIR) + "/configs/default.json");
    CHECK(r.code == 0);
    for (const char* name : {"operator_equivalence", "transfer_exactness", "galerkin_consistency", "conv_multigrid", "mul_unit"})
        CHECK(r.out.find(name) != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("verify reports corrupted kernels") {
    const fs::path cfg = write_config("verify", small_config());
    const Run r = run("verify --json --config " + cfg.string() + " --corrupt-kernel op");
    CHECK(r.code == 1);
    const auto start = r.out.find('[');
    REQUIRE(start != std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(r.out.substr(start, r.out.rfind(']') - start + 1));
    bool named = false;
    for (const auto& c : j)
        if (c.at("name") == "operator_equivalence") named = !c.at("passed").get<bool>();
    CHECK(named);
    CHECK(run("verify --config " + cfg.string() + " --corrupt-kernel restrict").code == 1);
    CHECK(run("verify --config " + cfg.string() + " --corrupt-kernel bogus").code == 2);
}

TEST_CASE("generate is deterministic across worker counts") {
    const fs::path cfg = write_config("generate", small_config());
    const fs::path a = fs::temp_directory_path() / "mgconv_test_cli_ds_a";
    const fs::path b = fs::temp_directory_path() / "mgconv_test_cli_ds_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("generate --config " + cfg.string() + " --out " + a.string() + " --workers 1").code == 0);
    REQUIRE(run("generate --config " + cfg.string() + " --out " + b.string() + " --workers 8").code == 0);
    for (const auto& entry : fs::directory_iterator(a)) {
        INFO(entry.path().filename().string());
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    CHECK(run("generate --config " + cfg.string() + " --out " + a.string()).code != 0);
    CHECK(run("generate --config " + cfg.string() + " --out " + a.string() + " --force --seed 4").code == 0);

    const Run inspect = run("inspect --json --dataset " + a.string());
    CHECK(inspect.code == 0);
    const nlohmann::json m = nlohmann::json::parse(inspect.out.substr(inspect.out.find('{')));
    CHECK(m.at("seed") == 4);
    CHECK(m.at("counts") == nlohmann::json{4, 2, 1});
    CHECK(run("verify --config " + cfg.string() + " --dataset " + a.string()).code == 0);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("contraction and weights tables") {
    const fs::path cfg = write_config("tables", small_config());
    const Run c = run("contraction --config " + cfg.string());
    REQUIRE(c.code == 0);
    std::istringstream lines(c.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "level,k,cycle,ratio");
    int rows = 0;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        ++rows;
        const double ratio = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(ratio > 0.0);
        CHECK(ratio < 1.0);
    }
    CHECK(rows == 2 * 4);

    const Run w = run("weights --config " + cfg.string());
    REQUIRE(w.code == 0);
    std::istringstream wl(w.out);
    std::getline(wl, line);
    CHECK(line == "L,k,k0,m,epsilon,weights,second_diff_L");
    int zeros = 0;
    while (std::getline(wl, line))
        if (!line.empty() && line.back() == '0' && line[line.size() - 2] == ',') ++zeros;
    CHECK(zeros == 2);
}

TEST_CASE("metrics and solve") {
    const fs::path cfg = write_config("metrics", small_config());
    const Run m = run("metrics --self --json --config " + cfg.string());
    REQUIRE(m.code == 0);
    const nlohmann::json j = nlohmann::json::parse(m.out.substr(m.out.find('[')));
    REQUIRE(j.size() == 4);
    for (const auto& r : j) {
        const std::string name = r.at("metric");
        if (name.find("_ref") == std::string::npos) CHECK(r.at("value").get<double>() == 0.0);
        else CHECK(r.at("value").get<double>() > 0.0);
    }
    const fs::path out = fs::temp_directory_path() / "mgconv_test_cli_solution.csv";
    CHECK(run("solve --config " + cfg.string() + " --index 1 --out " + out.string()).code == 0);
    CHECK(fs::exists(out));
    CHECK(fs::file_size(out) > 0);
    fs::remove(out);
}
