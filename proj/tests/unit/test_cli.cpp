#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hsk/cli.hpp"

using namespace hsk::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(std::vector<std::string> args)
{
    args.insert(args.begin(), "hsk");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("hsk_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const auto p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* small_boltzmann = R"({"seed": 5, "boltzmann": {"samples": 2000, "dt": 0.05, "t_end": 0.5}})";

} // namespace

TEST_CASE("sha256 known vectors")
{
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config validation diagnostics")
{
    CHECK(validate_config(json::parse(R"({"seed": 1})")).empty());
    CHECK(validate_config(json::parse(R"({"seed": 1, "enskog": {}})")).empty());

    auto d = validate_config(json::parse(R"({"seed": 1, "enskog": {"epsilon": -0.1}})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "enskog.epsilon");

    d = validate_config(json::parse(R"({"seed": 1, "enskog": {"epsilon": 0.6, "cells": 16, "length": 8}})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "enskog.epsilon");
    CHECK(d[0].message.find("cell size") != std::string::npos);

    d = validate_config(json::parse(R"({"md": {}})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "seed");
    CHECK(d[0].message.find("\"seed\": ") != std::string::npos);

    d = validate_config(json::parse(R"({"seed": 1, "md": {"epsilon": "big", "colour": 3}, "extra": 1})"));
    CHECK(d.size() == 3);

    d = validate_config(json::parse(R"({"seed": -4})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "seed");

    d = validate_config(json::parse(R"({"seed": 1, "bgscan": {"epsilons": [0.1, 0.2]}})"));
    CHECK_FALSE(d.empty());
    d = validate_config(json::parse(R"({"seed": 1, "rods1d": {"epsilons": [0.1, 0]}})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "rods1d.epsilons[1]");
    d = validate_config(json::parse(R"({"seed": 1, "boltzmann": {"dt": 0.03, "t_end": 1}})"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].field == "boltzmann.t_end");
}

TEST_CASE("overrides and resolution")
{
    json cfg = json::parse(R"({"seed": 1})");
    apply_override(cfg, "bgscan.replicas=8");
    apply_override(cfg, "bgscan.sampling=whole_config");
    apply_override(cfg, "bgscan.epsilons=[0.3,0.2]");
    apply_override(cfg, "seed=9");
    CHECK(cfg["bgscan"]["replicas"] == 8);
    CHECK(cfg["bgscan"]["sampling"] == "whole_config");
    CHECK(cfg["bgscan"]["epsilons"].size() == 2);
    CHECK(cfg["seed"] == 9);
    CHECK_THROWS(apply_override(cfg, "novalue"));
    CHECK_THROWS(apply_override(cfg, "seed.x=1"));

    const auto r = resolve_config(cfg, "bgscan");
    CHECK(r["bgscan"]["replicas"] == 8);
    CHECK(r["bgscan"]["box_side"] == 2.15);
    CHECK(r["threads"] == 0);
    CHECK_FALSE(r.contains("md"));
}

TEST_CASE("published schema and sample configs are current")
{
    const fs::path root = HSK_SOURCE_DIR;
    CHECK(json::parse(slurp(root / "configs" / "schema.json")) == schema_document());
    for (const auto& cmd : pipeline_commands()) {
        const auto p = root / "configs" / (cmd + ".json");
        REQUIRE(fs::exists(p));
        const auto r = call({"validate", "--config", p.string()});
        CHECK(r.code == exit_ok);
        CHECK(r.out == "config ok\n");
    }
}

TEST_CASE("validate subcommand exit codes")
{
    const auto dir = scratch("validate");
    auto r = call({"validate", "--config", write_config(dir, R"({"seed": 1, "md": {"epsilon": 0}})").string()});
    CHECK(r.code == exit_validation);
    CHECK(r.out.find("md.epsilon") != std::string::npos);
    r = call({"validate", "--config", (dir / "missing.json").string()});
    CHECK(r.code == exit_validation);
    r = call({"validate", "--config", write_config(dir, "{not json").string()});
    CHECK(r.code == exit_validation);
    r = call({"nonsense"});
    CHECK(r.code == exit_validation);
}

TEST_CASE("boltzmann run: outputs, manifest, reproducibility")
{
    const auto dir = scratch("boltzmann");
    const auto cfg = write_config(dir, small_boltzmann);
    const auto a = dir / "a", b = dir / "b";
    auto r1 = call({"boltzmann", "--config", cfg.string(), "--out", a.string()});
    REQUIRE(r1.code == exit_ok);
    auto r2 = call({"boltzmann", "--config", cfg.string(), "--out", b.string(), "--threads", "1"});
    REQUIRE(r2.code == exit_ok);
    const auto csv = slurp(a / "kinetic.csv");
    CHECK(csv == slurp(b / "kinetic.csv"));
    CHECK(csv.rfind("t,cell,density,px,py,pz,temperature,H\n", 0) == 0);
    CHECK(lines(csv) == 1 + 11);

    const auto m = json::parse(slurp(a / "manifest.json"));
    CHECK(m["config_sha256"] == sha256_file(cfg));
    CHECK(m["files"].size() == 1);
    CHECK(m["files"][0]["path"] == "kinetic.csv");
    CHECK(m["seed"] == 5);
    CHECK(m["exit_code"] == 0);
    CHECK(verify_manifest(a / "manifest.json").empty());
    CHECK(call({"validate", "--manifest", (a / "manifest.json").string()}).code == exit_ok);

    // a different seed changes the output
    auto r3 = call({"boltzmann", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "6"});
    REQUIRE(r3.code == exit_ok);
    CHECK(slurp(dir / "c" / "kinetic.csv") != csv);

    std::ofstream(a / "kinetic.csv", std::ios::app) << "tampered\n";
    CHECK(verify_manifest(a / "manifest.json").size() == 1);
    CHECK(call({"validate", "--manifest", (a / "manifest.json").string()}).code == exit_validation);
}

TEST_CASE("run exit codes")
{
    const auto dir = scratch("codes");
    const auto cfg = write_config(dir, small_boltzmann);
    auto r = call({"boltzmann", "--config", cfg.string(), "--out", (dir / "x").string(),
                   "--set", "boltzmann.dt=-1"});
    CHECK(r.code == exit_validation);
    CHECK(r.err.find("boltzmann.dt") != std::string::npos);

    // majorant below the actual relative speeds
    r = call({"boltzmann", "--config", cfg.string(), "--out", (dir / "y").string(), "--set",
              "boltzmann.g_max=0.01"});
    CHECK(r.code == exit_numerical);
    CHECK(fs::exists(dir / "y" / "manifest.json"));
    CHECK(json::parse(slurp(dir / "y" / "manifest.json"))["exit_code"] == exit_numerical);

    r = call({"boltzmann", "--config", cfg.string(), "--out", "/proc/hsk-not-writable"});
    CHECK(r.code == exit_validation);

    r = call({"boltzmann", "--out", (dir / "z").string()});
    CHECK(r.code == exit_validation);
}

TEST_CASE("output root from the environment")
{
    const auto dir = scratch("env");
    const auto cfg = write_config(dir, small_boltzmann);
    ::setenv(output_root_env, (dir / "root").string().c_str(), 1);
    const auto r = call({"boltzmann", "--config", cfg.string()});
    ::unsetenv(output_root_env);
    REQUIRE(r.code == exit_ok);
    std::size_t runs = 0;
    for (const auto& e : fs::directory_iterator(dir / "root")) {
        ++runs;
        CHECK(e.path().filename().string().rfind("boltzmann-", 0) == 0);
        CHECK(fs::exists(e.path() / "manifest.json"));
    }
    CHECK(runs == 1);
}

TEST_CASE("other subcommands produce their tables")
{
    const auto dir = scratch("subs");
    const auto cfg = write_config(dir, R"({
        "seed": 3,
        "md": {"particles": 8, "epsilon": 0.3, "box_side": 1.5, "t_end": 4, "snapshots": 4},
        "enskog": {"samples": 4000, "cells": 4, "length": 4, "epsilon": 0.2, "dt": 0.05, "t_end": 0.2},
        "rods1d": {"epsilons": [0.2, 0.1]},
        "hierarchy": {"samples": 4000, "times": [0.5]},
        "bgscan": {"epsilons": [0.3, 0.2], "box_side": 1.8, "replicas": 4, "jackknife_groups": 2,
                   "t_grid": [0, 0.25], "reference_samples": 5000, "reference_steps_per_unit": 4,
                   "momentum_bins": 8}
    })");
    auto r = call({"md", "--config", cfg.string(), "--out", (dir / "md").string()});
    CHECK(r.code == exit_ok);
    CHECK(lines(slurp(dir / "md" / "md.csv")) == 1 + 5);
    CHECK(lines(slurp(dir / "md" / "md_final.csv")) == 1 + 8);

    r = call({"enskog", "--config", cfg.string(), "--out", (dir / "en").string()});
    CHECK(r.code == exit_ok);
    CHECK(lines(slurp(dir / "en" / "kinetic.csv")) == 1 + 5 * 4);

    r = call({"rods1d", "--config", cfg.string(), "--out", (dir / "rods").string()});
    CHECK(r.code == exit_ok);
    CHECK(lines(slurp(dir / "rods" / "rods.csv")) == 3);

    r = call({"hierarchy", "--config", cfg.string(), "--out", (dir / "h").string(), "--check",
              "duality"});
    CHECK(r.code == exit_ok);
    CHECK(r.out.find("residual=") != std::string::npos);
    CHECK(r.out.find("sigma=") != std::string::npos);
    CHECK(lines(slurp(dir / "h" / "duality.csv")) == 1 + 2);
    CHECK(call({"hierarchy", "--check", "nothing", "--config", cfg.string()}).code == exit_validation);

    r = call({"bgscan", "--config", cfg.string(), "--out", (dir / "bg").string()});
    CHECK(r.code == exit_ok);
    const auto bg = slurp(dir / "bg" / "bg.csv");
    CHECK(bg.rfind("epsilon,t,L1,L1_err,chi,chi_err,N,replicas\n", 0) == 0);
    CHECK(lines(bg) == 1 + 2 * 2);
    r = call({"bgscan", "--config", cfg.string(), "--out", (dir / "bg2").string()});
    CHECK(slurp(dir / "bg2" / "bg.csv") == bg);
}
