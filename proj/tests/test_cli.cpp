#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include "pairwave/pipeline.hpp"

using namespace pairwave;

namespace {

json minimal_config(const std::string& dir) {
    return json{{"riccati", {{"seed", 42}}}, {"output", {{"directory", dir}}}};
}

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("pairwave_cli_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// run the installed binary; returns the process exit code
int run_binary(const std::string& args) {
    const std::string cmd = std::string(PAIRWAVE_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config parsing: defaults, mandatory seed, strict keys") {
    json base = minimal_config("out");
    RunConfig cfg = parse_config(base);
    CHECK(cfg.basis.M == 32);
    CHECK(cfg.basis.Q == 64);  // defaults to 2M
    CHECK(cfg.model.omega == 1.0);
    CHECK(cfg.model.N == 100.0);
    CHECK(cfg.riccati.solver == "all");
    CHECK(cfg.riccati.seed == 42ULL);
    CHECK(cfg.fock.m == 3);
    CHECK(cfg.fock.N == 2);
    CHECK(cfg.fock.theorem2);
    CHECK_FALSE(cfg.fock.conjugation);
    CHECK(cfg.output.json_format);
    CHECK(cfg.output.csv_format);

    SECTION("seed is mandatory") {
        json c = base;
        c["riccati"].erase("seed");
        CHECK_THROWS_AS(parse_config(c), invalid_input);
        c.erase("riccati");
        CHECK_THROWS_AS(parse_config(c), invalid_input);
    }
    SECTION("unknown keys are rejected at every level") {
        json c = base;
        c["mystery"] = 1;
        CHECK_THROWS_AS(parse_config(c), invalid_input);
        c = base;
        c["model"] = {{"coupling", 0.1}};
        CHECK_THROWS_AS(parse_config(c), invalid_input);
        c = base;
        c["riccati"]["sede"] = 42;
        CHECK_THROWS_AS(parse_config(c), invalid_input);
    }
    SECTION("value validation") {
        auto bad = [&](const char* section, const char* key, json value) {
            json c = base;
            c[section][key] = std::move(value);
            CHECK_THROWS_AS(parse_config(c), invalid_input);
        };
        bad("basis", "M", 0);
        bad("basis", "M", 65);
        bad("basis", "Q", 10);  // < 2M
        bad("model", "omega", 0.0);
        bad("model", "g", -0.5);
        bad("model", "sigma", 0.0);
        bad("model", "N", 0.0);
        bad("riccati", "solver", "magic");
        bad("riccati", "tol", 0.0);
        bad("riccati", "max_iter", 0);
        bad("riccati", "seed", -3);
        bad("fock", "m", 1);
        bad("fock", "N", 0);
        bad("output", "directory", "");
        bad("output", "formats", json::array({"yaml"}));
    }
    SECTION("explicit Q survives") {
        json c = base;
        c["basis"] = {{"M", 8}, {"Q", 40}};
        CHECK(parse_config(c).basis.Q == 40);
    }
    SECTION("formats array selects writers") {
        json c = base;
        c["output"]["formats"] = json::array({"csv"});
        RunConfig only_csv = parse_config(c);
        CHECK_FALSE(only_csv.output.json_format);
        CHECK(only_csv.output.csv_format);
    }
}

TEST_CASE("stage hashes: stable, closure-sensitive, stage-scoped") {
    RunConfig cfg = parse_config(minimal_config("out"));
    const std::string h1 = stage_hash(cfg, "hartree");
    CHECK(h1 == stage_hash(cfg, "hartree"));
    CHECK(h1.size() == 16);

    RunConfig other = cfg;
    other.model.g = 0.25;
    CHECK(stage_hash(other, "hartree") != h1);

    // fock settings must not disturb upstream closures
    RunConfig fockier = cfg;
    fockier.fock.N = 4;
    CHECK(stage_hash(fockier, "hartree") == h1);
    CHECK(stage_hash(fockier, "riccati") == stage_hash(cfg, "riccati"));
    CHECK(stage_hash(fockier, "fock") != stage_hash(cfg, "fock"));

    // the output directory is not part of the numerical identity
    RunConfig moved = cfg;
    moved.output.directory = "elsewhere";
    CHECK(stage_hash(moved, "hartree") == h1);

    // seed participates: a different stream is a different solve
    RunConfig reseeded = cfg;
    reseeded.riccati.seed = 43;
    CHECK(stage_hash(reseeded, "riccati") != stage_hash(cfg, "riccati"));
    CHECK(stage_hash(reseeded, "hartree") == h1);
}

TEST_CASE("deterministic serialization: 17 significant digits, sorted keys") {
    json j;
    j["b"] = 0.1;
    j["a"] = 2.0;
    j["nested"] = {{"z", 1.0 / 3.0}, {"y", json::array({1.5, -0.0})}};
    const std::string text = dump_json17(j);
    CHECK(text.find("0.10000000000000001") != std::string::npos);
    CHECK(text.find("0.33333333333333331") != std::string::npos);
    CHECK(text.find("\"a\"") < text.find("\"b\""));
    CHECK(text.find("\"y\"") < text.find("\"z\""));
    CHECK(text.back() == '\n');
    CHECK(dump_json17(j) == text);

    // values round-trip exactly through the printed form
    json back = json::parse(text);
    CHECK(back["b"].get<double>() == 0.1);
    CHECK(back["nested"]["z"].get<double>() == 1.0 / 3.0);

    json inf;
    inf["x"] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(dump_json17(inf), invalid_input);
}

TEST_CASE("complex and matrix serialization round-trips") {
    Mat m(2, 2);
    m << complex_t(1.0, -2.0), complex_t(0.25, 0.0), complex_t(-1.0 / 3.0, 5.0),
        complex_t(0.0, 1e-17);
    json jm = mat_to_json(m);
    CHECK(jm.size() == 4);  // row-major [re, im] pairs
    CHECK(jm[1][0].get<double>() == 0.25);
    Mat back = mat_from_json(jm, 2, 2);
    CHECK((back - m).norm() == 0.0);

    const std::string ktext = kernel_json_text(2, m);
    json kj = json::parse(ktext);
    CHECK(kj["M"] == 2);
    CHECK(kj["k"].size() == 4);
    CHECK((mat_from_json(kj["k"], 2, 2) - m).norm() == 0.0);
}

TEST_CASE("csv builders") {
    RVec E(3);
    E << 2.0, 4.0, 6.5;
    const std::string sp = spectrum_csv(E);
    CHECK(sp.rfind("j,E_j\n", 0) == 0);
    CHECK(sp.find("1,2\n") != std::string::npos);
    CHECK(sp.find("3,6.5\n") != std::string::npos);

    CHECK(convergence_csv({}) == "iter,energy,residual\n");
    const std::string conv = convergence_csv({{0, -1.5, 0.25}, {1, -1.75, 0.0625}});
    CHECK(conv.find("0,-1.5,0.25\n") != std::string::npos);

    const std::string sw = sweep_csv("g", {{0.5, 1, 2.25}});
    CHECK(sw.rfind("g,j,E_j\n", 0) == 0);
    CHECK(sw.find("0.5,1,2.25\n") != std::string::npos);
}

TEST_CASE("sweep grid parsing") {
    SweepGrid g = parse_grid("0:1:11");
    CHECK(g.start == 0.0);
    CHECK(g.stop == 1.0);
    CHECK(g.count == 11);
    CHECK(parse_grid("2.5:2.5:1").count == 1);
    CHECK_THROWS_AS(parse_grid("0:1"), invalid_input);
    CHECK_THROWS_AS(parse_grid("a:b:c"), invalid_input);
    CHECK_THROWS_AS(parse_grid("0:1:0"), invalid_input);
}

TEST_CASE("pipeline: free gas end to end in process") {
    const auto dir = fresh_dir("inproc");
    json c = minimal_config((dir / "out").string());
    c["model"] = {{"g", 0.0}};
    RunConfig cfg = parse_config(c);
    PipelineState st = make_pipeline(cfg);
    ensure_fock(st, StageMode::compute);
    publish_stage_outputs(st);
    write_report(st);

    const json checks = evaluate_checks(st);
    CHECK(all_checks_pass(checks));
    CHECK(checks["condensate_converged"] == "pass");
    CHECK(checks["fock_conjugation"] == "skipped");

    const json rep = assemble_report(st);
    CHECK(std::abs(rep["condensate"]["mu"].get<double>() - 1.0) < 1e-10);
    CHECK(std::abs(rep["spectrum"]["E"][0].get<double>() - 2.0) < 1e-10);
    CHECK(rep.contains("timing"));

    CHECK(std::filesystem::exists(dir / "out" / "report.json"));
    CHECK(std::filesystem::exists(dir / "out" / "kernel.json"));
    CHECK(std::filesystem::exists(dir / "out" / "spectrum.csv"));
    CHECK(std::filesystem::exists(dir / "out" / "convergence.csv"));

    // warm state: a second pipeline over the same directory hits every cache
    PipelineState warm = make_pipeline(cfg);
    ensure_fock(warm, StageMode::require_cache);  // throws if anything is missing
    json warm_rep = assemble_report(warm);
    json cold_rep = rep;
    warm_rep.erase("timing");
    cold_rep.erase("timing");
    CHECK(warm_rep == cold_rep);
}

TEST_CASE("pipeline: missing upstream names the stage") {
    const auto dir = fresh_dir("missing");
    RunConfig cfg = parse_config(minimal_config((dir / "out").string()));
    PipelineState st = make_pipeline(cfg);
    try {
        ensure_riccati(st, StageMode::require_cache);
        FAIL("expected dependency_error");
    } catch (const dependency_error& e) {
        CHECK(std::string(e.what()).find("hartree") != std::string::npos);
    }
}

TEST_CASE("binary: run, staging, caching, determinism, exit codes") {
    const auto dir = fresh_dir("bin");
    const auto out = dir / "out";
    json c = minimal_config(out.string());
    c["basis"] = {{"M", 16}};
    c["model"] = {{"g", 0.0}};
    const auto cfg_path = dir / "config.json";
    write_file(cfg_path, c.dump());

    SECTION("full run exits 0 and writes the artifact set") {
        CHECK(run_binary("run " + cfg_path.string()) == 0);
        CHECK(std::filesystem::exists(out / "report.json"));
        const std::string sp = slurp(out / "spectrum.csv");
        CHECK(sp.find("1,2\n") != std::string::npos);
        CHECK(sp.find("2,4\n") != std::string::npos);

        // identical config rerun: byte-identical report modulo timing
        const json first = json::parse(slurp(out / "report.json"));
        CHECK(run_binary("run " + cfg_path.string()) == 0);
        json second = json::parse(slurp(out / "report.json"));
        json a = first, b = second;
        a.erase("timing");
        b.erase("timing");
        CHECK(dump_json17(a) == dump_json17(b));
    }

    SECTION("stage subcommands chain through the cache") {
        CHECK(run_binary("riccati " + cfg_path.string()) == 3);  // no hartree yet
        CHECK(run_binary("hartree " + cfg_path.string()) == 0);
        CHECK(run_binary("riccati " + cfg_path.string()) == 0);
        const std::string kernel_after_riccati = slurp(out / "kernel.json");
        CHECK(run_binary("spectrum " + cfg_path.string()) == 0);
        CHECK(slurp(out / "kernel.json") == kernel_after_riccati);
        CHECK(run_binary("fock-verify " + cfg_path.string()) == 0);
        const json rep = json::parse(slurp(out / "report.json"));
        CHECK(rep["checks"]["fock_theorem2"] == "pass");
    }

    SECTION("malformed configs exit 2 without artifacts") {
        const auto bad_dir = dir / "never_created";
        json bad = c;
        bad["output"]["directory"] = bad_dir.string();
        bad["surprise"] = true;
        const auto bad_path = dir / "bad.json";
        write_file(bad_path, bad.dump());
        CHECK(run_binary("run " + bad_path.string()) == 2);
        CHECK_FALSE(std::filesystem::exists(bad_dir));

        write_file(bad_path, "{ not json");
        CHECK(run_binary("run " + bad_path.string()) == 2);
        CHECK(run_binary("run " + (dir / "absent.json").string()) == 2);
        CHECK(run_binary("frobnicate " + cfg_path.string()) == 2);
        CHECK(run_binary("run") == 2);
    }

    SECTION("sweep writes the long-format grid") {
        CHECK(run_binary("sweep g 0:0.5:3 " + cfg_path.string()) == 0);
        const std::string sw = slurp(out / "sweep.csv");
        const auto rows = std::count(sw.begin(), sw.end(), '\n');
        CHECK(rows == 1 + 3 * 15);  // header + count * (M - 1)
        CHECK(sw.rfind("g,j,E_j\n", 0) == 0);
        CHECK(run_binary("sweep q 0:1:2 " + cfg_path.string()) == 2);
        CHECK(run_binary("sweep g 0:1 " + cfg_path.string()) == 2);
    }
}
