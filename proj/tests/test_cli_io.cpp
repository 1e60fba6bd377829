#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qpe/cli_io.hpp"
#include "qpe/errors.hpp"
#include "test_helpers.hpp"

using namespace qpe;
using namespace qpe::testing;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
# one forcing mode
nu = 2
L = 4
K = 4
forcing = [[1, 0], [1, 1, 0], [0, 0, 1]]   # sin(phi_1 + x_1 + x_2) e_3
)";

std::string config_error_message(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config);
        return e.what();
    }
    FAIL("config was accepted: " << text);
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("qpe_test_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("parse_config") {
    SUBCASE("minimal config fills defaults") {
        auto c = parse_config(kMinimal);
        CHECK(c.nu == 2);
        CHECK(c.L == 4);
        CHECK(c.K == 4);
        CHECK(c.chi == 1.5);
        CHECK(c.epsilon == 1e-3);
        CHECK(c.s0 == 2.0);
        CHECK(c.seed == 1);
        REQUIRE(c.forcing.size() == 1);
        CHECK(c.forcing[0].l == std::vector<int>{1, 0});
        CHECK(c.forcing[0].j == std::array<int, 3>{1, 1, 0});
        CHECK(c.forcing[0].amp == std::array<double, 3>{0, 0, 1});
        auto lam = c.lambda();
        auto gold = golden_parameter(2);
        CHECK(lam.omega == gold.omega);
        CHECK(lam.zeta == gold.zeta);
        auto dc = c.diophantine();
        CHECK(dc.tau == 10.0);
        CHECK(dc.k0 == 0);
        auto f = c.forcing_field();
        CHECK(classify_parity(f) == Parity::odd);
        CHECK(has_zero_space_mean(f));
        CHECK(f.at(mode({1, 0}, {1, 1, 0}), 2) == cplx(0.0, -0.5));
    }

    SUBCASE("lists, bools and strings") {
        auto c = parse_config(std::string(kMinimal) +
                              "omega = [1.25, 1.5]\nzeta = [1.1, 1.3, 1.7]\npaper_constants = true\npredicate = melnikov2\n"
                              "forcing = [[[0, 1], [0, 1, -1], [1, 0, 0]], [[1, 1], [1, 0, 0], [0, 2, 0]]]\n");
        CHECK(c.omega == std::vector<double>{1.25, 1.5});
        CHECK(c.lambda().zeta == std::array<double, 3>{1.1, 1.3, 1.7});
        CHECK(c.paper_constants);
        CHECK(c.diophantine().k0 == 11);
        CHECK(c.schedule().N0 == doctest::Approx(1.0 / c.gamma));
        CHECK(!c.schedule().reuse_stages);
        CHECK(parse_config(std::string(kMinimal) + "cache_transforms = true\n").schedule().reuse_stages);
        CHECK(parse_config(kMinimal).schedule().N0 == 4.0);
        CHECK(c.predicate == "melnikov2");
        CHECK(c.forcing.size() == 3);
    }

    SUBCASE("echo parses back to the same config") {
        auto c = parse_config(std::string(kMinimal) + "epsilon = 3.3e-4\ngamma_list = [0.01, 0.03]\nseed = 12345678901\n");
        auto back = parse_config(c.echo());
        CHECK(back.to_json() == c.to_json());
        CHECK(back.echo() == c.echo());
    }

    SUBCASE("errors name the key") {
        auto m = config_error_message(std::string(kMinimal) + "forcing = [[0, 1], [0, 0, 0], [1, 0, 0]]\n");
        CHECK(m.find("zero space mean violated") != std::string::npos);
        CHECK(m.find("'forcing'") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "chi = 2.0\n");
        CHECK(m.find("'chi'") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "nonsense = 3\n");
        CHECK(m.find("'nonsense'") != std::string::npos);
        CHECK(m.find("unknown key") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "M_target = [4]\n");
        CHECK(m.find("'M_target'") != std::string::npos);
        CHECK(m.find("integer expected") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "epsilon = small\n");
        CHECK(m.find("'epsilon'") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "K = 5\n");
        CHECK(m.find("duplicate") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "omega = [1.0, 2.0, 3.0]\n");
        CHECK(m.find("'omega'") != std::string::npos);

        m = config_error_message(std::string(kMinimal) + "predicate = sometimes\n");
        CHECK(m.find("'predicate'") != std::string::npos);

        m = config_error_message("nu = 2\njust words\n");
        CHECK(m.find("line 2") != std::string::npos);
    }
}

TEST_CASE("number formatting and CSV") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        double x = U(rng) * std::pow(10.0, int(U(rng) * 300));
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(format_double(0.1) == "0.10000000000000001");

    TempDir dir("csv");
    {
        CsvWriter csv(dir.sub("a.csv"), {"name", "x", "n"});
        csv << "a,b" << 0.5 << 3;
        csv.end_row();
        csv << "short";
        CHECK_THROWS_AS(csv.end_row(), Error);
        csv << 1e-300 << std::size_t(7);
        csv.end_row();
    }
    CHECK(slurp(dir.path / "a.csv") == "name,x,n\n\"a,b\",0.5,3\nshort,1e-300,7\n");
}

TEST_CASE("QPEF snapshots") {
    TempDir dir("snap");
    Lattice lat(2, 3, 4, 2.5);
    std::mt19937_64 rng(5);
    auto v = random_field(lat, 3, 3.0, Parity::odd, rng);
    v.at(std::size_t(3), 1) = cplx(std::nextafter(1.0, 2.0), -0.0);
    nlohmann::json meta = {{"kind", "test"}, {"n", 3}};
    const auto path = dir.sub("v.qpef");
    write_snapshot(path, v, meta);
    auto s = read_snapshot(path);
    CHECK(s.field.lattice() == lat);
    CHECK(s.field.lattice().grid_factor() == 2.5);
    CHECK(s.field.ncomp() == 3);
    CHECK(s.field.parity() == Parity::odd);
    REQUIRE(s.field.coeffs().size() == v.coeffs().size());
    CHECK(std::memcmp(s.field.coeffs().data(), v.coeffs().data(), v.coeffs().size() * sizeof(cplx)) == 0);
    CHECK(std::signbit(s.field.at(std::size_t(3), 1).imag()));
    CHECK(s.meta == meta);

    // rewrite is byte identical
    write_snapshot(dir.sub("w.qpef"), s.field, s.meta);
    CHECK(slurp(path) == slurp(dir.path / "w.qpef"));

    SUBCASE("corruption is detected") {
        auto bytes = slurp(path);
        bytes[40 + 16 * 10] ^= 0x01;
        {
            std::ofstream out(dir.sub("bad.qpef"), std::ios::binary);
            out << bytes;
        }
        CHECK_THROWS_WITH_AS(read_snapshot(dir.sub("bad.qpef")), doctest::Contains("checksum"), Error);
        {
            std::ofstream out(dir.sub("short.qpef"), std::ios::binary);
            out << bytes.substr(0, 100);
        }
        CHECK_THROWS_WITH_AS(read_snapshot(dir.sub("short.qpef")), doctest::Contains("truncated"), Error);
        {
            std::ofstream out(dir.sub("text.qpef"), std::ios::binary);
            out << "nu = 2\n";
        }
        CHECK_THROWS_WITH_AS(read_snapshot(dir.sub("text.qpef")), doctest::Contains("not a QPEF"), Error);
    }
}

TEST_CASE("commands") {
    TempDir dir("cmd");
    std::ostringstream log;

    SUBCASE("solve then verify") {
        auto cfg = parse_config(std::string(kMinimal) + "forcing = [[0, 1], [0, 1, -1], [1, 0, 0]]\n");
        CommandOptions opt;
        opt.out_dir = dir.sub("solve");
        opt.snapshot_every = 1;
        REQUIRE(run_command("solve", cfg, opt, log) == 0);
        for (const char* f : {"trace.csv", "kam.csv", "manifest.json", "config.echo", "state.qpef", "state_000.qpef"})
            CHECK(fs::exists(dir.path / "solve" / f));
        auto manifest = nlohmann::json::parse(slurp(dir.path / "solve" / "manifest.json"));
        CHECK(manifest["status"] == "ok");
        CHECK(manifest["seed"] == 1);
        CHECK(manifest["results"]["residual_s0"].get<double>() <= 1e-9);
        CHECK(parse_config(slurp(dir.path / "solve" / "config.echo")).to_json() == cfg.to_json());

        CommandOptions vopt;
        vopt.out_dir = dir.sub("verify");
        vopt.state_path = dir.sub("solve/state.qpef");
        CHECK(run_command("verify", RunConfig{}, vopt, log) == 0);
        auto vm = nlohmann::json::parse(slurp(dir.path / "verify" / "manifest.json"));
        CHECK(vm["results"]["checks"].size() >= 10);

        // a flipped-parity state fails verification
        auto snap = read_snapshot(vopt.state_path);
        auto bad = snap.field;
        bad.at(std::size_t(0), 0) += 1e-3;
        write_snapshot(dir.sub("bad.qpef"), bad, snap.meta);
        vopt.out_dir = dir.sub("verify_bad");
        vopt.state_path = dir.sub("bad.qpef");
        CHECK(run_command("verify", RunConfig{}, vopt, log) == 1);
    }

    SUBCASE("same seed, same CSV") {
        auto cfg = parse_config(std::string(kMinimal) + "samples = 300\nseed = 9\n");
        CommandOptions a, b, c;
        a.out_dir = dir.sub("a");
        b.out_dir = dir.sub("b");
        c.out_dir = dir.sub("c");
        REQUIRE(run_command("melnikov-scan", cfg, a, log) == 0);
        REQUIRE(run_command("melnikov-scan", cfg, b, log) == 0);
        CHECK(slurp(dir.path / "a" / "melnikov_scan.csv") == slurp(dir.path / "b" / "melnikov_scan.csv"));
        REQUIRE(run_command("measure", cfg, a, log) == 0);
        REQUIRE(run_command("measure", cfg, b, log) == 0);
        CHECK(slurp(dir.path / "a" / "measure.csv") == slurp(dir.path / "b" / "measure.csv"));
        auto other = cfg;
        other.seed = 10;
        REQUIRE(run_command("measure", other, c, log) == 0);
        CHECK(slurp(dir.path / "a" / "measure.csv") != slurp(dir.path / "c" / "measure.csv"));
    }

    SUBCASE("melnikov-diagonal oracle") {
        CommandOptions opt;
        opt.out_dir = dir.sub("oracle");
        opt.oracle_case = "melnikov-diagonal";
        CHECK(run_command("oracle", parse_config(kMinimal), opt, log) == 0);
        auto csv = slurp(dir.path / "oracle" / "oracle.csv");
        CHECK(csv.find("sigma_min") != std::string::npos);
        opt.oracle_case = "no-such-case";
        CHECK(run_command("oracle", parse_config(kMinimal), opt, log) == 2);
    }

    SUBCASE("exit codes") {
        CommandOptions opt;
        opt.out_dir = dir.sub("codes");
        CHECK(run_command("frobnicate", parse_config(kMinimal), opt, log) == 2);
        CHECK(run_command("verify", parse_config(kMinimal), opt, log) == 2);

        // omega.l + zeta.j = 0 at l = (1, 0), j = (-1, 0, 0)
        auto resonant = parse_config(std::string(kMinimal) + "omega = [1.0, 2.0]\nzeta = [1.0, 1.0, 1.0]\n");
        CHECK(run_command("straighten", resonant, opt, log) == 3);
        auto manifest = nlohmann::json::parse(slurp(dir.path / "codes" / "manifest.json"));
        CHECK(manifest["status"] == "failed");
        CHECK(manifest["exit_code"] == 3);

        auto mel = parse_config(
            "nu = 2\nL = 4\nK = 4\nomega = [1.0, 2.0]\nzeta = [1.0, 1.0, 1.0]\nforcing = [[1, 0], [-1, 0, 0], [0, 1, 0]]\n");
        CHECK(run_command("solve", mel, opt, log) == 4);
        manifest = nlohmann::json::parse(slurp(dir.path / "codes" / "manifest.json"));
        CHECK(manifest["stage"] == "inverse");

        auto slow = parse_config(std::string(kMinimal) + "forcing = [[0, 1], [0, 1, -1], [1, 0, 0]]\nnewton_max_steps = 1\n");
        CHECK(run_command("solve", slow, opt, log) == 5);
    }
}
