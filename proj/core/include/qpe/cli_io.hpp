#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpe/nash_moser.hpp"

namespace qpe {

// ---- configuration ----

struct ForcingMode {
    std::vector<int> l;  // nu entries
    std::array<int, 3> j{};
    std::array<double, 3> amp{};
};

struct RunConfig {
    int nu = 2;
    int L = 4;
    int K = 4;
    double grid_factor = 2.0;
    double s0 = 2.0;
    double epsilon = 1e-3;
    double gamma = 1e-3;
    double tau = 0.0;  // 0 selects the schedule default
    double c0 = 2.0;
    int k0 = 0;
    double N0 = 4.0;
    double chi = 1.5;
    int M_target = 2;
    std::vector<double> omega;  // empty selects golden_parameter
    std::vector<double> zeta;
    std::uint64_t seed = 1;
    std::vector<ForcingMode> forcing;
    // Linearization point v = probe_amplitude * f for straighten / reduce.
    double probe_amplitude = 1.0;

    int newton_max_steps = 8;
    double newton_tol = 1e-9;
    double div_tol = 1e-12;
    int straighten_max_steps = 12;
    double straighten_tol = 1e-13;
    int symbol_max_steps = 12;
    double symbol_tol = 1e-15;
    int kam_max_steps = 10;
    double kam_tol = 0.0;  // 0 selects 1e-10 eps

    // measure / melnikov-scan
    std::vector<double> gamma_list{0.02, 0.05, 0.1, 0.2};
    std::size_t samples = 10000;
    std::string predicate = "full";
    std::vector<double> box_lo;  // nu + 3 entries, default 1
    std::vector<double> box_hi;  // default 2
    int check_vectors = 10;      // random h per residual check

    bool paper_constants = false;
    bool cache_transforms = false;  // reuse the staged inverse across Newton steps

    Lattice lattice() const;
    ParameterPoint lambda() const;
    DiophantineConfig diophantine() const;
    NashMoserSchedule schedule() const;
    ParameterBox box() const;
    FourierField forcing_field() const;
    EulerProblem problem() const;

    nlohmann::json to_json() const;
    // One key = value line per field, in parse_config syntax.
    std::string echo() const;
};

// key = value lines, # comments, bracketed lists. Repeated `forcing` keys
// append modes [[l...], [j1, j2, j3], [a1, a2, a3]]. Errors carry
// ErrorCode::config and name the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);

// ---- persistence ----

// QPEF: "QPEF", u32 version, u32 nu, L, K, ncomp, u32 parity, f64 grid factor,
// u64 count, count complex coefficients (re, im), u64 FNV-1a hash of the
// coefficient bytes, u64 metadata length, metadata JSON. Little endian.
struct Snapshot {
    FourierField field;
    nlohmann::json meta;
};

void write_snapshot(const std::string& path, const FourierField& f, const nlohmann::json& meta = nlohmann::json::object());
Snapshot read_snapshot(const std::string& path);

// %.17g floats so text reports round trip f64 exactly.
std::string format_double(double x);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& operator<<(double x);
    CsvWriter& operator<<(long long x);
    CsvWriter& operator<<(int x) { return *this << static_cast<long long>(x); }
    CsvWriter& operator<<(std::size_t x) { return *this << static_cast<long long>(x); }
    CsvWriter& operator<<(const std::string& s);
    CsvWriter& operator<<(const char* s) { return *this << std::string(s); }
    void end_row();

private:
    void sep();
    std::ofstream out_;
    std::size_t ncols_;
    std::size_t col_ = 0;
};

void write_json(const std::string& path, const nlohmann::json& j);

// ---- commands ----

struct CommandOptions {
    std::string out_dir = "out";
    std::string state_path;  // verify
    std::string oracle_case;  // oracle
    int snapshot_every = 0;   // solve: 0 writes only the final state
};

// Runs one of solve, straighten, reduce, reduce-kam, melnikov-scan, measure,
// verify, oracle; writes CSV reports, snapshots and manifest.json to
// out_dir. Returns the exit code: 0, 1 failed verification, 2 config,
// 3 Diophantine, 4 Melnikov, 5 non-convergence.
int run_command(const std::string& cmd, const RunConfig& cfg, const CommandOptions& opt, std::ostream& log);

int exit_code(ErrorCode code);

}  // namespace qpe
