#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <random>

#include "qpe/cli_io.hpp"
#include "qpe/errors.hpp"
#include "qpe/grid.hpp"
#include "qpe/parallel.hpp"

namespace qpe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Context {
    const RunConfig& cfg;
    const CommandOptions& opt;
    std::ostream& log;
    std::mt19937_64 rng;
    json results = json::object();
    bool verified = true;  // verify / oracle outcome

    std::string path(const std::string& name) const { return (fs::path(opt.out_dir) / name).string(); }
};

std::string fmt(double x) { return format_double(x); }

json stage_report_json(const StageReport& r) {
    json j;
    j["flags"] = r.flags;
    j["straighten_steps"] = r.straighten.steps.size();
    j["straighten_converged"] = r.straighten.converged;
    j["straighten_order"] = r.straighten.contraction_order();
    j["symbol_steps"] = r.symbol.V_norms.size();
    j["homological_residual"] = r.symbol.homological_residual;
    j["solvability_defect"] = r.symbol.solvability_defect;
    j["schur_defect"] = r.schur_defect;
    j["kam_steps"] = r.kam.size();
    j["kam_final_remainder"] = r.kam.empty() ? 0.0 : r.kam.back().remainder_s0;
    j["kam_order"] = kam_contraction_order(r.kam);
    j["Q0_scaled_sup"] = r.Q0_scaled_sup;
    j["Qinf_scaled_sup"] = r.Qinf_scaled_sup;
    j["Q_change_scaled"] = r.Q_change_scaled;
    return j;
}

void write_kam_csv(const std::string& path, const std::vector<KamStep>& steps) {
    CsvWriter csv(path, {"n", "Nn", "remainder_s0", "remainder_s0b", "max_block_change"});
    for (const auto& s : steps) {
        csv << s.n << s.Nn << s.remainder_s0 << s.remainder_s0b << s.max_block_change;
        csv.end_row();
    }
}

FourierField probe_velocity(const RunConfig& cfg) {
    auto v = cfg.forcing_field();
    v *= cfg.probe_amplitude;
    return v;
}

// ---- solve ----

void cmd_solve(Context& cx) {
    const auto& cfg = cx.cfg;
    auto prob = cfg.problem();
    auto dc = cfg.diophantine();
    auto sched = cfg.schedule();
    json meta;
    meta["config"] = cfg.to_json();
    if (cx.opt.snapshot_every > 0) {
        sched.observer = [&](const NashMoserStep& row, const FourierField& v) {
            if (row.n % cx.opt.snapshot_every != 0) return;
            json m = meta;
            m["kind"] = "iterate";
            m["n"] = row.n;
            char name[32];
            std::snprintf(name, sizeof name, "state_%03d.qpef", row.n);
            write_snapshot(cx.path(name), v, m);
        };
    }
    auto res = nash_moser_solve(prob, dc, sched);

    {
        CsvWriter csv(cx.path("trace.csv"), {"n", "Nn", "res_s0", "norm_v", "norm_v_high", "norm_v_scaled", "norm_h",
                                             "div_v", "reprojected", "stage_flags"});
        for (const auto& r : res.trace) {
            csv << r.n << r.Nn << r.res_s0 << r.norm_v << r.norm_v_high << r.norm_v_scaled << r.norm_h << r.div_v
                << (r.reprojected ? 1 : 0) << (r.stage_flags.empty() ? std::string("-") : r.stage_flags);
            csv.end_row();
        }
    }
    {
        CsvWriter csv(cx.path("kam.csv"), {"newton_step", "n", "Nn", "remainder_s0", "remainder_s0b", "max_block_change"});
        for (std::size_t k = 0; k < res.stage_reports.size(); ++k)
            for (const auto& s : res.stage_reports[k].kam) {
                csv << k << s.n << s.Nn << s.remainder_s0 << s.remainder_s0b << s.max_block_change;
                csv.end_row();
            }
    }
    json stages = json::array();
    for (const auto& r : res.stage_reports) stages.push_back(stage_report_json(r));

    auto rec = reconstruct_velocity_pressure(res.v_star, prob, cfg.s0);
    meta["kind"] = "v_star";
    meta["converged"] = res.status.ok;
    meta["newton_steps"] = res.trace.size() - 1;
    write_snapshot(cx.path("state.qpef"), res.v_star, meta);

    auto& out = cx.results;
    out["converged"] = res.status.ok;
    out["newton_steps"] = res.trace.size() - 1;
    out["residual_s0"] = res.trace.back().res_s0;
    out["norm_v_s0"] = res.trace.back().norm_v;
    out["euler_residual"] = rec.euler_residual;
    out["div_v"] = rec.div_v_norm;
    out["v_parity"] = to_string(classify_parity(res.v_star, 1e-10));
    out["u_parity"] = to_string(rec.u_parity);
    out["p_parity"] = to_string(rec.p_parity);
    out["stages"] = stages;
    cx.log << "solve: " << (res.status.ok ? "converged" : "failed") << " after " << res.trace.size() - 1
           << " Newton steps, |F(v)|_s0 = " << fmt(res.trace.back().res_s0)
           << ", Euler residual = " << fmt(rec.euler_residual) << "\n";
    if (!res.status.ok) throw StageError(res.status.code, res.status.stage, res.status.message);
}

// ---- straighten ----

void cmd_straighten(Context& cx) {
    const auto& cfg = cx.cfg;
    const auto lat = cfg.lattice();
    const auto lam = cfg.lambda();
    auto a = biot_savart(probe_velocity(cfg));
    a *= cfg.epsilon;
    auto st = straighten(a, lam, cfg.diophantine(), cfg.schedule().stages.straighten);
    {
        CsvWriter csv(cx.path("straighten.csv"), {"n", "Nn", "norm_a", "norm_alpha", "m_minus_zeta"});
        for (const auto& s : st.report.steps) {
            csv << s.n << s.Nn << s.norm_a << s.norm_alpha << s.m_minus_zeta;
            csv.end_row();
        }
    }
    double worst = 0;
    {
        CsvWriter csv(cx.path("conjugation.csv"), {"k", "residual_s0", "norm_h_s0p1", "ratio"});
        for (int k = 0; k < cfg.check_vectors; ++k) {
            auto h = random_field(lat, 3, 1.5, Parity::none, cx.rng);
            double r = conjugation_residual(st.diffeo, a, lam, h, cfg.s0);
            double n = sobolev_norm(h, cfg.s0 + 1);
            worst = std::max(worst, r / n);
            csv << k << r << n << r / n;
            csv.end_row();
        }
    }
    double dm = 0;
    for (int k = 0; k < 3; ++k) dm = std::max(dm, std::abs(st.report.m[k] - lam.zeta[k]));
    auto& out = cx.results;
    out["converged"] = st.report.converged;
    out["steps"] = st.report.steps.size();
    out["contraction_order"] = st.report.contraction_order();
    out["identity_residual"] = st.report.residual;
    out["m_minus_zeta"] = dm;
    out["worst_conjugation_ratio"] = worst;
    out["diffeo_inverse_residual"] = st.diffeo.residual;
    cx.log << "straighten: " << st.report.steps.size() << " steps, order " << fmt(st.report.contraction_order())
           << ", worst conjugation ratio " << fmt(worst) << "\n";
}

// ---- reduce / reduce-kam ----

void cmd_reduce(Context& cx, bool kam_only) {
    const auto& cfg = cx.cfg;
    const auto lat = cfg.lattice();
    auto prob = cfg.problem();
    auto dc = cfg.diophantine();
    auto lin = build_linearized(probe_velocity(cfg), prob);
    auto inv = build_staged_inverse(lin, dc, cfg.schedule().stages);
    const auto& rep = inv.report;
    write_kam_csv(cx.path("kam.csv"), rep.kam);
    auto& out = cx.results;
    out["stages"] = stage_report_json(rep);
    cx.log << "reduce: flags " << rep.flags << ", " << rep.kam.size() << " KAM rows, order "
           << fmt(kam_contraction_order(rep.kam)) << ", |Q_inf| |j| <= " << fmt(rep.Qinf_scaled_sup) << "\n";
    if (kam_only) return;
    {
        CsvWriter csv(cx.path("symbol.csv"), {"n", "V_norm", "V_mean", "Psi_norm"});
        for (std::size_t n = 0; n < rep.symbol.V_norms.size(); ++n) {
            csv << n << rep.symbol.V_norms[n] << (n < rep.symbol.V_means.size() ? rep.symbol.V_means[n] : 0.0)
                << (n < rep.symbol.Psi_norms.size() ? rep.symbol.Psi_norms[n] : 0.0);
            csv.end_row();
        }
    }
    {
        CsvWriter csv(cx.path("lower_orders.csv"), {"n", "R_norm", "Z_norm"});
        for (std::size_t n = 0; n < rep.symbol.R2_norms.size(); ++n) {
            csv << n << rep.symbol.R2_norms[n] << (n < rep.symbol.Z_norms.size() ? rep.symbol.Z_norms[n] : 0.0);
            csv.end_row();
        }
    }
    double worst = 0;
    {
        const double s_hi = cfg.s0 + dc.tau0();
        CsvWriter csv(cx.path("inverse.csv"), {"k", "residual_s0", "norm_h_high", "ratio"});
        for (int k = 0; k < cfg.check_vectors; ++k) {
            auto h = pi0_perp(random_field(lat, 3, 2.5, Parity::even, cx.rng));
            auto g = inv.apply(h);
            double r = sobolev_norm(lin.apply(g) - h, cfg.s0);
            double n = sobolev_norm(h, s_hi);
            worst = std::max(worst, r / n);
            csv << k << r << n << r / n;
            csv.end_row();
        }
    }
    out["worst_inverse_ratio"] = worst;
    cx.log << "reduce: worst inverse ratio " << fmt(worst) << "\n";
}

// ---- melnikov-scan ----

void cmd_melnikov_scan(Context& cx) {
    const auto& cfg = cx.cfg;
    const auto lat = cfg.lattice();
    const auto dc = cfg.diophantine();
    const auto box = cfg.box();
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<ParameterPoint> pts(cfg.samples);
    for (auto& p : pts) {
        p.omega.resize(cfg.nu);
        for (int k = 0; k < cfg.nu; ++k) p.omega[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * U(cx.rng);
        for (int k = 0; k < 3; ++k) p.zeta[k] = box.lo[cfg.nu + k] + (box.hi[cfg.nu + k] - box.lo[cfg.nu + k]) * U(cx.rng);
    }
    const Predicate preds[4] = {Predicate::diophantine, Predicate::melnikov1, Predicate::melnikov2, Predicate::full};
    std::vector<std::array<double, 4>> crit(pts.size());
    parallel_for(0, pts.size(), [&](std::size_t i) {
        for (int p = 0; p < 4; ++p) crit[i][p] = critical_gamma(pts[i], preds[p], dc, lat);
    });
    std::vector<std::string> header{"sample"};
    for (int k = 0; k < cfg.nu; ++k) header.push_back("omega_" + std::to_string(k + 1));
    for (int k = 0; k < 3; ++k) header.push_back("zeta_" + std::to_string(k + 1));
    for (auto p : preds) header.push_back(std::string("gamma_") + to_string(p));
    CsvWriter csv(cx.path("melnikov_scan.csv"), header);
    std::array<std::size_t, 4> pass{};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        csv << i;
        for (double w : pts[i].omega) csv << w;
        for (double z : pts[i].zeta) csv << z;
        for (int p = 0; p < 4; ++p) {
            csv << crit[i][p];
            if (crit[i][p] >= cfg.gamma) ++pass[p];
        }
        csv.end_row();
    }
    for (int p = 0; p < 4; ++p)
        cx.results[std::string("pass_fraction_") + to_string(preds[p])] = double(pass[p]) / double(pts.size());
    cx.log << "melnikov-scan: " << pts.size() << " samples, full predicate passes at gamma = " << fmt(cfg.gamma)
           << " for " << fmt(double(pass[3]) / double(pts.size())) << "\n";
}

// ---- measure ----

void cmd_measure(Context& cx) {
    const auto& cfg = cx.cfg;
    auto pred = parse_predicate(cfg.predicate);
    auto rows = measure_scan(cfg.box(), cfg.gamma_list, cfg.samples, pred, cfg.diophantine(), cfg.lattice(), cfg.seed);
    CsvWriter csv(cx.path("measure.csv"), {"gamma", "samples", "excluded", "fraction", "ci_low", "ci_high"});
    double sxy = 0, sxx = 0, worst = 0;
    for (const auto& r : rows) {
        csv << r.gamma << r.samples << r.excluded << r.fraction << r.ci_low << r.ci_high;
        csv.end_row();
        sxy += r.fraction * r.gamma;
        sxx += r.gamma * r.gamma;
        worst = std::max(worst, r.fraction / r.gamma);
    }
    auto sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.gamma < b.gamma; });
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) monotone = monotone && sorted[k].fraction <= sorted[k + 1].fraction;
    cx.results["predicate"] = to_string(pred);
    cx.results["fitted_C"] = sxx > 0 ? sxy / sxx : 0.0;
    cx.results["max_fraction_over_gamma"] = worst;
    cx.results["monotone"] = monotone;
    cx.log << "measure: predicate " << to_string(pred) << ", fitted C = " << fmt(sxx > 0 ? sxy / sxx : 0.0)
           << (monotone ? ", monotone in gamma" : ", NOT monotone in gamma") << "\n";
}

// ---- verify ----

void cmd_verify(Context& cx) {
    if (cx.opt.state_path.empty()) fail(ErrorCode::config, "verify: --state FILE is required");
    auto snap = read_snapshot(cx.opt.state_path);
    RunConfig cfg = snap.meta.contains("config") ? config_from_json(snap.meta["config"]) : cx.cfg;
    const auto& v = snap.field;
    CsvWriter csv(cx.path("verify.csv"), {"check", "value", "threshold", "pass"});
    json checks = json::array();
    auto check = [&](const std::string& name, double value, double threshold, bool pass) {
        csv << name << value << threshold << (pass ? 1 : 0);
        csv.end_row();
        checks.push_back({{"check", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}});
        cx.log << (pass ? "PASS " : "FAIL ") << name << " value " << fmt(value) << " threshold " << fmt(threshold) << "\n";
        cx.verified = cx.verified && pass;
    };
    bool finite = std::all_of(v.coeffs().begin(), v.coeffs().end(),
                              [](const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
    check("finite coefficients", finite ? 0.0 : 1.0, 0.0, finite);
    check("lattice matches config", v.lattice() == cfg.lattice() ? 0.0 : 1.0, 0.0, v.lattice() == cfg.lattice());
    check("vector field", v.ncomp(), 3, v.ncomp() == 3);
    if (!finite || v.ncomp() != 3 || v.lattice() != cfg.lattice()) return;
    const double scale = std::max(v.max_abs(), std::numeric_limits<double>::min());
    const bool zero = v.max_abs() == 0.0;

    // reality: c(-l,-j) = conj c(l,j)
    double real_def = 0, odd_def = 0;
    const auto& lat = v.lattice();
    for (std::size_t i = 0; i < lat.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            real_def = std::max(real_def, std::abs(v.at(lat.neg(i), c) - std::conj(v.at(i, c))));
            odd_def = std::max(odd_def, std::abs(v.at(lat.neg(i), c) + v.at(i, c)));
        }
    check("reality", real_def / scale, 1e-12, zero || real_def <= 1e-12 * scale);
    check("odd parity", odd_def / scale, 1e-12, zero || odd_def <= 1e-12 * scale);
    double mean_def = 0;
    for (auto m : mean(v)) mean_def = std::max(mean_def, std::abs(m));
    check("zero space mean", mean_def / scale, 1e-12, zero || mean_def <= 1e-12 * scale);
    double dv = sobolev_norm(div(v), cfg.s0);
    check("divergence free", dv, 1e-10, dv <= 1e-10);
    if (odd_def > 1e-12 * scale || mean_def > 1e-12 * scale) return;

    FourierField vv = v;
    vv.set_parity(Parity::odd);
    auto prob = cfg.problem();
    double res = sobolev_norm(residual(vv, prob), cfg.s0);
    const bool final_state = snap.meta.value("kind", std::string()) == "v_star" && snap.meta.value("converged", false);
    if (final_state) check("residual |F(v)|_s0", res, cfg.newton_tol, res <= cfg.newton_tol);
    auto rec = reconstruct_velocity_pressure(vv, prob, cfg.s0);
    if (final_state) check("Euler residual", rec.euler_residual, 1e-8, rec.euler_residual <= 1e-8);
    check("u even", rec.u_parity == Parity::even ? 0.0 : 1.0, 0.0, rec.u_parity == Parity::even);
    check("p even", rec.p_parity == Parity::even ? 0.0 : 1.0, 0.0, rec.p_parity == Parity::even);
    cx.results["checks"] = checks;
    cx.results["residual_s0"] = res;
    cx.results["state"] = cx.opt.state_path;
}

// ---- oracle ----

struct OracleRow {
    std::string quantity;
    double reference, computed, tol;  // |computed - reference| <= tol
};

std::vector<OracleRow> oracle_melnikov_diagonal(Context& cx) {
    // Q_j = i diag(a), Q_j' = i diag(b): X -> i d X + Q_j X - X Q_j' is diagonal
    // with entries i (d + a_r - b_c), so sigma_min = min |d + a_r - b_c|.
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<OracleRow> rows;
    for (int t = 0; t < 8; ++t) {
        double d = 2.0 * U(cx.rng);
        Eigen::Vector3d a, b;
        for (int k = 0; k < 3; ++k) {
            a[k] = U(cx.rng);
            b[k] = U(cx.rng);
        }
        Mat3 Qj = (cplx(0, 1) * a.cast<cplx>()).asDiagonal();
        Mat3 Qjp = (cplx(0, 1) * b.cast<cplx>()).asDiagonal();
        double closed = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) closed = std::min(closed, std::abs(d + a[r] - b[c]));
        double svd = smallest_singular_value(homological_matrix(d, Qj, Qjp));
        rows.push_back({"sigma_min d=" + fmt(d), closed, svd, 1e-13 * std::max(1.0, std::abs(d))});
    }
    return rows;
}

std::vector<OracleRow> oracle_sublevel_monomial(Context&) {
    // Q = 0: |det(s|k| Id_d)| < T  <=>  |s| < (T / |k|^d)^{1/d}
    std::vector<OracleRow> rows;
    const std::vector<int> k{1, 2, 0};
    const double kn = std::sqrt(5.0);
    const std::size_t n = 400000;
    for (int d : {1, 2, 3})
        for (double eta : {4.0, 16.0, 64.0}) {
            auto probe = resonant_sublevel_probe(k, [d](double) { return Eigen::MatrixXcd::Zero(d, d).eval(); }, eta, d, n);
            double closed = std::min(1.0, std::pow(probe.threshold / std::pow(kn, d), 1.0 / d));
            rows.push_back({"fraction d=" + std::to_string(d) + " eta=" + fmt(eta), closed, probe.fraction,
                            0.02 * closed + 2.0 / n});
        }
    return rows;
}

std::vector<OracleRow> oracle_sublevel_diagonal(Context&) {
    std::vector<OracleRow> rows;
    const std::vector<int> k{2, 1, 1};
    const double kn = std::sqrt(6.0);
    const std::vector<cplx> q{cplx(0.0, 0.3), cplx(-0.2, 0.0), cplx(0.1, 0.4)};
    const std::size_t n = 400000;
    Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(3, 3);
    for (int i = 0; i < 3; ++i) Q(i, i) = q[i];
    for (double eta : {2.0, 8.0, 32.0}) {
        auto probe = resonant_sublevel_probe(k, [&](double) { return Q; }, eta, 3, n);
        double closed = sublevel_fraction_diagonal(kn, q, probe.threshold, 1.0);
        rows.push_back({"fraction eta=" + fmt(eta), closed, probe.fraction, 0.05 * closed + 2.0 / n});
    }
    return rows;
}

std::vector<OracleRow> oracle_diophantine_critical(Context& cx) {
    // brute force min over the box of |omega.l + zeta.j| <l,j>^tau / c0
    const auto& cfg = cx.cfg;
    const auto lat = cfg.lattice();
    const auto dc = cfg.diophantine();
    const auto lam = cfg.lambda();
    const int nu = cfg.nu;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> c(nu + 3, 0);
    std::vector<int> lo(nu + 3), hi(nu + 3);
    for (int k = 0; k < nu + 3; ++k) {
        int b = k < nu ? cfg.L : cfg.K;
        lo[k] = -b;
        hi[k] = b;
        c[k] = -b;
    }
    while (true) {
        double d = 0, nl = 0, nj = 0;
        bool nonzero = false;
        for (int k = 0; k < nu; ++k) {
            d += lam.omega[k] * c[k];
            nl += double(c[k]) * c[k];
            nonzero = nonzero || c[k] != 0;
        }
        for (int k = 0; k < 3; ++k) {
            d += lam.zeta[k] * c[nu + k];
            nj += double(c[nu + k]) * c[nu + k];
            nonzero = nonzero || c[nu + k] != 0;
        }
        if (nonzero) {
            double br = std::max({1.0, std::sqrt(nl), std::sqrt(nj)});
            best = std::min(best, std::abs(d) * std::pow(br, dc.tau) / dc.c0);
        }
        int k = nu + 2;
        while (k >= 0 && c[k] == hi[k]) {
            c[k] = lo[k];
            --k;
        }
        if (k < 0) break;
        ++c[k];
    }
    double lib = critical_gamma(lam, Predicate::diophantine, dc, lat);
    return {{"critical gamma", best, lib, 1e-12 * best}};
}

void cmd_oracle(Context& cx) {
    const auto& name = cx.opt.oracle_case;
    std::vector<OracleRow> rows;
    if (name == "melnikov-diagonal") {
        rows = oracle_melnikov_diagonal(cx);
    } else if (name == "sublevel-monomial") {
        rows = oracle_sublevel_monomial(cx);
    } else if (name == "sublevel-diagonal") {
        rows = oracle_sublevel_diagonal(cx);
    } else if (name == "diophantine-critical") {
        rows = oracle_diophantine_critical(cx);
    } else {
        fail(ErrorCode::config,
             "oracle: unknown case '" + name +
                 "' (melnikov-diagonal, sublevel-monomial, sublevel-diagonal, diophantine-critical)");
    }
    CsvWriter csv(cx.path("oracle.csv"), {"case", "quantity", "reference", "computed", "abs_diff", "pass"});
    json out = json::array();
    for (const auto& r : rows) {
        double diff = std::abs(r.computed - r.reference);
        bool pass = diff <= r.tol;
        cx.verified = cx.verified && pass;
        csv << name << r.quantity << r.reference << r.computed << diff << (pass ? 1 : 0);
        csv.end_row();
        out.push_back({{"quantity", r.quantity}, {"reference", r.reference}, {"computed", r.computed}, {"pass", pass}});
        cx.log << name << ": " << r.quantity << " reference " << fmt(r.reference) << " computed " << fmt(r.computed)
               << (pass ? "" : "  MISMATCH") << "\n";
    }
    cx.results["case"] = name;
    cx.results["rows"] = out;
}

}  // namespace

int run_command(const std::string& cmd, const RunConfig& cfg, const CommandOptions& opt, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    json manifest;
    manifest["command"] = cmd;
    manifest["seed"] = cfg.seed;
    manifest["config"] = cfg.to_json();
    int code = 0;
    Context cx{cfg, opt, log, std::mt19937_64(cfg.seed)};
    try {
        std::error_code ec;
        fs::create_directories(opt.out_dir, ec);
        if (ec) fail(ErrorCode::precondition, "cannot create output directory '" + opt.out_dir + "': " + ec.message());
        {
            std::ofstream echo(cx.path("config.echo"), std::ios::trunc);
            echo << cfg.echo();
        }
        if (cmd == "solve") {
            cmd_solve(cx);
        } else if (cmd == "straighten") {
            cmd_straighten(cx);
        } else if (cmd == "reduce") {
            cmd_reduce(cx, false);
        } else if (cmd == "reduce-kam") {
            cmd_reduce(cx, true);
        } else if (cmd == "melnikov-scan") {
            cmd_melnikov_scan(cx);
        } else if (cmd == "measure") {
            cmd_measure(cx);
        } else if (cmd == "verify") {
            cmd_verify(cx);
        } else if (cmd == "oracle") {
            cmd_oracle(cx);
        } else {
            fail(ErrorCode::config, "unknown command '" + cmd + "'");
        }
        manifest["status"] = cx.verified ? "ok" : "failed";
        if (!cx.verified) code = 1;
    } catch (const StageError& e) {
        code = exit_code(e.code());
        manifest["status"] = "failed";
        manifest["stage"] = e.stage();
        manifest["message"] = e.what();
        log << "error [" << e.stage() << "]: " << e.what() << "\n";
    } catch (const Error& e) {
        code = exit_code(e.code());
        manifest["status"] = "failed";
        manifest["message"] = e.what();
        log << "error: " << e.what() << "\n";
    }
    manifest["exit_code"] = code;
    manifest["results"] = cx.results;
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::error_code ec;
    if (fs::is_directory(opt.out_dir, ec)) write_json(cx.path("manifest.json"), manifest);
    return code;
}

}  // namespace qpe
