// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "../../tools/cli.hpp"
#include "../support.hpp"
#include "qsdcert/bounds.hpp"
#include "qsdcert/discretize.hpp"
#include "qsdcert/empirical_law.hpp"
#include "qsdcert/error.hpp"
#include "qsdcert/io.hpp"
#include "qsdcert/qprocess.hpp"
#include "qsdcert/spec_json.hpp"

using namespace qsdcert;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Instance {
    SubMarkovKernel k;
    QsdSolution qsd;
    std::uint64_t t0 = 1;
    DobrushinCertificate cert;
};

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::cout << "criterion " << id << " " << (pass ? "PASS" : "FAIL") << " (" << detail << ")" << std::endl;
    failures += pass ? 0 : 1;
}

void run(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

std::vector<Instance> random_instances(std::size_t count) {
    Stream rng(20240601, {0});
    std::vector<Instance> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t n = 2 + i % 19;
        const double sparsity = i % 4 == 3 ? 0.4 : 0.0;
        Instance in{testing::random_kernel(rng, n, sparsity), {}, 1, {}};
        in.qsd = compute_qsd(in.k);
        in.t0 = minimal_positive_horizon(in.k, 1000);
        in.cert = dobrushin_constants(in.k, in.qsd.pi, in.t0);
        out.push_back(std::move(in));
    }
    return out;
}

std::string str(double x) { return fmt(x); }

}  // namespace

int main() {
    const auto start = Clock::now();
    std::vector<Instance> kernels;
    std::vector<SweepResult> sweeps;

    run(1, [&] {
        const auto t = Clock::now();
        kernels = random_instances(200);
        std::size_t fails = 0, passes = 0;
        double min_slack = INFINITY;
        for (const Instance& in : kernels) {
            SweepOptions o;
            o.t_max = 100;
            sweeps.push_back(certify_sweep(ConditionedFlow::from_qsd(in.k, in.qsd), in.cert, o));
            for (const BoundReport& r : sweeps.back().reports) {
                if (r.kind != BoundKind::LInftyPF && r.kind != BoundKind::KillingProb &&
                    r.kind != BoundKind::ConditionedLInfty && r.kind != BoundKind::UniformConditioned)
                    continue;
                if (r.verdict == Verdict::NotApplicable) continue;
                if (r.verdict == Verdict::Fail || r.slack < -kSlackTolerance) ++fails;
                else ++passes;
                min_slack = std::min(min_slack, r.slack);
            }
        }
        const double secs = seconds_since(t);
        report(1, fails == 0 && secs < 60.0 && kernels.size() >= 200,
               std::to_string(kernels.size()) + " kernels, " + std::to_string(passes) + " checks passed, " +
                   std::to_string(fails) + " failed, min slack " + str(min_slack) + ", " + str(secs) + " s");
    });

    run(2, [&] {
        double worst = 0.0, worst_power = 0.0;
        for (const Instance& in : kernels) {
            const SubMarkovKernel r = reverse_kernel(in.k, in.qsd.pi);
            for (double m : r.row_sums()) worst = std::max(worst, std::fabs(m - in.qsd.lambda));
            const SubMarkovKernel q = kernel_power(in.k, in.t0);
            const SubMarkovKernel rt = reverse_kernel(q, in.qsd.pi);
            const double lt = std::pow(in.qsd.lambda, static_cast<double>(in.t0));
            for (double m : rt.row_sums()) worst_power = std::max(worst_power, std::fabs(m - lt));
        }
        report(2, !kernels.empty() && worst <= 1e-12 && worst_power <= 1e-12,
               "max |R1 - lambda| " + str(worst) + ", at t0 " + str(worst_power));
    });

    run(3, [&] {
        double duality = 0.0, beta = 0.0, worst_ratio = 0.0;
        std::size_t audits = 0;
        Stream rng(7, {3});
        for (std::size_t i = 0; i < 100; ++i) {
            const Instance& in = kernels.at(i);
            const ConditionedFlow flow = ConditionedFlow::from_qsd(in.k, in.qsd);
            const std::size_t n = in.k.n();
            const Distribution mu = testing::random_distribution(rng, n);
            Vector f(n);
            for (double& x : f) x = rng.uniform(-1.0, 1.0);
            const double lhs = dot(t_dagger(flow, mu).values(), f);
            const double rhs = dot(mu.values(), t_operator(flow, f));
            duality = std::max(duality, std::fabs(lhs - rhs));
            const Distribution fixed = stationary_of_t_dagger(flow, 1e-13, in.t0);
            for (std::size_t x = 0; x < n; ++x)
                beta = std::max(beta, std::fabs(fixed[x] - in.qsd.phi[x] * in.qsd.pi[x]));
            // Throws ContractionViolated if any row exceeds its bound by more than 1e-12.
            const ContractionAudit a = contraction_audit(flow, in.t0, in.cert.c0, 10, i + 1);
            worst_ratio = std::max(worst_ratio, a.worst_ratio);
            audits += a.rows.size();
        }
        report(3, duality <= 1e-10 && beta <= 1e-10,
               "duality " + str(duality) + ", |fixed point - phi pi| " + str(beta) + ", " +
                   std::to_string(audits) + " audit rows, worst TV ratio " + str(worst_ratio));
    });

    run(4, [&] {
        std::size_t fails = 0;
        double min_slack = INFINITY;
        for (const Instance& in : kernels) {
            const auto [up, low] = comparison_check(ConditionedFlow::from_qsd(in.k, in.qsd), 2 * in.t0, in.cert);
            for (const BoundReport& r : {up, low}) {
                if (r.verdict != Verdict::Pass) ++fails;
                min_slack = std::min(min_slack, r.slack);
            }
        }
        report(4, !kernels.empty() && fails == 0,
               std::to_string(fails) + " failed sides, min slack " + str(min_slack));
    });

    run(5, [&] {
        double stoch = 0.0, stat = 0.0, rev = 0.0;
        std::size_t conv_fail = 0;
        for (const Instance& in : kernels) {
            const ConditionedFlow flow = ConditionedFlow::from_qsd(in.k, in.qsd);
            const QProcess qp = build_qprocess(flow, in.qsd.phi);
            stoch = std::max(stoch, stochasticity_defect(qp));
            stat = std::max(stat, stationarity_defect(qp));
            const SubMarkovKernel r = reverse_kernel(kernel_power(in.k, in.t0), in.qsd.pi);
            rev = std::max(rev, qprocess_reversal_check(qp, r, in.qsd.lambda, in.t0, INFINITY).max_discrepancy);
            const std::size_t n = in.k.n();
            std::size_t argmin = 0;
            for (std::size_t x = 1; x < n; ++x)
                if (qp.beta[x] < qp.beta[argmin]) argmin = x;
            const std::vector<Distribution> starts = {Distribution::uniform(n), Distribution::dirac(n, argmin),
                                                      Distribution::dirac(n, n - 1)};
            for (std::uint64_t t = 0; t <= 100; ++t)
                for (const Distribution& mu : starts)
                    if (qprocess_convergence_check(qp, mu, t, in.cert).verdict == Verdict::Fail) ++conv_fail;
        }
        report(5, !kernels.empty() && stoch <= 1e-12 && stat <= 1e-10 && rev <= 1e-11 && conv_fail == 0,
               "row sums " + str(stoch) + ", stationarity " + str(stat) + ", reversal " + str(rev) + ", " +
                   std::to_string(conv_fail) + " convergence failures");
    });

    run(6, [&] {
        double gap = -INFINITY, mono = 0.0;
        for (const SweepResult& s : sweeps) {
            gap = std::max(gap, s.worst_interpolation_gap);
            mono = std::min(mono, s.worst_lp_monotonicity);
        }
        report(6, !sweeps.empty() && gap <= 1e-12,
               "worst interpolation gap " + str(gap) + ", worst Lp monotonicity step " + str(mono));
    });

    run(7, [&] {
        const auto t = Clock::now();
        const ProcessSpec spec = parse_spec(read_text(testing::config("pcmp_pm1.json")));
        const std::size_t cells = 50;
        const GridScheme grid(spec, {cells}, 0.1);
        const std::size_t samples = 10000;
        PipelineOptions po;
        po.audit_trials = 10;
        const PipelineReport rep = pipeline_certify(spec, grid, samples, 1, po);

        LawOptions lo;
        lo.t = 5.0;
        lo.n_paths = 100000;
        lo.seed = 2;
        lo.resample_every = 0.5;
        const EmpiricalLaw law = estimate_conditioned_law(spec, StartSampler{}, rep.discretized.grid, lo);
        const double tv = total_variation(law.weights, rep.qsd.pi.values());

        // Standard error of the grid QSD from ten independent kernels with a
        // tenth of the samples each: SE = sd(batch) / sqrt(10).
        const std::size_t batches = 10;
        std::vector<Vector> pis;
        for (std::size_t b = 0; b < batches; ++b) {
            const DiscretizedKernel dk =
                discretize_process(spec, rep.discretized.grid, samples / batches, stream_key(1, {100, b}));
            const QsdSolution sol = compute_qsd(dk.to_kernel());
            const auto pi = sol.pi.values();
            pis.emplace_back(pi.begin(), pi.end());
        }
        std::size_t pairs = 0, beyond = 0;
        double worst_z = 0.0;
        for (std::size_t c = 0; c < cells; ++c)
            for (std::size_t i = 0; i < 2; ++i) {
                const std::size_t a = c * 2 + i, m = (cells - 1 - c) * 2 + (1 - i);
                if (a >= m) continue;
                std::vector<double> d;
                for (const Vector& p : pis) d.push_back(p[a] - p[m]);
                double se = 0.0;
                testing::mean_and_se(d, se);
                const double diff = rep.qsd.pi[a] - rep.qsd.pi[m];
                ++pairs;
                const double z = se > 0 ? std::fabs(diff) / se : (diff == 0 ? 0.0 : INFINITY);
                worst_z = std::max(worst_z, z);
                if (z > 3.0) ++beyond;
            }
        const std::size_t allowed = std::max<std::size_t>(1, pairs / 50);
        const double secs = seconds_since(t);
        std::string detail = "grid " + std::to_string(rep.discretized.p.rows()) + " states, pipeline " +
                             (rep.passed() ? "PASS" : "FAIL") + ", TV " + str(tv) + ", symmetry " +
                             std::to_string(beyond) + "/" + std::to_string(pairs) + " pairs beyond 3 SE (worst z " +
                             str(worst_z) + "), " + str(secs) + " s";
        for (const auto& f : rep.failures) detail += "; " + f;
        report(7, rep.passed() && tv <= 0.05 && beyond <= allowed && secs < 300.0, detail);
    });

    run(8, [&] {
        const PdmpSpec one = std::get<PdmpSpec>(parse_spec(read_text(testing::config("pcmp_pm1.json"))));
        const PdmpSpec two = std::get<PdmpSpec>(parse_spec(read_text(testing::config("pcmp_2d_three.json"))));
        const AdjointReport a = adjoint_relation_check(one, GridScheme(ProcessSpec{one}, {50}, 0.1), 10000, 11);
        const AdjointReport b = adjoint_relation_check(two, GridScheme(ProcessSpec{two}, {6, 6}, 0.2), 10000, 12);
        const bool inv = reversed_spec(reversed_spec(one)) == one && reversed_spec(reversed_spec(two)) == two &&
                         spec_to_json(reversed_spec(reversed_spec(two))) == spec_to_json(two);
        report(8, a.passed && b.passed && inv,
               "1-D " + std::to_string(a.within) + "/" + std::to_string(a.massive_pairs) + " within 4 SE, 2-D " +
                   std::to_string(b.within) + "/" + std::to_string(b.massive_pairs) + " (worst z " +
                   str(b.worst.z) + "), involution " + (inv ? "exact" : "broken"));
    });

    run(9, [&] {
        const ProcessSpec disk = parse_spec(read_text(testing::config("neutron_disk.json")));
        NeutronSpec still = std::get<NeutronSpec>(disk);
        still.scatter_rate = 1e-300;
        const double radius = std::get<Disk>(still.domain).radius;
        bool exact = true;
        for (double angle : {0.0, 0.7, 1.9, 3.1, 4.4, 5.8}) {
            ProcessState st;
            st.x = {std::get<Disk>(still.domain).center[0], std::get<Disk>(still.domain).center[1]};
            st.angle = angle;
            const Trajectory tr = simulate(still, st, 10.0, 1);
            exact = exact && tr.absorbed_at && *tr.absorbed_at == radius;
        }
        const fs::path out = fs::temp_directory_path() / "qsdcert_acceptance_neutron";
        fs::remove_all(out);
        const int code = run_cli({"--out", out.string(), "pipeline", testing::config("neutron_disk.json"), "--grid",
                                  "8", "--angle-bins", "8", "--t0-cont", "0.25", "--samples", "2000", "--t-max",
                                  "100", "--audit-trials", "5", "--mc-paths", "100000", "--mc-t", "5",
                                  "--tv-max", "0.1"});
        std::string tv = "?";
        if (fs::exists(out / "pipeline.json")) {
            const auto j = nlohmann::json::parse(read_text(out / "pipeline.json"));
            if (j.contains("mc")) tv = str(j["mc"]["tv"].get<double>());
        }
        report(9, exact && code == 0,
               std::string("exit time ") + (exact ? "== radius" : "!= radius") + ", disk pipeline exit " +
                   std::to_string(code) + ", MC TV " + tv);
    });

    run(10, [&] {
        const fs::path root = fs::temp_directory_path() / "qsdcert_acceptance_replay";
        fs::remove_all(root);
        fs::create_directories(root);
        const std::string sym = testing::config("symmetric2.csv");
        const std::string pm1 = testing::config("pcmp_pm1.json");
        const std::vector<std::vector<std::string>> runs = {
            {"qsd", sym},
            {"certify", sym, "--auto-t0", "--t-max", "20"},
            {"reverse", sym},
            {"adjoint", sym},
            {"qprocess", sym, "--t-max", "20"},
            {"reverse", pm1},
            {"simulate", pm1, "--t", "2", "--paths", "5000", "--grid", "10", "--resample-every", "0.5", "--seed", "3"},
            {"discretize", pm1, "--grid", "10", "--samples", "500", "--seed", "4"},
            {"adjoint", pm1, "--grid", "10", "--samples", "2000", "--seed", "5"},
            {"pipeline", pm1, "--grid", "10", "--samples", "1000", "--t-max", "20", "--audit-trials", "3",
             "--mc-paths", "5000", "--mc-t", "2", "--tv-max", "1"},
        };
        std::size_t compared = 0, mismatched = 0, bad_exit = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const fs::path a = root / ("run" + std::to_string(i)), b = root / ("replay" + std::to_string(i));
            std::vector<std::string> argv = {"--out", a.string(), "--threads", "2"};
            argv.insert(argv.end(), runs[i].begin(), runs[i].end());
            if (run_cli(argv) != 0) ++bad_exit;
            if (run_cli({"replay", (a / "manifest.json").string(), "--out", b.string()}) != 0) ++bad_exit;
            for (const auto& entry : fs::directory_iterator(a)) {
                const std::string name = entry.path().filename().string();
                if (name == "manifest.json") continue;
                ++compared;
                if (!fs::exists(b / name) || read_text(entry.path()) != read_text(b / name)) {
                    ++mismatched;
                    std::cerr << "mismatch: " << runs[i][0] << " " << name << "\n";
                }
            }
        }
        report(10, bad_exit == 0 && mismatched == 0 && compared > 0,
               std::to_string(runs.size()) + " runs, " + std::to_string(compared) + " files compared, " +
                   std::to_string(mismatched) + " mismatched, " + std::to_string(bad_exit) + " nonzero exits");
    });

    std::cout << "total " << str(seconds_since(start)) << " s, " << failures << " criteria failed" << std::endl;
    return failures == 0 ? 0 : 1;
}
