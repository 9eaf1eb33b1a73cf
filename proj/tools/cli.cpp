#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "qsdcert/bounds.hpp"
#include "qsdcert/conditioned_semigroup.hpp"
#include "qsdcert/discretize.hpp"
#include "qsdcert/empirical_law.hpp"
#include "qsdcert/error.hpp"
#include "qsdcert/finite_kernel.hpp"
#include "qsdcert/io.hpp"
#include "qsdcert/qprocess.hpp"
#include "qsdcert/spec_json.hpp"

namespace qsdcert {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr BoundKind kSweepKinds[] = {BoundKind::LInftyPF,           BoundKind::KillingProb,
                                     BoundKind::ConditionedLInfty,  BoundKind::UniformConditioned,
                                     BoundKind::ComparisonUpper,    BoundKind::ComparisonLower};

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::InvalidSpec:
        case ErrorCode::NotSquare:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NegativeEntry:
        case ErrorCode::RowSumExceedsOne:
        case ErrorCode::DeadRow:
        case ErrorCode::InvalidDistribution:
        case ErrorCode::DegenerateSubset:
        case ErrorCode::HullInfeasible:
        case ErrorCode::StartOutsideDomain:
            return 2;
        case ErrorCode::NoConvergence: return 3;
        case ErrorCode::HorizonNotFound: return 4;
        case ErrorCode::AllAbsorbed: return 5;
        default: return 6;
    }
}

struct Run {
    fs::path out;
    std::vector<std::string> argv;
    ojson manifest;

    void input(const std::string& path) {
        manifest["inputs"].push_back({{"path", path}, {"hash", hex(file_hash(path))}});
    }
    void write(const std::string& name, std::string_view text) const { write_text(out / name, text); }
};

std::vector<std::size_t> parse_cells(const std::string& text) {
    std::vector<std::size_t> cells;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(field, &used);
            if (used != field.size() || v <= 0) throw std::invalid_argument(field);
            cells.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ParseError, "--grid: bad cell count '" + field + "'");
        }
    }
    if (cells.empty()) throw Error(ErrorCode::ParseError, "--grid: empty");
    return cells;
}

SubMarkovKernel load_kernel(Run& run, const std::string& path) {
    run.input(path);
    return validate_kernel(read_matrix_csv(path));
}

ProcessSpec load_spec(Run& run, const std::string& path) {
    run.input(path);
    ProcessSpec spec = parse_spec(read_text(path));
    validate_spec(spec);
    return spec;
}

std::string kernel_header(const SubMarkovKernel& k) {
    return "n=" + std::to_string(k.n()) + " hash=" + hex(k.hash());
}

std::string qsd_csv(const SubMarkovKernel& k, const QsdSolution& q) {
    std::string out = "# " + kernel_header(k) + " lambda=" + fmt(q.lambda) +
                      " iterations=" + std::to_string(q.iterations) + " residual=" + fmt(q.residual) + "\n";
    out += "state,pi,phi\n";
    for (std::size_t x = 0; x < k.n(); ++x)
        out += std::to_string(x) + "," + fmt(q.pi[x]) + "," + fmt(q.phi[x]) + "\n";
    return out;
}

std::string certificate_csv(const SubMarkovKernel& k, const DobrushinCertificate& c) {
    return "# " + kernel_header(k) + "\nt0,c0,C2,c3\n" + std::to_string(c.t0) + "," + fmt(c.c0) + "," +
           fmt(c.C2) + "," + fmt(c.c3) + "\n";
}

// Writes one CSV per bound kind plus a summary; returns the FAIL count.
std::size_t write_sweep(const Run& run, const SubMarkovKernel& k, const SweepResult& sweep) {
    std::string summary = "# " + kernel_header(k) + " lp_interpolation_gap=" +
                          fmt(sweep.worst_interpolation_gap) + "\nkind,pass,fail,not_applicable,min_slack\n";
    for (BoundKind kind : kSweepKinds) {
        run.write("bounds_" + std::string(to_string(kind)) + ".csv", reports_csv(sweep.reports, kind, k.hash(), k.n()));
        std::size_t pass = 0, fail = 0, na = 0;
        double slack = std::numeric_limits<double>::infinity();
        for (const BoundReport& r : sweep.reports) {
            if (r.kind != kind) continue;
            if (r.verdict == Verdict::Pass) ++pass;
            else if (r.verdict == Verdict::Fail) ++fail;
            else ++na;
            if (r.verdict != Verdict::NotApplicable) slack = std::min(slack, r.slack);
        }
        summary += std::string(to_string(kind)) + "," + std::to_string(pass) + "," + std::to_string(fail) + "," +
                   std::to_string(na) + "," + fmt(slack) + "\n";
    }
    run.write("summary.csv", summary);
    return sweep.fail;
}

std::string law_text(const std::vector<BoundReport>& reports) {
    std::string out = "t,measured,bound,slack,verdict\n";
    for (const BoundReport& r : reports)
        out += std::to_string(r.t) + "," + fmt(r.measured) + "," + fmt(r.bound) + "," + fmt(r.slack) + "," +
               std::string(to_string(r.verdict)) + "\n";
    return out;
}

struct HorizonChoice {
    std::uint64_t t0 = 0;
    std::string scan_csv;
};

// Minimal primitive horizon, optionally scanning `scan` horizons from there
// and keeping the one with the fastest certified rate -log(1 - c0) / t0.
HorizonChoice choose_t0(const SubMarkovKernel& k, const Distribution& pi, std::optional<std::uint64_t> fixed,
                        std::uint64_t max_horizon, std::uint64_t scan) {
    HorizonChoice choice;
    if (fixed) {
        choice.t0 = *fixed;
        return choice;
    }
    const std::uint64_t first = minimal_positive_horizon(k, max_horizon);
    choice.t0 = first;
    if (scan <= 1) return choice;
    choice.scan_csv = "t0,c0,rate\n";
    double best = -1.0;
    for (std::uint64_t t0 = first; t0 < first + scan; ++t0) {
        const DobrushinCertificate c = dobrushin_constants(k, pi, t0);
        const double rate = c.c0 >= 1.0 ? std::numeric_limits<double>::infinity()
                                        : -std::log1p(-c.c0) / static_cast<double>(t0);
        choice.scan_csv += std::to_string(t0) + "," + fmt(c.c0) + "," + fmt(rate) + "\n";
        if (rate > best) {
            best = rate;
            choice.t0 = t0;
        }
    }
    return choice;
}

bool is_json(const std::string& path) { return fs::path(path).extension() == ".json"; }

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Quasi-stationary distributions, certified bounds and PDMP cross-validation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_dir = ".";
    int threads = 0;
    app.add_option("--out", out_dir, "Output directory")->envname("QSDCERT_OUT")->capture_default_str();
    app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->capture_default_str();

    Run run;
    std::function<int()> action;

    // Shared option values.
    std::string input;
    double tol = 1e-12;
    std::size_t max_iter = 1'000'000;
    std::optional<std::uint64_t> t0;
    bool auto_t0 = false;
    std::uint64_t t_max = 100, max_horizon = 1000, t0_scan = 1;
    std::string grid_text = "50";
    std::size_t angle_bins = 8, samples = 10000, paths = 10000, mc_paths = 0, audit_trials = 20;
    double t_cont = 0.1, t_sim = 1.0, mc_t = 5.0, tv_max = 0.05;
    std::optional<double> resample_every;
    double mc_resample_every = 0.5;
    std::uint64_t seed = 1;
    std::vector<double> start_x;
    std::size_t start_regime = 0;
    double start_angle = 0.0;
    bool adjoint = false;

    auto add_kernel = [&](CLI::App* sub, const std::string& what) {
        sub->add_option("input", input, what)->required();
    };
    auto add_t0 = [&](CLI::App* sub) {
        auto* fixed = sub->add_option("--t0", t0, "Dobrushin horizon");
        sub->add_flag("--auto-t0", auto_t0, "Use the minimal primitive horizon")->excludes(fixed);
        sub->add_option("--max-horizon", max_horizon, "Search cap for --auto-t0")->capture_default_str();
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--grid", grid_text, "Cells per axis, e.g. 50 or 6,6")->capture_default_str();
        sub->add_option("--angle-bins", angle_bins, "Heading bins for neutron transport")->capture_default_str();
        sub->add_option("--t0-cont", t_cont, "Continuous time per grid step")->capture_default_str();
        sub->add_option("--samples", samples, "Trajectories per grid state")->capture_default_str();
        sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    };

    auto* qsd = app.add_subcommand("qsd", "QSD, eigenvalue and right eigenfunction of a kernel");
    add_kernel(qsd, "Kernel CSV");
    qsd->add_option("--tol", tol)->capture_default_str();
    qsd->add_option("--max-iter", max_iter)->capture_default_str();
    qsd->callback([&] {
        run.manifest["parameters"] = {{"tol", tol}, {"max_iter", max_iter}};
        action = [&] {
            const SubMarkovKernel k = load_kernel(run, input);
            const QsdSolution q = compute_qsd(k, tol, max_iter);
            run.write("qsd.csv", qsd_csv(k, q));
            std::cout << "lambda " << fmt(q.lambda) << "\n";
            return 0;
        };
    });

    auto* certify = app.add_subcommand("certify", "Certificate and bound sweep for a kernel");
    add_kernel(certify, "Kernel CSV");
    add_t0(certify);
    certify->add_option("--t-max", t_max)->capture_default_str();
    certify->add_option("--t0-scan", t0_scan, "Horizons to scan from the minimal one")->capture_default_str();
    certify->callback([&] {
        run.manifest["parameters"] = {{"t0", t0 ? ojson(*t0) : ojson("auto")}, {"max_horizon", max_horizon},
                                      {"t_max", t_max}, {"t0_scan", t0_scan}};
        action = [&] {
            const SubMarkovKernel k = load_kernel(run, input);
            if (!t0) minimal_positive_horizon(k, max_horizon);
            const QsdSolution q = compute_qsd(k);
            const HorizonChoice h = choose_t0(k, q.pi, t0, max_horizon, t0_scan);
            if (!h.scan_csv.empty()) run.write("t0_scan.csv", h.scan_csv);
            const DobrushinCertificate cert = dobrushin_constants(k, q.pi, h.t0);
            run.write("certificate.csv", certificate_csv(k, cert));
            SweepOptions opt;
            opt.t_max = t_max;
            const SweepResult sweep = certify_sweep(ConditionedFlow::from_qsd(k, q), cert, opt);
            const std::size_t fails = write_sweep(run, k, sweep);
            std::cout << "t0 " << h.t0 << " c0 " << fmt(cert.c0) << ": " << sweep.pass << " PASS, " << fails
                      << " FAIL, " << sweep.not_applicable << " NOT_APPLICABLE\n";
            return fails > 0 ? 1 : 0;
        };
    });

    auto* reverse = app.add_subcommand("reverse", "Reverse kernel at the QSD, or reversed process spec");
    add_kernel(reverse, "Kernel CSV or process spec JSON");
    reverse->callback([&] {
        run.manifest["parameters"] = ojson::object();
        action = [&] {
            if (is_json(input)) {
                const ProcessSpec spec = load_spec(run, input);
                const auto* p = std::get_if<PdmpSpec>(&spec);
                if (!p) throw Error(ErrorCode::InvalidSpec, "only PDMP specs have a reversed spec");
                run.write("reversed_spec.json", spec_to_json(reversed_spec(*p)));
                return 0;
            }
            const SubMarkovKernel k = load_kernel(run, input);
            const QsdSolution q = compute_qsd(k);
            const SubMarkovKernel r = reverse_kernel(k, q.pi);
            run.write("reverse.csv", matrix_csv(r.p(), kernel_header(k) + " lambda=" + fmt(q.lambda)));
            return 0;
        };
    });

    auto* adj = app.add_subcommand("adjoint", "Adjoint kernel, or forward/reverse relation check for a PCMP");
    add_kernel(adj, "Kernel CSV or PCMP spec JSON");
    add_grid(adj);
    adj->callback([&] {
        run.manifest["parameters"] = {{"grid", grid_text}, {"t0_cont", t_cont}, {"samples", samples}};
        action = [&] {
            if (is_json(input)) {
                const ProcessSpec spec = load_spec(run, input);
                const auto* p = std::get_if<PdmpSpec>(&spec);
                if (!p) throw Error(ErrorCode::InvalidSpec, "the adjoint relation needs a PDMP spec");
                const GridScheme grid(spec, parse_cells(grid_text), t_cont, angle_bins);
                const AdjointReport rep = adjoint_relation_check(*p, grid, samples, seed);
                run.write("adjoint_z.csv", adjoint_csv(rep));
                std::cout << rep.within << "/" << rep.massive_pairs << " massive pairs within 4 SE, worst z "
                          << fmt(rep.worst.z) << "\n";
                return rep.passed ? 0 : 1;
            }
            const SubMarkovKernel k = load_kernel(run, input);
            const AdjointKernel a = adjoint_kernel(k);
            run.write("adjoint.csv", matrix_csv(a.kernel.p(), kernel_header(k) + " a=" + fmt(a.a)));
            return 0;
        };
    });

    auto* qproc = app.add_subcommand("qprocess", "Q-process kernel, reversal identity and convergence bound");
    add_kernel(qproc, "Kernel CSV");
    add_t0(qproc);
    qproc->add_option("--t-max", t_max)->capture_default_str();
    qproc->callback([&] {
        run.manifest["parameters"] = {{"t0", t0 ? ojson(*t0) : ojson("auto")}, {"max_horizon", max_horizon},
                                      {"t_max", t_max}};
        action = [&] {
            const SubMarkovKernel k = load_kernel(run, input);
            if (!t0) minimal_positive_horizon(k, max_horizon);
            const QsdSolution q = compute_qsd(k);
            const std::uint64_t h = choose_t0(k, q.pi, t0, max_horizon, 1).t0;
            const DobrushinCertificate cert = dobrushin_constants(k, q.pi, h);
            const ConditionedFlow flow = ConditionedFlow::from_qsd(k, q);
            const QProcess qp = build_qprocess(flow, q.phi);
            run.write("q.csv", matrix_csv(qp.q, kernel_header(k)));
            std::string beta = "state,beta\n";
            for (std::size_t x = 0; x < k.n(); ++x) beta += std::to_string(x) + "," + fmt(qp.beta[x]) + "\n";
            run.write("beta.csv", beta);

            std::size_t fails = 0;
            const double stoch = stochasticity_defect(qp);
            const double stat = stationarity_defect(qp);
            std::string identities = "identity,value,tolerance,verdict\n";
            auto line = [&](const std::string& name, double v, double limit) {
                const bool ok = v <= limit;
                fails += ok ? 0 : 1;
                identities += name + "," + fmt(v) + "," + fmt(limit) + "," + (ok ? "PASS" : "FAIL") + "\n";
            };
            line("row_sums", stoch, 1e-12);
            line("stationarity", stat, 1e-10);
            const ReversalReport rev = qprocess_reversal_check(
                qp, reverse_kernel(kernel_power(k, h), q.pi), q.lambda, h, std::numeric_limits<double>::infinity());
            line("shared_reversal", rev.max_discrepancy, 1e-11);
            run.write("identities.csv", identities);

            std::vector<BoundReport> reports;
            std::vector<Distribution> starts;
            for (std::size_t x = 0; x < k.n(); ++x) starts.push_back(Distribution::dirac(k.n(), x));
            starts.push_back(Distribution::uniform(k.n()));
            for (std::uint64_t t = 0; t <= t_max; ++t) {
                BoundReport worst;
                bool first = true;
                for (const Distribution& mu : starts) {
                    BoundReport r = qprocess_convergence_check(qp, mu, t, cert);
                    if (first || (r.verdict == Verdict::Fail && worst.verdict != Verdict::Fail) ||
                        (r.verdict == worst.verdict && r.slack < worst.slack))
                        worst = r;
                    first = false;
                }
                fails += worst.verdict == Verdict::Fail ? 1 : 0;
                reports.push_back(worst);
            }
            run.write("qprocess_bounds.csv", "# " + kernel_header(k) + " t0=" + std::to_string(h) + "\n" +
                                                 law_text(reports));
            std::cout << "Q-process checks: " << fails << " FAIL\n";
            return fails > 0 ? 1 : 0;
        };
    });

    auto* sim = app.add_subcommand("simulate", "Monte Carlo conditioned law on a grid");
    add_kernel(sim, "Process spec JSON");
    sim->add_option("--t", t_sim, "Time horizon")->capture_default_str();
    sim->add_option("--paths", paths)->capture_default_str();
    sim->add_option("--grid", grid_text, "Cells per axis, e.g. 50 or 6,6")->capture_default_str();
    sim->add_option("--angle-bins", angle_bins)->capture_default_str();
    sim->add_option("--seed", seed)->capture_default_str();
    sim->add_option("--resample-every", resample_every, "Survivor resampling spacing");
    sim->add_option("--start", start_x, "Start position (default: uniform over the domain)")->delimiter(',');
    sim->add_option("--start-regime", start_regime)->capture_default_str();
    sim->add_option("--start-angle", start_angle)->capture_default_str();
    sim->callback([&] {
        run.manifest["parameters"] = {{"t", t_sim}, {"paths", paths}, {"grid", grid_text},
                                      {"angle_bins", angle_bins}, {"seed", seed},
                                      {"resample_every", resample_every ? ojson(*resample_every) : ojson(nullptr)},
                                      {"start", start_x}, {"start_regime", start_regime},
                                      {"start_angle", start_angle}};
        run.manifest["seed"] = seed;
        action = [&] {
            const ProcessSpec spec = load_spec(run, input);
            const GridScheme grid(spec, parse_cells(grid_text), 1.0, angle_bins);
            StartSampler start;
            if (!start_x.empty()) {
                ProcessState st;
                if (start_x.size() != grid.bounds().dim())
                    throw Error(ErrorCode::ParseError, "--start: expected " + std::to_string(grid.bounds().dim()) +
                                                           " coordinates");
                std::copy(start_x.begin(), start_x.end(), st.x.begin());
                st.regime = start_regime;
                st.angle = start_angle;
                start.point = st;
            }
            LawOptions opt;
            opt.t = t_sim;
            opt.n_paths = paths;
            opt.seed = seed;
            opt.resample_every = resample_every;
            try {
                const EmpiricalLaw law = estimate_conditioned_law(spec, start, grid, opt);
                run.write("law.csv", law_csv(law));
                run.write("attrition.csv", attrition_csv(law.attrition));
                std::cout << "survival " << fmt(law.survival_probability) << " +- "
                          << fmt(law.survival_std_error) << "\n";
            } catch (const AllAbsorbedError& e) {
                run.write("attrition.csv", attrition_csv(e.curve()));
                throw;
            }
            return 0;
        };
    });

    auto* disc = app.add_subcommand("discretize", "Grid kernel of a continuous process");
    add_kernel(disc, "Process spec JSON");
    add_grid(disc);
    disc->callback([&] {
        run.manifest["parameters"] = {{"grid", grid_text}, {"angle_bins", angle_bins}, {"t0_cont", t_cont},
                                      {"samples", samples}, {"seed", seed}};
        run.manifest["seed"] = seed;
        action = [&] {
            const ProcessSpec spec = load_spec(run, input);
            const GridScheme grid(spec, parse_cells(grid_text), t_cont, angle_bins);
            const DiscretizedKernel dk = discretize_process(spec, grid, samples, seed);
            run.write("kernel.csv", matrix_csv(dk.p, "n=" + std::to_string(dk.p.rows()) + " hash=" +
                                                         hex(content_hash(dk.p))));
            run.write("kernel.meta.json", kernel_metadata_json(dk, hex(file_hash(input))));
            return 0;
        };
    });

    auto* pipe = app.add_subcommand("pipeline", "Discretize, certify and cross-check against Monte Carlo");
    add_kernel(pipe, "Process spec JSON");
    add_grid(pipe);
    pipe->add_option("--t-max", t_max)->capture_default_str();
    pipe->add_option("--max-horizon", max_horizon)->capture_default_str();
    pipe->add_option("--audit-trials", audit_trials)->capture_default_str();
    pipe->add_option("--mc-paths", mc_paths, "Monte Carlo paths for the grid comparison (0 skips it)")
        ->capture_default_str();
    pipe->add_option("--mc-t", mc_t)->capture_default_str();
    pipe->add_option("--mc-resample-every", mc_resample_every)->capture_default_str();
    pipe->add_option("--tv-max", tv_max, "Largest accepted TV between Monte Carlo law and grid QSD")
        ->capture_default_str();
    pipe->add_flag("--adjoint", adjoint, "Also run the forward/reverse relation check");
    pipe->callback([&] {
        run.manifest["parameters"] = {{"grid", grid_text},      {"angle_bins", angle_bins},
                                      {"t0_cont", t_cont},      {"samples", samples},
                                      {"seed", seed},           {"t_max", t_max},
                                      {"max_horizon", max_horizon}, {"audit_trials", audit_trials},
                                      {"mc_paths", mc_paths},   {"mc_t", mc_t},
                                      {"mc_resample_every", mc_resample_every}, {"tv_max", tv_max},
                                      {"adjoint", adjoint}};
        run.manifest["seed"] = seed;
        action = [&] {
            const ProcessSpec spec = load_spec(run, input);
            const GridScheme grid(spec, parse_cells(grid_text), t_cont, angle_bins);
            PipelineOptions opt;
            opt.t_max = t_max;
            opt.max_horizon = max_horizon;
            opt.audit_trials = audit_trials;
            const PipelineReport rep = pipeline_certify(spec, grid, samples, seed, opt);
            std::vector<std::string> failures = rep.failures;
            const DiscretizedKernel& dk = rep.discretized;
            const SubMarkovKernel k = dk.to_kernel();
            run.write("kernel.csv", matrix_csv(dk.p, kernel_header(k)));
            run.write("kernel.meta.json", kernel_metadata_json(dk, hex(file_hash(input))));
            run.write("qsd.csv", qsd_csv(k, rep.qsd));
            run.write("certificate.csv", certificate_csv(k, rep.cert));
            write_sweep(run, k, rep.sweep);
            run.write("qprocess_bounds.csv", law_text(rep.qprocess_reports));
            run.write("audit.csv", audit_csv(rep.audit));

            ojson summary;
            summary["states"] = k.n();
            summary["kernel_hash"] = hex(k.hash());
            summary["t0_cont"] = dk.grid.t0_cont();
            summary["t0"] = rep.cert.t0;
            summary["lambda"] = rep.qsd.lambda;
            summary["c0"] = rep.cert.c0;
            summary["sweep"] = {{"pass", rep.sweep.pass}, {"fail", rep.sweep.fail},
                                {"not_applicable", rep.sweep.not_applicable}};
            summary["qprocess"] = {{"row_sum_defect", rep.stochasticity_defect},
                                   {"stationarity_defect", rep.stationarity_defect},
                                   {"reversal_discrepancy", rep.reversal.max_discrepancy}};
            summary["audit_worst_ratio"] = rep.audit.worst_ratio;

            if (mc_paths > 0) {
                LawOptions lo;
                lo.t = mc_t;
                lo.n_paths = mc_paths;
                lo.seed = seed;
                lo.resample_every = mc_resample_every;
                const EmpiricalLaw law = estimate_conditioned_law(spec, StartSampler{}, dk.grid, lo);
                run.write("mc_law.csv", law_csv(law));
                const double tv = total_variation(law.weights, rep.qsd.pi.values());
                summary["mc"] = {{"t", mc_t}, {"paths", mc_paths}, {"tv", tv}, {"tv_max", tv_max}};
                if (tv > tv_max) failures.push_back("Monte Carlo law differs from the grid QSD: TV " + fmt(tv));
            }
            if (adjoint) {
                const auto* p = std::get_if<PdmpSpec>(&spec);
                if (!p) throw Error(ErrorCode::InvalidSpec, "--adjoint needs a PDMP spec");
                const AdjointReport a = adjoint_relation_check(*p, dk.grid, samples, seed);
                run.write("adjoint_z.csv", adjoint_csv(a));
                summary["adjoint"] = {{"massive_pairs", a.massive_pairs}, {"fraction_within", a.fraction_within},
                                      {"worst_z", a.worst.z}};
                if (!a.passed) failures.push_back("adjoint relation: " + fmt(a.fraction_within) + " within 4 SE");
            }
            summary["failures"] = failures;
            summary["verdict"] = failures.empty() ? "PASS" : "FAIL";
            run.write("pipeline.json", summary.dump(2) + "\n");
            for (const auto& f : failures) std::cerr << "FAIL: " << f << "\n";
            std::cout << "pipeline " << (failures.empty() ? "PASS" : "FAIL") << " (" << k.n() << " states, t0 "
                      << rep.cert.t0 << ")\n";
            return failures.empty() ? 0 : 1;
        };
    });

    std::string manifest_path;
    auto* replay = app.add_subcommand("replay", "Re-run a manifest single-threaded");
    replay->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (replay->parsed()) {
        try {
            const ojson m = ojson::parse(read_text(manifest_path));
            std::vector<std::string> again = m.at("argv").get<std::vector<std::string>>();
            again.insert(again.end(), {"--out", out_dir, "--threads", "1"});
            return run_cli(again);
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: bad manifest: " << e.what() << "\n";
            return 2;
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return exit_code(e.code());
        }
    }

    if (threads > 0) omp_set_num_threads(threads);
    run.out = out_dir;

    // Canonical argument list without the output directory and thread count.
    for (std::size_t i = 0; i < args.size(); ++i) {
        if ((args[i] == "--out" || args[i] == "--threads") && i + 1 < args.size()) {
            ++i;
            continue;
        }
        if (args[i].rfind("--out=", 0) == 0 || args[i].rfind("--threads=", 0) == 0) continue;
        run.argv.push_back(args[i]);
    }
    const CLI::App* sub = app.get_subcommands().front();

    try {
        run.manifest["subcommand"] = sub->get_name();
        run.manifest["inputs"] = ojson::array();
        run.manifest["argv"] = run.argv;
        run.manifest["out"] = fs::absolute(run.out).string();
        run.manifest["threads"] = threads;
        fs::create_directories(run.out);
        const int rc = action();
        run.write("manifest.json", run.manifest.dump(2) + "\n");
        return rc;
    } catch (const Error& e) {
        run.write("manifest.json", run.manifest.dump(2) + "\n");
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    }
}

}  // namespace qsdcert
