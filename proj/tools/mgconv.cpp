// mgconv command-line driver.
//
// exit codes: 0 success, 1 check or solver failure, 2 usage or configuration error

#include "mgconv/mgconv.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace mgconv;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Writes to a file when a path is given, stdout otherwise.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
            if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

// ---------------------------------------------------------------------------

int cmd_generate(const RunConfig& base, const std::string& out, int workers, long long seed, bool force) {
    RunConfig cfg = base;
    if (!out.empty()) cfg.out_dir = out;
    if (workers > 0) cfg.workers = workers;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    const GridHierarchy hier = cfg.hierarchy();
    const DatasetManifest m =
        generate_dataset(cfg.field, hier, cfg.solver, cfg.schedule(), cfg.seed, cfg.out_dir, cfg.workers, force);
    const Dataset ds = load_dataset(cfg.out_dir);
    const DatasetCheck check = check_dataset(ds);

    std::cout << "dataset " << cfg.out_dir << "\n";
    std::cout << "field " << to_string(m.spec.kind) << " p=" << m.spec.p << "  levels " << m.levels << "  coarse_cells "
              << m.coarse_cells << "  seed " << m.seed << "\n";
    std::cout << "level,count,dof,delta\n";
    for (int l = 1; l <= m.levels; ++l) {
        std::cout << l << "," << m.counts[static_cast<std::size_t>(l - 1)] << "," << hier.level(l).dof() << ","
                  << fmt(m.delta[static_cast<std::size_t>(l - 1)]) << "\n";
    }
    std::cout << "relative cost (finest-sample units): " << fmt(m.relative_cost) << "\n";
    std::cout << "round-trip: checksums ok, delta max rel diff " << check.delta_max_rel_diff << ", telescoping max "
              << check.telescoping_max_abs << "\n";
    if (check.delta_max_rel_diff > 1e-14 || check.reconstruction_max_rel > 1e-12) {
        std::cerr << "error: dataset failed its round-trip check\n";
        return kExitFailure;
    }
    return 0;
}

int cmd_inspect(const std::string& dir, bool json) {
    const DatasetManifest m = read_manifest(dir);
    if (json) {
        std::cout << nlohmann::json(m).dump(2) << "\n";
        return 0;
    }
    std::cout << "field " << to_string(m.spec.kind) << " p=" << m.spec.p << "  levels " << m.levels << "  coarse_cells "
              << m.coarse_cells << "  seed " << m.seed << "\n";
    std::cout << "level,count,delta\n";
    for (int l = 1; l <= m.levels; ++l) {
        std::cout << l << "," << m.counts[static_cast<std::size_t>(l - 1)] << "," << fmt(m.delta[static_cast<std::size_t>(l - 1)])
                  << "\n";
    }
    std::cout << "relative cost: " << fmt(m.relative_cost) << "\n";
    for (const ArrayFile& f : m.files) std::cout << f.name << " " << f.rows << "x" << f.cols << " " << f.sha256 << "\n";
    return 0;
}

KernelHook corruption_hook(const std::string& which) {
    if (which.empty()) return {};
    return [which](KernelSet& ks) {
        if (which == "op") {
            for (LevelKernels& lk : ks.levels) lk.op.w(0, 0, 1, 1) *= 1.0 + 1e-6;
        } else if (which == "kappa") {
            for (LevelKernels& lk : ks.levels) lk.kappa.w(0, 0, 1, 1) *= 1.0 + 1e-6;
        } else if (which == "restrict") {
            ks.restrict_kernel.w(0, 0, 0, 1) += 1e-6;
        } else if (which == "prolong") {
            ks.prolong_kernel.w(0, 0, 0, 1) += 1e-6;
        } else if (which == "coarsen") {
            ks.coarsen_kernel.w(0, 0, 1, 1) += 1e-6;
        }
    };
}

int cmd_verify(const RunConfig& cfg, bool json, const std::string& corrupt, const std::string& dataset) {
    std::vector<CheckResult> results = run_verify_suite(cfg, corruption_hook(corrupt));
    if (!dataset.empty()) {
        CheckResult r{"dataset", false, 0.0, 1e-12, ""};
        try {
            const DatasetCheck c = check_dataset(load_dataset(dataset));
            r.value = std::max({c.delta_max_rel_diff, c.telescoping_max_abs, c.reconstruction_max_rel});
            r.passed = c.delta_max_rel_diff <= 1e-14 && c.reconstruction_max_rel <= 1e-12 && c.telescoping_max_abs <= 1e-12;
            r.detail = "checksums, delta, telescoping";
        } catch (const DatasetError& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }
    const CheckResult* first_failure = nullptr;
    for (const CheckResult& r : results)
        if (!r.passed && !first_failure) first_failure = &r;

    if (json) {
        nlohmann::json j{{"passed", first_failure == nullptr}, {"checks", results}};
        if (first_failure) j["first_failure"] = first_failure->name;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << std::left << std::setw(24) << "check" << std::setw(8) << "result" << std::setw(14) << "value"
                  << std::setw(12) << "tolerance"
                  << "detail\n";
        for (const CheckResult& r : results) {
            std::ostringstream v;
            v << std::setprecision(3) << r.value;
            std::ostringstream t;
            t << std::setprecision(3) << r.tolerance;
            std::cout << std::left << std::setw(24) << r.name << std::setw(8) << (r.passed ? "PASS" : "FAIL") << std::setw(14)
                      << v.str() << std::setw(12) << t.str() << r.detail << "\n";
        }
    }
    if (first_failure) {
        std::cerr << "verify: check '" << first_failure->name << "' failed\n";
        return kExitFailure;
    }
    return 0;
}

int cmd_contraction(const RunConfig& cfg, const std::string& out) {
    Output o(out);
    o.stream() << "level,k,cycle,ratio\n";
    for (int levels : cfg.contraction.levels) {
        const GridHierarchy hier(cfg.coarse_cells, levels);
        const GridLevel& fine = hier.finest();
        const Vector f = rhs_vector(fine, cfg.solver.source);
        for (int k : cfg.contraction.k) {
            VCycleConfig vc = cfg.solver.cycle;
            vc.k_pre = k;
            vc.k_post = k;
            vc.m = cfg.contraction.cycles;
            std::vector<std::vector<double>> per_cycle(static_cast<std::size_t>(vc.m));
            for (int s = 0; s < cfg.contraction.samples; ++s) {
                const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(s));
                const std::vector<double> r = measure_contraction(evaluate_kappa_extended(cfg.field, y.y, fine), f, vc, hier);
                for (std::size_t i = 0; i < r.size(); ++i) per_cycle[i].push_back(r[i]);
            }
            for (std::size_t i = 0; i < per_cycle.size(); ++i) {
                if (per_cycle[i].empty()) continue;
                o.stream() << levels << "," << k << "," << i + 1 << "," << fmt(median(per_cycle[i])) << "\n";
            }
        }
    }
    return 0;
}

int cmd_weights(const RunConfig& cfg, const std::string& out) {
    Output o(out);
    const WeightBudget budget = WeightBudget::from_kernels(build_kernel_set(GridHierarchy(cfg.coarse_cells, 2)),
                                                           build_mul_unit(cfg.verify.mul_bound, cfg.weights.epsilon));
    o.stream() << "L,k,k0,m,epsilon,weights,second_diff_L\n";
    for (int m : cfg.weights.m) {
        std::vector<long long> counts;
        for (int levels : cfg.weights.levels) {
            counts.push_back(static_cast<long long>(count_weights(levels, cfg.weights.k, cfg.weights.k0, m, budget)));
            const std::size_t n = counts.size();
            std::string second;
            if (n >= 3) second = std::to_string(counts[n - 1] - 2 * counts[n - 2] + counts[n - 3]);
            o.stream() << levels << "," << cfg.weights.k << "," << cfg.weights.k0 << "," << m << "," << fmt(cfg.weights.epsilon)
                       << "," << counts.back() << "," << second << "\n";
        }
    }
    return 0;
}

int cmd_metrics(const RunConfig& cfg, const std::string& out, bool json, bool self) {
    const int levels = cfg.levels;
    const GridHierarchy ref_hier(cfg.coarse_cells, levels + cfg.metrics.reference_offset);
    const GridHierarchy hier = ref_hier.truncated(levels);
    const GridLevel& fine = hier.finest();
    const GridLevel& ref = ref_hier.finest();
    std::vector<Vector> predictions, solutions, references;
    for (int s = 0; s < cfg.metrics.samples; ++s) {
        const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(s));
        const Vector kext = evaluate_kappa_extended(cfg.field, y.y, fine);
        const Vector f = rhs_vector(fine, cfg.solver.source);
        const OperatorStack stack = OperatorStack::build(kext, hier, cfg.solver.cycle);
        const SolveReport sol = mg_solve_to_tolerance(Vector::Zero(f.size()), f, stack, cfg.solver.cycle, cfg.solver.rtol,
                                                      cfg.solver.max_cycles);
        if (!sol.converged) throw SolverError("metrics: solve did not converge", sol.relative_residual, sol.cycles);
        solutions.push_back(sol.u);
        predictions.push_back(self ? sol.u : mg_iterate(Vector::Zero(f.size()), f, stack, cfg.solver.cycle, cfg.cycles));
        if (cfg.metrics.reference_offset == 0) {
            references.push_back(sol.u);
        } else {
            references.push_back(reference_solve(assemble_sparse(evaluate_kappa_extended(cfg.field, y.y, ref), ref),
                                                 rhs_vector(ref, cfg.solver.source)));
        }
    }
    const std::size_t n = solutions.size();
    const int lref = ref_hier.num_levels();
    std::vector<MetricReport> reports{
        {"MRH1", mr_error(predictions, solutions, NormKind::H1, fine), n, levels, levels},
        {"MRL2", mr_error(predictions, solutions, NormKind::L2, fine), n, levels, levels},
        {"MRH1_ref", mr_error_ref(predictions, levels, references, NormKind::H1, ref_hier), n, levels, lref},
        {"MRL2_ref", mr_error_ref(predictions, levels, references, NormKind::L2, ref_hier), n, levels, lref},
    };
    Output o(out);
    if (json) {
        o.stream() << nlohmann::json(reports).dump(2) << "\n";
    } else {
        o.stream() << "metric,value,samples,level,reference_level\n";
        for (const MetricReport& r : reports)
            o.stream() << r.metric << "," << fmt(r.value) << "," << r.samples << "," << r.level << "," << r.reference_level << "\n";
    }
    return 0;
}

int cmd_solve(const RunConfig& cfg, long long index, const std::string& out) {
    const GridHierarchy hier = cfg.hierarchy();
    const GridLevel& fine = hier.finest();
    const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(index));
    const Vector f = rhs_vector(fine, cfg.solver.source);
    const OperatorStack stack = OperatorStack::build(evaluate_kappa_extended(cfg.field, y.y, fine), hier, cfg.solver.cycle);
    const SolveReport r =
        mg_solve_to_tolerance(Vector::Zero(f.size()), f, stack, cfg.solver.cycle, cfg.solver.rtol, cfg.solver.max_cycles);
    std::cout << "cycles " << r.cycles << "  relative residual " << r.relative_residual << "  H1 norm "
              << h1_norm(r.u, fine) << "\n";
    if (!out.empty()) {
        Output o(out);
        o.stream() << "ix,iy,x,y,u\n";
        const int side = fine.interior_per_side();
        for (int iy = 0; iy < side; ++iy)
            for (int ix = 0; ix < side; ++ix)
                o.stream() << ix << "," << iy << "," << fmt(fine.coordinate(ix + 1)) << "," << fmt(fine.coordinate(iy + 1)) << ","
                           << fmt(r.u[fine.index(ix, iy)]) << "\n";
    }
    if (!r.converged) {
        std::cerr << "solve: no convergence within " << cfg.solver.max_cycles << " cycles\n";
        return kExitFailure;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mgconv: multigrid finite elements and their convolutional realization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::string dataset;
    std::string corrupt;
    int workers = 0;
    long long seed = -1;
    long long index = 0;
    bool json = false;
    bool force = false;
    bool self = false;

    auto* gen = app.add_subcommand("generate", "Generate a multilevel dataset");
    gen->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output directory (overrides dataset.out_dir)");
    gen->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Global seed (overrides config)")->check(CLI::NonNegativeNumber);
    gen->add_flag("--force", force, "Replace an existing output directory");

    auto* ver = app.add_subcommand("verify", "Run the equivalence suite");
    ver->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    ver->add_flag("--json", json, "Machine-readable results");
    ver->add_option("--dataset", dataset, "Also validate a dataset directory");
    ver->add_option("--corrupt-kernel", corrupt, "Fault injection: perturb one kernel after construction")
        ->check(CLI::IsMember({"op", "kappa", "restrict", "prolong", "coarsen"}));

    auto* ins = app.add_subcommand("inspect", "Summarize a dataset manifest");
    ins->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    ins->add_flag("--json", json, "Print the manifest as JSON");

    auto* con = app.add_subcommand("contraction", "Per-cycle energy contraction (CSV)");
    con->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    con->add_option("--out", out, "CSV path (stdout if omitted)");

    auto* wts = app.add_subcommand("weights", "Weight counts of the convolutional network (CSV)");
    wts->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    wts->add_option("--out", out, "CSV path (stdout if omitted)");

    auto* met = app.add_subcommand("metrics", "Mean relative errors (CSV or JSON)");
    met->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    met->add_option("--out", out, "Report path (stdout if omitted)");
    met->add_flag("--json", json, "JSON instead of CSV");
    met->add_flag("--self", self, "Use the converged solutions as predictions");

    auto* sol = app.add_subcommand("solve", "Solve one parameter draw on the finest level");
    sol->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sol->add_option("--index", index, "Sample index")->check(CLI::NonNegativeNumber);
    sol->add_option("--out", out, "Nodal solution CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (ins->parsed()) return cmd_inspect(dataset, json);
        const RunConfig cfg = load_config(config_path);
        if (gen->parsed()) return cmd_generate(cfg, out, workers, seed, force);
        if (ver->parsed()) return cmd_verify(cfg, json, corrupt, dataset);
        if (con->parsed()) return cmd_contraction(cfg, out);
        if (wts->parsed()) return cmd_weights(cfg, out);
        if (met->parsed()) return cmd_metrics(cfg, out, json, self);
        if (sol->parsed()) return cmd_solve(cfg, index, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << " (achieved residual " << e.achieved_residual << ")\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
