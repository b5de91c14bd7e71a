#pragma once

// Multilevel training data: per-level coefficients, solutions and corrections
// v^_l = v_l - P v_{l-1}, normalization constants, on-disk layout.
//
// Layout of a dataset directory:
//   manifest.json
//   params.f64                N_1 x p
//   kappa_l<l>.f64            N_l x dof_l    nodal coefficient, interior vertices
//   solution_l<l>.f64         N_l x dof_l    v_l
//   correction_l<l>.f64       N_l x dof_l    v^_l
// All arrays are little-endian float64, row-major, one row per sample.

#include "mgconv/fe.hpp"
#include "mgconv/fields.hpp"
#include "mgconv/grid.hpp"
#include "mgconv/multigrid.hpp"
#include "mgconv/parallel.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

static_assert(std::endian::native == std::endian::little, "dataset files are written in host byte order");

inline constexpr int kDatasetVersion = 1;

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    double achieved_residual;
    int cycles;
    SolverError(const std::string& what, double residual, int n)
        : std::runtime_error(what), achieved_residual(residual), cycles(n) {}
};

/// N_l = ceil(N_1 2^{1-l}), at least 1.
inline std::vector<int> decay_schedule(int n1, int levels) {
    if (n1 < 1) throw std::invalid_argument("decay_schedule: N1 must be >= 1");
    if (levels < 1) throw std::invalid_argument("decay_schedule: number of levels must be >= 1");
    std::vector<int> counts;
    for (int l = 1; l <= levels; ++l) {
        const double v = std::ldexp(static_cast<double>(n1), 1 - l);
        counts.push_back(std::max(1, static_cast<int>(std::ceil(v))));
    }
    return counts;
}

inline std::vector<int> flat_schedule(int n1, int levels) { return std::vector<int>(static_cast<std::size_t>(levels), n1); }

/// Sum_l N_l 4^{l-L}: cost of the schedule in units of one finest-level sample.
inline double schedule_relative_cost(const std::vector<int>& counts) {
    const int top = static_cast<int>(counts.size());
    double s = 0.0;
    for (int l = 1; l <= top; ++l) s += counts[static_cast<std::size_t>(l - 1)] * std::ldexp(1.0, 2 * (l - top));
    return s;
}

enum class CoarseSolutionMode { NodalInterpolation, Galerkin };

struct SolverSettings {
    VCycleConfig cycle = VCycleConfig::symmetric(3, 0, 1);
    double rtol = 1e-10;
    int max_cycles = 500;
    double source = 1.0;
    CoarseSolutionMode coarse_mode = CoarseSolutionMode::NodalInterpolation;
};

inline void to_json(nlohmann::json& j, const SolverSettings& s) {
    j = nlohmann::json{{"k_pre", s.cycle.k_pre},
                       {"k_post", s.cycle.k_post},
                       {"k0", s.cycle.k0},
                       {"omega_mode", s.cycle.omega_mode == OmegaMode::Fixed ? "fixed" : "auto"},
                       {"omega", s.cycle.omega},
                       {"rtol", s.rtol},
                       {"max_cycles", s.max_cycles},
                       {"source", s.source},
                       {"coarse_solutions", s.coarse_mode == CoarseSolutionMode::Galerkin ? "galerkin" : "interpolation"}};
}

inline void from_json(const nlohmann::json& j, SolverSettings& s) {
    s.cycle.k_pre = j.value("k_pre", 3);
    s.cycle.k_post = j.value("k_post", 3);
    s.cycle.k0 = j.value("k0", 0);
    s.cycle.omega_mode = j.value("omega_mode", std::string("auto")) == "fixed" ? OmegaMode::Fixed : OmegaMode::AutoPowerIteration;
    s.cycle.omega = j.value("omega", 0.0);
    s.rtol = j.value("rtol", 1e-10);
    s.max_cycles = j.value("max_cycles", 500);
    s.source = j.value("source", 1.0);
    s.coarse_mode = j.value("coarse_solutions", std::string("interpolation")) == "galerkin"
                        ? CoarseSolutionMode::Galerkin
                        : CoarseSolutionMode::NodalInterpolation;
}

struct MultilevelSample {
    std::uint64_t index = 0;
    ParamVector y;
    /// Level l at position l-1.
    std::vector<Vector> kappa;
    std::vector<Vector> solutions;
    std::vector<Vector> corrections;
    int cycles = 0;
    double relative_residual = 0.0;

    int levels() const { return static_cast<int>(solutions.size()); }
    const Vector& v_fine() const { return solutions.back(); }
};

/// Solve on the finest level of `hier` and derive every coarser level.
inline MultilevelSample generate_sample(const FieldSpec& spec, const GridHierarchy& hier, const SolverSettings& settings,
                                        std::uint64_t seed, std::uint64_t index) {
    MultilevelSample s;
    s.index = index;
    s.y = sample_parameters(spec, seed, index);
    const int top = hier.num_levels();
    for (const GridLevel& lvl : hier.levels()) s.kappa.push_back(evaluate_kappa(spec, s.y.y, lvl));

    auto solve_on = [&](const GridHierarchy& h) {
        const Vector kext = evaluate_kappa_extended(spec, s.y.y, h.finest());
        const OperatorStack stack = OperatorStack::build(kext, h, settings.cycle);
        const Vector f = rhs_vector(h.finest(), settings.source);
        SolveReport r = mg_solve_to_tolerance(Vector::Zero(f.size()), f, stack, settings.cycle, settings.rtol,
                                              settings.max_cycles);
        if (!r.converged) {
            std::ostringstream msg;
            msg << "sample " << index << ": no convergence after " << r.cycles << " cycles, relative residual "
                << r.relative_residual;
            throw SolverError(msg.str(), r.relative_residual, r.cycles);
        }
        s.cycles += r.cycles;
        s.relative_residual = std::max(s.relative_residual, r.relative_residual);
        return r.u;
    };

    s.solutions.resize(static_cast<std::size_t>(top));
    if (settings.coarse_mode == CoarseSolutionMode::Galerkin) {
        for (int l = 1; l <= top; ++l) s.solutions[static_cast<std::size_t>(l - 1)] = solve_on(hier.truncated(l));
    } else {
        const Vector fine = solve_on(hier);
        for (int l = 1; l <= top; ++l) s.solutions[static_cast<std::size_t>(l - 1)] = nodal_interpolate_to_coarse(hier, top, l, fine);
    }
    s.corrections.push_back(s.solutions.front());
    for (int l = 2; l <= top; ++l) {
        const SparseMatrix p = prolongation_matrix(hier, l - 1);
        s.corrections.push_back(s.solutions[static_cast<std::size_t>(l - 1)] - p * s.solutions[static_cast<std::size_t>(l - 2)]);
    }
    return s;
}

/// Rebuild the level-`upto` solution from corrections 1..upto.
inline Vector reconstruct_from_corrections(const std::vector<Vector>& corrections, const GridHierarchy& hier, int upto) {
    Vector v = corrections.front();
    for (int l = 2; l <= upto; ++l) v = prolongation_matrix(hier, l - 1) * v + corrections[static_cast<std::size_t>(l - 1)];
    return v;
}

// ---------------------------------------------------------------------------
// Checksums and raw arrays

inline std::string sha256_hex(const void* data, std::size_t bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, bytes, digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

inline std::string sha256_hex(const std::vector<double>& v) { return sha256_hex(v.data(), v.size() * sizeof(double)); }

inline void write_array(const std::filesystem::path& path, const std::vector<double>& v) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!out) throw DatasetError("write failed for " + path.string());
}

inline std::vector<double> read_array(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != count * sizeof(double)) {
        throw DatasetError(path.string() + ": expected " + std::to_string(count * sizeof(double)) + " bytes, found " +
                           std::to_string(bytes));
    }
    in.seekg(0);
    std::vector<double> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DatasetError("read failed for " + path.string());
    return v;
}

// ---------------------------------------------------------------------------
// Dataset

struct ArrayFile {
    std::string name;
    std::string kind; // params | kappa | solution | correction
    int level = 0;    // 0 for params
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string sha256;
};

inline void to_json(nlohmann::json& j, const ArrayFile& f) {
    j = nlohmann::json{{"name", f.name}, {"kind", f.kind},   {"level", f.level},
                       {"rows", f.rows}, {"cols", f.cols},   {"sha256", f.sha256}};
}

inline void from_json(const nlohmann::json& j, ArrayFile& f) {
    f.name = j.at("name").get<std::string>();
    f.kind = j.at("kind").get<std::string>();
    f.level = j.at("level").get<int>();
    f.rows = j.at("rows").get<std::size_t>();
    f.cols = j.at("cols").get<std::size_t>();
    f.sha256 = j.at("sha256").get<std::string>();
}

struct DatasetManifest {
    FieldSpec spec;
    int levels = 1;
    int coarse_cells = 5;
    std::vector<int> counts;
    std::vector<double> delta;
    std::uint64_t seed = 0;
    bool decay = true;
    SolverSettings solver;
    std::vector<ArrayFile> files;
    double relative_cost = 0.0;

    const ArrayFile& file(const std::string& kind, int level) const {
        for (const ArrayFile& f : files)
            if (f.kind == kind && f.level == level) return f;
        throw DatasetError("manifest has no " + kind + " array for level " + std::to_string(level));
    }
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{{"format", "mgconv-dataset"},
                       {"version", kDatasetVersion},
                       {"field", m.spec},
                       {"levels", m.levels},
                       {"coarse_cells", m.coarse_cells},
                       {"counts", m.counts},
                       {"delta", m.delta},
                       {"seed", m.seed},
                       {"decay_schedule", m.decay},
                       {"solver", m.solver},
                       {"dtype", "float64"},
                       {"byte_order", "little"},
                       {"layout", "row-major, one row per sample"},
                       {"files", m.files},
                       {"relative_cost", m.relative_cost}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
    if (j.value("format", std::string()) != "mgconv-dataset") throw DatasetError("manifest: not an mgconv dataset");
    if (j.value("version", 0) != kDatasetVersion) throw DatasetError("manifest: unsupported version");
    if (j.value("dtype", std::string()) != "float64" || j.value("byte_order", std::string()) != "little") {
        throw DatasetError("manifest: unsupported element type");
    }
    m.spec = j.at("field").get<FieldSpec>();
    m.levels = j.at("levels").get<int>();
    m.coarse_cells = j.at("coarse_cells").get<int>();
    m.counts = j.at("counts").get<std::vector<int>>();
    m.delta = j.at("delta").get<std::vector<double>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.decay = j.value("decay_schedule", true);
    m.solver = j.at("solver").get<SolverSettings>();
    m.files = j.at("files").get<std::vector<ArrayFile>>();
    m.relative_cost = j.value("relative_cost", 0.0);
    if (static_cast<int>(m.counts.size()) != m.levels || static_cast<int>(m.delta.size()) != m.levels) {
        throw DatasetError("manifest: counts/delta do not match the number of levels");
    }
}

struct LevelArrays {
    int level = 1;
    int dof = 0;
    int count = 0;
    std::vector<double> kappa;
    std::vector<double> solution;
    std::vector<double> correction;

    Vector row(const std::vector<double>& data, int i) const {
        return Eigen::Map<const Vector>(data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dof), dof);
    }
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<double> params;
    std::vector<LevelArrays> levels;

    GridHierarchy hierarchy() const { return GridHierarchy(manifest.coarse_cells, manifest.levels); }
};

/// delta_l = sqrt(mean over the N_l samples of ||v^_l||_2^2).
inline double normalization_constant(const LevelArrays& arr) {
    if (arr.count == 0) return 0.0;
    double s = 0.0;
    for (double v : arr.correction) s += v * v;
    return std::sqrt(s / arr.count);
}

/// Finest level needed by sample i (0-based): max{l : i < N_l}.
inline int sample_top_level(const std::vector<int>& counts, std::size_t i) {
    int top = 0;
    for (std::size_t l = 0; l < counts.size(); ++l)
        if (i < static_cast<std::size_t>(counts[l])) top = static_cast<int>(l) + 1;
    return top;
}

struct DatasetOptions {
    int n1 = 16;
    bool decay = true;
    int workers = 1;
    bool overwrite = false;
};

/// Build all samples in memory (parallel over indices, deterministic) and assemble the arrays.
inline Dataset build_dataset(const FieldSpec& spec, const GridHierarchy& hier, const SolverSettings& settings,
                             const std::vector<int>& counts, std::uint64_t seed, int workers) {
    spec.validate();
    const int top = hier.num_levels();
    if (static_cast<int>(counts.size()) != top) throw std::invalid_argument("schedule length differs from level count");
    for (std::size_t l = 0; l < counts.size(); ++l) {
        if (counts[l] < 1) throw std::invalid_argument("schedule counts must be >= 1");
        if (l > 0 && counts[l] > counts[l - 1]) throw std::invalid_argument("schedule counts must be non-increasing");
    }
    const auto n1 = static_cast<std::size_t>(counts.front());
    std::vector<MultilevelSample> samples(n1);
    parallel_for(n1, workers, [&](std::size_t i) {
        samples[i] = generate_sample(spec, hier.truncated(sample_top_level(counts, i)), settings, seed, i);
    });

    Dataset ds;
    ds.params.reserve(n1 * static_cast<std::size_t>(spec.p));
    for (const MultilevelSample& s : samples) ds.params.insert(ds.params.end(), s.y.y.data(), s.y.y.data() + s.y.y.size());
    for (int l = 1; l <= top; ++l) {
        LevelArrays arr;
        arr.level = l;
        arr.dof = hier.level(l).dof();
        arr.count = counts[static_cast<std::size_t>(l - 1)];
        for (int i = 0; i < arr.count; ++i) {
            const MultilevelSample& s = samples[static_cast<std::size_t>(i)];
            const auto idx = static_cast<std::size_t>(l - 1);
            arr.kappa.insert(arr.kappa.end(), s.kappa[idx].data(), s.kappa[idx].data() + arr.dof);
            arr.solution.insert(arr.solution.end(), s.solutions[idx].data(), s.solutions[idx].data() + arr.dof);
            arr.correction.insert(arr.correction.end(), s.corrections[idx].data(), s.corrections[idx].data() + arr.dof);
        }
        ds.levels.push_back(std::move(arr));
    }

    DatasetManifest& m = ds.manifest;
    m.spec = spec;
    m.levels = top;
    m.coarse_cells = hier.coarse_cells();
    m.counts = counts;
    m.seed = seed;
    m.solver = settings;
    m.relative_cost = schedule_relative_cost(counts);
    for (const LevelArrays& arr : ds.levels) m.delta.push_back(normalization_constant(arr));
    m.files.push_back({"params.f64", "params", 0, n1, static_cast<std::size_t>(spec.p), sha256_hex(ds.params)});
    for (const LevelArrays& arr : ds.levels) {
        const std::string suffix = "_l" + std::to_string(arr.level) + ".f64";
        const auto rows = static_cast<std::size_t>(arr.count);
        const auto cols = static_cast<std::size_t>(arr.dof);
        m.files.push_back({"kappa" + suffix, "kappa", arr.level, rows, cols, sha256_hex(arr.kappa)});
        m.files.push_back({"solution" + suffix, "solution", arr.level, rows, cols, sha256_hex(arr.solution)});
        m.files.push_back({"correction" + suffix, "correction", arr.level, rows, cols, sha256_hex(arr.correction)});
    }
    return ds;
}

/// Write into a sibling staging directory, then rename into place; the staging
/// directory is removed if anything fails.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& out_dir, bool overwrite) {
    namespace fs = std::filesystem;
    if (fs::exists(out_dir) && !overwrite) {
        throw DatasetError("output directory " + out_dir.string() + " already exists");
    }
    fs::path staging = out_dir;
    staging += ".partial";
    fs::remove_all(staging);
    try {
        fs::create_directories(staging);
        write_array(staging / "params.f64", ds.params);
        for (const LevelArrays& arr : ds.levels) {
            const std::string suffix = "_l" + std::to_string(arr.level) + ".f64";
            write_array(staging / ("kappa" + suffix), arr.kappa);
            write_array(staging / ("solution" + suffix), arr.solution);
            write_array(staging / ("correction" + suffix), arr.correction);
        }
        std::ofstream out(staging / "manifest.json", std::ios::trunc);
        if (!out) throw DatasetError("cannot write manifest");
        out << nlohmann::json(ds.manifest).dump(2) << '\n';
        out.close();
        if (!out) throw DatasetError("cannot write manifest");
        if (fs::exists(out_dir)) fs::remove_all(out_dir);
        fs::rename(staging, out_dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
}

inline DatasetManifest generate_dataset(const FieldSpec& spec, const GridHierarchy& hier, const SolverSettings& settings,
                                        const std::vector<int>& counts, std::uint64_t seed,
                                        const std::filesystem::path& out_dir, int workers = 1, bool overwrite = false) {
    Dataset ds = build_dataset(spec, hier, settings, counts, seed, workers);
    ds.manifest.decay = counts != flat_schedule(counts.front(), static_cast<int>(counts.size()));
    write_dataset(ds, out_dir, overwrite);
    return ds.manifest;
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DatasetError("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(std::string("manifest.json: ") + e.what());
    }
    return j.get<DatasetManifest>();
}

/// Load every array and validate its size and checksum against the manifest.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.manifest = read_manifest(dir);
    auto load = [&](const ArrayFile& f) {
        std::vector<double> v = read_array(dir / f.name, f.rows * f.cols);
        if (sha256_hex(v) != f.sha256) throw DatasetError("checksum mismatch for " + f.name);
        return v;
    };
    const DatasetManifest& m = ds.manifest;
    ds.params = load(m.file("params", 0));
    const GridHierarchy hier = ds.hierarchy();
    for (int l = 1; l <= m.levels; ++l) {
        LevelArrays arr;
        arr.level = l;
        arr.dof = hier.level(l).dof();
        arr.count = m.counts[static_cast<std::size_t>(l - 1)];
        for (const char* kind : {"kappa", "solution", "correction"}) {
            const ArrayFile& f = m.file(kind, l);
            if (f.rows != static_cast<std::size_t>(arr.count) || f.cols != static_cast<std::size_t>(arr.dof)) {
                throw DatasetError(f.name + ": shape disagrees with the level layout");
            }
        }
        arr.kappa = load(m.file("kappa", l));
        arr.solution = load(m.file("solution", l));
        arr.correction = load(m.file("correction", l));
        ds.levels.push_back(std::move(arr));
    }
    return ds;
}

struct DatasetCheck {
    double delta_max_rel_diff = 0.0;
    double telescoping_max_abs = 0.0;
    double reconstruction_max_rel = 0.0;
};

/// Recompute delta_l and the telescoping identities from loaded arrays.
inline DatasetCheck check_dataset(const Dataset& ds) {
    DatasetCheck c;
    const GridHierarchy hier = ds.hierarchy();
    for (const LevelArrays& arr : ds.levels) {
        const double d = normalization_constant(arr);
        const double stored = ds.manifest.delta[static_cast<std::size_t>(arr.level - 1)];
        c.delta_max_rel_diff = std::max(c.delta_max_rel_diff, std::abs(d - stored) / std::max(std::abs(stored), 1e-300));
    }
    for (std::size_t l = 1; l < ds.levels.size(); ++l) {
        const LevelArrays& fine = ds.levels[l];
        const LevelArrays& coarse = ds.levels[l - 1];
        const SparseMatrix p = prolongation_matrix(hier, fine.level - 1);
        for (int i = 0; i < fine.count; ++i) {
            const Vector diff = fine.row(fine.solution, i) - (p * coarse.row(coarse.solution, i) + fine.row(fine.correction, i));
            c.telescoping_max_abs = std::max(c.telescoping_max_abs, diff.cwiseAbs().maxCoeff());
        }
    }
    const int n1 = ds.manifest.counts.front();
    for (int i = 0; i < n1; ++i) {
        const int top = sample_top_level(ds.manifest.counts, static_cast<std::size_t>(i));
        std::vector<Vector> corr;
        for (int l = 1; l <= top; ++l) {
            const LevelArrays& arr = ds.levels[static_cast<std::size_t>(l - 1)];
            corr.push_back(arr.row(arr.correction, i));
        }
        const LevelArrays& arr = ds.levels[static_cast<std::size_t>(top - 1)];
        const Vector v = arr.row(arr.solution, i);
        const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
        c.reconstruction_max_rel =
            std::max(c.reconstruction_max_rel, (reconstruct_from_corrections(corr, hier, top) - v).cwiseAbs().maxCoeff() / scale);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Loss and inference recombination

/// Sum_l d_l^T M_l d_l with d_l = pred_l - correction_l / delta_l.
inline double h1_loss(const std::vector<Vector>& predictions, const std::vector<Vector>& corrections,
                      const std::vector<double>& delta, const GridHierarchy& hier) {
    if (predictions.size() != corrections.size() || predictions.size() > delta.size() ||
        static_cast<int>(predictions.size()) > hier.num_levels()) {
        throw std::invalid_argument("h1_loss: level counts disagree");
    }
    double loss = 0.0;
    for (std::size_t l = 0; l < predictions.size(); ++l) {
        if (!(delta[l] != 0.0)) throw std::invalid_argument("h1_loss: normalization constant is zero on level " + std::to_string(l + 1));
        const GridLevel& lvl = hier.level(static_cast<int>(l) + 1);
        detail::check_size(predictions[l], lvl.dof(), "h1_loss prediction");
        detail::check_size(corrections[l], lvl.dof(), "h1_loss correction");
        const Vector d = predictions[l] - corrections[l] / delta[l];
        loss += d.dot(h1_mass_matrix(lvl) * d);
    }
    return loss;
}

/// Sum_l delta_l P_{L-1} ... P_l pred_l on the finest level of `hier`.
inline Vector recombine(const std::vector<Vector>& predictions, const std::vector<double>& delta, const GridHierarchy& hier) {
    const int top = hier.num_levels();
    if (static_cast<int>(predictions.size()) != top || delta.size() < predictions.size()) {
        throw std::invalid_argument("recombine: expected one prediction and one constant per level");
    }
    Vector acc = delta[0] * predictions[0];
    detail::check_size(predictions[0], hier.level(1).dof(), "recombine prediction");
    for (int l = 2; l <= top; ++l) {
        detail::check_size(predictions[static_cast<std::size_t>(l - 1)], hier.level(l).dof(), "recombine prediction");
        acc = prolongation_matrix(hier, l - 1) * acc + delta[static_cast<std::size_t>(l - 1)] * predictions[static_cast<std::size_t>(l - 1)];
    }
    return acc;
}

} // namespace mgconv
