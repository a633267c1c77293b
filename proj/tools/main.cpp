// alignteach: command-line driver for the teaching simulations and the
// human-study file tooling. Every run writes its artifacts plus manifest.json.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "alignteach/curves.hpp"
#include "alignteach/error.hpp"
#include "alignteach/matching.hpp"
#include "alignteach/pools.hpp"
#include "alignteach/stats.hpp"
#include "alignteach/study_io.hpp"
#include "output_dir.hpp"

#ifndef ALIGNTEACH_VERSION
#define ALIGNTEACH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace alignteach;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::vector<Labeling> parse_labelings(const std::vector<std::string>& names) {
    std::vector<Labeling> out;
    for (const auto& n : names) out.push_back(parse_labeling(n));
    return out;
}

json labeling_names(const std::vector<Labeling>& ls) {
    json out = json::array();
    for (Labeling l : ls) out.push_back(std::string(to_string(l)));
    return out;
}

std::string curve_csv(const CurveTable& t) {
    std::ostringstream ss;
    write_curve_csv(ss, t);
    return ss.str();
}

CurveTable load_curve(const fs::path& path) {
    std::istringstream in(cli::read_file(path));
    return read_curve_csv(in);
}

json load_json(const fs::path& path) {
    const std::string text = cli::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, path.string() + " is not valid JSON: " + e.what());
    }
}

// JSON files in `dir`, sorted by name so runs do not depend on directory
// iteration order.
std::vector<fs::path> json_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json")
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<study::ConditionFile> load_conditions(const fs::path& dir) {
    std::vector<study::ConditionFile> out;
    for (const auto& p : json_files(dir)) {
        try {
            out.push_back(study::condition_from_json(load_json(p)));
        } catch (const Error& e) {
            throw Error(e.kind(), p.filename().string() + ": " + e.what());
        }
    }
    if (out.empty()) throw Error(ErrorKind::io, "no condition files in " + dir.string());
    return out;
}

std::vector<study::NamedDocument> load_responses(const fs::path& dir) {
    std::vector<study::NamedDocument> out;
    for (const auto& p : json_files(dir)) {
        study::NamedDocument doc{p.filename().string(), json()};
        try {
            doc.document = json::parse(cli::read_file(p));
        } catch (const json::exception&) {
            doc.document = json();  // rejected as malformed during ingestion
        }
        out.push_back(std::move(doc));
    }
    return out;
}

std::string digest_of_dir(const fs::path& dir) {
    std::string all;
    for (const auto& p : json_files(dir)) all += p.filename().string() + ":" + cli::sha256_hex(cli::read_file(p)) + "\n";
    return cli::sha256_hex(all);
}

// Options shared by every leaf command.
struct Common {
    std::uint64_t seed = 0;
    std::string out;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

void add_common(CLI::App* cmd, Common& c, std::uint64_t default_seed) {
    c.seed = default_seed;
    cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--workers", c.workers, "Worker threads (outputs do not depend on this)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

CurveTable classroom_curve(int side, std::uint64_t seed, int workers) {
    SweepConfig cfg = SweepConfig::classroom_defaults();
    cfg.master_seed = seed;
    cfg.workers = workers;
    return build_classroom_curve(GridSpec(side, cfg.label_structures.front()), cfg);
}

// Pool from a file, or generated from the given configuration.
Pool obtain_pool(const std::string& path, const PoolConfig& cfg, cli::OutputDir& out) {
    if (path.empty()) return generate_pool(cfg);
    out.note_input("pool", path);
    return pool_from_json(load_json(path));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulations of teaching under representational misalignment, and human-study file tooling"};
    app.set_version_flag("--version", ALIGNTEACH_VERSION);
    app.require_subcommand(1);

    // The action to run once parsing succeeds; each leaf installs one.
    std::function<void()> action;

    // ---- curve ----
    auto* curve = app.add_subcommand("curve", "Utility curves from simulated episodes");
    curve->require_subcommand(1);

    Common dy_common;
    int dy_side = 6;
    std::vector<std::string> dy_labelings = {"columns", "quadrants"};
    int dy_seeds = 10;
    double dy_corr_step = 0.01, dy_err_step = 0.1, dy_err_max = 0.9;
    auto* dyadic = curve->add_subcommand("dyadic", "One teacher, one student per episode");
    add_common(dyadic, dy_common, 0);
    dyadic->add_option("--grid-size", dy_side, "Grid side n")->capture_default_str();
    dyadic->add_option("--labeling", dy_labelings, "Label structures (columns, rows, quadrants)")
        ->delimiter(',')
        ->capture_default_str();
    dyadic->add_option("--seeds-per-point", dy_seeds, "Episodes per (structure, error, corruption)")
        ->capture_default_str();
    dyadic->add_option("--corruption-step", dy_corr_step, "Teacher corruption grid step over [0, 1]")
        ->capture_default_str();
    dyadic->add_option("--error-step", dy_err_step, "Teacher error grid step")->capture_default_str();
    dyadic->add_option("--error-max", dy_err_max, "Largest teacher error rate")->capture_default_str();
    dyadic->callback([&] {
        action = [&] {
            SweepConfig cfg = SweepConfig::dyadic_defaults();
            cfg.error_rates = linear_steps(0.0, dy_err_max, dy_err_step);
            cfg.corruption_levels = linear_steps(0.0, 1.0, dy_corr_step);
            cfg.seeds_per_point = dy_seeds;
            cfg.label_structures = parse_labelings(dy_labelings);
            cfg.master_seed = dy_common.seed;
            cfg.workers = dy_common.workers;
            const DyadicCurves curves = build_dyadic_curve(GridSpec(dy_side, cfg.label_structures.front()), cfg);
            cli::OutputDir out(dy_common.out);
            out.stage("curve.csv", curve_csv(curves.pooled));
            json info = provenance_json(curves.pooled);
            for (const auto& [l, t] : curves.per_structure)
                out.stage("curve_" + std::string(to_string(l)) + ".csv", curve_csv(t));
            if (curves.per_structure.size() >= 2) {
                json pairs = json::array();
                for (auto a = curves.per_structure.begin(); a != curves.per_structure.end(); ++a)
                    for (auto b = std::next(a); b != curves.per_structure.end(); ++b)
                        pairs.push_back({{"a", std::string(to_string(a->first))},
                                         {"b", std::string(to_string(b->first))},
                                         {"spearman", structure_rank_correlation(a->second, b->second)}});
                info["structure_correlations"] = pairs;
            }
            out.stage("curve.json", info.dump(2) + "\n");
            out.commit("curve dyadic",
                       {{"grid_size", dy_side},
                        {"labeling", labeling_names(cfg.label_structures)},
                        {"seeds_per_point", dy_seeds},
                        {"corruption_step", dy_corr_step},
                        {"error_step", dy_err_step},
                        {"error_max", dy_err_max}},
                       dy_common.seed, ALIGNTEACH_VERSION);
        };
    });

    Common cl_common;
    int cl_side = 6;
    std::string cl_labeling = "columns";
    int cl_seeds = 10;
    auto* classroom = curve->add_subcommand("classroom", "One teacher, ten students per episode");
    add_common(classroom, cl_common, 1);
    classroom->add_option("--grid-size", cl_side, "Grid side n")->capture_default_str();
    classroom->add_option("--labeling", cl_labeling, "Label structure")->capture_default_str();
    classroom->add_option("--seeds-per-point", cl_seeds, "Episodes per (error, corruption)")->capture_default_str();
    classroom->callback([&] {
        action = [&] {
            SweepConfig cfg = SweepConfig::classroom_defaults();
            cfg.label_structures = {parse_labeling(cl_labeling)};
            cfg.seeds_per_point = cl_seeds;
            cfg.master_seed = cl_common.seed;
            cfg.workers = cl_common.workers;
            const CurveTable t = build_classroom_curve(GridSpec(cl_side, cfg.label_structures.front()), cfg);
            cli::OutputDir out(cl_common.out);
            out.stage("curve.csv", curve_csv(t));
            out.stage("curve.json", provenance_json(t).dump(2) + "\n");
            out.commit("curve classroom",
                       {{"grid_size", cl_side}, {"labeling", cl_labeling}, {"seeds_per_point", cl_seeds}},
                       cl_common.seed, ALIGNTEACH_VERSION);
        };
    });

    // ---- pool ----
    auto* pool_cmd = app.add_subcommand("pool", "Student and teacher populations");
    pool_cmd->require_subcommand(1);

    // Options describing a generated pool; reused by several commands.
    struct PoolOptions {
        std::string mode = "unstructured";
        int side = 6;
        std::string labeling = "rows";
        int students = 1000, teachers = 30, clusters = 10, cluster_size = 50, kept = 5;

        void add(CLI::App* cmd) {
            cmd->add_option("--mode", mode, "unstructured or structured")->capture_default_str();
            cmd->add_option("--grid-size", side, "Grid side n")->capture_default_str();
            cmd->add_option("--labeling", labeling, "Label structure")->capture_default_str();
            cmd->add_option("--students", students, "Students (unstructured)")->capture_default_str();
            cmd->add_option("--teachers", teachers, "Teachers (unstructured)")->capture_default_str();
            cmd->add_option("--clusters", clusters, "Clusters (structured)")->capture_default_str();
            cmd->add_option("--cluster-size", cluster_size, "Students per cluster (structured)")
                ->capture_default_str();
            cmd->add_option("--teachers-kept", kept, "Cluster teachers kept after dropout (structured)")
                ->capture_default_str();
        }
        PoolConfig config(std::uint64_t seed) const {
            const GridSpec spec(side, parse_labeling(labeling));
            PoolConfig cfg = parse_pool_mode(mode) == PoolMode::structured ? PoolConfig::structured_defaults(spec)
                                                                           : PoolConfig::unstructured_defaults(spec);
            cfg.n_students = students;
            cfg.m_teachers = teachers;
            cfg.clusters = clusters;
            cfg.students_per_cluster = cluster_size;
            cfg.teachers_kept = kept;
            cfg.master_seed = seed;
            cfg.validate();
            return cfg;
        }
        json describe() const {
            return {{"mode", mode},         {"grid_size", side},        {"labeling", labeling},
                    {"students", students}, {"teachers", teachers},     {"clusters", clusters},
                    {"cluster_size", cluster_size}, {"teachers_kept", kept}};
        }
    };

    Common pg_common;
    PoolOptions pg_pool;
    auto* pool_gen = pool_cmd->add_subcommand("generate", "Sample one pool");
    add_common(pool_gen, pg_common, 0);
    pg_pool.add(pool_gen);
    pool_gen->callback([&] {
        action = [&] {
            const PoolConfig cfg = pg_pool.config(pg_common.seed);
            const Pool pool = generate_pool(cfg);
            cli::OutputDir out(pg_common.out);
            out.stage("pool.json", pool_to_json(pool, cfg).dump() + "\n");
            std::string students = "id,cluster,corruption\n";
            for (const auto& s : pool.students)
                students += std::to_string(s.id) + "," + std::to_string(s.cluster) + "," + num(s.corruption) + "\n";
            std::string teachers = "id,cluster,corruption,error_rate\n";
            for (const auto& t : pool.teachers)
                teachers += std::to_string(t.id) + "," + std::to_string(t.cluster) + "," + num(t.corruption) + "," +
                            num(t.config.error_rate) + "\n";
            out.stage("students.csv", students);
            out.stage("teachers.csv", teachers);
            out.commit("pool generate", pg_pool.describe(), pg_common.seed, ALIGNTEACH_VERSION);
        };
    });

    // ---- match ----
    auto* match = app.add_subcommand("match", "Assign students to teachers");
    match->require_subcommand(1);

    Common mr_common;
    PoolOptions mr_pool;
    std::vector<std::string> mr_methods = {"all"};
    int mr_pools = 10, mr_episodes = 10, mr_curve_side = 6;
    double mr_threshold = kDefaultPassThreshold;
    std::string mr_curve;
    std::uint64_t mr_curve_seed = 1;
    auto* match_run = match->add_subcommand("run", "Score matching methods over resampled pools");
    add_common(match_run, mr_common, 42);
    mr_pool.add(match_run);
    match_run->add_option("--methods", mr_methods, "random, mooc, ours, optimal or all")
        ->delimiter(',')
        ->capture_default_str();
    match_run->add_option("--pools", mr_pools, "Resampled pools")->capture_default_str();
    match_run->add_option("--episodes", mr_episodes, "Evaluation episodes per teacher")->capture_default_str();
    match_run->add_option("--pass-threshold", mr_threshold, "Accuracy needed to pass")->capture_default_str();
    match_run->add_option("--curve", mr_curve, "Utility curve CSV for Ours (built from the classroom sweep if absent)")
        ->check(CLI::ExistingFile);
    match_run->add_option("--curve-seed", mr_curve_seed, "Seed for the built classroom curve")->capture_default_str();
    match_run->add_option("--curve-grid-size", mr_curve_side, "Grid side for the built classroom curve")
        ->capture_default_str();
    match_run->callback([&] {
        action = [&] {
            MatchingExperiment exp;
            exp.pool_config = mr_pool.config(0);
            exp.methods.clear();
            for (const auto& m : mr_methods) {
                if (m == "all") {
                    for (Method x : all_methods())
                        if (std::find(exp.methods.begin(), exp.methods.end(), x) == exp.methods.end())
                            exp.methods.push_back(x);
                } else if (std::find(exp.methods.begin(), exp.methods.end(), parse_method(m)) == exp.methods.end()) {
                    exp.methods.push_back(parse_method(m));
                }
            }
            exp.pools = mr_pools;
            exp.episode_seeds = mr_episodes;
            exp.pass_threshold = mr_threshold;
            exp.seed = mr_common.seed;
            exp.workers = mr_common.workers;

            cli::OutputDir out(mr_common.out);
            json config = mr_pool.describe();
            std::optional<CurveTable> table;
            if (std::find(exp.methods.begin(), exp.methods.end(), Method::ours) != exp.methods.end()) {
                if (!mr_curve.empty()) {
                    out.note_input("curve", mr_curve);
                    table = load_curve(mr_curve);
                } else {
                    table = classroom_curve(mr_curve_side, mr_curve_seed, mr_common.workers);
                    out.stage("curve.csv", curve_csv(*table));
                    config["curve_seed"] = mr_curve_seed;
                    config["curve_grid_size"] = mr_curve_side;
                }
            }
            const MatchingResult result = run_matching_experiment(exp, table ? &*table : nullptr);

            std::ostringstream summary;
            write_summary_csv(summary, result.summaries);
            out.stage("summary.csv", summary.str());
            std::string per_pool = "pool,method,avg,bottom10,top10,pass_rate\n";
            json assignments = json::array();
            for (int p = 0; p < exp.pools; ++p) {
                json pool_assign = json::array();
                for (std::size_t m = 0; m < result.summaries.size(); ++m) {
                    const auto& r = result.summaries[m].per_pool[static_cast<std::size_t>(p)];
                    per_pool += std::to_string(p) + "," + std::string(to_string(result.summaries[m].method)) + "," +
                                num(r.avg_accuracy) + "," + num(r.bottom_decile_mean) + "," + num(r.top_decile_mean) +
                                "," + num(r.pass_rate) + "\n";
                    pool_assign.push_back(assignment_to_json(result.assignments[static_cast<std::size_t>(p)][m]));
                }
                assignments.push_back(pool_assign);
            }
            out.stage("per_pool.csv", per_pool);
            out.stage("assignments.json", assignments.dump() + "\n");
            json methods = json::array();
            for (Method m : exp.methods) methods.push_back(std::string(to_string(m)));
            config["methods"] = methods;
            config["pools"] = mr_pools;
            config["episodes"] = mr_episodes;
            config["pass_threshold"] = mr_threshold;
            out.commit("match run", config, mr_common.seed, ALIGNTEACH_VERSION);
            std::cout << summary.str();
        };
    });

    // ---- centric ----
    auto* centric = app.add_subcommand("centric", "Student-centric classroom experiments");
    centric->require_subcommand(1);

    // Shared setup: a structured pool and (for greedy) Ours outcomes as the
    // baseline each student would otherwise get.
    struct CentricOptions {
        PoolOptions pool;
        std::string pool_file;
        int t_iters = kDefaultInnerIterations;
        int episodes = 10;
        std::vector<double> epsilons = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

        CentricOptions() { pool.mode = "structured"; }
        void add(CLI::App* cmd) {
            pool.add(cmd);
            cmd->add_option("--pool", pool_file, "Pool JSON (generated from the pool flags if absent)")
                ->check(CLI::ExistingFile);
            cmd->add_option("--t-iters", t_iters, "Candidate sets per teaching search")->capture_default_str();
            cmd->add_option("--episodes", episodes, "Evaluation episodes")->capture_default_str();
            cmd->add_option("--epsilon", epsilons, "Student-centric teacher error rates")
                ->delimiter(',')
                ->capture_default_str();
        }
        json describe() const {
            json j = pool_file.empty() ? pool.describe() : json{{"pool", "file"}};
            j["t_iters"] = t_iters;
            j["episodes"] = episodes;
            j["epsilon"] = epsilons;
            return j;
        }
    };

    Common cg_common;
    CentricOptions cg;
    int cg_runs = 20;
    std::string cg_curve;
    std::uint64_t cg_curve_seed = 1;
    auto* greedy = centric->add_subcommand("greedy", "Grow a classroom from the worst-served students");
    add_common(greedy, cg_common, 5);
    cg.add(greedy);
    greedy->add_option("--runs", cg_runs, "Greedy runs per error rate")->capture_default_str();
    greedy->add_option("--curve", cg_curve, "Utility curve CSV for the Ours baseline")->check(CLI::ExistingFile);
    greedy->add_option("--curve-seed", cg_curve_seed, "Seed for the built classroom curve")->capture_default_str();
    greedy->callback([&] {
        action = [&] {
            cli::OutputDir out(cg_common.out);
            const Pool pool =
                obtain_pool(cg.pool_file, cg.pool.config(derive_seed(cg_common.seed, {0xC1})), out);
            CurveTable table;
            json config = cg.describe();
            if (!cg_curve.empty()) {
                out.note_input("curve", cg_curve);
                table = load_curve(cg_curve);
            } else {
                table = classroom_curve(6, cg_curve_seed, cg_common.workers);
                config["curve_seed"] = cg_curve_seed;
            }
            EvaluationSettings base_settings{cg.episodes, cg.t_iters, derive_seed(cg_common.seed, {0xC2}),
                                             cg_common.workers};
            const auto base = realize_outcomes(pool, match_ours(pool, table), base_settings);

            GreedyExperiment exp;
            exp.error_rates = cg.epsilons;
            exp.runs = cg_runs;
            exp.t_iters = cg.t_iters;
            exp.episode_seeds = cg.episodes;
            exp.seed = derive_seed(cg_common.seed, {0xC3});
            exp.workers = cg_common.workers;
            const auto runs = run_greedy_experiment(pool, base, exp);

            std::string detail = "epsilon,run,size,mean_gain,peak_gain,stopping_student,stopping_gain\n";
            std::string members = "epsilon,run,order,student,base_accuracy,accuracy,gain\n";
            std::map<double, std::vector<const GreedyRun*>> by_eps;
            for (const auto& r : runs) {
                const auto& g = r.result;
                const double mean_gain = g.gains.empty() ? 0.0 : stats::mean(g.gains);
                const double peak = g.gains.empty() ? 0.0 : *std::max_element(g.gains.begin(), g.gains.end());
                detail += num(r.error_rate) + "," + std::to_string(r.run) + "," + std::to_string(g.members.size()) +
                          "," + num(mean_gain) + "," + num(peak) + "," + std::to_string(g.stopping_student) + "," +
                          num(g.stopping_gain) + "\n";
                for (std::size_t i = 0; i < g.members.size(); ++i)
                    members += num(r.error_rate) + "," + std::to_string(r.run) + "," + std::to_string(i) + "," +
                               std::to_string(g.members[i]) + "," +
                               num(base[static_cast<std::size_t>(g.members[i])]) + "," + num(g.accuracies[i]) + "," +
                               num(g.gains[i]) + "\n";
                by_eps[r.error_rate].push_back(&r);
            }
            std::string summary = "epsilon,mean_size,stderr_size,mean_gain,peak_gain\n";
            for (const auto& [eps, list] : by_eps) {
                std::vector<double> sizes, gains;
                double peak = 0.0;
                for (const auto* r : list) {
                    sizes.push_back(static_cast<double>(r->result.members.size()));
                    for (double g : r->result.gains) {
                        gains.push_back(g);
                        peak = std::max(peak, g);
                    }
                }
                summary += num(eps) + "," + num(stats::mean(sizes)) + "," + num(stats::standard_error(sizes)) + "," +
                           num(gains.empty() ? 0.0 : stats::mean(gains)) + "," + num(peak) + "\n";
            }
            out.stage("greedy_runs.csv", detail);
            out.stage("greedy_members.csv", members);
            out.stage("greedy_summary.csv", summary);
            config["runs"] = cg_runs;
            out.commit("centric greedy", config, cg_common.seed, ALIGNTEACH_VERSION);
            std::cout << summary;
        };
    });

    Common cs_common;
    CentricOptions cs;
    std::vector<int> cs_sizes = {1, 2, 5, 10, 20, 50, 100};
    int cs_samples = 10;
    auto* sweep = centric->add_subcommand("size-sweep", "Accuracy against student-centric classroom size");
    add_common(sweep, cs_common, 9);
    cs.add(sweep);
    sweep->add_option("--sizes", cs_sizes, "Classroom sizes")->delimiter(',')->capture_default_str();
    sweep->add_option("--samples", cs_samples, "Random classrooms per (size, error rate)")->capture_default_str();
    sweep->callback([&] {
        action = [&] {
            cli::OutputDir out(cs_common.out);
            const Pool pool = obtain_pool(cs.pool_file, cs.pool.config(derive_seed(cs_common.seed, {0xC1})), out);
            SizeSweepConfig cfg;
            cfg.sizes = cs_sizes;
            cfg.error_rates = cs.epsilons;
            cfg.samples = cs_samples;
            cfg.t_iters = cs.t_iters;
            cfg.episode_seeds = cs.episodes;
            cfg.seed = derive_seed(cs_common.seed, {0xC4});
            cfg.workers = cs_common.workers;
            std::string csv = "size,mean_accuracy,stderr_accuracy\n";
            for (const auto& p : classroom_size_sweep(pool, cfg))
                csv += std::to_string(p.size) + "," + num(p.mean_accuracy) + "," + num(p.stderr_accuracy) + "\n";
            out.stage("size_sweep.csv", csv);
            json config = cs.describe();
            config["sizes"] = cs_sizes;
            config["samples"] = cs_samples;
            out.commit("centric size-sweep", config, cs_common.seed, ALIGNTEACH_VERSION);
            std::cout << csv;
        };
    });

    // ---- study ----
    auto* study_cmd = app.add_subcommand("study", "Human-study condition and response files");
    study_cmd->require_subcommand(1);

    Common se_common;
    std::vector<std::string> se_kinds = {"simple_features", "salient_dinos"};
    std::vector<std::string> se_structures = {"columns", "quadrants"};
    int se_simple_side = 6, se_dino_side = 7;
    study::ExportOptions se_opts;
    auto* export_cmd = study_cmd->add_subcommand("export-conditions", "Write one ConditionFile per condition");
    add_common(export_cmd, se_common, 0);
    export_cmd->add_option("--kinds", se_kinds, "Stimulus kinds")->delimiter(',')->capture_default_str();
    export_cmd->add_option("--labeling", se_structures, "Label structures")->delimiter(',')->capture_default_str();
    export_cmd->add_option("--grid-size", se_simple_side, "Grid side for simple_features")->capture_default_str();
    export_cmd->add_option("--dino-grid-size", se_dino_side, "Grid side for salient_dinos")->capture_default_str();
    export_cmd->add_option("--levels", se_opts.alignment_levels, "Teacher alignment levels from 1 down to 0")
        ->capture_default_str();
    export_cmd->add_option("--tolerance", se_opts.tolerance, "Accepted distance from each level")
        ->capture_default_str();
    export_cmd->add_option("--max-attempts", se_opts.max_attempts, "Teacher draws per level before giving up")
        ->capture_default_str();
    export_cmd->callback([&] {
        action = [&] {
            const auto structures = parse_labelings(se_structures);
            cli::OutputDir out(se_common.out);
            std::string index = "condition_id,stimulus_kind,labeling,grid_size,target_alignment,teacher_alignment\n";
            for (const auto& k : se_kinds) {
                const auto kind = study::parse_stimulus_kind(k);
                const int side = kind == study::StimulusKind::salient_dinos ? se_dino_side : se_simple_side;
                Rng rng = make_rng(se_common.seed, {0xD1, static_cast<std::uint64_t>(kind)});
                for (const auto& c : study::export_conditions(side, kind, structures, se_opts, rng)) {
                    out.stage("conditions/" + c.condition_id + ".json", study::to_json(c).dump(2) + "\n");
                    index += c.condition_id + "," + k + "," + std::string(to_string(c.spec.labeling())) + "," +
                             std::to_string(side) + "," + num(c.target_alignment) + "," + num(c.teacher_alignment) +
                             "\n";
                }
            }
            out.stage("conditions.csv", index);
            out.commit("study export-conditions",
                       {{"kinds", se_kinds},
                        {"labeling", se_structures},
                        {"grid_size", se_simple_side},
                        {"dino_grid_size", se_dino_side},
                        {"levels", se_opts.alignment_levels},
                        {"tolerance", se_opts.tolerance},
                        {"max_attempts", se_opts.max_attempts}},
                       se_common.seed, ALIGNTEACH_VERSION);
        };
    });

    Common ss_common;
    std::string ss_conditions;
    int ss_per_condition = 10;
    double ss_corruption_max = 0.5;
    auto* simulate = study_cmd->add_subcommand("simulate-responses", "Answer conditions with simulated 1-NN participants");
    add_common(simulate, ss_common, 0);
    simulate->add_option("--conditions", ss_conditions, "Directory of condition files")
        ->required()
        ->check(CLI::ExistingDirectory);
    simulate->add_option("--participants", ss_per_condition, "Participants per condition")->capture_default_str();
    simulate->add_option("--corruption-max", ss_corruption_max, "Participant corruption drawn from U(0, max)")
        ->capture_default_str();
    simulate->callback([&] {
        action = [&] {
            const auto conditions = load_conditions(ss_conditions);
            cli::OutputDir out(ss_common.out);
            std::string expected = "source,participant_id,condition_id,accuracy\n";
            for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
                const auto& c = conditions[ci];
                for (int p = 0; p < ss_per_condition; ++p) {
                    Rng rng = make_rng(ss_common.seed, {0xD2, ci, static_cast<std::uint64_t>(p)});
                    const double corruption = ss_corruption_max * uniform01(rng);
                    const Representation rep =
                        corrupt_representation(Representation::canonical(c.spec.side()), corruption, rng);
                    const std::string pid = "sim" + std::to_string(p);
                    const auto r = study::simulate_participant(c, rep, pid);
                    const std::string name = c.condition_id + "_" + pid + ".json";
                    out.stage("responses/" + name, study::to_json(r).dump(2) + "\n");
                    // Scored straight from the student model, not from the file.
                    const double acc = accuracy_1nn(rep, c.revealed, true_labels(c.spec).labels());
                    expected += name + "," + pid + "," + c.condition_id + "," + num(acc) + "\n";
                }
            }
            out.stage("expected_accuracy.csv", expected);
            out.commit("study simulate-responses",
                       {{"participants", ss_per_condition},
                        {"corruption_max", ss_corruption_max},
                        {"conditions_digest", digest_of_dir(ss_conditions)}},
                       ss_common.seed,
                       ALIGNTEACH_VERSION);
        };
    });

    Common si_common;
    std::string si_conditions, si_responses;
    auto* ingest = study_cmd->add_subcommand("ingest", "Validate and score response files");
    add_common(ingest, si_common, 0);
    ingest->add_option("--conditions", si_conditions, "Directory of condition files")
        ->required()
        ->check(CLI::ExistingDirectory);
    ingest->add_option("--responses", si_responses, "Directory of response files")
        ->required()
        ->check(CLI::ExistingDirectory);
    ingest->callback([&] {
        action = [&] {
            const auto conditions = load_conditions(si_conditions);
            const auto docs = load_responses(si_responses);
            const auto result = study::ingest_responses(conditions, docs);
            std::map<std::string, double> alignment_of;
            for (const auto& c : conditions) alignment_of[c.condition_id] = c.teacher_alignment;
            std::string participants = "source,participant_id,condition_id,teacher_alignment,accuracy,confidence\n";
            for (const auto& p : result.participants)
                participants += csv_field(p.source) + "," + csv_field(p.participant_id) + "," + p.condition_id + "," +
                                num(alignment_of[p.condition_id]) + "," + num(p.accuracy) + "," +
                                std::to_string(p.confidence) + "\n";
            std::string summary =
                "condition_id,teacher_alignment,participants,mean_accuracy,stderr_accuracy,mean_confidence\n";
            for (const auto& c : result.conditions)
                summary += c.condition_id + "," + num(c.teacher_alignment) + "," + std::to_string(c.participants) +
                           "," + num(c.mean_accuracy) + "," + num(c.stderr_accuracy) + "," + num(c.mean_confidence) +
                           "\n";
            std::string rejected = "source,reason,message\n";
            for (const auto& r : result.rejected)
                rejected += csv_field(r.source) + "," + std::string(study::to_string(r.reason)) + "," +
                            csv_field(r.message) + "\n";
            cli::OutputDir out(si_common.out);
            out.stage("participants.csv", participants);
            out.stage("conditions_summary.csv", summary);
            out.stage("rejected.csv", rejected);
            json inputs_cfg{{"conditions_digest", digest_of_dir(si_conditions)},
                            {"responses_digest", digest_of_dir(si_responses)}};
            out.commit("study ingest", inputs_cfg, si_common.seed, ALIGNTEACH_VERSION);
            std::cerr << result.participants.size() << " accepted, " << result.rejected.size() << " rejected\n";
        };
    });

    Common sp_common;
    std::string sp_conditions, sp_responses;
    std::vector<double> sp_eps = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    int sp_seeds = 100;
    auto* posthoc = study_cmd->add_subcommand("posthoc", "Rescore responses against error-flipped labels");
    add_common(posthoc, sp_common, 0);
    posthoc->add_option("--conditions", sp_conditions, "Directory of condition files")
        ->required()
        ->check(CLI::ExistingDirectory);
    posthoc->add_option("--responses", sp_responses, "Directory of response files")
        ->required()
        ->check(CLI::ExistingDirectory);
    posthoc->add_option("--epsilon", sp_eps, "Teacher error rates")->delimiter(',')->capture_default_str();
    posthoc->add_option("--seeds", sp_seeds, "Label flips per error rate")->capture_default_str();
    posthoc->callback([&] {
        action = [&] {
            const auto conditions = load_conditions(sp_conditions);
            const auto docs = load_responses(sp_responses);
            const auto ingested = study::ingest_responses(conditions, docs);
            std::map<std::string, std::vector<study::PosthocSubject>> by_condition;
            std::map<std::string, std::string> source_of;
            for (const auto& doc : docs) {
                const bool accepted =
                    std::any_of(ingested.participants.begin(), ingested.participants.end(),
                                [&](const auto& p) { return p.source == doc.name; });
                if (!accepted) continue;
                const auto r = study::response_from_json(doc.document);
                by_condition[r.condition_id].push_back({r.participant_id, r.choices});
                source_of[r.condition_id + "/" + r.participant_id] = doc.name;
            }
            std::string csv = "source,participant_id,condition_id,epsilon,mean_accuracy,stderr_accuracy\n";
            for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
                const auto& c = conditions[ci];
                const auto it = by_condition.find(c.condition_id);
                if (it == by_condition.end()) continue;
                const auto cells = study::posthoc_error(it->second, true_labels(c.spec), sp_eps, sp_seeds,
                                                        derive_seed(sp_common.seed, {0xD3, ci}));
                for (std::size_t s = 0; s < it->second.size(); ++s)
                    for (const auto& cell : cells[s])
                        csv += csv_field(source_of[c.condition_id + "/" + it->second[s].participant_id]) + "," +
                               csv_field(it->second[s].participant_id) + "," + c.condition_id + "," +
                               num(cell.epsilon) + "," + num(cell.mean_accuracy) + "," + num(cell.stderr_accuracy) +
                               "\n";
            }
            cli::OutputDir out(sp_common.out);
            out.stage("posthoc.csv", csv);
            out.commit("study posthoc",
                       {{"epsilon", sp_eps},
                        {"seeds", sp_seeds},
                        {"conditions_digest", digest_of_dir(sp_conditions)},
                        {"responses_digest", digest_of_dir(sp_responses)}},
                       sp_common.seed, ALIGNTEACH_VERSION);
        };
    });

    Common sr_common;
    std::string sr_input;
    int sr_permutations = 10000;
    auto* regress = study_cmd->add_subcommand("regress", "Regress participant accuracy on teacher alignment");
    add_common(regress, sr_common, 0);
    regress->add_option("--input", sr_input, "CSV with teacher_alignment and accuracy columns (e.g. participants.csv)")
        ->required()
        ->check(CLI::ExistingFile);
    regress->add_option("--permutations", sr_permutations, "Permutations for the p-value")->capture_default_str();
    regress->callback([&] {
        action = [&] {
            cli::OutputDir out(sr_common.out);
            out.note_input("input", sr_input);
            std::istringstream in(cli::read_file(sr_input));
            std::string line;
            if (!std::getline(in, line)) throw Error(ErrorKind::io, "empty input CSV");
            const auto split = [](const std::string& s) {
                std::vector<std::string> f;
                std::string cur;
                bool quoted = false;
                for (char ch : s) {
                    if (ch == '"') quoted = !quoted;
                    else if (ch == ',' && !quoted) {
                        f.push_back(cur);
                        cur.clear();
                    } else cur += ch;
                }
                f.push_back(cur);
                return f;
            };
            const auto header = split(line);
            const auto col = [&](const std::string& name) {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) throw Error(ErrorKind::io, "input CSV lacks a '" + name + "' column");
                return static_cast<std::size_t>(it - header.begin());
            };
            const std::size_t ai = col("teacher_alignment"), yi = col("accuracy");
            std::vector<study::AlignmentPoint> points;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto f = split(line);
                if (f.size() != header.size()) throw Error(ErrorKind::io, "ragged row in input CSV");
                try {
                    points.push_back({std::stod(f[ai]), std::stod(f[yi])});
                } catch (const std::exception&) {
                    throw Error(ErrorKind::io, "non-numeric value in input CSV");
                }
            }
            Rng rng = make_rng(sr_common.seed, {0xD4});
            const auto r = study::regress_alignment_accuracy(points, sr_permutations, rng);
            const json result{{"slope", r.slope},       {"intercept", r.intercept},
                              {"pearson_r", r.pearson_r}, {"p_value", r.p_value},
                              {"points", r.points},     {"permutations", r.permutations}};
            out.stage("regression.json", result.dump(2) + "\n");
            out.commit("study regress", {{"permutations", sr_permutations}}, sr_common.seed, ALIGNTEACH_VERSION);
            std::cout << result.dump(2) << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (action) action();
    } catch (const std::exception& e) {
        std::cerr << "alignteach: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
