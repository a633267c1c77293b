#include "alignteach/pools.hpp"

#include <algorithm>
#include <boost/random/beta_distribution.hpp>
#include <nlohmann/json.hpp>
#include <numeric>

#include "alignteach/error.hpp"

namespace alignteach {

std::string_view to_string(PoolMode mode) {
    return mode == PoolMode::unstructured ? "unstructured" : "structured";
}

PoolMode parse_pool_mode(std::string_view text) {
    if (text == "unstructured") return PoolMode::unstructured;
    if (text == "structured") return PoolMode::structured;
    throw Error(ErrorKind::config, "unknown pool mode '" + std::string(text) + "'");
}

PoolConfig PoolConfig::unstructured_defaults(GridSpec spec) {
    PoolConfig cfg;
    cfg.spec = spec;
    return cfg;
}

PoolConfig PoolConfig::structured_defaults(GridSpec spec) {
    PoolConfig cfg;
    cfg.mode = PoolMode::structured;
    cfg.spec = spec;
    return cfg;
}

void PoolConfig::validate() const {
    if (n_students < 1 || m_teachers < 1 || clusters < 1 || students_per_cluster < 1 || teachers_kept < 1)
        throw Error(ErrorKind::config, "pool counts must be positive");
    if (teachers_kept > clusters) throw Error(ErrorKind::config, "teachers_kept exceeds the number of clusters");
    if (!(beta_alpha > 0.0 && beta_beta > 0.0)) throw Error(ErrorKind::config, "beta parameters must be positive");
    if (!(0.0 <= error_low && error_low <= error_high && error_high <= 1.0))
        throw Error(ErrorKind::config, "teacher error range must satisfy 0 <= low <= high <= 1");
    if (!(within_cluster_corruption >= 0.0 && within_cluster_corruption <= 1.0) ||
        !(teacher_extra_corruption_high >= 0.0 && teacher_extra_corruption_high <= 1.0))
        throw Error(ErrorKind::config, "corruption levels must lie in [0, 1]");
}

double sample_beta(double alpha, double beta, Rng& rng) {
    return boost::random::beta_distribution<double>(alpha, beta)(rng);
}

namespace {

double uniform_between(double lo, double hi, Rng& rng) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace

Pool generate_unstructured(const PoolConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.mode != PoolMode::unstructured) throw Error(ErrorKind::config, "config is not unstructured");
    const Representation canonical = Representation::canonical(cfg.spec.side());
    Pool pool{cfg.spec, {}, {}, {}};
    pool.students.reserve(static_cast<std::size_t>(cfg.n_students));
    for (int i = 0; i < cfg.n_students; ++i) {
        const double c = sample_beta(cfg.beta_alpha, cfg.beta_beta, rng);
        pool.students.push_back({i, corrupt_representation(canonical, c, rng), c, -1});
    }
    for (int t = 0; t < cfg.m_teachers; ++t) {
        const double c = sample_beta(cfg.beta_alpha, cfg.beta_beta, rng);
        Representation rep = corrupt_representation(canonical, c, rng);
        const double eps = uniform_between(cfg.error_low, cfg.error_high, rng);
        pool.teachers.push_back({t, {std::move(rep), eps, TeacherKind::self_centered}, c, -1});
    }
    return pool;
}

Pool generate_structured(const PoolConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.mode != PoolMode::structured) throw Error(ErrorKind::config, "config is not structured");
    const Representation canonical = Representation::canonical(cfg.spec.side());
    Pool pool{cfg.spec, {}, {}, {}};
    std::vector<Teacher> candidates;
    for (int m = 0; m < cfg.clusters; ++m) {
        const double level = static_cast<double>(m) / cfg.clusters;
        Cluster cluster{m, level, corrupt_representation(canonical, level, rng), {}};
        for (int s = 0; s < cfg.students_per_cluster; ++s) {
            const int id = static_cast<int>(pool.students.size());
            pool.students.push_back(
                {id, corrupt_representation(cluster.seed, cfg.within_cluster_corruption, rng), level, m});
            cluster.members.push_back(id);
        }
        const double extra = uniform_between(0.0, cfg.teacher_extra_corruption_high, rng);
        Representation rep = corrupt_representation(cluster.seed, extra, rng);
        const double eps = uniform_between(cfg.error_low, cfg.error_high, rng);
        candidates.push_back({m, {std::move(rep), eps, TeacherKind::self_centered}, extra, m});
        pool.clusters.push_back(std::move(cluster));
    }
    // Uniform dropout without replacement; survivors keep cluster order and
    // are renumbered 0..kept-1.
    std::vector<int> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(cfg.teachers_kept));
    std::sort(order.begin(), order.end());
    for (int idx : order) {
        Teacher t = candidates[static_cast<std::size_t>(idx)];
        t.id = static_cast<int>(pool.teachers.size());
        pool.teachers.push_back(std::move(t));
    }
    return pool;
}

Pool generate_pool(const PoolConfig& cfg) {
    Rng rng = make_rng(cfg.master_seed, {0x9001});
    return cfg.mode == PoolMode::unstructured ? generate_unstructured(cfg, rng) : generate_structured(cfg, rng);
}

nlohmann::json pool_to_json(const Pool& pool, const std::optional<PoolConfig>& cfg) {
    using nlohmann::json;
    json students = json::array();
    for (const auto& s : pool.students)
        students.push_back({{"id", s.id}, {"corruption", s.corruption}, {"cluster", s.cluster},
                            {"representation", s.representation}});
    json teachers = json::array();
    for (const auto& t : pool.teachers)
        teachers.push_back({{"id", t.id},
                            {"corruption", t.corruption},
                            {"cluster", t.cluster},
                            {"error_rate", t.config.error_rate},
                            {"kind", t.config.kind == TeacherKind::self_centered ? "self_centered" : "student_centric"},
                            {"representation", t.config.representation}});
    json clusters = json::array();
    for (const auto& c : pool.clusters)
        clusters.push_back({{"id", c.id}, {"seed_corruption", c.seed_corruption}, {"members", c.members},
                            {"seed", c.seed}});
    json doc{{"format_version", 1}, {"spec", pool.spec}, {"students", students}, {"teachers", teachers},
             {"clusters", clusters}};
    if (cfg) {
        doc["config"] = {{"mode", std::string(to_string(cfg->mode))},
                         {"n_students", cfg->n_students},
                         {"m_teachers", cfg->m_teachers},
                         {"beta_alpha", cfg->beta_alpha},
                         {"beta_beta", cfg->beta_beta},
                         {"error_low", cfg->error_low},
                         {"error_high", cfg->error_high},
                         {"clusters", cfg->clusters},
                         {"students_per_cluster", cfg->students_per_cluster},
                         {"teachers_kept", cfg->teachers_kept},
                         {"within_cluster_corruption", cfg->within_cluster_corruption},
                         {"master_seed", cfg->master_seed}};
    }
    return doc;
}

Pool pool_from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1) throw Error(ErrorKind::validation, "unsupported pool format_version");
    Pool pool{grid_spec_from_json(j.at("spec")), {}, {}, {}};
    for (const auto& s : j.at("students"))
        pool.students.push_back({s.at("id").get<int>(), representation_from_json(s.at("representation")),
                                 s.at("corruption").get<double>(), s.at("cluster").get<int>()});
    for (const auto& t : j.at("teachers")) {
        const auto kind = t.at("kind").get<std::string>() == "student_centric" ? TeacherKind::student_centric
                                                                               : TeacherKind::self_centered;
        pool.teachers.push_back({t.at("id").get<int>(),
                                 {representation_from_json(t.at("representation")), t.at("error_rate").get<double>(), kind},
                                 t.at("corruption").get<double>(),
                                 t.at("cluster").get<int>()});
    }
    for (const auto& c : j.at("clusters"))
        pool.clusters.push_back({c.at("id").get<int>(), c.at("seed_corruption").get<double>(),
                                 representation_from_json(c.at("seed")), c.at("members").get<std::vector<int>>()});
    for (std::size_t i = 0; i < pool.students.size(); ++i)
        if (pool.students[i].id != static_cast<int>(i)) throw Error(ErrorKind::validation, "student ids must be 0..n-1");
    for (std::size_t i = 0; i < pool.teachers.size(); ++i)
        if (pool.teachers[i].id != static_cast<int>(i)) throw Error(ErrorKind::validation, "teacher ids must be 0..m-1");
    for (const auto& s : pool.students)
        if (s.representation.side() != pool.spec.side()) throw Error(ErrorKind::validation, "student grid mismatch");
    for (const auto& t : pool.teachers)
        if (t.config.representation.side() != pool.spec.side())
            throw Error(ErrorKind::validation, "teacher grid mismatch");
    return pool;
}

}  // namespace alignteach
