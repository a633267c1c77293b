#pragma once

// Student/teacher populations for classroom matching.

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

#include "alignteach/agents.hpp"
#include "alignteach/grid_env.hpp"
#include "alignteach/rng.hpp"

namespace alignteach {

enum class PoolMode { unstructured, structured };

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view text);

struct PoolConfig {
    PoolMode mode = PoolMode::unstructured;
    GridSpec spec{6, Labeling::rows};
    int n_students = 1000;
    int m_teachers = 30;
    double beta_alpha = 1.5;
    double beta_beta = 2.5;
    double error_low = 0.0;
    double error_high = 0.5;
    int clusters = 10;
    int students_per_cluster = 50;
    int teachers_kept = 5;
    double within_cluster_corruption = 0.01;
    double teacher_extra_corruption_high = 0.01;
    std::uint64_t master_seed = 0;

    static PoolConfig unstructured_defaults(GridSpec spec = {6, Labeling::rows});
    static PoolConfig structured_defaults(GridSpec spec = {6, Labeling::rows});

    void validate() const;
};

struct Student {
    int id = 0;
    Representation representation;
    double corruption = 0.0;
    int cluster = -1;
};

struct Teacher {
    int id = 0;
    TeacherConfig config;
    double corruption = 0.0;
    int cluster = -1;
};

struct Cluster {
    int id = 0;
    double seed_corruption = 0.0;
    Representation seed;
    std::vector<int> members;
};

struct Pool {
    GridSpec spec{6, Labeling::rows};
    std::vector<Student> students;
    std::vector<Teacher> teachers;
    std::vector<Cluster> clusters;  // empty for unstructured pools
};

Pool generate_unstructured(const PoolConfig& cfg, Rng& rng);
Pool generate_structured(const PoolConfig& cfg, Rng& rng);

// Dispatches on cfg.mode with a stream seeded from cfg.master_seed.
Pool generate_pool(const PoolConfig& cfg);

double sample_beta(double alpha, double beta, Rng& rng);

nlohmann::json pool_to_json(const Pool& pool, const std::optional<PoolConfig>& cfg = std::nullopt);
Pool pool_from_json(const nlohmann::json& j);

}  // namespace alignteach
