#pragma once

// Assigning pool students to teachers, realizing outcomes, and the
// student-centric classroom experiments.

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "alignteach/curves.hpp"
#include "alignteach/pools.hpp"

namespace alignteach {

enum class Method { random, mooc, ours, optimal };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);
std::vector<Method> all_methods();

struct Assignment {
    Method method = Method::random;
    std::vector<int> teacher_of;  // indexed by student id
};

struct EvaluationSettings {
    int episode_seeds = 10;
    int t_iters = kDefaultInnerIterations;  // student-centric inner loop
    std::uint64_t seed = 0;
    int workers = 1;
};

inline constexpr double kDefaultPassThreshold = 0.45;

// Per-student accuracy against the true labels, averaged over episodes. Each
// teacher produces one teaching set per episode, shared by its classroom.
std::vector<double> realize_outcomes(const Pool& pool, const Assignment& assignment,
                                     const EvaluationSettings& settings);

// Students x teachers matrix of one-on-one realized accuracy, using the same
// episode streams as realize_outcomes.
std::vector<std::vector<double>> dyadic_accuracy_matrix(const Pool& pool, const EvaluationSettings& settings);

Assignment match_random(const Pool& pool, Rng& rng);
Assignment match_mooc(const Pool& pool);
Assignment match_ours(const Pool& pool, const CurveTable& curve);
Assignment match_optimal(const Pool& pool, const EvaluationSettings& settings);
Assignment match_optimal(const Pool& pool, const std::vector<std::vector<double>>& dyadic);

struct OutcomeReport {
    double avg_accuracy = 0.0;
    double bottom_decile_mean = 0.0;
    double top_decile_mean = 0.0;
    double pass_rate = 0.0;
    std::vector<double> per_student_accuracies;
};

OutcomeReport report(std::span<const double> accuracies, double pass_threshold = kDefaultPassThreshold);

struct MethodSummary {
    Method method = Method::random;
    std::vector<OutcomeReport> per_pool;
    double avg = 0.0, bottom10 = 0.0, top10 = 0.0, pass_rate = 0.0;
    double stderr_avg = 0.0, stderr_bottom10 = 0.0, stderr_top10 = 0.0, stderr_pass_rate = 0.0;
};

struct MatchingExperiment {
    PoolConfig pool_config;
    std::vector<Method> methods = all_methods();
    int pools = 10;
    int episode_seeds = 10;
    double pass_threshold = kDefaultPassThreshold;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct MatchingResult {
    std::vector<MethodSummary> summaries;
    std::vector<std::vector<Assignment>> assignments;  // [pool][method]
};

// Resamples `pools` pools and scores every method on each with identical
// evaluation streams. `curve` is required when Ours is requested.
MatchingResult run_matching_experiment(const MatchingExperiment& exp, const CurveTable* curve);

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& summaries);

nlohmann::json assignment_to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);

struct GreedyResult {
    std::vector<int> members;       // in order of admission
    std::vector<double> gains;      // centric accuracy - base accuracy, per member
    std::vector<double> accuracies; // centric accuracy per member
    int stopping_student = -1;      // -1 when the pool was exhausted
    double stopping_gain = 0.0;
};

// Grows a student-centric classroom from the lowest-performing students until
// a newly admitted student fails to beat their base accuracy.
GreedyResult greedy_student_centric(const Pool& pool, std::span<const double> base_accuracies,
                                    double centric_error, const EvaluationSettings& settings);

// Per-member accuracy for a student-centric teacher teaching `members`; the
// reference path for what the greedy procedure computes incrementally.
std::vector<double> realize_centric_classroom(const Pool& pool, std::span<const int> members, double centric_error,
                                              const EvaluationSettings& settings);

struct GreedyExperiment {
    std::vector<double> error_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    int runs = 20;
    int t_iters = kDefaultInnerIterations;
    int episode_seeds = 10;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct GreedyRun {
    double error_rate = 0.0;
    int run = 0;
    GreedyResult result;
};

// One greedy classroom per (error rate, run). Run r uses the same candidate
// streams at every error rate.
std::vector<GreedyRun> run_greedy_experiment(const Pool& pool, std::span<const double> base_accuracies,
                                             const GreedyExperiment& exp);

struct SizeSweepConfig {
    std::vector<int> sizes = {1, 2, 5, 10, 20, 50, 100};
    std::vector<double> error_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    int samples = 10;
    int t_iters = kDefaultInnerIterations;
    int episode_seeds = 10;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SizeSweepPoint {
    int size = 0;
    double mean_accuracy = 0.0;
    double stderr_accuracy = 0.0;
};

std::vector<SizeSweepPoint> classroom_size_sweep(const Pool& pool, const SizeSweepConfig& cfg);

}  // namespace alignteach
