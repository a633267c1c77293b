#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "alignteach/error.hpp"
#include "alignteach/matching.hpp"
#include "alignteach/stats.hpp"

using namespace alignteach;

namespace {

Pool small_pool(std::uint64_t seed, PoolMode mode = PoolMode::unstructured) {
    PoolConfig cfg = mode == PoolMode::unstructured ? PoolConfig::unstructured_defaults()
                                                    : PoolConfig::structured_defaults();
    cfg.n_students = 60;
    cfg.m_teachers = 6;
    cfg.clusters = 4;
    cfg.students_per_cluster = 10;
    cfg.teachers_kept = 2;
    cfg.master_seed = seed;
    return generate_pool(cfg);
}

Teacher teacher_with_error(int id, double eps) {
    return {id, {Representation::canonical(6), eps, TeacherKind::self_centered}, 0.0, -1};
}

}  // namespace

TEST(Mooc, PicksLowestErrorTeacher) {
    Pool pool{GridSpec(6, Labeling::rows), {}, {}, {}};
    pool.students.push_back({0, Representation::canonical(6), 0.0, -1});
    pool.students.push_back({1, Representation::canonical(6), 0.0, -1});
    for (double e : {0.3, 0.05, 0.4}) pool.teachers.push_back(teacher_with_error(static_cast<int>(pool.teachers.size()), e));
    const auto a = match_mooc(pool);
    EXPECT_EQ(a.teacher_of, (std::vector<int>{1, 1}));
    pool.teachers[2].config.error_rate = 0.05;  // tie goes to the lower id
    EXPECT_EQ(match_mooc(pool).teacher_of, (std::vector<int>{1, 1}));
}

TEST(Report, DecilesAndPassRate) {
    const std::vector<double> acc = {0.9, 0.1, 0.5, 0.3, 0.45, 0.7, 0.2, 0.6, 0.8, 0.4};
    const auto r = report(acc);
    EXPECT_NEAR(r.avg_accuracy, 0.495, 1e-15);
    EXPECT_DOUBLE_EQ(r.bottom_decile_mean, 0.1);
    EXPECT_DOUBLE_EQ(r.top_decile_mean, 0.9);
    EXPECT_DOUBLE_EQ(r.pass_rate, 0.6);  // 0.45 itself passes
    EXPECT_DOUBLE_EQ(report(acc, 0.95).pass_rate, 0.0);
}

TEST(Report, SmallClassUsesOneStudentDecileAndRejectsEmpty) {
    const std::vector<double> acc = {0.2, 0.6, 0.4};
    const auto r = report(acc);
    EXPECT_DOUBLE_EQ(r.bottom_decile_mean, 0.2);
    EXPECT_DOUBLE_EQ(r.top_decile_mean, 0.6);
    EXPECT_THROW(report(std::vector<double>{}), Error);
}

TEST(ReportProperty, PermutationInvariantBitForBit) {
    Rng rng(4);
    std::vector<double> acc(237);
    for (double& a : acc) a = uniform01(rng);
    const auto r = report(acc);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(acc.begin(), acc.end(), rng);
        const auto s = report(acc);
        EXPECT_EQ(s.avg_accuracy, r.avg_accuracy);
        EXPECT_EQ(s.bottom_decile_mean, r.bottom_decile_mean);
        EXPECT_EQ(s.top_decile_mean, r.top_decile_mean);
        EXPECT_EQ(s.pass_rate, r.pass_rate);
        EXPECT_LE(s.bottom_decile_mean, s.avg_accuracy);
        EXPECT_LE(s.avg_accuracy, s.top_decile_mean);
    }
}

TEST(Realize, SelfCenteredOutcomesEqualDyadicEntries) {
    const Pool pool = small_pool(5);
    EvaluationSettings settings;
    settings.seed = 9;
    const auto dyadic = dyadic_accuracy_matrix(pool, settings);
    Rng rng(2);
    const auto a = match_random(pool, rng);
    const auto realized = realize_outcomes(pool, a, settings);
    for (std::size_t s = 0; s < pool.students.size(); ++s)
        EXPECT_EQ(realized[s], dyadic[s][static_cast<std::size_t>(a.teacher_of[s])]);
}

TEST(Realize, CoverageErrors) {
    const Pool pool = small_pool(5);
    EvaluationSettings settings;
    Assignment short_a{Method::random, std::vector<int>(pool.students.size() - 1, 0)};
    EXPECT_THROW(realize_outcomes(pool, short_a, settings), Error);
    Assignment bad{Method::random, std::vector<int>(pool.students.size(), 0)};
    bad.teacher_of[3] = 99;
    try {
        realize_outcomes(pool, bad, settings);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::coverage);
    }
}

TEST(OptimalProperty, DominatesEveryOtherMethodPerStudent) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Pool pool = small_pool(seed);
        EvaluationSettings settings;
        settings.seed = seed;
        const auto opt = realize_outcomes(pool, match_optimal(pool, settings), settings);
        Rng rng(seed);
        CurveTable flat;
        flat.set_cell(10, 0, {0.5, 1});
        for (const auto& a : {match_random(pool, rng), match_mooc(pool), match_ours(pool, flat)}) {
            const auto other = realize_outcomes(pool, a, settings);
            for (std::size_t s = 0; s < opt.size(); ++s) EXPECT_GE(opt[s], other[s]);
        }
    }
}

TEST(Ours, FollowsTheCurve) {
    Pool pool{GridSpec(6, Labeling::rows), {}, {}, {}};
    pool.students.push_back({0, Representation::canonical(6), 0.0, -1});
    Rng rng(3);
    const auto scrambled = corrupt_representation(Representation::canonical(6), 1.0, rng);
    pool.teachers.push_back({0, {scrambled, 0.0, TeacherKind::self_centered}, 1.0, -1});
    pool.teachers.push_back({1, {Representation::canonical(6), 0.4, TeacherKind::self_centered}, 0.0, -1});
    CurveTable t;
    for (int e = 0; e < CurveTable::kErrorBuckets; ++e)
        for (int a = 0; a < CurveTable::kAlignmentBuckets; ++a) t.set_cell(a, e, {a / 20.0 - e / 100.0, 1});
    // Alignment dominates this curve, so the aligned but erroneous teacher wins.
    EXPECT_EQ(match_ours(pool, t).teacher_of, std::vector<int>{1});
    // Constant curve: every teacher ties, lowest id wins.
    CurveTable flat;
    flat.set_cell(0, 0, {0.3, 1});
    EXPECT_EQ(match_ours(pool, flat).teacher_of, std::vector<int>{0});
}

TEST(Random, RoughlyUniform) {
    Pool pool = small_pool(1);
    Rng rng(10);
    std::vector<int> counts(pool.teachers.size(), 0);
    for (int r = 0; r < 100; ++r)
        for (int t : match_random(pool, rng).teacher_of) ++counts[static_cast<std::size_t>(t)];
    for (int c : counts) EXPECT_NEAR(c / 6000.0, 1.0 / 6.0, 0.02);
}

TEST(Experiment, DeterministicAndWorkerIndependent) {
    MatchingExperiment exp;
    exp.pool_config = PoolConfig::unstructured_defaults();
    exp.pool_config.n_students = 80;
    exp.pool_config.m_teachers = 5;
    exp.pools = 3;
    exp.episode_seeds = 3;
    exp.seed = 11;
    CurveTable flat;
    flat.set_cell(10, 0, {0.5, 1});
    const auto a = run_matching_experiment(exp, &flat);
    exp.workers = 3;
    const auto b = run_matching_experiment(exp, &flat);
    std::ostringstream sa, sb;
    write_summary_csv(sa, a.summaries);
    write_summary_csv(sb, b.summaries);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')),
              "method,avg,bottom10,top10,pass_rate,stderr_avg,stderr_bottom10,stderr_top10,stderr_pass_rate");
    ASSERT_EQ(a.summaries.size(), 4u);
    EXPECT_GE(a.summaries[3].avg, a.summaries[0].avg);
    EXPECT_THROW(run_matching_experiment(exp, nullptr), Error);
}

TEST(AssignmentJson, RoundTrip) {
    const Assignment a{Method::optimal, {0, 2, 1, 1}};
    const auto b = assignment_from_json(assignment_to_json(a));
    EXPECT_EQ(b.method, a.method);
    EXPECT_EQ(b.teacher_of, a.teacher_of);
    EXPECT_THROW(parse_method("best"), Error);
}

TEST(Greedy, IncrementalSearchMatchesFromScratchClassroom) {
    const Pool pool = small_pool(21, PoolMode::structured);
    EvaluationSettings settings;
    settings.seed = 3;
    settings.t_iters = 20;
    settings.episode_seeds = 4;
    CurveTable flat;
    flat.set_cell(10, 0, {0.5, 1});
    const auto base = realize_outcomes(pool, match_mooc(pool), settings);
    for (double eps : {0.0, 0.3}) {
        const auto g = greedy_student_centric(pool, base, eps, settings);
        if (g.members.empty()) continue;
        const auto scratch = realize_centric_classroom(pool, g.members, eps, settings);
        ASSERT_EQ(scratch.size(), g.accuracies.size());
        for (std::size_t i = 0; i < scratch.size(); ++i) EXPECT_NEAR(scratch[i], g.accuracies[i], 1e-12);
    }
}

TEST(Greedy, AdmitsWorstFirstAndStopsAtFirstNonGain) {
    const Pool pool = small_pool(22, PoolMode::structured);
    EvaluationSettings settings;
    settings.seed = 4;
    settings.t_iters = 20;
    settings.episode_seeds = 4;
    const auto base = realize_outcomes(pool, match_mooc(pool), settings);
    const auto g = greedy_student_centric(pool, base, 0.0, settings);
    for (std::size_t i = 1; i < g.members.size(); ++i)
        EXPECT_LE(base[static_cast<std::size_t>(g.members[i - 1])], base[static_cast<std::size_t>(g.members[i])]);
    ASSERT_EQ(g.gains.size(), g.members.size());
    for (std::size_t i = 0; i < g.gains.size(); ++i)
        EXPECT_DOUBLE_EQ(g.gains[i], g.accuracies[i] - base[static_cast<std::size_t>(g.members[i])]);
    if (g.stopping_student >= 0) {
        EXPECT_LE(g.stopping_gain, 0.0);
        EXPECT_EQ(std::count(g.members.begin(), g.members.end(), g.stopping_student), 0);
    } else {
        EXPECT_EQ(g.members.size(), pool.students.size());
    }
    EXPECT_THROW(greedy_student_centric(pool, std::vector<double>(3, 0.1), 0.0, settings), Error);
    EXPECT_THROW(greedy_student_centric(pool, base, 1.5, settings), Error);
}

TEST(Greedy, ExperimentIsWorkerIndependent) {
    const Pool pool = small_pool(23, PoolMode::structured);
    EvaluationSettings settings;
    settings.seed = 5;
    settings.episode_seeds = 3;
    const auto base = realize_outcomes(pool, match_mooc(pool), settings);
    GreedyExperiment exp;
    exp.error_rates = {0.0, 0.5};
    exp.runs = 3;
    exp.t_iters = 10;
    exp.episode_seeds = 3;
    exp.seed = 6;
    const auto a = run_greedy_experiment(pool, base, exp);
    exp.workers = 4;
    const auto b = run_greedy_experiment(pool, base, exp);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].result.members, b[i].result.members);
        EXPECT_EQ(a[i].result.accuracies, b[i].result.accuracies);
    }
}

TEST(SizeSweep, DeterministicAndValidated) {
    const Pool pool = small_pool(24, PoolMode::structured);
    SizeSweepConfig cfg;
    cfg.sizes = {1, 5, 20};
    cfg.error_rates = {0.0, 0.2};
    cfg.samples = 2;
    cfg.t_iters = 10;
    cfg.episode_seeds = 2;
    cfg.seed = 7;
    const auto a = classroom_size_sweep(pool, cfg);
    cfg.workers = 3;
    const auto b = classroom_size_sweep(pool, cfg);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].size, cfg.sizes[i]);
        EXPECT_EQ(a[i].mean_accuracy, b[i].mean_accuracy);
    }
    cfg.sizes = {41};
    EXPECT_THROW(classroom_size_sweep(pool, cfg), Error);
}

TEST(Report, ThresholdCountAndConstantInput) {
    EXPECT_DOUBLE_EQ(report(std::vector<double>{0.5, 0.4, 0.46}).pass_rate, 2.0 / 3.0);
    const auto r = report(std::vector<double>(7, 0.3));
    EXPECT_EQ(r.avg_accuracy, 0.3);
    EXPECT_EQ(r.bottom_decile_mean, 0.3);
    EXPECT_EQ(r.top_decile_mean, 0.3);
}

TEST(Ours, CoincidesWithMoocWhenTeachersShareARepresentation) {
    Pool pool = small_pool(30);
    Rng rng(4);
    const auto shared = corrupt_representation(Representation::canonical(6), 0.3, rng);
    for (auto& t : pool.teachers) t.config.representation = shared;
    // Curve decreasing in error at every alignment.
    CurveTable t;
    for (int e = 0; e < CurveTable::kErrorBuckets; ++e)
        for (int a = 0; a < CurveTable::kAlignmentBuckets; ++a) t.set_cell(a, e, {0.9 - 0.05 * e + 0.001 * a, 1});
    // Distinct error buckets keep lookups from tying.
    for (std::size_t i = 0; i < pool.teachers.size(); ++i) pool.teachers[i].config.error_rate = 0.05 + 0.1 * ((i * 7) % 6);
    EXPECT_EQ(match_ours(pool, t).teacher_of, match_mooc(pool).teacher_of);
}

TEST(Greedy, MaximallyWrongTeacherAdmitsAtMostOne) {
    const Pool pool = small_pool(25, PoolMode::structured);
    EvaluationSettings settings;
    settings.seed = 8;
    settings.t_iters = 20;
    settings.episode_seeds = 4;
    const auto base = realize_outcomes(pool, match_mooc(pool), settings);
    const auto g = greedy_student_centric(pool, base, 1.0, settings);
    EXPECT_LE(g.members.size(), 1u);
}

TEST(SizeSweep, SingleAlignedStudentMatchesBestOfRandomSearch) {
    // With one aligned student and exact beliefs the realized accuracy is the
    // best of t_iters random one-per-row sets. Independent Monte Carlo
    // estimate of that maximum, using plain floating-point 1-NN.
    const int n = 6, iters = 100;
    Rng oracle(12345);
    double total = 0;
    const int reps = 3000;
    for (int r = 0; r < reps; ++r) {
        double best = 0;
        for (int i = 0; i < iters; ++i) {
            int col[6];
            for (int y = 0; y < n; ++y) col[y] = uniform_index(oracle, n);
            int correct = 0;
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    if (x == col[y]) continue;
                    double best_d = 1e9;
                    int label = -1;
                    for (int yy = 0; yy < n; ++yy) {  // revealed ids ascend with yy
                        const double d = std::hypot(x - col[yy], y - yy);
                        if (d < best_d - 1e-9) {
                            best_d = d;
                            label = yy;
                        }
                    }
                    correct += label == y;
                }
            best = std::max(best, correct / 30.0);
        }
        total += best;
    }
    const double expected = total / reps;

    Pool pool{GridSpec(6, Labeling::rows), {}, {}, {}};
    pool.students.push_back({0, Representation::canonical(6), 0.0, 0});
    SizeSweepConfig cfg;
    cfg.sizes = {1};
    cfg.error_rates = {0.0};
    cfg.samples = 20;
    cfg.episode_seeds = 10;
    cfg.seed = 3;
    const auto p = classroom_size_sweep(pool, cfg);
    EXPECT_NEAR(p[0].mean_accuracy, expected, 0.03);
}
